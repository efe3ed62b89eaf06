#include "supplyshare/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "supplyshare/csv.hpp"
#include "supplyshare/error.hpp"
#include "supplyshare/posterior_summary.hpp"

namespace supplyshare {

namespace {

double column_median(const ChainOutput& out, int col) {
    std::vector<double> v;
    v.reserve(out.total_draws());
    for (const auto& c : out.chains) {
        for (Eigen::Index i = 0; i < c.rows(); ++i) v.push_back(c(i, col));
    }
    return median(std::move(v));
}

}  // namespace

DeltaMedians delta_medians(const ChainOutput& out, const ModelInputs& in) {
    const StateLayout& l = out.layout;
    DeltaMedians d;
    d.Q = l.Q;
    d.M = l.M;
    d.H = l.H;
    d.median.resize(static_cast<std::size_t>(l.n_alpha() * l.H));
    for (std::size_t j = 0; j < d.median.size(); ++j) d.median[j] = column_median(out, l.off_delta() + static_cast<int>(j));
    for (int q = 0; q < l.Q; ++q) d.mask.push_back(support_mask(in.bases[q], in.first_year[q], in.last_year[q]));
    d.population_country = in.population_country_index;
    if (l.sigma_delta) {
        for (int j = 0; j < l.M * kLatentSectors; ++j) d.sigma_delta.push_back(column_median(out, l.off_sigma_delta() + j));
    }
    return d;
}

ZeroCovarianceFit fit_zero_covariance(const ModelInputs& in, const SamplerConfig& config,
                                      const std::vector<std::string>& monitor) {
    if (in.spec.correlation != CorrelationMode::ZeroCovariance) {
        throw ConfigError("the first stage must use the zero-covariance model");
    }
    ZeroCovarianceFit fit;
    fit.output = run_chains(in, config, monitor);
    fit.medians = delta_medians(fit.output, in);
    return fit;
}

RhoEstimate rho_hat(const DeltaMedians& med, int s, Pooling pooling) {
    const int M = med.M;
    // Pooled units: each row is one (unit, h) vector over methods.
    std::vector<std::vector<double>> rows;
    if (pooling == Pooling::ByProvince) {
        for (int q = 0; q < med.Q; ++q) {
            for (int h = 0; h < med.H; ++h) {
                if (!med.mask[q][h]) continue;
                std::vector<double> v(static_cast<std::size_t>(M));
                for (int m = 0; m < M; ++m) v[m] = med.at(q, m, s, h);
                rows.push_back(std::move(v));
            }
        }
    } else {
        int C = 0;
        for (int c : med.population_country) C = std::max(C, c + 1);
        for (int c = 0; c < C; ++c) {
            for (int h = 0; h < med.H; ++h) {
                std::vector<double> v(static_cast<std::size_t>(M), 0.0);
                int n = 0;
                for (int q = 0; q < med.Q; ++q) {
                    if (med.population_country[q] != c || !med.mask[q][h]) continue;
                    for (int m = 0; m < M; ++m) v[m] += med.at(q, m, s, h);
                    ++n;
                }
                if (n == 0) continue;
                for (auto& x : v) x /= n;
                rows.push_back(std::move(v));
            }
        }
    }

    RhoEstimate est;
    est.rho = Eigen::MatrixXd::Identity(M, M);
    std::vector<double> norm(static_cast<std::size_t>(M), 0.0);
    for (const auto& v : rows)
        for (int m = 0; m < M; ++m) norm[m] += v[m] * v[m];
    for (int m = 0; m < M; ++m) {
        if (!(norm[m] > 0.0)) est.empty_support.push_back(m);
    }
    for (int i = 0; i < M; ++i) {
        for (int j = i + 1; j < M; ++j) {
            if (!(norm[i] > 0.0) || !(norm[j] > 0.0)) continue;
            double num = 0.0;
            for (const auto& v : rows) num += v[i] * v[j];
            const double r = std::clamp(num / (std::sqrt(norm[i]) * std::sqrt(norm[j])), -1.0, 1.0);
            est.rho(i, j) = r;
            est.rho(j, i) = r;
        }
    }
    return est;
}

SectorCovariance assemble_sigma(const Eigen::MatrixXd& rho, const Eigen::VectorXd& sigma) {
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (!(sigma[i] > 0.0)) throw ConfigError("sigma entries must be positive");
    }
    return assemble_covariance(rho, sigma);
}

Eigen::MatrixXd sigma_median(const ChainOutput& out, const ModelInputs& in, int s) {
    const StateLayout& l = out.layout;
    const int M = l.M;
    if (!l.sigma_delta) return in.fixed_cov[s].matrix;
    std::vector<std::vector<double>> cells(static_cast<std::size_t>(M * M));
    for (const auto& chain : out.chains) {
        for (Eigen::Index i = 0; i < chain.rows(); ++i) {
            Eigen::VectorXd sigma(M);
            for (int m = 0; m < M; ++m) sigma[m] = chain(i, l.off_sigma_delta() + l.sigma_delta_index(m, s));
            const Eigen::MatrixXd cov = sigma.asDiagonal() * in.rho[s] * sigma.asDiagonal();
            for (int a = 0; a < M; ++a)
                for (int b = 0; b < M; ++b) cells[static_cast<std::size_t>(a * M + b)].push_back(cov(a, b));
        }
    }
    Eigen::MatrixXd med(M, M);
    for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b) med(a, b) = median(std::move(cells[static_cast<std::size_t>(a * M + b)]));
    return 0.5 * (med + med.transpose());
}

InformativePriors extract_priors(const ChainOutput& out, const ModelInputs& in) {
    const StateLayout& l = out.layout;
    if (!l.multi) throw ConfigError("informative priors come from a multi-country fit");
    InformativePriors priors;
    for (int s = 0; s < kLatentSectors; ++s) {
        if (l.level == Level::National) {
            const double scale = column_median(out, l.off_sigma_alpha_c() + s);
            for (int r = 0; r < l.R; ++r)
                for (int m = 0; m < l.M; ++m)
                    priors.entries.push_back({in.subcontinents[r], in.methods[m], s,
                                              column_median(out, l.off_theta_sub() + l.subcon(r, m, s)), scale});
        } else {
            const double scale = column_median(out, l.off_sigma_alpha_p() + s);
            for (int c = 0; c < l.C; ++c)
                for (int m = 0; m < l.M; ++m)
                    priors.entries.push_back({in.countries[c], in.methods[m], s,
                                              column_median(out, l.off_country() + l.country(c, m, s)), scale});
        }
    }
    std::stable_sort(priors.entries.begin(), priors.entries.end(), [](const PriorEntry& a, const PriorEntry& b) {
        return std::tie(a.level_name, a.method, a.sector) < std::tie(b.level_name, b.method, b.sector);
    });
    return priors;
}

std::string matrix_csv(const std::vector<Method>& methods, const Eigen::MatrixXd& m) {
    std::ostringstream out;
    std::vector<std::string> header{"method"};
    for (Method x : methods) header.emplace_back(to_string(x));
    csv::write_row(out, header);
    for (std::size_t i = 0; i < methods.size(); ++i) {
        std::vector<std::string> row{std::string(to_string(methods[i]))};
        for (std::size_t j = 0; j < methods.size(); ++j) {
            row.push_back(csv::format_double(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        }
        csv::write_row(out, row);
    }
    return out.str();
}

Eigen::MatrixXd read_matrix_csv(const csv::Table& table, const std::vector<Method>& methods) {
    if (table.header.size() < 2) throw SchemaError("matrix file needs a method column and method headers");
    std::vector<int> col_of(methods.size(), -1), row_of(methods.size(), -1);
    for (std::size_t j = 1; j < table.header.size(); ++j) {
        auto m = parse_method(table.header[j]);
        if (!m) throw SchemaError("matrix header '" + table.header[j] + "' is not a method");
        for (std::size_t k = 0; k < methods.size(); ++k) {
            if (methods[k] == *m) col_of[k] = static_cast<int>(j);
        }
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].empty()) continue;
        auto m = parse_method(table.rows[r][0]);
        if (!m) throw SchemaError("matrix row label '" + table.rows[r][0] + "' is not a method");
        for (std::size_t k = 0; k < methods.size(); ++k) {
            if (methods[k] == *m) row_of[k] = static_cast<int>(r);
        }
    }
    const Eigen::Index M = static_cast<Eigen::Index>(methods.size());
    Eigen::MatrixXd out(M, M);
    for (Eigen::Index i = 0; i < M; ++i) {
        if (row_of[i] < 0 || col_of[i] < 0) {
            throw ConfigError("matrix file has no entry for method '" + std::string(to_string(methods[i])) + "'");
        }
        for (Eigen::Index j = 0; j < M; ++j) {
            const auto& row = table.rows[static_cast<std::size_t>(row_of[i])];
            if (static_cast<std::size_t>(col_of[j]) >= row.size()) throw SchemaError("matrix row is too short");
            auto v = csv::parse_double(row[static_cast<std::size_t>(col_of[j])]);
            if (!v) throw SchemaError("matrix entry is not a number");
            out(i, j) = *v;
        }
    }
    return out;
}

TwoStageFit fit_two_stage(const CleanDataset& data, ModelSpec spec, const SamplerConfig& config,
                          const std::vector<std::string>& monitor) {
    if (spec.scope != Scope::MultiCountry) throw ConfigError("the two-stage procedure needs a multi-country fit");
    spec.correlation = CorrelationMode::ZeroCovariance;
    const ModelInputs first = build_model_inputs(data, spec);

    TwoStageFit fit{fit_zero_covariance(first, config, monitor), {}, {}, {}};
    const Pooling pooling = spec.level == Level::National ? Pooling::ByCountry : Pooling::ByProvince;
    spec.correlation = CorrelationMode::CrossMethod;
    for (int s = 0; s < kLatentSectors; ++s) {
        fit.rho[s] = rho_hat(fit.stage_one.medians, s, pooling);
        spec.rho[s] = fit.rho[s].rho;
    }
    fit.stage_two_inputs = build_model_inputs(data, spec, first.methods);
    fit.stage_two = run_chains(fit.stage_two_inputs, config, monitor);
    return fit;
}

}  // namespace supplyshare
