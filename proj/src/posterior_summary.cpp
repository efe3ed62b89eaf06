#include "supplyshare/posterior_summary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "supplyshare/csv.hpp"
#include "supplyshare/error.hpp"

namespace supplyshare {

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw InsufficientDataError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

SummaryRow summarize_cell(std::vector<double> draws) {
    std::sort(draws.begin(), draws.end());
    SummaryRow r;
    r.l95 = quantile_sorted(draws, 0.025);
    r.l80 = quantile_sorted(draws, 0.10);
    r.median = quantile_sorted(draws, 0.50);
    r.u80 = quantile_sorted(draws, 0.90);
    r.u95 = quantile_sorted(draws, 0.975);
    return r;
}

namespace {

// beta for (q, m, s) read straight from a flat parameter row.
void beta_from_flat(const StateLayout& l, const double* row, int k_star, int q, int m, int s, std::vector<double>& beta) {
    const int K = l.H + 1;
    const std::size_t delta0 = static_cast<std::size_t>(l.Q * l.M * kLatentSectors);
    beta.resize(static_cast<std::size_t>(K));
    beta[k_star] = row[l.alpha(q, m, s)];
    for (int k = k_star - 1; k >= 0; --k) beta[k] = beta[k + 1] - row[delta0 + static_cast<std::size_t>(l.delta(q, m, s, k))];
    for (int k = k_star + 1; k < K; ++k) beta[k] = beta[k - 1] + row[delta0 + static_cast<std::size_t>(l.delta(q, m, s, k - 1))];
}

}  // namespace

std::vector<std::array<double, 3>> phi_grid(const ParameterState& state, const StateLayout& layout, const ModelInputs& in,
                                            int q, int m) {
    const std::vector<double> b1 = state_beta(state, layout, in, q, m, 0);
    const std::vector<double> b2 = state_beta(state, layout, in, q, m, 1);
    const Eigen::MatrixXd& B = in.bases[q].values;
    std::vector<std::array<double, 3>> out(static_cast<std::size_t>(B.rows()));
    for (Eigen::Index t = 0; t < B.rows(); ++t) {
        const Eigen::VectorXd row = B.row(t).transpose();
        out[static_cast<std::size_t>(t)] = compose_phi({latent_psi(b1, row), latent_psi(b2, row)}).phi;
    }
    return out;
}

PosteriorSummary summarize(const ChainOutput& out, const ModelInputs& in) {
    const StateLayout& l = out.layout;
    const std::size_t N = out.total_draws();
    if (N == 0) throw InsufficientDataError("no retained draws to summarise");
    const int T = in.T();
    PosteriorSummary summary;
    std::vector<double> cell(N);
    std::vector<double> values(N * static_cast<std::size_t>(T) * 3);  // [t][sector][draw]
    std::vector<double> row, b1, b2;
    for (int q = 0; q < l.Q; ++q) {
        const Eigen::MatrixXd& B = in.bases[q].values;
        const int k_star = in.bases[q].k_star;
        for (int m = 0; m < l.M; ++m) {
            std::size_t d = 0;
            for (const auto& chain : out.chains) {
                row.resize(static_cast<std::size_t>(chain.cols()));
                for (Eigen::Index i = 0; i < chain.rows(); ++i, ++d) {
                    // Only alpha and delta are needed; copy the leading block.
                    const Eigen::Index need =
                        static_cast<Eigen::Index>(l.Q * l.M * kLatentSectors * (1 + l.H));
                    for (Eigen::Index j = 0; j < need; ++j) row[static_cast<std::size_t>(j)] = chain(i, j);
                    beta_from_flat(l, row.data(), k_star, q, m, 0, b1);
                    beta_from_flat(l, row.data(), k_star, q, m, 1, b2);
                    for (int t = 0; t < T; ++t) {
                        double psi1 = 0.0, psi2 = 0.0;
                        for (int k = 0; k <= l.H; ++k) {
                            const double bv = B(t, k);
                            if (bv == 0.0) continue;
                            psi1 += b1[k] * bv;
                            psi2 += b2[k] * bv;
                        }
                        const auto phi = compose_phi({psi1, psi2}).phi;
                        for (int s = 0; s < 3; ++s) values[(static_cast<std::size_t>(t) * 3 + s) * N + d] = phi[s];
                    }
                }
            }
            for (int t = 0; t < T; ++t) {
                for (int s = 0; s < 3; ++s) {
                    const double* src = &values[(static_cast<std::size_t>(t) * 3 + s) * N];
                    cell.assign(src, src + N);
                    SummaryRow r = summarize_cell(std::move(cell));
                    cell.resize(N);
                    r.population = in.population_name(q);
                    r.year = in.grid[t];
                    r.method = in.methods[m];
                    r.sector = kAllSectors[s];
                    summary.rows.push_back(std::move(r));
                }
            }
        }
    }
    return summary;
}

std::string estimates_csv(const PosteriorSummary& summary) {
    std::ostringstream out;
    csv::write_row(out, {"population", "year", "method", "sector", "median", "l80", "u80", "l95", "u95"});
    for (const auto& r : summary.rows) {
        csv::write_row(out, {r.population, csv::format_double(r.year), std::string(to_string(r.method)),
                             std::string(to_string(r.sector)), csv::format_double(r.median), csv::format_double(r.l80),
                             csv::format_double(r.u80), csv::format_double(r.l95), csv::format_double(r.u95)});
    }
    return out.str();
}

void export_estimates(const PosteriorSummary& summary, const std::string& path) {
    csv::write_text_file(path, estimates_csv(summary));
}

PosteriorSummary read_estimates(const csv::Table& table) {
    const std::vector<std::string> cols{"population", "year", "method", "sector", "median", "l80", "u80", "l95", "u95"};
    std::vector<std::size_t> idx;
    for (const auto& c : cols) {
        auto i = table.column(c);
        if (!i) throw SchemaError("estimates file is missing column '" + c + "'");
        idx.push_back(*i);
    }
    PosteriorSummary s;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = "estimates row " + std::to_string(r + 1);
        if (row.size() != table.header.size()) throw SchemaError(where + " has the wrong number of fields");
        SummaryRow e;
        e.population = row[idx[0]];
        auto num = [&](std::size_t k) {
            auto v = csv::parse_double(row[idx[k]]);
            if (!v) throw SchemaError(where + ": '" + cols[k] + "' is not a number");
            return *v;
        };
        e.year = num(1);
        auto m = parse_method(row[idx[2]]);
        auto sec = parse_sector(row[idx[3]]);
        if (!m || !sec) throw SchemaError(where + ": unknown method or sector");
        e.method = *m;
        e.sector = *sec;
        e.median = num(4);
        e.l80 = num(5);
        e.u80 = num(6);
        e.l95 = num(7);
        e.u95 = num(8);
        s.rows.push_back(std::move(e));
    }
    return s;
}

PosteriorSummary read_estimates(const std::string& path) { return read_estimates(csv::read_file(path)); }

}  // namespace supplyshare
