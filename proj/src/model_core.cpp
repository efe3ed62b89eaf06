#include "supplyshare/model_core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "supplyshare/error.hpp"

namespace supplyshare {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLogTwoOverPi = -0.45158270528945486473;  // log(2 / pi)

}  // namespace

std::string_view to_string(Level v) { return v == Level::National ? "national" : "subnational"; }
std::string_view to_string(Scope v) { return v == Scope::MultiCountry ? "multi" : "single"; }
std::string_view to_string(CorrelationMode v) {
    switch (v) {
        case CorrelationMode::ZeroCovariance: return "zero";
        case CorrelationMode::CrossMethod: return "cross_method";
        case CorrelationMode::FixedGlobal: return "fixed_global";
    }
    return "?";
}

Level parse_level(std::string_view token) {
    const std::string t = csv::lower(csv::trim(token));
    if (t == "national") return Level::National;
    if (t == "subnational") return Level::Subnational;
    throw ConfigError("unknown level '" + std::string(token) + "' (national or subnational)");
}

Scope parse_scope(std::string_view token) {
    const std::string t = csv::lower(csv::trim(token));
    if (t == "multi" || t == "multicountry" || t == "multi-country") return Scope::MultiCountry;
    if (t == "single" || t == "singlecountry" || t == "single-country") return Scope::SingleCountry;
    throw ConfigError("unknown scope '" + std::string(token) + "' (multi or single)");
}

// ---------------------------------------------------------------------------
// Informative priors

const PriorEntry* InformativePriors::find(std::string_view level_name, Method method, int sector) const {
    const std::string key = csv::lower(csv::trim(level_name));
    for (const auto& e : entries) {
        if (e.method == method && e.sector == sector && csv::lower(e.level_name) == key) return &e;
    }
    return nullptr;
}

std::string InformativePriors::to_csv() const {
    std::ostringstream out;
    csv::write_row(out, {"level_name", "method", "sector", "location", "scale"});
    for (const auto& e : entries) {
        csv::write_row(out, {e.level_name, std::string(to_string(e.method)), std::to_string(e.sector + 1),
                             csv::format_double(e.location), csv::format_double(e.scale)});
    }
    return out.str();
}

InformativePriors InformativePriors::from_csv(const csv::Table& table) {
    const std::vector<std::string> cols{"level_name", "method", "sector", "location", "scale"};
    std::vector<std::size_t> idx;
    for (const auto& c : cols) {
        auto i = table.column(c);
        if (!i) throw SchemaError("informative-prior file is missing column '" + c + "'");
        idx.push_back(*i);
    }
    InformativePriors out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = "informative-prior row " + std::to_string(r + 1);
        if (row.size() != table.header.size()) throw SchemaError(where + " has the wrong number of fields");
        PriorEntry e;
        e.level_name = csv::trim(row[idx[0]]);
        auto m = parse_method(row[idx[1]]);
        if (!m) throw SchemaError(where + ": unknown method '" + row[idx[1]] + "'");
        e.method = *m;
        auto s = csv::parse_double(row[idx[2]]);
        if (!s || (*s != 1.0 && *s != 2.0)) throw SchemaError(where + ": sector must be 1 or 2");
        e.sector = static_cast<int>(*s) - 1;
        auto loc = csv::parse_double(row[idx[3]]);
        auto scale = csv::parse_double(row[idx[4]]);
        if (!loc || !std::isfinite(*loc)) throw SchemaError(where + ": location is not a number");
        if (!scale || !(*scale > 0.0) || !std::isfinite(*scale)) throw RangeError(where + ": scale must be > 0");
        e.location = *loc;
        e.scale = *scale;
        out.entries.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Covariance

double SectorCovariance::quad(const double* x) const {
    const int n = dim();
    double z[16];
    std::vector<double> heap;
    double* w = z;
    if (n > 16) {
        heap.resize(static_cast<std::size_t>(n));
        w = heap.data();
    }
    double q = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = x[i];
        for (int j = 0; j < i; ++j) v -= chol(i, j) * w[j];
        w[i] = v / chol(i, i);
        q += w[i] * w[i];
    }
    return q;
}

double SectorCovariance::log_density(const double* x) const {
    return -0.5 * (dim() * kLog2Pi + log_det + quad(x));
}

SectorCovariance factor_covariance(const Eigen::MatrixXd& sigma_matrix) {
    const Eigen::Index n = sigma_matrix.rows();
    if (n == 0 || sigma_matrix.cols() != n) throw SPDError("covariance must be a non-empty square matrix");
    if (!sigma_matrix.allFinite()) throw SPDError("covariance has non-finite entries");
    SectorCovariance cov;
    cov.matrix = 0.5 * (sigma_matrix + sigma_matrix.transpose());
    const double step = 1e-8 * cov.matrix.trace() / static_cast<double>(n);
    for (int attempt = 0; attempt <= 3; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov.matrix);
        if (llt.info() == Eigen::Success) {
            cov.chol = llt.matrixL();
            bool ok = true;
            cov.log_det = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!(cov.chol(i, i) > 0.0)) ok = false;
                cov.log_det += 2.0 * std::log(cov.chol(i, i));
            }
            if (ok) {
                cov.sigma = cov.matrix.diagonal().cwiseSqrt();
                cov.rho = cov.sigma.cwiseInverse().asDiagonal() * cov.matrix * cov.sigma.cwiseInverse().asDiagonal();
                return cov;
            }
        }
        if (attempt == 3 || !(step > 0.0)) break;
        cov.matrix.diagonal().array() += step;
        cov.jitter += step;
    }
    throw SPDError("covariance matrix is not positive definite after jitter");
}

SectorCovariance assemble_covariance(const Eigen::MatrixXd& rho, const Eigen::VectorXd& sigma) {
    if (rho.rows() != sigma.size() || rho.cols() != sigma.size()) {
        throw ConfigError("correlation matrix and sigma vector sizes differ");
    }
    const Eigen::MatrixXd m = sigma.asDiagonal() * rho * sigma.asDiagonal();
    SectorCovariance cov = factor_covariance(m);
    cov.rho = rho;
    cov.sigma = sigma;
    return cov;
}

double normal_logpdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

double normal_logpdf_var(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double half_cauchy_logpdf(double x) {
    if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
    return kLogTwoOverPi - std::log1p(x * x);
}

// ---------------------------------------------------------------------------
// Spline and composition algebra

std::vector<double> beta_from(double alpha, const std::vector<double>& delta, int k_star) {
    const int K = static_cast<int>(delta.size()) + 1;
    std::vector<double> beta(static_cast<std::size_t>(K));
    beta[k_star] = alpha;
    for (int k = k_star - 1; k >= 0; --k) beta[k] = beta[k + 1] - delta[k];
    for (int k = k_star + 1; k < K; ++k) beta[k] = beta[k - 1] + delta[k - 1];
    return beta;
}

double latent_psi(const std::vector<double>& beta, const Eigen::VectorXd& basis_row) {
    double s = 0.0;
    for (std::size_t k = 0; k < beta.size(); ++k) s += beta[k] * basis_row[static_cast<Eigen::Index>(k)];
    return s;
}

CompositionVector compose_phi(LatentPair psi) {
    CompositionVector out;
    out.phi[0] = inv_logit(psi.psi1);
    out.phi[1] = (1.0 - out.phi[0]) * inv_logit(psi.psi2);
    out.phi[2] = 1.0 - out.phi[0] - out.phi[1];
    return out;
}

// ---------------------------------------------------------------------------
// Model inputs

std::string ModelInputs::population_name(int q) const {
    return supplyshare::population_name(population_country[q], population_province[q]);
}

int ModelInputs::method_index(Method m) const {
    for (std::size_t i = 0; i < methods.size(); ++i) {
        if (methods[i] == m) return static_cast<int>(i);
    }
    return -1;
}

namespace {

void check_correlation(const Eigen::MatrixXd& rho, int M, int s) {
    const std::string which = "correlation matrix for sector " + std::to_string(s + 1);
    if (rho.rows() != M || rho.cols() != M) {
        throw ConfigError(which + " must be " + std::to_string(M) + "x" + std::to_string(M));
    }
    for (int i = 0; i < M; ++i) {
        if (std::abs(rho(i, i) - 1.0) > 1e-9) throw ConfigError(which + " must have a unit diagonal");
        for (int j = 0; j < M; ++j) {
            if (!(std::abs(rho(i, j)) <= 1.0 + 1e-12)) throw ConfigError(which + " has entries outside [-1, 1]");
            if (std::abs(rho(i, j) - rho(j, i)) > 1e-9) throw ConfigError(which + " must be symmetric");
        }
    }
}

}  // namespace

ModelInputs build_model_inputs(const CleanDataset& data, const ModelSpec& spec) {
    std::set<Method> present;
    for (const auto& r : data.rows) present.insert(r.method);
    return build_model_inputs(data, spec, std::vector<Method>(present.begin(), present.end()));
}

ModelInputs build_model_inputs(const CleanDataset& data, const ModelSpec& spec, const std::vector<Method>& methods) {
    if (spec.nsegments < 4) throw ConfigError("nsegments must be at least 4");
    if (!(spec.start_year < spec.end_year)) throw WindowError("start year must precede end year");
    if ((spec.correlation == CorrelationMode::FixedGlobal) != (spec.scope == Scope::SingleCountry)) {
        throw ConfigError("the fixed global covariance is used exactly when scope is single-country");
    }
    if (methods.empty()) throw InsufficientDataError("no methods to model");

    ModelInputs in;
    in.spec = spec;
    in.methods = methods;
    in.grid = half_year_grid(spec.start_year, spec.end_year);
    const int M = in.M();

    // Populations.
    std::map<std::pair<std::string, std::string>, int> pop_index;
    for (const auto& r : data.rows) {
        if (spec.level == Level::National && !r.province.empty()) {
            throw ConfigError("national model given subnational rows (" + r.country + "/" + r.province + ")");
        }
        if (spec.level == Level::Subnational && r.province.empty()) {
            throw ConfigError("subnational model given national rows (" + r.country + ")");
        }
        pop_index.emplace(std::make_pair(r.country, r.province), 0);
    }
    std::vector<std::pair<std::string, std::string>> pops;
    for (auto& [key, idx] : pop_index) {
        idx = static_cast<int>(pops.size());
        pops.push_back(key);
    }

    // Snap years and group sector triples.
    struct Triple {
        std::array<std::vector<const SurveyObservation*>, 3> by_sector;
    };
    std::map<std::tuple<int, int, double>, Triple> groups;  // (q, m, raw year)
    std::size_t dropped_window = 0, dropped_method = 0;
    for (const auto& r : data.rows) {
        const int m = in.method_index(r.method);
        if (m < 0) {
            ++dropped_method;
            continue;
        }
        const double snapped = spec.start_year + kGridStep * std::round((r.avg_year - spec.start_year) / kGridStep);
        if (snapped < spec.start_year - 1e-9 || snapped > spec.end_year + 1e-9) {
            ++dropped_window;
            continue;
        }
        const int q = pop_index.at({r.country, r.province});
        groups[{q, m, r.avg_year}].by_sector[static_cast<int>(r.sector)].push_back(&r);
    }
    if (dropped_method) in.warnings.push_back(std::to_string(dropped_method) + " row(s) for unmodelled methods ignored");
    if (dropped_window) {
        in.warnings.push_back(std::to_string(dropped_window) + " row(s) outside the estimation window ignored");
    }

    struct Pending {
        int q, m, s, t;
        double y, var;
        bool clamped;
    };
    std::vector<Pending> pending;
    std::vector<double> first(pops.size(), std::numeric_limits<double>::infinity());
    std::vector<double> last(pops.size(), -std::numeric_limits<double>::infinity());
    std::size_t omitted = 0;
    for (const auto& [key, triple] : groups) {
        const auto [q, m, year] = key;
        const double snapped = spec.start_year + kGridStep * std::round((year - spec.start_year) / kGridStep);
        const int t = static_cast<int>(std::lround((snapped - spec.start_year) / kGridStep));
        const std::size_t reps = std::min({triple.by_sector[0].size(), triple.by_sector[1].size(), triple.by_sector[2].size()});
        for (std::size_t k = 0; k < reps; ++k) {
            SectorTriple st;
            for (int s = 0; s < 3; ++s) {
                st.p[s] = triple.by_sector[s][k]->proportion;
                st.se[s] = triple.by_sector[s][k]->se;
            }
            const LogitConversion conv = to_logit_obs(st);
            if (conv.ratio_omitted) ++omitted;
            for (const auto& v : conv.values) {
                pending.push_back({q, m, v.sector, t, v.y, v.var, v.clamped});
            }
        }
        if (reps > 0) {
            first[q] = std::min(first[q], snapped);
            last[q] = std::max(last[q], snapped);
        }
    }
    if (omitted) in.warnings.push_back(std::to_string(omitted) + " ratio observation(s) omitted (no private-sector supply)");

    // Populations without usable observations are dropped; re-index.
    std::vector<int> remap(pops.size(), -1);
    for (std::size_t q = 0; q < pops.size(); ++q) {
        if (!std::isfinite(last[q])) {
            in.warnings.push_back("population " + population_name(pops[q].first, pops[q].second) +
                                  " has no usable observations and is skipped");
            continue;
        }
        remap[q] = static_cast<int>(in.population_country.size());
        in.population_country.push_back(pops[q].first);
        in.population_province.push_back(pops[q].second);
        in.first_year.push_back(first[q]);
        in.last_year.push_back(last[q]);
    }
    if (in.population_country.empty()) throw InsufficientDataError("no populations with usable observations");

    // Countries and subcontinents.
    for (const auto& c : in.population_country) {
        if (in.countries.empty() || in.countries.back() != c) in.countries.push_back(c);
    }
    for (const auto& c : in.countries) {
        auto ci = data.geography.country_index(c);
        if (!ci) throw UnknownCountryError("'" + c + "' is not in the dataset geography");
        const std::string& sub = data.geography.subcontinents()[data.geography.subcontinent_index(*ci)];
        auto it = std::find(in.subcontinents.begin(), in.subcontinents.end(), sub);
        if (it == in.subcontinents.end()) {
            in.country_subcontinent.push_back(static_cast<int>(in.subcontinents.size()));
            in.subcontinents.push_back(sub);
        } else {
            in.country_subcontinent.push_back(static_cast<int>(it - in.subcontinents.begin()));
        }
    }
    for (const auto& c : in.population_country) {
        in.population_country_index.push_back(
            static_cast<int>(std::find(in.countries.begin(), in.countries.end(), c) - in.countries.begin()));
    }

    // Bases anchored at each population's latest survey.
    for (std::size_t q = 0; q < in.population_country.size(); ++q) {
        in.bases.push_back(build_basis(spec.start_year, spec.end_year, spec.nsegments, in.last_year[q]));
    }

    // Merge duplicate (q, t, m, s) cells with precision weights.
    std::map<std::tuple<int, int, int, int>, std::array<double, 3>> merged;  // sum w, sum w y, clamped
    for (const auto& p : pending) {
        const int q = remap[p.q];
        auto& acc = merged[{q, p.m, p.s, p.t}];
        const double w = 1.0 / p.var;
        acc[0] += w;
        acc[1] += w * p.y;
        if (p.clamped) acc[2] = 1.0;
    }
    for (const auto& [key, acc] : merged) {
        const auto [q, m, s, t] = key;
        LogitObservation o;
        o.population = q;
        o.method = m;
        o.sector = s;
        o.time = t;
        o.y = acc[1] / acc[0];
        o.var = 1.0 / acc[0];
        o.clamped = acc[2] > 0.0;
        if (o.clamped) ++in.clamped;
        if (!(o.var > 0.0) || !std::isfinite(o.var) || !std::isfinite(o.y)) {
            throw NumericalError("non-finite logit observation for " + in.population_name(q));
        }
        in.obs.push_back(o);
    }
    if (in.clamped) in.warnings.push_back(std::to_string(in.clamped) + " logit observation(s) hit the clamp bound");

    // Correlation structure.
    for (int s = 0; s < kLatentSectors; ++s) {
        switch (spec.correlation) {
            case CorrelationMode::ZeroCovariance: in.rho[s] = Eigen::MatrixXd::Identity(M, M); break;
            case CorrelationMode::CrossMethod:
                check_correlation(spec.rho[s], M, s);
                in.rho[s] = spec.rho[s];
                (void)assemble_covariance(in.rho[s], Eigen::VectorXd::Ones(M));
                break;
            case CorrelationMode::FixedGlobal:
                if (spec.sigma_global[s].rows() != M || spec.sigma_global[s].cols() != M) {
                    throw ConfigError("global covariance for sector " + std::to_string(s + 1) + " must be " +
                                      std::to_string(M) + "x" + std::to_string(M));
                }
                in.fixed_cov[s] = factor_covariance(spec.sigma_global[s]);
                in.rho[s] = in.fixed_cov[s].rho;
                break;
        }
    }

    // Informative priors.
    if (spec.scope == Scope::SingleCountry) {
        if (!spec.priors) throw ConfigError("single-country scope requires an informative-prior file");
        in.prior_location.assign(static_cast<std::size_t>(in.Q() * M * kLatentSectors), 0.0);
        in.prior_scale.assign(in.prior_location.size(), 1.0);
        for (int q = 0; q < in.Q(); ++q) {
            const int c = in.population_country_index[q];
            const std::string& parent =
                spec.level == Level::National ? in.subcontinents[in.country_subcontinent[c]] : in.countries[c];
            for (int m = 0; m < M; ++m) {
                for (int s = 0; s < kLatentSectors; ++s) {
                    const PriorEntry* e = spec.priors->find(parent, in.methods[m], s);
                    if (!e) {
                        throw ConfigError("informative priors lack an entry for " + parent + ", " +
                                          std::string(to_string(in.methods[m])) + ", sector " + std::to_string(s + 1));
                    }
                    const std::size_t i = static_cast<std::size_t>((q * M + m) * kLatentSectors + s);
                    in.prior_location[i] = e->location;
                    in.prior_scale[i] = e->scale;
                }
            }
        }
    }
    return in;
}

// ---------------------------------------------------------------------------
// Parameter state

StateLayout StateLayout::of(const ModelInputs& in) {
    StateLayout l;
    l.Q = in.Q();
    l.M = in.M();
    l.H = in.H();
    l.C = in.C();
    l.R = in.R();
    l.level = in.spec.level;
    l.multi = in.multi();
    l.sigma_delta = in.samples_sigma_delta();
    return l;
}

std::size_t StateLayout::flat_size() const {
    const std::size_t MS = static_cast<std::size_t>(M * kLatentSectors);
    std::size_t n = static_cast<std::size_t>(Q) * MS + static_cast<std::size_t>(Q) * MS * static_cast<std::size_t>(H);
    if (country_layer()) n += static_cast<std::size_t>(C) * MS + kLatentSectors;
    if (multi) n += static_cast<std::size_t>(R) * MS + MS + 2 * kLatentSectors;
    if (sigma_delta) n += MS;
    return n;
}

ParameterState ParameterState::zeros(const StateLayout& l) {
    ParameterState st;
    const std::size_t MS = static_cast<std::size_t>(l.M * kLatentSectors);
    st.alpha.assign(static_cast<std::size_t>(l.Q) * MS, 0.0);
    st.delta.assign(static_cast<std::size_t>(l.Q) * MS * static_cast<std::size_t>(l.H), 0.0);
    if (l.country_layer()) st.alpha_country.assign(static_cast<std::size_t>(l.C) * MS, 0.0);
    if (l.multi) {
        st.theta_sub.assign(static_cast<std::size_t>(l.R) * MS, 0.0);
        st.theta_world.assign(MS, 0.0);
    }
    if (l.sigma_delta) st.sigma_delta.assign(MS, 1.0);
    return st;
}

std::vector<double> ParameterState::flatten(const StateLayout& l) const {
    std::vector<double> out;
    out.reserve(l.flat_size());
    out.insert(out.end(), alpha.begin(), alpha.end());
    out.insert(out.end(), delta.begin(), delta.end());
    if (l.country_layer()) {
        out.insert(out.end(), alpha_country.begin(), alpha_country.end());
        out.insert(out.end(), sigma_alpha_p.begin(), sigma_alpha_p.end());
    }
    if (l.multi) {
        out.insert(out.end(), theta_sub.begin(), theta_sub.end());
        out.insert(out.end(), theta_world.begin(), theta_world.end());
        out.insert(out.end(), sigma_alpha_c.begin(), sigma_alpha_c.end());
        out.insert(out.end(), sigma_theta.begin(), sigma_theta.end());
    }
    if (l.sigma_delta) out.insert(out.end(), sigma_delta.begin(), sigma_delta.end());
    return out;
}

ParameterState ParameterState::unflatten(const StateLayout& l, const double* v) {
    ParameterState st = zeros(l);
    auto take = [&v](auto& dst) {
        for (auto& x : dst) x = *v++;
    };
    take(st.alpha);
    take(st.delta);
    if (l.country_layer()) {
        take(st.alpha_country);
        take(st.sigma_alpha_p);
    }
    if (l.multi) {
        take(st.theta_sub);
        take(st.theta_world);
        take(st.sigma_alpha_c);
        take(st.sigma_theta);
    }
    if (l.sigma_delta) take(st.sigma_delta);
    return st;
}

std::vector<std::string> parameter_names(const StateLayout& l) {
    auto idx = [](std::initializer_list<int> v) {
        std::string s = "[";
        bool first = true;
        for (int i : v) {
            if (!first) s += ",";
            s += std::to_string(i + 1);
            first = false;
        }
        return s + "]";
    };
    std::vector<std::string> names;
    names.reserve(l.flat_size());
    const std::string alpha_name = l.level == Level::Subnational ? "alpha_pms" : "alpha_cms";
    for (int q = 0; q < l.Q; ++q)
        for (int m = 0; m < l.M; ++m)
            for (int s = 0; s < kLatentSectors; ++s) names.push_back(alpha_name + idx({q, m, s}));
    std::vector<std::string> delta_names(static_cast<std::size_t>(l.Q * l.M * kLatentSectors * l.H));
    for (int q = 0; q < l.Q; ++q)
        for (int m = 0; m < l.M; ++m)
            for (int s = 0; s < kLatentSectors; ++s)
                for (int h = 0; h < l.H; ++h) delta_names[static_cast<std::size_t>(l.delta(q, m, s, h))] = "delta.k" + idx({q, m, s, h});
    names.insert(names.end(), delta_names.begin(), delta_names.end());
    if (l.country_layer()) {
        for (int c = 0; c < l.C; ++c)
            for (int m = 0; m < l.M; ++m)
                for (int s = 0; s < kLatentSectors; ++s) names.push_back("alpha_cms" + idx({c, m, s}));
        for (int s = 0; s < kLatentSectors; ++s) names.push_back("sigma_alpha_ps" + idx({s}));
    }
    if (l.multi) {
        for (int r = 0; r < l.R; ++r)
            for (int m = 0; m < l.M; ++m)
                for (int s = 0; s < kLatentSectors; ++s) names.push_back("theta_rms" + idx({r, m, s}));
        for (int m = 0; m < l.M; ++m)
            for (int s = 0; s < kLatentSectors; ++s) names.push_back("theta_wms" + idx({m, s}));
        for (int s = 0; s < kLatentSectors; ++s) names.push_back("sigma_alpha_cs" + idx({s}));
        for (int s = 0; s < kLatentSectors; ++s) names.push_back("sigma_theta_s" + idx({s}));
    }
    if (l.sigma_delta) {
        for (int m = 0; m < l.M; ++m)
            for (int s = 0; s < kLatentSectors; ++s) names.push_back("sigma_delta" + idx({m, s}));
    }
    return names;
}

std::vector<double> state_beta(const ParameterState& st, const StateLayout& l, const ModelInputs& in, int q, int m,
                               int s) {
    std::vector<double> d(static_cast<std::size_t>(l.H));
    for (int h = 0; h < l.H; ++h) d[h] = st.delta[static_cast<std::size_t>(l.delta(q, m, s, h))];
    return beta_from(st.alpha[static_cast<std::size_t>(l.alpha(q, m, s))], d, in.bases[q].k_star);
}

SectorCovariance delta_covariance(const ParameterState& st, const ModelInputs& in, int s) {
    if (!in.samples_sigma_delta()) return in.fixed_cov[s];
    const int M = in.M();
    Eigen::VectorXd sigma(M);
    for (int m = 0; m < M; ++m) sigma[m] = st.sigma_delta[static_cast<std::size_t>(m * kLatentSectors + s)];
    return assemble_covariance(in.rho[s], sigma);
}

double log_prior(const ParameterState& st, const ModelInputs& in) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    const StateLayout l = StateLayout::of(in);
    double lp = 0.0;

    // Rates of change.
    if (l.sigma_delta) {
        for (double sd : st.sigma_delta) {
            if (!(sd > 0.0)) return kNegInf;
            if (in.spec.level == Level::National) {
                if (!(sd < kSigmaDeltaUpper)) return kNegInf;
                lp -= std::log(kSigmaDeltaUpper);
            } else {
                lp += half_cauchy_logpdf(sd);
            }
        }
    }
    for (int s = 0; s < kLatentSectors; ++s) {
        const SectorCovariance cov = delta_covariance(st, in, s);
        for (int q = 0; q < l.Q; ++q) {
            for (int h = 0; h < l.H; ++h) {
                lp += cov.log_density(&st.delta[static_cast<std::size_t>(l.delta(q, 0, s, h))]);
            }
        }
    }

    // Intercepts.
    if (!l.multi) {
        for (std::size_t i = 0; i < st.alpha.size(); ++i) {
            lp += normal_logpdf(st.alpha[i], in.prior_location[i], in.prior_scale[i]);
        }
        return lp;
    }
    for (int s = 0; s < kLatentSectors; ++s) {
        if (!(st.sigma_alpha_c[s] > 0.0) || !(st.sigma_theta[s] > 0.0)) return kNegInf;
        if (l.country_layer() && !(st.sigma_alpha_p[s] > 0.0)) return kNegInf;
        lp += half_cauchy_logpdf(st.sigma_alpha_c[s]) + half_cauchy_logpdf(st.sigma_theta[s]);
        if (l.country_layer()) lp += half_cauchy_logpdf(st.sigma_alpha_p[s]);
    }
    for (int m = 0; m < l.M; ++m) {
        for (int s = 0; s < kLatentSectors; ++s) {
            const double world = st.theta_world[static_cast<std::size_t>(l.world(m, s))];
            lp += normal_logpdf(world, 0.0, kThetaWorldSd);
            for (int r = 0; r < l.R; ++r) {
                lp += normal_logpdf(st.theta_sub[static_cast<std::size_t>(l.subcon(r, m, s))], world, st.sigma_theta[s]);
            }
            if (l.country_layer()) {
                for (int c = 0; c < l.C; ++c) {
                    lp += normal_logpdf(st.alpha_country[static_cast<std::size_t>(l.country(c, m, s))],
                                        st.theta_sub[static_cast<std::size_t>(l.subcon(in.country_subcontinent[c], m, s))],
                                        st.sigma_alpha_c[s]);
                }
                for (int q = 0; q < l.Q; ++q) {
                    lp += normal_logpdf(st.alpha[static_cast<std::size_t>(l.alpha(q, m, s))],
                                        st.alpha_country[static_cast<std::size_t>(l.country(in.population_country_index[q], m, s))],
                                        st.sigma_alpha_p[s]);
                }
            } else {
                for (int q = 0; q < l.Q; ++q) {
                    const int r = in.country_subcontinent[in.population_country_index[q]];
                    lp += normal_logpdf(st.alpha[static_cast<std::size_t>(l.alpha(q, m, s))],
                                        st.theta_sub[static_cast<std::size_t>(l.subcon(r, m, s))], st.sigma_alpha_c[s]);
                }
            }
        }
    }
    return lp;
}

double log_likelihood(const ParameterState& st, const ModelInputs& in) {
    const StateLayout l = StateLayout::of(in);
    double ll = 0.0;
    for (const auto& o : in.obs) {
        const std::vector<double> beta = state_beta(st, l, in, o.population, o.method, o.sector);
        const double psi = latent_psi(beta, in.bases[o.population].values.row(o.time).transpose());
        ll += normal_logpdf_var(o.y, psi, o.var);
    }
    return ll;
}

double log_posterior(const ParameterState& st, const ModelInputs& in) {
    const double lp = log_prior(st, in);
    if (lp == -std::numeric_limits<double>::infinity()) return lp;
    return lp + log_likelihood(st, in);
}

}  // namespace supplyshare
