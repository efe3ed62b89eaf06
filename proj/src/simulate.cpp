#include "supplyshare/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/random/binomial_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "supplyshare/csv.hpp"
#include "supplyshare/error.hpp"
#include "supplyshare/mcmc_engine.hpp"

namespace supplyshare {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == sep) {
            out.push_back(csv::trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!csv::trim(cur).empty() || !out.empty()) out.push_back(csv::trim(cur));
    return out;
}

std::vector<double> survey_schedule(const SimScenario& sc) {
    if (!sc.survey_years.empty()) return sc.survey_years;
    std::vector<double> years;
    for (int i = 0; i < sc.surveys; ++i) {
        const double raw = sc.surveys == 1 ? sc.survey_first
                                           : sc.survey_first + (sc.survey_last - sc.survey_first) * i / (sc.surveys - 1);
        years.push_back(std::round(raw * 2.0) / 2.0);
    }
    return years;
}

}  // namespace

void SimScenario::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("scenario: " + msg); };
    if (countries.empty() && n_countries < 1) fail("at least one country is required");
    if (level == Level::Subnational && provinces.empty() && provinces_per_country < 1) {
        fail("at least one province per country is required");
    }
    if (!provinces.empty() && provinces.size() != (countries.empty() ? static_cast<std::size_t>(n_countries) : countries.size())) {
        fail("province lists must match the country list");
    }
    if (n_methods < 1 || n_methods > static_cast<int>(kAllMethods.size())) fail("n_methods must be in 1..5");
    if (!(start_year < end_year)) fail("start_year must precede end_year");
    if (nsegments < 4) fail("nsegments must be at least 4");
    const auto years = survey_schedule(*this);
    if (years.empty()) fail("at least one survey is required");
    if (holdout_surveys < 0 || holdout_surveys >= static_cast<int>(years.size())) {
        fail("holdout_surveys must leave at least one training survey");
    }
    for (double y : years) {
        if (!(y >= start_year && y <= end_year)) fail("survey year outside the window");
    }
    if (!std::is_sorted(years.begin(), years.end())) fail("survey years must be increasing");
    if (!(years[years.size() - 1 - static_cast<std::size_t>(holdout_surveys)] > start_year)) {
        fail("the last training survey must be after start_year");
    }
    for (double v : {theta_world_sd, sigma_theta, sigma_alpha_c, sigma_alpha_p, sigma_delta, logit_sd}) {
        if (!(v >= 0.0) || !std::isfinite(v)) fail("standard deviations must be finite and >= 0");
    }
    if (!(prior_scale >= 0.0)) fail("prior_scale must be >= 0");
    const double lower = n_methods > 1 ? -1.0 / (n_methods - 1) : -1.0;
    if (!(rho > lower && rho < 1.0) && !(n_methods == 1)) fail("rho does not give a valid correlation matrix");
    if (sample_size < 1) fail("sample_size must be positive");
}

SimScenario scenario_from_ini(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("scenario file: ") + e.what());
    }
    SimScenario sc;
    auto num = [](const std::string& key, const std::string& v) {
        auto d = csv::parse_double(v);
        if (!d) throw ConfigError("scenario key '" + key + "' expects a number, got '" + v + "'");
        return *d;
    };
    auto flag = [](const std::string& key, const std::string& v) {
        const std::string t = csv::lower(v);
        if (t == "true" || t == "1" || t == "yes") return true;
        if (t == "false" || t == "0" || t == "no") return false;
        throw ConfigError("scenario key '" + key + "' expects true/false");
    };
    for (const auto& [key, node] : tree) {
        if (!node.empty()) throw ConfigError("scenario file: sections are not used ('" + key + "')");
        const std::string v = csv::trim(node.data());
        if (key == "level") {
            sc.level = parse_level(v);
        } else if (key == "countries") {
            sc.countries = split(v, ';');
        } else if (key == "n_countries") {
            sc.n_countries = static_cast<int>(num(key, v));
        } else if (key == "provinces") {
            sc.provinces.clear();
            for (const auto& group : split(v, ';')) sc.provinces.push_back(split(group, ','));
        } else if (key == "provinces_per_country") {
            sc.provinces_per_country = static_cast<int>(num(key, v));
        } else if (key == "n_methods") {
            sc.n_methods = static_cast<int>(num(key, v));
        } else if (key == "start_year") {
            sc.start_year = num(key, v);
        } else if (key == "end_year") {
            sc.end_year = num(key, v);
        } else if (key == "nsegments") {
            sc.nsegments = static_cast<int>(num(key, v));
        } else if (key == "survey_years") {
            sc.survey_years.clear();
            for (const auto& y : split(v, ',')) sc.survey_years.push_back(num(key, y));
        } else if (key == "surveys") {
            sc.surveys = static_cast<int>(num(key, v));
        } else if (key == "survey_first") {
            sc.survey_first = num(key, v);
        } else if (key == "survey_last") {
            sc.survey_last = num(key, v);
        } else if (key == "holdout_surveys") {
            sc.holdout_surveys = static_cast<int>(num(key, v));
        } else if (key == "fixed_hyperparameters") {
            sc.fixed_hyperparameters = flag(key, v);
        } else if (key == "theta_world_mean_s1") {
            sc.theta_world_mean[0] = num(key, v);
        } else if (key == "theta_world_mean_s2") {
            sc.theta_world_mean[1] = num(key, v);
        } else if (key == "theta_world_sd") {
            sc.theta_world_sd = num(key, v);
        } else if (key == "sigma_theta") {
            sc.sigma_theta = num(key, v);
        } else if (key == "sigma_alpha_c") {
            sc.sigma_alpha_c = num(key, v);
        } else if (key == "sigma_alpha_p") {
            sc.sigma_alpha_p = num(key, v);
        } else if (key == "prior_location") {
            sc.prior_location = num(key, v);
        } else if (key == "prior_scale") {
            sc.prior_scale = num(key, v);
        } else if (key == "sigma_delta") {
            sc.sigma_delta = num(key, v);
        } else if (key == "rho") {
            sc.rho = num(key, v);
        } else if (key == "observation_model") {
            const std::string t = csv::lower(v);
            if (t == "multinomial") {
                sc.observation = ObservationModel::Multinomial;
            } else if (t == "logit_normal") {
                sc.observation = ObservationModel::LogitNormal;
            } else {
                throw ConfigError("observation_model must be multinomial or logit_normal");
            }
        } else if (key == "sample_size") {
            sc.sample_size = static_cast<long>(num(key, v));
        } else if (key == "logit_sd") {
            sc.logit_sd = num(key, v);
        } else if (key == "seed") {
            sc.seed = static_cast<std::uint64_t>(num(key, v));
        } else {
            throw ConfigError("scenario file: unknown key '" + key + "'");
        }
    }
    sc.validate();
    return sc;
}

std::string scenario_to_ini(const SimScenario& sc) {
    std::ostringstream out;
    auto join = [](const std::vector<std::string>& v, const char* sep) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
        return s;
    };
    out << "level = " << to_string(sc.level) << "\n";
    if (!sc.countries.empty()) out << "countries = " << join(sc.countries, ";") << "\n";
    out << "n_countries = " << sc.n_countries << "\n";
    if (!sc.provinces.empty()) {
        std::vector<std::string> groups;
        for (const auto& g : sc.provinces) groups.push_back(join(g, ","));
        out << "provinces = " << join(groups, ";") << "\n";
    }
    out << "provinces_per_country = " << sc.provinces_per_country << "\n";
    out << "n_methods = " << sc.n_methods << "\n";
    out << "start_year = " << csv::format_double(sc.start_year) << "\n";
    out << "end_year = " << csv::format_double(sc.end_year) << "\n";
    out << "nsegments = " << sc.nsegments << "\n";
    if (!sc.survey_years.empty()) {
        std::vector<std::string> ys;
        for (double y : sc.survey_years) ys.push_back(csv::format_double(y));
        out << "survey_years = " << join(ys, ",") << "\n";
    }
    out << "surveys = " << sc.surveys << "\n";
    out << "survey_first = " << csv::format_double(sc.survey_first) << "\n";
    out << "survey_last = " << csv::format_double(sc.survey_last) << "\n";
    out << "holdout_surveys = " << sc.holdout_surveys << "\n";
    out << "fixed_hyperparameters = " << (sc.fixed_hyperparameters ? "true" : "false") << "\n";
    out << "theta_world_mean_s1 = " << csv::format_double(sc.theta_world_mean[0]) << "\n";
    out << "theta_world_mean_s2 = " << csv::format_double(sc.theta_world_mean[1]) << "\n";
    out << "theta_world_sd = " << csv::format_double(sc.theta_world_sd) << "\n";
    out << "sigma_theta = " << csv::format_double(sc.sigma_theta) << "\n";
    out << "sigma_alpha_c = " << csv::format_double(sc.sigma_alpha_c) << "\n";
    out << "sigma_alpha_p = " << csv::format_double(sc.sigma_alpha_p) << "\n";
    out << "prior_location = " << csv::format_double(sc.prior_location) << "\n";
    out << "prior_scale = " << csv::format_double(sc.prior_scale) << "\n";
    out << "sigma_delta = " << csv::format_double(sc.sigma_delta) << "\n";
    out << "rho = " << csv::format_double(sc.rho) << "\n";
    out << "observation_model = " << (sc.observation == ObservationModel::Multinomial ? "multinomial" : "logit_normal")
        << "\n";
    out << "sample_size = " << sc.sample_size << "\n";
    out << "logit_sd = " << csv::format_double(sc.logit_sd) << "\n";
    out << "seed = " << sc.seed << "\n";
    return out.str();
}

SimResult simulate_dataset(const SimScenario& sc) {
    sc.validate();
    const GeographyIndex geo = GeographyIndex::builtin();

    // Countries and provinces.
    std::vector<std::string> countries = sc.countries;
    if (countries.empty()) {
        std::vector<std::string> fp;
        for (const auto& c : geo.countries()) {
            if (c.fp2030) fp.push_back(c.name);
        }
        std::sort(fp.begin(), fp.end());
        if (sc.n_countries > static_cast<int>(fp.size())) {
            throw ConfigError("scenario asks for more countries than the builtin geography holds");
        }
        countries.assign(fp.begin(), fp.begin() + sc.n_countries);
    }
    std::vector<std::pair<std::string, std::string>> pops;
    for (std::size_t c = 0; c < countries.size(); ++c) {
        const CountryInfo* info = geo.find(countries[c]);
        if (!info) throw ConfigError("scenario country '" + countries[c] + "' is not in the builtin geography");
        if (!info->fp2030) throw ConfigError("scenario country '" + countries[c] + "' is not an FP2030 country");
        countries[c] = info->name;
        if (sc.level == Level::National) {
            pops.emplace_back(info->name, "");
        } else if (!sc.provinces.empty()) {
            for (const auto& p : sc.provinces[c]) pops.emplace_back(info->name, p);
        } else {
            for (int p = 0; p < sc.provinces_per_country; ++p) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "Province %02d", p + 1);
                pops.emplace_back(info->name, buf);
            }
        }
    }
    std::sort(pops.begin(), pops.end());
    if (std::adjacent_find(pops.begin(), pops.end()) != pops.end()) throw ConfigError("duplicate population in scenario");

    SimResult res;
    std::vector<std::string> used_countries;
    std::vector<int> pop_country;
    for (const auto& p : pops) {
        if (used_countries.empty() || used_countries.back() != p.first) used_countries.push_back(p.first);
        pop_country.push_back(static_cast<int>(used_countries.size()) - 1);
        res.populations.push_back(population_name(p.first, p.second));
    }
    std::vector<std::string> subcons;
    std::vector<int> country_subcon;
    for (const auto& c : used_countries) {
        const std::string& sub = geo.find(c)->subcontinent;
        auto it = std::find(subcons.begin(), subcons.end(), sub);
        if (it == subcons.end()) {
            country_subcon.push_back(static_cast<int>(subcons.size()));
            subcons.push_back(sub);
        } else {
            country_subcon.push_back(static_cast<int>(it - subcons.begin()));
        }
    }
    for (int m = 0; m < sc.n_methods; ++m) res.methods.push_back(kAllMethods[m]);

    const std::vector<double> years = survey_schedule(sc);
    const double anchor = years[years.size() - 1 - static_cast<std::size_t>(sc.holdout_surveys)];

    StateLayout& l = res.layout;
    l.Q = static_cast<int>(pops.size());
    l.M = sc.n_methods;
    l.C = static_cast<int>(used_countries.size());
    l.R = static_cast<int>(subcons.size());
    l.level = sc.level;
    l.multi = !sc.fixed_hyperparameters;
    l.sigma_delta = !sc.fixed_hyperparameters;
    for (int q = 0; q < l.Q; ++q) res.bases.push_back(build_basis(sc.start_year, sc.end_year, sc.nsegments, anchor));
    l.H = res.bases.front().K - 1;

    Rng rng = make_rng(sc.seed, 0x51u);
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    ParameterState& st = res.truth;
    st = ParameterState::zeros(l);

    // Intercepts, top down.
    if (sc.fixed_hyperparameters) {
        for (auto& a : st.alpha) a = sc.prior_location + sc.prior_scale * normal(rng);
        for (int c = 0; c < l.C; ++c) {
            const std::string& parent = sc.level == Level::National ? subcons[country_subcon[c]] : used_countries[c];
            for (int m = 0; m < l.M; ++m)
                for (int s = 0; s < kLatentSectors; ++s) {
                    if (!res.priors.find(parent, res.methods[m], s)) {
                        res.priors.entries.push_back({parent, res.methods[m], s, sc.prior_location, sc.prior_scale});
                    }
                }
        }
    } else {
        for (int s = 0; s < kLatentSectors; ++s) {
            st.sigma_theta[s] = sc.sigma_theta;
            st.sigma_alpha_c[s] = sc.sigma_alpha_c;
            st.sigma_alpha_p[s] = sc.sigma_alpha_p;
        }
        for (int m = 0; m < l.M; ++m) {
            for (int s = 0; s < kLatentSectors; ++s) {
                const double world = sc.theta_world_mean[s] + sc.theta_world_sd * normal(rng);
                st.theta_world[static_cast<std::size_t>(l.world(m, s))] = world;
                for (int r = 0; r < l.R; ++r) {
                    st.theta_sub[static_cast<std::size_t>(l.subcon(r, m, s))] = world + sc.sigma_theta * normal(rng);
                }
                if (l.country_layer()) {
                    for (int c = 0; c < l.C; ++c) {
                        st.alpha_country[static_cast<std::size_t>(l.country(c, m, s))] =
                            st.theta_sub[static_cast<std::size_t>(l.subcon(country_subcon[c], m, s))] +
                            sc.sigma_alpha_c * normal(rng);
                    }
                }
                for (int q = 0; q < l.Q; ++q) {
                    const int c = pop_country[q];
                    const double parent = l.country_layer()
                                              ? st.alpha_country[static_cast<std::size_t>(l.country(c, m, s))]
                                              : st.theta_sub[static_cast<std::size_t>(l.subcon(country_subcon[c], m, s))];
                    const double sd = l.country_layer() ? sc.sigma_alpha_p : sc.sigma_alpha_c;
                    st.alpha[static_cast<std::size_t>(l.alpha(q, m, s))] = parent + sd * normal(rng);
                }
            }
        }
        for (auto& v : st.sigma_delta) v = sc.sigma_delta;
    }

    // Rates of change.
    Eigen::MatrixXd rho = Eigen::MatrixXd::Constant(l.M, l.M, sc.rho);
    rho.diagonal().setOnes();
    for (int s = 0; s < kLatentSectors; ++s) res.sigma_global[s] = sc.sigma_delta * sc.sigma_delta * rho;
    if (sc.sigma_delta > 0.0) {
        const Eigen::LLT<Eigen::MatrixXd> llt(rho);
        const Eigen::MatrixXd L = sc.sigma_delta * Eigen::MatrixXd(llt.matrixL());
        Eigen::VectorXd z(l.M);
        for (int q = 0; q < l.Q; ++q)
            for (int s = 0; s < kLatentSectors; ++s)
                for (int h = 0; h < l.H; ++h) {
                    for (int m = 0; m < l.M; ++m) z[m] = normal(rng);
                    const Eigen::VectorXd d = L * z;
                    for (int m = 0; m < l.M; ++m) st.delta[static_cast<std::size_t>(l.delta(q, m, s, h))] = d[m];
                }
    }

    // Truth on the grid and observations.
    std::ostringstream survey;
    csv::write_row(survey, {"Country", "Region", "Method", "average_year", "sector_categories", "proportion",
                            "SE.proportion", "n"});
    for (int q = 0; q < l.Q; ++q) {
        const BasisMatrix& B = res.bases[q];
        for (int m = 0; m < l.M; ++m) {
            std::array<std::vector<double>, kLatentSectors> beta;
            for (int s = 0; s < kLatentSectors; ++s) {
                std::vector<double> d(static_cast<std::size_t>(l.H));
                for (int h = 0; h < l.H; ++h) d[h] = st.delta[static_cast<std::size_t>(l.delta(q, m, s, h))];
                beta[s] = beta_from(st.alpha[static_cast<std::size_t>(l.alpha(q, m, s))], d, B.k_star);
            }
            auto psi_at = [&](int t) {
                const Eigen::VectorXd row = B.values.row(t).transpose();
                return LatentPair{latent_psi(beta[0], row), latent_psi(beta[1], row)};
            };
            for (std::size_t t = 0; t < B.grid.size(); ++t) {
                const auto phi = compose_phi(psi_at(static_cast<int>(t))).phi;
                for (int s = 0; s < 3; ++s) {
                    res.truth_phi.push_back({res.populations[q], B.grid[t], res.methods[m], kAllSectors[s], phi[s]});
                }
            }
            for (double year : years) {
                const int t = B.grid_index(year);
                if (t < 0) throw ConfigError("survey year " + csv::format_double(year) + " is not on the half-year grid");
                std::array<double, 3> p{}, se{};
                std::array<long, 3> counts{};
                if (sc.observation == ObservationModel::Multinomial) {
                    const auto phi = compose_phi(psi_at(t)).phi;
                    const long n = sc.sample_size;
                    boost::random::binomial_distribution<long> b1(n, std::clamp(phi[0], 0.0, 1.0));
                    counts[0] = b1(rng);
                    const double cond = phi[0] < 1.0 ? std::clamp(phi[1] / (1.0 - phi[0]), 0.0, 1.0) : 0.0;
                    boost::random::binomial_distribution<long> b2(n - counts[0], cond);
                    counts[1] = b2(rng);
                    counts[2] = n - counts[0] - counts[1];
                    for (int s = 0; s < 3; ++s) {
                        p[s] = static_cast<double>(counts[s]) / static_cast<double>(n);
                        se[s] = std::sqrt(p[s] * (1.0 - p[s]) / static_cast<double>(n));
                    }
                } else {
                    const LatentPair psi = psi_at(t);
                    const double y1 = psi.psi1 + sc.logit_sd * normal(rng);
                    const double y2 = psi.psi2 + sc.logit_sd * normal(rng);
                    p[0] = inv_logit(y1);
                    const double r = inv_logit(y2);
                    p[1] = (1.0 - p[0]) * r;
                    p[2] = 1.0 - p[0] - p[1];
                    se[0] = sc.logit_sd * p[0] * (1.0 - p[0]);
                    se[1] = sc.logit_sd * r * (1.0 - r) * (p[1] + p[2]);
                    se[2] = sc.logit_sd * p[2] * (1.0 - p[2]);
                    for (int s = 0; s < 3; ++s) counts[s] = std::lround(p[s] * static_cast<double>(sc.sample_size));
                }
                for (int s = 0; s < 3; ++s) {
                    csv::write_row(survey, {pops[q].first, pops[q].second, std::string(to_string(res.methods[m])),
                                            csv::format_double(year), std::string(to_string(kAllSectors[s])),
                                            csv::format_double(p[s]), csv::format_double(se[s]), std::to_string(counts[s])});
                }
            }
        }
    }
    res.survey_csv = survey.str();

    IngestSettings settings;
    settings.national = sc.level == Level::National;
    settings.source = "simulated";
    res.data = ingest_table(csv::parse(res.survey_csv), settings, geo);
    return res;
}

std::string truth_csv(const std::vector<TruthRow>& rows) {
    std::ostringstream out;
    csv::write_row(out, {"population", "year", "method", "sector", "phi"});
    for (const auto& r : rows) {
        csv::write_row(out, {r.population, csv::format_double(r.year), std::string(to_string(r.method)),
                             std::string(to_string(r.sector)), csv::format_double(r.phi)});
    }
    return out.str();
}

}  // namespace supplyshare
