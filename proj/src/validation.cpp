#include "supplyshare/validation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "supplyshare/csv.hpp"
#include "supplyshare/error.hpp"

namespace supplyshare {

HoldoutRule parse_holdout_rule(std::string_view token) {
    const std::string t = csv::lower(std::string(token));
    if (t == "last" || t == "leave_last_survey" || t == "leavelastsurvey") return HoldoutRule::LeaveLastSurvey;
    if (t == "random" || t == "random_fraction" || t == "randomfraction") return HoldoutRule::RandomFraction;
    throw ConfigError("unknown holdout rule '" + std::string(token) + "' (expected last or random)");
}

HoldoutSplit holdout_split(const CleanDataset& data, const HoldoutSpec& spec) {
    if (spec.rule == HoldoutRule::RandomFraction && !(spec.fraction > 0.0 && spec.fraction < 1.0)) {
        throw ConfigError("holdout fraction must be in (0, 1)");
    }
    // Survey units per population, in year order.
    std::map<std::string, std::set<double>> units;
    for (const auto& r : data.rows) units[population_name(r.country, r.province)].insert(r.avg_year);

    std::set<std::pair<std::string, double>> held;
    HoldoutSplit split;
    Rng rng = make_rng(spec.seed, 0x7e57);
    boost::random::uniform_01<double> unif;
    for (const auto& [pop, years] : units) {
        if (years.size() < 2) {
            split.warnings.push_back("population " + pop + " has a single survey and is kept out of the test set");
            continue;
        }
        if (spec.rule == HoldoutRule::LeaveLastSurvey) {
            held.emplace(pop, *years.rbegin());
            continue;
        }
        std::vector<double> chosen;
        for (double y : years) {
            if (unif(rng) < spec.fraction) chosen.push_back(y);
        }
        if (chosen.size() == years.size()) chosen.erase(chosen.begin());
        for (double y : chosen) held.emplace(pop, y);
    }

    split.train.geography = data.geography;
    split.train.settings = data.settings;
    split.test.geography = data.geography;
    split.test.settings = data.settings;
    for (const auto& r : data.rows) {
        const bool test = held.count({population_name(r.country, r.province), r.avg_year}) > 0;
        (test ? split.test : split.train).rows.push_back(r);
    }
    if (split.test.rows.empty()) throw InsufficientDataError("the holdout rule left no test observations");
    return split;
}

PredictiveResult predictive_errors(const ChainOutput& out, const ModelInputs& in, const CleanDataset& test,
                                   std::uint64_t seed) {
    const StateLayout& l = out.layout;
    const std::size_t N = out.total_draws();
    if (N == 0) throw InsufficientDataError("no retained draws for prediction");
    std::map<std::string, int> pop_index;
    for (int q = 0; q < in.Q(); ++q) pop_index[in.population_name(q)] = q;

    // Group test rows into sector triples.
    struct Group {
        int q, m;
        double year;
        std::string pop;
        Method method;
        SectorTriple triple;
        std::array<bool, 3> seen{};
    };
    std::map<std::tuple<int, int, double>, Group> groups;
    PredictiveResult res;
    std::set<std::string> skipped;
    for (const auto& r : test.rows) {
        const std::string pop = population_name(r.country, r.province);
        auto qi = pop_index.find(pop);
        const int m = in.method_index(r.method);
        if (qi == pop_index.end() || m < 0) {
            if (skipped.insert(pop + "/" + std::string(to_string(r.method))).second) {
                res.warnings.push_back("test series " + pop + " / " + std::string(to_string(r.method)) +
                                       " is not in the fitted model and is skipped");
            }
            continue;
        }
        auto& g = groups[{qi->second, m, r.avg_year}];
        g.q = qi->second;
        g.m = m;
        g.year = r.avg_year;
        g.pop = pop;
        g.method = r.method;
        const int s = static_cast<int>(r.sector);
        g.triple.p[s] = r.proportion;
        g.triple.se[s] = r.se;
        g.seen[s] = true;
    }

    Rng rng = make_rng(seed, 0x9e3);
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    std::array<std::vector<double>, 3> draws;
    for (auto& d : draws) d.resize(N);
    std::vector<double> b1, b2;
    for (const auto& [key, g] : groups) {
        if (!(g.seen[0] && g.seen[1] && g.seen[2])) continue;
        const BasisMatrix& B = in.bases[g.q];
        const double snapped = in.spec.start_year + kGridStep * std::round((g.year - in.spec.start_year) / kGridStep);
        const int t = B.grid_index(snapped);
        if (t < 0) {
            res.warnings.push_back("test year " + csv::format_double(g.year) + " is outside the fitted window");
            continue;
        }
        const LogitConversion conv = to_logit_obs(g.triple);
        std::array<double, 2> sd{0.0, 0.0};
        for (const auto& v : conv.values) sd[v.sector] = std::sqrt(v.var);
        const Eigen::VectorXd row = B.values.row(t).transpose();
        std::size_t d = 0;
        for (std::size_t c = 0; c < out.chains.size(); ++c) {
            for (long i = 0; i < out.chains[c].rows(); ++i, ++d) {
                const ParameterState st = out.draw(c, i);
                b1 = state_beta(st, l, in, g.q, g.m, 0);
                b2 = state_beta(st, l, in, g.q, g.m, 1);
                const double psi1 = latent_psi(b1, row) + sd[0] * normal(rng);
                const double psi2 = latent_psi(b2, row) + sd[1] * normal(rng);
                const auto phi = compose_phi({psi1, psi2}).phi;
                for (int s = 0; s < 3; ++s) draws[s][d] = phi[s];
            }
        }
        for (int s = 0; s < 3; ++s) {
            const SummaryRow sr = summarize_cell(draws[s]);
            res.obs.push_back({g.pop, g.year, g.method, kAllSectors[s], g.triple.p[s], sr.median, sr.l95, sr.u95});
        }
    }
    return res;
}

SectorMetrics compute_metrics(const std::vector<double>& y, const std::vector<double>& errors,
                              const std::vector<double>& lower, const std::vector<double>& upper) {
    const std::size_t n = errors.size();
    if (y.size() != n || lower.size() != n || upper.size() != n) {
        throw ConfigError("metric inputs must have equal lengths");
    }
    SectorMetrics m;
    m.n = static_cast<int>(n);
    if (n == 0) return m;
    double sq = 0.0, sum = 0.0;
    int inside = 0, above = 0, below = 0;
    std::vector<double> abs_err, width;
    for (std::size_t i = 0; i < n; ++i) {
        sq += errors[i] * errors[i];
        sum += errors[i];
        abs_err.push_back(std::abs(errors[i]));
        width.push_back(upper[i] - lower[i]);
        if (y[i] > upper[i]) {
            ++above;
        } else if (y[i] < lower[i]) {
            ++below;
        } else {
            ++inside;
        }
    }
    const double N = static_cast<double>(n);
    m.rmse = std::sqrt(sq / N);
    m.mean_error = sum / N;
    m.median_abs_error = median(std::move(abs_err));
    m.median_pi_width95 = median(std::move(width));
    m.coverage95 = 100.0 * inside / N;
    m.prop_above = 100.0 * above / N;
    m.prop_below = 100.0 * below / N;
    return m;
}

ValidationReport make_report(const std::vector<PredictiveObservation>& obs) {
    ValidationReport report;
    for (int s = 0; s < 3; ++s) {
        std::vector<double> y, e, lo, hi;
        for (const auto& o : obs) {
            if (o.sector != kAllSectors[s]) continue;
            y.push_back(100.0 * o.y);
            e.push_back(100.0 * o.error());
            lo.push_back(100.0 * o.lower);
            hi.push_back(100.0 * o.upper);
        }
        report.sectors[s] = compute_metrics(y, e, lo, hi);
        report.sectors[s].sector = kAllSectors[s];
    }
    for (const auto& o : obs) {
        report.test_keys.push_back(o.population + "|" + csv::format_double(o.year) + "|" +
                                   std::string(to_string(o.method)) + "|" + std::string(to_string(o.sector)));
    }
    std::sort(report.test_keys.begin(), report.test_keys.end());
    return report;
}

namespace {

const std::vector<std::string> kReportColumns{"sector",     "n",          "coverage95",       "rmse",
                                              "prop_above", "prop_below", "median_pi_width95", "mean_error",
                                              "median_abs_error"};

std::string fixed(double v, int digits) { return csv::format_fixed(v, digits); }

SectorMetrics metric_delta(const SectorMetrics& a, const SectorMetrics& b) {
    SectorMetrics d;
    d.sector = a.sector;
    d.n = a.n - b.n;
    d.coverage95 = a.coverage95 - b.coverage95;
    d.rmse = a.rmse - b.rmse;
    d.prop_above = a.prop_above - b.prop_above;
    d.prop_below = a.prop_below - b.prop_below;
    d.median_pi_width95 = a.median_pi_width95 - b.median_pi_width95;
    d.mean_error = a.mean_error - b.mean_error;
    d.median_abs_error = a.median_abs_error - b.median_abs_error;
    return d;
}

std::vector<std::string> metric_cells(const SectorMetrics& m) {
    return {fixed(m.coverage95, 1),        fixed(m.rmse, 2),       fixed(m.prop_above, 1),
            fixed(m.prop_below, 1),        fixed(m.median_pi_width95, 2), fixed(m.mean_error, 2),
            fixed(m.median_abs_error, 2)};
}

std::string render(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width;
    for (const auto& r : rows) {
        width.resize(std::max(width.size(), r.size()), 0);
        for (std::size_t j = 0; j < r.size(); ++j) width[j] = std::max(width[j], r[j].size());
    }
    std::ostringstream out;
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j == 0) {
                out << std::left << std::setw(static_cast<int>(width[j])) << r[j];
            } else {
                out << "  " << std::right << std::setw(static_cast<int>(width[j])) << r[j];
            }
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace

std::string report_csv(const ValidationReport& report) {
    std::ostringstream out;
    csv::write_row(out, kReportColumns);
    for (const auto& m : report.sectors) {
        csv::write_row(out, {std::string(to_string(m.sector)), std::to_string(m.n), csv::format_double(m.coverage95),
                             csv::format_double(m.rmse), csv::format_double(m.prop_above),
                             csv::format_double(m.prop_below), csv::format_double(m.median_pi_width95),
                             csv::format_double(m.mean_error), csv::format_double(m.median_abs_error)});
    }
    return out.str();
}

std::string report_table(const ValidationReport& report) {
    std::vector<std::vector<std::string>> rows{
        {"Sector", "Coverage", "RMSE", "Above", "Below", "PI width", "Mean error", "Median absolute error"}};
    for (const auto& m : report.sectors) {
        std::vector<std::string> r{std::string(to_string(m.sector))};
        for (auto& c : metric_cells(m)) r.push_back(std::move(c));
        rows.push_back(std::move(r));
    }
    return render(rows);
}

ValidationReport read_report_csv(const csv::Table& table) {
    std::vector<std::size_t> idx;
    for (const auto& c : kReportColumns) {
        auto i = table.column(c);
        if (!i) throw SchemaError("report file is missing column '" + c + "'");
        idx.push_back(*i);
    }
    if (table.rows.size() != 3) throw SchemaError("report file must have one row per sector");
    ValidationReport rep;
    for (std::size_t r = 0; r < 3; ++r) {
        const auto& row = table.rows[r];
        auto num = [&](std::size_t k) {
            auto v = csv::parse_double(row.at(idx[k]));
            if (!v) throw SchemaError("report entry '" + kReportColumns[k] + "' is not a number");
            return *v;
        };
        auto sec = parse_sector(row.at(idx[0]));
        if (!sec) throw SchemaError("report sector '" + row.at(idx[0]) + "' is unknown");
        SectorMetrics& m = rep.sectors[static_cast<std::size_t>(*sec)];
        m.sector = *sec;
        m.n = static_cast<int>(num(1));
        m.coverage95 = num(2);
        m.rmse = num(3);
        m.prop_above = num(4);
        m.prop_below = num(5);
        m.median_pi_width95 = num(6);
        m.mean_error = num(7);
        m.median_abs_error = num(8);
    }
    return rep;
}

ModelComparison compare_models(const ValidationReport& a, const ValidationReport& b) {
    bool same = a.test_keys == b.test_keys;
    for (int s = 0; s < 3; ++s) same = same && a.sectors[s].n == b.sectors[s].n;
    if (!same) throw TestSetMismatchError("the two reports were computed on different test sets");
    ModelComparison cmp;
    for (int s = 0; s < 3; ++s) {
        cmp.rows[s] = {kAllSectors[s], a.sectors[s], b.sectors[s], metric_delta(a.sectors[s], b.sectors[s])};
    }
    return cmp;
}

std::string comparison_table(const ModelComparison& cmp, const std::string& label_a, const std::string& label_b) {
    std::vector<std::vector<std::string>> rows{
        {"Sector", "Model", "Coverage", "RMSE", "Above", "Below", "PI width", "Mean error", "Median absolute error"}};
    for (const auto& r : cmp.rows) {
        const std::string sec(to_string(r.sector));
        for (const auto& [label, m] : {std::pair{label_a, r.a}, std::pair{label_b, r.b}, std::pair{std::string("delta"), r.delta}}) {
            std::vector<std::string> row{sec, label};
            for (auto& c : metric_cells(m)) row.push_back(std::move(c));
            rows.push_back(std::move(row));
        }
    }
    return render(rows);
}

AgreementTable median_agreement(const PosteriorSummary& single, const PosteriorSummary& multi, double band) {
    using Key = std::tuple<std::string, long, Method, Sector>;
    auto key = [](const SummaryRow& r) { return Key{r.population, std::lround(r.year * 2.0), r.method, r.sector}; };
    std::map<Key, double> multi_cells;
    for (const auto& r : multi.rows) multi_cells[key(r)] = r.median;
    std::set<std::string> pops;
    std::set<Key> single_keys;
    for (const auto& r : single.rows) {
        pops.insert(r.population);
        single_keys.insert(key(r));
    }
    for (const auto& [k, v] : multi_cells) {
        if (pops.count(std::get<0>(k)) && !single_keys.count(k)) {
            throw GridMismatchError("multi-population summary has cells the single-population summary lacks");
        }
    }
    AgreementTable t;
    t.band = band;
    std::map<Method, std::pair<int, int>> counts;
    int inside = 0;
    for (const auto& r : single.rows) {
        auto it = multi_cells.find(key(r));
        if (it == multi_cells.end()) {
            throw GridMismatchError("cell " + r.population + " " + csv::format_double(r.year) + " " +
                                    std::string(to_string(r.method)) + " is missing from the multi-population summary");
        }
        const bool ok = std::abs(r.median - it->second) <= band + 1e-12;
        auto& c = counts[r.method];
        c.second += 1;
        c.first += ok;
        inside += ok;
        t.pairs.push_back({r.population, r.year, r.method, r.sector, r.median, it->second});
    }
    for (const auto& [m, c] : counts) t.fraction[m] = static_cast<double>(c.first) / c.second;
    t.overall = single.rows.empty() ? 0.0 : static_cast<double>(inside) / static_cast<double>(single.rows.size());
    return t;
}

std::string agreement_csv(const AgreementTable& table) {
    std::ostringstream out;
    csv::write_row(out, {"method", "band", "fraction_within"});
    for (const auto& [m, f] : table.fraction) {
        csv::write_row(out, {std::string(to_string(m)), csv::format_double(table.band), csv::format_double(f)});
    }
    csv::write_row(out, {"all", csv::format_double(table.band), csv::format_double(table.overall)});
    return out.str();
}

std::string agreement_pairs_csv(const AgreementTable& table) {
    std::ostringstream out;
    csv::write_row(out, {"population", "year", "method", "sector", "median_single", "median_multi"});
    for (const auto& p : table.pairs) {
        csv::write_row(out, {p.population, csv::format_double(p.year), std::string(to_string(p.method)),
                             std::string(to_string(p.sector)), csv::format_double(p.single),
                             csv::format_double(p.multi)});
    }
    return out.str();
}

}  // namespace supplyshare
