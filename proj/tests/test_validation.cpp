#include <algorithm>
#include <numeric>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "supplyshare/error.hpp"
#include "supplyshare/simulate.hpp"
#include "supplyshare/validation.hpp"

using namespace supplyshare;

namespace {

CleanDataset sim_data(const std::vector<double>& years, std::uint64_t seed = 5) {
    SimScenario sc;
    sc.level = Level::Subnational;
    sc.countries = {"Nepal", "Zimbabwe"};
    sc.provinces = {{"Central", "Western"}, {"Harare"}};
    sc.n_methods = 2;
    sc.start_year = 2000;
    sc.end_year = 2020;
    sc.nsegments = 4;
    sc.survey_years = years;
    sc.seed = seed;
    return simulate_dataset(sc).data;
}

std::string key(const SurveyObservation& r) {
    return r.country + "/" + r.province + "/" + std::to_string(r.avg_year) + "/" + std::string(to_string(r.method)) + "/" +
           std::string(to_string(r.sector));
}

PredictiveObservation pobs(Sector s, double y, double median, double lo, double hi, std::string pop = "A") {
    PredictiveObservation o;
    o.population = std::move(pop);
    o.sector = s;
    o.y = y;
    o.median = median;
    o.lower = lo;
    o.upper = hi;
    return o;
}

PosteriorSummary grid_summary(double offset) {
    PosteriorSummary s;
    for (Method m : {Method::Implants, Method::IUD})
        for (double year = 2000; year <= 2002; year += 0.5)
            for (Sector sec : {Sector::Public, Sector::CommercialMedical, Sector::Other}) {
                SummaryRow r;
                r.population = "Nepal/Central";
                r.year = year;
                r.method = m;
                r.sector = sec;
                r.median = 0.3 + offset;
                s.rows.push_back(r);
            }
    return s;
}

}  // namespace

TEST_CASE("leave-last-survey split") {
    const CleanDataset d = sim_data({2004, 2010, 2016});
    const HoldoutSplit split = holdout_split(d, {});
    CHECK(split.train.rows.size() + split.test.rows.size() == d.rows.size());
    for (const auto& r : split.test.rows) CHECK(r.avg_year == 2016);
    for (const auto& r : split.train.rows) CHECK(r.avg_year < 2016);
    std::multiset<std::string> all, parts;
    for (const auto& r : d.rows) all.insert(key(r));
    for (const auto& r : split.train.rows) parts.insert(key(r));
    for (const auto& r : split.test.rows) parts.insert(key(r));
    CHECK(all == parts);
}

TEST_CASE("a population with one survey stays in training") {
    CleanDataset d = sim_data({2004, 2010, 2016});
    std::erase_if(d.rows, [](const SurveyObservation& r) { return r.province == "Harare" && r.avg_year != 2010; });
    const HoldoutSplit split = holdout_split(d, {});
    REQUIRE(split.warnings.size() == 1);
    CHECK(split.warnings[0].find("Harare") != std::string::npos);
    for (const auto& r : split.test.rows) CHECK(r.province != "Harare");
    CHECK(std::count_if(split.train.rows.begin(), split.train.rows.end(),
                        [](const SurveyObservation& r) { return r.province == "Harare"; }) == 6);

    std::erase_if(d.rows, [](const SurveyObservation& r) { return r.avg_year != 2010; });
    CHECK_THROWS_AS(holdout_split(d, {}), InsufficientDataError);
}

TEST_CASE("random-fraction split is seeded and a partition") {
    const CleanDataset d = sim_data({2002, 2005, 2008, 2011, 2014, 2017});
    HoldoutSpec spec;
    spec.rule = HoldoutRule::RandomFraction;
    spec.fraction = 0.2;
    spec.seed = 9;
    const HoldoutSplit a = holdout_split(d, spec), b = holdout_split(d, spec);
    CHECK(to_canonical_csv(a.test.rows) == to_canonical_csv(b.test.rows));
    CHECK(!a.test.rows.empty());
    CHECK(a.train.rows.size() + a.test.rows.size() == d.rows.size());
    std::set<std::string> train, test;
    for (const auto& r : a.train.rows) train.insert(key(r));
    for (const auto& r : a.test.rows) test.insert(key(r));
    for (const auto& k : test) CHECK(train.count(k) == 0);
    CHECK(parse_holdout_rule("random") == HoldoutRule::RandomFraction);
    CHECK(parse_holdout_rule("last") == HoldoutRule::LeaveLastSurvey);
    CHECK_THROWS_AS(parse_holdout_rule("fold"), ConfigError);
}

TEST_CASE("error terms") {
    CHECK(pobs(Sector::Public, 0.4, 0.4, 0, 1).error() == 0.0);
    CHECK(pobs(Sector::Public, 0.6, 0.5, 0, 1).error() == doctest::Approx(0.1));
}

TEST_CASE("predictive median matches the analytic value") {
    const CleanDataset d = sim_data({2004, 2010, 2016});
    const HoldoutSplit split = holdout_split(d, {});
    ModelSpec spec;
    spec.level = Level::Subnational;
    spec.start_year = 2000;
    spec.end_year = 2020;
    spec.nsegments = 4;
    const ModelInputs in = build_model_inputs(split.train, spec);
    const StateLayout l = StateLayout::of(in);

    // point-mass posterior: flat curves at known alpha
    ParameterState st = ParameterState::zeros(l);
    for (std::size_t i = 0; i < st.alpha.size(); ++i) st.alpha[i] = -0.6 + 0.1 * static_cast<double>(i % 13);
    for (auto& v : st.sigma_delta) v = 0.3;
    const auto flat = st.flatten(l);
    ChainOutput out;
    out.layout = l;
    out.draws_per_chain = 20000;
    for (int c = 0; c < 2; ++c) {
        Eigen::MatrixXd m(out.draws_per_chain, static_cast<Eigen::Index>(flat.size()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j).setConstant(flat[static_cast<std::size_t>(j)]);
        out.chains.push_back(m);
    }
    const PredictiveResult pr = predictive_errors(out, in, split.test, 4);
    CHECK(pr.obs.size() == split.test.rows.size());
    int checked = 0;
    for (const auto& o : pr.obs) {
        CHECK(o.lower <= o.median);
        CHECK(o.median <= o.upper);
        if (o.sector != Sector::Public) continue;
        const std::string pop = o.population;
        int q = -1;
        for (int i = 0; i < l.Q; ++i)
            if (in.population_name(i) == pop) q = i;
        REQUIRE(q >= 0);
        int m = -1;
        for (int i = 0; i < l.M; ++i)
            if (in.methods[i] == o.method) m = i;
        REQUIRE(m >= 0);
        // noise is symmetric on the logit scale, so the median is invlogit(alpha)
        const double expected = inv_logit(st.alpha[l.alpha(q, m, 0)]);
        CHECK(std::abs(o.median - expected) < 1e-3);
        CHECK(o.error() == doctest::Approx(o.y - o.median));
        ++checked;
    }
    CHECK(checked == 6);
}

TEST_CASE("metrics on hand-built error sets") {
    const SectorMetrics a = compute_metrics({0.5, 0.5}, {3, 4}, {0, 0}, {1, 1});
    CHECK(a.rmse == doctest::Approx(3.5355).epsilon(1e-4));
    CHECK(a.rmse == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));

    const SectorMetrics b = compute_metrics({0.5, 0.5, 0.5}, {-1, 2, -3}, {0, 0, 0}, {1, 1, 1});
    CHECK(b.mean_error == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
    CHECK(b.median_abs_error == 2.0);
    CHECK(b.n == 3);

    const SectorMetrics inside = compute_metrics({0.2, 0.5, 0.7}, {0, 0, 0}, {0.1, 0.4, 0.6}, {0.3, 0.6, 0.9});
    CHECK(inside.coverage95 == 100.0);
    CHECK(inside.prop_above == 0.0);
    CHECK(inside.prop_below == 0.0);
    CHECK(inside.median_pi_width95 == doctest::Approx(0.2));

    const SectorMetrics split = compute_metrics({0.05, 0.5, 0.95, 0.5}, {0, 0, 0, 0}, {0.1, 0.4, 0.1, 0.4}, {0.9, 0.6, 0.9, 0.6});
    CHECK(split.coverage95 == 50.0);
    CHECK(split.prop_below == 25.0);
    CHECK(split.prop_above == 25.0);

    const double inf = INFINITY;
    const SectorMetrics wide = compute_metrics({0.1, 0.9}, {0.3, -0.2}, {-inf, -inf}, {inf, inf});
    CHECK(wide.coverage95 == 100.0);
}

TEST_CASE("metric invariants on random inputs") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 0.1);
    for (int rep = 0; rep < 200; ++rep) {
        const int N = 1 + rep % 17;
        std::vector<double> y(N), e(N), lo(N), hi(N);
        for (int i = 0; i < N; ++i) {
            y[i] = u(rng);
            e[i] = n(rng);
            lo[i] = y[i] - 0.3 * u(rng) + 0.05;
            hi[i] = lo[i] + 0.4 * u(rng);
        }
        const SectorMetrics m = compute_metrics(y, e, lo, hi);
        CHECK(m.rmse >= std::abs(m.mean_error) - 1e-15);
        CHECK(m.prop_above + m.prop_below == doctest::Approx(100.0 - m.coverage95));
        for (double p : {m.coverage95, m.prop_above, m.prop_below}) CHECK((p >= 0.0 && p <= 100.0));

        std::vector<int> perm(N);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> y2(N), e2(N), lo2(N), hi2(N);
        for (int i = 0; i < N; ++i) {
            y2[i] = y[perm[i]];
            e2[i] = e[perm[i]];
            lo2[i] = lo[perm[i]];
            hi2[i] = hi[perm[i]];
        }
        const SectorMetrics p = compute_metrics(y2, e2, lo2, hi2);
        CHECK(p.coverage95 == m.coverage95);
        CHECK(p.rmse == doctest::Approx(m.rmse).epsilon(1e-14));
        CHECK(p.mean_error == doctest::Approx(m.mean_error).epsilon(1e-14));
        CHECK(p.median_abs_error == m.median_abs_error);
        CHECK(p.median_pi_width95 == m.median_pi_width95);
    }
}

TEST_CASE("report in percentage points and the table layout") {
    std::vector<PredictiveObservation> obs{pobs(Sector::Public, 0.53, 0.50, 0.4, 0.6),
                                           pobs(Sector::Public, 0.44, 0.48, 0.45, 0.6, "B"),
                                           pobs(Sector::CommercialMedical, 0.20, 0.21, 0.1, 0.3),
                                           pobs(Sector::Other, 0.27, 0.29, 0.2, 0.4)};
    const ValidationReport r = make_report(obs);
    CHECK(r.sectors[0].sector == Sector::Public);
    CHECK(r.sectors[1].sector == Sector::CommercialMedical);
    CHECK(r.sectors[2].sector == Sector::Other);
    CHECK(r.sectors[0].n == 2);
    CHECK(r.sectors[0].coverage95 == 50.0);
    CHECK(r.sectors[0].prop_below == 50.0);
    CHECK(r.sectors[0].mean_error == doctest::Approx(-0.5));
    CHECK(r.sectors[0].rmse == doctest::Approx(std::sqrt((9.0 + 16.0) / 2)));

    const std::string table = report_table(r);
    const std::string header = table.substr(0, table.find('\n'));
    std::size_t pos = 0;
    for (const char* col : {"Sector", "Coverage", "RMSE", "Above", "Below", "PI width", "Mean error", "Median absolute error"}) {
        const std::size_t at = header.find(col, pos);
        CHECK(at != std::string::npos);
        pos = at;
    }
    CHECK(table.find("Public") < table.find("Commercial"));
    CHECK(table.find("Commercial") < table.find("Other"));

    const ValidationReport back = read_report_csv(csv::parse(report_csv(r)));
    for (int s = 0; s < 3; ++s) {
        CHECK(back.sectors[s].n == r.sectors[s].n);
        CHECK(back.sectors[s].rmse == doctest::Approx(r.sectors[s].rmse).epsilon(1e-12));
    }
}

TEST_CASE("model comparison") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.05, 0.95), w(0.0, 0.1);
    std::vector<PredictiveObservation> a, b;
    for (int i = 0; i < 60; ++i) {
        const Sector s = static_cast<Sector>(i % 3);
        const double y = u(rng), med = y + 0.1 * (u(rng) - 0.5);
        const double lo = med - w(rng), hi = med + w(rng);
        // A contains B's interval
        b.push_back(pobs(s, y, med, lo, hi, "P" + std::to_string(i)));
        a.push_back(pobs(s, y, med, lo - w(rng), hi + w(rng), "P" + std::to_string(i)));
    }
    const ValidationReport ra = make_report(a), rb = make_report(b);
    const ModelComparison self = compare_models(ra, ra);
    for (const auto& row : self.rows) {
        CHECK(row.delta.coverage95 == 0.0);
        CHECK(row.delta.rmse == 0.0);
        CHECK(row.delta.mean_error == 0.0);
        CHECK(row.delta.median_pi_width95 == 0.0);
    }
    const ModelComparison cmp = compare_models(ra, rb);
    for (int s = 0; s < 3; ++s) {
        CHECK(cmp.rows[s].sector == static_cast<Sector>(s));
        CHECK(cmp.rows[s].a.coverage95 >= cmp.rows[s].b.coverage95);
        CHECK(cmp.rows[s].delta.coverage95 == doctest::Approx(cmp.rows[s].a.coverage95 - cmp.rows[s].b.coverage95));
    }
    const std::string text = comparison_table(cmp, "cross", "zero");
    CHECK(text.find("cross") != std::string::npos);
    CHECK(text.find("Public") < text.find("Commercial"));

    std::vector<PredictiveObservation> other = b;
    other.pop_back();
    CHECK_THROWS_AS(compare_models(ra, make_report(other)), TestSetMismatchError);
}

TEST_CASE("median agreement") {
    const AgreementTable same = median_agreement(grid_summary(0), grid_summary(0));
    CHECK(same.overall == 1.0);
    for (const auto& [m, f] : same.fraction) CHECK(f == 1.0);
    CHECK(same.fraction.size() == 2);
    CHECK(same.pairs.size() == grid_summary(0).rows.size());

    const AgreementTable off = median_agreement(grid_summary(0), grid_summary(0.06));
    CHECK(off.overall == 0.0);
    for (const auto& [m, f] : off.fraction) CHECK(f == 0.0);

    const AgreementTable edge = median_agreement(grid_summary(0), grid_summary(0.05));
    CHECK(edge.overall == 1.0);

    PosteriorSummary bigger = grid_summary(0);
    SummaryRow extra = bigger.rows.back();
    extra.year = 2002.5;
    bigger.rows.push_back(extra);
    CHECK_THROWS_AS(median_agreement(bigger, grid_summary(0)), GridMismatchError);
    CHECK_THROWS_AS(median_agreement(grid_summary(0), bigger), GridMismatchError);

    CHECK(agreement_csv(same).find("method") != std::string::npos);
    CHECK(agreement_pairs_csv(same).find("single") != std::string::npos);
}
