// Acceptance criteria 1-9. One PASS/FAIL line per criterion; pass criterion
// numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <boost/math/distributions/chi_squared.hpp>

#include "supplyshare/correlation.hpp"
#include "supplyshare/csv.hpp"
#include "supplyshare/error.hpp"
#include "supplyshare/posterior_summary.hpp"
#include "supplyshare/sampler.hpp"
#include "supplyshare/simulate.hpp"
#include "supplyshare/spline_basis.hpp"
#include "supplyshare/validation.hpp"
#include "toy_target.hpp"

using namespace supplyshare;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects failed checks with a short note each.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok) failures_.push_back(what);
    }
    Outcome outcome(const std::string& summary) const {
        Outcome o{failures_.empty(), summary};
        if (!failures_.empty()) {
            o.detail += "; failed: " + failures_.front();
            if (failures_.size() > 1) o.detail += " (+" + std::to_string(failures_.size() - 1) + " more)";
        }
        return o;
    }

private:
    std::vector<std::string> failures_;
};

std::string fmt(double v, int digits = 3) {
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(digits);
    o << v;
    return o.str();
}

std::vector<double> pooled(const ChainOutput& out, int j) {
    std::vector<double> v;
    for (const auto& c : out.chains) v.insert(v.end(), c.col(j).data(), c.col(j).data() + c.rows());
    return v;
}

std::vector<Eigen::VectorXd> per_chain(const ChainOutput& out, int j) {
    std::vector<Eigen::VectorXd> v;
    for (const auto& c : out.chains) v.push_back(c.col(j));
    return v;
}

ModelSpec window_spec(Level level, double start, double end, int nseg) {
    ModelSpec spec;
    spec.level = level;
    spec.start_year = start;
    spec.end_year = end;
    spec.nsegments = nseg;
    return spec;
}

// ---- 1

Outcome criterion1() {
    Checks c;
    std::mt19937_64 rng(101);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_beta = 0, worst_unity = 0, worst_round = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const int K = 5 + rep % 15;
        std::vector<double> d(K - 1);
        for (auto& x : d) x = n(rng);
        const auto b = beta_from(n(rng), d, rep % K);
        for (int h = 0; h < K - 1; ++h) worst_beta = std::max(worst_beta, std::abs(b[h + 1] - b[h] - d[h]));
    }
    for (int rep = 0; rep < 1000; ++rep) {
        const double start = 1980 + std::floor(20 * u(rng)) / 2;
        const double end = start + 10 + std::floor(60 * u(rng)) / 2;
        const int nseg = 4 + rep % 12;
        const double anchor = start + 0.5 * std::floor((end - start) * 2 * u(rng)) + 0.5;
        const BasisMatrix B = build_basis(start, end, nseg, std::min(anchor, end));
        const double t = start + (end - start) * u(rng);
        worst_unity = std::max(worst_unity, std::abs(eval_basis(B, t).sum() - 1.0));
    }
    for (int rep = 0; rep < 1000; ++rep) {
        double a = u(rng) + 1e-3, b = u(rng) + 1e-3, e = u(rng) + 1e-3;
        const double s = a + b + e;
        const std::array<double, 3> p{a / s, b / s, e / s};
        const auto conv = to_logit_obs({p, {0.01, 0.01, 0.01}});
        const auto phi = compose_phi({conv.values[0].y, conv.values[1].y}).phi;
        for (int k = 0; k < 3; ++k) worst_round = std::max(worst_round, std::abs(phi[k] - p[k]));
    }
    c.expect(worst_beta <= 1e-10, "beta recursion error " + std::to_string(worst_beta));
    c.expect(worst_unity <= 1e-9, "partition of unity error " + std::to_string(worst_unity));
    c.expect(worst_round <= 1e-10, "round-trip error " + std::to_string(worst_round));
    std::ostringstream s;
    s << "max errors: recursion " << worst_beta << ", unity " << worst_unity << ", round trip " << worst_round;
    return c.outcome(s.str());
}

// ---- 2

Outcome criterion2() {
    Checks c;
    std::mt19937_64 rng(202);
    std::normal_distribution<double> n;
    std::bernoulli_distribution keep(0.75);
    auto make = [&](int Q, int M, int H, bool one_per_country) {
        DeltaMedians d;
        d.Q = Q;
        d.M = M;
        d.H = H;
        d.median.resize(static_cast<std::size_t>(Q * 2 * H * M));
        for (auto& v : d.median) v = n(rng);
        d.mask.assign(Q, std::vector<bool>(H));
        for (auto& row : d.mask)
            for (int h = 0; h < H; ++h) row[h] = keep(rng);
        for (int q = 0; q < Q; ++q) d.population_country.push_back(one_per_country ? q : q / 2);
        return d;
    };
    double worst = 0, worst_scale = 0;
    bool pooling_equal = true;
    for (int rep = 0; rep < 300; ++rep) {
        const int M = 2 + rep % 4;
        DeltaMedians d = make(3 + rep % 6, M, 6, true);
        for (int s = 0; s < 2; ++s) {
            const Eigen::MatrixXd r = rho_hat(d, s, Pooling::ByProvince).rho;
            for (int i = 0; i < M; ++i)
                for (int j = 0; j < M; ++j) {
                    double xy = 0, xx = 0, yy = 0;
                    for (int q = 0; q < d.Q; ++q)
                        for (int h = 0; h < d.H; ++h) {
                            if (!d.mask[q][h]) continue;
                            xy += d.at(q, i, s, h) * d.at(q, j, s, h);
                            xx += d.at(q, i, s, h) * d.at(q, i, s, h);
                            yy += d.at(q, j, s, h) * d.at(q, j, s, h);
                        }
                    const double expected = i == j ? 1.0 : xy / (std::sqrt(xx) * std::sqrt(yy));
                    worst = std::max(worst, std::abs(r(i, j) - expected));
                }
            pooling_equal = pooling_equal && rho_hat(d, s, Pooling::ByCountry).rho == r;
        }
        const double k = 0.01 + 20 * std::abs(n(rng));
        const int m = rep % M;
        const DeltaMedians before = d;
        for (int q = 0; q < d.Q; ++q)
            for (int s = 0; s < 2; ++s)
                for (int h = 0; h < d.H; ++h)
                    d.median[static_cast<std::size_t>(((q * 2 + s) * d.H + h) * d.M + m)] *= k;
        worst_scale = std::max(worst_scale, (rho_hat(d, 0, Pooling::ByProvince).rho - rho_hat(before, 0, Pooling::ByProvince).rho)
                                                .cwiseAbs()
                                                .maxCoeff());
    }
    c.expect(worst <= 1e-12, "oracle difference " + std::to_string(worst));
    c.expect(worst_scale <= 1e-12, "scale invariance " + std::to_string(worst_scale));
    c.expect(pooling_equal, "pooling consistency");
    std::ostringstream s;
    s << "600 matrices, max oracle difference " << worst << ", scale " << worst_scale << ", pooling "
      << (pooling_equal ? "equal" : "different");
    return c.outcome(s.str());
}

// ---- 3

Outcome criterion3() {
    Checks c;
    const std::vector<double> y{3.1, 2.4, 4.0, 2.9, 3.6, 3.3, 2.2, 3.8};
    const double m0 = 1.0, s0 = 2.0, sigma = 1.5;
    double sum = 0.0;
    for (double v : y) sum += v;
    const double prec = 1.0 / (s0 * s0) + y.size() / (sigma * sigma);
    const double mean = (m0 / (s0 * s0) + sum / (sigma * sigma)) / prec;
    const double sd = std::sqrt(1.0 / prec);
    auto f = [&](const std::vector<double>& x) {
        double lp = -0.5 * std::pow((x[0] - m0) / s0, 2);
        for (double v : y) lp -= 0.5 * std::pow((v - x[0]) / sigma, 2);
        return lp;
    };
    SamplerConfig cfg;  // defaults: 2000 retained draws per chain
    cfg.seed = 303;
    const std::vector<double> x0{-3.0};
    const auto chains = run_engine([&](int, Rng&) { return std::make_unique<ToyTarget>(f, x0, std::vector<std::vector<int>>{{0}}); }, cfg);
    std::vector<double> draws;
    for (const auto& ch : chains) draws.insert(draws.end(), ch.draws.data(), ch.draws.data() + ch.draws.rows());
    double m = 0, v = 0;
    for (double d : draws) m += d;
    m /= draws.size();
    for (double d : draws) v += (d - m) * (d - m);
    const double s = std::sqrt(v / (draws.size() - 1));
    const double rel_mean = std::abs(m - mean) / mean, rel_sd = std::abs(s - sd) / sd;
    c.expect(rel_mean < 0.02, "posterior mean off by " + fmt(100 * rel_mean, 2) + "%");
    c.expect(rel_sd < 0.02, "posterior sd off by " + fmt(100 * rel_sd, 2) + "%");

    // zero data: sigma_delta keeps its Uniform(0, 10) prior
    SimScenario sc;
    sc.level = Level::National;
    sc.countries = {"Nepal", "Zimbabwe"};
    sc.n_methods = 2;
    sc.start_year = 2000;
    sc.end_year = 2020;
    sc.nsegments = 4;
    sc.survey_years = {2005, 2010, 2015};
    sc.seed = 3;
    ModelInputs in = build_model_inputs(simulate_dataset(sc).data, window_spec(Level::National, 2000, 2020, 4));
    in.obs.clear();
    SamplerConfig zc;
    zc.n_iter = 402000;
    zc.n_burnin = 2000;
    zc.n_thin = 10;
    zc.seed = 304;
    const ChainOutput out = run_chains(in, zc);
    const StateLayout& l = out.layout;
    double worst_z = 0;
    for (int j = 0; j < l.M * 2; ++j) {
        const int col = l.off_sigma_delta() + j;
        std::vector<double> all = pooled(out, col);
        const double ess = effective_sample_size_raw(per_chain(out, col));
        for (double p : {0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95}) {
            const double se = std::sqrt(p * (1 - p) / ess) / 0.1;
            const double z = std::abs(quantile(all, p) - 10 * p) / se;
            worst_z = std::max(worst_z, z);
        }
    }
    c.expect(worst_z < 3.0, "prior quantile " + fmt(worst_z, 2) + " standard errors away");
    return c.outcome("conjugate mean/sd error " + fmt(100 * rel_mean, 2) + "%/" + fmt(100 * rel_sd, 2) +
                     "%; zero-data sigma_delta quantiles within " + fmt(worst_z, 2) + " MC SE");
}

// ---- 4

Outcome criterion4() {
    Checks c;
    const int reps = 200;
    const int bins = 10;
    struct Tracked {
        std::string name;
        int column;
        std::vector<int> counts = std::vector<int>(10, 0);
    };
    std::vector<Tracked> tracked;
    long covered = 0, tested = 0;
    for (int rep = 0; rep < reps; ++rep) {
        SimScenario sc;
        sc.level = Level::Subnational;
        sc.countries = {"Nepal"};
        sc.provinces_per_country = 4;
        sc.n_methods = 2;
        sc.start_year = 2000;
        sc.end_year = 2020;
        sc.nsegments = 4;  // K = 7
        sc.survey_years = {2004, 2008, 2012, 2016};
        sc.holdout_surveys = 1;  // three training surveys per population
        sc.fixed_hyperparameters = true;
        sc.prior_location = 0.3;
        sc.prior_scale = 0.5;
        sc.sigma_delta = 0.3;
        sc.rho = 0.4;
        sc.observation = ObservationModel::LogitNormal;
        sc.logit_sd = 0.2;
        sc.seed = 4000 + static_cast<std::uint64_t>(rep);
        const SimResult sim = simulate_dataset(sc);
        const HoldoutSplit split = holdout_split(sim.data, {});

        ModelSpec spec = window_spec(Level::Subnational, 2000, 2020, 4);
        spec.scope = Scope::SingleCountry;
        spec.correlation = CorrelationMode::FixedGlobal;
        spec.priors = sim.priors;
        spec.sigma_global = sim.sigma_global;
        const ModelInputs in = build_model_inputs(split.train, spec);
        const StateLayout l = StateLayout::of(in);
        if (rep == 0) {
            tracked.push_back({"alpha[1,1,1]", l.alpha(0, 0, 0)});
            tracked.push_back({"alpha[4,2,2]", l.alpha(3, 1, 1)});
            tracked.push_back({"delta[2,1,1,3]", l.off_delta() + l.delta(1, 0, 0, 2)});
            tracked.push_back({"delta[3,2,2,5]", l.off_delta() + l.delta(2, 1, 1, 4)});
        }
        SamplerConfig cfg;
        cfg.n_iter = 25000;
        cfg.n_burnin = 5000;
        cfg.n_thin = 200;
        cfg.seed = 9000 + static_cast<std::uint64_t>(rep);
        const ChainOutput out = run_chains(in, cfg);
        const std::vector<double> truth = sim.truth.flatten(sim.layout);
        for (auto& t : tracked) {
            const std::vector<double> draws = pooled(out, t.column);
            int rank = 0;
            for (double d : draws) rank += d < truth[static_cast<std::size_t>(t.column)];
            t.counts[std::min(bins - 1, rank * bins / static_cast<int>(draws.size() + 1))]++;
        }
        const PredictiveResult pred = predictive_errors(out, in, split.test, 77 + static_cast<std::uint64_t>(rep));
        for (const auto& o : pred.obs) {
            covered += o.lower <= o.y && o.y <= o.upper;
            ++tested;
        }
    }
    const boost::math::chi_squared chi(bins - 1);
    double min_p = 1.0;
    std::string worst;
    for (const auto& t : tracked) {
        double stat = 0;
        const double e = static_cast<double>(reps) / bins;
        for (int k : t.counts) stat += (k - e) * (k - e) / e;
        const double p = boost::math::cdf(boost::math::complement(chi, stat));
        if (p < min_p) {
            min_p = p;
            worst = t.name;
        }
        c.expect(p > 0.01, "rank uniformity of " + t.name + " p = " + fmt(p, 4));
    }
    const double coverage = 100.0 * static_cast<double>(covered) / static_cast<double>(tested);
    c.expect(coverage >= 90.0 && coverage <= 99.0, "coverage " + fmt(coverage, 1) + "%");
    return c.outcome(std::to_string(reps) + " replications, predictive coverage " + fmt(coverage, 1) + "% of " +
                     std::to_string(tested) + " held-out shares, smallest rank chi-square p = " + fmt(min_p, 3) + " (" +
                     worst + ")");
}

// ---- 5

Outcome criterion5() {
    Checks c;
    const SamplerConfig d;
    c.expect(d.n_iter == 80000 && d.n_burnin == 10000 && d.n_thin == 35, "defaults changed");
    c.expect(d.draws_per_chain() == 2000, "draws per chain " + std::to_string(d.draws_per_chain()));
    SamplerConfig run = d;
    run.seed = 505;
    const std::vector<double> x0{0.0};
    auto f = [](const std::vector<double>& x) { return -0.5 * x[0] * x[0]; };
    const auto chains =
        run_engine([&](int, Rng&) { return std::make_unique<ToyTarget>(f, x0, std::vector<std::vector<int>>{{0}}); }, run);
    for (const auto& ch : chains) c.expect(ch.draws.rows() == 2000, "retained " + std::to_string(ch.draws.rows()));
    return c.outcome("(80000 - 10000) / 35 = " + std::to_string(d.draws_per_chain()) + " retained draws per chain, " +
                     std::to_string(chains.size()) + " chains run");
}

// ---- 6

double median_width(const PosteriorSummary& s, const std::string& pop, Method m) {
    std::vector<double> w;
    for (const auto& r : s.rows)
        if (r.population == pop && r.method == m) w.push_back(r.u95 - r.l95);
    return median(w);
}

Outcome criterion6() {
    Checks c;
    SimScenario sc;
    sc.level = Level::Subnational;
    sc.n_countries = 10;
    sc.provinces_per_country = 5;
    sc.n_methods = 3;
    sc.start_year = 2000;
    sc.end_year = 2020;
    sc.nsegments = 4;
    sc.survey_years = {2001, 2003, 2005, 2007, 2009, 2011, 2013, 2015, 2017, 2019};
    sc.sigma_delta = 0.4;
    sc.rho = 0.5;
    sc.sample_size = 5000;
    sc.seed = 606;
    const SimResult sim = simulate_dataset(sc);
    // drop every survey of one method in one province
    const std::string pop = sim.populations[0];
    const Method gap = sim.methods[2];
    CleanDataset data = sim.data;
    std::erase_if(data.rows, [&](const SurveyObservation& r) { return r.country + "/" + r.province == pop && r.method == gap; });

    ModelSpec spec = window_spec(Level::Subnational, 2000, 2020, 4);
    SamplerConfig cfg;
    cfg.n_iter = 30000;
    cfg.n_burnin = 10000;
    cfg.n_thin = 10;
    cfg.seed = 607;
    const TwoStageFit fit = fit_two_stage(data, spec, cfg);
    double worst = 0;
    std::ostringstream rhos;
    for (int s = 0; s < 2; ++s) {
        const Eigen::MatrixXd& r = fit.rho[s].rho;
        for (int i = 0; i < r.rows(); ++i)
            for (int j = i + 1; j < r.cols(); ++j) {
                worst = std::max(worst, std::abs(r(i, j) - 0.5));
                rhos << (rhos.tellp() > 0 ? " " : "") << fmt(r(i, j), 2);
            }
    }
    c.expect(worst <= 0.2, "rho-hat off by " + fmt(worst, 3));

    ModelInputs zero_in = build_model_inputs(data, [&] {
        ModelSpec z = spec;
        z.correlation = CorrelationMode::ZeroCovariance;
        return z;
    }());
    const PosteriorSummary zero = summarize(fit.stage_one.output, zero_in);
    const PosteriorSummary cross = summarize(fit.stage_two, fit.stage_two_inputs);
    const double wz = median_width(zero, pop, gap), wc = median_width(cross, pop, gap);
    c.expect(wc < wz, "cross-method width " + fmt(wc, 4) + " not below zero-covariance " + fmt(wz, 4));
    return c.outcome("50 provinces, rho-hat off-diagonals [" + rhos.str() + "] (max |error| " + fmt(worst, 3) +
                     "); median 95% width for the unobserved series: cross " + fmt(wc, 4) + " vs zero " + fmt(wz, 4));
}

// ---- 7

Outcome criterion7() {
    Checks c;
    SimScenario sc;
    sc.level = Level::Subnational;
    sc.n_countries = 4;
    sc.provinces_per_country = 3;
    sc.n_methods = 3;
    sc.start_year = 2000;
    sc.end_year = 2020;
    sc.nsegments = 4;
    sc.survey_years = {2003, 2008, 2013, 2018};
    sc.rho = 0.3;
    sc.sample_size = 1000;
    sc.seed = 707;
    const SimResult sim = simulate_dataset(sc);
    const ModelSpec spec = window_spec(Level::Subnational, 2000, 2020, 4);
    SamplerConfig cfg;
    cfg.n_iter = 40000;
    cfg.n_burnin = 10000;
    cfg.n_thin = 15;
    cfg.seed = 708;
    const TwoStageFit multi = fit_two_stage(sim.data, spec, cfg);
    const PosteriorSummary multi_summary = summarize(multi.stage_two, multi.stage_two_inputs);
    const InformativePriors priors = extract_priors(multi.stage_two, multi.stage_two_inputs);
    std::array<Eigen::MatrixXd, kLatentSectors> sigma;
    for (int s = 0; s < kLatentSectors; ++s) sigma[s] = sigma_median(multi.stage_two, multi.stage_two_inputs, s);

    std::set<std::string> countries;
    for (const auto& r : sim.data.rows) countries.insert(r.country);
    long inside = 0, cells = 0;
    double worst_country = 1.0;
    for (const auto& country : countries) {
        CleanDataset local = sim.data;
        std::erase_if(local.rows, [&](const SurveyObservation& r) { return r.country != country; });
        local.settings.local = true;
        local.settings.mycountry = country;
        ModelSpec single = spec;
        single.scope = Scope::SingleCountry;
        single.correlation = CorrelationMode::FixedGlobal;
        single.priors = priors;
        single.sigma_global = sigma;
        const ModelInputs in = build_model_inputs(local, single, multi.stage_two_inputs.methods);
        SamplerConfig sc_cfg = cfg;
        sc_cfg.seed = cfg.seed + 1;
        const ChainOutput out = run_chains(in, sc_cfg);
        const AgreementTable t = median_agreement(summarize(out, in), multi_summary, 0.05);
        inside += std::lround(t.overall * static_cast<double>(t.pairs.size()));
        cells += static_cast<long>(t.pairs.size());
        worst_country = std::min(worst_country, t.overall);
    }
    const double fraction = static_cast<double>(inside) / static_cast<double>(cells);
    c.expect(fraction >= 0.9, "only " + fmt(100 * fraction, 1) + "% of cells within 0.05");
    return c.outcome(std::to_string(countries.size()) + " single-country fits, " + fmt(100 * fraction, 1) + "% of " +
                     std::to_string(cells) + " cells within +/-0.05 of the multi-country medians (lowest country " +
                     fmt(100 * worst_country, 1) + "%)");
}

// ---- 8

Outcome criterion8() {
    Checks c;
    const SectorMetrics a = compute_metrics({0.5, 0.5}, {3, 4}, {0, 0}, {1, 1});
    c.expect(a.rmse == std::sqrt(12.5), "rmse of {3,4} is " + std::to_string(a.rmse));
    c.expect(fmt(a.rmse, 4) == "3.5355", "rmse rounds to " + fmt(a.rmse, 4));
    const SectorMetrics b = compute_metrics({0.5, 0.5, 0.5}, {-1, 2, -3}, {0, 0, 0}, {1, 1, 1});
    c.expect(fmt(b.mean_error, 3) == "-0.667", "mean error " + std::to_string(b.mean_error));
    c.expect(b.median_abs_error == 2.0, "median absolute error " + std::to_string(b.median_abs_error));
    const SectorMetrics all = compute_metrics({0.3, 0.6}, {0, 0}, {0.1, 0.5}, {0.4, 0.7});
    c.expect(all.coverage95 == 100.0 && all.prop_above == 0.0 && all.prop_below == 0.0, "all-inside coverage");

    std::vector<PredictiveObservation> obs;
    for (Sector s : {Sector::Public, Sector::CommercialMedical, Sector::Other}) {
        PredictiveObservation o;
        o.population = "X";
        o.sector = s;
        o.y = 0.3;
        o.median = 0.25;
        o.lower = 0.1;
        o.upper = 0.4;
        obs.push_back(o);
    }
    const std::string table = report_table(make_report(obs));
    const std::string header = table.substr(0, table.find('\n'));
    std::size_t pos = 0;
    bool ordered = true;
    for (const char* col : {"Sector", "Coverage", "RMSE", "Above", "Below", "PI width", "Mean error", "Median absolute error"}) {
        const std::size_t at = header.find(col, pos);
        ordered = ordered && at != std::string::npos;
        if (at != std::string::npos) pos = at;
    }
    c.expect(ordered, "table header '" + header + "'");
    const std::string csv_head = report_csv(make_report(obs)).substr(0, report_csv(make_report(obs)).find('\n'));
    c.expect(csv_head == "sector,n,coverage95,rmse,prop_above,prop_below,median_pi_width95,mean_error,median_abs_error",
             "csv header '" + csv_head + "'");
    return c.outcome("RMSE{3,4} = " + fmt(a.rmse, 4) + ", mean error{-1,2,-3} = " + fmt(b.mean_error, 3) +
                     ", MAE = " + fmt(b.median_abs_error, 0) + "; columns: "
                     "Sector, Coverage, RMSE, Above, Below, PI width, Mean error, Median absolute error");
}

// ---- 9

int shell(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

std::string slurp(const fs::path& p) {
    if (!fs::exists(p)) return {};
    return csv::read_text_file(p.string());
}

Outcome criterion9() {
    Checks c;
    const std::string src = SUPPLYSHARE_SOURCE_DIR;
    const std::string bin = SUPPLYSHARE_CLI;
    const fs::path root = fs::temp_directory_path() / ("supplyshare_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    double seconds = 0;
    std::vector<std::string> svg_names;
    for (const char* name : {"a", "b"}) {
        const fs::path run = root / name;
        const auto t0 = std::chrono::steady_clock::now();
        const int ingest = shell(bin + " ingest --subnational --input " + src + "/data/fixture/subnational_survey.csv --out " +
                                 run.string());
        const int fit = shell(bin + " fit --run " + run.string());
        const int plot = shell(bin + " plot --run " + run.string());
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (std::string(name) == "a") seconds = dt;
        c.expect(ingest == 0 && fit == 0 && plot == 0, std::string("pipeline exit codes in run ") + name);
    }
    ::unsetenv("SOURCE_DATE_EPOCH");
    c.expect(seconds < 300.0, "pipeline took " + fmt(seconds, 1) + " s");
    for (const char* f : {"manifest.json", "plots/manifest.json", "estimates.csv"}) {
        const std::string a = slurp(root / "a" / f);
        c.expect(!a.empty() && a == slurp(root / "b" / f), std::string(f) + " differs between reruns");
    }
    const fs::path golden = fs::path(src) / "tests" / "golden" / "fixture";
    const bool update = std::getenv("SUPPLYSHARE_UPDATE_GOLDEN") != nullptr;
    if (update) fs::create_directories(golden);
    int matched = 0, total = 0;
    for (const auto& e : fs::directory_iterator(root / "a" / "plots")) {
        if (e.path().extension() != ".svg") continue;
        ++total;
        if (update) fs::copy_file(e.path(), golden / e.path().filename(), fs::copy_options::overwrite_existing);
        const std::string want = slurp(golden / e.path().filename());
        if (!want.empty() && want == slurp(e.path())) ++matched;
        else c.expect(false, e.path().filename().string() + " differs from the golden file");
    }
    c.expect(total == 4, std::to_string(total) + " figures");
    fs::remove_all(root);
    return c.outcome("ingest -> fit (defaults) -> plot in " + fmt(seconds, 1) + " s; manifests identical on rerun; " +
                     std::to_string(matched) + "/" + std::to_string(total) + " SVGs match golden files");
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"spline/composition algebra", criterion1},
        {"correlation oracle", criterion2},
        {"sampler correctness", criterion3},
        {"simulation-based calibration", criterion4},
        {"retention arithmetic", criterion5},
        {"two-stage correlation pipeline", criterion6},
        {"single-vs-multi agreement", criterion7},
        {"validation-report schema", criterion8},
        {"end-to-end fixture", criterion9},
    };
    const double limits[] = {10, 5, 120, 3600, 60, 1800, 1200, 60, 600};
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k + 1);
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (dt > limits[k]) {
            o.pass = false;
            o.detail += "; runtime " + fmt(dt, 1) + " s exceeds " + fmt(limits[k], 0) + " s";
        }
        failed += !o.pass;
        std::cout << "C" << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[k].first << ": " << o.detail << " ["
                  << fmt(dt, 1) << " s]" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
