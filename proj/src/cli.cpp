#include "supplyshare/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "supplyshare/correlation.hpp"
#include "supplyshare/csv.hpp"
#include "supplyshare/diagnostics.hpp"
#include "supplyshare/error.hpp"
#include "supplyshare/manifest.hpp"
#include "supplyshare/simulate.hpp"
#include "supplyshare/svg_plot.hpp"
#include "supplyshare/validation.hpp"

namespace fs = std::filesystem;

namespace supplyshare {

namespace {

std::map<std::string, std::string> read_ini_map(const std::string& text, const std::string& what) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(what + ": " + e.what());
    }
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : tree) {
        if (!v.empty()) throw ConfigError(what + ": sections are not used ('" + k + "')");
        out[k] = csv::trim(v.data());
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    const std::string t = csv::lower(v);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

double parse_num(const std::string& key, const std::string& v) {
    auto d = csv::parse_double(v);
    if (!d) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    return *d;
}

std::string join(const std::vector<std::string>& v, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IOError("cannot create directory '" + dir + "'");
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

csv::Table read_required(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw IOError(what + " '" + path + "' does not exist");
    return csv::read_file(path);
}

std::string sector_file(const std::string& stem, int s) { return stem + "_s" + std::to_string(s + 1) + ".csv"; }

std::vector<Method> dataset_methods(const CleanDataset& data) {
    std::set<Method> present;
    for (const auto& r : data.rows) present.insert(r.method);
    return {present.begin(), present.end()};
}

}  // namespace

std::string fit_options_ini(const FitOptions& o) {
    std::ostringstream out;
    out << "level = " << o.level << "\n";
    out << "scope = " << o.scope << "\n";
    out << "start = " << csv::format_double(o.start_year) << "\n";
    out << "end = " << csv::format_double(o.end_year) << "\n";
    out << "segments = " << o.segments << "\n";
    out << "correlations = " << o.correlations << "\n";
    out << "priors = " << o.priors << "\n";
    out << "iter = " << o.iter << "\n";
    out << "burnin = " << o.burnin << "\n";
    out << "thin = " << o.thin << "\n";
    out << "chains = " << o.chains << "\n";
    out << "seed = " << o.seed << "\n";
    out << "monitor = " << join(o.monitor, ",") << "\n";
    return out.str();
}

FitOptions fit_options_from_ini(const std::string& text) {
    FitOptions o;
    for (const auto& [k, v] : read_ini_map(text, "fit configuration")) {
        if (k == "level") {
            o.level = v;
        } else if (k == "scope") {
            o.scope = v;
        } else if (k == "start") {
            o.start_year = parse_num(k, v);
        } else if (k == "end") {
            o.end_year = parse_num(k, v);
        } else if (k == "segments") {
            o.segments = static_cast<int>(parse_num(k, v));
        } else if (k == "correlations") {
            o.correlations = v;
        } else if (k == "priors") {
            o.priors = v;
        } else if (k == "iter") {
            o.iter = static_cast<long>(parse_num(k, v));
        } else if (k == "burnin") {
            o.burnin = static_cast<long>(parse_num(k, v));
        } else if (k == "thin") {
            o.thin = static_cast<long>(parse_num(k, v));
        } else if (k == "chains") {
            o.chains = static_cast<int>(parse_num(k, v));
        } else if (k == "seed") {
            o.seed = static_cast<std::uint64_t>(parse_num(k, v));
        } else if (k == "monitor") {
            o.monitor.clear();
            std::string cur;
            for (char c : v + ",") {
                if (c == ',') {
                    if (!csv::trim(cur).empty()) o.monitor.push_back(csv::trim(cur));
                    cur.clear();
                } else {
                    cur.push_back(c);
                }
            }
        } else {
            throw ConfigError("fit configuration: unknown key '" + k + "'");
        }
    }
    return o;
}

std::string ingest_settings_ini(const IngestSettings& s) {
    std::ostringstream out;
    out << "national = " << (s.national ? "true" : "false") << "\n";
    out << "local = " << (s.local ? "true" : "false") << "\n";
    out << "mycountry = " << s.mycountry.value_or("") << "\n";
    out << "fp2030 = " << (s.fp2030 ? "true" : "false") << "\n";
    out << "source = " << s.source << "\n";
    return out.str();
}

IngestSettings ingest_settings_from_ini(const std::string& text) {
    IngestSettings s;
    for (const auto& [k, v] : read_ini_map(text, "ingest settings")) {
        if (k == "national") {
            s.national = parse_bool(k, v);
        } else if (k == "local") {
            s.local = parse_bool(k, v);
        } else if (k == "mycountry") {
            if (!v.empty()) s.mycountry = v;
        } else if (k == "fp2030") {
            s.fp2030 = parse_bool(k, v);
        } else if (k == "source") {
            s.source = v;
        } else {
            throw ConfigError("ingest settings: unknown key '" + k + "'");
        }
    }
    return s;
}

CleanDataset load_run_dataset(const std::string& run_dir) {
    const std::string data_path = path_in(run_dir, "dataset.csv");
    const std::string settings_path = path_in(run_dir, "settings.ini");
    const std::string geo_path = path_in(run_dir, "geography.csv");
    for (const auto& p : {data_path, settings_path, geo_path}) {
        if (!fs::exists(p)) throw IOError("run directory is missing '" + p + "' (run `supplyshare ingest` first)");
    }
    const IngestSettings settings = ingest_settings_from_ini(csv::read_text_file(settings_path));
    const GeographyIndex geo = GeographyIndex::load(geo_path);
    CleanDataset data = ingest_table(csv::read_file(data_path), settings, geo);
    data.settings = settings;
    return data;
}

FitResult fit_dataset(const CleanDataset& data, const FitOptions& options, std::ostream& log) {
    ModelSpec spec;
    spec.level = options.level.empty() ? (data.settings.national ? Level::National : Level::Subnational)
                                       : parse_level(options.level);
    spec.scope = options.scope.empty() ? (data.settings.local ? Scope::SingleCountry : Scope::MultiCountry)
                                       : parse_scope(options.scope);
    spec.start_year = options.start_year;
    spec.end_year = options.end_year;
    spec.nsegments = options.segments;

    SamplerConfig config;
    config.n_iter = options.iter;
    config.n_burnin = options.burnin;
    config.n_thin = options.thin;
    config.n_chains = options.chains;
    config.seed = options.seed;
    config.validate();

    const std::vector<std::string> monitor =
        options.monitor.empty() ? default_monitor(spec.level, spec.scope) : options.monitor;
    const std::vector<Method> methods = dataset_methods(data);
    if (methods.empty()) throw InsufficientDataError("the dataset has no observations");

    FitResult result;
    if (spec.scope == Scope::SingleCountry) {
        if (options.priors.empty()) throw ConfigError("single-country fits need --priors DIR from a multi-country run");
        const std::string corr_dir = options.correlations.empty() ? options.priors : options.correlations;
        if (corr_dir == "zero" || corr_dir == "fit") {
            throw ConfigError("single-country fits take the global covariance from a directory, not '" + corr_dir + "'");
        }
        spec.priors = InformativePriors::from_csv(
            read_required(path_in(options.priors, "informative_priors.csv"), "informative prior file"));
        spec.correlation = CorrelationMode::FixedGlobal;
        for (int s = 0; s < kLatentSectors; ++s) {
            spec.sigma_global[s] =
                read_matrix_csv(read_required(path_in(corr_dir, sector_file("sigma_global", s)), "covariance file"), methods);
        }
        result.inputs = build_model_inputs(data, spec, methods);
        result.output = run_chains(result.inputs, config, monitor);
    } else {
        const std::string corr = options.correlations.empty() ? "fit" : options.correlations;
        if (corr == "fit") {
            log << "two-stage fit: zero-covariance run, then the cross-method run\n";
            TwoStageFit two = fit_two_stage(data, spec, config, monitor);
            for (int s = 0; s < kLatentSectors; ++s) {
                for (int m : two.rho[s].empty_support) {
                    log << "warning: no supported rates of change for method " << to_string(methods[m]) << " (sector "
                        << s + 1 << "); its correlations are set to 0\n";
                }
            }
            result.inputs = std::move(two.stage_two_inputs);
            result.output = std::move(two.stage_two);
        } else {
            if (corr == "zero") {
                spec.correlation = CorrelationMode::ZeroCovariance;
            } else {
                spec.correlation = CorrelationMode::CrossMethod;
                for (int s = 0; s < kLatentSectors; ++s) {
                    spec.rho[s] = read_matrix_csv(read_required(path_in(corr, sector_file("rho", s)), "correlation file"),
                                                  methods);
                }
            }
            result.inputs = build_model_inputs(data, spec, methods);
            result.output = run_chains(result.inputs, config, monitor);
        }
    }
    for (const auto& w : result.inputs.warnings) log << "warning: " << w << "\n";
    if (result.inputs.clamped > 0) {
        log << "note: " << result.inputs.clamped << " observations were clamped away from 0 or 1\n";
    }
    for (const auto& f : result.output.init_flags) log << "note: " << f << "\n";
    for (int s = 0; s < kLatentSectors; ++s) result.rho[s] = result.inputs.rho[s];
    result.summary = summarize(result.output, result.inputs);
    return result;
}

namespace {

struct Context {
    std::ostream& out;
    std::ostream& err;
};

void write_manifest(const std::string& dir, RunManifest& m, const std::vector<std::string>& outputs) {
    m.add_outputs(dir, outputs);
    csv::write_text_file(path_in(dir, "manifest.json"), m.to_json());
}

// ---- ingest

struct IngestArgs {
    bool national = false;
    bool subnational = false;
    bool local = false;
    std::string country;
    bool fp2030 = true;
    std::string input = "builtin";
    std::string geography = "builtin";
    std::string out;
};

int cmd_ingest(const IngestArgs& a, Context& ctx) {
    IngestSettings s;
    s.national = !a.subnational;
    s.local = a.local;
    if (!a.country.empty()) {
        if (!a.local) ctx.err << "warning: --country has no effect without --local\n";
        s.mycountry = a.country;
    }
    s.fp2030 = a.fp2030;
    s.source = a.input;
    const GeographyIndex geo = GeographyIndex::load(a.geography);
    const CleanDataset data = load_survey_data(s, geo);

    ensure_dir(a.out);
    const std::string settings_text = ingest_settings_ini(data.settings);
    csv::write_text_file(path_in(a.out, "dataset.csv"), to_canonical_csv(data.rows));
    csv::write_text_file(path_in(a.out, "geography.csv"), data.geography.to_csv());
    csv::write_text_file(path_in(a.out, "settings.ini"), settings_text);

    std::set<std::string> pops, countries;
    for (const auto& r : data.rows) {
        pops.insert(population_name(r.country, r.province));
        countries.insert(r.country);
    }
    std::ostringstream report;
    report << "level: " << (s.national ? "national" : "subnational") << "\n";
    report << "rows accepted: " << data.rows.size() << "\n";
    report << "countries: " << countries.size() << "\n";
    report << "populations: " << pops.size() << "\n";
    report << "warnings: " << data.warnings.size() << "\n";
    for (const auto& w : data.warnings) report << "  " << w << "\n";
    csv::write_text_file(path_in(a.out, "ingest_report.txt"), report.str());
    ctx.out << report.str();

    RunManifest m = new_manifest("ingest", settings_text, 0);
    if (a.input != "builtin") m.add_input(fs::path(a.input).filename().string(), a.input);
    if (a.geography != "builtin") m.add_input(fs::path(a.geography).filename().string(), a.geography);
    write_manifest(a.out, m, {"dataset.csv", "geography.csv", "settings.ini", "ingest_report.txt"});
    return kExitOk;
}

// ---- fit

void print_nonconvergence(const ChainOutput& out, std::ostream& os) {
    std::vector<DiagnosticRow> bad;
    for (const auto& d : out.diagnostics) {
        if (d.rhat > kRhatThreshold) bad.push_back(d);
    }
    std::sort(bad.begin(), bad.end(), [](const DiagnosticRow& a, const DiagnosticRow& b) { return a.rhat > b.rhat; });
    os << "warning: " << bad.size() << " monitored parameters have R-hat above " << kRhatThreshold
       << "; consider more iterations\n";
    os << "parameter,rhat,ess\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 20); ++i) {
        os << bad[i].parameter << "," << csv::format_fixed(bad[i].rhat, 4) << "," << csv::format_fixed(bad[i].ess, 1)
           << "\n";
    }
}

int cmd_fit(const std::string& run, std::string out_dir, FitOptions opts, Context& ctx) {
    if (out_dir.empty()) out_dir = run;
    const CleanDataset data = load_run_dataset(run);
    FitResult fit = fit_dataset(data, opts, ctx.out);
    const ModelInputs& in = fit.inputs;
    opts.level = std::string(to_string(in.spec.level));
    opts.scope = std::string(to_string(in.spec.scope));
    if (opts.correlations.empty()) opts.correlations = in.multi() ? "fit" : opts.priors;

    ensure_dir(out_dir);
    std::vector<std::string> outputs;
    auto emit = [&](const std::string& name, const std::string& text) {
        csv::write_text_file(path_in(out_dir, name), text);
        outputs.push_back(name);
    };
    const std::string config_text = fit_options_ini(opts);
    emit("config.ini", config_text);
    if (fs::absolute(out_dir) != fs::absolute(run)) {
        for (const char* f : {"dataset.csv", "geography.csv", "settings.ini"}) {
            fs::copy_file(path_in(run, f), path_in(out_dir, f), fs::copy_options::overwrite_existing);
        }
    }
    const std::vector<std::string> monitor =
        opts.monitor.empty() ? default_monitor(in.spec.level, in.spec.scope) : opts.monitor;
    const MonitorTable table = monitored_values(fit.output, in, monitor);
    for (std::size_t c = 0; c < table.chains.size(); ++c) {
        emit("draws_chain" + std::to_string(c + 1) + ".csv", draws_csv(table, c));
    }
    emit("diagnostics.csv", diagnostics_csv(fit.output.diagnostics));
    emit("estimates.csv", estimates_csv(fit.summary));
    for (int s = 0; s < kLatentSectors; ++s) emit(sector_file("rho", s), matrix_csv(in.methods, fit.rho[s]));
    if (in.multi()) {
        emit("informative_priors.csv", extract_priors(fit.output, in).to_csv());
        for (int s = 0; s < kLatentSectors; ++s) {
            emit(sector_file("sigma_global", s), matrix_csv(in.methods, sigma_median(fit.output, in, s)));
        }
    }

    RunManifest m = new_manifest("fit", config_text, opts.seed);
    m.add_input("dataset.csv", path_in(run, "dataset.csv"));
    if (!in.multi()) {
        m.add_input("informative_priors.csv", path_in(opts.priors, "informative_priors.csv"));
        for (int s = 0; s < kLatentSectors; ++s) {
            m.add_input(sector_file("sigma_global", s), path_in(opts.correlations, sector_file("sigma_global", s)));
        }
    }
    write_manifest(out_dir, m, outputs);

    ctx.out << "model: " << to_string(in.spec.level) << " " << to_string(in.spec.scope) << " ("
            << to_string(in.spec.correlation) << "), " << in.Q() << " populations, " << in.M() << " methods\n";
    ctx.out << "retained draws per chain: " << fit.output.draws_per_chain << "\n";
    if (!fit.output.converged) print_nonconvergence(fit.output, ctx.out);
    ctx.out << "wrote " << outputs.size() << " files to " << out_dir << "\n";
    return kExitOk;
}

// ---- validate

struct ValidateArgs {
    std::vector<std::string> runs;
    std::string out;
    std::string holdout = "last";
    double fraction = 0.2;
    std::uint64_t seed = 1;
    std::optional<long> iter, burnin, thin;
    std::optional<int> chains;
};

ValidationReport validate_run(const std::string& run, const std::string& out_dir, const ValidateArgs& a, Context& ctx) {
    const CleanDataset data = load_run_dataset(run);
    const std::string config_path = path_in(run, "config.ini");
    if (!fs::exists(config_path)) throw IOError("run directory '" + run + "' has no config.ini (run `supplyshare fit` first)");
    FitOptions opts = fit_options_from_ini(csv::read_text_file(config_path));
    if (a.iter) opts.iter = *a.iter;
    if (a.burnin) opts.burnin = *a.burnin;
    if (a.thin) opts.thin = *a.thin;
    if (a.chains) opts.chains = *a.chains;

    HoldoutSpec hs;
    hs.rule = parse_holdout_rule(a.holdout);
    hs.fraction = a.fraction;
    hs.seed = a.seed;
    const HoldoutSplit split = holdout_split(data, hs);
    for (const auto& w : split.warnings) ctx.out << "warning: " << w << "\n";
    FitResult fit = fit_dataset(split.train, opts, ctx.out);
    const PredictiveResult pred = predictive_errors(fit.output, fit.inputs, split.test, a.seed);
    for (const auto& w : pred.warnings) ctx.out << "warning: " << w << "\n";
    if (pred.obs.empty()) throw InsufficientDataError("no test observations could be predicted");
    const ValidationReport report = make_report(pred.obs);

    ensure_dir(out_dir);
    std::ostringstream preds;
    csv::write_row(preds, {"population", "year", "method", "sector", "observed", "median", "l95", "u95", "error"});
    for (const auto& o : pred.obs) {
        csv::write_row(preds, {o.population, csv::format_double(o.year), std::string(to_string(o.method)),
                               std::string(to_string(o.sector)), csv::format_double(o.y), csv::format_double(o.median),
                               csv::format_double(o.lower), csv::format_double(o.upper), csv::format_double(o.error())});
    }
    csv::write_text_file(path_in(out_dir, "predictions.csv"), preds.str());
    csv::write_text_file(path_in(out_dir, "validation_report.csv"), report_csv(report));
    csv::write_text_file(path_in(out_dir, "validation_report.txt"), report_table(report));
    std::ostringstream cfg;
    cfg << fit_options_ini(opts) << "holdout = " << a.holdout << "\nfraction = " << csv::format_double(a.fraction)
        << "\nsplit_seed = " << a.seed << "\n";
    RunManifest m = new_manifest("validate", cfg.str(), opts.seed);
    m.add_input("dataset.csv", path_in(run, "dataset.csv"));
    write_manifest(out_dir, m, {"predictions.csv", "validation_report.csv", "validation_report.txt"});
    ctx.out << "validation of " << run << " (" << pred.obs.size() / 3 << " test compositions)\n"
            << report_table(report);
    return report;
}

int cmd_validate(const ValidateArgs& a, Context& ctx) {
    std::vector<ValidationReport> reports;
    std::vector<std::string> outs;
    for (std::size_t i = 0; i < a.runs.size(); ++i) {
        std::string out = a.out.empty() ? path_in(a.runs[i], "validation")
                                        : (a.runs.size() == 1 ? a.out : path_in(a.out, "run" + std::to_string(i + 1)));
        outs.push_back(out);
        reports.push_back(validate_run(a.runs[i], out, a, ctx));
    }
    if (reports.size() == 2) {
        const ModelComparison cmp = compare_models(reports[0], reports[1]);
        const std::string text = comparison_table(cmp, "A", "B");
        const std::string dir = a.out.empty() ? outs[0] : a.out;
        ensure_dir(dir);
        csv::write_text_file(path_in(dir, "comparison.txt"),
                             "A = " + a.runs[0] + "\nB = " + a.runs[1] + "\n" + text);
        if (!a.out.empty()) {
            RunManifest m = new_manifest("validate", "compare = " + a.runs[0] + "," + a.runs[1], a.seed);
            write_manifest(dir, m, {"comparison.txt"});
        }
        ctx.out << "comparison (A = " << a.runs[0] << ", B = " << a.runs[1] << ")\n" << text;
    }
    return kExitOk;
}

// ---- plot

struct PlotArgs {
    std::string run;
    std::string estimates;
    std::string data;
    std::string out;
    std::string colors;
};

int cmd_plot(const PlotArgs& a, Context& ctx) {
    const std::string est_path = a.estimates.empty() ? path_in(a.run, "estimates.csv") : a.estimates;
    if (!fs::exists(est_path)) throw IOError("estimates file '" + est_path + "' does not exist");
    const PosteriorSummary summary = read_estimates(est_path);
    if (summary.rows.empty()) {
        ctx.out << "no estimates to plot; no files written\n";
        return kExitOk;
    }
    CleanDataset data;
    if (!a.data.empty()) {
        if (!fs::exists(a.data)) throw IOError("dataset '" + a.data + "' does not exist");
        data = load_run_dataset(a.data);
    } else if (!a.run.empty()) {
        data = load_run_dataset(a.run);
    } else {
        throw IOError("plot needs --run DIR or --data DIR for the observations");
    }
    PlotStyle style;
    if (!a.colors.empty()) style.colors = parse_colors(a.colors);
    const auto files = plot_estimates(summary, data, style);
    const std::string out = a.out.empty() ? path_in(a.run.empty() ? "." : a.run, "plots") : a.out;
    ensure_dir(out);
    std::vector<std::string> names;
    for (const auto& [pop, svg] : files) {
        names.push_back(plot_file_name(pop));
        csv::write_text_file(path_in(out, names.back()), svg);
    }
    RunManifest m = new_manifest("plot", "colors = " + join({style.colors.begin(), style.colors.end()}, ","), 0);
    m.add_input("estimates.csv", est_path);
    write_manifest(out, m, names);
    ctx.out << "wrote " << names.size() << " figures to " << out << "\n";
    return kExitOk;
}

// ---- simulate

int cmd_simulate(const std::string& scenario_path, std::optional<std::uint64_t> seed, const std::string& out,
                 Context& ctx) {
    SimScenario sc;
    if (!scenario_path.empty()) {
        if (!fs::exists(scenario_path)) throw ConfigError("scenario file '" + scenario_path + "' does not exist");
        sc = scenario_from_ini(csv::read_text_file(scenario_path));
    }
    if (seed) sc.seed = *seed;
    const SimResult res = simulate_dataset(sc);
    ensure_dir(out);
    std::vector<std::string> names{"survey.csv", "truth.csv", "scenario.ini"};
    const std::string scenario_text = scenario_to_ini(sc);
    csv::write_text_file(path_in(out, "survey.csv"), res.survey_csv);
    csv::write_text_file(path_in(out, "truth.csv"), truth_csv(res.truth_phi));
    csv::write_text_file(path_in(out, "scenario.ini"), scenario_text);
    if (!res.priors.entries.empty()) {
        names.push_back("informative_priors.csv");
        csv::write_text_file(path_in(out, "informative_priors.csv"), res.priors.to_csv());
        for (int s = 0; s < kLatentSectors; ++s) {
            names.push_back(sector_file("sigma_global", s));
            csv::write_text_file(path_in(out, names.back()), matrix_csv(res.methods, res.sigma_global[s]));
        }
    }
    RunManifest m = new_manifest("simulate", scenario_text, sc.seed);
    write_manifest(out, m, names);
    ctx.out << "simulated " << res.data.rows.size() << " survey rows for " << res.populations.size()
            << " populations into " << out << "\n";
    return kExitOk;
}

enum class Command { None, Ingest, Fit, Validate, Plot, Simulate };

int exit_code(const Error& e, Command cmd) {
    const std::string& k = e.kind();
    if (k == "NumericalError" || k == "SPDError") return kExitNumerical;
    if (k == "InsufficientDataError" || k == "InsufficientChainsError") return kExitInsufficientData;
    if (cmd == Command::Plot && k == "IOError") return kExitPlotInputs;
    if (k == "SchemaError" || k == "RangeError" || k == "UnknownCountryError" || k == "DegenerateCompositionError") {
        return kExitIngest;
    }
    if (cmd == Command::Ingest && k == "IOError") return kExitIngest;
    return kExitConfig;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Three-sector contraceptive supply share estimation"};
    app.require_subcommand(1);
    Context ctx{out, err};
    Command cmd = Command::None;

    IngestArgs ia;
    auto* ingest = app.add_subcommand("ingest", "Check and store a survey dataset in a run directory");
    auto* nat = ingest->add_flag("--national", ia.national, "Country-level observations (default)");
    ingest->add_flag("--subnational", ia.subnational, "Province-level observations")->excludes(nat);
    ingest->add_flag("--local", ia.local, "Keep a single country (with --country)");
    ingest->add_option("--country", ia.country, "Country kept by --local");
    ingest->add_option("--fp2030", ia.fp2030, "Restrict to FP2030 countries (true/false)")->capture_default_str();
    ingest->add_option("--input", ia.input, "Survey CSV, or 'builtin' for the bundled fixture")->capture_default_str();
    ingest->add_option("--geography", ia.geography, "Geography CSV, or 'builtin'")->capture_default_str();
    ingest->add_option("--out", ia.out, "Run directory")->required();

    std::string fit_run, fit_out;
    FitOptions fo;
    auto* fit = app.add_subcommand("fit", "Fit a model to an ingested dataset");
    fit->set_config("--config", "", "Key-value file with fit options");
    fit->add_option("--run", fit_run, "Run directory from `ingest`")->required();
    fit->add_option("--out", fit_out, "Output directory (default: the run directory)");
    fit->add_option("--level", fo.level, "national or subnational (default: from the dataset)");
    fit->add_option("--scope", fo.scope, "multi or single (default: single for local datasets)");
    fit->add_option("--start", fo.start_year, "First year of the basis window")->capture_default_str();
    fit->add_option("--end", fo.end_year, "Last year of the basis window")->capture_default_str();
    fit->add_option("--segments", fo.segments, "Spline segments")->capture_default_str();
    fit->add_option("--correlations", fo.correlations, "zero, fit, or a directory with rho_s1.csv and rho_s2.csv");
    fit->add_option("--priors", fo.priors, "Directory with informative_priors.csv and sigma_global_s*.csv");
    fit->add_option("--iter", fo.iter, "Iterations per chain")->capture_default_str();
    fit->add_option("--burnin", fo.burnin, "Burn-in iterations")->capture_default_str();
    fit->add_option("--thin", fo.thin, "Thinning interval")->capture_default_str();
    fit->add_option("--chains", fo.chains, "Number of chains")->capture_default_str();
    fit->add_option("--seed", fo.seed, "Random seed")->envname("SUPPLYSHARE_SEED")->capture_default_str();
    fit->add_option("--monitor", fo.monitor, "Comma-separated monitored parameters")->delimiter(',');

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "Out-of-sample validation of fitted runs");
    validate->add_option("--run", va.runs, "Fitted run directory; give two to compare models")->required()->expected(1, 2);
    validate->add_option("--out", va.out, "Output directory (default: RUN/validation)");
    validate->add_option("--holdout", va.holdout, "last or random")->capture_default_str();
    validate->add_option("--fraction", va.fraction, "Test fraction for --holdout random")->capture_default_str();
    validate->add_option("--seed", va.seed, "Split and predictive seed")->capture_default_str();
    validate->add_option("--iter", va.iter, "Override iterations");
    validate->add_option("--burnin", va.burnin, "Override burn-in");
    validate->add_option("--thin", va.thin, "Override thinning");
    validate->add_option("--chains", va.chains, "Override chains");

    PlotArgs pa;
    auto* plot = app.add_subcommand("plot", "One SVG figure per population");
    plot->add_option("--run", pa.run, "Fitted run directory");
    plot->add_option("--estimates", pa.estimates, "Estimates CSV (default: RUN/estimates.csv)");
    plot->add_option("--data", pa.data, "Run directory holding the observations (default: RUN)");
    plot->add_option("--out", pa.out, "Figure directory (default: RUN/plots)");
    plot->add_option("--colors", pa.colors, "Public,Commercial_medical,Other colors");

    std::string scenario, sim_out;
    std::optional<std::uint64_t> sim_seed;
    auto* simulate = app.add_subcommand("simulate", "Synthetic dataset from the generative model");
    simulate->add_option("--scenario", scenario, "Scenario key-value file");
    simulate->add_option("--seed", sim_seed, "Random seed (overrides the scenario)")->envname("SUPPLYSHARE_SEED");
    simulate->add_option("--out", sim_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*ingest) {
            cmd = Command::Ingest;
            return cmd_ingest(ia, ctx);
        }
        if (*fit) {
            cmd = Command::Fit;
            return cmd_fit(fit_run, fit_out, fo, ctx);
        }
        if (*validate) {
            cmd = Command::Validate;
            return cmd_validate(va, ctx);
        }
        if (*plot) {
            cmd = Command::Plot;
            if (pa.run.empty() && pa.estimates.empty()) throw IOError("plot needs --run DIR or --estimates PATH");
            return cmd_plot(pa, ctx);
        }
        if (*simulate) {
            cmd = Command::Simulate;
            return cmd_simulate(scenario, sim_seed, sim_out, ctx);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e, cmd);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}

}  // namespace supplyshare
