#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "supplyshare/data_model.hpp"
#include "supplyshare/model_core.hpp"
#include "supplyshare/posterior_summary.hpp"
#include "supplyshare/sampler.hpp"

namespace supplyshare {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitIngest = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitInsufficientData = 4;
inline constexpr int kExitPlotInputs = 5;

/// Model and sampler settings of one fit, persisted as config.ini in the run directory.
struct FitOptions {
    std::string level;         // empty: from the dataset's national flag
    std::string scope;         // empty: single when the dataset is local, else multi
    double start_year = 1990.0;
    double end_year = 2025.5;
    int segments = 12;
    std::string correlations;  // zero | fit | DIR; empty: fit (multi) or the priors directory (single)
    std::string priors;        // DIR holding informative_priors.csv (single)
    long iter = 80000;
    long burnin = 10000;
    long thin = 35;
    int chains = 2;
    std::uint64_t seed = 1;
    std::vector<std::string> monitor;  // empty: default for the variant
};

std::string fit_options_ini(const FitOptions& options);
FitOptions fit_options_from_ini(const std::string& text);

std::string ingest_settings_ini(const IngestSettings& settings);
IngestSettings ingest_settings_from_ini(const std::string& text);

/// Dataset of an ingest run directory (dataset.csv, geography.csv, settings.ini).
CleanDataset load_run_dataset(const std::string& run_dir);

struct FitResult {
    ModelInputs inputs;
    ChainOutput output;
    PosteriorSummary summary;
    std::array<Eigen::MatrixXd, kLatentSectors> rho;  // correlation used by the final model
};

/// Resolves the model variant from `options` and runs it; "fit" correlations
/// run the two-stage procedure.
FitResult fit_dataset(const CleanDataset& data, const FitOptions& options, std::ostream& log);

/// Entry point of the `supplyshare` binary.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace supplyshare
