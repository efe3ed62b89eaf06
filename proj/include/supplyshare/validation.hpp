#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "supplyshare/data_model.hpp"
#include "supplyshare/model_core.hpp"
#include "supplyshare/posterior_summary.hpp"
#include "supplyshare/sampler.hpp"

namespace supplyshare {

enum class HoldoutRule { LeaveLastSurvey, RandomFraction };

struct HoldoutSpec {
    HoldoutRule rule = HoldoutRule::LeaveLastSurvey;
    double fraction = 0.2;  // RandomFraction
    std::uint64_t seed = 1;
};

HoldoutRule parse_holdout_rule(std::string_view token);

struct HoldoutSplit {
    CleanDataset train;
    CleanDataset test;
    std::vector<std::string> warnings;
};

/// Splits by survey unit (population, year). Every population keeps at least
/// one training survey; a population with a single survey stays in training
/// with a warning. Throws InsufficientDataError when the test set is empty.
HoldoutSplit holdout_split(const CleanDataset& data, const HoldoutSpec& spec);

/// One held-out proportion with its posterior predictive summary.
struct PredictiveObservation {
    std::string population;
    double year = 0.0;
    Method method = Method::FemaleSterilization;
    Sector sector = Sector::Public;
    double y = 0.0;
    double median = 0.0;
    double lower = 0.0;  // 95% predictive interval
    double upper = 0.0;
    double error() const { return y - median; }
};

struct PredictiveResult {
    std::vector<PredictiveObservation> obs;
    std::vector<std::string> warnings;
};

/// Predictive draws add N(0, var) noise to each latent logit before composing
/// the three shares, so intervals are prediction intervals for the observed
/// proportions.
PredictiveResult predictive_errors(const ChainOutput& out, const ModelInputs& in, const CleanDataset& test,
                                   std::uint64_t seed = 1);

struct SectorMetrics {
    Sector sector = Sector::Public;
    int n = 0;
    double coverage95 = 0.0;  // percent
    double rmse = 0.0;
    double prop_above = 0.0;  // percent
    double prop_below = 0.0;  // percent
    double median_pi_width95 = 0.0;
    double mean_error = 0.0;
    double median_abs_error = 0.0;
};

/// Metrics in the units of the inputs; the coverage columns are percentages.
SectorMetrics compute_metrics(const std::vector<double>& y, const std::vector<double>& errors,
                              const std::vector<double>& lower, const std::vector<double>& upper);

struct ValidationReport {
    std::array<SectorMetrics, 3> sectors;
    std::vector<std::string> test_keys;  // identifies the test set
};

/// Report in percentage points.
ValidationReport make_report(const std::vector<PredictiveObservation>& obs);

std::string report_csv(const ValidationReport& report);
std::string report_table(const ValidationReport& report);
ValidationReport read_report_csv(const csv::Table& table);

struct ComparisonRow {
    Sector sector = Sector::Public;
    SectorMetrics a;
    SectorMetrics b;
    SectorMetrics delta;  // a - b
};

struct ModelComparison {
    std::array<ComparisonRow, 3> rows;
};

/// Throws TestSetMismatchError when the reports were computed on different test sets.
ModelComparison compare_models(const ValidationReport& a, const ValidationReport& b);
std::string comparison_table(const ModelComparison& cmp, const std::string& label_a, const std::string& label_b);

struct MedianPair {
    std::string population;
    double year = 0.0;
    Method method = Method::FemaleSterilization;
    Sector sector = Sector::Public;
    double single = 0.0;
    double multi = 0.0;
};

struct AgreementTable {
    double band = 0.05;
    std::map<Method, double> fraction;  // per method
    double overall = 0.0;
    std::vector<MedianPair> pairs;
};

/// Every (population, year, method, sector) of the single fit must be present
/// in the multi fit, and the multi fit restricted to those populations must
/// have no extra cells; otherwise GridMismatchError.
AgreementTable median_agreement(const PosteriorSummary& single, const PosteriorSummary& multi, double band = 0.05);
std::string agreement_csv(const AgreementTable& table);
std::string agreement_pairs_csv(const AgreementTable& table);

}  // namespace supplyshare
