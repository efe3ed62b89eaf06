#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace supplyshare {

inline constexpr double kRhatThreshold = 1.05;

/// Rank-normalised split R-hat: the larger of the bulk and folded values.
/// Constant input gives 1.
double split_rhat(const std::vector<Eigen::VectorXd>& chains);

/// Bulk effective sample size of the rank-normalised split chains, truncated
/// at the first negative pair of autocorrelations and capped at the draw count.
double effective_sample_size(const std::vector<Eigen::VectorXd>& chains);

/// Effective sample size of the raw (not rank-normalised) draws, used for
/// Monte Carlo standard errors of means.
double effective_sample_size_raw(const std::vector<Eigen::VectorXd>& chains);

struct DiagnosticRow {
    std::string parameter;
    double rhat = 1.0;
    double ess = 0.0;
    double acceptance = 0.0;  // NaN for derived quantities
};

/// One row per column of the chain matrices. Throws InsufficientChainsError
/// for fewer than two chains.
std::vector<DiagnosticRow> diagnostics(const std::vector<std::string>& names,
                                       const std::vector<Eigen::MatrixXd>& chains,
                                       const std::vector<double>& acceptance);

std::string diagnostics_csv(const std::vector<DiagnosticRow>& rows);

}  // namespace supplyshare
