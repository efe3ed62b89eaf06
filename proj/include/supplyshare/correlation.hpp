#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "supplyshare/model_core.hpp"
#include "supplyshare/sampler.hpp"

namespace supplyshare {

/// Posterior medians of delta from a zero-covariance run plus the
/// data-support mask. Layout of `median` follows StateLayout::delta.
struct DeltaMedians {
    int Q = 0, M = 0, H = 0;
    std::vector<double> median;
    std::vector<std::vector<bool>> mask;   // [q][h]
    std::vector<int> population_country;  // q -> country group for ByCountry pooling
    std::vector<double> sigma_delta;       // posterior medians, m * 2 + s (empty when not sampled)

    double at(int q, int m, int s, int h) const { return median[static_cast<std::size_t>(((q * kLatentSectors + s) * H + h) * M + m)]; }
};

/// Medians and mask from any fitted run.
DeltaMedians delta_medians(const ChainOutput& out, const ModelInputs& in);

struct ZeroCovarianceFit {
    ChainOutput output;
    DeltaMedians medians;
};
ZeroCovarianceFit fit_zero_covariance(const ModelInputs& in, const SamplerConfig& config,
                                      const std::vector<std::string>& monitor = {});

enum class Pooling { ByCountry, ByProvince };

struct RhoEstimate {
    Eigen::MatrixXd rho;
    std::vector<int> empty_support;  // methods whose masked medians are all zero
};

/// Through-origin correlation of masked medians. Methods with no support get an
/// identity row and column and are listed in `empty_support`.
RhoEstimate rho_hat(const DeltaMedians& medians, int sector, Pooling pooling);

/// Sigma[i, j] = rho[i, j] sigma[i] sigma[j], factored with the jitter rule.
SectorCovariance assemble_sigma(const Eigen::MatrixXd& rho, const Eigen::VectorXd& sigma);

/// Elementwise posterior median of Sigma_delta for sector s.
Eigen::MatrixXd sigma_median(const ChainOutput& out, const ModelInputs& in, int sector);

/// Parent-level medians for single-country fits: subcontinent intercepts and
/// the cross-country SD (national), or country intercepts and the
/// cross-province SD (subnational).
InformativePriors extract_priors(const ChainOutput& out, const ModelInputs& in);

std::string matrix_csv(const std::vector<Method>& methods, const Eigen::MatrixXd& m);
/// Reads a method-labelled square matrix and reorders it to `methods`.
Eigen::MatrixXd read_matrix_csv(const csv::Table& table, const std::vector<Method>& methods);

struct TwoStageFit {
    ZeroCovarianceFit stage_one;
    std::array<RhoEstimate, kLatentSectors> rho;
    ModelInputs stage_two_inputs;
    ChainOutput stage_two;
};

/// Zero-covariance run, rho-hat per sector, then the cross-method run.
TwoStageFit fit_two_stage(const CleanDataset& data, ModelSpec spec, const SamplerConfig& config,
                          const std::vector<std::string>& monitor = {});

}  // namespace supplyshare
