#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "supplyshare/diagnostics.hpp"
#include "supplyshare/mcmc_engine.hpp"
#include "supplyshare/model_core.hpp"

namespace supplyshare {

/// alpha at the precision-weighted mean of each series' observations (0 and
/// flagged when a series has none) plus N(0, jitter^2); delta = 0; every sigma
/// from Uniform(0.1, 1); parent intercepts at the mean of their children.
ParameterState initial_state(const ModelInputs& in, Rng& rng, std::vector<std::string>* flags = nullptr,
                             double jitter = 0.5);

/// Metropolis-within-Gibbs blocks for every model variant. Log ratios use only
/// the terms touched by a block; observation means are cached.
class HierarchicalTarget final : public BlockTarget {
public:
    HierarchicalTarget(const ModelInputs& in, ParameterState init);

    std::size_t num_blocks() const override { return blocks_.size(); }
    int block_size(std::size_t b) const override;
    double propose(std::size_t b, const double* z, double scale) override;
    void accept(std::size_t b) override;
    void reject(std::size_t b) override;
    void end_sweep(long iteration) override;
    std::size_t num_outputs() const override { return layout_.flat_size(); }
    void write_outputs(double* out) const override;

    const ParameterState& state() const { return state_; }
    const StateLayout& layout() const { return layout_; }
    std::string block_name(std::size_t b) const;
    /// Block owning each flat parameter (the order of `parameter_names`).
    std::vector<std::size_t> parameter_blocks() const;
    /// Log Jacobian included in the last returned ratio (log-scale sigma moves).
    double pending_log_jacobian() const { return pending_jacobian_; }
    /// Recomputes cached observation means and delta cross-products.
    void refresh();

private:
    enum class Kind { Alpha, Delta, Country, Subcon, World, SigmaAlphaP, SigmaAlphaC, SigmaTheta, SigmaDelta };
    struct Block {
        Kind kind;
        int a = 0, b = 0, c = 0;
    };

    double series_loglik_shift(int series, double shift, int h) const;
    double delta_weight(int i, int h) const;
    double& parent_of_alpha(int q, int m, int s, double& sd);
    double sigma_block_ratio(const Block& blk, double old_sigma, double new_sigma) const;
    void update_covariance(int s);

    const ModelInputs& in_;
    StateLayout layout_;
    ParameterState state_;
    std::vector<Block> blocks_;

    std::vector<double> psi_;
    std::vector<std::vector<int>> series_;       // (q * M + m) * 2 + s -> observation indices
    std::vector<Eigen::MatrixXd> cum_basis_;     // per population: T x K cumulative sums of basis rows
    std::vector<std::vector<int>> country_pops_;
    std::vector<std::vector<int>> subcon_children_;  // countries (subnational) or populations (national)
    std::array<SectorCovariance, kLatentSectors> cov_;
    std::array<Eigen::MatrixXd, kLatentSectors> precision_;
    std::array<Eigen::MatrixXd, kLatentSectors> cross_;  // sum over (q, h) of delta delta'

    // Pending proposal.
    std::vector<double> pending_values_;
    double pending_scalar_ = 0.0;
    double pending_jacobian_ = 0.0;
    SectorCovariance pending_cov_;
    Eigen::MatrixXd pending_precision_;
};

struct ChainOutput {
    StateLayout layout;
    std::vector<std::string> names;       // flat parameter names
    std::vector<Eigen::MatrixXd> chains;  // per chain: draws x flat parameters
    std::vector<double> parameter_acceptance;
    std::vector<std::string> block_names;
    std::vector<std::vector<double>> block_acceptance;  // per chain
    std::vector<std::vector<double>> log_scale_after_burnin;
    std::vector<std::vector<double>> log_scale_final;
    std::vector<std::string> init_flags;
    std::vector<std::string> monitor;
    std::vector<DiagnosticRow> diagnostics;
    bool converged = true;
    long draws_per_chain = 0;
    SamplerConfig config;

    std::size_t total_draws() const;
    ParameterState draw(std::size_t chain, long i) const;
};

/// Default monitor list per model variant.
std::vector<std::string> default_monitor(Level level, Scope scope);

/// Scalar columns for the monitored names (the derived grid "P" is summarised
/// separately and contributes no columns here).
struct MonitorTable {
    std::vector<std::string> names;
    std::vector<Eigen::MatrixXd> chains;
    std::vector<double> acceptance;
};
MonitorTable monitored_values(const ChainOutput& out, const ModelInputs& in, const std::vector<std::string>& monitor);

/// Runs the chains (one thread each), then computes diagnostics over the
/// monitored scalars. `converged` is false when some R-hat exceeds 1.05; this
/// is a warning, not an error.
ChainOutput run_chains(const ModelInputs& in, const SamplerConfig& config,
                       const std::vector<std::string>& monitor = {});

std::string draws_csv(const MonitorTable& table, std::size_t chain);

}  // namespace supplyshare
