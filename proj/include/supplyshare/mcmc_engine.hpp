#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace supplyshare {

struct SamplerConfig {
    long n_iter = 80000;
    long n_burnin = 10000;
    long n_thin = 35;
    int n_chains = 2;
    std::uint64_t seed = 1;
    double target_scalar = 0.44;
    double target_block = 0.234;
    int adapt_window = 50;

    /// Throws ConfigError unless (n_iter - n_burnin) / n_thin is a positive integer.
    void validate() const;
    long draws_per_chain() const { return (n_iter - n_burnin) / n_thin; }
};

using Rng = std::mt19937_64;

/// Per-chain generator stream keyed by (seed, chain id).
Rng make_rng(std::uint64_t seed, int chain);

/// A density split into update blocks. `propose` moves block b by
/// scale * P z for the target's own preconditioner P, keeps the move pending
/// and returns the log acceptance ratio; `accept` or `reject` resolves it.
class BlockTarget {
public:
    virtual ~BlockTarget() = default;

    virtual std::size_t num_blocks() const = 0;
    virtual int block_size(std::size_t b) const = 0;
    virtual double propose(std::size_t b, const double* z, double scale) = 0;
    virtual void accept(std::size_t b) = 0;
    virtual void reject(std::size_t b) = 0;

    /// Called once after every sweep (cache refresh and the like).
    virtual void end_sweep(long /*iteration*/) {}

    virtual std::size_t num_outputs() const = 0;
    virtual void write_outputs(double* out) const = 0;
};

using TargetFactory = std::function<std::unique_ptr<BlockTarget>(int chain, Rng& rng)>;

struct ChainDraws {
    Eigen::MatrixXd draws;                    // retained draws x outputs
    std::vector<double> acceptance;          // post burn-in acceptance rate per block
    std::vector<double> burnin_acceptance;   // acceptance rate during burn-in
    std::vector<double> log_scale_after_burnin;
    std::vector<double> log_scale_final;
};

/// Runs config.n_chains chains on separate threads. Throws NumericalError when
/// a proposal yields a NaN log ratio.
std::vector<ChainDraws> run_engine(const TargetFactory& factory, const SamplerConfig& config);

/// Single chain, on the calling thread.
ChainDraws run_chain(BlockTarget& target, const SamplerConfig& config, Rng& rng);

}  // namespace supplyshare
