#include "supplyshare/mcmc_engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "supplyshare/error.hpp"

namespace supplyshare {

namespace {

constexpr double kInitialLogScale = -1.2;  // exp(-1.2) ~ 0.3
constexpr double kMinLogScale = -14.0;
constexpr double kMaxLogScale = 4.0;

}  // namespace

void SamplerConfig::validate() const {
    if (n_iter <= 0 || n_burnin < 0 || n_thin <= 0) {
        throw ConfigError("iterations and thinning must be positive and burn-in non-negative");
    }
    if (n_iter <= n_burnin) throw ConfigError("n_iter must exceed n_burnin");
    if ((n_iter - n_burnin) % n_thin != 0) {
        throw ConfigError("(n_iter - n_burnin) / n_thin = (" + std::to_string(n_iter) + " - " + std::to_string(n_burnin) +
                          ") / " + std::to_string(n_thin) + " is not an integer");
    }
    if (n_chains < 1) throw ConfigError("n_chains must be at least 1");
    if (adapt_window < 1) throw ConfigError("adaptation window must be at least 1");
    if (!(target_scalar > 0.0 && target_scalar < 1.0) || !(target_block > 0.0 && target_block < 1.0)) {
        throw ConfigError("target acceptance rates must lie in (0, 1)");
    }
}

Rng make_rng(std::uint64_t seed, int chain) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chain), 0x5u};
    return Rng(seq);
}

ChainDraws run_chain(BlockTarget& target, const SamplerConfig& config, Rng& rng) {
    config.validate();
    const std::size_t B = target.num_blocks();
    const std::size_t n_out = target.num_outputs();
    const long keep = config.draws_per_chain();

    ChainDraws out;
    out.draws.resize(keep, static_cast<Eigen::Index>(n_out));
    std::vector<double> log_scale(B, kInitialLogScale);
    std::vector<double> target_rate(B);
    int max_size = 1;
    for (std::size_t b = 0; b < B; ++b) {
        const int size = target.block_size(b);
        max_size = std::max(max_size, size);
        target_rate[b] = size == 1 ? config.target_scalar : config.target_block;
    }
    std::vector<long> window_accepts(B, 0), burn_accepts(B, 0), post_accepts(B, 0);
    std::vector<double> z(static_cast<std::size_t>(max_size));
    std::vector<double> row(n_out);

    boost::random::normal_distribution<double> normal(0.0, 1.0);
    boost::random::uniform_01<double> unif;
    long batch = 0;
    long kept = 0;

    for (long it = 1; it <= config.n_iter; ++it) {
        const bool burning = it <= config.n_burnin;
        for (std::size_t b = 0; b < B; ++b) {
            const int size = target.block_size(b);
            for (int i = 0; i < size; ++i) z[i] = normal(rng);
            const double log_ratio = target.propose(b, z.data(), std::exp(log_scale[b]));
            if (std::isnan(log_ratio)) {
                target.reject(b);
                throw NumericalError("log posterior ratio is NaN (block " + std::to_string(b) + ", iteration " +
                                     std::to_string(it) + ")");
            }
            const bool ok = log_ratio >= 0.0 || std::log(unif(rng)) < log_ratio;
            if (ok) {
                target.accept(b);
                if (burning) {
                    ++window_accepts[b];
                    ++burn_accepts[b];
                } else {
                    ++post_accepts[b];
                }
            } else {
                target.reject(b);
            }
        }
        target.end_sweep(it);

        if (burning && it % config.adapt_window == 0) {
            ++batch;
            const double step = 1.0 / std::sqrt(static_cast<double>(batch));
            for (std::size_t b = 0; b < B; ++b) {
                const double rate = static_cast<double>(window_accepts[b]) / config.adapt_window;
                log_scale[b] = std::clamp(log_scale[b] + step * (rate - target_rate[b]), kMinLogScale, kMaxLogScale);
                window_accepts[b] = 0;
            }
        }
        if (it == config.n_burnin) out.log_scale_after_burnin = log_scale;
        if (!burning && (it - config.n_burnin) % config.n_thin == 0) {
            target.write_outputs(row.data());
            for (std::size_t j = 0; j < n_out; ++j) out.draws(kept, static_cast<Eigen::Index>(j)) = row[j];
            ++kept;
        }
    }
    if (config.n_burnin == 0) out.log_scale_after_burnin = std::vector<double>(B, kInitialLogScale);
    out.log_scale_final = log_scale;
    out.acceptance.resize(B);
    out.burnin_acceptance.resize(B);
    for (std::size_t b = 0; b < B; ++b) {
        out.acceptance[b] = static_cast<double>(post_accepts[b]) / static_cast<double>(config.n_iter - config.n_burnin);
        out.burnin_acceptance[b] =
            config.n_burnin > 0 ? static_cast<double>(burn_accepts[b]) / static_cast<double>(config.n_burnin) : 0.0;
    }
    return out;
}

std::vector<ChainDraws> run_engine(const TargetFactory& factory, const SamplerConfig& config) {
    config.validate();
    std::vector<ChainDraws> chains(static_cast<std::size_t>(config.n_chains));
    std::vector<std::exception_ptr> errors(chains.size());
    auto work = [&](int c) {
        try {
            Rng rng = make_rng(config.seed, c);
            auto target = factory(c, rng);
            chains[static_cast<std::size_t>(c)] = run_chain(*target, config, rng);
        } catch (...) {
            errors[static_cast<std::size_t>(c)] = std::current_exception();
        }
    };
    if (config.n_chains == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (int c = 0; c < config.n_chains; ++c) threads.emplace_back(work, c);
        for (auto& t : threads) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return chains;
}

}  // namespace supplyshare
