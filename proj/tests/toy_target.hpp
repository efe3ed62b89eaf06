#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "supplyshare/mcmc_engine.hpp"

namespace supplyshare {

// Random-walk target over a small vector with a user-supplied log density.
class ToyTarget final : public BlockTarget {
public:
    using LogDensity = std::function<double(const std::vector<double>&)>;

    ToyTarget(LogDensity f, std::vector<double> x0, std::vector<std::vector<int>> blocks)
        : f_(std::move(f)), x_(std::move(x0)), blocks_(std::move(blocks)) {
        lp_ = f_(x_);
    }

    std::size_t num_blocks() const override { return blocks_.size(); }
    int block_size(std::size_t b) const override { return static_cast<int>(blocks_[b].size()); }
    double propose(std::size_t b, const double* z, double scale) override {
        saved_ = x_;
        for (std::size_t i = 0; i < blocks_[b].size(); ++i) x_[blocks_[b][i]] += scale * z[i];
        pending_ = f_(x_);
        return pending_ - lp_;
    }
    void accept(std::size_t) override { lp_ = pending_; }
    void reject(std::size_t) override { x_ = saved_; }
    std::size_t num_outputs() const override { return x_.size(); }
    void write_outputs(double* out) const override { std::copy(x_.begin(), x_.end(), out); }

private:
    LogDensity f_;
    std::vector<double> x_, saved_;
    std::vector<std::vector<int>> blocks_;
    double lp_ = 0.0, pending_ = 0.0;
};

}  // namespace supplyshare
