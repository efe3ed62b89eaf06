#include "supplyshare/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <unsupported/Eigen/FFT>

#include "supplyshare/csv.hpp"
#include "supplyshare/error.hpp"

namespace supplyshare {

namespace {

using Chains = std::vector<Eigen::VectorXd>;

Chains split(const Chains& chains) {
    Chains out;
    for (const auto& c : chains) {
        const Eigen::Index half = c.size() / 2;
        if (half < 1) {
            out.push_back(c);
            continue;
        }
        out.push_back(c.head(half));
        out.push_back(c.tail(half));
    }
    return out;
}

bool all_constant(const Chains& chains) {
    const double first = chains.front()[0];
    for (const auto& c : chains) {
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            if (c[i] != first) return false;
        }
    }
    return true;
}

Chains rank_normalize(const Chains& chains) {
    std::vector<std::pair<double, std::size_t>> pooled;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (Eigen::Index i = 0; i < chains[c].size(); ++i) pooled.emplace_back(chains[c][i], pooled.size());
    }
    const std::size_t S = pooled.size();
    std::vector<std::size_t> order(S);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a].first < pooled[b].first; });
    std::vector<double> rank(S);
    for (std::size_t i = 0; i < S;) {
        std::size_t j = i;
        while (j + 1 < S && pooled[order[j + 1]].first == pooled[order[i]].first) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    const boost::math::normal_distribution<double> normal;
    Chains out;
    std::size_t pos = 0;
    for (const auto& c : chains) {
        Eigen::VectorXd z(c.size());
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            const double p = (rank[pos++] - 0.375) / (static_cast<double>(S) + 0.25);
            z[i] = boost::math::quantile(normal, p);
        }
        out.push_back(std::move(z));
    }
    return out;
}

double rhat_classic(const Chains& chains) {
    const double m = static_cast<double>(chains.size());
    const double n = static_cast<double>(chains.front().size());
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd means(chains.size());
    double W = 0.0;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        means[static_cast<Eigen::Index>(c)] = chains[c].mean();
        W += (chains[c].array() - chains[c].mean()).square().sum() / (n - 1.0);
    }
    W /= m;
    const double B_over_n = m > 1 ? (means.array() - means.mean()).square().sum() / (m - 1.0) : 0.0;
    if (W <= 0.0) return B_over_n > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    const double var_plus = (n - 1.0) / n * W + B_over_n;
    return std::sqrt(var_plus / W);
}

Eigen::VectorXd autocovariance(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    Eigen::FFT<double> fft;
    std::vector<double> padded(static_cast<std::size_t>(2 * n), 0.0);
    const double mean = x.mean();
    for (Eigen::Index i = 0; i < n; ++i) padded[static_cast<std::size_t>(i)] = x[i] - mean;
    std::vector<std::complex<double>> freq;
    fft.fwd(freq, padded);
    for (auto& f : freq) f = std::complex<double>(std::norm(f), 0.0);
    std::vector<double> back;
    fft.inv(back, freq);
    Eigen::VectorXd acov(n);
    for (Eigen::Index t = 0; t < n; ++t) acov[t] = back[static_cast<std::size_t>(t)] / static_cast<double>(n);
    return acov;
}

double ess_of(const Chains& chains) {
    const std::size_t m = chains.size();
    const Eigen::Index n = chains.front().size();
    const double total = static_cast<double>(m) * static_cast<double>(n);
    if (n < 4) return total;
    if (all_constant(chains)) return total;

    std::vector<Eigen::VectorXd> acov;
    Eigen::VectorXd means(static_cast<Eigen::Index>(m)), vars(static_cast<Eigen::Index>(m));
    for (std::size_t c = 0; c < m; ++c) {
        acov.push_back(autocovariance(chains[c]));
        means[static_cast<Eigen::Index>(c)] = chains[c].mean();
        vars[static_cast<Eigen::Index>(c)] = acov.back()[0] * static_cast<double>(n) / static_cast<double>(n - 1);
    }
    const double mean_var = vars.mean();
    double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
    if (m > 1) var_plus += (means.array() - means.mean()).square().sum() / static_cast<double>(m - 1);
    if (!(var_plus > 0.0)) return total;

    auto rho = [&](Eigen::Index t) {
        double s = 0.0;
        for (const auto& a : acov) s += a[t];
        s /= static_cast<double>(m);
        return 1.0 - (mean_var - s) / var_plus;
    };

    double sum = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    Eigen::Index t = 0;
    while (t + 1 < n) {
        double pair = (t == 0 ? 1.0 : rho(t)) + rho(t + 1);
        if (pair < 0.0) break;
        pair = std::min(pair, prev_pair);
        sum += pair;
        prev_pair = pair;
        t += 2;
    }
    const double tau = -1.0 + 2.0 * sum;
    if (!(tau > 0.0)) return total;
    return std::min(total, total / tau);
}

}  // namespace

double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
    if (chains.empty() || chains.front().size() == 0) return std::numeric_limits<double>::quiet_NaN();
    if (all_constant(chains)) return 1.0;
    const Chains s = split(chains);
    const double bulk = rhat_classic(rank_normalize(s));

    std::vector<double> pooled;
    for (const auto& c : s) pooled.insert(pooled.end(), c.data(), c.data() + c.size());
    std::nth_element(pooled.begin(), pooled.begin() + static_cast<long>(pooled.size() / 2), pooled.end());
    const double med = pooled[pooled.size() / 2];
    Chains folded;
    for (const auto& c : s) folded.push_back((c.array() - med).abs().matrix());
    const double tail = all_constant(folded) ? 1.0 : rhat_classic(rank_normalize(folded));
    return std::max(bulk, tail);
}

double effective_sample_size(const std::vector<Eigen::VectorXd>& chains) {
    if (chains.empty() || chains.front().size() == 0) return 0.0;
    if (all_constant(chains)) {
        double total = 0.0;
        for (const auto& c : chains) total += static_cast<double>(c.size());
        return total;
    }
    return ess_of(rank_normalize(split(chains)));
}

double effective_sample_size_raw(const std::vector<Eigen::VectorXd>& chains) {
    if (chains.empty() || chains.front().size() == 0) return 0.0;
    return ess_of(split(chains));
}

std::vector<DiagnosticRow> diagnostics(const std::vector<std::string>& names, const std::vector<Eigen::MatrixXd>& chains,
                                       const std::vector<double>& acceptance) {
    if (chains.size() < 2) {
        throw InsufficientChainsError("convergence diagnostics need at least 2 chains, got " +
                                      std::to_string(chains.size()));
    }
    std::vector<DiagnosticRow> rows;
    for (std::size_t j = 0; j < names.size(); ++j) {
        std::vector<Eigen::VectorXd> cols;
        for (const auto& c : chains) cols.push_back(c.col(static_cast<Eigen::Index>(j)));
        DiagnosticRow r;
        r.parameter = names[j];
        r.rhat = split_rhat(cols);
        r.ess = effective_sample_size(cols);
        r.acceptance = j < acceptance.size() ? acceptance[j] : std::numeric_limits<double>::quiet_NaN();
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string diagnostics_csv(const std::vector<DiagnosticRow>& rows) {
    std::ostringstream out;
    csv::write_row(out, {"parameter", "rhat", "ess", "acceptance"});
    for (const auto& r : rows) {
        csv::write_row(out, {r.parameter, csv::format_fixed(r.rhat, 4), csv::format_fixed(r.ess, 1),
                             csv::format_fixed(r.acceptance, 3)});
    }
    return out.str();
}

}  // namespace supplyshare
