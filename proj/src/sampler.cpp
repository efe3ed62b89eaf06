#include "supplyshare/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "supplyshare/csv.hpp"
#include "supplyshare/error.hpp"

namespace supplyshare {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr long kRefreshEvery = 500;

double sq(double x) { return x * x; }

Eigen::MatrixXd precision_of(const SectorCovariance& cov) {
    const int n = cov.dim();
    Eigen::MatrixXd linv = cov.chol.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
    return linv.transpose() * linv;
}

}  // namespace

ParameterState initial_state(const ModelInputs& in, Rng& rng, std::vector<std::string>* flags, double jitter) {
    const StateLayout l = StateLayout::of(in);
    ParameterState st = ParameterState::zeros(l);
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    boost::random::uniform_real_distribution<double> unif(0.1, 1.0);

    std::vector<double> wsum(st.alpha.size(), 0.0), wy(st.alpha.size(), 0.0);
    for (const auto& o : in.obs) {
        const std::size_t i = static_cast<std::size_t>(l.alpha(o.population, o.method, o.sector));
        wsum[i] += 1.0 / o.var;
        wy[i] += o.y / o.var;
    }
    for (int q = 0; q < l.Q; ++q) {
        for (int m = 0; m < l.M; ++m) {
            for (int s = 0; s < kLatentSectors; ++s) {
                const std::size_t i = static_cast<std::size_t>(l.alpha(q, m, s));
                double centre = 0.0;
                if (wsum[i] > 0.0) {
                    centre = wy[i] / wsum[i];
                } else if (flags) {
                    flags->push_back("no data for " + in.population_name(q) + ", " +
                                     std::string(to_string(in.methods[m])) + ", sector " + std::to_string(s + 1) +
                                     "; alpha initialised at 0");
                }
                st.alpha[i] = centre + jitter * normal(rng);
            }
        }
    }
    if (l.sigma_delta) {
        for (auto& v : st.sigma_delta) v = unif(rng);
    }
    if (l.multi) {
        for (int s = 0; s < kLatentSectors; ++s) {
            st.sigma_alpha_c[s] = unif(rng);
            st.sigma_theta[s] = unif(rng);
            if (l.country_layer()) st.sigma_alpha_p[s] = unif(rng);
        }
        for (int m = 0; m < l.M; ++m) {
            for (int s = 0; s < kLatentSectors; ++s) {
                std::vector<double> country_sum(static_cast<std::size_t>(l.C), 0.0), country_n(static_cast<std::size_t>(l.C), 0.0);
                for (int q = 0; q < l.Q; ++q) {
                    const int c = in.population_country_index[q];
                    country_sum[c] += st.alpha[static_cast<std::size_t>(l.alpha(q, m, s))];
                    country_n[c] += 1.0;
                }
                std::vector<double> sub_sum(static_cast<std::size_t>(l.R), 0.0), sub_n(static_cast<std::size_t>(l.R), 0.0);
                if (l.country_layer()) {
                    for (int c = 0; c < l.C; ++c) {
                        const double v = country_sum[c] / country_n[c];
                        st.alpha_country[static_cast<std::size_t>(l.country(c, m, s))] = v;
                        sub_sum[in.country_subcontinent[c]] += v;
                        sub_n[in.country_subcontinent[c]] += 1.0;
                    }
                } else {
                    for (int q = 0; q < l.Q; ++q) {
                        const int r = in.country_subcontinent[in.population_country_index[q]];
                        sub_sum[r] += st.alpha[static_cast<std::size_t>(l.alpha(q, m, s))];
                        sub_n[r] += 1.0;
                    }
                }
                double world = 0.0;
                for (int r = 0; r < l.R; ++r) {
                    const double v = sub_sum[r] / sub_n[r];
                    st.theta_sub[static_cast<std::size_t>(l.subcon(r, m, s))] = v;
                    world += v;
                }
                st.theta_world[static_cast<std::size_t>(l.world(m, s))] = world / l.R;
            }
        }
    }
    return st;
}

// ---------------------------------------------------------------------------

HierarchicalTarget::HierarchicalTarget(const ModelInputs& in, ParameterState init)
    : in_(in), layout_(StateLayout::of(in)), state_(std::move(init)) {
    const StateLayout& l = layout_;
    if (state_.alpha.size() != static_cast<std::size_t>(l.Q * l.M * kLatentSectors) ||
        state_.delta.size() != static_cast<std::size_t>(l.Q * l.M * kLatentSectors * l.H)) {
        throw ConfigError("initial state does not match the model layout");
    }

    for (int q = 0; q < l.Q; ++q)
        for (int m = 0; m < l.M; ++m)
            for (int s = 0; s < kLatentSectors; ++s) blocks_.push_back({Kind::Alpha, q, m, s});
    for (int q = 0; q < l.Q; ++q)
        for (int s = 0; s < kLatentSectors; ++s)
            for (int h = 0; h < l.H; ++h) blocks_.push_back({Kind::Delta, q, s, h});
    if (l.country_layer()) {
        for (int c = 0; c < l.C; ++c)
            for (int m = 0; m < l.M; ++m)
                for (int s = 0; s < kLatentSectors; ++s) blocks_.push_back({Kind::Country, c, m, s});
    }
    if (l.multi) {
        for (int r = 0; r < l.R; ++r)
            for (int m = 0; m < l.M; ++m)
                for (int s = 0; s < kLatentSectors; ++s) blocks_.push_back({Kind::Subcon, r, m, s});
        for (int m = 0; m < l.M; ++m)
            for (int s = 0; s < kLatentSectors; ++s) blocks_.push_back({Kind::World, m, s, 0});
        if (l.country_layer()) {
            for (int s = 0; s < kLatentSectors; ++s) blocks_.push_back({Kind::SigmaAlphaP, s, 0, 0});
        }
        for (int s = 0; s < kLatentSectors; ++s) blocks_.push_back({Kind::SigmaAlphaC, s, 0, 0});
        for (int s = 0; s < kLatentSectors; ++s) blocks_.push_back({Kind::SigmaTheta, s, 0, 0});
    }
    if (l.sigma_delta) {
        for (int m = 0; m < l.M; ++m)
            for (int s = 0; s < kLatentSectors; ++s) blocks_.push_back({Kind::SigmaDelta, m, s, 0});
    }

    series_.assign(static_cast<std::size_t>(l.Q * l.M * kLatentSectors), {});
    for (std::size_t i = 0; i < in_.obs.size(); ++i) {
        const auto& o = in_.obs[i];
        series_[static_cast<std::size_t>(l.alpha(o.population, o.method, o.sector))].push_back(static_cast<int>(i));
    }
    for (int q = 0; q < l.Q; ++q) {
        const Eigen::MatrixXd& B = in_.bases[q].values;
        Eigen::MatrixXd cum(B.rows(), B.cols());
        for (Eigen::Index t = 0; t < B.rows(); ++t) {
            double acc = 0.0;
            for (Eigen::Index k = 0; k < B.cols(); ++k) {
                acc += B(t, k);
                cum(t, k) = acc;
            }
        }
        cum_basis_.push_back(std::move(cum));
    }
    country_pops_.assign(static_cast<std::size_t>(l.C), {});
    for (int q = 0; q < l.Q; ++q) country_pops_[in_.population_country_index[q]].push_back(q);
    subcon_children_.assign(static_cast<std::size_t>(l.R), {});
    if (l.country_layer()) {
        for (int c = 0; c < l.C; ++c) subcon_children_[in_.country_subcontinent[c]].push_back(c);
    } else {
        for (int q = 0; q < l.Q; ++q) subcon_children_[in_.country_subcontinent[in_.population_country_index[q]]].push_back(q);
    }
    for (int s = 0; s < kLatentSectors; ++s) update_covariance(s);
    pending_values_.resize(static_cast<std::size_t>(l.M));
    refresh();
}

void HierarchicalTarget::update_covariance(int s) {
    cov_[s] = delta_covariance(state_, in_, s);
    precision_[s] = precision_of(cov_[s]);
}

void HierarchicalTarget::refresh() {
    const StateLayout& l = layout_;
    psi_.assign(in_.obs.size(), 0.0);
    for (int q = 0; q < l.Q; ++q) {
        for (int m = 0; m < l.M; ++m) {
            for (int s = 0; s < kLatentSectors; ++s) {
                const auto& idx = series_[static_cast<std::size_t>(l.alpha(q, m, s))];
                if (idx.empty()) continue;
                const std::vector<double> beta = state_beta(state_, l, in_, q, m, s);
                for (int i : idx) {
                    psi_[static_cast<std::size_t>(i)] =
                        latent_psi(beta, in_.bases[q].values.row(in_.obs[static_cast<std::size_t>(i)].time).transpose());
                }
            }
        }
    }
    for (int s = 0; s < kLatentSectors; ++s) {
        cross_[s] = Eigen::MatrixXd::Zero(l.M, l.M);
        for (int q = 0; q < l.Q; ++q) {
            for (int h = 0; h < l.H; ++h) {
                Eigen::Map<const Eigen::VectorXd> x(&state_.delta[static_cast<std::size_t>(l.delta(q, 0, s, h))], l.M);
                cross_[s].noalias() += x * x.transpose();
            }
        }
    }
}

int HierarchicalTarget::block_size(std::size_t b) const {
    return blocks_[b].kind == Kind::Delta ? layout_.M : 1;
}

double HierarchicalTarget::delta_weight(int i, int h) const {
    const auto& o = in_.obs[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd& cum = cum_basis_[static_cast<std::size_t>(o.population)];
    const double total = cum(o.time, cum.cols() - 1);
    if (h < 0) return total;
    const double below = cum(o.time, h);
    return h >= in_.bases[o.population].k_star ? total - below : -below;
}

double HierarchicalTarget::series_loglik_shift(int series, double shift, int h) const {
    double acc = 0.0;
    for (int i : series_[static_cast<std::size_t>(series)]) {
        const auto& o = in_.obs[static_cast<std::size_t>(i)];
        const double d = o.y - psi_[static_cast<std::size_t>(i)];
        const double d_new = d - shift * delta_weight(i, h);
        acc += (d * d - d_new * d_new) / (2.0 * o.var);
    }
    return acc;
}

double& HierarchicalTarget::parent_of_alpha(int q, int m, int s, double& sd) {
    const StateLayout& l = layout_;
    const int c = in_.population_country_index[q];
    if (l.country_layer()) {
        sd = state_.sigma_alpha_p[s];
        return state_.alpha_country[static_cast<std::size_t>(l.country(c, m, s))];
    }
    sd = state_.sigma_alpha_c[s];
    return state_.theta_sub[static_cast<std::size_t>(l.subcon(in_.country_subcontinent[c], m, s))];
}

double HierarchicalTarget::sigma_block_ratio(const Block& blk, double old_sigma, double new_sigma) const {
    const StateLayout& l = layout_;
    const int s = blk.a;
    double acc = half_cauchy_logpdf(new_sigma) - half_cauchy_logpdf(old_sigma);
    auto pair = [&](double x, double mean) {
        return normal_logpdf(x, mean, new_sigma) - normal_logpdf(x, mean, old_sigma);
    };
    switch (blk.kind) {
        case Kind::SigmaAlphaP:
            for (int q = 0; q < l.Q; ++q)
                for (int m = 0; m < l.M; ++m)
                    acc += pair(state_.alpha[static_cast<std::size_t>(l.alpha(q, m, s))],
                                state_.alpha_country[static_cast<std::size_t>(l.country(in_.population_country_index[q], m, s))]);
            break;
        case Kind::SigmaAlphaC:
            if (l.country_layer()) {
                for (int c = 0; c < l.C; ++c)
                    for (int m = 0; m < l.M; ++m)
                        acc += pair(state_.alpha_country[static_cast<std::size_t>(l.country(c, m, s))],
                                    state_.theta_sub[static_cast<std::size_t>(l.subcon(in_.country_subcontinent[c], m, s))]);
            } else {
                for (int q = 0; q < l.Q; ++q)
                    for (int m = 0; m < l.M; ++m)
                        acc += pair(state_.alpha[static_cast<std::size_t>(l.alpha(q, m, s))],
                                    state_.theta_sub[static_cast<std::size_t>(
                                        l.subcon(in_.country_subcontinent[in_.population_country_index[q]], m, s))]);
            }
            break;
        case Kind::SigmaTheta:
            for (int r = 0; r < l.R; ++r)
                for (int m = 0; m < l.M; ++m)
                    acc += pair(state_.theta_sub[static_cast<std::size_t>(l.subcon(r, m, s))],
                                state_.theta_world[static_cast<std::size_t>(l.world(m, s))]);
            break;
        default: break;
    }
    return acc;
}

double HierarchicalTarget::propose(std::size_t b, const double* z, double scale) {
    const StateLayout& l = layout_;
    const Block& blk = blocks_[b];
    pending_jacobian_ = 0.0;
    switch (blk.kind) {
        case Kind::Alpha: {
            const int q = blk.a, m = blk.b, s = blk.c;
            const std::size_t i = static_cast<std::size_t>(l.alpha(q, m, s));
            const double x = state_.alpha[i];
            const double x_new = x + scale * z[0];
            pending_scalar_ = x_new;
            double mean = 0.0, sd = 1.0;
            if (l.multi) {
                mean = parent_of_alpha(q, m, s, sd);
            } else {
                mean = in_.prior_location[i];
                sd = in_.prior_scale[i];
            }
            const double prior = (sq(x - mean) - sq(x_new - mean)) / (2.0 * sd * sd);
            return prior + series_loglik_shift(l.alpha(q, m, s), x_new - x, -1);
        }
        case Kind::Delta: {
            const int q = blk.a, s = blk.b, h = blk.c;
            const double* x = &state_.delta[static_cast<std::size_t>(l.delta(q, 0, s, h))];
            const Eigen::MatrixXd& L = cov_[s].chol;
            for (int m = 0; m < l.M; ++m) {
                double step = 0.0;
                for (int j = 0; j <= m; ++j) step += L(m, j) * z[j];
                pending_values_[m] = x[m] + scale * step;
            }
            double ratio = -0.5 * (cov_[s].quad(pending_values_.data()) - cov_[s].quad(x));
            for (int m = 0; m < l.M; ++m) {
                ratio += series_loglik_shift(l.alpha(q, m, s), pending_values_[m] - x[m], h);
            }
            return ratio;
        }
        case Kind::Country: {
            const int c = blk.a, m = blk.b, s = blk.c;
            const double x = state_.alpha_country[static_cast<std::size_t>(l.country(c, m, s))];
            const double x_new = x + scale * z[0];
            pending_scalar_ = x_new;
            const double parent = state_.theta_sub[static_cast<std::size_t>(l.subcon(in_.country_subcontinent[c], m, s))];
            double ratio = (sq(x - parent) - sq(x_new - parent)) / (2.0 * sq(state_.sigma_alpha_c[s]));
            double child = 0.0;
            for (int q : country_pops_[static_cast<std::size_t>(c)]) {
                const double a = state_.alpha[static_cast<std::size_t>(l.alpha(q, m, s))];
                child += sq(a - x) - sq(a - x_new);
            }
            return ratio + child / (2.0 * sq(state_.sigma_alpha_p[s]));
        }
        case Kind::Subcon: {
            const int r = blk.a, m = blk.b, s = blk.c;
            const double x = state_.theta_sub[static_cast<std::size_t>(l.subcon(r, m, s))];
            const double x_new = x + scale * z[0];
            pending_scalar_ = x_new;
            const double parent = state_.theta_world[static_cast<std::size_t>(l.world(m, s))];
            double ratio = (sq(x - parent) - sq(x_new - parent)) / (2.0 * sq(state_.sigma_theta[s]));
            double child = 0.0;
            for (int k : subcon_children_[static_cast<std::size_t>(r)]) {
                const double a = l.country_layer() ? state_.alpha_country[static_cast<std::size_t>(l.country(k, m, s))]
                                                   : state_.alpha[static_cast<std::size_t>(l.alpha(k, m, s))];
                child += sq(a - x) - sq(a - x_new);
            }
            return ratio + child / (2.0 * sq(state_.sigma_alpha_c[s]));
        }
        case Kind::World: {
            const int m = blk.a, s = blk.b;
            const double x = state_.theta_world[static_cast<std::size_t>(l.world(m, s))];
            const double x_new = x + scale * z[0];
            pending_scalar_ = x_new;
            double ratio = (sq(x) - sq(x_new)) / (2.0 * sq(kThetaWorldSd));
            double child = 0.0;
            for (int r = 0; r < l.R; ++r) {
                const double a = state_.theta_sub[static_cast<std::size_t>(l.subcon(r, m, s))];
                child += sq(a - x) - sq(a - x_new);
            }
            return ratio + child / (2.0 * sq(state_.sigma_theta[s]));
        }
        case Kind::SigmaAlphaP:
        case Kind::SigmaAlphaC:
        case Kind::SigmaTheta: {
            const int s = blk.a;
            const double old_sigma = blk.kind == Kind::SigmaAlphaP   ? state_.sigma_alpha_p[s]
                                     : blk.kind == Kind::SigmaAlphaC ? state_.sigma_alpha_c[s]
                                                                     : state_.sigma_theta[s];
            const double u = std::log(old_sigma);
            const double u_new = u + scale * z[0];
            const double new_sigma = std::exp(u_new);
            pending_scalar_ = new_sigma;
            pending_jacobian_ = u_new - u;
            if (!(new_sigma > 0.0) || !std::isfinite(new_sigma)) return kNegInf;
            return sigma_block_ratio(blk, old_sigma, new_sigma) + pending_jacobian_;
        }
        case Kind::SigmaDelta: {
            const int m = blk.a, s = blk.b;
            const double old_sigma = state_.sigma_delta[static_cast<std::size_t>(l.sigma_delta_index(m, s))];
            const double u = std::log(old_sigma);
            const double u_new = u + scale * z[0];
            const double new_sigma = std::exp(u_new);
            pending_scalar_ = new_sigma;
            pending_jacobian_ = u_new - u;
            if (!(new_sigma > 0.0) || !std::isfinite(new_sigma)) return kNegInf;
            double prior = 0.0;
            if (l.level == Level::National) {
                if (!(new_sigma < kSigmaDeltaUpper)) return kNegInf;
            } else {
                prior = half_cauchy_logpdf(new_sigma) - half_cauchy_logpdf(old_sigma);
            }
            Eigen::VectorXd sigma = cov_[s].sigma;
            sigma[m] = new_sigma;
            try {
                pending_cov_ = assemble_covariance(in_.rho[s], sigma);
            } catch (const SPDError&) {
                return kNegInf;
            }
            pending_precision_ = precision_of(pending_cov_);
            const double blocks = static_cast<double>(l.Q) * static_cast<double>(l.H);
            const double trace_new = pending_precision_.cwiseProduct(cross_[s]).sum();
            const double trace_old = precision_[s].cwiseProduct(cross_[s]).sum();
            return prior - 0.5 * blocks * (pending_cov_.log_det - cov_[s].log_det) - 0.5 * (trace_new - trace_old) +
                   pending_jacobian_;
        }
    }
    return kNegInf;
}

void HierarchicalTarget::accept(std::size_t b) {
    const StateLayout& l = layout_;
    const Block& blk = blocks_[b];
    switch (blk.kind) {
        case Kind::Alpha: {
            const int series = l.alpha(blk.a, blk.b, blk.c);
            double& x = state_.alpha[static_cast<std::size_t>(series)];
            const double d = pending_scalar_ - x;
            x = pending_scalar_;
            for (int i : series_[static_cast<std::size_t>(series)]) psi_[static_cast<std::size_t>(i)] += d * delta_weight(i, -1);
            break;
        }
        case Kind::Delta: {
            const int q = blk.a, s = blk.b, h = blk.c;
            double* x = &state_.delta[static_cast<std::size_t>(l.delta(q, 0, s, h))];
            Eigen::Map<Eigen::VectorXd> old_vec(x, l.M);
            Eigen::Map<const Eigen::VectorXd> new_vec(pending_values_.data(), l.M);
            cross_[s].noalias() -= old_vec * old_vec.transpose();
            cross_[s].noalias() += new_vec * new_vec.transpose();
            for (int m = 0; m < l.M; ++m) {
                const double d = pending_values_[m] - x[m];
                x[m] = pending_values_[m];
                for (int i : series_[static_cast<std::size_t>(l.alpha(q, m, s))]) {
                    psi_[static_cast<std::size_t>(i)] += d * delta_weight(i, h);
                }
            }
            break;
        }
        case Kind::Country: state_.alpha_country[static_cast<std::size_t>(l.country(blk.a, blk.b, blk.c))] = pending_scalar_; break;
        case Kind::Subcon: state_.theta_sub[static_cast<std::size_t>(l.subcon(blk.a, blk.b, blk.c))] = pending_scalar_; break;
        case Kind::World: state_.theta_world[static_cast<std::size_t>(l.world(blk.a, blk.b))] = pending_scalar_; break;
        case Kind::SigmaAlphaP: state_.sigma_alpha_p[blk.a] = pending_scalar_; break;
        case Kind::SigmaAlphaC: state_.sigma_alpha_c[blk.a] = pending_scalar_; break;
        case Kind::SigmaTheta: state_.sigma_theta[blk.a] = pending_scalar_; break;
        case Kind::SigmaDelta:
            state_.sigma_delta[static_cast<std::size_t>(l.sigma_delta_index(blk.a, blk.b))] = pending_scalar_;
            cov_[blk.b] = std::move(pending_cov_);
            precision_[blk.b] = std::move(pending_precision_);
            break;
    }
}

void HierarchicalTarget::reject(std::size_t) {}

void HierarchicalTarget::end_sweep(long iteration) {
    if (iteration % kRefreshEvery == 0) refresh();
}

void HierarchicalTarget::write_outputs(double* out) const {
    const std::vector<double> flat = state_.flatten(layout_);
    std::copy(flat.begin(), flat.end(), out);
}

std::string HierarchicalTarget::block_name(std::size_t b) const {
    const Block& blk = blocks_[b];
    auto idx = [](std::initializer_list<int> v) {
        std::string s = "[";
        bool first = true;
        for (int i : v) {
            s += (first ? "" : ",") + std::to_string(i + 1);
            first = false;
        }
        return s + "]";
    };
    switch (blk.kind) {
        case Kind::Alpha:
            return (layout_.level == Level::Subnational ? "alpha_pms" : "alpha_cms") + idx({blk.a, blk.b, blk.c});
        case Kind::Delta:
            return "delta.k[" + std::to_string(blk.a + 1) + ",*," + std::to_string(blk.b + 1) + "," +
                   std::to_string(blk.c + 1) + "]";
        case Kind::Country: return "alpha_cms" + idx({blk.a, blk.b, blk.c});
        case Kind::Subcon: return "theta_rms" + idx({blk.a, blk.b, blk.c});
        case Kind::World: return "theta_wms" + idx({blk.a, blk.b});
        case Kind::SigmaAlphaP: return "sigma_alpha_ps" + idx({blk.a});
        case Kind::SigmaAlphaC: return "sigma_alpha_cs" + idx({blk.a});
        case Kind::SigmaTheta: return "sigma_theta_s" + idx({blk.a});
        case Kind::SigmaDelta: return "sigma_delta" + idx({blk.a, blk.b});
    }
    return "?";
}

std::vector<std::size_t> HierarchicalTarget::parameter_blocks() const {
    const StateLayout& l = layout_;
    std::map<std::tuple<int, int, int, int>, std::size_t> key;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        key[{static_cast<int>(blocks_[b].kind), blocks_[b].a, blocks_[b].b, blocks_[b].c}] = b;
    }
    auto find = [&](Kind k, int a, int b2 = 0, int c = 0) { return key.at({static_cast<int>(k), a, b2, c}); };
    std::vector<std::size_t> out;
    for (int q = 0; q < l.Q; ++q)
        for (int m = 0; m < l.M; ++m)
            for (int s = 0; s < kLatentSectors; ++s) out.push_back(find(Kind::Alpha, q, m, s));
    std::vector<std::size_t> delta(static_cast<std::size_t>(l.Q * l.M * kLatentSectors * l.H));
    for (int q = 0; q < l.Q; ++q)
        for (int m = 0; m < l.M; ++m)
            for (int s = 0; s < kLatentSectors; ++s)
                for (int h = 0; h < l.H; ++h) delta[static_cast<std::size_t>(l.delta(q, m, s, h))] = find(Kind::Delta, q, s, h);
    out.insert(out.end(), delta.begin(), delta.end());
    if (l.country_layer()) {
        for (int c = 0; c < l.C; ++c)
            for (int m = 0; m < l.M; ++m)
                for (int s = 0; s < kLatentSectors; ++s) out.push_back(find(Kind::Country, c, m, s));
        for (int s = 0; s < kLatentSectors; ++s) out.push_back(find(Kind::SigmaAlphaP, s));
    }
    if (l.multi) {
        for (int r = 0; r < l.R; ++r)
            for (int m = 0; m < l.M; ++m)
                for (int s = 0; s < kLatentSectors; ++s) out.push_back(find(Kind::Subcon, r, m, s));
        for (int m = 0; m < l.M; ++m)
            for (int s = 0; s < kLatentSectors; ++s) out.push_back(find(Kind::World, m, s));
        for (int s = 0; s < kLatentSectors; ++s) out.push_back(find(Kind::SigmaAlphaC, s));
        for (int s = 0; s < kLatentSectors; ++s) out.push_back(find(Kind::SigmaTheta, s));
    }
    if (l.sigma_delta) {
        for (int m = 0; m < l.M; ++m)
            for (int s = 0; s < kLatentSectors; ++s) out.push_back(find(Kind::SigmaDelta, m, s));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::size_t ChainOutput::total_draws() const {
    std::size_t n = 0;
    for (const auto& c : chains) n += static_cast<std::size_t>(c.rows());
    return n;
}

ParameterState ChainOutput::draw(std::size_t chain, long i) const {
    const Eigen::MatrixXd& m = chains[chain];
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    return ParameterState::unflatten(layout, row.data());
}

std::vector<std::string> default_monitor(Level level, Scope scope) {
    if (level == Level::National) {
        if (scope == Scope::MultiCountry) return {"P", "beta.k", "alpha_cms", "delta.k"};
        return {"P", "alpha_cms", "inv.sigma_delta", "beta.k"};
    }
    if (scope == Scope::MultiCountry) {
        return {"alpha_pms", "alpha_cms", "inv.sigma_delta", "tau_alpha_pms", "beta.k", "delta.k"};
    }
    return {"P", "alpha_pms", "beta.k"};
}

MonitorTable monitored_values(const ChainOutput& out, const ModelInputs& in, const std::vector<std::string>& monitor) {
    static const std::set<std::string> known{"P",         "alpha_cms",      "alpha_pms",     "delta.k",
                                             "beta.k",    "theta_rms",      "theta_wms",     "sigma_alpha_cs",
                                             "sigma_alpha_ps", "sigma_theta_s", "sigma_delta", "inv.sigma_delta",
                                             "tau_alpha_pms", "tau_alpha_cms"};
    for (const auto& m : monitor) {
        if (!known.count(m)) throw ConfigError("unknown monitored parameter '" + m + "'");
    }
    const StateLayout& l = out.layout;
    auto wants = [&](const std::string& n) { return std::find(monitor.begin(), monitor.end(), n) != monitor.end(); };

    MonitorTable table;
    std::vector<std::size_t> direct;
    for (std::size_t j = 0; j < out.names.size(); ++j) {
        const std::string prefix = out.names[j].substr(0, out.names[j].find('['));
        if (wants(prefix)) {
            direct.push_back(j);
            table.names.push_back(out.names[j]);
            table.acceptance.push_back(j < out.parameter_acceptance.size() ? out.parameter_acceptance[j]
                                                                           : std::numeric_limits<double>::quiet_NaN());
        }
    }
    const bool beta = wants("beta.k");
    const bool inv_sigma = wants("inv.sigma_delta");
    const bool tau_p = wants("tau_alpha_pms") && l.country_layer();
    const bool tau_c = wants("tau_alpha_cms") && l.multi;
    const int K = l.H + 1;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (beta) {
        for (int q = 0; q < l.Q; ++q)
            for (int m = 0; m < l.M; ++m)
                for (int s = 0; s < kLatentSectors; ++s)
                    for (int k = 0; k < K; ++k) {
                        table.names.push_back("beta.k[" + std::to_string(q + 1) + "," + std::to_string(m + 1) + "," +
                                              std::to_string(s + 1) + "," + std::to_string(k + 1) + "]");
                        table.acceptance.push_back(nan);
                    }
    }
    if (inv_sigma) {
        for (int s = 0; s < kLatentSectors; ++s)
            for (int i = 0; i < l.M; ++i)
                for (int j = 0; j < l.M; ++j) {
                    table.names.push_back("inv.sigma_delta[" + std::to_string(s + 1) + "," + std::to_string(i + 1) + "," +
                                          std::to_string(j + 1) + "]");
                    table.acceptance.push_back(nan);
                }
    }
    if (tau_p) {
        for (int s = 0; s < kLatentSectors; ++s) {
            table.names.push_back("tau_alpha_pms[" + std::to_string(s + 1) + "]");
            table.acceptance.push_back(nan);
        }
    }
    if (tau_c) {
        for (int s = 0; s < kLatentSectors; ++s) {
            table.names.push_back("tau_alpha_cms[" + std::to_string(s + 1) + "]");
            table.acceptance.push_back(nan);
        }
    }

    for (std::size_t c = 0; c < out.chains.size(); ++c) {
        const Eigen::MatrixXd& draws = out.chains[c];
        Eigen::MatrixXd values(draws.rows(), static_cast<Eigen::Index>(table.names.size()));
        for (Eigen::Index i = 0; i < draws.rows(); ++i) {
            Eigen::Index col = 0;
            for (std::size_t j : direct) values(i, col++) = draws(i, static_cast<Eigen::Index>(j));
            if (!beta && !inv_sigma && !tau_p && !tau_c) continue;
            const ParameterState st = out.draw(c, i);
            if (beta) {
                for (int q = 0; q < l.Q; ++q)
                    for (int m = 0; m < l.M; ++m)
                        for (int s = 0; s < kLatentSectors; ++s) {
                            const std::vector<double> b = state_beta(st, l, in, q, m, s);
                            for (double v : b) values(i, col++) = v;
                        }
            }
            if (inv_sigma) {
                for (int s = 0; s < kLatentSectors; ++s) {
                    const Eigen::MatrixXd p = precision_of(delta_covariance(st, in, s));
                    for (int a = 0; a < l.M; ++a)
                        for (int b = 0; b < l.M; ++b) values(i, col++) = p(a, b);
                }
            }
            if (tau_p) {
                for (int s = 0; s < kLatentSectors; ++s) values(i, col++) = 1.0 / sq(st.sigma_alpha_p[s]);
            }
            if (tau_c) {
                for (int s = 0; s < kLatentSectors; ++s) values(i, col++) = 1.0 / sq(st.sigma_alpha_c[s]);
            }
        }
        table.chains.push_back(std::move(values));
    }
    return table;
}

ChainOutput run_chains(const ModelInputs& in, const SamplerConfig& config, const std::vector<std::string>& monitor) {
    config.validate();
    ChainOutput out;
    out.config = config;
    out.layout = StateLayout::of(in);
    out.names = parameter_names(out.layout);
    out.monitor = monitor.empty() ? default_monitor(in.spec.level, in.spec.scope) : monitor;
    out.draws_per_chain = config.draws_per_chain();

    std::vector<std::vector<std::string>> flags(static_cast<std::size_t>(config.n_chains));
    std::vector<std::vector<std::string>> block_names(static_cast<std::size_t>(config.n_chains));
    std::vector<std::vector<std::size_t>> param_blocks(static_cast<std::size_t>(config.n_chains));
    TargetFactory factory = [&](int chain, Rng& rng) -> std::unique_ptr<BlockTarget> {
        auto& f = flags[static_cast<std::size_t>(chain)];
        auto target = std::make_unique<HierarchicalTarget>(in, initial_state(in, rng, &f));
        auto& names = block_names[static_cast<std::size_t>(chain)];
        for (std::size_t b = 0; b < target->num_blocks(); ++b) names.push_back(target->block_name(b));
        param_blocks[static_cast<std::size_t>(chain)] = target->parameter_blocks();
        return target;
    };
    std::vector<ChainDraws> draws = run_engine(factory, config);

    out.init_flags = flags.front();
    out.block_names = block_names.front();
    for (auto& d : draws) {
        out.block_acceptance.push_back(d.acceptance);
        out.log_scale_after_burnin.push_back(d.log_scale_after_burnin);
        out.log_scale_final.push_back(d.log_scale_final);
        out.chains.push_back(std::move(d.draws));
    }
    const auto& pb = param_blocks.front();
    out.parameter_acceptance.resize(pb.size());
    for (std::size_t j = 0; j < pb.size(); ++j) {
        double acc = 0.0;
        for (const auto& a : out.block_acceptance) acc += a[pb[j]];
        out.parameter_acceptance[j] = acc / static_cast<double>(out.block_acceptance.size());
    }

    if (config.n_chains >= 2) {
        const MonitorTable table = monitored_values(out, in, out.monitor);
        out.diagnostics = diagnostics(table.names, table.chains, table.acceptance);
        for (const auto& r : out.diagnostics) {
            if (!(r.rhat <= kRhatThreshold)) out.converged = false;
        }
    }
    return out;
}

std::string draws_csv(const MonitorTable& table, std::size_t chain) {
    std::ostringstream out;
    std::vector<std::string> header{"iteration"};
    header.insert(header.end(), table.names.begin(), table.names.end());
    csv::write_row(out, header);
    const Eigen::MatrixXd& v = table.chains[chain];
    std::vector<std::string> row;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        row.clear();
        row.push_back(std::to_string(i + 1));
        for (Eigen::Index j = 0; j < v.cols(); ++j) row.push_back(csv::format_double(v(i, j)));
        csv::write_row(out, row);
    }
    return out.str();
}

}  // namespace supplyshare
