#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "supplyshare/data_model.hpp"
#include "supplyshare/spline_basis.hpp"

namespace supplyshare {

enum class Level { National, Subnational };
enum class Scope { MultiCountry, SingleCountry };
enum class CorrelationMode { ZeroCovariance, CrossMethod, FixedGlobal };

/// Modelled latent sectors: 0 = public share, 1 = commercial share of the private sector.
inline constexpr int kLatentSectors = 2;
inline constexpr double kThetaWorldSd = 10.0;
inline constexpr double kSigmaDeltaUpper = 10.0;

std::string_view to_string(Level v);
std::string_view to_string(Scope v);
std::string_view to_string(CorrelationMode v);
Level parse_level(std::string_view token);
Scope parse_scope(std::string_view token);

/// One row of the informative-prior file. For national single-country fits
/// `level_name` is a subcontinent; for subnational fits it is a country.
struct PriorEntry {
    std::string level_name;
    Method method = Method::FemaleSterilization;
    int sector = 0;  // latent sector, 0 or 1
    double location = 0.0;
    double scale = 1.0;
};

struct InformativePriors {
    std::vector<PriorEntry> entries;

    const PriorEntry* find(std::string_view level_name, Method method, int sector) const;
    std::string to_csv() const;
    static InformativePriors from_csv(const csv::Table& table);
};

struct ModelSpec {
    Level level = Level::National;
    Scope scope = Scope::MultiCountry;
    double start_year = 1990.0;
    double end_year = 2025.5;
    int nsegments = 12;
    CorrelationMode correlation = CorrelationMode::ZeroCovariance;
    std::array<Eigen::MatrixXd, kLatentSectors> rho;           // CrossMethod
    std::array<Eigen::MatrixXd, kLatentSectors> sigma_global;  // FixedGlobal
    std::optional<InformativePriors> priors;                   // SingleCountry
};

/// Sigma = diag(sigma) rho diag(sigma) with a cached lower Cholesky factor.
struct SectorCovariance {
    Eigen::MatrixXd rho;
    Eigen::VectorXd sigma;
    Eigen::MatrixXd matrix;
    Eigen::MatrixXd chol;
    double log_det = 0.0;
    double jitter = 0.0;  // total diagonal jitter added

    int dim() const { return static_cast<int>(matrix.rows()); }
    /// x' Sigma^-1 x
    double quad(const double* x) const;
    /// log MVN(x; 0, Sigma)
    double log_density(const double* x) const;
};

/// Cholesky with the jitter rule: add 1e-8 * trace / M to the diagonal, up to
/// three times, then SPDError.
SectorCovariance factor_covariance(const Eigen::MatrixXd& sigma_matrix);
SectorCovariance assemble_covariance(const Eigen::MatrixXd& rho, const Eigen::VectorXd& sigma);

// Scalar densities shared by the prior, the sampler and tests.
double normal_logpdf(double x, double mean, double sd);
double normal_logpdf_var(double x, double mean, double var);
double half_cauchy_logpdf(double x);  // Cauchy(0,1) truncated to (0, inf)

std::vector<double> beta_from(double alpha, const std::vector<double>& delta, int k_star);
double latent_psi(const std::vector<double>& beta, const Eigen::VectorXd& basis_row);

struct LatentPair {
    double psi1 = 0.0;
    double psi2 = 0.0;
};
struct CompositionVector {
    std::array<double, 3> phi{};
};
CompositionVector compose_phi(LatentPair psi);

/// Model inputs: populations, bases, logit observations and the fixed pieces
/// (correlations, informative priors) for one model variant.
struct ModelInputs {
    ModelSpec spec;
    std::vector<Method> methods;
    std::vector<std::string> countries;
    std::vector<std::string> subcontinents;
    std::vector<int> country_subcontinent;
    std::vector<std::string> population_country;
    std::vector<std::string> population_province;  // empty for national
    std::vector<int> population_country_index;
    std::vector<double> first_year;
    std::vector<double> last_year;
    std::vector<BasisMatrix> bases;
    std::vector<double> grid;
    std::vector<LogitObservation> obs;
    std::array<SectorCovariance, kLatentSectors> fixed_cov;  // FixedGlobal
    std::array<Eigen::MatrixXd, kLatentSectors> rho;         // identity for ZeroCovariance
    std::vector<double> prior_location;                      // SingleCountry, (q * M + m) * 2 + s
    std::vector<double> prior_scale;
    std::vector<std::string> warnings;
    int clamped = 0;

    int Q() const { return static_cast<int>(bases.size()); }
    int M() const { return static_cast<int>(methods.size()); }
    int K() const { return bases.empty() ? spec.nsegments + 3 : bases.front().K; }
    int H() const { return K() - 1; }
    int C() const { return static_cast<int>(countries.size()); }
    int R() const { return static_cast<int>(subcontinents.size()); }
    int T() const { return static_cast<int>(grid.size()); }
    std::string population_name(int q) const;
    int method_index(Method m) const;  // -1 when absent
    bool multi() const { return spec.scope == Scope::MultiCountry; }
    bool country_layer() const { return multi() && spec.level == Level::Subnational; }
    bool samples_sigma_delta() const { return spec.correlation != CorrelationMode::FixedGlobal; }
};

/// Builds populations (sorted by country, then province), anchors each basis at
/// the population's latest survey, converts sector triples to logit
/// observations and merges duplicates with precision weights.
ModelInputs build_model_inputs(const CleanDataset& data, const ModelSpec& spec);

/// Same, with an explicit method set (used when a fit must line up with
/// another fit's methods).
ModelInputs build_model_inputs(const CleanDataset& data, const ModelSpec& spec, const std::vector<Method>& methods);

/// Index arithmetic for the parameter vectors of one model variant.
struct StateLayout {
    int Q = 0, M = 0, H = 0, C = 0, R = 0;
    Level level = Level::National;
    bool multi = true;
    bool sigma_delta = true;

    static StateLayout of(const ModelInputs& in);

    bool country_layer() const { return multi && level == Level::Subnational; }
    int alpha(int q, int m, int s) const { return (q * M + m) * kLatentSectors + s; }
    int delta_block(int q, int s, int h) const { return (q * kLatentSectors + s) * H + h; }
    int delta(int q, int m, int s, int h) const { return delta_block(q, s, h) * M + m; }
    int country(int c, int m, int s) const { return (c * M + m) * kLatentSectors + s; }
    int subcon(int r, int m, int s) const { return (r * M + m) * kLatentSectors + s; }
    int world(int m, int s) const { return m * kLatentSectors + s; }
    int sigma_delta_index(int m, int s) const { return m * kLatentSectors + s; }

    std::size_t flat_size() const;

    // Offsets of each parameter group in the flat vector.
    int n_alpha() const { return Q * M * kLatentSectors; }
    int off_delta() const { return n_alpha(); }
    int off_country() const { return off_delta() + n_alpha() * H; }
    int off_sigma_alpha_p() const { return off_country() + (country_layer() ? C * M * kLatentSectors : 0); }
    int off_theta_sub() const { return off_sigma_alpha_p() + (country_layer() ? kLatentSectors : 0); }
    int off_theta_world() const { return off_theta_sub() + (multi ? R * M * kLatentSectors : 0); }
    int off_sigma_alpha_c() const { return off_theta_world() + (multi ? M * kLatentSectors : 0); }
    int off_sigma_theta() const { return off_sigma_alpha_c() + (multi ? kLatentSectors : 0); }
    int off_sigma_delta() const { return off_sigma_theta() + (multi ? kLatentSectors : 0); }
};

struct ParameterState {
    std::vector<double> alpha;
    std::vector<double> delta;
    std::vector<double> alpha_country;  // subnational multi-country only
    std::vector<double> theta_sub;
    std::vector<double> theta_world;
    std::array<double, kLatentSectors> sigma_alpha_c{1.0, 1.0};
    std::array<double, kLatentSectors> sigma_alpha_p{1.0, 1.0};
    std::array<double, kLatentSectors> sigma_theta{1.0, 1.0};
    std::vector<double> sigma_delta;

    static ParameterState zeros(const StateLayout& layout);
    std::vector<double> flatten(const StateLayout& layout) const;
    static ParameterState unflatten(const StateLayout& layout, const double* values);
};

/// Flat parameter names in `flatten` order, JAGS-style 1-based indices.
std::vector<std::string> parameter_names(const StateLayout& layout);

std::vector<double> state_beta(const ParameterState& state, const StateLayout& layout, const ModelInputs& in, int q,
                               int m, int s);

/// Covariance of the delta prior for latent sector s in the given state.
SectorCovariance delta_covariance(const ParameterState& state, const ModelInputs& in, int s);

double log_prior(const ParameterState& state, const ModelInputs& in);
double log_likelihood(const ParameterState& state, const ModelInputs& in);
double log_posterior(const ParameterState& state, const ModelInputs& in);

}  // namespace supplyshare
