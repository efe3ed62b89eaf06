#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "supplyshare/model_core.hpp"

namespace supplyshare {

enum class ObservationModel { Multinomial, LogitNormal };

struct SimScenario {
    Level level = Level::Subnational;
    std::vector<std::string> countries;               // empty: the first n_countries builtin FP countries
    int n_countries = 2;
    std::vector<std::vector<std::string>> provinces;  // empty: "Province 1", ...
    int provinces_per_country = 2;
    int n_methods = 3;

    double start_year = 1990.0;
    double end_year = 2025.5;
    int nsegments = 12;
    std::vector<double> survey_years;  // empty: evenly spaced over [survey_first, survey_last]
    int surveys = 3;
    double survey_first = 2000.0;
    double survey_last = 2015.0;
    int holdout_surveys = 0;  // trailing surveys that do not anchor the truth basis

    // Truth. With fixed_hyperparameters the intercepts come straight from
    // N(prior_location, prior_scale) as in the single-country model.
    bool fixed_hyperparameters = false;
    std::array<double, kLatentSectors> theta_world_mean{0.5, 0.0};
    double theta_world_sd = 0.5;
    double sigma_theta = 0.3;
    double sigma_alpha_c = 0.3;
    double sigma_alpha_p = 0.3;
    double prior_location = 0.0;
    double prior_scale = 0.5;
    double sigma_delta = 0.3;
    double rho = 0.0;  // common off-diagonal correlation

    ObservationModel observation = ObservationModel::Multinomial;
    long sample_size = 1000;
    double logit_sd = 0.2;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Key-value (INI) scenario text, e.g. "countries = Nepal;Zimbabwe".
SimScenario scenario_from_ini(const std::string& text);
std::string scenario_to_ini(const SimScenario& scenario);

struct TruthRow {
    std::string population;
    double year = 0.0;
    Method method = Method::FemaleSterilization;
    Sector sector = Sector::Public;
    double phi = 0.0;
};

struct SimResult {
    std::string survey_csv;
    CleanDataset data;
    StateLayout layout;            // population and method order match build_model_inputs
    ParameterState truth;
    std::vector<BasisMatrix> bases;
    std::vector<std::string> populations;
    std::vector<Method> methods;
    std::vector<TruthRow> truth_phi;
    std::array<Eigen::MatrixXd, kLatentSectors> sigma_global;  // covariance used for delta
    InformativePriors priors;                                   // fixed_hyperparameters only
};

/// Throws ConfigError for invalid scenarios.
SimResult simulate_dataset(const SimScenario& scenario);

std::string truth_csv(const std::vector<TruthRow>& rows);

}  // namespace supplyshare
