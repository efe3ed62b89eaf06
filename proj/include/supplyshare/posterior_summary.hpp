#pragma once

#include <string>
#include <vector>

#include "supplyshare/model_core.hpp"
#include "supplyshare/sampler.hpp"

namespace supplyshare {

/// Linear interpolation between order statistics (R type 7). `sorted` must be
/// ascending and non-empty.
double quantile_sorted(const std::vector<double>& sorted, double p);
double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);

struct SummaryRow {
    std::string population;
    double year = 0.0;
    Method method = Method::FemaleSterilization;
    Sector sector = Sector::Public;
    double median = 0.0, l80 = 0.0, u80 = 0.0, l95 = 0.0, u95 = 0.0;
};

struct PosteriorSummary {
    std::vector<SummaryRow> rows;  // ordered by population, method, year, sector
};

/// Quantiles at 2.5, 10, 50, 90 and 97.5% of one cell's draws.
SummaryRow summarize_cell(std::vector<double> draws);

/// phi on the grid for every retained draw, summarised cell by cell.
PosteriorSummary summarize(const ChainOutput& out, const ModelInputs& in);

/// phi[t][sector] for one draw, population and method.
std::vector<std::array<double, 3>> phi_grid(const ParameterState& state, const StateLayout& layout,
                                            const ModelInputs& in, int q, int m);

std::string estimates_csv(const PosteriorSummary& summary);
void export_estimates(const PosteriorSummary& summary, const std::string& path);
PosteriorSummary read_estimates(const csv::Table& table);
PosteriorSummary read_estimates(const std::string& path);

}  // namespace supplyshare
