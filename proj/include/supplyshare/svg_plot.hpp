#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "supplyshare/data_model.hpp"
#include "supplyshare/posterior_summary.hpp"

namespace supplyshare {

struct PlotStyle {
    std::array<std::string, 3> colors{"#2b6cb0", "#7f7f7f", "#d4a017"};  // Public, Commercial_medical, Other
    int panel_width = 360;
    int panel_height = 240;
    int columns = 3;
};

/// Parses "blue,grey,gold"-style lists (names or #rrggbb).
std::array<std::string, 3> parse_colors(const std::string& text);

/// One SVG per population: a panel per method with 95% and 80% ribbons,
/// median lines and observations with +-1 SE bars.
std::map<std::string, std::string> plot_estimates(const PosteriorSummary& summary, const CleanDataset& data,
                                                  const PlotStyle& style = {});

/// File-system-safe name, e.g. "Nepal/Central" -> "Nepal_Central.svg".
std::string plot_file_name(const std::string& population);

}  // namespace supplyshare
