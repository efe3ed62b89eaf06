#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace supplyshare {

inline constexpr double kGridStep = 0.5;

/// Clamped cubic B-spline basis on [start, end] evaluated on the half-year grid.
/// Interior knots form a uniform lattice passing through the anchor year.
struct BasisMatrix {
    double start = 0.0;
    double end = 0.0;
    int nsegments = 0;
    double t_star = 0.0;
    int K = 0;
    int k_star = 0;              // 0-based index of the anchor coefficient
    std::vector<double> knots;   // full knot vector, length K + 4
    std::vector<double> peaks;   // abscissa of the maximum of each basis function
    std::vector<double> grid;    // start, start + 0.5, ..., end
    Eigen::MatrixXd values;      // grid.size() x K

    int grid_index(double year) const;  // -1 when off-grid or outside the window
    std::string to_csv() const;
};

std::vector<double> half_year_grid(double start, double end);

/// Throws ConfigError when nsegments < 4 and WindowError when t_star is outside
/// (start, end].
BasisMatrix build_basis(double start_year, double end_year, int nsegments, double t_star);

/// Cox-de Boor evaluation of all K functions at t. Throws WindowError outside
/// [start, end].
Eigen::VectorXd eval_basis(const BasisMatrix& basis, double t);

/// Coefficient interval h (between peaks h and h + 1) overlaps [first, last].
std::vector<bool> support_mask(const BasisMatrix& basis, double first_year, double last_year);

}  // namespace supplyshare
