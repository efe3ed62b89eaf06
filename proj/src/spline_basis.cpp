#include "supplyshare/spline_basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "supplyshare/csv.hpp"
#include "supplyshare/error.hpp"

namespace supplyshare {

namespace {

constexpr int kDegree = 3;

// Span index i with knots[i] <= t < knots[i+1], clamped to the last non-empty span.
int find_span(const std::vector<double>& knots, int K, double t) {
    if (t >= knots[K]) return K - 1;
    auto it = std::upper_bound(knots.begin() + kDegree, knots.begin() + K + 1, t);
    return static_cast<int>(it - knots.begin()) - 1;
}

// Nonzero functions i-3..i at t (NURBS book A2.2).
void basis_funs(const std::vector<double>& knots, int i, double t, double out[kDegree + 1]) {
    double left[kDegree + 1], right[kDegree + 1];
    out[0] = 1.0;
    for (int j = 1; j <= kDegree; ++j) {
        left[j] = t - knots[i + 1 - j];
        right[j] = knots[i + j] - t;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

Eigen::VectorXd eval_knots(const std::vector<double>& knots, int K, double t) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(K);
    const int i = find_span(knots, K, t);
    double n[kDegree + 1];
    basis_funs(knots, i, t, n);
    for (int r = 0; r <= kDegree; ++r) row[i - kDegree + r] = n[r];
    return row;
}

double peak_of(const std::vector<double>& knots, int K, int k) {
    const double lo = knots[k], hi = knots[k + 4];
    if (hi <= lo) return lo;
    constexpr int kSamples = 400;
    int best = 0;
    double best_value = -1.0;
    for (int j = 0; j <= kSamples; ++j) {
        const double t = lo + (hi - lo) * j / kSamples;
        const double v = eval_knots(knots, K, t)[k];
        if (v > best_value) {
            best_value = v;
            best = j;
        }
    }
    double a = lo + (hi - lo) * std::max(0, best - 1) / kSamples;
    double b = lo + (hi - lo) * std::min(kSamples, best + 1) / kSamples;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 100 && b - a > 1e-13; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (eval_knots(knots, K, c)[k] >= eval_knots(knots, K, d)[k]) {
            b = d;
        } else {
            a = c;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

std::vector<double> half_year_grid(double start, double end) {
    std::vector<double> grid;
    for (int i = 0;; ++i) {
        const double t = start + kGridStep * i;
        if (t > end + 1e-9) break;
        grid.push_back(t);
    }
    return grid;
}

int BasisMatrix::grid_index(double year) const {
    const double pos = (year - start) / kGridStep;
    const long idx = std::lround(pos);
    if (std::abs(pos - static_cast<double>(idx)) > 1e-6) return -1;
    if (idx < 0 || idx >= static_cast<long>(grid.size())) return -1;
    return static_cast<int>(idx);
}

std::string BasisMatrix::to_csv() const {
    std::ostringstream out;
    std::vector<std::string> header{"year"};
    for (int k = 0; k < K; ++k) header.push_back("B" + std::to_string(k + 1));
    csv::write_row(out, header);
    for (std::size_t t = 0; t < grid.size(); ++t) {
        std::vector<std::string> row{csv::format_double(grid[t])};
        for (int k = 0; k < K; ++k) row.push_back(csv::format_double(values(static_cast<Eigen::Index>(t), k)));
        csv::write_row(out, row);
    }
    return out.str();
}

BasisMatrix build_basis(double start_year, double end_year, int nsegments, double t_star) {
    if (nsegments < 4) throw ConfigError("nsegments must be at least 4, got " + std::to_string(nsegments));
    if (!(start_year < end_year)) throw WindowError("start year must precede end year");
    if (!(t_star > start_year && t_star <= end_year)) {
        throw WindowError("anchor year " + csv::format_double(t_star) + " outside (" + csv::format_double(start_year) +
                          ", " + csv::format_double(end_year) + "]");
    }

    const double width = (end_year - start_year) / nsegments;
    const double tol = 1e-9 * width;
    const long j_lo = static_cast<long>(std::floor((start_year - t_star) / width)) - 1;
    const long j_hi = static_cast<long>(std::ceil((end_year - t_star) / width)) + 1;
    std::vector<double> interior;
    for (long j = j_lo; j <= j_hi; ++j) {
        const double p = j == 0 ? t_star : t_star + static_cast<double>(j) * width;
        if (p > start_year + tol && p < end_year - tol) interior.push_back(p);
    }
    if (static_cast<int>(interior.size()) == nsegments) {
        const double d_lo = interior.front() - start_year;
        const double d_hi = end_year - interior.back();
        bool drop_low = d_lo <= d_hi;
        if (drop_low && interior.front() == t_star) drop_low = false;
        if (!drop_low && interior.back() == t_star) drop_low = true;
        if (drop_low) {
            interior.erase(interior.begin());
        } else {
            interior.pop_back();
        }
    }

    BasisMatrix b;
    b.start = start_year;
    b.end = end_year;
    b.nsegments = nsegments;
    b.t_star = t_star;
    b.K = static_cast<int>(interior.size()) + kDegree + 1;
    b.knots.assign(kDegree + 1, start_year);
    b.knots.insert(b.knots.end(), interior.begin(), interior.end());
    b.knots.insert(b.knots.end(), kDegree + 1, end_year);

    b.peaks.resize(b.K);
    for (int k = 0; k < b.K; ++k) b.peaks[k] = k == 0 ? start_year : (k == b.K - 1 ? end_year : peak_of(b.knots, b.K, k));
    b.k_star = 0;
    double best = std::abs(b.peaks[0] - t_star);
    for (int k = 1; k < b.K; ++k) {
        const double d = std::abs(b.peaks[k] - t_star);
        if (d < best - 1e-9) {
            best = d;
            b.k_star = k;
        }
    }

    b.grid = half_year_grid(start_year, end_year);
    b.values.resize(static_cast<Eigen::Index>(b.grid.size()), b.K);
    for (std::size_t t = 0; t < b.grid.size(); ++t) {
        b.values.row(static_cast<Eigen::Index>(t)) = eval_knots(b.knots, b.K, b.grid[t]).transpose();
    }
    return b;
}

Eigen::VectorXd eval_basis(const BasisMatrix& basis, double t) {
    if (!(t >= basis.start && t <= basis.end)) {
        throw WindowError("year " + csv::format_double(t) + " outside the estimation window");
    }
    return eval_knots(basis.knots, basis.K, t);
}

std::vector<bool> support_mask(const BasisMatrix& basis, double first_year, double last_year) {
    std::vector<bool> mask(static_cast<std::size_t>(basis.K - 1), false);
    for (int h = 0; h + 1 < basis.K; ++h) {
        mask[h] = basis.peaks[h] <= last_year && basis.peaks[h + 1] >= first_year;
    }
    return mask;
}

}  // namespace supplyshare
