#pragma once

#include <cstddef>
#include <vector>

namespace wce {

/// Uniform symmetric grid on [-half_width, half_width]. n_points is odd so
/// the midpoint lands exactly on 0; points are built as (i - mid) * spacing,
/// which makes the grid bitwise mirror-symmetric (points[mid+j] == -points[mid-j]).
struct Grid {
    double half_width = 0.0;
    int n_points = 0;
    double spacing = 0.0;
    std::vector<double> points;

    int mid() const { return (n_points - 1) / 2; }

    /// Largest index i with points[i] <= x, clamped to [0, n_points-2].
    int cell_index(double x) const;

    /// Linear interpolation of samples (defined on this grid) at x,
    /// clamped to the boundary values outside the range.
    double interpolate(const std::vector<double>& samples, double x) const;

    /// Composite-trapezoid weight of node i (spacing, halved at the ends).
    double trap_weight(int i) const {
        return (i == 0 || i == n_points - 1) ? 0.5 * spacing : spacing;
    }
};

/// Builds a Grid; throws std::invalid_argument for even n_points,
/// n_points < 3 or non-positive half_width.
Grid make_grid(double half_width, int n_points);

struct GaussianDensity {
    double mean = 0.0;
    double std = 1.0;
};

/// Normal pdf value at x; throws std::invalid_argument for std <= 0 or
/// non-finite arguments.
double gaussian_pdf(double x, const GaussianDensity& g);

}  // namespace wce
