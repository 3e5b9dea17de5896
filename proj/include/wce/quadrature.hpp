#pragma once

#include <functional>
#include <vector>

#include "wce/diagnostics.hpp"
#include "wce/grid.hpp"

namespace wce {

/// E{f(X)} for X ~ g, evaluated by composite trapezoid over the grid of the
/// sampled values. The integrand is taken as 0 outside the grid (Gaussian
/// tails beyond the covered range are dropped, not extrapolated).
///
/// Preconditions: one sample per grid point; the grid should cover at least
/// 10 standard deviations of g. Coverage below 6 std emits a warning through
/// diag; NaN samples throw.
double expect_over_density(const std::vector<double>& f_samples,
                           const GaussianDensity& g, const Grid& grid,
                           Diagnostics* diag = nullptr);

/// Same expectation for a callable integrand, sampled on the grid.
double expect_over_density(const std::function<double(double)>& f,
                           const GaussianDensity& g, const Grid& grid,
                           Diagnostics* diag = nullptr);

/// Nodes/weights for integral_{-inf}^{inf} e^{-t^2} f(t) dt (physicists'
/// Hermite weight). Computed once per order and cached.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussRule& gauss_hermite_rule(int n);

/// Nodes/weights for integral_{-1}^{1} f(t) dt.
const GaussRule& gauss_legendre_rule(int n);

/// E{f(X)} for X ~ g via Gauss-Hermite (whole real line; f must be smooth
/// for the rule to converge quickly).
double gauss_hermite_expectation(const std::function<double(double)>& f,
                                 const GaussianDensity& g, int order = 200);

struct QuadratureComparison {
    double trapezoid = 0.0;
    double gauss = 0.0;
    double gap = 0.0;
};

/// Computes E{f(X)} two independent ways (trapezoid on the grid vs a Gauss
/// rule) and reports both values and their absolute gap.
///
/// With no breakpoints the Gauss route is plain Gauss-Hermite. Integrands
/// with known kinks or jumps (piecewise encoders) pass their breakpoints;
/// the Gauss route then integrates f * pdf piecewise with Gauss-Legendre
/// panels between consecutive breakpoints, which restores fast convergence.
QuadratureComparison cross_validate_quadrature(
    const std::function<double(double)>& f, const GaussianDensity& g,
    const Grid& grid, int gauss_order = 200,
    const std::vector<double>& breakpoints = {});

/// Convergence check exposed as a library call: |E on grid - E on a grid
/// with 2x density|. Used to pin quadrature tolerances.
double refinement_delta(const std::function<double(double)>& f,
                        const GaussianDensity& g, const Grid& grid);

}  // namespace wce
