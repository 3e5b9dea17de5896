#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "wce/diagnostics.hpp"
#include "wce/grid.hpp"

namespace wce {

struct CostReport {
    double stage1 = 0.0;
    double stage2 = 0.0;
    double total = 0.0;
};

/// One affine piece f(x) = a*x + b active on [x_lo, x_hi). Outermost pieces
/// may use +-infinity bounds.
struct AffinePiece {
    double a = 0.0;
    double b = 0.0;
    double x_lo = 0.0;
    double x_hi = 0.0;

    double eval(double x) const { return a * x + b; }
};

struct PiecewiseAffine {
    std::vector<AffinePiece> pieces;  // ordered, disjoint, tiling the line
    bool odd_symmetric = false;       // f(-x) == -f(x); samples use f(0) = 0

    int piece_at(double x) const;
    double eval(double x) const;
};

/// Total encoder map sampled on the source grid: f(x) = x + g(x). When the
/// encoder is exactly piecewise affine the structure is kept alongside the
/// samples; cost evaluation then aligns integration cells with the step
/// boundaries instead of trusting single samples at the jumps.
struct EncoderMap {
    std::vector<double> f;
    std::vector<double> g;
    std::optional<PiecewiseAffine> pieces;
};

struct DecoderTable {
    std::vector<double> h;  // sampled on the channel-output grid

    double eval(const Grid& y_grid, double y) const {
        return y_grid.interpolate(h, y);
    }
};

struct Problem {
    double k = 0.2;
    double sigma_x = 5.0;
    double noise_std = 1.0;
    Grid x_grid;
    Grid y_grid;      // spacing matches x_grid; wider by the noise half-width
    Grid noise_grid;  // [-noise_half_width, +], same spacing

    GaussianDensity source() const { return {0.0, sigma_x}; }
    GaussianDensity noise() const { return {0.0, noise_std}; }
};

Problem make_problem(double k, double sigma_x, int x_points = 12001,
                     double half_width_sigmas = 12.0,
                     double noise_half_width = 10.0, double noise_std = 1.0);

EncoderMap encoder_from_pieces(const PiecewiseAffine& pw, const Problem& p);
EncoderMap encoder_from_samples(std::vector<double> f_samples, const Problem& p);
EncoderMap affine_encoder(double slope, double intercept, const Problem& p);

/// MMSE decoder h(y) = E{X1 | Y=y} for the given encoder, sampled on y_grid.
/// Denominator underflow at extreme y falls back to the nearest dominant
/// source value and emits a diagnostic.
DecoderTable optimal_decoder(const EncoderMap& enc, const Problem& p,
                             Diagnostics* diag = nullptr);

/// k^2 E{g(X)^2} -- the control energy of the first stage.
double stage1_cost(const EncoderMap& enc, const Problem& p);

/// E{(f(X) - h(f(X)+N))^2} for the given decoder table.
double stage2_cost(const EncoderMap& enc, const DecoderTable& dec,
                   const Problem& p, Diagnostics* diag = nullptr);

/// Computes the optimal decoder internally; total = stage1 + stage2.
CostReport total_cost(const EncoderMap& enc, const Problem& p,
                      Diagnostics* diag = nullptr);

/// Best f(x) = lambda*x by golden-section over lambda in [0,1] (tolerance
/// 1e-10 in lambda); returns the encoder and its certified cost.
std::pair<EncoderMap, double> baseline_affine_optimal(const Problem& p);

/// f(x) = sigma_x * sgn(x), with f(0) = 0 at the grid midpoint.
EncoderMap baseline_one_step(const Problem& p);

struct TotalComparison {
    double trapezoid = 0.0;  // boundary-aligned trapezoid route (the workhorse)
    double gauss = 0.0;      // per-piece Gauss-Legendre x Gauss-Hermite route
    double gap = 0.0;
};

/// Evaluates the total cost of a piecewise encoder two independent ways
/// under a shared decoder table: the grid trapezoid scheme versus Gauss
/// panels in x paired with Gauss-Hermite in the noise.
TotalComparison cross_validate_total(const PiecewiseAffine& pw,
                                     const DecoderTable& dec, const Problem& p,
                                     int gauss_order = 800);

namespace detail {

struct PointMass {
    double z = 0.0;
    double w = 0.0;
};

/// Source-weighted channel-input masses (z = f(x), w = trapezoid weight x
/// source pdf). The piecewise builder aligns cells with step boundaries and
/// collapses constant pieces into single erf-weighted masses.
std::vector<PointMass> masses_from_samples(const EncoderMap& enc, const Problem& p);
std::vector<PointMass> masses_from_pieces(const PiecewiseAffine& pw, const Problem& p);

/// h(y) = sum w z phi(y-z) / sum w phi(y-z), truncated at the noise grid
/// half-width. Masses must stay in insertion order per equal z (sorted
/// stably); empty-window tails copy the nearest resolved value.
DecoderTable decoder_from_masses(std::vector<PointMass> masses, const Problem& p,
                                 Diagnostics* diag);

/// Noise kernel: trapezoid weight x unit-noise pdf per noise-grid node.
std::vector<double> noise_kernel(const Problem& p);

/// S(z) = sum_j K_j (z - h(z + n_j))^2, the stage-2 integrand at channel
/// input z under decoder h (linear interpolation between decoder samples).
double stage2_integrand(double z, const DecoderTable& dec, const Problem& p,
                        const std::vector<double>& kernel);

/// m0/m1/m2 = integral of (1, x, x^2) * N(0, sigma) over [lo, hi]; bounds may
/// be infinite.
struct IntervalMoments {
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
};
IntervalMoments gaussian_interval_moments(double lo, double hi, double sigma);

/// Piecewise stage costs without an EncoderMap wrapper. Stage 1 is exact
/// (closed-form Gaussian moments); stage 2 aligns trapezoid cells with the
/// piece boundaries.
double stage1_of_pieces(const PiecewiseAffine& pw, const Problem& p);
double stage2_of_pieces(const PiecewiseAffine& pw, const DecoderTable& dec,
                        const Problem& p);

}  // namespace detail

}  // namespace wce
