#pragma once

#include <string>
#include <vector>

#include "wce/annealer.hpp"
#include "wce/problem.hpp"

namespace wce {

/// Deterministic piecewise-affine encoder with explicit step boundaries,
/// certified on the grids of the problem it was extracted against.
struct StepSolution {
    PiecewiseAffine pw;
    std::string label;         // "3-step", "2.5-step", ...
    CostReport certified;
    bool fragmented = false;   // a model won disjoint intervals
};

/// Argmin-cost assignment of the terminal soft state. Near-duplicate models
/// are coalesced first; boundaries between adjacent winners are refined by
/// bisection on the cost difference; the decoder is recomputed for the hard
/// encoder and the cost certified on cert_problem's grids.
StepSolution harden(const AnnealState& state, const AnnealConfig& cfg,
                    const Problem& opt_problem, const Problem& cert_problem,
                    Diagnostics* diag = nullptr);

struct PolishOptions {
    int max_sweeps = 200;
    double tol = 1e-10;  // stop when a sweep improves the total by less
};

/// Zero-temperature coordinate descent over slopes, intercepts and boundary
/// locations; the decoder is re-optimized once per sweep. The certified cost
/// never increases (on increase the input solution is returned).
StepSolution polish(const StepSolution& sol, const Problem& p,
                    const PolishOptions& opts = {}, Diagnostics* diag = nullptr);

/// "n-step" counting pieces on the positive axis, plus 0.5 when a piece
/// straddles the origin.
std::string classify(const StepSolution& sol);

struct DifferenceReport {
    std::vector<double> x;        // sample points
    std::vector<double> delta_f;  // f_a - f_b
    std::vector<double> boundary_deltas;  // matched interior boundaries, a - b
    double cost_delta = 0.0;      // total_a - total_b on the given problem
};

DifferenceReport compare(const StepSolution& a, const StepSolution& b,
                         const Problem& p);

}  // namespace wce
