#pragma once

#include <vector>

#include "wce/annealer.hpp"

namespace wce::engine {

/// Discrete free-energy machinery behind the annealing loop.
///
/// The stage-2 part of every model cost is expressed through two decoder
/// convolutions sampled on the y grid and linearly interpolated:
///   C1 = K * h,  C2 = K * h^2,  S(z) = z^2 - 2 z C1(z) + C2(z)
/// with K the noise kernel. Under exactly this definition the mass-binned
/// conditional-mean decoder is the exact minimizer of the decoder block, the
/// Gibbs rows are the exact minimizer of the association block, and the
/// backtracking model step can only descend, so the free energy is
/// non-increasing across every block update by construction.
///
/// With symmetry enabled all state is computed on the x >= 0 half and
/// mirrored exactly (models in (a,b)/(a,-b) pairs, odd decoder), keeping the
/// run bitwise mirror-symmetric.
class SoftEngine {
  public:
    SoftEngine(const Problem& p, const AnnealConfig& cfg, AnnealState& state);

    double free_energy_value() const;
    double expected_cost_value() const;
    double entropy_value() const;

    void step_associations();
    void step_models();
    void step_decoder();

    /// Refreshes the per-point model costs after external model changes.
    void rebuild_cost_matrix();

    void write_report();

    double model_cost(int i, int m) const {
        return D_[static_cast<size_t>(i) * n_models() + m];
    }
    /// Model cost at arbitrary x (used by boundary bisection).
    double model_cost_at(double x, const LocalModel& m) const;
    /// Expected cost of argmin-assignments under the current tables.
    double hard_assignment_cost() const;

    int n_models() const { return state_.models.count(); }

  private:
    void refresh_weights();
    void refresh_convolutions();
    double stage2_table(double z) const;  // S(z) from the C tables
    double partial_model_cost(const std::vector<double>& w, double a, double b) const;
    void convolve(const std::vector<double>& field, std::vector<double>& out,
                  bool odd_mirror) const;
    void deposit(std::vector<double>& mass, std::vector<double>& weighted,
                 double z, double w) const;
    void gather_weights(int m, std::vector<double>& w) const;

    struct ParamGroup {
        std::vector<int> members;  // representative-side model indices
        bool pin_intercept = false;
    };
    std::vector<ParamGroup> parameter_groups() const;

    const Problem& p_;
    const AnnealConfig& cfg_;
    AnnealState& state_;

    int n_x_ = 0, n_y_ = 0, mid_x_ = 0, mid_y_ = 0;
    std::vector<double> xw_;      // trapezoid weight x source pdf
    std::vector<double> kernel_;  // trapezoid weight x noise pdf
    int kernel_mid_ = 0;

    std::vector<double> c1_, c2_;  // decoder convolutions on the y grid
    std::vector<double> D_;        // per-point model costs, row-major
};

}  // namespace wce::engine
