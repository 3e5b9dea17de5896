#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "wce/model.hpp"
#include "wce/problem.hpp"

namespace wce {

struct AnnealConfig {
    double T_init = -1.0;        // <= 0: auto, 10 x initial expected cost
    double cooling_factor = 0.97;
    double T_min = -1.0;         // <= 0: auto, 1e-7 x resolved T_init
    int max_models = 24;
    double perturb_scale = 0.01;
    double convergence_tol = 1e-9;
    int max_inner_iters = 600;
    double gradient_step = 1.0;
    double merge_tol_a = 1e-4;
    double merge_tol_b = -1.0;   // <= 0: auto, 1e-3 x sigma_x
    std::uint64_t rng_seed = 1;
    bool symmetry = true;
    int target_effective_models = 0;  // 0: keep growing until T_min

    double resolved_merge_tol_b(double sigma_x) const {
        return merge_tol_b > 0.0 ? merge_tol_b : 1e-3 * sigma_x;
    }
};

struct HistoryEntry {
    double T = 0.0;
    double F = 0.0;
    double D = 0.0;
    double H = 0.0;
    int effective_models = 0;
    int live_models = 0;
    int inner_iters = 0;
    bool duplication_frozen = false;
};

enum class BlockStep { Associations, Models, Decoder };

struct StepTrace {
    int temp_index = 0;
    int inner_iter = 0;
    BlockStep step = BlockStep::Associations;
    double F_before = 0.0;
    double F_after = 0.0;
};

struct PhaseTransition {
    double T = 0.0;
    int old_count = 0;
    int new_count = 0;
};

/// Thrown when a fixed-temperature minimization detects a free-energy
/// increase beyond tolerance; carries the offending step description.
struct MonotonicityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AnnealState {
    double T = 0.0;
    ModelSet models;
    AssociationMatrix assoc;
    DecoderTable dec;
    FreeEnergyReport report;
    std::vector<HistoryEntry> history;
    std::vector<StepTrace> trace;

    // Mirror partner per model (own index for self-symmetric models).
    std::vector<int> partner;
    // Lockstep class per model once duplication is frozen; empty before.
    std::vector<int> tie_group;
    bool duplication_frozen = false;
    bool at_capacity = false;
    int temp_index = 0;
    int last_inner_iters = 0;
    double sigma_x = 1.0;  // copied from the problem at init
};

/// Recomputes the free-energy report of a state from its tables (the same
/// discrete functional the annealer minimizes).
FreeEnergyReport recompute_report(const AnnealState& state, const AnnealConfig& cfg,
                                  const Problem& p);

/// Single model at the optimal affine slope, uniform trivial associations,
/// decoder computed, temperature resolved.
AnnealState anneal_init(const AnnealConfig& cfg, const Problem& p,
                        Diagnostics* diag = nullptr);

/// Copies every live model (up to the cap, lowest groups first), perturbs the
/// copies with the seeded generator and splits association mass equally.
AnnealState duplicate_and_perturb(AnnealState state, const AnnealConfig& cfg,
                                  std::mt19937_64& rng);

/// Fixed-temperature block minimization: associations, model parameters,
/// decoder, until |dF| < tol * (1 + |F|) or the iteration cap.
AnnealState minimize_free_energy(AnnealState state, const AnnealConfig& cfg,
                                 const Problem& p, Diagnostics* diag = nullptr);

/// One finite-difference descent pass over the model parameters with the
/// associations and decoder held fixed.
ModelSet gradient_step_models(const AnnealState& state, const AnnealConfig& cfg,
                              const Problem& p);

/// Lowers the temperature and appends the converged entry to the history.
AnnealState cool(AnnealState state, const AnnealConfig& cfg);

/// Full schedule: init, then duplicate/minimize/cool until T < T_min.
/// Duplication stops once the effective model count reaches the target.
AnnealState anneal_run(const AnnealConfig& cfg, const Problem& p,
                       Diagnostics* diag = nullptr,
                       const std::function<void(const AnnealState&)>& on_cool = {});

std::vector<PhaseTransition> detect_phase_transitions(
    const std::vector<HistoryEntry>& history);

}  // namespace wce
