#include "wce/annealer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "soft_engine.hpp"

namespace wce {

namespace {

double resolved_t_min(const AnnealConfig& cfg, double t_init) {
    return cfg.T_min > 0.0 ? cfg.T_min : 1e-7 * t_init;
}

int effective_count(const AnnealState& state, const AnnealConfig& cfg) {
    return effective_model_count(state.models, cfg.merge_tol_a,
                                 cfg.resolved_merge_tol_b(state.sigma_x));
}

void freeze_duplication(AnnealState& state, const AnnealConfig& cfg) {
    state.duplication_frozen = true;
    // Lockstep classes: models within the merge tolerances share every
    // subsequent parameter step, so the effective count cannot drift.
    const int n = state.models.count();
    const double tol_b = cfg.resolved_merge_tol_b(state.sigma_x);
    std::vector<int> root(n);
    std::iota(root.begin(), root.end(), 0);
    std::function<int(int)> find = [&](int v) {
        while (root[v] != v) v = root[v] = root[root[v]];
        return v;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(state.models.models[i].a - state.models.models[j].a) <= cfg.merge_tol_a &&
                std::abs(state.models.models[i].b - state.models.models[j].b) <= tol_b)
                root[find(i)] = find(j);
    state.tie_group.resize(n);
    std::vector<int> compact(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        const int r = find(i);
        if (compact[r] < 0) compact[r] = next++;
        state.tie_group[i] = compact[r];
    }
}

}  // namespace

AnnealState anneal_init(const AnnealConfig& cfg, const Problem& p, Diagnostics* diag) {
    if (!(cfg.cooling_factor > 0.0 && cfg.cooling_factor < 1.0))
        throw std::invalid_argument("anneal_init: cooling_factor must be in (0,1)");
    if (cfg.max_models < 1)
        throw std::invalid_argument("anneal_init: max_models must be >= 1");
    if (cfg.T_init > 0.0 && cfg.T_min > 0.0 && cfg.T_min >= cfg.T_init)
        throw std::invalid_argument("anneal_init: T_min must be below T_init");

    auto [affine_enc, affine_cost] = baseline_affine_optimal(p);
    const double slope = affine_enc.pieces->pieces.front().a;

    AnnealState state;
    state.sigma_x = p.sigma_x;
    state.models.max_models = cfg.max_models;
    state.models.models = {LocalModel{slope, 0.0}};
    state.partner = {0};
    state.assoc = AssociationMatrix::single_model(p.x_grid.n_points);
    state.T = 1.0;  // placeholder until the initial cost is known

    engine::SoftEngine eng(p, cfg, state);
    eng.step_decoder();
    const double d0 = eng.expected_cost_value();
    state.T = cfg.T_init > 0.0 ? cfg.T_init : 10.0 * d0;
    eng.write_report();

    state.history.push_back({state.T, state.report.F, state.report.D, state.report.H,
                             1, 1, 0, false});
    if (diag && affine_cost > d0 + 1e-6)
        diag->warn("anneal_init: grid-certified affine cost differs from initial D");
    return state;
}

AnnealState duplicate_and_perturb(AnnealState state, const AnnealConfig& cfg,
                                  std::mt19937_64& rng) {
    if (state.duplication_frozen) {
        state.at_capacity = false;
        return state;
    }
    const int n0 = state.models.count();
    if (n0 >= cfg.max_models) {
        state.at_capacity = true;
        return state;
    }
    state.at_capacity = false;
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double db_scale = cfg.perturb_scale * state.sigma_x;

    auto split_mass = [&](int orig, int copy) {
        AssociationMatrix& a = state.assoc;
        for (int i = 0; i < a.n_x; ++i) {
            const double half = 0.5 * a.at(i, orig);
            a.at(i, orig) = half;
            a.at(i, copy) = half;
        }
    };
    auto add_column = [&]() {
        AssociationMatrix grown;
        grown.n_x = state.assoc.n_x;
        grown.n_models = state.assoc.n_models + 1;
        grown.p.assign(static_cast<size_t>(grown.n_x) * grown.n_models, 0.0);
        for (int i = 0; i < grown.n_x; ++i)
            for (int m = 0; m < state.assoc.n_models; ++m)
                grown.at(i, m) = state.assoc.at(i, m);
        state.assoc = std::move(grown);
    };

    if (!cfg.symmetry) {
        for (int m = 0; m < n0; ++m) {
            if (state.models.count() >= cfg.max_models) {
                state.at_capacity = true;
                break;
            }
            const double u = unit(rng);
            const double up = unit(rng);
            LocalModel copy = state.models.models[m];
            copy.b += db_scale * u;
            copy.a += cfg.perturb_scale * up;
            add_column();
            state.models.models.push_back(copy);
            state.partner.push_back(state.models.count() - 1);
            split_mass(m, state.models.count() - 1);
        }
        return state;
    }

    // Symmetric mode: groups duplicate as mirrored units. A self-symmetric
    // model splits into a +-pair (the original takes the mirrored
    // perturbation so the model set stays exactly odd).
    std::vector<char> seen(n0, 0);
    for (int m = 0; m < n0; ++m) {
        if (seen[m]) continue;
        const int q = state.partner[m];
        seen[m] = seen[q] = 1;
        if (q == m) {
            if (state.models.count() + 1 > cfg.max_models) {
                state.at_capacity = true;
                break;
            }
            const double u = unit(rng);
            const double up = unit(rng);
            LocalModel& orig = state.models.models[m];
            orig.a += cfg.perturb_scale * up;
            const double shift = db_scale * u;
            orig.b = shift;
            LocalModel mirror{orig.a, -shift};
            add_column();
            state.models.models.push_back(mirror);
            const int copy = state.models.count() - 1;
            state.partner[m] = copy;
            state.partner.push_back(m);
            split_mass(m, copy);
        } else {
            if (state.models.count() + 2 > cfg.max_models) {
                state.at_capacity = true;
                break;
            }
            const int rep = state.models.models[m].b >= state.models.models[q].b ? m : q;
            const int mir = state.partner[rep];
            const double u = unit(rng);
            const double up = unit(rng);
            LocalModel copy_rep = state.models.models[rep];
            copy_rep.b += db_scale * u;
            copy_rep.a += cfg.perturb_scale * up;
            LocalModel copy_mir{copy_rep.a, -copy_rep.b};
            add_column();
            state.models.models.push_back(copy_rep);
            const int idx_rep = state.models.count() - 1;
            state.partner.push_back(idx_rep);
            add_column();
            state.models.models.push_back(copy_mir);
            const int idx_mir = state.models.count() - 1;
            state.partner[idx_rep] = idx_mir;
            state.partner.push_back(idx_rep);
            split_mass(rep, idx_rep);
            split_mass(mir, idx_mir);
        }
    }
    return state;
}

AnnealState minimize_free_energy(AnnealState state, const AnnealConfig& cfg,
                                 const Problem& p, Diagnostics* diag) {
    if (!(state.T > 0.0))
        throw std::invalid_argument("minimize_free_energy: T must be positive");
    engine::SoftEngine eng(p, cfg, state);

    const auto guard = [&](double before, double after, const char* step, int iter) {
        if (after > before + 1e-9 * (1.0 + std::abs(before))) {
            std::ostringstream os;
            os << "free energy increased in the " << step << " step: T=" << state.T
               << " iter=" << iter << " F " << before << " -> " << after;
            throw MonotonicityError(os.str());
        }
    };

    double f_prev = eng.free_energy_value();
    int iter = 0;
    for (; iter < cfg.max_inner_iters; ++iter) {
        const double f0 = f_prev;

        eng.step_associations();
        const double f1 = eng.free_energy_value();
        state.trace.push_back({state.temp_index, iter, BlockStep::Associations, f0, f1});
        guard(f0, f1, "association", iter);

        eng.step_models();
        eng.rebuild_cost_matrix();
        const double f2 = eng.free_energy_value();
        state.trace.push_back({state.temp_index, iter, BlockStep::Models, f1, f2});
        guard(f1, f2, "model", iter);

        eng.step_decoder();
        const double f3 = eng.free_energy_value();
        state.trace.push_back({state.temp_index, iter, BlockStep::Decoder, f2, f3});
        guard(f2, f3, "decoder", iter);

        f_prev = f3;
        if (std::abs(f3 - f0) < cfg.convergence_tol * (1.0 + std::abs(f3))) break;
    }
    if (iter >= cfg.max_inner_iters)
        diag_warn(diag, "minimize_free_energy: iteration cap reached at T=" +
                            std::to_string(state.T));
    state.last_inner_iters = std::min(iter + 1, cfg.max_inner_iters);
    eng.write_report();
    return state;
}

ModelSet gradient_step_models(const AnnealState& state, const AnnealConfig& cfg,
                              const Problem& p) {
    AnnealState scratch = state;
    engine::SoftEngine eng(p, cfg, scratch);
    eng.step_models();
    return scratch.models;
}

AnnealState cool(AnnealState state, const AnnealConfig& cfg) {
    state.history.push_back({state.T, state.report.F, state.report.D, state.report.H,
                             effective_count(state, cfg), state.models.count(),
                             state.last_inner_iters, state.duplication_frozen});
    state.T *= cfg.cooling_factor;
    ++state.temp_index;
    return state;
}

AnnealState anneal_run(const AnnealConfig& cfg, const Problem& p, Diagnostics* diag,
                       const std::function<void(const AnnealState&)>& on_cool) {
    AnnealState state = anneal_init(cfg, p, diag);
    std::mt19937_64 rng(cfg.rng_seed);
    const double t_min = resolved_t_min(cfg, state.T);

    if (cfg.target_effective_models > 0 &&
        effective_count(state, cfg) >= cfg.target_effective_models)
        freeze_duplication(state, cfg);

    double prev_h = -1.0;
    while (state.T >= t_min) {
        if (!state.duplication_frozen)
            state = duplicate_and_perturb(std::move(state), cfg, rng);
        state = minimize_free_energy(std::move(state), cfg, p, diag);
        if (cfg.target_effective_models > 0 && !state.duplication_frozen &&
            effective_count(state, cfg) >= cfg.target_effective_models)
            freeze_duplication(state, cfg);

        // Converged entropy usually shrinks with the temperature; exceptions
        // are logged, not enforced (they accompany phase transitions).
        if (prev_h >= 0.0 && state.report.H > prev_h + 1e-6)
            diag_warn(diag, "entropy rose between temperatures near T=" +
                                std::to_string(state.T));
        prev_h = state.report.H;

        state = cool(std::move(state), cfg);
        if (on_cool) on_cool(state);
    }
    return state;
}

FreeEnergyReport recompute_report(const AnnealState& state, const AnnealConfig& cfg,
                                  const Problem& p) {
    AnnealState scratch = state;
    engine::SoftEngine eng(p, cfg, scratch);
    eng.write_report();
    return scratch.report;
}

std::vector<PhaseTransition> detect_phase_transitions(
    const std::vector<HistoryEntry>& history) {
    std::vector<PhaseTransition> out;
    for (size_t i = 1; i < history.size(); ++i)
        if (history[i].effective_models > history[i - 1].effective_models)
            out.push_back({history[i].T, history[i - 1].effective_models,
                           history[i].effective_models});
    return out;
}

}  // namespace wce
