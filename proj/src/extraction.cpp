#include "wce/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "soft_engine.hpp"

namespace wce {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Coalesced {
    ModelSet models;
    std::vector<int> partner;
    AssociationMatrix assoc;  // clone columns merged
};

// Merge near-duplicate models into their association-mass-weighted means,
// preserving exact mirror pairing in symmetric mode.
Coalesced coalesce_models(const AnnealState& state, const AnnealConfig& cfg,
                          const Problem& p) {
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
            if (std::abs(state.models.models[i].a - state.models.models[j].a) <=
                    cfg.merge_tol_a &&
                std::abs(state.models.models[i].b - state.models.models[j].b) <= tol_b)
                root[find(i)] = find(j);

    std::vector<int> cls(n, -1);
    int n_cls = 0;
    for (int i = 0; i < n; ++i) {
        const int r = find(i);
        if (cls[r] < 0) cls[r] = n_cls++;
        cls[i] = cls[r];
    }

    std::vector<double> xw(state.assoc.n_x);
    for (int i = 0; i < state.assoc.n_x; ++i)
        xw[i] = p.x_grid.trap_weight(i) * gaussian_pdf(p.x_grid.points[i], p.source());

    std::vector<double> mass(n_cls, 0.0), acc_a(n_cls, 0.0), acc_b(n_cls, 0.0);
    for (int m = 0; m < n; ++m) {
        double mm = 0.0;
        for (int i = 0; i < state.assoc.n_x; ++i) mm += xw[i] * state.assoc.at(i, m);
        mass[cls[m]] += mm;
        acc_a[cls[m]] += mm * state.models.models[m].a;
        acc_b[cls[m]] += mm * state.models.models[m].b;
    }

    Coalesced out;
    out.models.max_models = state.models.max_models;
    out.models.models.resize(n_cls);
    for (int c = 0; c < n_cls; ++c) {
        const double w = mass[c] > 0.0 ? mass[c] : 1.0;
        out.models.models[c] = {acc_a[c] / w, acc_b[c] / w};
    }

    // Class-level mirror pairing; self-mirrored classes pin b to 0.
    out.partner.assign(n_cls, -1);
    for (int m = 0; m < n; ++m) {
        const int c = cls[m], q = cls[state.partner[m]];
        out.partner[c] = q;
    }
    if (cfg.symmetry) {
        for (int c = 0; c < n_cls; ++c) {
            const int q = out.partner[c];
            if (q == c) {
                out.models.models[c].b = 0.0;
            } else if (c < q) {
                const bool c_pos = out.models.models[c].b >= out.models.models[q].b;
                const int rep = c_pos ? c : q, mir = c_pos ? q : c;
                out.models.models[mir].a = out.models.models[rep].a;
                out.models.models[mir].b = -out.models.models[rep].b;
            }
        }
    }

    out.assoc.n_x = state.assoc.n_x;
    out.assoc.n_models = n_cls;
    out.assoc.p.assign(static_cast<size_t>(out.assoc.n_x) * n_cls, 0.0);
    for (int i = 0; i < out.assoc.n_x; ++i)
        for (int m = 0; m < n; ++m) out.assoc.at(i, cls[m]) += state.assoc.at(i, m);
    return out;
}

}  // namespace

StepSolution harden(const AnnealState& state, const AnnealConfig& cfg,
                    const Problem& opt_problem, const Problem& cert_problem,
                    Diagnostics* diag) {
    Coalesced co = coalesce_models(state, cfg, opt_problem);

    AnnealState scratch;
    scratch.T = state.T;
    scratch.sigma_x = state.sigma_x;
    scratch.models = co.models;
    scratch.partner = co.partner;
    scratch.assoc = co.assoc;
    scratch.dec = state.dec;
    engine::SoftEngine eng(opt_problem, cfg, scratch);

    // Hard assignment can only improve on the soft average under the same
    // tables.
    const double soft_d = eng.expected_cost_value();
    const double hard_d = eng.hard_assignment_cost();
    if (hard_d > soft_d + 1e-12 * (1.0 + std::abs(soft_d)))
        throw std::logic_error("harden: argmin assignment above the soft cost");

    const Grid& xg = opt_problem.x_grid;
    const int M = co.models.count();
    const int start = cfg.symmetry ? xg.mid() : 0;

    auto winner = [&](int i) {
        int best = 0;
        double dmin = eng.model_cost(i, 0);
        for (int m = 1; m < M; ++m) {
            const double d = eng.model_cost(i, m);
            if (d < dmin) {
                dmin = d;
                best = m;
            }
        }
        return best;
    };

    std::vector<int> run_model;
    std::vector<double> run_end;  // refined boundary after each run (last: +inf)
    int current = winner(start);
    run_model.push_back(current);
    for (int i = start + 1; i < xg.n_points; ++i) {
        const int w = winner(i);
        if (w == current) continue;
        // The argmin switch brackets a zero of the cost difference.
        const LocalModel& mu = co.models.models[current];
        const LocalModel& mv = co.models.models[w];
        double lo = xg.points[i - 1], hi = xg.points[i];
        auto diff = [&](double x) {
            return eng.model_cost_at(x, mu) - eng.model_cost_at(x, mv);
        };
        double flo = diff(lo);
        if (flo > 0.0) {
            // Already crossed at the left sample (ties at the sample).
            run_end.push_back(lo);
        } else {
            for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
                const double mid = 0.5 * (lo + hi);
                (diff(mid) <= 0.0 ? lo : hi) = mid;
            }
            run_end.push_back(0.5 * (lo + hi));
        }
        run_model.push_back(w);
        current = w;
    }
    run_end.push_back(kInf);

    std::map<int, int> wins;
    bool fragmented = false;
    for (int m : run_model)
        if (++wins[m] > 1) fragmented = true;
    if (fragmented)
        diag_warn(diag, "harden: a model won disjoint intervals");

    PiecewiseAffine pw;
    pw.odd_symmetric = cfg.symmetry;
    if (cfg.symmetry) {
        const bool straddle = co.partner[run_model.front()] == run_model.front();
        std::vector<AffinePiece> pos;
        double lo = 0.0;
        for (size_t r = 0; r < run_model.size(); ++r) {
            const LocalModel& m = co.models.models[run_model[r]];
            pos.push_back({m.a, m.b, lo, run_end[r]});
            lo = run_end[r];
        }
        const size_t first_mirrored = straddle ? 1 : 0;
        for (size_t r = run_model.size(); r-- > first_mirrored;) {
            const AffinePiece& q = pos[r];
            pw.pieces.push_back({q.a, -q.b, -q.x_hi, -q.x_lo});
        }
        if (straddle) {
            AffinePiece center = pos[0];
            center.x_lo = -center.x_hi;
            center.b = 0.0;
            pw.pieces.push_back(center);
            for (size_t r = 1; r < pos.size(); ++r) pw.pieces.push_back(pos[r]);
        } else {
            for (const AffinePiece& q : pos) pw.pieces.push_back(q);
        }
        pw.pieces.front().x_lo = -kInf;
    } else {
        double lo = -kInf;
        for (size_t r = 0; r < run_model.size(); ++r) {
            const LocalModel& m = co.models.models[run_model[r]];
            pw.pieces.push_back({m.a, m.b, lo, run_end[r]});
            lo = run_end[r];
        }
    }

    StepSolution sol;
    sol.pw = pw;
    sol.fragmented = fragmented;
    sol.certified = total_cost(encoder_from_pieces(pw, cert_problem), cert_problem, diag);
    sol.label = classify(sol);
    if (sol.certified.total > soft_d + 1e-4)
        diag_warn(diag, "harden: certified cost noticeably above the soft cost");
    return sol;
}

namespace {

// Parameter pack for polish: representative pieces plus interior boundaries;
// symmetric solutions keep only the non-negative side and mirror the rest.
struct ParamPack {
    bool symmetric = false;
    bool straddle = false;
    std::vector<AffinePiece> rep;  // ordered outward from 0 (sym) or full list
    std::vector<double> bounds;    // x_hi of rep[j] for j < rep.size()-1

    static ParamPack from(const PiecewiseAffine& pw) {
        ParamPack pk;
        pk.symmetric = pw.odd_symmetric;
        if (pk.symmetric) {
            for (const AffinePiece& q : pw.pieces)
                if (q.x_hi > 0.0) pk.rep.push_back(q);
            pk.straddle = pk.rep.front().x_lo < 0.0;
        } else {
            pk.rep = pw.pieces;
        }
        for (size_t j = 0; j + 1 < pk.rep.size(); ++j) pk.bounds.push_back(pk.rep[j].x_hi);
        return pk;
    }

    bool valid() const {
        double prev = symmetric ? 0.0 : -kInf;
        for (double b : bounds) {
            if (!(b > prev)) return false;
            prev = b;
        }
        return true;
    }

    PiecewiseAffine build() const {
        PiecewiseAffine pw;
        pw.odd_symmetric = symmetric;
        std::vector<AffinePiece> pos = rep;
        for (size_t j = 0; j < pos.size(); ++j) {
            pos[j].x_lo = j == 0 ? (symmetric ? 0.0 : pos[0].x_lo) : bounds[j - 1];
            pos[j].x_hi = j + 1 < pos.size() ? bounds[j] : kInf;
        }
        if (!symmetric) {
            pos.front().x_lo = -kInf;
            pw.pieces = pos;
            return pw;
        }
        const size_t first_mirrored = straddle ? 1 : 0;
        for (size_t r = pos.size(); r-- > first_mirrored;)
            pw.pieces.push_back({pos[r].a, -pos[r].b, -pos[r].x_hi, -pos[r].x_lo});
        if (straddle) {
            AffinePiece center = pos[0];
            center.x_lo = -center.x_hi;
            center.b = 0.0;
            pw.pieces.push_back(center);
            for (size_t r = 1; r < pos.size(); ++r) pw.pieces.push_back(pos[r]);
        } else {
            for (const AffinePiece& q : pos) pw.pieces.push_back(q);
        }
        pw.pieces.front().x_lo = -kInf;
        return pw;
    }

    // Pointers to the scalar coordinates polish sweeps over.
    std::vector<double*> coordinates() {
        std::vector<double*> out;
        for (size_t j = 0; j < rep.size(); ++j) {
            out.push_back(&rep[j].a);
            const bool pin_b = symmetric && straddle && j == 0;
            if (!pin_b) out.push_back(&rep[j].b);
        }
        for (double& b : bounds) out.push_back(&b);
        return out;
    }
};

}  // namespace

StepSolution polish(const StepSolution& sol, const Problem& p,
                    const PolishOptions& opts, Diagnostics* diag) {
    ParamPack pack = ParamPack::from(sol.pw);

    DecoderTable dec = detail::decoder_from_masses(
        detail::masses_from_pieces(sol.pw, p), p, diag);
    auto eval = [&](const ParamPack& pk) {
        if (!pk.valid()) return kInf;
        const PiecewiseAffine pw = pk.build();
        return detail::stage1_of_pieces(pw, p) + detail::stage2_of_pieces(pw, dec, p);
    };

    double best = eval(pack);
    const double entry_cost = best;

    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        const double sweep_start = best;
        for (double* v : pack.coordinates()) {
            const double f0 = eval(pack);
            const double v0 = *v;
            const double eps = 1e-6 * (1.0 + std::abs(v0));
            *v = v0 + eps;
            const double fp = eval(pack);
            *v = v0 - eps;
            const double fm = eval(pack);
            *v = v0;
            if (!std::isfinite(fp) || !std::isfinite(fm)) continue;
            const double g = (fp - fm) / (2.0 * eps);
            if (std::abs(g) < 1e-14 * (1.0 + std::abs(f0))) continue;

            double step = 0.1 * (1.0 + std::abs(v0));
            for (int halving = 0; halving <= 40; ++halving) {
                *v = v0 - step * g;
                const double ft = eval(pack);
                if (std::isfinite(ft) && ft <= f0 - 1e-4 * step * g * g) break;
                *v = v0;
                step *= 0.5;
            }
        }
        // Re-optimize the decoder once per sweep.
        dec = detail::decoder_from_masses(detail::masses_from_pieces(pack.build(), p),
                                          p, diag);
        const double after = eval(pack);
        if (after > sweep_start + 1e-12 * (1.0 + std::abs(sweep_start))) {
            diag_warn(diag, "polish: sweep failed to descend, stopping");
            break;
        }
        best = after;
        if (sweep_start - after < opts.tol) break;
    }

    StepSolution out;
    out.pw = pack.build();
    out.fragmented = sol.fragmented;
    out.certified = total_cost(encoder_from_pieces(out.pw, p), p, diag);
    out.label = classify(out);

    if (out.certified.total > entry_cost + 1e-11 * (1.0 + entry_cost)) {
        diag_warn(diag, "polish: cost increased, returning the input solution");
        StepSolution unchanged = sol;
        unchanged.certified = total_cost(encoder_from_pieces(sol.pw, p), p, diag);
        return unchanged;
    }
    return out;
}

std::string classify(const StepSolution& sol) {
    int positive = 0;
    bool straddle = false;
    for (const AffinePiece& q : sol.pw.pieces) {
        if (q.x_lo >= 0.0) ++positive;
        if (q.x_lo < 0.0 && q.x_hi > 0.0) straddle = true;
    }
    return straddle ? std::to_string(positive) + ".5-step"
                    : std::to_string(positive) + "-step";
}

DifferenceReport compare(const StepSolution& a, const StepSolution& b,
                         const Problem& p) {
    DifferenceReport r;
    r.x = p.x_grid.points;
    r.delta_f.resize(r.x.size());
    for (size_t i = 0; i < r.x.size(); ++i)
        r.delta_f[i] = a.pw.eval(r.x[i]) - b.pw.eval(r.x[i]);

    auto interior = [](const PiecewiseAffine& pw) {
        std::vector<double> out;
        for (size_t j = 0; j + 1 < pw.pieces.size(); ++j)
            out.push_back(pw.pieces[j].x_hi);
        return out;
    };
    const std::vector<double> ba = interior(a.pw), bb = interior(b.pw);
    if (ba.size() == bb.size())
        for (size_t j = 0; j < ba.size(); ++j) r.boundary_deltas.push_back(ba[j] - bb[j]);

    r.cost_delta = total_cost(encoder_from_pieces(a.pw, p), p).total -
                   total_cost(encoder_from_pieces(b.pw, p), p).total;
    return r;
}

}  // namespace wce
