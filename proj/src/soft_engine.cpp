#include "soft_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wce/parallel.hpp"

namespace wce::engine {

namespace {
constexpr double kProbFloor = 1e-300;
constexpr double kDenFloor = 1e-280;
}  // namespace

SoftEngine::SoftEngine(const Problem& p, const AnnealConfig& cfg, AnnealState& state)
    : p_(p), cfg_(cfg), state_(state) {
    n_x_ = p.x_grid.n_points;
    n_y_ = p.y_grid.n_points;
    mid_x_ = p.x_grid.mid();
    mid_y_ = p.y_grid.mid();
    if (state_.assoc.n_x != n_x_ || state_.assoc.n_models != n_models())
        throw std::invalid_argument("SoftEngine: association matrix shape mismatch");
    if (static_cast<int>(state_.partner.size()) != n_models())
        throw std::invalid_argument("SoftEngine: partner table shape mismatch");

    refresh_weights();
    if (static_cast<int>(state_.dec.h.size()) != n_y_)
        state_.dec.h.assign(n_y_, 0.0);
    refresh_convolutions();
    rebuild_cost_matrix();
}

void SoftEngine::refresh_weights() {
    xw_.resize(n_x_);
    for (int i = 0; i < n_x_; ++i)
        xw_[i] = p_.x_grid.trap_weight(i) *
                 gaussian_pdf(p_.x_grid.points[i], p_.source());
    kernel_ = detail::noise_kernel(p_);
    kernel_mid_ = p_.noise_grid.mid();
}

void SoftEngine::convolve(const std::vector<double>& field, std::vector<double>& out,
                          bool odd_mirror) const {
    out.assign(n_y_, 0.0);
    const int nk = static_cast<int>(kernel_.size());
    const int lo_l = cfg_.symmetry ? mid_y_ : 0;
    parallel_for(lo_l, n_y_, [&](int l) {
        const int jlo = std::max(0, kernel_mid_ - l);
        const int jhi = std::min(nk - 1, n_y_ - 1 - l + kernel_mid_);
        double acc = 0.0;
        const int base = l - kernel_mid_;
        for (int j = jlo; j <= jhi; ++j) acc += kernel_[j] * field[base + j];
        out[l] = acc;
    });
    if (cfg_.symmetry) {
        for (int l = mid_y_ + 1; l < n_y_; ++l)
            out[n_y_ - 1 - l] = odd_mirror ? -out[l] : out[l];
        if (odd_mirror) out[mid_y_] = 0.0;
    }
}

void SoftEngine::refresh_convolutions() {
    std::vector<double> h2(n_y_);
    for (int l = 0; l < n_y_; ++l) h2[l] = state_.dec.h[l] * state_.dec.h[l];
    convolve(state_.dec.h, c1_, /*odd_mirror=*/true);
    convolve(h2, c2_, /*odd_mirror=*/false);
}

double SoftEngine::stage2_table(double z) const {
    const Grid& yg = p_.y_grid;
    const double u = (z - yg.points.front()) / yg.spacing;
    double c1v, c2v;
    if (u <= 0.0) {
        c1v = c1_.front();
        c2v = c2_.front();
    } else if (u >= n_y_ - 1) {
        c1v = c1_.back();
        c2v = c2_.back();
    } else {
        const int j = static_cast<int>(u);
        const double frac = u - j;
        c1v = c1_[j] + frac * (c1_[j + 1] - c1_[j]);
        c2v = c2_[j] + frac * (c2_[j + 1] - c2_[j]);
    }
    return z * z - 2.0 * z * c1v + c2v;
}

double SoftEngine::model_cost_at(double x, const LocalModel& m) const {
    const double z = m.a * x + m.b;
    const double u = z - x;
    return p_.k * p_.k * u * u + stage2_table(z);
}

void SoftEngine::rebuild_cost_matrix() {
    const int M = n_models();
    D_.resize(static_cast<size_t>(n_x_) * M);
    const int lo_i = cfg_.symmetry ? mid_x_ : 0;
    parallel_for(lo_i, n_x_, [&](int i) {
        const double x = p_.x_grid.points[i];
        for (int m = 0; m < M; ++m)
            D_[static_cast<size_t>(i) * M + m] = model_cost_at(x, state_.models.models[m]);
    });
    if (cfg_.symmetry) {
        for (int i = mid_x_ + 1; i < n_x_; ++i) {
            const int im = n_x_ - 1 - i;
            for (int m = 0; m < M; ++m)
                D_[static_cast<size_t>(im) * M + m] =
                    D_[static_cast<size_t>(i) * M + state_.partner[m]];
        }
    }
}

void SoftEngine::step_associations() {
    const int M = n_models();
    const double T = state_.T;
    const int lo_i = cfg_.symmetry ? mid_x_ : 0;
    parallel_for(lo_i, n_x_, [&](int i) {
        const double* d = &D_[static_cast<size_t>(i) * M];
        double* row = &state_.assoc.p[static_cast<size_t>(i) * M];
        double dmin = d[0];
        for (int m = 1; m < M; ++m) dmin = std::min(dmin, d[m]);
        double sum = 0.0;
        if (T > 0.0) {
            for (int m = 0; m < M; ++m) {
                double e = std::exp(-(d[m] - dmin) / T);
                if (e < kProbFloor) e = 0.0;
                row[m] = e;
                sum += e;
            }
        } else {
            for (int m = 0; m < M; ++m) {
                row[m] = (d[m] == dmin && sum == 0.0) ? 1.0 : 0.0;
                sum += row[m];
            }
        }
        for (int m = 0; m < M; ++m) row[m] /= sum;
    });
    if (cfg_.symmetry) {
        for (int i = mid_x_ + 1; i < n_x_; ++i) {
            const int im = n_x_ - 1 - i;
            for (int m = 0; m < M; ++m)
                state_.assoc.at(im, m) = state_.assoc.at(i, state_.partner[m]);
        }
    }
}

void SoftEngine::deposit(std::vector<double>& mass, std::vector<double>& weighted,
                         double z, double w) const {
    const Grid& yg = p_.y_grid;
    const double u = (z - yg.points.front()) / yg.spacing;
    if (u <= 0.0) {
        mass[0] += w;
        weighted[0] += w * z;
    } else if (u >= n_y_ - 1) {
        mass[n_y_ - 1] += w;
        weighted[n_y_ - 1] += w * z;
    } else {
        const int j = static_cast<int>(u);
        const double frac = u - j;
        mass[j] += w * (1.0 - frac);
        mass[j + 1] += w * frac;
        weighted[j] += w * (1.0 - frac) * z;
        weighted[j + 1] += w * frac * z;
    }
}

void SoftEngine::step_decoder() {
    const int M = n_models();
    std::vector<double> mass(n_y_, 0.0), wz(n_y_, 0.0);

    // Mirror-paired deposit sharing one set of interpolation fractions, so
    // the fields stay exactly even/odd.
    auto deposit_pair = [&](double z, double w) {
        const Grid& yg = p_.y_grid;
        const double u = (z - yg.points.front()) / yg.spacing;
        if (u <= 0.0 || u >= n_y_ - 1) {
            const int j = (u <= 0.0) ? 0 : n_y_ - 1;
            mass[j] += w;
            wz[j] += w * z;
            mass[n_y_ - 1 - j] += w;
            wz[n_y_ - 1 - j] -= w * z;
            return;
        }
        const int j = static_cast<int>(u);
        const double frac = u - j;
        const double w0 = w * (1.0 - frac), w1 = w * frac;
        mass[j] += w0;
        mass[j + 1] += w1;
        wz[j] += w0 * z;
        wz[j + 1] += w1 * z;
        mass[n_y_ - 1 - j] += w0;
        mass[n_y_ - 2 - j] += w1;
        wz[n_y_ - 1 - j] -= w0 * z;
        wz[n_y_ - 2 - j] -= w1 * z;
    };

    if (cfg_.symmetry) {
        for (int i = mid_x_ + 1; i < n_x_; ++i) {
            const double x = p_.x_grid.points[i];
            for (int m = 0; m < M; ++m) {
                const double w = xw_[i] * state_.assoc.at(i, m);
                if (w <= 0.0) continue;
                deposit_pair(state_.models.models[m].a * x + state_.models.models[m].b, w);
            }
        }
        for (int m = 0; m < M; ++m) {
            const double w = xw_[mid_x_] * state_.assoc.at(mid_x_, m);
            if (w <= 0.0) continue;
            if (state_.partner[m] == m) {
                deposit(mass, wz, state_.models.models[m].b, w);
            } else if (state_.partner[m] > m) {
                deposit_pair(state_.models.models[m].b, w);
            }
        }
    } else {
        for (int i = 0; i < n_x_; ++i) {
            const double x = p_.x_grid.points[i];
            for (int m = 0; m < M; ++m) {
                const double w = xw_[i] * state_.assoc.at(i, m);
                if (w <= 0.0) continue;
                deposit(mass, wz, state_.models.models[m].a * x + state_.models.models[m].b, w);
            }
        }
    }

    std::vector<double> num(n_y_), den(n_y_);
    convolve(wz, num, /*odd_mirror=*/true);
    convolve(mass, den, /*odd_mirror=*/false);

    std::vector<double>& h = state_.dec.h;
    if (den[mid_y_] <= kDenFloor)
        throw std::runtime_error("soft decoder: total mass underflow");
    // Center outward, copying the last resolved value across underflowed tails.
    for (int l = mid_y_; l < n_y_; ++l)
        h[l] = (den[l] > kDenFloor) ? num[l] / den[l] : h[l - 1];
    if (cfg_.symmetry) {
        h[mid_y_] = 0.0;
        for (int l = mid_y_ + 1; l < n_y_; ++l) h[n_y_ - 1 - l] = -h[l];
    } else {
        for (int l = mid_y_ - 1; l >= 0; --l)
            h[l] = (den[l] > kDenFloor) ? num[l] / den[l] : h[l + 1];
    }

    refresh_convolutions();
    rebuild_cost_matrix();
}

void SoftEngine::gather_weights(int m, std::vector<double>& w) const {
    w.resize(n_x_);
    for (int i = 0; i < n_x_; ++i) w[i] = xw_[i] * state_.assoc.at(i, m);
}

double SoftEngine::partial_model_cost(const std::vector<double>& w, double a,
                                      double b) const {
    const double k2 = p_.k * p_.k;
    const double am1 = a - 1.0;
    double acc = 0.0;
    for (int i = 0; i < n_x_; ++i) {
        if (w[i] <= 0.0) continue;
        const double x = p_.x_grid.points[i];
        const double u = am1 * x + b;
        acc += w[i] * (k2 * u * u + stage2_table(a * x + b));
    }
    return acc;
}

std::vector<SoftEngine::ParamGroup> SoftEngine::parameter_groups() const {
    const int M = n_models();
    std::vector<ParamGroup> groups;
    auto is_rep_side = [&](int m) {
        const int q = state_.partner[m];
        if (q == m) return true;
        const double bm = state_.models.models[m].b;
        const double bq = state_.models.models[q].b;
        if (bm != bq) return bm > bq;
        return m < q;
    };

    if (state_.tie_group.empty()) {
        std::vector<char> seen(M, 0);
        for (int m = 0; m < M; ++m) {
            if (seen[m]) continue;
            const int q = state_.partner[m];
            seen[m] = seen[q] = 1;
            ParamGroup g;
            g.members = {is_rep_side(m) ? m : q};
            g.pin_intercept = cfg_.symmetry && q == m;
            groups.push_back(std::move(g));
        }
        return groups;
    }

    // Frozen schedule: near-duplicate models move in lockstep so the
    // effective count cannot drift.
    const int n_groups = *std::max_element(state_.tie_group.begin(),
                                           state_.tie_group.end()) + 1;
    groups.resize(n_groups);
    std::vector<char> self_mirrored(n_groups, 0);
    for (int m = 0; m < M; ++m) {
        const int g = state_.tie_group[m];
        if (is_rep_side(m)) groups[g].members.push_back(m);
        if (state_.tie_group[state_.partner[m]] == g) self_mirrored[g] = 1;
    }
    std::vector<ParamGroup> out;
    for (int g = 0; g < n_groups; ++g) {
        if (groups[g].members.empty()) continue;
        groups[g].pin_intercept = cfg_.symmetry && self_mirrored[g];
        out.push_back(std::move(groups[g]));
    }
    return out;
}

void SoftEngine::step_models() {
    const auto groups = parameter_groups();
    std::vector<std::vector<double>> weights;
    for (const ParamGroup& grp : groups) {
        weights.resize(grp.members.size());
        double mean_a = 0.0, mean_b = 0.0;
        for (size_t c = 0; c < grp.members.size(); ++c) {
            gather_weights(grp.members[c], weights[c]);
            mean_a += std::abs(state_.models.models[grp.members[c]].a);
            mean_b += std::abs(state_.models.models[grp.members[c]].b);
        }
        mean_a /= grp.members.size();
        mean_b /= grp.members.size();

        auto objective = [&](double da, double db) {
            double acc = 0.0;
            for (size_t c = 0; c < grp.members.size(); ++c) {
                const LocalModel& m = state_.models.models[grp.members[c]];
                acc += partial_model_cost(weights[c], m.a + da, m.b + db);
            }
            return acc;
        };

        const double f0 = objective(0.0, 0.0);
        const double ea = 1e-6 * (1.0 + mean_a);
        const double eb = 1e-6 * (1.0 + mean_b);
        const double ga = (objective(ea, 0.0) - objective(-ea, 0.0)) / (2.0 * ea);
        const double gb = grp.pin_intercept
                              ? 0.0
                              : (objective(0.0, eb) - objective(0.0, -eb)) / (2.0 * eb);
        const double gnorm2 = ga * ga + gb * gb;
        if (gnorm2 < 1e-24 * (1.0 + f0) * (1.0 + f0)) continue;

        double step = cfg_.gradient_step;
        double da = 0.0, db = 0.0;
        for (int halving = 0; halving <= 30; ++halving) {
            const double ta = -step * ga, tb = -step * gb;
            const double ft = objective(ta, tb);
            if (std::isfinite(ft) && ft <= f0 - 1e-4 * step * gnorm2) {
                da = ta;
                db = tb;
                break;
            }
            step *= 0.5;
        }
        if (da == 0.0 && db == 0.0) continue;

        for (int m : grp.members) {
            LocalModel& mod = state_.models.models[m];
            mod.a += da;
            mod.b += db;
            const int q = state_.partner[m];
            if (q != m) {
                state_.models.models[q].a = mod.a;
                state_.models.models[q].b = -mod.b;
            }
        }
    }
}

double SoftEngine::free_energy_value() const {
    const double T = state_.T;
    return expected_cost_value() - T * entropy_value();
}

double SoftEngine::expected_cost_value() const {
    const int M = n_models();
    auto row_cost = [&](int i) {
        const double* d = &D_[static_cast<size_t>(i) * M];
        const double* q = &state_.assoc.p[static_cast<size_t>(i) * M];
        double acc = 0.0;
        for (int m = 0; m < M; ++m) acc += q[m] * d[m];
        return xw_[i] * acc;
    };
    double acc = 0.0;
    if (cfg_.symmetry) {
        acc = row_cost(mid_x_);
        for (int i = mid_x_ + 1; i < n_x_; ++i) acc += 2.0 * row_cost(i);
    } else {
        for (int i = 0; i < n_x_; ++i) acc += row_cost(i);
    }
    return acc;
}

double SoftEngine::entropy_value() const {
    const int M = n_models();
    auto row_entropy = [&](int i) {
        const double* q = &state_.assoc.p[static_cast<size_t>(i) * M];
        double acc = 0.0;
        for (int m = 0; m < M; ++m)
            if (q[m] > 0.0) acc -= q[m] * std::log(q[m]);
        return xw_[i] * acc;
    };
    double acc = 0.0;
    if (cfg_.symmetry) {
        acc = row_entropy(mid_x_);
        for (int i = mid_x_ + 1; i < n_x_; ++i) acc += 2.0 * row_entropy(i);
    } else {
        for (int i = 0; i < n_x_; ++i) acc += row_entropy(i);
    }
    return acc;
}

double SoftEngine::hard_assignment_cost() const {
    const int M = n_models();
    auto row_min = [&](int i) {
        const double* d = &D_[static_cast<size_t>(i) * M];
        double dmin = d[0];
        for (int m = 1; m < M; ++m) dmin = std::min(dmin, d[m]);
        return xw_[i] * dmin;
    };
    double acc = 0.0;
    if (cfg_.symmetry) {
        acc = row_min(mid_x_);
        for (int i = mid_x_ + 1; i < n_x_; ++i) acc += 2.0 * row_min(i);
    } else {
        for (int i = 0; i < n_x_; ++i) acc += row_min(i);
    }
    return acc;
}

void SoftEngine::write_report() {
    FreeEnergyReport r;
    r.T = state_.T;
    r.D = expected_cost_value();
    r.H = entropy_value();
    r.F = r.D - r.T * r.H;
    state_.report = r;
}

}  // namespace wce::engine
