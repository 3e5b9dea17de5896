#include "wce/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wce/parallel.hpp"

namespace wce {

namespace {

double source_weight(const Problem& p, int i) {
    return p.x_grid.trap_weight(i) *
           gaussian_pdf(p.x_grid.points[i], p.source());
}

}  // namespace

AssociationMatrix AssociationMatrix::single_model(int n_x) {
    AssociationMatrix a;
    a.n_x = n_x;
    a.n_models = 1;
    a.p.assign(static_cast<size_t>(n_x), 1.0);
    return a;
}

double conditional_cost(double x, const LocalModel& m, const DecoderTable& dec,
                        const Problem& p) {
    const double f = m.a * x + m.b;
    const double u = f - x;
    const std::vector<double> kernel = detail::noise_kernel(p);
    return p.k * p.k * u * u + detail::stage2_integrand(f, dec, p, kernel);
}

std::vector<double> gibbs_update(const std::vector<double>& costs, double T) {
    if (!(T > 0.0)) throw std::invalid_argument("gibbs_update: T must be positive");
    if (costs.empty()) throw std::invalid_argument("gibbs_update: empty cost row");
    double dmin = costs[0];
    for (double d : costs) {
        if (!std::isfinite(d)) throw std::invalid_argument("gibbs_update: non-finite cost");
        dmin = std::min(dmin, d);
    }
    std::vector<double> row(costs.size());
    double sum = 0.0;
    for (size_t m = 0; m < costs.size(); ++m) {
        double e = std::exp(-(costs[m] - dmin) / T);
        if (e < 1e-300) e = 0.0;
        row[m] = e;
        sum += e;
    }
    for (double& v : row) v /= sum;
    return row;
}

double conditional_entropy(const AssociationMatrix& assoc, const Problem& p) {
    if (assoc.n_x != p.x_grid.n_points)
        throw std::invalid_argument("conditional_entropy: association rows != x grid");
    double acc = 0.0;
    for (int i = 0; i < assoc.n_x; ++i) {
        double row = 0.0;
        for (int m = 0; m < assoc.n_models; ++m) {
            const double q = assoc.at(i, m);
            if (q > 0.0) row -= q * std::log(q);
        }
        acc += source_weight(p, i) * row;
    }
    return acc;
}

double expected_cost(const AssociationMatrix& assoc, const ModelSet& models,
                     const DecoderTable& dec, const Problem& p) {
    if (assoc.n_models != models.count())
        throw std::invalid_argument("expected_cost: model count mismatch");
    const std::vector<double> kernel = detail::noise_kernel(p);
    const int n = assoc.n_x;
    std::vector<double> vals(n);
    parallel_for(0, n, [&](int i) {
        const double x = p.x_grid.points[i];
        double row = 0.0;
        for (int m = 0; m < assoc.n_models; ++m) {
            const double q = assoc.at(i, m);
            if (q == 0.0) continue;
            const double f = models.models[m].a * x + models.models[m].b;
            const double u = f - x;
            row += q * (p.k * p.k * u * u +
                        detail::stage2_integrand(f, dec, p, kernel));
        }
        vals[i] = source_weight(p, i) * row;
    });
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += vals[i];
    return acc;
}

FreeEnergyReport free_energy(const AssociationMatrix& assoc, const ModelSet& models,
                             const DecoderTable& dec, const Problem& p, double T) {
    if (T < 0.0) throw std::invalid_argument("free_energy: T must be >= 0");
    FreeEnergyReport r;
    r.T = T;
    r.D = expected_cost(assoc, models, dec, p);
    r.H = conditional_entropy(assoc, p);
    r.F = r.D - T * r.H;
    return r;
}

namespace detail {

std::vector<PointMass> masses_from_mixture(const AssociationMatrix& assoc,
                                           const ModelSet& models, const Problem& p) {
    std::vector<PointMass> masses;
    masses.reserve(static_cast<size_t>(assoc.n_x) * assoc.n_models);
    for (int i = 0; i < assoc.n_x; ++i) {
        const double xw = source_weight(p, i);
        const double x = p.x_grid.points[i];
        for (int m = 0; m < assoc.n_models; ++m) {
            const double w = xw * assoc.at(i, m);
            if (w > 0.0)
                masses.push_back({models.models[m].a * x + models.models[m].b, w});
        }
    }
    return masses;
}

}  // namespace detail

DecoderTable randomized_decoder(const AssociationMatrix& assoc, const ModelSet& models,
                                const Problem& p, Diagnostics* diag) {
    if (assoc.n_models != models.count())
        throw std::invalid_argument("randomized_decoder: model count mismatch");
    return detail::decoder_from_masses(
        detail::masses_from_mixture(assoc, models, p), p, diag);
}

int effective_model_count(const ModelSet& models, double tol_a, double tol_b) {
    if (!(tol_a > 0.0) || !(tol_b > 0.0))
        throw std::invalid_argument("effective_model_count: tolerances must be positive");
    const int n = models.count();
    std::vector<int> root(n);
    std::iota(root.begin(), root.end(), 0);
    std::function<int(int)> find = [&](int v) {
        while (root[v] != v) v = root[v] = root[root[v]];
        return v;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (std::abs(models.models[i].a - models.models[j].a) <= tol_a &&
                std::abs(models.models[i].b - models.models[j].b) <= tol_b)
                root[find(i)] = find(j);
        }
    int classes = 0;
    for (int i = 0; i < n; ++i)
        if (find(i) == i) ++classes;
    return classes;
}

}  // namespace wce
