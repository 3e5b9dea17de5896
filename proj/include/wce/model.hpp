#pragma once

#include <vector>

#include "wce/diagnostics.hpp"
#include "wce/problem.hpp"

namespace wce {

/// One affine piece of the randomized encoder. The parameters describe the
/// total map f_m(x) = a*x + b; the control it applies is f_m(x) - x.
struct LocalModel {
    double a = 0.0;
    double b = 0.0;
};

struct ModelSet {
    std::vector<LocalModel> models;
    int max_models = 1;

    int count() const { return static_cast<int>(models.size()); }
};

/// p(m|x) sampled on the source grid; each row is a distribution over models.
struct AssociationMatrix {
    int n_x = 0;
    int n_models = 0;
    std::vector<double> p;  // row-major [n_x][n_models]

    double& at(int i, int m) { return p[static_cast<size_t>(i) * n_models + m]; }
    double at(int i, int m) const { return p[static_cast<size_t>(i) * n_models + m]; }

    static AssociationMatrix single_model(int n_x);
};

struct FreeEnergyReport {
    double D = 0.0;  // expected cost
    double H = 0.0;  // conditional entropy, nats
    double F = 0.0;  // D - T * H
    double T = 0.0;
};

/// D_m(x): cost of covering source point x with model m under decoder dec.
double conditional_cost(double x, const LocalModel& m, const DecoderTable& dec,
                        const Problem& p);

/// Row of optimal association probabilities for the given per-model costs:
/// p(m) proportional to exp(-D_m / T), computed with max-subtraction.
/// Probabilities below 1e-300 flush to zero before renormalization.
std::vector<double> gibbs_update(const std::vector<double>& costs, double T);

/// H(M|X) in nats; in [0, ln(model count)].
double conditional_entropy(const AssociationMatrix& assoc, const Problem& p);

/// Expected cost of the randomized encoder under the given decoder.
double expected_cost(const AssociationMatrix& assoc, const ModelSet& models,
                     const DecoderTable& dec, const Problem& p);

FreeEnergyReport free_energy(const AssociationMatrix& assoc, const ModelSet& models,
                             const DecoderTable& dec, const Problem& p, double T);

/// MMSE decoder for the mixture channel induced by the soft associations.
DecoderTable randomized_decoder(const AssociationMatrix& assoc, const ModelSet& models,
                                const Problem& p, Diagnostics* diag = nullptr);

/// Number of equivalence classes of models under |da| <= tol_a and
/// |db| <= tol_b, closed transitively.
int effective_model_count(const ModelSet& models, double tol_a, double tol_b);

namespace detail {
std::vector<PointMass> masses_from_mixture(const AssociationMatrix& assoc,
                                           const ModelSet& models, const Problem& p);
}

}  // namespace wce
