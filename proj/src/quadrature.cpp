#include "wce/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace wce {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;

// Sequential sum arranged center-out in symmetric pairs: value at 0 first,
// then (right + left) per offset. Keeps mirror-symmetric inputs exactly
// symmetric in the result and fixes the reduction order.
double center_out_sum(const std::vector<double>& terms, int mid) {
    double acc = terms[mid];
    const int n = static_cast<int>(terms.size());
    for (int j = 1; j <= mid; ++j) {
        double pair = terms[mid + j];
        if (mid - j >= 0) pair += terms[mid - j];
        acc += pair;
    }
    for (int i = 2 * mid + 1; i < n; ++i) acc += terms[i];
    return acc;
}

}  // namespace

double expect_over_density(const std::vector<double>& f_samples,
                           const GaussianDensity& g, const Grid& grid,
                           Diagnostics* diag) {
    if (static_cast<int>(f_samples.size()) != grid.n_points)
        throw std::invalid_argument("expect_over_density: sample count != grid size");
    const double coverage = (grid.half_width - std::abs(g.mean)) / g.std;
    if (coverage < 6.0)
        diag_warn(diag, "expect_over_density: grid covers only " +
                            std::to_string(coverage) + " std of the density");

    std::vector<double> terms(grid.n_points);
    for (int i = 0; i < grid.n_points; ++i) {
        const double fi = f_samples[i];
        if (std::isnan(fi))
            throw std::invalid_argument("expect_over_density: NaN sample");
        terms[i] = fi * gaussian_pdf(grid.points[i], g) * grid.trap_weight(i);
    }
    return center_out_sum(terms, grid.mid());
}

double expect_over_density(const std::function<double(double)>& f,
                           const GaussianDensity& g, const Grid& grid,
                           Diagnostics* diag) {
    std::vector<double> samples(grid.n_points);
    for (int i = 0; i < grid.n_points; ++i) samples[i] = f(grid.points[i]);
    return expect_over_density(samples, g, grid, diag);
}

namespace {

// Orthonormal Hermite value and derivative at z (physicists' weight).
void hermite_eval(int n, long double z, long double& value, long double& deriv) {
    long double p1 = 0.7511255444649424829L;  // pi^{-1/4}
    long double p2 = 0.0L;
    for (int j = 0; j < n; ++j) {
        const long double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0L / (j + 1)) * p2 -
             std::sqrt(static_cast<long double>(j) / (j + 1)) * p3;
    }
    value = p1;
    deriv = std::sqrt(static_cast<long double>(2 * n)) * p2;
}

// Roots by sign-change scan plus bisection and a short Newton polish. The
// local root spacing is at least ~pi/sqrt(2n+1), so a scan at a third of
// that step cannot skip a root. Slower than asymptotic ladders but immune
// to their overshoot failures; built once per order and cached.
GaussRule build_gauss_hermite(int n) {
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int m = n / 2;
    const long double z_max = std::sqrt(static_cast<long double>(2 * n + 1));
    const long double step = 1.0471975511965977L / z_max;  // (pi/3) / sqrt(2n+1)

    long double value, deriv;
    auto f = [&](long double z) {
        hermite_eval(n, z, value, deriv);
        return value;
    };

    int found = 0;
    long double lo = (n % 2 == 1) ? step * 1e-3L : 0.0L;
    long double flo = f(lo);
    while (found < m) {
        long double hi = lo + step;
        long double fhi = f(hi);
        if ((flo < 0.0L) != (fhi < 0.0L)) {
            long double a = lo, b = hi, fa = flo;
            for (int it = 0; it < 90 && b - a > 1e-20L * z_max; ++it) {
                const long double c = 0.5L * (a + b);
                const long double fc = f(c);
                if ((fa < 0.0L) == (fc < 0.0L)) {
                    a = c;
                    fa = fc;
                } else {
                    b = c;
                }
            }
            long double z = 0.5L * (a + b);
            for (int it = 0; it < 4; ++it) {
                hermite_eval(n, z, value, deriv);
                const long double dz = value / deriv;
                if (z - dz <= a || z - dz >= b) break;  // keep the bracket
                z -= dz;
                if (std::abs(dz) < 1e-19L * (1.0L + z)) break;
            }
            hermite_eval(n, z, value, deriv);
            const int i = m - 1 - found;  // ascending positive roots -> center-out
            rule.nodes[n - 1 - i] = static_cast<double>(z);
            rule.nodes[i] = static_cast<double>(-z);
            const double w = static_cast<double>(2.0L / (deriv * deriv));
            rule.weights[n - 1 - i] = w;
            rule.weights[i] = w;
            ++found;
        }
        lo = hi;
        flo = fhi;
        if (lo > z_max + 1.0L)
            throw std::logic_error("gauss_hermite_rule: root scan failed");
    }
    if (n % 2 == 1) {
        hermite_eval(n, 0.0L, value, deriv);
        rule.nodes[m] = 0.0;
        rule.weights[m] = static_cast<double>(2.0L / (deriv * deriv));
    }
    return rule;
}

GaussRule build_gauss_legendre(int n) {
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const long double eps = 1e-19L;
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        long double z = std::cos(3.14159265358979323846L * (i + 0.75L) / (n + 0.5L));
        long double pp = 0.0L;
        for (int iter = 0; iter < 100; ++iter) {
            long double p1 = 1.0L, p2 = 0.0L;
            for (int j = 0; j < n; ++j) {
                const long double p3 = p2;
                p2 = p1;
                p1 = ((2.0L * j + 1.0L) * z * p2 - j * p3) / (j + 1);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0L);
            const long double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) <= eps) break;
        }
        rule.nodes[i] = static_cast<double>(-z);
        rule.nodes[n - 1 - i] = static_cast<double>(z);
        const double w = static_cast<double>(2.0L / ((1.0L - z * z) * pp * pp));
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

std::mutex g_rule_mutex;

}  // namespace

const GaussRule& gauss_hermite_rule(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite_rule: order must be >= 1");
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(g_rule_mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_gauss_hermite(n)).first;
    return it->second;
}

const GaussRule& gauss_legendre_rule(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre_rule: order must be >= 1");
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(g_rule_mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_gauss_legendre(n)).first;
    return it->second;
}

double gauss_hermite_expectation(const std::function<double(double)>& f,
                                 const GaussianDensity& g, int order) {
    const GaussRule& rule = gauss_hermite_rule(order);
    const double scale = g.std * std::sqrt(2.0);
    double acc = 0.0;
    for (int i = 0; i < order; ++i)
        acc += rule.weights[i] * f(g.mean + scale * rule.nodes[i]);
    return acc / kSqrtPi;
}

namespace {

// integral_{a}^{b} f(x) pdf_g(x) dx by Gauss-Legendre, subdividing long
// intervals so each panel spans at most one std of g.
double legendre_panel_integral(const std::function<double(double)>& f,
                               const GaussianDensity& g, double a, double b,
                               int order) {
    if (!(b > a)) return 0.0;
    const int segments = std::max(1, static_cast<int>(std::ceil((b - a) / g.std)));
    const GaussRule& rule = gauss_legendre_rule(order);
    double acc = 0.0;
    for (int s = 0; s < segments; ++s) {
        const double lo = a + (b - a) * s / segments;
        const double hi = a + (b - a) * (s + 1) / segments;
        const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        double panel = 0.0;
        for (size_t i = 0; i < rule.nodes.size(); ++i) {
            const double x = c + h * rule.nodes[i];
            panel += rule.weights[i] * f(x) * gaussian_pdf(x, g);
        }
        acc += h * panel;
    }
    return acc;
}

}  // namespace

QuadratureComparison cross_validate_quadrature(
    const std::function<double(double)>& f, const GaussianDensity& g,
    const Grid& grid, int gauss_order, const std::vector<double>& breakpoints) {
    QuadratureComparison out;
    out.trapezoid = expect_over_density(f, g, grid, nullptr);

    if (breakpoints.empty()) {
        out.gauss = gauss_hermite_expectation(f, g, gauss_order);
    } else {
        std::vector<double> edges = breakpoints;
        edges.push_back(-grid.half_width);
        edges.push_back(grid.half_width);
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        const int order = std::clamp(gauss_order / 4, 16, 64);
        double acc = 0.0;
        for (size_t i = 0; i + 1 < edges.size(); ++i)
            acc += legendre_panel_integral(f, g, edges[i], edges[i + 1], order);
        out.gauss = acc;
    }
    out.gap = std::abs(out.trapezoid - out.gauss);
    return out;
}

double refinement_delta(const std::function<double(double)>& f,
                        const GaussianDensity& g, const Grid& grid) {
    const double coarse = expect_over_density(f, g, grid, nullptr);
    const Grid fine = make_grid(grid.half_width, 2 * grid.n_points - 1);
    const double refined = expect_over_density(f, g, fine, nullptr);
    return std::abs(coarse - refined);
}

}  // namespace wce
