#include "wce/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wce {

int Grid::cell_index(double x) const {
    int i = static_cast<int>(std::floor((x - points.front()) / spacing));
    return std::clamp(i, 0, n_points - 2);
}

double Grid::interpolate(const std::vector<double>& samples, double x) const {
    if (x <= points.front()) return samples.front();
    if (x >= points.back()) return samples.back();
    const int i = cell_index(x);
    const double t = (x - points[i]) / spacing;
    return samples[i] + t * (samples[i + 1] - samples[i]);
}

Grid make_grid(double half_width, int n_points) {
    if (!(half_width > 0.0) || !std::isfinite(half_width))
        throw std::invalid_argument("make_grid: half_width must be positive and finite");
    if (n_points < 3 || n_points % 2 == 0)
        throw std::invalid_argument("make_grid: n_points must be odd and >= 3");

    Grid g;
    g.half_width = half_width;
    g.n_points = n_points;
    const int mid = (n_points - 1) / 2;
    g.spacing = half_width / mid;
    g.points.resize(n_points);
    for (int i = 0; i < n_points; ++i) g.points[i] = (i - mid) * g.spacing;
    return g;
}

double gaussian_pdf(double x, const GaussianDensity& g) {
    if (!(g.std > 0.0) || !std::isfinite(g.std) || !std::isfinite(g.mean))
        throw std::invalid_argument("gaussian_pdf: std must be positive and parameters finite");
    if (!std::isfinite(x)) throw std::invalid_argument("gaussian_pdf: non-finite x");
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    const double t = (x - g.mean) / g.std;
    return inv_sqrt_2pi / g.std * std::exp(-0.5 * t * t);
}

}  // namespace wce
