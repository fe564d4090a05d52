#include <cmath>
#include <numbers>

#include "lsc/error.hpp"
#include "lsc/hamiltonian.hpp"

namespace lsc {

namespace {

// Recursively fixes hyperspherical angles phi_1..phi_{dim-1}. A polar angle
// of 0 or pi zeroes every later coordinate, so recursion stops there.
void emit(int dim, int resolution, int level, Vector& x, double sin_prod, std::vector<SpherePoint>& out) {
    const double pi = std::numbers::pi;
    if (level == dim - 2) {
        // Azimuth over the full circle.
        for (int k = 0; k < 2 * resolution; ++k) {
            const double a = k * pi / resolution;
            Vector y = x;
            y[dim - 2] = sin_prod * std::cos(a);
            y[dim - 1] = sin_prod * std::sin(a);
            out.push_back(SpherePoint{y});
        }
        return;
    }
    for (int k = 0; k <= resolution; ++k) {
        const double a = k * pi / resolution;
        if (k == 0 || k == resolution) {
            Vector y = x;
            y[level] = k == 0 ? sin_prod : -sin_prod;
            for (int r = level + 1; r < dim; ++r) y[r] = 0.0;
            out.push_back(SpherePoint{y});
            continue;
        }
        x[level] = sin_prod * std::cos(a);
        emit(dim, resolution, level + 1, x, sin_prod * std::sin(a), out);
    }
}

} // namespace

std::vector<SpherePoint> sphere_sample(int dim, int resolution) {
    if (dim < 1) throw InvalidArgument("sphere dimension must be positive");
    if (resolution < 1) throw InvalidArgument("sphere resolution must be positive");
    std::vector<SpherePoint> out;
    for (int k = 0; k < dim; ++k) {
        Vector e = Vector::Zero(dim);
        e[k] = 1.0;
        out.push_back(SpherePoint{e});
        e[k] = -1.0;
        out.push_back(SpherePoint{e});
    }
    if (dim == 1) return out;
    Vector x = Vector::Zero(dim);
    if (dim == 2) {
        for (int k = 0; k < 2 * resolution; ++k) {
            const double a = k * std::numbers::pi / resolution;
            out.push_back(SpherePoint{Vector{{std::cos(a), std::sin(a)}}});
        }
        return out;
    }
    emit(dim, resolution, 0, x, 1.0, out);
    return out;
}

} // namespace lsc
