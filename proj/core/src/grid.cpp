#include "lsc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lsc/error.hpp"

namespace lsc {

UniformAxis::Location UniformAxis::locate_budget(double x) const {
    Location loc;
    if (x < lo) {
        loc.k = 0;
        loc.t = 0.0;
        loc.penalty = lo - x;
        return loc;
    }
    double u = (x - lo) / step();
    const double r = std::nearbyint(u);
    if (std::abs(u - r) < 1e-9) u = r;
    if (u >= count - 1) {
        loc.k = count - 1;
        loc.t = 0.0;
        return loc;
    }
    loc.k = static_cast<int>(std::floor(u));
    loc.t = u - loc.k;
    return loc;
}

UniformAxis::Location UniformAxis::locate_extrapolate(double x) const {
    Location loc;
    const double u = (x - lo) / step();
    int k = static_cast<int>(std::floor(u));
    k = std::clamp(k, 0, count - 2);
    loc.k = k;
    loc.t = u - k;
    return loc;
}

void GridSpec::validate(int state_dim) const {
    if (static_cast<int>(z_axes.size()) != state_dim)
        throw InvalidArgument("grid has " + std::to_string(z_axes.size()) + " z axes, state dimension is " +
                              std::to_string(state_dim));
    auto check_axis = [](const UniformAxis& a, const std::string& name) {
        if (a.count < 2) throw InvalidArgument(name + ": axis needs at least 2 nodes");
        if (!(a.hi > a.lo) || !std::isfinite(a.lo) || !std::isfinite(a.hi))
            throw InvalidArgument(name + ": axis bounds must be finite with lo < hi");
    };
    for (std::size_t k = 0; k < z_axes.size(); ++k) check_axis(z_axes[k], "z" + std::to_string(k + 1));
    check_axis(p_axis, "p");
    check_axis(m_axis, "m");
    if (p_axis.lo != 0.0) throw InvalidArgument("p: budget axis must start at 0");
    if (m_axis.lo != 0.0) throw InvalidArgument("m: budget axis must start at 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
    if (!(a_max > 0.0) || !std::isfinite(a_max)) throw InvalidArgument("a_max must be positive");
    if (control_resolution < 1) throw InvalidArgument("control_resolution must be positive");
    if (budget_controls == BudgetControlKind::uniform && budget_points < 2)
        throw InvalidArgument("budget_points must be at least 2");
    if (quadrature == QuadratureKind::gauss_hermite && (gauss_hermite_order < 1 || gauss_hermite_order > 20))
        throw InvalidArgument("gauss_hermite_order must lie in 1..20");
    if (keep_stride < 0) throw InvalidArgument("keep_stride must be non-negative");
}

void gauss_hermite(int order, std::vector<double>& nodes, std::vector<double>& weights) {
    Matrix J = Matrix::Zero(order, order);
    for (int k = 1; k < order; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Matrix> es(J);
    nodes.resize(static_cast<std::size_t>(order));
    weights.resize(static_cast<std::size_t>(order));
    for (int k = 0; k < order; ++k) {
        nodes[static_cast<std::size_t>(k)] = es.eigenvalues()[k];
        const double v = es.eigenvectors()(0, k);
        weights[static_cast<std::size_t>(k)] = v * v;
    }
    // Symmetrise to remove eigen-solver noise around the origin.
    for (int k = 0; k < order / 2; ++k) {
        const auto a = static_cast<std::size_t>(k), b = static_cast<std::size_t>(order - 1 - k);
        const double x = 0.5 * (nodes[b] - nodes[a]);
        const double w = 0.5 * (weights[a] + weights[b]);
        nodes[a] = -x;
        nodes[b] = x;
        weights[a] = weights[b] = w;
    }
    if (order % 2 == 1) nodes[static_cast<std::size_t>(order / 2)] = 0.0;
}

QuadratureRule make_quadrature(QuadratureKind kind, int order, int d, double dt) {
    QuadratureRule rule;
    const double h = std::sqrt(dt);
    if (kind == QuadratureKind::two_point) {
        const std::size_t count = std::size_t{1} << d;
        const double w = 1.0 / static_cast<double>(count);
        for (std::size_t q = 0; q < count; ++q) {
            Vector node(d);
            for (int l = 0; l < d; ++l) node[l] = (q >> l) & 1 ? -h : h;
            rule.nodes.push_back(node);
            rule.weights.push_back(w);
        }
        return rule;
    }
    std::vector<double> x, w;
    gauss_hermite(order, x, w);
    std::size_t count = 1;
    for (int l = 0; l < d; ++l) count *= static_cast<std::size_t>(order);
    for (std::size_t q = 0; q < count; ++q) {
        Vector node(d);
        double weight = 1.0;
        std::size_t rest = q;
        for (int l = 0; l < d; ++l) {
            const std::size_t j = rest % static_cast<std::size_t>(order);
            rest /= static_cast<std::size_t>(order);
            node[l] = x[j] * h;
            weight *= w[j];
        }
        rule.nodes.push_back(node);
        rule.weights.push_back(weight);
    }
    return rule;
}

VariantGrid VariantGrid::make(const GridSpec& grid, const VariantKey& key, int d) {
    VariantGrid g;
    g.d = d;
    g.p_dates = key.active_p;
    g.has_m = key.has_m;
    g.axes = grid.z_axes;
    for (std::size_t k = 0; k < key.active_p.size(); ++k) g.axes.push_back(grid.p_axis);
    if (key.has_m) g.axes.push_back(grid.m_axis);
    g.strides.assign(g.axes.size(), 1);
    for (int r = static_cast<int>(g.axes.size()) - 2; r >= 0; --r)
        g.strides[static_cast<std::size_t>(r)] =
            g.strides[static_cast<std::size_t>(r + 1)] * static_cast<std::size_t>(g.axes[static_cast<std::size_t>(r + 1)].count);
    g.size = g.strides.front() * static_cast<std::size_t>(g.axes.front().count);
    g.z_size = 1;
    for (int r = 0; r < d; ++r) g.z_size *= static_cast<std::size_t>(g.axes[static_cast<std::size_t>(r)].count);
    g.budget_size = g.size / g.z_size;
    return g;
}

std::size_t VariantGrid::flat(const std::vector<int>& index) const {
    if (index.size() != axes.size()) throw InvalidArgument("index rank does not match the variant grid");
    std::size_t f = 0;
    for (std::size_t r = 0; r < axes.size(); ++r) {
        if (index[r] < 0 || index[r] >= axes[r].count) throw InvalidArgument("grid index out of range");
        f += static_cast<std::size_t>(index[r]) * strides[r];
    }
    return f;
}

std::vector<int> VariantGrid::unflatten(std::size_t f) const {
    std::vector<int> index(axes.size());
    for (std::size_t r = 0; r < axes.size(); ++r) {
        index[r] = static_cast<int>(f / strides[r]);
        f %= strides[r];
    }
    return index;
}

Vector VariantGrid::coordinates(const std::vector<int>& index) const {
    Vector x(static_cast<Eigen::Index>(axes.size()));
    for (std::size_t r = 0; r < axes.size(); ++r) x[static_cast<Eigen::Index>(r)] = axes[r].value(index[r]);
    return x;
}

namespace {

std::vector<double> aligned_values(const UniformAxis& axis, double dt, double a_max) {
    const double unit = axis.step() / std::sqrt(dt);
    const int jmax = static_cast<int>(std::floor(a_max / unit * (1.0 + 1e-12)));
    std::vector<double> v;
    for (int j = -jmax; j <= jmax; ++j) v.push_back(j * unit);
    return v;
}

std::vector<double> uniform_values(int points, double a_max) {
    std::vector<double> v;
    for (int k = 0; k < points; ++k) v.push_back(-a_max + 2.0 * a_max * k / (points - 1));
    // Keep the zero control exact when the grid is symmetric with a centre node.
    if (points % 2 == 1) v[static_cast<std::size_t>(points / 2)] = 0.0;
    return v;
}

std::vector<Vector> tensor(const std::vector<double>& scalars, int d) {
    std::vector<Vector> out;
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    while (true) {
        Vector v(d);
        for (int l = 0; l < d; ++l) v[l] = scalars[idx[static_cast<std::size_t>(l)]];
        out.push_back(v);
        int l = d - 1;
        while (l >= 0 && ++idx[static_cast<std::size_t>(l)] == scalars.size()) idx[static_cast<std::size_t>(l--)] = 0;
        if (l < 0) break;
    }
    return out;
}

} // namespace

BudgetControlTable make_budget_controls(const GridSpec& grid, int d, double dt) {
    BudgetControlTable table;
    if (grid.budget_controls == BudgetControlKind::aligned) {
        table.p_values = tensor(aligned_values(grid.p_axis, dt, grid.a_max), d);
        table.m_values = tensor(aligned_values(grid.m_axis, dt, grid.a_max), d);
    } else {
        const auto v = uniform_values(grid.budget_points, grid.a_max);
        table.p_values = tensor(v, d);
        table.m_values = table.p_values;
    }
    return table;
}

int IntervalSchedule::nearest_level(double t) const {
    const double u = (t - t_left) / dt;
    return std::clamp(static_cast<int>(std::lround(u)), 0, steps);
}

std::vector<IntervalSchedule> make_schedule(const TimeGrid& grid, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    std::vector<IntervalSchedule> out;
    for (int i = 0; i < grid.n(); ++i) {
        IntervalSchedule s;
        s.interval = i;
        s.t_left = grid.dates[static_cast<std::size_t>(i)];
        s.t_right = grid.dates[static_cast<std::size_t>(i + 1)];
        const double gap = s.t_right - s.t_left;
        if (!(gap > 0.0)) throw InvalidArgument("empty constraint interval " + std::to_string(i));
        if (dt > gap * (1.0 + 1e-12))
            throw InvalidArgument("dt " + std::to_string(dt) + " exceeds the gap " + std::to_string(gap) +
                                  " of interval " + std::to_string(i));
        s.steps = std::max(1, static_cast<int>(std::ceil(gap / dt - 1e-9)));
        s.dt = gap / s.steps;
        out.push_back(s);
    }
    return out;
}

double default_a_max(const ProblemSpec& spec, std::uint64_t seed, int samples) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    const auto us = spec.controls.discretize(3);
    for (int s = 0; s < samples; ++s) {
        Vector z(spec.state_dim);
        for (int k = 0; k < spec.state_dim; ++k)
            z[k] = spec.domain.lower[k] + unit(rng) * (spec.domain.upper[k] - spec.domain.lower[k]);
        const double t = unit(rng) * spec.grid.horizon();
        for (const auto& u : us) worst = std::max(worst, spec.sde.diffusion(t, z, u).norm());
    }
    const double a = 4.0 * spec.sde.lipschitz_z * worst;
    return a > 0.0 ? a : 1.0;
}

} // namespace lsc
