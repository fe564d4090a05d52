#include "lsc/levelset.hpp"

#include <cmath>
#include <limits>

#include "lsc/error.hpp"

namespace lsc {

double default_level_tolerance(double median_residual, double time_to_horizon) {
    return 2.0 * median_residual * time_to_horizon;
}

ValueExtraction extract_value(const SolveResult& result, const LevelSetQuery& query) {
    if (!(query.tolerance >= 0.0)) throw InvalidArgument("tolerance must be non-negative");
    for (Eigen::Index k = 0; k < query.p.size(); ++k)
        if (query.p[k] < 0.0)
            throw InvalidArgument("budget p_" + std::to_string(k + 1) + " is negative: no admissible control");

    const int i = result.interval_of(query.t);
    if (i < result.start_interval)
        throw InvalidArgument("time " + std::to_string(query.t) + " precedes the solved intervals");
    const int n = result.spec.grid.n();
    const VariantKey root = root_variant(i, n);
    if (query.p.size() != n - i)
        throw InvalidArgument("expected " + std::to_string(n - i) + " budgets at t=" + std::to_string(query.t));

    const auto levels = result.levels(root);
    if (levels.empty()) throw InvalidArgument("no slices retained for " + root.name());
    const IntervalSchedule& sched = result.schedule[static_cast<std::size_t>(i)];
    int level = levels.front();
    for (int l : levels)
        if (std::abs(sched.time(l) - query.t) < std::abs(sched.time(level) - query.t)) level = l;
    const ValueSlice& s = result.slice(root, level);

    const auto& g = s.grid;
    if (query.z.size() != g.d) throw InvalidArgument("query state has the wrong dimension");
    for (int r = 0; r < g.d; ++r) {
        const auto& ax = g.axes[static_cast<std::size_t>(r)];
        if (query.z[r] < ax.lo || query.z[r] > ax.hi)
            throw InvalidArgument("query z" + std::to_string(r + 1) + " outside the grid");
    }
    const UniformAxis& m_axis = g.axes.back();
    const double m_max = query.m_max > 0.0 ? std::min(query.m_max, m_axis.hi) : m_axis.hi;

    Vector point(g.rank());
    point.head(g.d) = query.z;
    point.segment(g.d, query.p.size()) = query.p;
    auto w_at = [&](double m) {
        point[g.rank() - 1] = m;
        return s.interpolate(point);
    };

    double prev = w_at(0.0);
    for (int k = 1; k < m_axis.count; ++k) {
        const double cur = w_at(m_axis.value(k));
        if (cur > prev + 1e-9 * (1.0 + std::abs(prev)))
            throw CorruptedInput("w increases in m at m=" + std::to_string(m_axis.value(k)) + " in " + root.name());
        prev = cur;
    }

    ValueExtraction out;
    out.level_time = s.t;
    const double w0 = w_at(0.0);
    if (w0 <= query.tolerance) {
        out.feasible = true;
        out.value = 0.0;
        out.achieved_w = w0;
        return out;
    }
    const double wmax = w_at(m_max);
    if (wmax > query.tolerance) {
        out.feasible = false;
        out.value = std::numeric_limits<double>::infinity();
        out.achieved_w = wmax;
        out.m_lo = m_max;
        out.m_hi = std::numeric_limits<double>::infinity();
        return out;
    }
    double lo = 0.0, hi = m_max;
    const double width = m_axis.step() / 4.0;
    while (hi - lo > width) {
        const double mid = 0.5 * (lo + hi);
        if (w_at(mid) <= query.tolerance)
            hi = mid;
        else
            lo = mid;
    }
    out.feasible = true;
    out.value = hi;
    out.achieved_w = w_at(hi);
    out.m_lo = lo;
    out.m_hi = hi;
    return out;
}

std::vector<FeasibilityRow> feasibility_report(const SolveResult& result, double t, const std::vector<Vector>& z_probes,
                                               const std::vector<Vector>& p_probes, double tolerance) {
    std::vector<FeasibilityRow> rows;
    for (const auto& z : z_probes)
        for (const auto& p : p_probes) {
            LevelSetQuery q;
            q.t = t;
            q.z = z;
            q.p = p;
            q.tolerance = tolerance;
            rows.push_back({z, p, extract_value(result, q)});
        }
    return rows;
}

} // namespace lsc
