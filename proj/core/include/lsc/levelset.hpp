#pragma once

#include <vector>

#include "lsc/solver.hpp"

namespace lsc {

struct LevelSetQuery {
    double t = 0.0;
    Vector z;
    Vector p;               // budgets of the dates after t
    double tolerance = 0.0; // zero-level threshold
    double m_max = 0.0;     // search ceiling; <= 0 uses the top of the m axis
};

struct ValueExtraction {
    bool feasible = false;
    double value = 0.0;       // +inf when infeasible
    double achieved_w = 0.0;  // w at the returned m (at m_max when infeasible)
    double m_lo = 0.0;
    double m_hi = 0.0;
    double level_time = 0.0;  // time of the slice actually used
};

/// Smallest m in [0, m_max] with w(t, z, p, m) <= tolerance, bracketed to a
/// quarter of the m step. Throws InvalidArgument for queries outside the grid
/// or with a negative budget, CorruptedInput when w increases in m.
ValueExtraction extract_value(const SolveResult& result, const LevelSetQuery& query);

/// Default zero-level threshold 2 * median_residual * (T - t).
double default_level_tolerance(double median_residual, double time_to_horizon);

struct FeasibilityRow {
    Vector z;
    Vector p;
    ValueExtraction extraction;
};

/// extract_value over the product of the probe grids.
std::vector<FeasibilityRow> feasibility_report(const SolveResult& result, double t, const std::vector<Vector>& z_probes,
                                               const std::vector<Vector>& p_probes, double tolerance);

} // namespace lsc
