#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "lsc/solver.hpp"

namespace lsc {

/// Feedback control (nu, alpha, eta) of the augmented system (Z, P, M).
struct PolicyFn {
    std::function<PolicyAction(double t, const Vector& z, const Vector& p, double m)> act;
};

/// First discretised control with zero martingale controls.
PolicyFn zero_policy(const ProblemSpec& spec);

/// Delta-hedge e = sigma' grad E[f(Z_T)], a_k = sigma' grad E[Psi_k(Z_{t_k})]
/// built from the analytic conditional means. Requires a singleton control set.
PolicyFn replicating_policy(const ProblemSpec& spec);

/// Argmin controls recorded by the solver, looked up at the nearest node of
/// the root variant on the level at or before t.
PolicyFn solver_policy(const SolveResult& result);

struct PathStart {
    double t = 0.0;
    Vector z;
    Vector p;  // budgets of the dates after t
    double m = 0.0;
};

/// Marks recorded on each path.
struct PathBatch {
    int n_paths = 0;
    int d = 1;
    std::vector<int> dates;      // constraint dates covered, ascending
    std::vector<double> z_dates; // [path][date][d]
    std::vector<double> p_dates; // [path][date]
    std::vector<double> z_T;     // [path][d]
    std::vector<double> m_T;     // [path]
    bool antithetic = false;
    std::uint64_t seed = 0;
};

/// Euler-Maruyama for (Z, P, M) driven by the same increments. Path k uses its
/// own generator seeded from (seed, k); with antithetic pairing paths 2j and
/// 2j+1 use opposite increments. Throws NumericFailure on a divergent path.
PathBatch simulate_paths(const ProblemSpec& spec, const PolicyFn& policy, const PathStart& start, int n_paths,
                         int steps_per_interval, std::uint64_t seed, bool antithetic = false);

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
    std::uint64_t seed = 0;
};

/// Sample mean and standard error of (f(Z_T) - M_T)^+ + sum_k (Psi_k(Z_{t_k}) - P_k)^+.
/// Antithetic pairs count as one sample.
Estimate estimate_J(const PathBatch& paths, const LossSpec& loss);

/// (E f(Z_T) - m)^+ + sum_k (E Psi_k(Z_{t_k}) - p_k)^+ for a model with a
/// single control and analytic conditional means.
double closed_form_uncontrolled(const ProblemSpec& spec, double t, const Vector& z, const Vector& p, double m);

struct BruteForceTable {
    std::map<SliceId, std::vector<double>> values;
    std::size_t evaluations = 0;
};

/// Backward recursion by exhaustive control search over every variant and
/// time level from interval `interval_index` on, written independently of the
/// sweeping solver but with the same quadrature, interpolation and
/// tie-breaking. Limited to 4 time steps and `max_evaluations` quadrature
/// evaluations.
BruteForceTable brute_force_dp(const ProblemSpec& spec, const GridSpec& grid, int interval_index,
                               std::size_t max_evaluations = 100'000'000);

} // namespace lsc
