#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lsc/grid.hpp"
#include "lsc/hamiltonian.hpp"
#include "lsc/model.hpp"

namespace lsc {

/// Discretised w(t, .) of one variant on one time level.
struct ValueSlice {
    VariantKey variant;
    int level = 0;
    double t = 0.0;
    VariantGrid grid;
    std::vector<double> values;
    /// Argmin control index per node (u index * combos + budget combo), -1 on
    /// faces whose value was injected. Empty unless recorded.
    std::vector<std::int32_t> policy;

    [[nodiscard]] double at(const std::vector<int>& index) const { return values[grid.flat(index)]; }

    /// Multilinear value at a physical point (z, p..., m): budgets clamp above
    /// the grid and continue with slope -1 below zero, z extrapolates linearly.
    [[nodiscard]] double interpolate(const Vector& point) const;
};

struct SliceId {
    VariantKey variant;
    int level = 0;
    friend bool operator==(const SliceId&, const SliceId&) = default;
    friend auto operator<=>(const SliceId&, const SliceId&) = default;
};

/// Control candidates used on one interval.
struct ControlTables {
    std::vector<Vector> u_points;
    BudgetControlTable budget;

    [[nodiscard]] std::size_t combos(const VariantGrid& grid) const;
};

struct PolicyAction {
    Vector u;
    Vector a;  // stacked d-blocks, one per budgeted date
    Vector e;
};

struct SolveDiagnostics {
    double seconds = 0.0;
    std::size_t steps = 0;
    double growth_constant = 0.0;
};

struct SolveResult {
    ProblemSpec spec;
    GridSpec config;
    int start_interval = 0;
    std::vector<IntervalSchedule> schedule;   // indexed by interval
    std::vector<ControlTables> controls;      // indexed by interval
    std::map<SliceId, ValueSlice> slices;
    SolveDiagnostics diagnostics;

    [[nodiscard]] const ValueSlice* find(const VariantKey& key, int level) const;
    /// Throws InvalidArgument when the slice was not retained.
    [[nodiscard]] const ValueSlice& slice(const VariantKey& key, int level) const;
    [[nodiscard]] std::vector<int> levels(const VariantKey& key) const;
    /// Interval whose half-open range [t_i, t_{i+1}) holds t; T maps to n-1.
    [[nodiscard]] int interval_of(double t) const;
    [[nodiscard]] PolicyAction decode_policy(const VariantKey& key, std::int32_t index) const;
};

/// Everything sl_step needs besides the slice itself.
struct StepContext {
    const ProblemSpec* spec = nullptr;
    const GridSpec* grid = nullptr;
    ControlTables controls;
    QuadratureRule rule;
    double dt = 0.0;
    double growth_constant = 0.0;

    static StepContext make(const ProblemSpec& spec, const GridSpec& grid, double dt);
};

/// Data at T- for a variant of interval n-1.
ValueSlice terminal_slice(const VariantKey& variant, const GridSpec& grid, const ProblemSpec& spec);

/// Left limit at t_{i+1} of `this_variant` built from the interval-(i+1)
/// slice `next_w` plus the date-(i+1) penalty.
ValueSlice jump_slice(const ValueSlice& next_w, const VariantKey& this_variant, const GridSpec& grid,
                      const ProblemSpec& spec);

/// One backward semi-Lagrangian step from time s + dt to time s.
ValueSlice sl_step(const ValueSlice& next, double s, const StepContext& ctx, bool record_policy = false);

using BoundaryLookup = std::function<const ValueSlice*(const VariantKey&)>;

/// Overwrites the m = 0 face and every p_k = 0 face with the one-move-lower
/// variants. Throws InvalidArgument if a lower variant is unavailable.
void boundary_inject(ValueSlice& slice, const BoundaryLookup& lookup);

/// Steps one variant across its interval; `boundary` supplies lower variants
/// at each level. Returns levels 0..steps-1 in increasing order.
std::vector<ValueSlice> solve_interval(const VariantKey& variant, const ValueSlice& data_at_right,
                                       const StepContext& ctx, const IntervalSchedule& schedule,
                                       const std::function<const ValueSlice*(const VariantKey&, int level)>& boundary);

/// Solves every lattice variant of intervals n-1 down to `interval_index`.
SolveResult solve_problem(const ProblemSpec& spec, const GridSpec& grid, int interval_index,
                          const ScalingFns& scaling = ScalingFns::unit());

/// Result of a single invariant family.
struct InvariantCheck {
    std::string name;
    std::size_t violations = 0;
    double worst = 0.0;
    std::string where;
};

struct InvariantReport {
    std::vector<InvariantCheck> checks;
    [[nodiscard]] bool ok() const;
    [[nodiscard]] std::size_t total_violations() const;
};

/// Nonnegativity, growth bound, budget monotonicity, budget Lipschitz bound
/// (1 + lipschitz_slack), and the sandwich w0 - m <= w <= w0 against the
/// no-m variant when `w0` is given.
InvariantReport check_slice_invariants(const ValueSlice& slice, double growth_constant, double lipschitz_slack = 0.1,
                                       const ValueSlice* w0 = nullptr);

/// Applies check_slice_invariants to every retained slice.
InvariantReport check_invariants(const SolveResult& result, double lipschitz_slack = 0.1);

/// Node of a retained slice used for residual sampling.
struct SampleNode {
    VariantKey variant;
    int level = 0;
    std::vector<int> index;
};

struct ResidualStats {
    std::vector<double> values;  // signed sup H per node
    double median_abs = 0.0;
    double mean_abs = 0.0;
    double max_abs = 0.0;
};

/// Jet of the numerical w at a node: forward difference in time against level
/// + 1, central differences in space. Requires the node to be at least two
/// cells from every face and level + 1 to be retained.
JetPoint jet_at(const SolveResult& result, const SampleNode& node);

/// Up to `count` nodes of a retained slice spread evenly over the nodes at
/// least two cells from every face. Needs level + 1 retained for jet_at.
std::vector<SampleNode> interior_samples(const SolveResult& result, const VariantKey& variant, int level,
                                         std::size_t count);

ResidualStats hjb_residual(const SolveResult& result, const std::vector<SampleNode>& nodes, const ScalingFns& scaling,
                           const ProblemSpec& spec, int sphere_resolution, int control_resolution = 5);

double median(std::vector<double> v);

} // namespace lsc
