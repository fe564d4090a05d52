#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lsc/model.hpp"

namespace lsc {

/// Uniform axis with `count` nodes on [lo, hi].
struct UniformAxis {
    double lo = 0.0;
    double hi = 1.0;
    int count = 2;

    [[nodiscard]] double step() const { return (hi - lo) / (count - 1); }
    [[nodiscard]] double value(int i) const { return lo + i * step(); }

    /// Cell index k and weight t such that x = (1 - t) x_k + t x_{k+1}.
    /// `penalty` carries the amount by which x fell below a clamped lower end.
    struct Location {
        int k = 0;
        double t = 0.0;
        double penalty = 0.0;
    };

    /// Budget-axis lookup: coordinates within 1e-9 cells of a node snap to it,
    /// values above `hi` clamp to the last node, values below `lo` clamp to the
    /// first node and report lo - x as penalty.
    [[nodiscard]] Location locate_budget(double x) const;

    /// State-axis lookup with linear extrapolation: k is kept in [0, count-2]
    /// and t may leave [0, 1].
    [[nodiscard]] Location locate_extrapolate(double x) const;
};

inline bool operator==(const UniformAxis& a, const UniformAxis& b) {
    return a.lo == b.lo && a.hi == b.hi && a.count == b.count;
}

/// Canonical interpolation primitive shared by every evaluation path.
inline double lerp(double a, double b, double t) { return (1.0 - t) * a + t * b; }

enum class QuadratureKind { two_point, gauss_hermite };

/// How the truncated martingale controls a_k, e are discretised.
/// `aligned` uses multiples of (budget step)/sqrt(dt) so that two-point
/// increments land exactly on budget nodes; `uniform` spreads `budget_points`
/// values over [-a_max, a_max].
enum class BudgetControlKind { aligned, uniform };

struct GridSpec {
    std::vector<UniformAxis> z_axes;
    UniformAxis p_axis{0.0, 2.0, 41};
    UniformAxis m_axis{0.0, 2.0, 41};
    double dt = 0.01;
    QuadratureKind quadrature = QuadratureKind::two_point;
    int gauss_hermite_order = 3;
    double a_max = 1.0;
    int control_resolution = 5;
    BudgetControlKind budget_controls = BudgetControlKind::aligned;
    int budget_points = 3;

    /// Time levels retained in the result besides interval endpoints: every
    /// `keep_stride`-th level (0 disables) plus its successor, and the levels
    /// nearest to each entry of `keep_times`.
    int keep_stride = 0;
    std::vector<double> keep_times;
    bool keep_all_levels = false;
    bool record_policy = false;
    double memory_budget_bytes = 3.5e9;

    /// Throws InvalidArgument on the first violated invariant.
    void validate(int state_dim) const;
};

struct QuadratureRule {
    std::vector<Vector> nodes;    // Brownian increments
    std::vector<double> weights;  // sum to one
};

/// two_point: {+-sqrt(dt)}^d, node q has component l negative iff bit l of q is
/// set. gauss_hermite: tensor Gauss-Hermite nodes scaled by sqrt(dt).
QuadratureRule make_quadrature(QuadratureKind kind, int order, int d, double dt);

/// Nodes and weights of the probabilists' Gauss-Hermite rule (Golub-Welsch).
void gauss_hermite(int order, std::vector<double>& nodes, std::vector<double>& weights);

/// Axes of one variant: z_1..z_d, then p_k for each budgeted date (ascending),
/// then m. The last axis is contiguous in memory.
struct VariantGrid {
    int d = 1;
    std::vector<int> p_dates;
    bool has_m = true;
    std::vector<UniformAxis> axes;
    std::vector<std::size_t> strides;
    std::size_t size = 0;
    std::size_t z_size = 1;
    std::size_t budget_size = 1;

    static VariantGrid make(const GridSpec& grid, const VariantKey& key, int d);

    [[nodiscard]] int budget_axes() const { return static_cast<int>(axes.size()) - d; }
    [[nodiscard]] int rank() const { return static_cast<int>(axes.size()); }
    [[nodiscard]] std::size_t flat(const std::vector<int>& index) const;
    [[nodiscard]] std::vector<int> unflatten(std::size_t flat) const;
    /// Physical coordinates of a node (z, p..., m).
    [[nodiscard]] Vector coordinates(const std::vector<int>& index) const;
};

/// Candidate values for each budget control block. Every entry is a d-vector;
/// p axes share `p_values`.
struct BudgetControlTable {
    std::vector<Vector> p_values;
    std::vector<Vector> m_values;
};

BudgetControlTable make_budget_controls(const GridSpec& grid, int d, double dt);

/// Uniform stepping of one constraint interval [t_i, t_{i+1}].
struct IntervalSchedule {
    int interval = 0;
    double t_left = 0.0;
    double t_right = 0.0;
    int steps = 1;
    double dt = 0.0;

    /// Time of level j in 0..steps; level `steps` is exactly t_right.
    [[nodiscard]] double time(int level) const {
        return level == steps ? t_right : t_left + level * dt;
    }
    [[nodiscard]] int nearest_level(double t) const;
};

/// Throws InvalidArgument if dt exceeds an inter-date gap or a gap is empty.
std::vector<IntervalSchedule> make_schedule(const TimeGrid& grid, double dt);

/// Default truncation 4 * lipschitz_z * (largest sampled |sigma|) on the domain.
double default_a_max(const ProblemSpec& spec, std::uint64_t seed = 5, int samples = 200);

} // namespace lsc
