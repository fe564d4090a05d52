#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lsc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using DriftFn = std::function<Vector(double t, const Vector& z, const Vector& u)>;
using DiffusionFn = std::function<Matrix(double t, const Vector& z, const Vector& u)>;
using StateFn = std::function<double(const Vector& z)>;
using RunningCostFn = std::function<double(double t, const Vector& z, const Vector& u)>;

/// Controlled dynamics dZ = drift dt + diffusion dW with declared regularity constants.
struct SdeCoefficients {
    DriftFn drift;
    DiffusionFn diffusion;
    double lipschitz_z = 0.0;
    double growth_z = 0.0;
};

/// Terminal cost f and loss Psi. `per_date_losses`, when non-empty, holds one
/// loss per constraint date t_1..t_n and overrides `loss`.
struct LossSpec {
    StateFn terminal_cost;
    StateFn loss;
    double lipschitz_f = 0.0;
    double lipschitz_psi = 0.0;
    std::vector<StateFn> per_date_losses;

    /// Loss applied at constraint date k (1-based).
    [[nodiscard]] const StateFn& loss_at(int date) const;
};

/// Dates t_0 = 0 <= t_1 <= ... <= t_n = T.
struct TimeGrid {
    std::vector<double> dates;
    std::vector<double> thresholds;  // optional default budgets p_1..p_n

    [[nodiscard]] int n() const { return static_cast<int>(dates.size()) - 1; }
    [[nodiscard]] double horizon() const { return dates.back(); }
};

struct ControlSet {
    enum class Kind { box, finite };
    Kind kind = Kind::finite;
    int dimension = 1;
    Vector lower;                 // box only
    Vector upper;                 // box only
    std::vector<Vector> points;   // finite only

    static ControlSet box(Vector lower, Vector upper);
    static ControlSet finite(std::vector<Vector> points);

    /// Points used for optimisation: all points if finite, a regular grid with
    /// `resolution` points per dimension if box (midpoint when resolution == 1).
    [[nodiscard]] std::vector<Vector> discretize(int resolution) const;
    [[nodiscard]] bool is_singleton() const;
};

/// Axis-aligned box of states used for sampled regularity checks.
struct StateBox {
    Vector lower;
    Vector upper;
};

/// Analytic conditional expectations for uncontrolled models:
/// mean_f(t, z, s) = E[f(Z_s) | Z_t = z], and similarly for the loss at a date.
struct ConditionalMeans {
    std::function<double(double t, const Vector& z, double s)> mean_f;
    std::function<double(double t, const Vector& z, double s, int date)> mean_psi;
    std::function<Vector(double t, const Vector& z, double s)> grad_mean_f;
    std::function<Vector(double t, const Vector& z, double s, int date)> grad_mean_psi;
};

struct ProblemSpec {
    std::string name;
    SdeCoefficients sde;
    LossSpec loss;
    TimeGrid grid;
    ControlSet controls;
    int state_dim = 1;
    StateBox domain;
    std::optional<ConditionalMeans> analytic;
};

struct Violation {
    std::string field;
    std::string message;
};

/// Structural and sampled-regularity checks. An empty result means the spec is
/// admissible for solving.
std::vector<Violation> validate_spec(const ProblemSpec& spec, std::uint64_t seed = 7, int samples = 200);

/// Appends the integrator of `running_cost` as an extra state coordinate and
/// adds it to the terminal cost. Throws InvalidArgument if a sampled value of
/// the running cost is negative.
ProblemSpec augment_running_cost(const ProblemSpec& spec, RunningCostFn running_cost,
                                 double lipschitz_running = 0.0);

/// One node of the lattice of penalised sub-problems on [t_i, t_{i+1}).
struct VariantKey {
    int interval = 0;
    std::vector<int> active_p;   // dates carrying a budget axis, sorted
    bool has_m = true;
    std::vector<int> plain_psi;  // dates with un-budgeted loss, sorted

    [[nodiscard]] int aux_dimension() const { return static_cast<int>(active_p.size()) + (has_m ? 1 : 0); }
    [[nodiscard]] bool is_root() const { return plain_psi.empty() && has_m; }
    [[nodiscard]] bool is_active(int date) const;
    [[nodiscard]] bool is_plain(int date) const;

    /// Stable identifier used in file names, e.g. "root_i0" or "v0_P2_noM".
    [[nodiscard]] std::string name() const;

    /// Key obtained by dropping the terminal budget (m = 0 face).
    [[nodiscard]] VariantKey without_m() const;
    /// Key obtained by moving `date` from the budgeted to the plain set (p = 0 face).
    [[nodiscard]] VariantKey with_plain(int date) const;
    /// The same sub-problem on the next interval (date i+1 removed).
    [[nodiscard]] VariantKey on_next_interval() const;

    friend bool operator==(const VariantKey&, const VariantKey&) = default;
    friend auto operator<=>(const VariantKey&, const VariantKey&) = default;
};

VariantKey root_variant(int interval, int n);

/// Every variant reachable from the root of interval i, ordered so that each
/// variant comes after all variants supplying its boundary data.
std::vector<VariantKey> build_variant_lattice(const ProblemSpec& spec, int interval_index);

struct ConvexityCertificate {
    enum class Verdict { sufficient_conditions_hold, unknown };
    bool drift_affine = false;
    bool diffusion_affine = false;
    bool terminal_cost_convex = false;
    bool loss_convex = false;
    bool controls_convex = false;
    Verdict verdict = Verdict::unknown;

    [[nodiscard]] bool is_affine_in_state_and_control() const { return drift_affine && diffusion_affine; }
    [[nodiscard]] bool costs_convex() const { return terminal_cost_convex && loss_convex; }
};

/// Sampled check of the affine-dynamics / convex-costs / convex-controls
/// conditions under which zero-level optimisers exist.
ConvexityCertificate check_convexity_preconditions(const ProblemSpec& spec, std::uint64_t seed = 11,
                                                   int samples = 200);

/// Upper bound C with 0 <= w <= C (1 + |z|), from the declared growth and
/// Lipschitz constants.
double growth_constant(const ProblemSpec& spec);

} // namespace lsc
