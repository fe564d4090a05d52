#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lsc/model.hpp"

namespace lsc {

/// Positive rescaling functions kappa (for p) and lambda (for m).
struct ScalingFns {
    std::function<double(double)> kappa;
    std::function<double(double)> lambda;

    /// kappa = lambda = 1.
    static ScalingFns unit();
    /// kappa(p) = max(1, p), lambda(m) = max(1, m).
    static ScalingFns one_vee();
};

/// Second-order jet (t, z, p, m, q, A, c). Gradient and Hessian are ordered
/// z_1..z_d, p_1..p_np, m (the m entry is absent when has_m is false).
struct JetPoint {
    double t = 0.0;
    Vector z;
    Vector p;
    double m = 0.0;
    bool has_m = true;
    Vector q;
    Matrix A;
    double c = 0.0;

    [[nodiscard]] int d() const { return static_cast<int>(z.size()); }
    [[nodiscard]] int np() const { return static_cast<int>(p.size()); }
    [[nodiscard]] int dim() const { return d() + np() + (has_m ? 1 : 0); }
    [[nodiscard]] int p_index(int k) const { return d() + k; }
    [[nodiscard]] int m_index() const { return d() + np(); }
    /// Dimension 1 + d*np + d (or 1 + d*np without m) of the compactified directions.
    [[nodiscard]] int sphere_dim() const { return 1 + d() * np() + (has_m ? d() : 0); }

    /// Throws InvalidArgument on inconsistent blocks or an asymmetric A.
    void validate() const;
};

/// Unit direction b = (b_1, b_flat_1..b_flat_np, b_sharp).
struct SpherePoint {
    Vector b;

    [[nodiscard]] bool in_D(double tol = 1e-12) const { return std::abs(b[0]) <= tol; }
    [[nodiscard]] bool is_unit(double tol = 1e-12) const { return std::abs(b.norm() - 1.0) <= tol; }
};

double eval_L(const JetPoint& theta, const Vector& u, const Vector& a, const Vector& e, const ScalingFns& scaling,
              const SdeCoefficients& sde);

double eval_F(const JetPoint& theta, const Vector& a, const Vector& e, const ScalingFns& scaling);

double eval_H(const JetPoint& theta, const Vector& u, const SpherePoint& b, const ScalingFns& scaling,
              const SdeCoefficients& sde);

/// Nested deterministic sample of the unit sphere in R^dim: hyperspherical
/// angles on multiples of pi/resolution, plus the pole and +-e_k for k >= 2.
/// The sample for resolution r is contained in the sample for 2r.
std::vector<SpherePoint> sphere_sample(int dim, int resolution);

struct SupResult {
    double value = 0.0;
    Vector u;
    SpherePoint b;
};

/// Maximum of eval_H over discretize(control_resolution) x sphere_sample.
SupResult sup_hamiltonian(const JetPoint& theta, const ControlSet& controls, const ScalingFns& scaling,
                          const SdeCoefficients& sde, int sphere_resolution, int control_resolution = 5);

/// Symmetric matrix G whose quadratic form equals H with unit scaling.
Matrix g_matrix(const JetPoint& theta, const Vector& u, const SdeCoefficients& sde);

/// diag(1, kappa(p_1) I_d, ..., kappa(p_np) I_d, lambda(m) I_d).
Matrix q_scaling(const JetPoint& theta, const ScalingFns& scaling);

/// Predicted ratio det[(QGQ)^(k)] / det[G^(k)] for the leading k x k minor.
double determinant_scale(int k, int d, const std::vector<double>& kappas, double lambda);

struct GMatrixReport {
    int trials = 0;
    double max_form_violation = 0.0;         // b'(QGQ)b vs (Qb)'G(Qb)
    double max_determinant_violation = 0.0;  // relative, over all minors
    double max_h_violation = 0.0;            // b'Gb vs eval_H with unit scaling
};

GMatrixReport g_matrix_check(const JetPoint& theta, const Vector& u, const ScalingFns& scaling,
                             const SdeCoefficients& sde, int trials, std::uint64_t seed = 1);

/// phi(t, p, m) = exp(t_right - t) (1 + sum ln(1 + p_k) + ln(1 + m)).
double supersolution_phi(double t, const Vector& p, double m, bool has_m, double t_right);

/// Jet of w + xi * phi given the jet of w.
JetPoint augment_with_phi(const JetPoint& theta, double xi, double t_right);

struct GapReport {
    double required = 0.0;  // xi / 8
    double min_gap = 0.0;   // min over jets of (sup H - xi / 8)
    std::vector<double> sup_values;
};

GapReport strict_supersolution_gap(const std::vector<JetPoint>& value_jets, double xi, double t_right,
                                   const ControlSet& controls, const ScalingFns& scaling,
                                   const SdeCoefficients& sde, int sphere_resolution, int control_resolution = 5);

} // namespace lsc
