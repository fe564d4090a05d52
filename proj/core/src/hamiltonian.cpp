#include "lsc/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lsc/error.hpp"

namespace lsc {

ScalingFns ScalingFns::unit() {
    return {[](double) { return 1.0; }, [](double) { return 1.0; }};
}

ScalingFns ScalingFns::one_vee() {
    return {[](double p) { return std::max(1.0, p); }, [](double m) { return std::max(1.0, m); }};
}

void JetPoint::validate() const {
    const int n = dim();
    if (d() < 1) throw InvalidArgument("jet: empty state vector");
    if (q.size() != n) throw InvalidArgument("jet: gradient has size " + std::to_string(q.size()) + ", expected " +
                                             std::to_string(n));
    if (A.rows() != n || A.cols() != n) throw InvalidArgument("jet: Hessian block dimensions inconsistent");
    const double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * (1.0 + A.cwiseAbs().maxCoeff())) throw InvalidArgument("jet: Hessian is not symmetric");
}

namespace {

void check_blocks(const JetPoint& theta, const Vector& a, const Vector& e) {
    const int d = theta.d();
    if (a.size() != d * theta.np())
        throw InvalidArgument("a has size " + std::to_string(a.size()) + ", expected " +
                              std::to_string(d * theta.np()) + " (one d-block per budgeted date)");
    if (e.size() != (theta.has_m ? d : 0)) throw InvalidArgument("e has the wrong size");
}

double L_with(const JetPoint& th, const Vector& mu, const Matrix& sigma, const Vector& a, const Vector& e,
              const ScalingFns& s) {
    const int d = th.d();
    const auto qz = th.q.head(d);
    const auto Azz = th.A.topLeftCorner(d, d);
    double out = -mu.dot(qz) - 0.5 * (sigma * sigma.transpose() * Azz).trace();
    if (th.has_m) {
        const Vector Azm = th.A.block(0, th.m_index(), d, 1);
        out -= s.lambda(th.m) * e.dot(sigma.transpose() * Azm);
    }
    for (int k = 0; k < th.np(); ++k) {
        const Vector Azp = th.A.block(0, th.p_index(k), d, 1);
        out -= s.kappa(th.p[k]) * a.segment(k * d, d).dot(sigma.transpose() * Azp);
    }
    return out;
}

double F_with(const JetPoint& th, const Vector& a, const Vector& e, const ScalingFns& s) {
    const int d = th.d();
    double out = 0.0;
    const double lam = th.has_m ? s.lambda(th.m) : 0.0;
    if (th.has_m) out -= 0.5 * lam * lam * e.squaredNorm() * th.A(th.m_index(), th.m_index());
    for (int k = 0; k < th.np(); ++k) {
        const double kap = s.kappa(th.p[k]);
        const auto ak = a.segment(k * d, d);
        out -= 0.5 * kap * kap * ak.squaredNorm() * th.A(th.p_index(k), th.p_index(k));
        if (th.has_m) out -= lam * kap * e.dot(ak) * th.A(th.p_index(k), th.m_index());
    }
    return out;
}

double H_with(const JetPoint& th, const Vector& mu, const Matrix& sigma, const SpherePoint& b, const ScalingFns& s) {
    const int d = th.d();
    const int na = d * th.np();
    const Vector flat = b.b.segment(1, na);
    const Vector sharp = th.has_m ? Vector(b.b.segment(1 + na, d)) : Vector();
    if (b.in_D()) return F_with(th, flat, sharp, s);
    const double b1 = b.b[0];
    const Vector abar = flat / b1;
    const Vector ebar = sharp / b1;
    return b1 * b1 * (-th.c + L_with(th, mu, sigma, abar, ebar, s) + F_with(th, abar, ebar, s));
}

} // namespace

double eval_L(const JetPoint& theta, const Vector& u, const Vector& a, const Vector& e, const ScalingFns& scaling,
              const SdeCoefficients& sde) {
    check_blocks(theta, a, e);
    return L_with(theta, sde.drift(theta.t, theta.z, u), sde.diffusion(theta.t, theta.z, u), a, e, scaling);
}

double eval_F(const JetPoint& theta, const Vector& a, const Vector& e, const ScalingFns& scaling) {
    check_blocks(theta, a, e);
    return F_with(theta, a, e, scaling);
}

double eval_H(const JetPoint& theta, const Vector& u, const SpherePoint& b, const ScalingFns& scaling,
              const SdeCoefficients& sde) {
    if (b.b.size() != theta.sphere_dim()) throw InvalidArgument("sphere point has the wrong dimension");
    return H_with(theta, sde.drift(theta.t, theta.z, u), sde.diffusion(theta.t, theta.z, u), b, scaling);
}

SupResult sup_hamiltonian(const JetPoint& theta, const ControlSet& controls, const ScalingFns& scaling,
                          const SdeCoefficients& sde, int sphere_resolution, int control_resolution) {
    const auto us = controls.discretize(control_resolution);
    if (us.empty()) throw InvalidArgument("empty control discretization");
    const auto sphere = sphere_sample(theta.sphere_dim(), sphere_resolution);
    SupResult best;
    best.value = -std::numeric_limits<double>::infinity();
    for (const auto& u : us) {
        const Vector mu = sde.drift(theta.t, theta.z, u);
        const Matrix sigma = sde.diffusion(theta.t, theta.z, u);
        for (const auto& b : sphere) {
            const double h = H_with(theta, mu, sigma, b, scaling);
            if (h > best.value) {
                best.value = h;
                best.u = u;
                best.b = b;
            }
        }
    }
    return best;
}

Matrix g_matrix(const JetPoint& th, const Vector& u, const SdeCoefficients& sde) {
    const int d = th.d();
    const int np = th.np();
    const int n = th.sphere_dim();
    const Vector mu = sde.drift(th.t, th.z, u);
    const Matrix sigma = sde.diffusion(th.t, th.z, u);
    const auto Azz = th.A.topLeftCorner(d, d);
    Matrix G = Matrix::Zero(n, n);
    G(0, 0) = -th.c - mu.dot(th.q.head(d)) - 0.5 * (sigma * sigma.transpose() * Azz).trace();
    const Matrix I = Matrix::Identity(d, d);
    const int m_off = 1 + d * np;
    for (int k = 0; k < np; ++k) {
        const int off = 1 + k * d;
        const Vector row = -0.5 * sigma.transpose() * th.A.block(0, th.p_index(k), d, 1);
        G.block(0, off, 1, d) = row.transpose();
        G.block(off, 0, d, 1) = row;
        G.block(off, off, d, d) = -0.5 * th.A(th.p_index(k), th.p_index(k)) * I;
        if (th.has_m) {
            G.block(off, m_off, d, d) = -0.5 * th.A(th.p_index(k), th.m_index()) * I;
            G.block(m_off, off, d, d) = G.block(off, m_off, d, d);
        }
    }
    if (th.has_m) {
        const Vector row = -0.5 * sigma.transpose() * th.A.block(0, th.m_index(), d, 1);
        G.block(0, m_off, 1, d) = row.transpose();
        G.block(m_off, 0, d, 1) = row;
        G.block(m_off, m_off, d, d) = -0.5 * th.A(th.m_index(), th.m_index()) * I;
    }
    return G;
}

Matrix q_scaling(const JetPoint& th, const ScalingFns& scaling) {
    const int d = th.d();
    Vector diag(th.sphere_dim());
    diag[0] = 1.0;
    for (int k = 0; k < th.np(); ++k) diag.segment(1 + k * d, d).setConstant(scaling.kappa(th.p[k]));
    if (th.has_m) diag.tail(d).setConstant(scaling.lambda(th.m));
    return diag.asDiagonal();
}

double determinant_scale(int k, int d, const std::vector<double>& kappas, double lambda) {
    const int np = static_cast<int>(kappas.size());
    double scale = std::pow(lambda, 2.0 * std::max(k - np * d - 1, 0));
    // The product runs over the budget blocks met by the leading k x k minor,
    // which never exceeds the np blocks present.
    const int jmax = std::min((k - 1) / d + 1, np);
    for (int j = 1; j <= jmax; ++j)
        scale *= std::pow(kappas[static_cast<std::size_t>(j - 1)], 2.0 * std::min(d, (1 - j) * d + k - 1));
    return scale;
}

GMatrixReport g_matrix_check(const JetPoint& theta, const Vector& u, const ScalingFns& scaling,
                             const SdeCoefficients& sde, int trials, std::uint64_t seed) {
    GMatrixReport rep;
    rep.trials = trials;
    const Matrix G = g_matrix(theta, u, sde);
    const Matrix Q = q_scaling(theta, scaling);
    const Matrix QGQ = Q.transpose() * G * Q;
    const ScalingFns unit = ScalingFns::unit();
    const int n = static_cast<int>(G.rows());

    std::vector<double> kappas;
    for (int k = 0; k < theta.np(); ++k) kappas.push_back(scaling.kappa(theta.p[k]));
    const double lam = theta.has_m ? scaling.lambda(theta.m) : 1.0;
    for (int k = 1; k <= n; ++k) {
        const double lhs = QGQ.topLeftCorner(k, k).determinant();
        const double rhs = determinant_scale(k, theta.d(), kappas, lam) * G.topLeftCorner(k, k).determinant();
        const double denom = std::max(std::abs(lhs), std::abs(rhs)) + std::numeric_limits<double>::min();
        rep.max_determinant_violation = std::max(rep.max_determinant_violation, std::abs(lhs - rhs) / denom);
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (int s = 0; s < trials; ++s) {
        Vector b(n);
        for (int k = 0; k < n; ++k) b[k] = normal(rng);
        b.normalize();
        const Vector Qb = Q * b;
        const double form = b.dot(QGQ * b);
        const double direct = Qb.dot(G * Qb);
        rep.max_form_violation = std::max(rep.max_form_violation, std::abs(form - direct) / (1.0 + std::abs(direct)));
        const double quad = b.dot(G * b);
        const double h = eval_H(theta, u, SpherePoint{b}, unit, sde);
        rep.max_h_violation = std::max(rep.max_h_violation, std::abs(quad - h) / (1.0 + std::abs(quad)));
    }
    return rep;
}

double supersolution_phi(double t, const Vector& p, double m, bool has_m, double t_right) {
    double inner = 1.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) inner += std::log1p(p[k]);
    if (has_m) inner += std::log1p(m);
    return std::exp(t_right - t) * inner;
}

JetPoint augment_with_phi(const JetPoint& theta, double xi, double t_right) {
    JetPoint out = theta;
    const double g = std::exp(t_right - theta.t);
    out.c += -xi * supersolution_phi(theta.t, theta.p, theta.m, theta.has_m, t_right);
    for (int k = 0; k < theta.np(); ++k) {
        const double s = 1.0 + theta.p[k];
        out.q[theta.p_index(k)] += xi * g / s;
        out.A(theta.p_index(k), theta.p_index(k)) += -xi * g / (s * s);
    }
    if (theta.has_m) {
        const double s = 1.0 + theta.m;
        out.q[theta.m_index()] += xi * g / s;
        out.A(theta.m_index(), theta.m_index()) += -xi * g / (s * s);
    }
    return out;
}

GapReport strict_supersolution_gap(const std::vector<JetPoint>& value_jets, double xi, double t_right,
                                   const ControlSet& controls, const ScalingFns& scaling,
                                   const SdeCoefficients& sde, int sphere_resolution, int control_resolution) {
    if (!(xi > 0.0)) throw InvalidArgument("xi must be positive");
    GapReport rep;
    rep.required = xi / 8.0;
    rep.min_gap = std::numeric_limits<double>::infinity();
    for (const auto& jet : value_jets) {
        const auto sup = sup_hamiltonian(augment_with_phi(jet, xi, t_right), controls, scaling, sde,
                                         sphere_resolution, control_resolution);
        rep.sup_values.push_back(sup.value);
        rep.min_gap = std::min(rep.min_gap, sup.value - rep.required);
    }
    return rep;
}

} // namespace lsc
