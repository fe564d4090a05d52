#include "lsc/presets.hpp"

#include <algorithm>
#include <cmath>

#include "lsc/error.hpp"

namespace lsc {

namespace {

double pos(double x) { return x > 0.0 ? x : 0.0; }

Vector scalar(double x) { return Vector::Constant(1, x); }

GridSpec grid_1d(double zlo, double zhi, int nz, double pmax, int np, double mmax, int nm, double dt, double a_max) {
    GridSpec g;
    g.z_axes = {UniformAxis{zlo, zhi, nz}};
    g.p_axis = UniformAxis{0.0, pmax, np};
    g.m_axis = UniformAxis{0.0, mmax, nm};
    g.dt = dt;
    g.a_max = a_max;
    return g;
}

} // namespace

ProblemSpec gbm_spec(double mu, double sigma, std::vector<double> dates, std::string name) {
    ProblemSpec s;
    s.name = std::move(name);
    s.state_dim = 1;
    s.sde.drift = [mu](double, const Vector& z, const Vector&) { return Vector(mu * z); };
    s.sde.diffusion = [sigma](double, const Vector& z, const Vector&) { return Matrix(Matrix::Constant(1, 1, sigma * z[0])); };
    s.sde.lipschitz_z = std::max(std::abs(mu), std::abs(sigma));
    s.sde.growth_z = std::max(std::abs(mu), std::abs(sigma));
    s.loss.terminal_cost = [](const Vector& z) { return pos(z[0]); };
    s.loss.loss = [](const Vector& z) { return pos(z[0]); };
    s.loss.lipschitz_f = 1.0;
    s.loss.lipschitz_psi = 1.0;
    s.grid.dates = std::move(dates);
    s.controls = ControlSet::finite({scalar(0.0)});
    s.domain = StateBox{scalar(0.2), scalar(3.0)};

    // Z stays on the side of zero it starts from, so E[max(Z_s, 0)] is explicit.
    ConditionalMeans cm;
    cm.mean_f = [mu](double t, const Vector& z, double s) { return pos(z[0]) * std::exp(mu * (s - t)); };
    cm.mean_psi = [mu](double t, const Vector& z, double s, int) { return pos(z[0]) * std::exp(mu * (s - t)); };
    cm.grad_mean_f = [mu](double t, const Vector& z, double s) {
        return scalar(z[0] > 0.0 ? std::exp(mu * (s - t)) : 0.0);
    };
    cm.grad_mean_psi = [mu](double t, const Vector& z, double s, int) {
        return scalar(z[0] > 0.0 ? std::exp(mu * (s - t)) : 0.0);
    };
    s.analytic = cm;
    return s;
}

std::vector<std::string> preset_names() { return {"gbm1", "gbm2", "drift2", "affine1"}; }

Preset make_preset(const std::string& name) {
    Preset p;
    if (name == "gbm1" || name == "gbm2") {
        p.spec = name == "gbm1" ? gbm_spec(0.1, 0.2, {0.0, 1.0}, name) : gbm_spec(0.1, 0.2, {0.0, 0.5, 1.0}, name);
        p.spec.grid.thresholds = name == "gbm1" ? std::vector<double>{1.2} : std::vector<double>{1.0, 1.2};
        p.grid = grid_1d(0.2, 3.0, 101, 2.0, 41, 2.0, 41, 0.01, 2.0);
        return p;
    }
    if (name == "drift2") {
        ProblemSpec& s = p.spec;
        s.name = name;
        s.state_dim = 1;
        s.sde.drift = [](double, const Vector&, const Vector& u) { return Vector(u); };
        s.sde.diffusion = [](double, const Vector&, const Vector&) { return Matrix(Matrix::Constant(1, 1, 0.2)); };
        s.sde.lipschitz_z = 0.0;
        s.sde.growth_z = 0.2;
        s.loss.terminal_cost = [](const Vector& z) { return pos(z[0]); };
        s.loss.loss = [](const Vector& z) { return pos(1.0 - z[0]); };
        s.loss.lipschitz_f = 1.0;
        s.loss.lipschitz_psi = 1.0;
        s.grid.dates = {0.0, 0.5, 1.0};
        s.grid.thresholds = {0.3, 0.3};
        s.controls = ControlSet::finite({scalar(-0.2), scalar(0.2)});
        s.domain = StateBox{scalar(-0.5), scalar(2.5)};
        p.grid = grid_1d(-0.5, 2.5, 11, 1.0, 5, 2.0, 5, 0.25, 0.4);
        p.grid.budget_controls = BudgetControlKind::uniform;
        p.grid.budget_points = 3;
        return p;
    }
    if (name == "affine1") {
        ProblemSpec& s = p.spec;
        s.name = name;
        s.state_dim = 1;
        s.sde.drift = [](double, const Vector& z, const Vector& u) { return Vector(0.05 * z + u); };
        s.sde.diffusion = [](double, const Vector& z, const Vector&) {
            return Matrix(Matrix::Constant(1, 1, 0.2 * z[0]));
        };
        s.sde.lipschitz_z = 0.2;
        s.sde.growth_z = 0.2;
        s.loss.terminal_cost = [](const Vector& z) { return pos(z[0]); };
        s.loss.loss = [](const Vector& z) { return pos(1.0 - z[0]); };
        s.loss.lipschitz_f = 1.0;
        s.loss.lipschitz_psi = 1.0;
        s.grid.dates = {0.0, 1.0};
        s.grid.thresholds = {0.1};
        s.controls = ControlSet::box(scalar(-0.2), scalar(0.2));
        s.domain = StateBox{scalar(0.2), scalar(3.0)};
        p.grid = grid_1d(0.2, 3.0, 61, 1.0, 21, 3.0, 21, 0.02, 1.0);
        p.grid.control_resolution = 3;
        return p;
    }
    throw InvalidArgument("unknown preset '" + name + "'");
}

} // namespace lsc
