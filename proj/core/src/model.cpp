#include "lsc/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "lsc/error.hpp"

namespace lsc {

namespace {

constexpr double kRelTol = 1e-9;

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

Vector uniform_in_box(std::mt19937_64& rng, const Vector& lo, const Vector& hi) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector x(lo.size());
    for (Eigen::Index k = 0; k < lo.size(); ++k) x[k] = lo[k] + unit(rng) * (hi[k] - lo[k]);
    return x;
}

Vector sample_control(std::mt19937_64& rng, const ControlSet& controls) {
    if (controls.kind == ControlSet::Kind::box) return uniform_in_box(rng, controls.lower, controls.upper);
    std::uniform_int_distribution<std::size_t> pick(0, controls.points.size() - 1);
    return controls.points[pick(rng)];
}

// Corners of the domain box are always included so that sign violations at
// the box edges are not missed by random sampling.
std::vector<Vector> domain_samples(std::mt19937_64& rng, const StateBox& box, int samples) {
    std::vector<Vector> out;
    const auto d = box.lower.size();
    if (d <= 10) {
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
            Vector c(d);
            for (Eigen::Index k = 0; k < d; ++k) c[k] = (mask >> k) & 1 ? box.upper[k] : box.lower[k];
            out.push_back(c);
        }
    }
    for (int s = 0; s < samples; ++s) out.push_back(uniform_in_box(rng, box.lower, box.upper));
    return out;
}

bool within(double value, double bound) { return value <= bound * (1.0 + kRelTol) + 1e-12; }

std::string fmt_double(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

} // namespace

const StateFn& LossSpec::loss_at(int date) const {
    if (!per_date_losses.empty()) {
        if (date < 1 || date > static_cast<int>(per_date_losses.size()))
            throw InvalidArgument("loss requested for date " + std::to_string(date) + " outside 1.." +
                                  std::to_string(per_date_losses.size()));
        return per_date_losses[static_cast<std::size_t>(date - 1)];
    }
    return loss;
}

ControlSet ControlSet::box(Vector lower, Vector upper) {
    ControlSet c;
    c.kind = Kind::box;
    c.dimension = static_cast<int>(lower.size());
    c.lower = std::move(lower);
    c.upper = std::move(upper);
    return c;
}

ControlSet ControlSet::finite(std::vector<Vector> points) {
    ControlSet c;
    c.kind = Kind::finite;
    c.dimension = points.empty() ? 0 : static_cast<int>(points.front().size());
    c.points = std::move(points);
    return c;
}

std::vector<Vector> ControlSet::discretize(int resolution) const {
    if (kind == Kind::finite) {
        if (points.empty()) throw InvalidArgument("empty control discretization");
        return points;
    }
    if (resolution < 1) throw InvalidArgument("control resolution must be positive");
    std::vector<Vector> out;
    const int dim = dimension;
    std::vector<int> idx(static_cast<std::size_t>(dim), 0);
    while (true) {
        Vector u(dim);
        for (int k = 0; k < dim; ++k) {
            u[k] = resolution == 1 ? 0.5 * (lower[k] + upper[k])
                                   : lower[k] + (upper[k] - lower[k]) * idx[static_cast<std::size_t>(k)] /
                                                    static_cast<double>(resolution - 1);
        }
        out.push_back(u);
        int k = dim - 1;
        while (k >= 0 && ++idx[static_cast<std::size_t>(k)] == resolution) idx[static_cast<std::size_t>(k--)] = 0;
        if (k < 0) break;
    }
    return out;
}

bool ControlSet::is_singleton() const {
    if (kind == Kind::finite) return points.size() == 1;
    return (upper - lower).cwiseAbs().maxCoeff() == 0.0;
}

std::vector<Violation> validate_spec(const ProblemSpec& spec, std::uint64_t seed, int samples) {
    std::vector<Violation> out;
    auto add = [&out](std::string field, std::string msg) { out.push_back({std::move(field), std::move(msg)}); };

    const int d = spec.state_dim;
    if (d < 1) add("state_dim", "state dimension must be positive");

    // Time grid.
    const auto& dates = spec.grid.dates;
    bool grid_ok = true;
    if (dates.size() < 2) {
        add("grid.dates", "need at least t_0 and t_n");
        grid_ok = false;
    } else {
        if (dates.front() != 0.0) add("grid.dates", "t_0 must be 0");
        for (std::size_t k = 1; k < dates.size(); ++k) {
            if (!(dates[k] >= dates[k - 1])) {
                add("grid.dates", "unsorted time grid at position " + std::to_string(k));
                grid_ok = false;
                break;
            }
        }
        if (!(dates.back() > 0.0)) add("grid.dates", "horizon T must be positive");
        for (std::size_t k = 1; k < dates.size() && grid_ok; ++k) {
            if (dates[k] == dates[k - 1])
                add("grid.dates", "duplicate date " + fmt_double(dates[k]) + " (empty constraint interval)");
        }
        if (!spec.grid.thresholds.empty() && spec.grid.thresholds.size() + 1 != dates.size())
            add("grid.thresholds", "expected one threshold per constraint date");
        for (double p : spec.grid.thresholds)
            if (p < 0.0) add("grid.thresholds", "negative budget " + fmt_double(p));
    }

    // Controls.
    const auto& U = spec.controls;
    if (U.dimension < 1) add("controls", "control dimension must be positive");
    if (U.kind == ControlSet::Kind::box) {
        if (U.lower.size() != U.dimension || U.upper.size() != U.dimension)
            add("controls", "box bounds do not match the control dimension");
        else if (!all_finite(U.lower) || !all_finite(U.upper))
            add("controls", "box bounds must be finite (U compact)");
        else if ((U.upper - U.lower).minCoeff() < 0.0)
            add("controls", "box lower bound exceeds upper bound");
    } else {
        if (U.points.empty()) add("controls", "finite control set is empty");
        for (const auto& u : U.points)
            if (u.size() != U.dimension || !all_finite(u)) add("controls", "malformed control point");
    }

    // Domain box.
    if (spec.domain.lower.size() != d || spec.domain.upper.size() != d) {
        add("domain", "domain box dimension differs from state dimension");
    } else if (!all_finite(spec.domain.lower) || !all_finite(spec.domain.upper) ||
               (spec.domain.upper - spec.domain.lower).minCoeff() <= 0.0) {
        add("domain", "domain box must be finite with lower < upper");
    }

    if (!spec.sde.drift || !spec.sde.diffusion) add("sde", "drift and diffusion must be provided");
    if (!spec.loss.terminal_cost || (!spec.loss.loss && spec.loss.per_date_losses.empty()))
        add("loss", "terminal cost and loss must be provided");
    if (!spec.loss.per_date_losses.empty() && dates.size() >= 2 &&
        spec.loss.per_date_losses.size() + 1 != dates.size())
        add("loss.per_date_losses", "expected one loss per constraint date");
    if (spec.sde.lipschitz_z < 0.0 || spec.sde.growth_z < 0.0 || spec.loss.lipschitz_f < 0.0 ||
        spec.loss.lipschitz_psi < 0.0)
        add("constants", "declared constants must be non-negative");

    if (!out.empty()) return out;  // sampling below needs a structurally sound spec

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double T = spec.grid.horizon();
    const auto zs = domain_samples(rng, spec.domain, samples);

    bool drift_finite = true, diff_shape = true, drift_lip = true, diff_lip = true, growth = true;
    double worst_drift_lip = 0.0, worst_diff_lip = 0.0;
    for (std::size_t s = 0; s < zs.size(); ++s) {
        const double t = unit(rng) * T;
        const Vector u = sample_control(rng, U);
        const Vector& z = zs[s];
        const Vector z2 = uniform_in_box(rng, spec.domain.lower, spec.domain.upper);
        Vector mu, mu2;
        Matrix sig, sig2;
        try {
            mu = spec.sde.drift(t, z, u);
            mu2 = spec.sde.drift(t, z2, u);
            sig = spec.sde.diffusion(t, z, u);
            sig2 = spec.sde.diffusion(t, z2, u);
        } catch (const std::exception& e) {
            add("sde", std::string("coefficient evaluation threw: ") + e.what());
            return out;
        }
        if (mu.size() != d || mu2.size() != d || !all_finite(mu) || !all_finite(mu2)) drift_finite = false;
        if (sig.rows() != d || sig.cols() != d || sig2.rows() != d || sig2.cols() != d) {
            diff_shape = false;
            continue;
        }
        if (!all_finite(sig) || !all_finite(sig2)) drift_finite = false;
        if (!drift_finite) continue;
        const double dz = (z - z2).norm();
        if (dz > 0.0) {
            const double ql = (mu - mu2).norm() / dz;
            const double qs = (sig - sig2).norm() / dz;
            worst_drift_lip = std::max(worst_drift_lip, ql);
            worst_diff_lip = std::max(worst_diff_lip, qs);
            if (!within(ql, spec.sde.lipschitz_z)) drift_lip = false;
            if (!within(qs, spec.sde.lipschitz_z)) diff_lip = false;
        }
        const double bound = spec.sde.growth_z * (1.0 + z.norm());
        if (!within(mu.norm(), bound) || !within(sig.norm(), bound)) growth = false;
    }
    if (!drift_finite) add("sde", "drift or diffusion not finite (or wrong size) on the domain");
    if (!diff_shape) add("sde.diffusion", "diffusion must be a square d x d matrix (noise dimension = state dimension)");
    if (!drift_lip)
        add("sde.lipschitz_z", "sampled drift Lipschitz quotient " + fmt_double(worst_drift_lip) +
                                   " exceeds declared " + fmt_double(spec.sde.lipschitz_z));
    if (!diff_lip)
        add("sde.lipschitz_z", "sampled diffusion Lipschitz quotient " + fmt_double(worst_diff_lip) +
                                   " exceeds declared " + fmt_double(spec.sde.lipschitz_z));
    if (!growth) add("sde.growth_z", "coefficients exceed the declared linear growth bound");

    auto check_cost = [&](const StateFn& fn, double lip, const std::string& field) {
        bool nonneg = true, lip_ok = true, finite = true;
        double worst = 0.0;
        for (std::size_t s = 0; s < zs.size(); ++s) {
            const Vector& z = zs[s];
            const Vector z2 = uniform_in_box(rng, spec.domain.lower, spec.domain.upper);
            const double a = fn(z), b = fn(z2);
            if (!std::isfinite(a) || !std::isfinite(b)) {
                finite = false;
                continue;
            }
            if (a < 0.0 || b < 0.0) nonneg = false;
            const double dz = (z - z2).norm();
            if (dz > 0.0) {
                const double q = std::abs(a - b) / dz;
                worst = std::max(worst, q);
                if (!within(q, lip)) lip_ok = false;
            }
        }
        if (!finite) add(field, "not finite on the domain");
        if (!nonneg) add(field, "nonnegativity violated on the domain");
        if (!lip_ok)
            add(field, "sampled Lipschitz quotient " + fmt_double(worst) + " exceeds declared " + fmt_double(lip));
    };
    check_cost(spec.loss.terminal_cost, spec.loss.lipschitz_f, "loss.terminal_cost");
    if (spec.loss.per_date_losses.empty()) {
        check_cost(spec.loss.loss, spec.loss.lipschitz_psi, "loss.loss");
    } else {
        for (std::size_t k = 0; k < spec.loss.per_date_losses.size(); ++k)
            check_cost(spec.loss.per_date_losses[k], spec.loss.lipschitz_psi,
                       "loss.per_date_losses[" + std::to_string(k + 1) + "]");
    }
    return out;
}

ProblemSpec augment_running_cost(const ProblemSpec& spec, RunningCostFn running_cost, double lipschitz_running) {
    if (!running_cost) throw InvalidArgument("running cost must be provided");
    const int d = spec.state_dim;
    const double T = spec.grid.horizon();

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double max_rate = 0.0, max_rate_growth = 0.0;
    for (const auto& z : domain_samples(rng, spec.domain, 200)) {
        const double t = unit(rng) * T;
        const Vector u = sample_control(rng, spec.controls);
        const double l = running_cost(t, z, u);
        if (!std::isfinite(l) || l < 0.0)
            throw InvalidArgument("running cost must be finite and non-negative; sampled value " + fmt_double(l));
        max_rate = std::max(max_rate, l);
        max_rate_growth = std::max(max_rate_growth, l / (1.0 + z.norm()));
    }

    ProblemSpec out = spec;
    out.name = spec.name + "+running";
    out.state_dim = d + 1;
    out.analytic.reset();

    const DriftFn drift = spec.sde.drift;
    const DiffusionFn diffusion = spec.sde.diffusion;
    out.sde.drift = [drift, running_cost, d](double t, const Vector& z, const Vector& u) {
        const Vector base = z.head(d);
        Vector mu(d + 1);
        mu.head(d) = drift(t, base, u);
        mu[d] = running_cost(t, base, u);
        return mu;
    };
    out.sde.diffusion = [diffusion, d](double t, const Vector& z, const Vector& u) {
        Matrix sig = Matrix::Zero(d + 1, d + 1);
        sig.topLeftCorner(d, d) = diffusion(t, z.head(d), u);
        return sig;
    };
    out.sde.lipschitz_z = spec.sde.lipschitz_z + lipschitz_running;
    out.sde.growth_z = spec.sde.growth_z + std::max(lipschitz_running, max_rate_growth);

    const StateFn f = spec.loss.terminal_cost;
    out.loss.terminal_cost = [f, d](const Vector& z) { return f(z.head(d)) + z[d]; };
    out.loss.lipschitz_f = spec.loss.lipschitz_f + 1.0;
    auto drop_last = [d](StateFn g) { return StateFn([g, d](const Vector& z) { return g(z.head(d)); }); };
    if (spec.loss.loss) out.loss.loss = drop_last(spec.loss.loss);
    for (auto& g : out.loss.per_date_losses) g = drop_last(g);

    out.domain.lower.conservativeResize(d + 1);
    out.domain.upper.conservativeResize(d + 1);
    out.domain.lower[d] = 0.0;
    out.domain.upper[d] = std::max(1.0, max_rate * T);
    return out;
}

bool VariantKey::is_active(int date) const {
    return std::binary_search(active_p.begin(), active_p.end(), date);
}

bool VariantKey::is_plain(int date) const {
    return std::binary_search(plain_psi.begin(), plain_psi.end(), date);
}

std::string VariantKey::name() const {
    std::ostringstream os;
    if (is_root()) {
        os << "root_i" << interval;
        return os.str();
    }
    os << "v" << interval << "_P";
    if (active_p.empty()) os << "none";
    for (std::size_t k = 0; k < active_p.size(); ++k) os << (k ? "-" : "") << active_p[k];
    os << (has_m ? "_M" : "_noM");
    return os.str();
}

VariantKey VariantKey::without_m() const {
    VariantKey k = *this;
    k.has_m = false;
    return k;
}

VariantKey VariantKey::with_plain(int date) const {
    if (!is_active(date)) throw InvalidArgument("date " + std::to_string(date) + " is not budgeted in " + name());
    VariantKey k = *this;
    k.active_p.erase(std::find(k.active_p.begin(), k.active_p.end(), date));
    k.plain_psi.insert(std::upper_bound(k.plain_psi.begin(), k.plain_psi.end(), date), date);
    return k;
}

VariantKey VariantKey::on_next_interval() const {
    VariantKey k = *this;
    const int date = interval + 1;
    k.interval = interval + 1;
    std::erase(k.active_p, date);
    std::erase(k.plain_psi, date);
    return k;
}

VariantKey root_variant(int interval, int n) {
    VariantKey k;
    k.interval = interval;
    for (int date = interval + 1; date <= n; ++date) k.active_p.push_back(date);
    k.has_m = true;
    return k;
}

std::vector<VariantKey> build_variant_lattice(const ProblemSpec& spec, int interval_index) {
    const int n = spec.grid.n();
    if (interval_index < 0 || interval_index >= n)
        throw InvalidArgument("interval index " + std::to_string(interval_index) + " outside 0.." +
                              std::to_string(n - 1));
    const int count = n - interval_index;
    if (count > 24) throw InvalidArgument("too many constraint dates for the variant lattice");

    std::vector<VariantKey> out;
    for (std::uint32_t mask = 0; mask < (1u << count); ++mask) {
        for (bool has_m : {false, true}) {
            VariantKey k;
            k.interval = interval_index;
            k.has_m = has_m;
            for (int j = 0; j < count; ++j) {
                const int date = interval_index + 1 + j;
                ((mask >> j) & 1u ? k.active_p : k.plain_psi).push_back(date);
            }
            out.push_back(std::move(k));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const VariantKey& a, const VariantKey& b) {
        if (a.aux_dimension() != b.aux_dimension()) return a.aux_dimension() < b.aux_dimension();
        if (a.has_m != b.has_m) return !a.has_m;
        return a.active_p < b.active_p;
    });
    return out;
}

ConvexityCertificate check_convexity_preconditions(const ProblemSpec& spec, std::uint64_t seed, int samples) {
    ConvexityCertificate cert;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double T = spec.grid.horizon();
    const auto& U = spec.controls;
    const bool box_controls = U.kind == ControlSet::Kind::box;

    cert.drift_affine = true;
    cert.diffusion_affine = true;
    for (int s = 0; s < samples; ++s) {
        const double t = unit(rng) * T;
        const double lam = 0.1 + 0.8 * unit(rng);
        const Vector z0 = uniform_in_box(rng, spec.domain.lower, spec.domain.upper);
        const Vector z1 = uniform_in_box(rng, spec.domain.lower, spec.domain.upper);
        // Non-box control sets only admit segments in z with a fixed control.
        const Vector u0 = sample_control(rng, U);
        const Vector u1 = box_controls ? sample_control(rng, U) : u0;
        const Vector zl = lam * z0 + (1.0 - lam) * z1;
        const Vector ul = lam * u0 + (1.0 - lam) * u1;

        const Vector mu0 = spec.sde.drift(t, z0, u0), mu1 = spec.sde.drift(t, z1, u1);
        const Vector mul = spec.sde.drift(t, zl, ul);
        const Vector mu_chord = lam * mu0 + (1.0 - lam) * mu1;
        const double mu_scale = 1.0 + mu0.norm() + mu1.norm();
        if ((mul - mu_chord).norm() > 1e-8 * mu_scale) cert.drift_affine = false;

        const Matrix s0 = spec.sde.diffusion(t, z0, u0), s1 = spec.sde.diffusion(t, z1, u1);
        const Matrix sl = spec.sde.diffusion(t, zl, ul);
        const Matrix s_chord = lam * s0 + (1.0 - lam) * s1;
        const double s_scale = 1.0 + s0.norm() + s1.norm();
        if ((sl - s_chord).norm() > 1e-8 * s_scale) cert.diffusion_affine = false;
    }

    auto midpoint_convex = [&](const StateFn& fn) {
        for (int s = 0; s < samples; ++s) {
            const Vector a = uniform_in_box(rng, spec.domain.lower, spec.domain.upper);
            const Vector b = uniform_in_box(rng, spec.domain.lower, spec.domain.upper);
            const double fa = fn(a), fb = fn(b), fm = fn(0.5 * (a + b));
            if (fm > 0.5 * (fa + fb) + 1e-10 * (1.0 + std::abs(fa) + std::abs(fb))) return false;
        }
        return true;
    };
    cert.terminal_cost_convex = midpoint_convex(spec.loss.terminal_cost);
    cert.loss_convex = true;
    if (spec.loss.per_date_losses.empty()) {
        cert.loss_convex = midpoint_convex(spec.loss.loss);
    } else {
        for (const auto& g : spec.loss.per_date_losses) cert.loss_convex = cert.loss_convex && midpoint_convex(g);
    }

    cert.controls_convex = box_controls || U.points.size() == 1;

    const bool all = cert.drift_affine && cert.diffusion_affine && cert.terminal_cost_convex && cert.loss_convex &&
                     cert.controls_convex;
    cert.verdict = all ? ConvexityCertificate::Verdict::sufficient_conditions_hold
                       : ConvexityCertificate::Verdict::unknown;
    return cert;
}

double growth_constant(const ProblemSpec& spec) {
    // E|Z_s| <= (1 + |z|) exp((1.5 K + K^2)(s - t)) under |mu|, |sigma|_F <= K (1 + |z|).
    const int n = spec.grid.n();
    const double K = spec.sde.growth_z;
    const Vector origin = Vector::Zero(spec.state_dim);
    double at_origin = std::max(0.0, spec.loss.terminal_cost(origin));
    for (int k = 1; k <= n; ++k) at_origin += std::max(0.0, spec.loss.loss_at(k)(origin));
    const double lip = spec.loss.lipschitz_f + n * spec.loss.lipschitz_psi;
    return at_origin + lip * std::exp((1.5 * K + K * K) * spec.grid.horizon());
}

} // namespace lsc
