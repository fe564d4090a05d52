#include "lsc/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lsc/error.hpp"

namespace lsc {

namespace {

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// Interval i with t_i <= t < t_{i+1}.
int containing_interval(const TimeGrid& grid, double t) {
    const int n = grid.n();
    if (t < grid.dates.front() || t >= grid.horizon()) throw InvalidArgument("start time outside [0, T)");
    for (int i = 0; i < n; ++i)
        if (t < grid.dates[static_cast<std::size_t>(i + 1)]) return i;
    return n - 1;
}

std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    return std::mt19937_64(seq);
}

} // namespace

PolicyFn zero_policy(const ProblemSpec& spec) {
    const Vector u0 = spec.controls.discretize(1).front();
    const int d = spec.state_dim;
    return {[u0, d](double, const Vector&, const Vector& p, double) {
        return PolicyAction{u0, Vector::Zero(p.size() * d), Vector::Zero(d)};
    }};
}

PolicyFn replicating_policy(const ProblemSpec& spec) {
    if (!spec.controls.is_singleton()) throw InvalidArgument("replicating policy needs a single control");
    if (!spec.analytic || !spec.analytic->grad_mean_f || !spec.analytic->grad_mean_psi)
        throw InvalidArgument("replicating policy needs analytic conditional-mean gradients");
    const Vector u0 = spec.controls.discretize(1).front();
    const ConditionalMeans cm = *spec.analytic;
    const SdeCoefficients sde = spec.sde;
    const TimeGrid grid = spec.grid;
    const int d = spec.state_dim;
    return {[=](double t, const Vector& z, const Vector& p, double) {
        const Matrix sig = sde.diffusion(t, z, u0);
        PolicyAction act;
        act.u = u0;
        act.e = sig.transpose() * cm.grad_mean_f(t, z, grid.horizon());
        act.a = Vector::Zero(p.size() * d);
        const int n = grid.n();
        const int first = n - static_cast<int>(p.size()) + 1;
        for (int k = 0; k < p.size(); ++k) {
            const int date = first + k;
            act.a.segment(k * d, d) =
                sig.transpose() * cm.grad_mean_psi(t, z, grid.dates[static_cast<std::size_t>(date)], date);
        }
        return act;
    }};
}

PolicyFn solver_policy(const SolveResult& result) {
    const SolveResult* res = &result;
    return {[res](double t, const Vector& z, const Vector& p, double m) {
        const int n = res->spec.grid.n();
        const int i = res->interval_of(t);
        const VariantKey root = root_variant(i, n);
        const IntervalSchedule& sched = res->schedule[static_cast<std::size_t>(i)];
        int level = std::clamp(static_cast<int>(std::floor((t - sched.t_left) / sched.dt + 1e-9)), 0, sched.steps - 1);
        const ValueSlice* s = res->find(root, level);
        if (!s || s->policy.empty()) {
            s = nullptr;
            int best = -1;
            for (int l : res->levels(root)) {
                const ValueSlice* c = res->find(root, l);
                if (l < sched.steps && !c->policy.empty() && (best < 0 || std::abs(l - level) < std::abs(best - level))) {
                    best = l;
                    s = c;
                }
            }
            if (!s) throw InvalidArgument("solve result carries no recorded policy for " + root.name());
        }
        const auto& g = s->grid;
        std::vector<int> idx(static_cast<std::size_t>(g.rank()));
        Vector x(g.rank());
        x.head(g.d) = z;
        x.segment(g.d, p.size()) = p;
        x[g.rank() - 1] = m;
        for (int r = 0; r < g.rank(); ++r) {
            const auto& ax = g.axes[static_cast<std::size_t>(r)];
            idx[static_cast<std::size_t>(r)] =
                std::clamp(static_cast<int>(std::lround((x[r] - ax.lo) / ax.step())), 0, ax.count - 1);
        }
        std::int32_t pol = s->policy[g.flat(idx)];
        if (pol < 0) {
            // Budget faces carry injected values; use the adjacent interior node.
            for (int r = g.d; r < g.rank(); ++r) idx[static_cast<std::size_t>(r)] = std::max(idx[static_cast<std::size_t>(r)], 1);
            pol = s->policy[g.flat(idx)];
        }
        return res->decode_policy(root, pol);
    }};
}

PathBatch simulate_paths(const ProblemSpec& spec, const PolicyFn& policy, const PathStart& start, int n_paths,
                         int steps_per_interval, std::uint64_t seed, bool antithetic) {
    if (n_paths < 1) throw InvalidArgument("n_paths must be positive");
    if (steps_per_interval < 1) throw InvalidArgument("steps_per_interval must be positive");
    if (antithetic && n_paths % 2 != 0) throw InvalidArgument("antithetic pairing needs an even path count");
    const int d = spec.state_dim;
    const int n = spec.grid.n();
    const int i0 = containing_interval(spec.grid, start.t);
    if (start.z.size() != d) throw InvalidArgument("start state has the wrong dimension");
    if (start.p.size() != n - i0)
        throw InvalidArgument("expected " + std::to_string(n - i0) + " budgets at the start time");

    PathBatch b;
    b.n_paths = n_paths;
    b.d = d;
    b.antithetic = antithetic;
    b.seed = seed;
    for (int k = i0 + 1; k <= n; ++k) b.dates.push_back(k);
    const std::size_t nd = b.dates.size();
    b.z_dates.assign(static_cast<std::size_t>(n_paths) * nd * static_cast<std::size_t>(d), 0.0);
    b.p_dates.assign(static_cast<std::size_t>(n_paths) * nd, 0.0);
    b.z_T.assign(static_cast<std::size_t>(n_paths) * static_cast<std::size_t>(d), 0.0);
    b.m_T.assign(static_cast<std::size_t>(n_paths), 0.0);

    std::normal_distribution<double> normal;
    std::vector<double> xi;
    std::mt19937_64 rng;
    for (int path = 0; path < n_paths; ++path) {
        const bool mirror = antithetic && (path % 2 == 1);
        if (!mirror) {
            rng = path_rng(seed, static_cast<std::uint64_t>(antithetic ? path / 2 : path));
            xi.clear();
        }
        std::size_t draw = 0;
        Vector Z = start.z;
        Vector P = start.p;
        double M = start.m;
        double t = start.t;
        Vector dW(d);
        for (int i = i0; i < n; ++i) {
            const double t_end = spec.grid.dates[static_cast<std::size_t>(i + 1)];
            const double h = (t_end - t) / steps_per_interval;
            const double sq = std::sqrt(h);
            for (int step = 0; step < steps_per_interval; ++step) {
                const PolicyAction act = policy.act(t, Z, P, M);
                for (int l = 0; l < d; ++l) {
                    double g;
                    if (mirror) {
                        g = -xi[draw++];
                    } else {
                        g = normal(rng);
                        if (antithetic) xi.push_back(g);
                    }
                    dW[l] = sq * g;
                }
                const Vector mu = spec.sde.drift(t, Z, act.u);
                const Matrix sig = spec.sde.diffusion(t, Z, act.u);
                Z += mu * h + sig * dW;
                for (int k = 0; k < P.size(); ++k) P[k] += act.a.segment(k * d, d).dot(dW);
                M += act.e.dot(dW);
                t = step + 1 == steps_per_interval ? t_end : t + h;
                if (!Z.allFinite() || !std::isfinite(M) || !P.allFinite())
                    throw NumericFailure("divergent path " + std::to_string(path) + " at t=" + std::to_string(t));
            }
            // Date i+1 is reached: record and retire its budget.
            const std::size_t slot = static_cast<std::size_t>(i - i0);
            const std::size_t row = static_cast<std::size_t>(path) * nd + slot;
            for (int l = 0; l < d; ++l) b.z_dates[row * static_cast<std::size_t>(d) + static_cast<std::size_t>(l)] = Z[l];
            b.p_dates[row] = P[0];
            P = Vector(P.tail(P.size() - 1));
        }
        for (int l = 0; l < d; ++l) b.z_T[static_cast<std::size_t>(path * d + l)] = Z[l];
        b.m_T[static_cast<std::size_t>(path)] = M;
    }
    return b;
}

Estimate estimate_J(const PathBatch& paths, const LossSpec& loss) {
    if (paths.n_paths < 1 || paths.m_T.size() != static_cast<std::size_t>(paths.n_paths))
        throw InvalidArgument("path batch is missing marks");
    const int d = paths.d;
    const std::size_t nd = paths.dates.size();
    std::vector<double> sample(static_cast<std::size_t>(paths.n_paths));
    Vector z(d);
    for (int k = 0; k < paths.n_paths; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        for (int l = 0; l < d; ++l) z[l] = paths.z_T[ku * static_cast<std::size_t>(d) + static_cast<std::size_t>(l)];
        double v = positive_part(loss.terminal_cost(z) - paths.m_T[ku]);
        for (std::size_t j = 0; j < nd; ++j) {
            const std::size_t row = ku * nd + j;
            for (int l = 0; l < d; ++l) z[l] = paths.z_dates[row * static_cast<std::size_t>(d) + static_cast<std::size_t>(l)];
            v += positive_part(loss.loss_at(paths.dates[j])(z) - paths.p_dates[row]);
        }
        sample[ku] = v;
    }
    if (paths.antithetic) {
        std::vector<double> pairs;
        for (std::size_t k = 0; k + 1 < sample.size(); k += 2) pairs.push_back(0.5 * (sample[k] + sample[k + 1]));
        sample = std::move(pairs);
    }
    const double n = static_cast<double>(sample.size());
    double mean = 0.0;
    for (double v : sample) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : sample) ss += (v - mean) * (v - mean);
    Estimate e;
    e.mean = mean;
    e.std_error = sample.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    e.n_paths = paths.n_paths;
    e.seed = paths.seed;
    return e;
}

double closed_form_uncontrolled(const ProblemSpec& spec, double t, const Vector& z, const Vector& p, double m) {
    if (!spec.controls.is_singleton()) throw InvalidArgument("closed form requires a single control");
    if (!spec.analytic || !spec.analytic->mean_f || !spec.analytic->mean_psi)
        throw InvalidArgument("closed form requires analytic conditional means");
    const int n = spec.grid.n();
    const int i = t >= spec.grid.horizon() ? n - 1 : containing_interval(spec.grid, t);
    if (p.size() != n - i) throw InvalidArgument("expected " + std::to_string(n - i) + " budgets");
    double v = positive_part(spec.analytic->mean_f(t, z, spec.grid.horizon()) - m);
    for (int k = 0; k < p.size(); ++k) {
        const int date = i + 1 + k;
        v += positive_part(spec.analytic->mean_psi(t, z, spec.grid.dates[static_cast<std::size_t>(date)], date) - p[k]);
    }
    return v;
}

} // namespace lsc
