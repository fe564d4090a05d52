#include <algorithm>
#include <cmath>
#include <limits>

#include "lsc/error.hpp"
#include "lsc/montecarlo.hpp"

namespace lsc {

namespace {

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

class Recursion {
public:
    Recursion(const ProblemSpec& spec, const GridSpec& grid, int first_interval, std::size_t max_evaluations)
        : spec_(spec), grid_(grid), first_(first_interval), max_eval_(max_evaluations) {
        schedule_ = make_schedule(spec.grid, grid.dt);
        int total = 0;
        for (int i = first_; i < spec.grid.n(); ++i) total += schedule_[static_cast<std::size_t>(i)].steps;
        if (total > 4) throw InvalidArgument("brute force is limited to 4 time steps, got " + std::to_string(total));
        us_ = spec.controls.discretize(grid.control_resolution);
        C_ = growth_constant(spec);
        for (int i = 0; i < spec.grid.n(); ++i) {
            const double dt = schedule_[static_cast<std::size_t>(i)].dt;
            rules_.push_back(make_quadrature(grid.quadrature, grid.gauss_hermite_order, spec.state_dim, dt));
            budgets_.push_back(make_budget_controls(grid, spec.state_dim, dt));
        }
    }

    BruteForceTable run() {
        for (int i = spec_.grid.n() - 1; i >= first_; --i) {
            for (const auto& key : build_variant_lattice(spec_, i)) {
                const VariantGrid g = VariantGrid::make(grid_, key, spec_.state_dim);
                for (int level = 0; level <= schedule_[static_cast<std::size_t>(i)].steps; ++level)
                    for (std::size_t node = 0; node < g.size; ++node) value(key, level, node);
            }
        }
        BruteForceTable out;
        out.values = memo_;
        out.evaluations = evaluations_;
        return out;
    }

private:
    std::vector<double>& table(const VariantKey& key, int level) {
        auto [it, inserted] = memo_.try_emplace(SliceId{key, level});
        if (inserted)
            it->second.assign(VariantGrid::make(grid_, key, spec_.state_dim).size,
                              std::numeric_limits<double>::quiet_NaN());
        return it->second;
    }

    double value(const VariantKey& key, int level, std::size_t node) {
        std::vector<double>& tab = table(key, level);
        if (!std::isnan(tab[node])) return tab[node];
        const double v = compute(key, level, node);
        table(key, level)[node] = v;
        return v;
    }

    double compute(const VariantKey& key, int level, std::size_t node) {
        const VariantGrid g = VariantGrid::make(grid_, key, spec_.state_dim);
        const std::vector<int> idx = g.unflatten(node);
        const int d = g.d;

        // Dirichlet faces: the last budgeted date at zero wins, then m = 0.
        for (int k = static_cast<int>(key.active_p.size()) - 1; k >= 0; --k) {
            if (idx[static_cast<std::size_t>(d + k)] == 0) {
                std::vector<int> lower = idx;
                lower.erase(lower.begin() + d + k);
                const VariantKey lk = key.with_plain(key.active_p[static_cast<std::size_t>(k)]);
                return value(lk, level, VariantGrid::make(grid_, lk, d).flat(lower));
            }
        }
        if (key.has_m && idx.back() == 0) {
            std::vector<int> lower(idx.begin(), idx.end() - 1);
            const VariantKey lk = key.without_m();
            return value(lk, level, VariantGrid::make(grid_, lk, d).flat(lower));
        }

        const IntervalSchedule& sched = schedule_[static_cast<std::size_t>(key.interval)];
        const Vector x = g.coordinates(idx);
        const Vector z = x.head(d);
        if (level == sched.steps) return right_data(key, g, idx, z, x);
        return minimise(key, g, level, x);
    }

    double right_data(const VariantKey& key, const VariantGrid& g, const std::vector<int>& idx, const Vector& z,
                      const Vector& x) {
        const int n = spec_.grid.n();
        const int date = key.interval + 1;
        const double psi = spec_.loss.loss_at(date)(z);
        double extra = 0.0;
        if (key.is_active(date)) extra = positive_part(psi - x[g.d]);
        else if (key.is_plain(date)) extra = psi;
        if (key.interval == n - 1) {
            const double f = spec_.loss.terminal_cost(z);
            const double head = key.has_m ? positive_part(f - x[g.rank() - 1]) : f;
            return head + extra;
        }
        const VariantKey nk = key.on_next_interval();
        std::vector<int> nidx = idx;
        if (key.is_active(date)) nidx.erase(nidx.begin() + g.d);
        return value(nk, 0, VariantGrid::make(grid_, nk, g.d).flat(nidx)) + extra;
    }

    // z-only multilinear value at budget index `bidx`; corners with zero
    // weight are never touched.
    double z_value(const VariantKey& key, const VariantGrid& g, int level, const std::vector<UniformAxis::Location>& zl,
                   const std::vector<double>& t, std::vector<int> idx) {
        const int d = g.d;
        const std::size_t ncz = std::size_t{1} << d;
        std::vector<double> zv(ncz);
        for (std::size_t zc = 0; zc < ncz; ++zc) {
            for (int r = 0; r < d; ++r)
                idx[static_cast<std::size_t>(r)] =
                    zl[static_cast<std::size_t>(r)].k + (((zc >> r) & 1u) && t[static_cast<std::size_t>(r)] != 0.0 ? 1 : 0);
            zv[zc] = value(key, level + 1, g.flat(idx));
        }
        std::size_t width = ncz;
        for (int r = 0; r < d; ++r) {
            width >>= 1;
            for (std::size_t c = 0; c < width; ++c) zv[c] = lerp(zv[2 * c], zv[2 * c + 1], t[static_cast<std::size_t>(r)]);
        }
        return zv[0];
    }

    // Lookup at level + 1: z axes first (projected into the box, plus the
    // extrapolation offset of the budget origin), growth clamp per budget
    // corner, then budget axes in order, then the below-zero slopes.
    double lookup(const VariantKey& key, const VariantGrid& g, int level, const Vector& Zp,
                  const std::vector<double>& B) {
        const int d = g.d;
        const int nb = g.budget_axes();
        std::vector<UniformAxis::Location> zl(static_cast<std::size_t>(d)), bl(static_cast<std::size_t>(nb));
        std::vector<double> t_lin(static_cast<std::size_t>(d)), t_box(static_cast<std::size_t>(d));
        bool outside = false;
        for (int r = 0; r < d; ++r) {
            const auto ru = static_cast<std::size_t>(r);
            zl[ru] = g.axes[ru].locate_extrapolate(Zp[r]);
            t_lin[ru] = zl[ru].t;
            t_box[ru] = std::clamp(zl[ru].t, 0.0, 1.0);
            if (t_box[ru] != t_lin[ru]) outside = true;
        }
        for (int j = 0; j < nb; ++j)
            bl[static_cast<std::size_t>(j)] = g.axes[static_cast<std::size_t>(d + j)].locate_budget(B[static_cast<std::size_t>(j)]);
        const double cap = C_ * (1.0 + Zp.norm());

        std::vector<int> idx(static_cast<std::size_t>(d + nb), 0);
        double shift = 0.0;
        if (outside) shift = z_value(key, g, level, zl, t_lin, idx) - z_value(key, g, level, zl, t_box, idx);

        const std::size_t ncb = std::size_t{1} << nb;
        std::vector<double> bvals(ncb);
        for (std::size_t bc = 0; bc < ncb; ++bc) {
            for (int j = 0; j < nb; ++j) {
                const auto& L = bl[static_cast<std::size_t>(j)];
                idx[static_cast<std::size_t>(d + j)] = L.k + (((bc >> j) & 1u) && L.t != 0.0 ? 1 : 0);
            }
            double v = z_value(key, g, level, zl, t_box, idx);
            if (outside) v += shift;
            v = v > 0.0 ? v : 0.0;
            bvals[bc] = v < cap ? v : cap;
        }
        std::size_t width = ncb;
        for (int j = 0; j < nb; ++j) {
            width >>= 1;
            for (std::size_t c = 0; c < width; ++c) bvals[c] = lerp(bvals[2 * c], bvals[2 * c + 1], bl[static_cast<std::size_t>(j)].t);
        }
        double v = bvals[0];
        for (int j = 0; j < nb; ++j) v += bl[static_cast<std::size_t>(j)].penalty;
        return v;
    }

    double minimise(const VariantKey& key, const VariantGrid& g, int level, const Vector& x) {
        const IntervalSchedule& sched = schedule_[static_cast<std::size_t>(key.interval)];
        const QuadratureRule& rule = rules_[static_cast<std::size_t>(key.interval)];
        const BudgetControlTable& tab = budgets_[static_cast<std::size_t>(key.interval)];
        const int d = g.d;
        const int nb = g.budget_axes();
        const double s = sched.time(level);
        const double dt = sched.dt;
        const Vector z = x.head(d);

        std::vector<const std::vector<Vector>*> lists;
        for (std::size_t k = 0; k < key.active_p.size(); ++k) lists.push_back(&tab.p_values);
        if (key.has_m) lists.push_back(&tab.m_values);

        double best = std::numeric_limits<double>::infinity();
        std::vector<std::size_t> choice(static_cast<std::size_t>(nb), 0);
        std::vector<double> B(static_cast<std::size_t>(nb));
        Vector Zp(d);
        for (const auto& u : us_) {
            const Vector mu = spec_.sde.drift(s, z, u);
            const Matrix sig = spec_.sde.diffusion(s, z, u);
            std::fill(choice.begin(), choice.end(), 0);
            while (true) {
                double acc = 0.0;
                for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                    const Vector& om = rule.nodes[q];
                    for (int r = 0; r < d; ++r) {
                        double v = z[r] + mu[r] * dt;
                        for (int l = 0; l < d; ++l) v += sig(r, l) * om[l];
                        Zp[r] = v;
                    }
                    for (int j = 0; j < nb; ++j) {
                        const Vector& c = (*lists[static_cast<std::size_t>(j)])[choice[static_cast<std::size_t>(j)]];
                        double v = x[d + j];
                        for (int l = 0; l < d; ++l) v += c[l] * om[l];
                        B[static_cast<std::size_t>(j)] = v;
                    }
                    if (++evaluations_ > max_eval_)
                        throw InvalidArgument("brute force enumeration budget of " + std::to_string(max_eval_) +
                                              " evaluations exceeded");
                    acc += rule.weights[q] * lookup(key, g, level, Zp, B);
                }
                if (acc < best) best = acc;
                int j = nb - 1;
                while (j >= 0 && ++choice[static_cast<std::size_t>(j)] == lists[static_cast<std::size_t>(j)]->size())
                    choice[static_cast<std::size_t>(j--)] = 0;
                if (j < 0) break;
            }
        }
        return best;
    }

    const ProblemSpec& spec_;
    const GridSpec& grid_;
    int first_;
    std::size_t max_eval_;
    std::vector<IntervalSchedule> schedule_;
    std::vector<Vector> us_;
    double C_ = 0.0;
    std::vector<QuadratureRule> rules_;
    std::vector<BudgetControlTable> budgets_;
    std::map<SliceId, std::vector<double>> memo_;
    std::size_t evaluations_ = 0;
};

} // namespace

BruteForceTable brute_force_dp(const ProblemSpec& spec, const GridSpec& grid, int interval_index,
                               std::size_t max_evaluations) {
    if (interval_index < 0 || interval_index >= spec.grid.n()) throw InvalidArgument("interval index out of range");
    grid.validate(spec.state_dim);
    return Recursion(spec, grid, interval_index, max_evaluations).run();
}

} // namespace lsc
