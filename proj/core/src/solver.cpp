#include "lsc/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "lsc/error.hpp"

namespace lsc {

double ValueSlice::interpolate(const Vector& point) const {
    const int rank = grid.rank();
    if (point.size() != rank) throw InvalidArgument("interpolation point has the wrong dimension");
    std::vector<UniformAxis::Location> loc(static_cast<std::size_t>(rank));
    std::vector<double> tz(static_cast<std::size_t>(grid.d));
    bool outside = false;
    for (int r = 0; r < rank; ++r) {
        const auto ru = static_cast<std::size_t>(r);
        if (r < grid.d) {
            loc[ru] = grid.axes[ru].locate_extrapolate(point[r]);
            tz[ru] = loc[ru].t;
            const double c = loc[ru].t < 0.0 ? 0.0 : (loc[ru].t > 1.0 ? 1.0 : loc[ru].t);
            outside = outside || c != loc[ru].t;
            loc[ru].t = c;
        } else {
            loc[ru] = grid.axes[ru].locate_budget(point[r]);
        }
    }
    // Multilinear value over the first `axes` axes with weights t, budget
    // axes held at `budget_base`.
    auto reduce = [&](int axes, const std::vector<double>& t, std::size_t budget_base) {
        std::size_t base = budget_base;
        for (int r = 0; r < grid.d; ++r)
            base += static_cast<std::size_t>(loc[static_cast<std::size_t>(r)].k) * grid.strides[static_cast<std::size_t>(r)];
        for (int r = grid.d; r < axes; ++r)
            base += static_cast<std::size_t>(loc[static_cast<std::size_t>(r)].k) * grid.strides[static_cast<std::size_t>(r)];
        const std::size_t nc = std::size_t{1} << axes;
        std::vector<double> vals(nc);
        for (std::size_t cm = 0; cm < nc; ++cm) {
            std::size_t off = base;
            for (int r = 0; r < axes; ++r)
                if (((cm >> r) & 1u) && t[static_cast<std::size_t>(r)] != 0.0)
                    off += grid.strides[static_cast<std::size_t>(r)];
            vals[cm] = values[off];
        }
        std::size_t width = nc;
        for (int r = 0; r < axes; ++r) {
            width >>= 1;
            for (std::size_t c = 0; c < width; ++c) vals[c] = lerp(vals[2 * c], vals[2 * c + 1], t[static_cast<std::size_t>(r)]);
        }
        return vals[0];
    };
    std::vector<double> t(static_cast<std::size_t>(rank));
    for (int r = 0; r < rank; ++r) t[static_cast<std::size_t>(r)] = loc[static_cast<std::size_t>(r)].t;
    double v = reduce(rank, t, 0);
    if (outside) {
        const std::vector<double> tc(t.begin(), t.begin() + grid.d);
        v += reduce(grid.d, tz, 0) - reduce(grid.d, tc, 0);
    }
    for (int r = grid.d; r < rank; ++r) v += loc[static_cast<std::size_t>(r)].penalty;
    return v;
}

const ValueSlice* SolveResult::find(const VariantKey& key, int level) const {
    const auto it = slices.find(SliceId{key, level});
    return it == slices.end() ? nullptr : &it->second;
}

const ValueSlice& SolveResult::slice(const VariantKey& key, int level) const {
    const auto* s = find(key, level);
    if (!s) throw InvalidArgument("slice " + key.name() + " level " + std::to_string(level) + " was not retained");
    return *s;
}

std::vector<int> SolveResult::levels(const VariantKey& key) const {
    std::vector<int> out;
    for (auto it = slices.lower_bound(SliceId{key, std::numeric_limits<int>::min()});
         it != slices.end() && it->first.variant == key; ++it)
        out.push_back(it->first.level);
    return out;
}

int SolveResult::interval_of(double t) const {
    const int n = static_cast<int>(schedule.size());
    if (n == 0) throw InvalidArgument("empty solve result");
    if (t < schedule.front().t_left || t > schedule.back().t_right)
        throw InvalidArgument("time " + std::to_string(t) + " outside the horizon");
    for (int i = 0; i < n; ++i)
        if (t < schedule[static_cast<std::size_t>(i)].t_right) return i;
    return n - 1;
}

PolicyAction SolveResult::decode_policy(const VariantKey& key, std::int32_t index) const {
    if (index < 0) throw InvalidArgument("no control recorded at a boundary node");
    const ControlTables& tab = controls.at(static_cast<std::size_t>(key.interval));
    const int d = spec.state_dim;
    const VariantGrid grid = VariantGrid::make(config, key, d);
    const std::size_t nC = tab.combos(grid);
    PolicyAction act;
    act.u = tab.u_points.at(static_cast<std::size_t>(index) / nC);
    std::size_t c = static_cast<std::size_t>(index) % nC;
    const int np = static_cast<int>(grid.p_dates.size());
    act.a = Vector::Zero(np * d);
    act.e = Vector::Zero(grid.has_m ? d : 0);
    if (grid.has_m) {
        act.e = tab.budget.m_values[c % tab.budget.m_values.size()];
        c /= tab.budget.m_values.size();
    }
    for (int k = np - 1; k >= 0; --k) {
        act.a.segment(k * d, d) = tab.budget.p_values[c % tab.budget.p_values.size()];
        c /= tab.budget.p_values.size();
    }
    return act;
}

namespace {

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// Evaluates fn at every z node of the grid.
std::vector<double> on_z_nodes(const VariantGrid& g, const StateFn& fn) {
    std::vector<double> out(g.z_size);
    Vector z(g.d);
    for (std::size_t zf = 0; zf < g.z_size; ++zf) {
        std::size_t rest = zf * g.budget_size;
        for (int r = 0; r < g.d; ++r) {
            const auto ru = static_cast<std::size_t>(r);
            z[r] = g.axes[ru].value(static_cast<int>(rest / g.strides[ru]));
            rest %= g.strides[ru];
        }
        out[zf] = fn(z);
    }
    return out;
}

// Inject values of `lower` onto the face {index on `axis` == 0} of `slice`.
void copy_face(ValueSlice& slice, const ValueSlice& lower, int axis) {
    const auto& g = slice.grid;
    const std::size_t inner = g.strides[static_cast<std::size_t>(axis)];
    const std::size_t span = inner * static_cast<std::size_t>(g.axes[static_cast<std::size_t>(axis)].count);
    if (lower.values.size() * static_cast<std::size_t>(g.axes[static_cast<std::size_t>(axis)].count) !=
        slice.values.size())
        throw InvalidArgument("boundary variant " + lower.variant.name() + " does not match the face of " +
                              slice.variant.name());
    for (std::size_t L = 0; L < lower.values.size(); ++L) {
        const std::size_t up = (L / inner) * span + (L % inner);
        slice.values[up] = lower.values[L];
        if (!slice.policy.empty()) slice.policy[up] = -1;
    }
}

} // namespace

ValueSlice terminal_slice(const VariantKey& variant, const GridSpec& grid, const ProblemSpec& spec) {
    const int n = spec.grid.n();
    if (variant.interval != n - 1) throw InvalidArgument("terminal data requires a variant of the last interval");
    ValueSlice s;
    s.variant = variant;
    s.grid = VariantGrid::make(grid, variant, spec.state_dim);
    s.t = spec.grid.horizon();
    const auto f = on_z_nodes(s.grid, spec.loss.terminal_cost);
    const auto psi = on_z_nodes(s.grid, spec.loss.loss_at(n));
    const bool active = variant.is_active(n);
    const bool plain = variant.is_plain(n);
    const auto& g = s.grid;
    s.values.resize(g.size);
    const UniformAxis& m_axis = grid.m_axis;
    const UniformAxis& p_axis = grid.p_axis;
    const std::size_t pstride = active ? g.strides[static_cast<std::size_t>(g.d)] : 1;
    for (std::size_t k = 0; k < g.size; ++k) {
        const std::size_t zf = k / g.budget_size;
        double v = f[zf];
        if (g.has_m) v = positive_part(f[zf] - m_axis.value(static_cast<int>(k % static_cast<std::size_t>(m_axis.count))));
        if (active) {
            const int pi = static_cast<int>((k / pstride) % static_cast<std::size_t>(p_axis.count));
            v += positive_part(psi[zf] - p_axis.value(pi));
        } else if (plain) {
            v += psi[zf];
        }
        s.values[k] = v;
    }
    return s;
}

ValueSlice jump_slice(const ValueSlice& next_w, const VariantKey& this_variant, const GridSpec& grid,
                      const ProblemSpec& spec) {
    const VariantKey expected = this_variant.on_next_interval();
    if (!(next_w.variant == expected))
        throw InvalidArgument("axis mismatch: jump into " + this_variant.name() + " needs " + expected.name() +
                              ", got " + next_w.variant.name());
    const int date = this_variant.interval + 1;
    ValueSlice s;
    s.variant = this_variant;
    s.grid = VariantGrid::make(grid, this_variant, spec.state_dim);
    s.t = spec.grid.dates[static_cast<std::size_t>(date)];
    const auto psi = on_z_nodes(s.grid, spec.loss.loss_at(date));
    const auto& g = s.grid;
    s.values.resize(g.size);
    if (this_variant.is_active(date)) {
        // p_{date} is the first budget axis; drop it for the continuation.
        const std::size_t inner = g.strides[static_cast<std::size_t>(g.d)];
        const std::size_t span = inner * static_cast<std::size_t>(grid.p_axis.count);
        if (next_w.values.size() * static_cast<std::size_t>(grid.p_axis.count) != g.size)
            throw InvalidArgument("axis mismatch between " + next_w.variant.name() + " and " + this_variant.name());
        for (std::size_t k = 0; k < g.size; ++k) {
            const std::size_t outer = k / span;
            const std::size_t within = k % span;
            const int pi = static_cast<int>(within / inner);
            const std::size_t src = outer * inner + within % inner;
            s.values[k] = next_w.values[src] + positive_part(psi[k / g.budget_size] - grid.p_axis.value(pi));
        }
    } else {
        if (next_w.values.size() != g.size)
            throw InvalidArgument("axis mismatch between " + next_w.variant.name() + " and " + this_variant.name());
        for (std::size_t k = 0; k < g.size; ++k) s.values[k] = next_w.values[k] + psi[k / g.budget_size];
    }
    return s;
}

void boundary_inject(ValueSlice& slice, const BoundaryLookup& lookup) {
    const auto& key = slice.variant;
    const int d = slice.grid.d;
    if (key.has_m) {
        const ValueSlice* lower = lookup(key.without_m());
        if (!lower) throw InvalidArgument("missing boundary variant " + key.without_m().name());
        copy_face(slice, *lower, slice.grid.rank() - 1);
    }
    for (std::size_t k = 0; k < key.active_p.size(); ++k) {
        const VariantKey lk = key.with_plain(key.active_p[k]);
        const ValueSlice* lower = lookup(lk);
        if (!lower) throw InvalidArgument("missing boundary variant " + lk.name());
        copy_face(slice, *lower, d + static_cast<int>(k));
    }
}

std::vector<ValueSlice> solve_interval(const VariantKey& variant, const ValueSlice& data_at_right,
                                       const StepContext& ctx, const IntervalSchedule& schedule,
                                       const std::function<const ValueSlice*(const VariantKey&, int)>& boundary) {
    if (!(data_at_right.variant == variant)) throw InvalidArgument("right-end data belongs to another variant");
    std::vector<ValueSlice> out(static_cast<std::size_t>(schedule.steps));
    ValueSlice current = data_at_right;
    current.level = schedule.steps;
    for (int j = schedule.steps - 1; j >= 0; --j) {
        ValueSlice next = sl_step(current, schedule.time(j), ctx);
        boundary_inject(next, [&](const VariantKey& k) { return boundary(k, j); });
        out[static_cast<std::size_t>(j)] = next;
        current = std::move(next);
    }
    return out;
}

namespace {

bool keep_level(const GridSpec& g, const IntervalSchedule& s, int j) {
    if (g.keep_all_levels || j == 0 || j == s.steps) return true;
    if (g.keep_stride > 0 && (j % g.keep_stride == 0 || (j - 1) % g.keep_stride == 0)) return true;
    for (double t : g.keep_times) {
        if (t < s.t_left || t > s.t_right) continue;
        const int l = s.nearest_level(t);
        if (j == l || j == l + 1) return true;
    }
    return false;
}

} // namespace

SolveResult solve_problem(const ProblemSpec& spec, const GridSpec& grid, int interval_index, const ScalingFns&) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto violations = validate_spec(spec);
    if (!violations.empty())
        throw InvalidArgument("invalid problem (" + violations.front().field + "): " + violations.front().message);
    grid.validate(spec.state_dim);
    const int n = spec.grid.n();
    if (interval_index < 0 || interval_index >= n)
        throw InvalidArgument("interval index " + std::to_string(interval_index) + " out of range");

    SolveResult res;
    res.spec = spec;
    res.config = grid;
    res.start_interval = interval_index;
    res.schedule = make_schedule(spec.grid, grid.dt);
    res.controls.resize(static_cast<std::size_t>(n));
    res.diagnostics.growth_constant = growth_constant(spec);

    std::map<VariantKey, ValueSlice> prev_level0;
    for (int i = n - 1; i >= interval_index; --i) {
        const IntervalSchedule& sched = res.schedule[static_cast<std::size_t>(i)];
        const StepContext ctx = StepContext::make(res.spec, res.config, sched.dt);
        res.controls[static_cast<std::size_t>(i)] = ctx.controls;
        const auto lattice = build_variant_lattice(spec, i);

        std::map<VariantKey, ValueSlice> current;
        auto lookup_current = [&current](const VariantKey& k) -> const ValueSlice* {
            const auto it = current.find(k);
            return it == current.end() ? nullptr : &it->second;
        };
        for (const auto& key : lattice) {
            ValueSlice right = i == n - 1 ? terminal_slice(key, grid, spec)
                                          : jump_slice(prev_level0.at(key.on_next_interval()), key, grid, spec);
            right.level = sched.steps;
            right.t = sched.t_right;
            boundary_inject(right, lookup_current);
            current.emplace(key, std::move(right));
        }
        for (const auto& [key, s] : current)
            if (keep_level(grid, sched, sched.steps)) res.slices[SliceId{key, sched.steps}] = s;

        for (int j = sched.steps - 1; j >= 0; --j) {
            std::map<VariantKey, ValueSlice> fresh;
            auto lookup_fresh = [&fresh](const VariantKey& k) -> const ValueSlice* {
                const auto it = fresh.find(k);
                return it == fresh.end() ? nullptr : &it->second;
            };
            for (const auto& key : lattice) {
                ValueSlice s = sl_step(current.at(key), sched.time(j), ctx, grid.record_policy);
                boundary_inject(s, lookup_fresh);
                fresh.emplace(key, std::move(s));
            }
            current = std::move(fresh);
            if (keep_level(grid, sched, j))
                for (const auto& [key, s] : current) res.slices[SliceId{key, j}] = s;
            ++res.diagnostics.steps;
        }
        prev_level0 = std::move(current);
    }
    res.diagnostics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lo);
    }
    return m;
}

} // namespace lsc
