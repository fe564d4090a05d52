#include <algorithm>
#include <cmath>
#include <sstream>

#include "lsc/solver.hpp"

namespace lsc {

namespace {

constexpr double kRoundoff = 1e-12;

struct Tracker {
    explicit Tracker(std::string name) { check.name = std::move(name); }
    InvariantCheck check;
    void hit(double amount, const ValueSlice& s, std::size_t node) {
        if (check.violations == 0 || amount > check.worst) {
            check.worst = amount;
            std::ostringstream os;
            os << s.variant.name() << " t=" << s.t << " node(";
            const auto idx = s.grid.unflatten(node);
            for (std::size_t r = 0; r < idx.size(); ++r) os << (r ? "," : "") << idx[r];
            os << ")";
            check.where = os.str();
        }
        ++check.violations;
    }
};

} // namespace

bool InvariantReport::ok() const { return total_violations() == 0; }

std::size_t InvariantReport::total_violations() const {
    std::size_t n = 0;
    for (const auto& c : checks) n += c.violations;
    return n;
}

InvariantReport check_slice_invariants(const ValueSlice& s, double growth_C, double lipschitz_slack,
                                       const ValueSlice* w0) {
    const auto& g = s.grid;
    Tracker nonneg{"nonnegativity"}, growth{"growth"}, mono{"monotone_budget"}, lip{"lipschitz_budget"},
        sandwich{"sandwich"};

    std::vector<double> znorm(g.z_size);
    for (std::size_t zf = 0; zf < g.z_size; ++zf) {
        std::size_t rest = zf * g.budget_size;
        double sq = 0.0;
        for (int r = 0; r < g.d; ++r) {
            const auto ru = static_cast<std::size_t>(r);
            const double z = g.axes[ru].value(static_cast<int>(rest / g.strides[ru]));
            rest %= g.strides[ru];
            sq += z * z;
        }
        znorm[zf] = std::sqrt(sq);
    }

    for (std::size_t k = 0; k < g.size; ++k) {
        const double v = s.values[k];
        if (!(v >= 0.0)) nonneg.hit(std::isnan(v) ? INFINITY : -v, s, k);
        const double cap = growth_C * (1.0 + znorm[k / g.budget_size]);
        if (!(v <= cap * (1.0 + kRoundoff))) growth.hit(v - cap, s, k);
    }

    for (int j = 0; j < g.budget_axes(); ++j) {
        const auto ax = static_cast<std::size_t>(g.d + j);
        const std::size_t stride = g.strides[ax];
        const int count = g.axes[ax].count;
        const double bound = (1.0 + lipschitz_slack) * g.axes[ax].step();
        for (std::size_t k = 0; k < g.size; ++k) {
            const int i = static_cast<int>((k / stride) % static_cast<std::size_t>(count));
            if (i + 1 >= count) continue;
            const double a = s.values[k], b = s.values[k + stride];
            const double tol = kRoundoff * (1.0 + std::abs(a));
            if (b - a > tol) mono.hit(b - a, s, k);
            if (std::abs(b - a) > bound + tol) lip.hit(std::abs(b - a) - bound, s, k);
        }
    }

    if (w0 && g.has_m) {
        const std::size_t nm = static_cast<std::size_t>(g.axes.back().count);
        if (w0->values.size() * nm == g.size) {
            for (std::size_t k = 0; k < g.size; ++k) {
                const double base = w0->values[k / nm];
                const double m = g.axes.back().value(static_cast<int>(k % nm));
                const double v = s.values[k];
                const double tol = kRoundoff * (1.0 + std::abs(base));
                if (v > base + tol) sandwich.hit(v - base, s, k);
                if (v < base - m - tol) sandwich.hit(base - m - v, s, k);
            }
        } else {
            sandwich.hit(INFINITY, s, 0);
        }
    }

    InvariantReport rep;
    rep.checks = {nonneg.check, growth.check, mono.check, lip.check};
    if (w0) rep.checks.push_back(sandwich.check);
    return rep;
}

InvariantReport check_invariants(const SolveResult& result, double lipschitz_slack) {
    InvariantReport total;
    std::map<std::string, InvariantCheck> merged;
    std::vector<std::string> order;
    for (const auto& [id, s] : result.slices) {
        const ValueSlice* w0 = id.variant.has_m ? result.find(id.variant.without_m(), id.level) : nullptr;
        const auto rep = check_slice_invariants(s, result.diagnostics.growth_constant, lipschitz_slack, w0);
        for (const auto& c : rep.checks) {
            auto it = merged.find(c.name);
            if (it == merged.end()) {
                order.push_back(c.name);
                merged.emplace(c.name, c);
                continue;
            }
            if (c.violations > 0 && (it->second.violations == 0 || c.worst > it->second.worst)) {
                it->second.worst = c.worst;
                it->second.where = c.where;
            }
            it->second.violations += c.violations;
        }
    }
    for (const auto& name : order) total.checks.push_back(merged[name]);
    return total;
}

} // namespace lsc
