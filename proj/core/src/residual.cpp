#include <cmath>

#include "lsc/error.hpp"
#include "lsc/solver.hpp"

namespace lsc {

JetPoint jet_at(const SolveResult& result, const SampleNode& node) {
    const ValueSlice& s = result.slice(node.variant, node.level);
    const ValueSlice* later = result.find(node.variant, node.level + 1);
    if (!later) throw InvalidArgument("residual needs level " + std::to_string(node.level + 1) + " of " +
                                      node.variant.name());
    const auto& g = s.grid;
    const int rank = g.rank();
    if (static_cast<int>(node.index.size()) != rank) throw InvalidArgument("sample index has the wrong rank");
    for (int r = 0; r < rank; ++r) {
        const int i = node.index[static_cast<std::size_t>(r)];
        if (i < 2 || i > g.axes[static_cast<std::size_t>(r)].count - 3)
            throw InvalidArgument("sample node too close to the boundary on axis " + std::to_string(r));
    }
    const double dt = result.schedule.at(static_cast<std::size_t>(node.variant.interval)).dt;
    const std::size_t f0 = g.flat(node.index);
    const double w = s.values[f0];

    JetPoint jet;
    jet.t = s.t;
    const Vector x = g.coordinates(node.index);
    jet.z = x.head(g.d);
    const int np = static_cast<int>(g.p_dates.size());
    jet.p = x.segment(g.d, np);
    jet.has_m = g.has_m;
    jet.m = g.has_m ? x[rank - 1] : 0.0;
    jet.c = (later->values[f0] - w) / dt;
    jet.q = Vector::Zero(rank);
    jet.A = Matrix::Zero(rank, rank);
    for (int r = 0; r < rank; ++r) {
        const auto ru = static_cast<std::size_t>(r);
        const double h = g.axes[ru].step();
        const double up = s.values[f0 + g.strides[ru]], dn = s.values[f0 - g.strides[ru]];
        jet.q[r] = (up - dn) / (2.0 * h);
        jet.A(r, r) = (up - 2.0 * w + dn) / (h * h);
        for (int c = r + 1; c < rank; ++c) {
            const auto cu = static_cast<std::size_t>(c);
            const double k = g.axes[cu].step();
            const double pp = s.values[f0 + g.strides[ru] + g.strides[cu]];
            const double pm = s.values[f0 + g.strides[ru] - g.strides[cu]];
            const double mp = s.values[f0 - g.strides[ru] + g.strides[cu]];
            const double mm = s.values[f0 - g.strides[ru] - g.strides[cu]];
            jet.A(r, c) = jet.A(c, r) = (pp - pm - mp + mm) / (4.0 * h * k);
        }
    }
    return jet;
}

std::vector<SampleNode> interior_samples(const SolveResult& result, const VariantKey& variant, int level,
                                         std::size_t count) {
    const ValueSlice& s = result.slice(variant, level);
    const auto& g = s.grid;
    std::vector<std::size_t> eligible;
    for (std::size_t k = 0; k < g.size; ++k) {
        const auto idx = g.unflatten(k);
        bool ok = true;
        for (int r = 0; r < g.rank() && ok; ++r)
            ok = idx[static_cast<std::size_t>(r)] >= 2 && idx[static_cast<std::size_t>(r)] <= g.axes[static_cast<std::size_t>(r)].count - 3;
        if (ok) eligible.push_back(k);
    }
    std::vector<SampleNode> out;
    if (eligible.empty() || count == 0) return out;
    const std::size_t n = std::min(count, eligible.size());
    for (std::size_t j = 0; j < n; ++j) {
        // Offset by half a stride so the samples avoid the first eligible row.
        const std::size_t pick = (2 * j + 1) * eligible.size() / (2 * n);
        out.push_back({variant, level, g.unflatten(eligible[pick])});
    }
    return out;
}

ResidualStats hjb_residual(const SolveResult& result, const std::vector<SampleNode>& nodes, const ScalingFns& scaling,
                           const ProblemSpec& spec, int sphere_resolution, int control_resolution) {
    ResidualStats st;
    std::vector<double> absval;
    for (const auto& node : nodes) {
        const JetPoint jet = jet_at(result, node);
        const double h =
            sup_hamiltonian(jet, spec.controls, scaling, spec.sde, sphere_resolution, control_resolution).value;
        st.values.push_back(h);
        absval.push_back(std::abs(h));
        st.max_abs = std::max(st.max_abs, std::abs(h));
        st.mean_abs += std::abs(h);
    }
    if (!absval.empty()) st.mean_abs /= static_cast<double>(absval.size());
    st.median_abs = median(absval);
    return st;
}

} // namespace lsc
