#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lsc/error.hpp"
#include "lsc/solver.hpp"

namespace lsc {

namespace {

// Budget lookup tables for one (axis, control value, quadrature node).
struct BudgetLut {
    std::vector<int> k;
    std::vector<double> t;
    std::vector<double> pen;
    bool integral = true;  // every t is exactly zero
};

double clamp_growth(double v, double cap) {
    v = v > 0.0 ? v : 0.0;
    return v < cap ? v : cap;
}

} // namespace

std::size_t ControlTables::combos(const VariantGrid& grid) const {
    std::size_t n = 1;
    for (std::size_t k = 0; k < grid.p_dates.size(); ++k) n *= budget.p_values.size();
    if (grid.has_m) n *= budget.m_values.size();
    return n;
}

StepContext StepContext::make(const ProblemSpec& spec, const GridSpec& grid, double dt) {
    StepContext ctx;
    ctx.spec = &spec;
    ctx.grid = &grid;
    ctx.dt = dt;
    ctx.controls.u_points = spec.controls.discretize(grid.control_resolution);
    ctx.controls.budget = make_budget_controls(grid, spec.state_dim, dt);
    ctx.rule = make_quadrature(grid.quadrature, grid.gauss_hermite_order, spec.state_dim, dt);
    ctx.growth_constant = lsc::growth_constant(spec);
    return ctx;
}

ValueSlice sl_step(const ValueSlice& next, double s, const StepContext& ctx, bool record_policy) {
    const ProblemSpec& spec = *ctx.spec;
    const VariantGrid& G = next.grid;
    const int d = G.d;
    const int nb = G.budget_axes();
    const std::size_t N = G.size, Nz = G.z_size, Nb = G.budget_size;
    const auto& us = ctx.controls.u_points;
    const auto& rule = ctx.rule;
    const std::size_t nU = us.size(), nQ = rule.nodes.size();
    const double dt = ctx.dt;
    const double C = ctx.growth_constant;

    if (nU == 0) throw InvalidArgument("empty control discretization");
    const double bytes = (static_cast<double>(nU * nQ) + 2.0) * static_cast<double>(N) * 8.0 +
                         (record_policy ? 4.0 * static_cast<double>(N) : 0.0);
    if (bytes > ctx.grid->memory_budget_bytes)
        throw NumericFailure("grid memory exhaustion in variant " + next.variant.name() + ": one step needs " +
                             std::to_string(bytes / 1e9) + " GB, budget is " +
                             std::to_string(ctx.grid->memory_budget_bytes / 1e9) + " GB");

    // Budget axes: the p axes of the budgeted dates, then m.
    std::vector<const std::vector<Vector>*> axis_values;
    for (std::size_t k = 0; k < G.p_dates.size(); ++k) axis_values.push_back(&ctx.controls.budget.p_values);
    if (G.has_m) axis_values.push_back(&ctx.controls.budget.m_values);
    std::vector<std::size_t> bstride(static_cast<std::size_t>(nb));
    for (int j = 0; j < nb; ++j) bstride[static_cast<std::size_t>(j)] = G.strides[static_cast<std::size_t>(d + j)];

    // Combination table, first axis slowest.
    std::size_t nC = 1;
    for (const auto* v : axis_values) nC *= v->size();
    std::vector<int> combo(nC * static_cast<std::size_t>(nb));
    for (std::size_t c = 0; c < nC; ++c) {
        std::size_t rest = c;
        for (int j = nb - 1; j >= 0; --j) {
            const std::size_t nv = axis_values[static_cast<std::size_t>(j)]->size();
            combo[c * static_cast<std::size_t>(nb) + static_cast<std::size_t>(j)] = static_cast<int>(rest % nv);
            rest /= nv;
        }
    }

    // z pre-pass: W[u][q] holds next interpolated in z at Z'(z, u, q) for every
    // budget node, clamped to [0, C (1 + |Z'|)]. Outside the z box the lookup
    // uses the projected point plus one linear-extrapolation offset taken on
    // the budget origin, which every variant of the lattice shares.
    std::vector<std::vector<double>> W(nU * nQ, std::vector<double>(N));
    std::vector<std::size_t> zstride(static_cast<std::size_t>(d));
    for (int r = 0; r < d; ++r) zstride[static_cast<std::size_t>(r)] = G.strides[static_cast<std::size_t>(r)] / Nb;
    const std::size_t ncz = std::size_t{1} << d;
    std::vector<std::size_t> corner_off(ncz), corner_lin(ncz);
    std::vector<double> zt(static_cast<std::size_t>(d)), zc(static_cast<std::size_t>(d));
    std::vector<double> vals(std::max(ncz, std::size_t{1} << nb));
    const double* src = next.values.data();
    auto reduce = [&](const std::vector<std::size_t>& off, const std::vector<double>& t, std::size_t bi) {
        for (std::size_t cm = 0; cm < ncz; ++cm) vals[cm] = src[off[cm] + bi];
        std::size_t width = ncz;
        for (int r = 0; r < d; ++r) {
            width >>= 1;
            for (std::size_t c = 0; c < width; ++c)
                vals[c] = lerp(vals[2 * c], vals[2 * c + 1], t[static_cast<std::size_t>(r)]);
        }
        return vals[0];
    };
    Vector z(d), Zp(d);
    for (std::size_t zf = 0; zf < Nz; ++zf) {
        std::size_t rest = zf;
        for (int r = 0; r < d; ++r) {
            const auto ri = static_cast<std::size_t>(r);
            const int idx = static_cast<int>(rest / zstride[ri]);
            rest %= zstride[ri];
            z[r] = G.axes[ri].value(idx);
        }
        for (std::size_t ui = 0; ui < nU; ++ui) {
            const Vector mu = spec.sde.drift(s, z, us[ui]);
            const Matrix sig = spec.sde.diffusion(s, z, us[ui]);
            if (!mu.allFinite() || !sig.allFinite())
                throw NumericFailure("non-finite coefficients in variant " + next.variant.name() + " at t=" +
                                     std::to_string(s));
            for (std::size_t q = 0; q < nQ; ++q) {
                const Vector& om = rule.nodes[q];
                for (int r = 0; r < d; ++r) {
                    double x = z[r] + mu[r] * dt;
                    for (int l = 0; l < d; ++l) x += sig(r, l) * om[l];
                    Zp[r] = x;
                }
                const double cap = C * (1.0 + Zp.norm());
                std::size_t base = 0;
                bool outside = false;
                for (int r = 0; r < d; ++r) {
                    const auto ri = static_cast<std::size_t>(r);
                    const auto loc = G.axes[ri].locate_extrapolate(Zp[r]);
                    zt[ri] = loc.t;
                    zc[ri] = loc.t < 0.0 ? 0.0 : (loc.t > 1.0 ? 1.0 : loc.t);
                    outside = outside || zc[ri] != loc.t;
                    base += static_cast<std::size_t>(loc.k) * G.strides[ri];
                }
                for (std::size_t cm = 0; cm < ncz; ++cm) {
                    std::size_t off = base, lin = base;
                    for (int r = 0; r < d; ++r) {
                        const auto ri = static_cast<std::size_t>(r);
                        if ((cm >> r) & 1u) {
                            if (zc[ri] != 0.0) off += G.strides[ri];
                            if (zt[ri] != 0.0) lin += G.strides[ri];
                        }
                    }
                    corner_off[cm] = off;
                    corner_lin[cm] = lin;
                }
                const double shift = outside ? reduce(corner_lin, zt, 0) - reduce(corner_off, zc, 0) : 0.0;
                double* out = W[ui * nQ + q].data() + zf * Nb;
                if (d == 1) {
                    const double t0 = zc[0];
                    const double* a = src + corner_off[0];
                    const double* b = src + corner_off[1];
                    if (outside) {
                        for (std::size_t bi = 0; bi < Nb; ++bi)
                            out[bi] = clamp_growth(lerp(a[bi], b[bi], t0) + shift, cap);
                    } else {
                        for (std::size_t bi = 0; bi < Nb; ++bi) out[bi] = clamp_growth(lerp(a[bi], b[bi], t0), cap);
                    }
                } else {
                    for (std::size_t bi = 0; bi < Nb; ++bi) {
                        double v = reduce(corner_off, zc, bi);
                        if (outside) v += shift;
                        out[bi] = clamp_growth(v, cap);
                    }
                }
            }
        }
    }

    // Budget lookup tables per (axis, control value, quadrature node).
    std::vector<std::vector<std::vector<BudgetLut>>> lut(static_cast<std::size_t>(nb));
    bool all_integral = true;
    for (int j = 0; j < nb; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const UniformAxis& axis = G.axes[static_cast<std::size_t>(d + j)];
        const auto& values = *axis_values[ju];
        lut[ju].resize(values.size());
        for (std::size_t v = 0; v < values.size(); ++v) {
            lut[ju][v].resize(nQ);
            for (std::size_t q = 0; q < nQ; ++q) {
                BudgetLut& L = lut[ju][v][q];
                L.k.resize(static_cast<std::size_t>(axis.count));
                L.t.resize(static_cast<std::size_t>(axis.count));
                L.pen.resize(static_cast<std::size_t>(axis.count));
                for (int i = 0; i < axis.count; ++i) {
                    double x = axis.value(i);
                    for (int l = 0; l < d; ++l) x += values[v][l] * rule.nodes[q][l];
                    const auto loc = axis.locate_budget(x);
                    L.k[static_cast<std::size_t>(i)] = loc.k;
                    L.t[static_cast<std::size_t>(i)] = loc.t;
                    L.pen[static_cast<std::size_t>(i)] = loc.penalty;
                    if (loc.t != 0.0) L.integral = false;
                }
                all_integral = all_integral && L.integral;
            }
        }
    }

    ValueSlice out;
    out.variant = next.variant;
    out.level = next.level - 1;
    out.t = s;
    out.grid = G;
    out.values.assign(N, std::numeric_limits<double>::infinity());
    if (record_policy) out.policy.assign(N, 0);
    double* best = out.values.data();
    std::int32_t* arg = record_policy ? out.policy.data() : nullptr;
    const auto nbu = static_cast<std::size_t>(nb);

    if (nb >= 1 && all_integral) {
        // Every budget increment lands on a node: rows along the last axis.
        const std::size_t nl = static_cast<std::size_t>(G.axes.back().count);
        const std::size_t rows = N / nl;
        const std::size_t prefix_rows = Nb / nl;
        std::vector<double> acc(nl);
        std::vector<int> pidx(nbu);
        std::vector<double> pens(nbu, 0.0);
        for (std::size_t row = 0; row < rows; ++row) {
            const std::size_t zf = row / prefix_rows;
            std::size_t rest = (row % prefix_rows) * nl;
            for (std::size_t j = 0; j + 1 < nbu; ++j) {
                pidx[j] = static_cast<int>(rest / bstride[j]);
                rest %= bstride[j];
            }
            double* brow = best + row * nl;
            std::int32_t* arow = arg ? arg + row * nl : nullptr;
            for (std::size_t ui = 0; ui < nU; ++ui) {
                for (std::size_t c = 0; c < nC; ++c) {
                    const int* cv = combo.data() + c * nbu;
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (std::size_t q = 0; q < nQ; ++q) {
                        std::size_t base = zf * Nb;
                        for (std::size_t j = 0; j + 1 < nbu; ++j) {
                            const BudgetLut& L = lut[j][static_cast<std::size_t>(cv[j])][q];
                            base += static_cast<std::size_t>(L.k[static_cast<std::size_t>(pidx[j])]) * bstride[j];
                            pens[j] = L.pen[static_cast<std::size_t>(pidx[j])];
                        }
                        const BudgetLut& last = lut[nbu - 1][static_cast<std::size_t>(cv[nbu - 1])][q];
                        const double* w = W[ui * nQ + q].data() + base;
                        const int* kl = last.k.data();
                        const double* pl = last.pen.data();
                        const double wq = rule.weights[q];
                        if (nbu == 1) {
                            for (std::size_t i = 0; i < nl; ++i) {
                                double v = w[kl[i]];
                                v += pl[i];
                                acc[i] += wq * v;
                            }
                        } else if (nbu == 2) {
                            const double p0 = pens[0];
                            for (std::size_t i = 0; i < nl; ++i) {
                                double v = w[kl[i]];
                                v += p0;
                                v += pl[i];
                                acc[i] += wq * v;
                            }
                        } else {
                            for (std::size_t i = 0; i < nl; ++i) {
                                double v = w[kl[i]];
                                for (std::size_t j = 0; j + 1 < nbu; ++j) v += pens[j];
                                v += pl[i];
                                acc[i] += wq * v;
                            }
                        }
                    }
                    const auto id = static_cast<std::int32_t>(ui * nC + c);
                    if (arow) {
                        for (std::size_t i = 0; i < nl; ++i)
                            if (acc[i] < brow[i]) {
                                brow[i] = acc[i];
                                arow[i] = id;
                            }
                    } else {
                        for (std::size_t i = 0; i < nl; ++i) brow[i] = acc[i] < brow[i] ? acc[i] : brow[i];
                    }
                }
            }
        }
    } else {
        const std::size_t ncb = std::size_t{1} << nb;
        std::vector<int> bidx(nbu), kk(nbu);
        std::vector<double> tt(nbu), pp(nbu);
        for (std::size_t node = 0; node < N; ++node) {
            const std::size_t zf = node / Nb;
            std::size_t rest = node % Nb;
            for (std::size_t j = 0; j < nbu; ++j) {
                bidx[j] = static_cast<int>(rest / bstride[j]);
                rest %= bstride[j];
            }
            for (std::size_t ui = 0; ui < nU; ++ui) {
                for (std::size_t c = 0; c < nC; ++c) {
                    const int* cv = combo.data() + c * nbu;
                    double acc = 0.0;
                    for (std::size_t q = 0; q < nQ; ++q) {
                        std::size_t base = zf * Nb;
                        for (std::size_t j = 0; j < nbu; ++j) {
                            const BudgetLut& L = lut[j][static_cast<std::size_t>(cv[j])][q];
                            const auto b = static_cast<std::size_t>(bidx[j]);
                            kk[j] = L.k[b];
                            tt[j] = L.t[b];
                            pp[j] = L.pen[b];
                            base += static_cast<std::size_t>(kk[j]) * bstride[j];
                        }
                        const double* w = W[ui * nQ + q].data();
                        for (std::size_t cm = 0; cm < ncb; ++cm) {
                            std::size_t off = base;
                            for (std::size_t j = 0; j < nbu; ++j)
                                if (((cm >> j) & 1u) && tt[j] != 0.0) off += bstride[j];
                            vals[cm] = w[off];
                        }
                        std::size_t width = ncb;
                        for (std::size_t j = 0; j < nbu; ++j) {
                            width >>= 1;
                            for (std::size_t cc = 0; cc < width; ++cc)
                                vals[cc] = lerp(vals[2 * cc], vals[2 * cc + 1], tt[j]);
                        }
                        double v = vals[0];
                        for (std::size_t j = 0; j < nbu; ++j) v += pp[j];
                        acc += rule.weights[q] * v;
                    }
                    if (acc < best[node]) {
                        best[node] = acc;
                        if (arg) arg[node] = static_cast<std::int32_t>(ui * nC + c);
                    }
                }
            }
        }
    }

    for (std::size_t k = 0; k < N; ++k)
        if (!std::isfinite(best[k]))
            throw NumericFailure("non-finite value in variant " + next.variant.name() + " at t=" + std::to_string(s));
    return out;
}

} // namespace lsc
