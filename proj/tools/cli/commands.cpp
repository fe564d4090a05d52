#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lsc/error.hpp"
#include "lsc/levelset.hpp"
#include "lsc/montecarlo.hpp"
#include "lsc/slice_io.hpp"

namespace lsc::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest";
constexpr const char* kManifestFormat = "lsc-solve-1";
constexpr double kGapSlack = 0.02;
constexpr double kDeterminantTol = 1e-8;
constexpr double kFormTol = 1e-10;
constexpr int kGMatrixTrials = 4;

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

json variant_json(const VariantKey& k) {
    return {{"name", k.name()},
            {"interval", k.interval},
            {"active_p", k.active_p},
            {"has_m", k.has_m},
            {"plain_psi", k.plain_psi}};
}

VariantKey variant_from_json(const json& j) {
    VariantKey k;
    k.interval = j.at("interval").get<int>();
    k.active_p = j.at("active_p").get<std::vector<int>>();
    k.has_m = j.at("has_m").get<bool>();
    k.plain_psi = j.at("plain_psi").get<std::vector<int>>();
    return k;
}

json axis_json(const UniformAxis& a) { return {{"lo", a.lo}, {"hi", a.hi}, {"count", a.count}}; }

std::vector<SampleNode> root_samples(const SolveResult& res, int count) {
    const VariantKey root = root_variant(res.start_interval, res.spec.grid.n());
    return interior_samples(res, root, 0, static_cast<std::size_t>(std::max(count, 0)));
}

/// A solve loaded back from disk together with its manifest.
struct StoredSolve {
    RunConfig cfg;
    Problem problem;
    SolveResult result;
    json manifest;
};

json read_manifest(const fs::path& dir) {
    const fs::path file = dir / kManifestName;
    std::ifstream is(file);
    if (!is) throw ConfigError("out: no solve artifacts in '" + dir.string() + "' (missing " + kManifestName + ")");
    json m;
    try {
        is >> m;
    } catch (const json::exception& e) {
        throw CorruptedInput("manifest is not valid JSON: " + std::string(e.what()));
    }
    if (m.value("format", "") != kManifestFormat) throw CorruptedInput("manifest has an unknown format");
    return m;
}

/// Merges the stored solve settings into `cfg`. A solve setting given again
/// with a different value is a configuration error.
RunConfig merge_stored(const RunConfig& cfg, const json& manifest) {
    RunConfig merged = cfg;
    const RunConfig defaults;
    for (const auto& key : solve_keys()) {
        const std::string given = get_key(cfg, key);
        const std::string fallback = get_key(defaults, key);
        const auto it = manifest.at("config").find(key);
        if (it == manifest.at("config").end()) continue;
        const std::string stored = it->get<std::string>();
        if (given != fallback && given != stored)
            throw ConfigError(key + ": '" + given + "' differs from the stored solve ('" + stored + "')");
        set_key(merged, key, stored);
    }
    return merged;
}

StoredSolve load_solve(const RunConfig& cfg) {
    StoredSolve s;
    s.manifest = read_manifest(cfg.out);
    s.cfg = merge_stored(cfg, s.manifest);
    if (config_hash(s.cfg) != s.manifest.value("config_hash", ""))
        throw CorruptedInput("manifest config hash does not match its settings");
    s.problem = build_problem(s.cfg);
    std::vector<SliceFileEntry> entries;
    for (const auto& e : s.manifest.at("slices")) {
        SliceFileEntry f;
        f.file = e.at("file").get<std::string>();
        f.variant = variant_from_json(e.at("variant"));
        f.level = e.at("level").get<int>();
        f.t = e.at("t").get<double>();
        if (!fs::exists(fs::path(cfg.out) / f.file)) throw ConfigError("out: missing slice file " + f.file);
        entries.push_back(std::move(f));
    }
    s.result = read_slices(s.problem.spec, s.problem.grid, s.cfg.interval, cfg.out, entries);
    s.result.diagnostics.growth_constant = s.manifest.value("growth_constant", s.result.diagnostics.growth_constant);
    return s;
}

/// First non-finite slice value, named by variant; empty when all are finite.
std::string first_non_finite(const SolveResult& res) {
    for (const auto& [id, s] : res.slices)
        for (std::size_t k = 0; k < s.values.size(); ++k)
            if (!std::isfinite(s.values[k]))
                return id.variant.name() + " at t=" + short_fmt(s.t) + " node " + std::to_string(k);
    return {};
}

/// Retained root slice of the interval holding t whose time is closest to t.
const ValueSlice& nearest_root_slice(const SolveResult& res, double t) {
    const int i = res.interval_of(t);
    if (i < res.start_interval) throw ConfigError("t: " + fmt(t) + " precedes the solved intervals");
    const VariantKey root = root_variant(i, res.spec.grid.n());
    const ValueSlice* best = nullptr;
    for (int l : res.levels(root)) {
        const ValueSlice* s = res.find(root, l);
        if (!best || std::abs(s->t - t) < std::abs(best->t - t)) best = s;
    }
    if (!best) throw ConfigError("t: no retained slice for " + root.name());
    return *best;
}

PathStart start_point(const RunConfig& cfg, const Problem& pr) {
    PathStart st;
    st.t = cfg.start_t;
    const int d = pr.spec.state_dim;
    const auto& dates = pr.spec.grid.dates;
    if (!(st.t >= 0.0 && st.t < pr.spec.grid.horizon())) throw ConfigError("t: must lie in [0, T)");
    int i = 0;
    while (i + 1 < pr.spec.grid.n() && st.t >= dates[static_cast<std::size_t>(i + 1)]) ++i;
    if (cfg.start_z.empty()) {
        st.z = Vector(d);
        for (int r = 0; r < d; ++r) {
            const auto& ax = pr.grid.z_axes[static_cast<std::size_t>(r)];
            st.z[r] = 0.5 * (ax.lo + ax.hi);
        }
    } else {
        if (static_cast<int>(cfg.start_z.size()) != d) throw ConfigError("z: expected " + std::to_string(d) + " values");
        st.z = Eigen::Map<const Vector>(cfg.start_z.data(), d);
    }
    const int np = pr.spec.grid.n() - i;
    if (cfg.start_p.empty()) {
        if (pr.spec.grid.thresholds.empty()) throw ConfigError("p: no thresholds to default to");
        st.p = Vector(np);
        for (int k = 0; k < np; ++k) st.p[k] = pr.spec.grid.thresholds[static_cast<std::size_t>(i + k)];
    } else {
        if (static_cast<int>(cfg.start_p.size()) != np)
            throw ConfigError("p: expected " + std::to_string(np) + " budgets at t=" + fmt(st.t));
        st.p = Eigen::Map<const Vector>(cfg.start_p.data(), np);
    }
    for (int k = 0; k < st.p.size(); ++k)
        if (st.p[k] < 0.0) throw ConfigError("p: negative budget " + fmt(st.p[k]));
    if (cfg.start_m < 0.0) throw ConfigError("m: must be non-negative");
    st.m = cfg.start_m;
    return st;
}

double numeric_w(const SolveResult& res, const PathStart& st) {
    const ValueSlice& s = nearest_root_slice(res, st.t);
    Vector x(s.grid.rank());
    x.head(st.z.size()) = st.z;
    x.segment(st.z.size(), st.p.size()) = st.p;
    x[x.size() - 1] = st.m;
    return s.interpolate(x);
}

bool has_closed_form(const ProblemSpec& spec) {
    return spec.controls.is_singleton() && spec.analytic && spec.analytic->mean_f && spec.analytic->mean_psi;
}

bool brute_force_fits(const Problem& pr, int interval) {
    int total = 0;
    for (const auto& s : make_schedule(pr.spec.grid, pr.grid.dt))
        if (s.interval >= interval) total += s.steps;
    return total <= 4;
}

PolicyFn make_policy(const std::string& name, const ProblemSpec& spec, const SolveResult* solved) {
    if (name == "zero") return zero_policy(spec);
    if (name == "replicating") {
        try {
            return replicating_policy(spec);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("policy: replicating is unavailable for this preset (") + e.what() + ")");
        }
    }
    if (name == "solver") {
        if (!solved) throw ConfigError("policy: solver needs a stored solve");
        bool recorded = false;
        for (const auto& [id, s] : solved->slices) recorded = recorded || !s.policy.empty();
        if (!recorded) throw ConfigError("policy: the stored solve has no recorded policy (solve with record_policy = true)");
        return solver_policy(*solved);
    }
    throw ConfigError("policy: expected zero, replicating or solver, got '" + name + "'");
}

class VerificationFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CheckOutcome {
    explicit CheckOutcome(std::string n) : name(std::move(n)) {}
    std::string name;
    bool pass = true;
    bool skipped = false;
    std::vector<std::string> lines;
};

} // namespace

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
    const Problem pr = build_problem(cfg);
    const fs::path dir = cfg.out;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("out: cannot create '" + dir.string() + "': " + ec.message());

    const auto t0 = std::chrono::steady_clock::now();
    SolveResult res;
    try {
        res = solve_problem(pr.spec, pr.grid, cfg.interval, pr.scaling);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    const double solve_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (const std::string bad = first_non_finite(res); !bad.empty())
        throw NumericFailure("non-finite value in variant " + bad);

    const auto t1 = std::chrono::steady_clock::now();
    const auto entries = write_slices(res, dir);
    const double write_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();

    const auto t2 = std::chrono::steady_clock::now();
    const ResidualStats rs = hjb_residual(res, root_samples(res, cfg.residual_samples), pr.scaling, pr.spec,
                                          cfg.sphere_resolution, pr.grid.control_resolution);
    const double residual_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t2).count();

    json m;
    m["format"] = kManifestFormat;
    m["config"] = solve_settings(cfg);
    m["config_hash"] = config_hash(cfg);
    m["problem"] = pr.spec.name;
    m["dates"] = pr.spec.grid.dates;
    m["thresholds"] = pr.spec.grid.thresholds;
    m["interval"] = cfg.interval;
    json grid;
    grid["z"] = json::array();
    for (const auto& ax : pr.grid.z_axes) grid["z"].push_back(axis_json(ax));
    grid["p"] = axis_json(pr.grid.p_axis);
    grid["m"] = axis_json(pr.grid.m_axis);
    grid["dt"] = pr.grid.dt;
    grid["a_max"] = pr.grid.a_max;
    grid["quadrature"] = pr.grid.quadrature == QuadratureKind::two_point ? "two_point" : "gauss_hermite";
    grid["budget_controls"] = pr.grid.budget_controls == BudgetControlKind::aligned ? "aligned" : "uniform";
    m["grid"] = grid;
    m["variants"] = json::array();
    for (int i = pr.spec.grid.n() - 1; i >= cfg.interval; --i)
        for (const auto& k : build_variant_lattice(pr.spec, i)) m["variants"].push_back(variant_json(k));
    m["slices"] = json::array();
    for (const auto& e : entries)
        m["slices"].push_back({{"file", e.file}, {"variant", variant_json(e.variant)}, {"level", e.level}, {"t", e.t}});
    m["growth_constant"] = res.diagnostics.growth_constant;
    m["timings"] = {{"solve_seconds", solve_s}, {"write_seconds", write_s}, {"residual_seconds", residual_s}};
    m["residual"] = {{"samples", rs.values.size()},
                     {"median_abs", rs.median_abs},
                     {"mean_abs", rs.mean_abs},
                     {"max_abs", rs.max_abs}};
    std::ofstream os(dir / kManifestName);
    os << m.dump(2) << '\n';
    if (!os) throw ConfigError("out: cannot write the manifest");

    out << "solved " << pr.spec.name << ": " << entries.size() << " slices in " << short_fmt(solve_s)
        << " s, median |sup H| " << short_fmt(rs.median_abs) << " over " << rs.values.size() << " samples\n";
    return kExitOk;
}

int cmd_extract(const RunConfig& cfg, std::ostream& out) {
    if (cfg.queries.empty()) throw ConfigError("query: at least one query t,z...,p... is required");
    const StoredSolve s = load_solve(cfg);
    const ProblemSpec& spec = s.problem.spec;
    const int d = spec.state_dim;
    const int n = spec.grid.n();
    const double median_res = s.manifest.at("residual").value("median_abs", 0.0);

    std::ostringstream csv;
    csv << "t";
    for (int r = 1; r <= d; ++r) csv << ",z" << r;
    for (int k = 1; k <= n; ++k) csv << ",p_" << k;
    csv << ",V\n";
    int feasible = 0;
    for (const auto& q : s.cfg.queries) {
        if (q.empty()) throw ConfigError("query: empty query");
        const double t = q[0];
        if (!(t >= spec.grid.dates[static_cast<std::size_t>(s.cfg.interval)] && t <= spec.grid.horizon()))
            throw ConfigError("query: t=" + fmt(t) + " lies outside the solved time range");
        const int i = s.result.interval_of(t);
        const int np = n - i;
        if (static_cast<int>(q.size()) != 1 + d + np)
            throw ConfigError("query: expected t, " + std::to_string(d) + " z and " + std::to_string(np) +
                              " p values at t=" + fmt(t));
        LevelSetQuery lq;
        lq.t = t;
        lq.z = Eigen::Map<const Vector>(q.data() + 1, d);
        lq.p = Eigen::Map<const Vector>(q.data() + 1 + d, np);
        for (int k = 0; k < np; ++k)
            if (lq.p[k] < 0.0) throw ConfigError("query: negative budget p=" + fmt(lq.p[k]) + " admits no control");
        lq.tolerance = s.cfg.eps ? *s.cfg.eps : default_level_tolerance(median_res, spec.grid.horizon() - t);
        ValueExtraction v;
        try {
            v = extract_value(s.result, lq);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("query: ") + e.what());
        }
        if (v.feasible) ++feasible;
        csv << fmt(t);
        for (int r = 0; r < d; ++r) csv << ',' << fmt(lq.z[r]);
        for (int k = 1; k <= n; ++k) {
            csv << ',';
            if (k > i) csv << fmt(lq.p[k - i - 1]);
        }
        csv << ',' << (v.feasible ? fmt(v.value) : std::string("inf")) << '\n';
    }
    std::ofstream os(fs::path(cfg.out) / "extract.csv");
    os << csv.str();
    if (!os) throw ConfigError("out: cannot write extract.csv");
    out << csv.str();
    return feasible == 0 ? kExitAllInfeasible : kExitOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    std::optional<StoredSolve> stored;
    RunConfig eff = cfg;
    if (cfg.policy == "solver") {
        stored = load_solve(cfg);
        eff = stored->cfg;
    }
    const Problem pr = stored ? stored->problem : build_problem(eff);
    const PolicyFn policy = make_policy(eff.policy, pr.spec, stored ? &stored->result : nullptr);
    const PathStart st = start_point(eff, pr);
    if (eff.paths < 1) throw ConfigError("paths: must be positive");
    if (eff.steps < 1) throw ConfigError("steps: must be positive");
    if (eff.antithetic && eff.paths % 2 != 0) throw ConfigError("paths: antithetic pairing needs an even count");

    const auto batch = simulate_paths(pr.spec, policy, st, eff.paths, eff.steps, eff.seed, eff.antithetic);
    const Estimate e = estimate_J(batch, pr.spec.loss);

    std::ostringstream csv;
    csv << "policy,paths,steps,antithetic,seed,mean,std_error\n"
        << eff.policy << ',' << e.n_paths << ',' << eff.steps << ',' << (eff.antithetic ? 1 : 0) << ',' << e.seed
        << ',' << fmt(e.mean) << ',' << fmt(e.std_error) << '\n';
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    std::ofstream os(fs::path(cfg.out) / "estimate.csv");
    os << csv.str();
    if (!os) throw ConfigError("out: cannot write estimate.csv");
    out << csv.str();
    return kExitOk;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
    static const std::vector<std::string> all{"invariants", "residual", "gmatrix", "supersolution", "oracle",
                                              "montecarlo"};
    for (const auto& c : cfg.checks)
        if (std::find(all.begin(), all.end(), c) == all.end())
            throw ConfigError("checks: unknown check '" + c + "'");
    const auto wanted = [&](const std::string& name) {
        return cfg.checks.empty() || std::find(cfg.checks.begin(), cfg.checks.end(), name) != cfg.checks.end();
    };

    std::vector<CheckOutcome> outcomes;
    std::optional<StoredSolve> loaded;
    try {
        loaded = load_solve(cfg);
    } catch (const CorruptedInput& e) {
        CheckOutcome c("artifacts");
        c.pass = false;
        c.lines.push_back(e.what());
        outcomes.push_back(std::move(c));
    }

    if (loaded) {
        const StoredSolve& s = *loaded;
        const SolveResult& res = s.result;
        const ProblemSpec& spec = s.problem.spec;
        const auto samples = root_samples(res, s.cfg.residual_samples);
        std::vector<JetPoint> jets;
        for (const auto& node : samples) jets.push_back(jet_at(res, node));
        ResidualStats rs;
        const bool need_residual = wanted("residual") || wanted("supersolution");
        if (need_residual)
            rs = hjb_residual(res, samples, s.problem.scaling, spec, s.cfg.sphere_resolution,
                              s.problem.grid.control_resolution);
        double oracle_err_at_start = 0.0;
        bool oracle_at_start = false;

        if (wanted("invariants")) {
            CheckOutcome c("invariants");
            const InvariantReport rep = check_invariants(res);
            for (const auto& ch : rep.checks) {
                c.lines.push_back(ch.name + ": " + std::to_string(ch.violations) + " violations" +
                                  (ch.violations ? ", worst " + short_fmt(ch.worst) + " at " + ch.where : ""));
            }
            c.pass = rep.ok();
            outcomes.push_back(std::move(c));
        }
        if (wanted("residual")) {
            CheckOutcome c("residual");
            c.pass = !rs.values.empty() && rs.median_abs <= s.cfg.residual_tol;
            c.lines.push_back("median |sup H| = " + short_fmt(rs.median_abs) + " (limit " +
                              short_fmt(s.cfg.residual_tol) + "), mean " + short_fmt(rs.mean_abs) + ", max " +
                              short_fmt(rs.max_abs) + " over " + std::to_string(rs.values.size()) + " samples");
            outcomes.push_back(std::move(c));
        }
        if (wanted("gmatrix")) {
            CheckOutcome c("gmatrix");
            const Vector u = spec.controls.discretize(1).front();
            double det = 0.0, form = 0.0, h = 0.0;
            for (std::size_t j = 0; j < jets.size(); ++j) {
                for (const ScalingFns& sc : {ScalingFns::unit(), ScalingFns::one_vee()}) {
                    const auto r = g_matrix_check(jets[j], u, sc, spec.sde, kGMatrixTrials, s.cfg.seed + j);
                    det = std::max(det, r.max_determinant_violation);
                    form = std::max(form, r.max_form_violation);
                    h = std::max(h, r.max_h_violation);
                }
            }
            c.pass = !jets.empty() && det <= kDeterminantTol && form <= kFormTol && h <= kFormTol;
            c.lines.push_back("determinant identity " + short_fmt(det) + " (limit " + short_fmt(kDeterminantTol) +
                              "), quadratic form " + short_fmt(form) + ", H " + short_fmt(h) + " (limit " +
                              short_fmt(kFormTol) + ") over " + std::to_string(jets.size()) + " jets");
            outcomes.push_back(std::move(c));
        }
        if (wanted("supersolution")) {
            CheckOutcome c("supersolution");
            const double t_right = spec.grid.dates[static_cast<std::size_t>(res.start_interval + 1)];
            const auto gap = strict_supersolution_gap(jets, s.cfg.xi, t_right, spec.controls, ScalingFns::one_vee(),
                                                      spec.sde, s.cfg.sphere_resolution,
                                                      s.problem.grid.control_resolution);
            const double floor = -(rs.median_abs + kGapSlack);
            c.pass = !jets.empty() && gap.min_gap >= floor;
            c.lines.push_back("min sup H(w + xi phi) - xi/8 = " + short_fmt(gap.min_gap) + ", required >= " +
                              short_fmt(floor) + " (xi = " + short_fmt(s.cfg.xi) + ")");
            outcomes.push_back(std::move(c));
        }
        // The oracle error at the Monte Carlo start point feeds the Monte Carlo allowance.
        const bool closed = has_closed_form(spec);
        std::optional<PathStart> st;
        if (wanted("montecarlo") || wanted("oracle")) st = start_point(s.cfg, s.problem);
        if (closed && st) {
            oracle_err_at_start = std::abs(numeric_w(res, *st) - closed_form_uncontrolled(spec, st->t, st->z, st->p, st->m));
            oracle_at_start = true;
        }
        if (wanted("oracle")) {
            CheckOutcome c("oracle");
            if (closed) {
                const ValueSlice& sl = res.slice(root_variant(res.start_interval, spec.grid.n()), 0);
                const auto& g = sl.grid;
                double err = 0.0, scale = 0.0;
                std::size_t used = 0;
                for (std::size_t k = 0; k < g.size; ++k) {
                    const auto idx = g.unflatten(k);
                    bool inner = true;
                    for (int r = 0; r < g.rank() && inner; ++r)
                        inner = idx[static_cast<std::size_t>(r)] >= 2 &&
                                idx[static_cast<std::size_t>(r)] <= g.axes[static_cast<std::size_t>(r)].count - 3;
                    if (!inner) continue;
                    const Vector x = g.coordinates(idx);
                    const double exact = closed_form_uncontrolled(spec, sl.t, x.head(g.d),
                                                                  x.segment(g.d, g.budget_axes() - 1), x[g.rank() - 1]);
                    err = std::max(err, std::abs(sl.values[k] - exact));
                    scale = std::max(scale, std::abs(exact));
                    ++used;
                }
                const double rel = scale > 0.0 ? err / scale : err;
                c.pass = used > 0 && rel <= s.cfg.oracle_tol;
                c.lines.push_back("closed form: max|err|/max|exact| = " + short_fmt(rel) + " (limit " +
                                  short_fmt(s.cfg.oracle_tol) + ") over " + std::to_string(used) +
                                  " interior nodes, max|err| = " + short_fmt(err));
                if (oracle_at_start)
                    c.lines.push_back("error at the start point " + short_fmt(oracle_err_at_start));
            } else if (brute_force_fits(s.problem, res.start_interval)) {
                const BruteForceTable bf = brute_force_dp(spec, s.problem.grid, res.start_interval);
                std::size_t compared = 0, differing = 0;
                double worst = 0.0;
                for (const auto& [id, sl] : res.slices) {
                    const auto it = bf.values.find(id);
                    if (it == bf.values.end()) continue;
                    for (std::size_t k = 0; k < sl.values.size(); ++k) {
                        ++compared;
                        const double diff = std::abs(sl.values[k] - it->second[k]);
                        if (diff != 0.0) ++differing;
                        worst = std::max(worst, diff);
                    }
                }
                c.pass = compared > 0 && differing == 0;
                c.lines.push_back("brute force: " + std::to_string(differing) + " of " + std::to_string(compared) +
                                  " values differ, worst " + short_fmt(worst));
            } else {
                c.skipped = true;
                c.lines.push_back("no oracle for this problem");
            }
            outcomes.push_back(std::move(c));
        }
        if (wanted("montecarlo")) {
            CheckOutcome c("montecarlo");
            std::string pol = "zero";
            if (spec.controls.is_singleton() && spec.analytic && spec.analytic->grad_mean_f) pol = "replicating";
            else if (s.cfg.record_policy) pol = "solver";
            const PolicyFn policy = make_policy(pol, spec, &res);
            const auto batch = simulate_paths(spec, policy, *st, s.cfg.paths, s.cfg.steps, s.cfg.seed, s.cfg.antithetic);
            const Estimate e = estimate_J(batch, spec.loss);
            const double w = numeric_w(res, *st);
            const double allowance = oracle_err_at_start + s.cfg.mc_allowance;
            const double bound = e.mean + 3.0 * e.std_error + allowance;
            c.pass = w <= bound;
            c.lines.push_back("numeric w = " + short_fmt(w) + " <= J(" + pol + ") + 3 stderr + allowance = " +
                              short_fmt(e.mean) + " + " + short_fmt(3.0 * e.std_error) + " + " + short_fmt(allowance) +
                              " (" + std::to_string(e.n_paths) + " paths, seed " + std::to_string(e.seed) + ")");
            outcomes.push_back(std::move(c));
        }
    }

    std::ostringstream rep;
    const CheckOutcome* first_fail = nullptr;
    for (const auto& c : outcomes) {
        rep << '[' << c.name << "] " << (c.skipped ? "SKIP" : c.pass ? "PASS" : "FAIL") << '\n';
        for (const auto& l : c.lines) rep << "  " << l << '\n';
        if (!c.pass && !first_fail) first_fail = &c;
    }
    std::ofstream os(fs::path(cfg.out) / "verify_report.txt");
    os << rep.str();
    out << rep.str();
    if (first_fail) throw VerificationFailed(first_fail->name);
    return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Level-set solver for control problems with expectation constraints at several dates", "lsc"};
    app.require_subcommand(1);
    std::map<std::string, std::vector<std::string>> flags;
    std::string config_path;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"solve", "solve the level-set problem and store slices plus a manifest"},
        {"extract", "extract V = inf{m : w <= eps} at query points from a stored solve"},
        {"verify", "run verification checks against a stored solve"},
        {"simulate", "estimate J for a feedback policy by Monte Carlo"}};
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "key = value configuration file");
        for (const auto& key : config_keys()) {
            auto* opt = sub->add_option("--" + key, flags[key], "configuration key '" + key + "'");
            opt->type_size(1);
            opt->allow_extra_args(false);
            if (key == "query") opt->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
            else opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        }
    }
    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "lsc: " << e.what() << '\n';
        return kExitConfig;
    }
    const CLI::App* chosen = app.get_subcommands().front();
    try {
        RunConfig cfg;
        if (!config_path.empty()) load_config_file(cfg, config_path);
        for (const auto& [key, values] : flags) {
            if (values.empty()) continue;
            if (key == "query") {
                for (const auto& v : values) set_key(cfg, key, v);
            } else {
                set_key(cfg, key, values.back());
            }
        }
        const std::string name = chosen->get_name();
        if (name == "solve") return cmd_solve(cfg, out);
        if (name == "extract") return cmd_extract(cfg, out);
        if (name == "verify") return cmd_verify(cfg, out);
        return cmd_simulate(cfg, out);
    } catch (const ConfigError& e) {
        err << "lsc: configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const VerificationFailed& e) {
        err << "lsc: verification failed: " << e.what() << '\n';
        return kExitVerification;
    } catch (const NumericFailure& e) {
        err << "lsc: numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const CorruptedInput& e) {
        err << "lsc: corrupted input: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidArgument& e) {
        err << "lsc: invalid argument: " << e.what() << '\n';
        return kExitConfig;
    }
}

} // namespace lsc::cli
