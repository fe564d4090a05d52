#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "lsc/error.hpp"
#include "lsc/presets.hpp"

namespace lsc::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(key + ": cannot parse '" + t + "' as a number");
    return v;
}

long long parse_int(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(key + ": cannot parse '" + t + "' as an integer");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + t + "'");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<double>& v, const char* sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + fmt_double(v[i]);
    return out;
}

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field opt_double(std::optional<T> RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_double(k, v); },
            [member](const RunConfig& c) { return (c.*member) ? fmt_double(*(c.*member)) : std::string(); }};
}

Field opt_int(std::optional<int> RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) {
                c.*member = static_cast<int>(parse_int(k, v));
            },
            [member](const RunConfig& c) { return (c.*member) ? std::to_string(*(c.*member)) : std::string(); }};
}

Field opt_string(std::optional<std::string> RunConfig::*member) {
    return {[member](RunConfig& c, const std::string&, const std::string& v) { c.*member = trim(v); },
            [member](const RunConfig& c) { return (c.*member) ? *(c.*member) : std::string(); }};
}

Field plain_double(double RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_double(k, v); },
            [member](const RunConfig& c) { return fmt_double(c.*member); }};
}

Field plain_int(int RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) {
                c.*member = static_cast<int>(parse_int(k, v));
            },
            [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field plain_bool(bool RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_bool(k, v); },
            [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field plain_string(std::string RunConfig::*member) {
    return {[member](RunConfig& c, const std::string&, const std::string& v) { c.*member = trim(v); },
            [member](const RunConfig& c) { return c.*member; }};
}

Field list_double(std::vector<double> RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_list(k, v); },
            [member](const RunConfig& c) { return join(c.*member); }};
}

Field opt_list(std::optional<std::vector<double>> RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_list(k, v); },
            [member](const RunConfig& c) { return (c.*member) ? join(*(c.*member)) : std::string(); }};
}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> f;
        f["preset"] = plain_string(&RunConfig::preset);
        f["dates"] = opt_list(&RunConfig::dates);
        f["thresholds"] = opt_list(&RunConfig::thresholds);
        f["interval"] = plain_int(&RunConfig::interval);
        f["dt"] = opt_double(&RunConfig::dt);
        f["nz"] = opt_int(&RunConfig::nz);
        f["np"] = opt_int(&RunConfig::np);
        f["nm"] = opt_int(&RunConfig::nm);
        f["z_min"] = opt_double(&RunConfig::z_min);
        f["z_max"] = opt_double(&RunConfig::z_max);
        f["p_max"] = opt_double(&RunConfig::p_max);
        f["m_max"] = opt_double(&RunConfig::m_max);
        f["amax"] = opt_double(&RunConfig::amax);
        f["quadrature"] = opt_string(&RunConfig::quadrature);
        f["gh_order"] = opt_int(&RunConfig::gh_order);
        f["control_resolution"] = opt_int(&RunConfig::control_resolution);
        f["budget_controls"] = opt_string(&RunConfig::budget_controls);
        f["budget_points"] = opt_int(&RunConfig::budget_points);
        f["keep_stride"] = plain_int(&RunConfig::keep_stride);
        f["record_policy"] = plain_bool(&RunConfig::record_policy);
        f["scaling"] = plain_string(&RunConfig::scaling);
        f["out"] = plain_string(&RunConfig::out);
        f["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         const long long s = parse_int(k, v);
                         if (s < 0) throw ConfigError(k + ": must be non-negative");
                         c.seed = static_cast<std::uint64_t>(s);
                     },
                     [](const RunConfig& c) { return std::to_string(c.seed); }};
        f["paths"] = plain_int(&RunConfig::paths);
        f["steps"] = plain_int(&RunConfig::steps);
        f["antithetic"] = plain_bool(&RunConfig::antithetic);
        f["policy"] = plain_string(&RunConfig::policy);
        f["t"] = plain_double(&RunConfig::start_t);
        f["z"] = list_double(&RunConfig::start_z);
        f["p"] = list_double(&RunConfig::start_p);
        f["m"] = plain_double(&RunConfig::start_m);
        f["query"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                          std::istringstream is(v);
                          std::string item;
                          while (std::getline(is, item, ';'))
                              if (!trim(item).empty()) c.queries.push_back(parse_list(k, item));
                      },
                      [](const RunConfig& c) {
                          std::string out;
                          for (std::size_t i = 0; i < c.queries.size(); ++i) out += (i ? ";" : "") + join(c.queries[i]);
                          return out;
                      }};
        f["eps"] = opt_double(&RunConfig::eps);
        f["checks"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                           c.checks.clear();
                           std::istringstream is(v);
                           std::string item;
                           while (std::getline(is, item, ','))
                               if (!trim(item).empty()) c.checks.push_back(trim(item));
                       },
                       [](const RunConfig& c) {
                           std::string out;
                           for (std::size_t i = 0; i < c.checks.size(); ++i) out += (i ? "," : "") + c.checks[i];
                           return out;
                       }};
        f["sphere_resolution"] = plain_int(&RunConfig::sphere_resolution);
        f["residual_samples"] = plain_int(&RunConfig::residual_samples);
        f["xi"] = plain_double(&RunConfig::xi);
        f["residual_tol"] = plain_double(&RunConfig::residual_tol);
        f["oracle_tol"] = plain_double(&RunConfig::oracle_tol);
        f["mc_allowance"] = plain_double(&RunConfig::mc_allowance);
        return f;
    }();
    return table;
}

void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) throw ConfigError(field + ": " + message);
}

} // namespace

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) out.push_back(parse_double(key, item));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

const std::vector<std::string>& solve_keys() {
    static const std::vector<std::string> keys{
        "preset", "dates", "thresholds", "interval", "dt", "nz", "np", "nm", "z_min", "z_max", "p_max", "m_max",
        "amax", "quadrature", "gh_order", "control_resolution", "budget_controls", "budget_points", "keep_stride",
        "record_policy", "scaling"};
    return keys;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& [k, f] : fields()) out.push_back(k);
    return out;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second.set(cfg, key, value);
}

std::string get_key(const RunConfig& cfg, const std::string& key) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown configuration key '" + key + "'");
    return it->second.get(cfg);
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open '" + path.string() + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not of the form key = value");
        set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::map<std::string, std::string> solve_settings(const RunConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& k : solve_keys()) {
        const std::string v = get_key(cfg, k);
        if (!v.empty()) out[k] = v;
    }
    return out;
}

std::string config_hash(const RunConfig& cfg) {
    std::string canon;
    for (const auto& [k, v] : solve_settings(cfg)) canon += k + "=" + v + "\n";
    // FNV-1a, stable across platforms and runs.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Problem build_problem(const RunConfig& cfg) {
    Problem pr;
    Preset preset;
    try {
        preset = make_preset(cfg.preset);
    } catch (const InvalidArgument&) {
        std::string names;
        for (const auto& n : preset_names()) names += " " + n;
        throw ConfigError("preset: unknown preset '" + cfg.preset + "' (known:" + names + ")");
    }
    pr.spec = preset.spec;
    pr.grid = preset.grid;

    if (cfg.dates) pr.spec.grid.dates = *cfg.dates;
    if (cfg.thresholds) pr.spec.grid.thresholds = *cfg.thresholds;
    if (!pr.spec.grid.thresholds.empty() &&
        static_cast<int>(pr.spec.grid.thresholds.size()) != pr.spec.grid.n())
        throw ConfigError("thresholds: expected " + std::to_string(pr.spec.grid.n()) + " values, one per date");
    if (cfg.dates || cfg.thresholds)
        for (const auto& v : validate_spec(pr.spec)) throw ConfigError(v.field + ": " + v.message);

    GridSpec& g = pr.grid;
    if (cfg.z_min) g.z_axes[0].lo = *cfg.z_min;
    if (cfg.z_max) g.z_axes[0].hi = *cfg.z_max;
    if (cfg.nz) {
        require(*cfg.nz >= 2, "nz", "needs at least 2 points");
        for (auto& ax : g.z_axes) ax.count = *cfg.nz;
    }
    if (cfg.np) g.p_axis.count = *cfg.np;
    if (cfg.nm) g.m_axis.count = *cfg.nm;
    if (cfg.p_max) g.p_axis.hi = *cfg.p_max;
    if (cfg.m_max) g.m_axis.hi = *cfg.m_max;
    if (cfg.dt) g.dt = *cfg.dt;
    if (cfg.amax) g.a_max = *cfg.amax;
    if (cfg.gh_order) g.gauss_hermite_order = *cfg.gh_order;
    if (cfg.control_resolution) g.control_resolution = *cfg.control_resolution;
    if (cfg.budget_points) g.budget_points = *cfg.budget_points;
    if (cfg.quadrature) {
        if (*cfg.quadrature == "two_point") g.quadrature = QuadratureKind::two_point;
        else if (*cfg.quadrature == "gauss_hermite") g.quadrature = QuadratureKind::gauss_hermite;
        else throw ConfigError("quadrature: expected two_point or gauss_hermite");
    }
    if (cfg.budget_controls) {
        if (*cfg.budget_controls == "aligned") g.budget_controls = BudgetControlKind::aligned;
        else if (*cfg.budget_controls == "uniform") g.budget_controls = BudgetControlKind::uniform;
        else throw ConfigError("budget_controls: expected aligned or uniform");
    }
    require(cfg.keep_stride >= 0, "keep_stride", "must be non-negative");
    g.keep_stride = cfg.keep_stride;
    g.record_policy = cfg.record_policy;
    // Levels 0 and 1 of every interval are kept so jets can be formed.
    for (std::size_t k = 0; k + 1 < pr.spec.grid.dates.size(); ++k) g.keep_times.push_back(pr.spec.grid.dates[k]);

    try {
        g.validate(pr.spec.state_dim);
        (void)make_schedule(pr.spec.grid, g.dt);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    require(cfg.interval >= 0 && cfg.interval < pr.spec.grid.n(), "interval",
            "must lie in [0, " + std::to_string(pr.spec.grid.n() - 1) + "]");

    if (cfg.scaling == "unit") pr.scaling = ScalingFns::unit();
    else if (cfg.scaling == "one_vee") pr.scaling = ScalingFns::one_vee();
    else throw ConfigError("scaling: expected unit or one_vee, got '" + cfg.scaling + "'");
    return pr;
}

} // namespace lsc::cli
