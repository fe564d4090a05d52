#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsc/grid.hpp"
#include "lsc/hamiltonian.hpp"
#include "lsc/model.hpp"

namespace lsc::cli {

/// Bad configuration: maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a subcommand may read. Optional grid fields override the
/// preset's grid only when set.
struct RunConfig {
    // problem
    std::string preset = "gbm1";
    std::optional<std::vector<double>> dates;
    std::optional<std::vector<double>> thresholds;
    int interval = 0;

    // grid
    std::optional<double> dt;
    std::optional<int> nz;
    std::optional<int> np;
    std::optional<int> nm;
    std::optional<double> z_min;
    std::optional<double> z_max;
    std::optional<double> p_max;
    std::optional<double> m_max;
    std::optional<double> amax;
    std::optional<std::string> quadrature;
    std::optional<int> gh_order;
    std::optional<int> control_resolution;
    std::optional<std::string> budget_controls;
    std::optional<int> budget_points;
    int keep_stride = 0;
    bool record_policy = false;

    std::string scaling = "unit";
    std::string out = "lsc_out";
    std::uint64_t seed = 1;

    // simulate / verify
    int paths = 20000;
    int steps = 100;
    bool antithetic = false;
    std::string policy = "zero";
    double start_t = 0.0;
    std::vector<double> start_z;  // empty: middle of the z box
    std::vector<double> start_p;  // empty: thresholds of the remaining dates
    double start_m = 1.0;

    // extract
    std::vector<std::vector<double>> queries;  // t, z..., p...
    std::optional<double> eps;

    // verify
    std::vector<std::string> checks;  // empty: all
    int sphere_resolution = 16;
    int residual_samples = 100;
    double xi = 0.8;
    double residual_tol = 0.05;
    double oracle_tol = 0.05;
    double mc_allowance = 0.01;
};

/// Keys that determine the stored solve; they are written to the manifest.
const std::vector<std::string>& solve_keys();

/// Every accepted key.
std::vector<std::string> config_keys();

/// Sets one field from its text form. Throws ConfigError naming the key on an
/// unknown key or a malformed value.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Text form of one field, empty when an optional field is unset.
std::string get_key(const RunConfig& cfg, const std::string& key);

/// Reads `key = value` lines; `#` starts a comment.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// solve_keys() with their text values, unset optionals omitted.
std::map<std::string, std::string> solve_settings(const RunConfig& cfg);

/// Stable hash of solve_settings, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

struct Problem {
    ProblemSpec spec;
    GridSpec grid;
    ScalingFns scaling;
};

/// Preset with the configured overrides applied. Throws ConfigError on an
/// unknown preset or an invalid override, naming the field.
Problem build_problem(const RunConfig& cfg);

std::vector<double> parse_list(const std::string& key, const std::string& text);

} // namespace lsc::cli
