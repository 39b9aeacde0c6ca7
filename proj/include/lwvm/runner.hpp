#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lwvm {

enum class RunMode { verify_kernels, verify_identities, fields, simulate, report };

std::string to_string(RunMode m);
RunMode parse_mode(const std::string& s);  // throws std::invalid_argument

struct Tolerances {
    double homogeneity = 1e-10;
    double euler = 1e-8;
    double gradient = 1e-6;
    double mean_zero = 1e-8;      // relative to the sphere maximum of the kernel
    double mean_zero_2d = 1e-6;
    double first_identity = 1e-6;
    double second_identity = 1e-5;
    double vp_theta = 1e-8;
    double delta_spread = 1e-5;
    double delta_c00 = 1e-8;
    double residue = 1e-10;
    double residue_odd = 1e-12;
    double cone_mass = 1e-12;
    double field_first = 1e-3;
    double field_second = 1e-2;
    double max_principle = 1e-6;
    bool operator==(const Tolerances&) const = default;
};

/// Everything a run needs. Schema of the config file in README.md.
struct RunConfig {
    RunMode mode = RunMode::verify_kernels;
    std::uint64_t seed = 1;
    int threads = 0;  // 0: LWVM_THREADS, else hardware concurrency
    std::string out = "lwvm-out";

    // [quadrature]
    int sphere_order = 32;  // polar nodes; azimuth uses twice as many
    int time_order = 24;
    int momentum_order = 12;

    // [grid]
    int grid_n = 16;
    double half_width = 1.2;

    // [time]
    double dt = 0.025;
    double tau = 0.5;

    // [data]
    std::string profile = "gaussian-bump";
    std::map<std::string, double> profile_params;

    // [verify]
    int velocities = 50;           // kernel certification
    int mean_zero_velocities = 20;
    double v_max = 0.9;
    int trials = 10;

    // [fields]
    int rep_time_order = 8;
    int rep_sphere_order = 8;
    int field_momentum_order = 6;
    int field_points = 2;
    double field_time = 0.8;
    bool field_second = true;

    // [simulate]
    int corrector_iterations = 1;
    bool self_consistent = true;
    std::size_t ensemble_size = 256;

    // [monitor]
    int monitor_stride = 1;
    int lattice_points = 5;
    bool monitor_derivatives = false;
    double rf_tolerance = 1e-3;

    // [report]
    std::string series;  // directory holding norms.csv; empty: out

    Tolerances tol;

    int steps() const;
    /// Range checks; messages name the offending key.
    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

/// Parse errors carry "source:line: message".
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, int line, const std::string& msg);
    int line() const { return line_; }

private:
    int line_;
};

/// key = value lines, [section] headers, '#' or ';' comments. Unknown keys
/// and out-of-range values are rejected with the line number.
RunConfig parse_config(std::istream& is, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
/// Writes every key, so parse_config(write_config(c)) == c.
void write_config(std::ostream& os, const RunConfig& c);

struct CheckResult {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = true;
    std::string detail;
};

struct RunManifest {
    std::string toolkit_version;
    RunConfig config;
    std::vector<CheckResult> checks;
    std::vector<std::string> artifacts;
    std::map<std::string, double> summary;  // mode-specific scalars
    std::vector<std::pair<std::string, double>> timings;  // seconds per phase, not part of the manifest file
    int passed() const;
    int failed() const;
};

/// Runs the selected mode, writes the artifacts, manifest.json and
/// timings.json to config.out. I/O failures throw std::runtime_error with the path.
RunManifest run(const RunConfig& config);

/// Deterministic manifest text (no timings).
std::string manifest_json(const RunManifest& m);

const char* toolkit_version();

} // namespace lwvm
