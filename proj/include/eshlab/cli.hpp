#pragma once

// Batch experiment runner: binds declarative key/value configs to the library
// operations and writes reproducible report documents and plot-ready CSV
// tables.  Exit-code contract: 0 success, 2 config error (the message names
// the offending key), 3 numerical failure (a module rejection, with the
// module's reason).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eshlab/geometry.hpp"
#include "eshlab/materials.hpp"
#include "eshlab/potentials.hpp"

namespace eshlab {

// Version string stamped into every text artifact header.
const char* tool_version();

enum class Command {
    Field,
    Potential,
    Uniformity,
    ShapeTest,
    Theorem1,
    Theorem2,
    Flux,
    SpecialMaterial,
    Appendix,
};

// The spelled form used in configs and artifact names ("shape-test", ...).
const char* command_name(Command command);

// Rejection of a config document or command line.  `key` names the offending
// key ("grid.padding", "--sweep", ...) and is included in what().
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message);
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// Point-evaluation request for the `potential` command.  Explicit points are
// taken as given; random_points more are placed uniformly inside the shape,
// drawn counter-based from the config seed (stream 1).
struct PotentialRequest {
    PotentialKind kind = PotentialKind::Newtonian;
    int axis = -1;  // required 0..2 for the axis kinds, forbidden otherwise
    std::vector<Vec3> points;
    int random_points = 0;
};

// Envelope and quadrature controls for the `flux` command.  The envelope
// ellipsoid is origin-centered by construction (no center key exists).
struct FluxConfig {
    Vec3 semi_axes = Vec3::Ones();
    Mat3 rotation = Mat3::Identity();
    int resolution = 96;
    int cone_directions = 0;
    double cone_half_angle_deg = 10.0;
};

struct OutputConfig {
    std::string report;  // key/value document, default "<command>.txt"
    std::string table;   // CSV table; default "<command>.csv" where rows exist
    std::string mask;    // optional voxel-mask dump (binary, mask convention)
};

struct ExperimentConfig {
    Command command = Command::Field;
    std::uint64_t seed = 0;
    int threads = 0;

    std::optional<InclusionShape> shape;
    std::optional<LameMaterial> material;
    std::optional<LameMaterial> material2;

    // Eigenstress: full tensor, or the diagonal triple kept separately for the
    // commands that need the two-equal form.
    std::optional<Mat3> sigma_star;
    std::optional<double> k1;
    std::optional<double> k3;

    int resolution = 0;
    double padding = 0.0;
    bool has_grid = false;

    std::optional<PotentialRequest> potential;
    std::optional<FluxConfig> flux;
    double fit_threshold = 1e-3;

    OutputConfig output;

    // Canonical "section.key=value" lines of every semantically meaningful
    // consumed key (output block excluded), sorted; the hash input.
    std::vector<std::string> semantic_lines;
};

// Parses and validates a config document.  Strict: unknown keys, missing
// required keys, duplicate keys, and out-of-range values all throw ConfigError
// naming the key.  Grid padding below 3 is rejected here for the commands
// that run the spectral solver.
ExperimentConfig parse_config(const std::string& text);

// FNV-1a 64 over the semantic lines plus the effective seed.  Output paths
// and thread count do not participate.
std::uint64_t config_hash(const ExperimentConfig& config);

// Copy of `config` with one numeric key replaced (sweep support).  Accepted
// keys: grid.resolution, grid.padding, eigenstress.k1, eigenstress.k3,
// material.lambda, material.mu, flux.resolution, fit.threshold.  Throws
// ConfigError if the key is unsupported or absent from the command's schema.
ExperimentConfig with_override(const ExperimentConfig& config, const std::string& key,
                               double value);

// Executes one experiment and writes its artifacts into out_dir (created if
// missing).  Returns the paths written.  ConfigError propagates for
// config-level faults; module rejections propagate as their own exceptions.
std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config,
                                                  const std::filesystem::path& out_dir);

// Re-runs the experiment once per value of the swept key and writes one CSV
// row each, plus a report with per-column monotonicity flags.  A sign change
// of the joint special-material determinant across adjacent k3 rows is
// refined by bisection and reported.  Empty `values` throws ConfigError.
std::vector<std::filesystem::path> run_sweep(const ExperimentConfig& config,
                                             const std::string& key,
                                             const std::vector<double>& values,
                                             const std::filesystem::path& out_dir);

// Full command line (flags --config, --out, --seed, --threads, --sweep).
// Returns the process exit code per the contract above; diagnostics go to
// `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eshlab
