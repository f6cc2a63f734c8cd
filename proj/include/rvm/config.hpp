#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rvm/ensemble.hpp"
#include "rvm/fields.hpp"
#include "rvm/solver.hpp"

namespace rvm {

enum class Initializer { LambOseen, TaylorGreen, Isotropic, Custom };

/// Everything needed to reproduce a run. Flat `key = value` text; see docs/config.md.
struct RunConfig {
    double nu = 0.5;
    double T = 0.1;
    std::size_t steps = 0;              ///< 0 = round(T / 0.02)
    std::size_t copies = 1;
    NoiseScheme scheme = NoiseScheme::Shared;
    std::optional<double> delta;        ///< empty = auto (h / 2)
    double tol = 1e-7;
    int max_iters = 200;
    std::uint64_t seed = 0;
    int threads = 0;                    ///< 0 = auto
    Initializer initializer = Initializer::LambOseen;
    SelfInteraction self_interaction = SelfInteraction::IncludeAll;
    std::string output_dir;

    // Lattice initializers (taylor_green, isotropic): spacing pi / lattice_per_pi over
    // index range [lattice_lo, lattice_hi] per axis.
    int lattice_per_pi = 16;
    std::optional<long> lattice_lo;     ///< default -lattice_per_pi
    std::optional<long> lattice_hi;     ///< default 3 * lattice_per_pi
    bool keep_zero_weights = true;

    // Custom initializer: CSV x,y,z,wx,wy,wz with raw weights; spacing used for delta = auto.
    std::string particles_file;
    double spacing = 1.0;

    // Optional field export lattice, probed at field_time_index (default: final time).
    std::optional<Vec3> field_origin;
    std::optional<Vec3> field_spacing;
    std::optional<std::array<long, 3>> field_counts;
    std::optional<std::size_t> field_time_index;

    // Streamlines.
    std::vector<Vec3> streamline_seeds;
    double streamline_step = 0.01;
    std::size_t streamline_count = 500;
    std::optional<std::size_t> streamline_time_index;
    std::optional<std::array<double, 6>> streamline_box;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;

    std::size_t resolved_steps() const;
    TimeGrid grid() const { return TimeGrid(T, resolved_steps()); }
    /// delta if set, otherwise h / 2 for the given particle spacing.
    double resolved_delta(double h) const;
    SolverConfig solver_config(double h) const;
};

struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;  ///< 0 for command-line overrides
};

/// Splits `key = value` lines; '#' starts a comment. Syntax errors name the line.
std::vector<ConfigEntry> read_config_entries(std::istream& is);

/// Builds a validated config. Later entries override earlier ones (so CLI flags appended
/// after file entries win). Unknown keys, bad values and a missing initializer throw
/// ConfigError naming the key and line.
RunConfig config_from_entries(const std::vector<ConfigEntry>& entries);

RunConfig parse_config(std::istream& is);
RunConfig parse_config_file(const std::filesystem::path& path,
                            const std::vector<ConfigEntry>& overrides = {});

/// Canonical text form; parse_config(serialize_config(c)) == c. The reproducibility form used
/// in manifests drops threads and output_dir, which do not affect results.
std::string serialize_config(const RunConfig& cfg, bool include_threads = true,
                             bool include_output_dir = true);

std::string to_string(Initializer init);
std::string to_string(NoiseScheme scheme);
std::string to_string(SelfInteraction mode);

/// Builds the particle set named by the config.
ParticleSet make_particles(const RunConfig& cfg);

/// Reads x,y,z,wx,wy,wz rows (header line required, '#' comments allowed).
ParticleSet read_particles_csv(const std::filesystem::path& path, double spacing);

}  // namespace rvm
