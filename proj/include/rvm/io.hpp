#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rvm/fields.hpp"
#include "rvm/solver.hpp"
#include "rvm/validation.hpp"

namespace rvm {

std::string software_version();

/// Rows x,y,z,t,u,v,w after a header line, shortest round-trip decimals.
void write_field_csv(std::ostream& os, std::span<const VelocitySample> samples);

/// Probes the reconstructed velocity on the lattice at lattice.r and writes it as field CSV.
void export_field(const Solution& sol, const ParticleSet& particles, const SolverConfig& cfg,
                  const LatticeSpec& lattice, const std::filesystem::path& path);

/// Rows line,index,x,y,z,t.
void write_streamlines_csv(std::ostream& os, std::span<const Streamline> lines);

/// Writes `text` to `path`, throwing IoError if the file cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Everything needed to reproduce a run. Wall time and thread count live in a separate
/// timing file so that the manifest itself does not depend on them.
struct RunManifest {
    std::string version;
    std::string command;
    std::string config;                        ///< serialized RunConfig without threads/output_dir
    std::map<std::string, std::string> extra;  ///< subcommand flags not in the config
    int iterations_used = 0;
    double final_update_norm = 0.0;
    bool converged = true;
    std::vector<double> norm_history;
    std::map<std::string, std::string> checksums;  ///< output file name -> sha256

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);
};

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

/// timing.json: wall seconds and resolved thread count.
void write_timing(const std::filesystem::path& dir, double wall_seconds, int threads);

}  // namespace rvm
