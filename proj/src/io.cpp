#include "rvm/io.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <memory>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "rvm/errors.hpp"
#include "rvm/format.hpp"

#ifndef RVM_VERSION
#define RVM_VERSION "0.0.0"
#endif

namespace rvm {

std::string software_version() { return RVM_VERSION; }

void write_field_csv(std::ostream& os, std::span<const VelocitySample> samples) {
    std::string buf = "x,y,z,t,u,v,w\n";
    for (const auto& s : samples) {
        const double v[7] = {s.position.x, s.position.y, s.position.z, s.time,
                             s.velocity.x, s.velocity.y, s.velocity.z};
        for (int i = 0; i < 7; ++i) {
            if (i) buf.push_back(',');
            append_double(buf, v[i]);
        }
        buf.push_back('\n');
    }
    os << buf;
}

void export_field(const Solution& sol, const ParticleSet& particles, const SolverConfig& cfg,
                  const LatticeSpec& lattice, const std::filesystem::path& path) {
    if (lattice.count() == 0) throw ContractViolation("export_field: empty lattice");
    if (lattice.r > sol.grid.m) throw ContractViolation("export_field: time index beyond grid");
    const auto points = lattice.points();
    const auto samples = reconstruct_velocity_batch(points, lattice.r, sol, particles, cfg);
    std::ostringstream os;
    write_field_csv(os, samples);
    write_text_file(path, os.str());
}

void write_streamlines_csv(std::ostream& os, std::span<const Streamline> lines) {
    std::string buf = "line,index,x,y,z,t\n";
    for (std::size_t l = 0; l < lines.size(); ++l) {
        for (std::size_t i = 0; i < lines[l].points.size(); ++i) {
            const Vec3& p = lines[l].points[i];
            buf += std::to_string(l) + ',' + std::to_string(i);
            for (double v : {p.x, p.y, p.z, lines[l].time}) {
                buf.push_back(',');
                append_double(buf, v);
            }
            buf.push_back('\n');
        }
    }
    os << buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    os.flush();
    if (!os) throw IoError("write failed: " + path.string());
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw IoError("sha256 failed");
    static const char* hexd = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hexd[digest[i] >> 4]);
        out.push_back(hexd[digest[i] & 15]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["version"] = version;
    j["command"] = command;
    j["config"] = config;
    j["extra"] = extra;
    j["iterations_used"] = iterations_used;
    j["final_update_norm"] = final_update_norm;
    j["converged"] = converged;
    j["norm_history"] = norm_history;
    j["checksums"] = checksums;
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
    RunManifest m;
    try {
        const auto j = nlohmann::json::parse(text);
        m.version = j.at("version").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.config = j.at("config").get<std::string>();
        m.extra = j.value("extra", std::map<std::string, std::string>{});
        m.iterations_used = j.value("iterations_used", 0);
        m.final_update_norm = j.value("final_update_norm", 0.0);
        m.converged = j.value("converged", true);
        m.norm_history = j.value("norm_history", std::vector<double>{});
        m.checksums = j.value("checksums", std::map<std::string, std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
    write_text_file(dir / "manifest.json", manifest.to_json());
}

RunManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open manifest " + path.string());
    const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return RunManifest::from_json(text);
}

void write_timing(const std::filesystem::path& dir, double wall_seconds, int threads) {
    nlohmann::ordered_json j;
    j["wall_seconds"] = wall_seconds;
    j["threads"] = threads;
    write_text_file(dir / "timing.json", j.dump(2) + "\n");
}

}  // namespace rvm
