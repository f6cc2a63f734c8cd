#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rvm/errors.hpp"
#include "rvm/io.hpp"

using namespace rvm;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("rvm_test_io_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

struct ZeroRun {
    ParticleSet particles = particles_from_raw({{0, 0, 0}, {1, 0, 0}}, {{0, 0, 0}, {0, 0, 0}}, 1.0);
    SolverConfig cfg;
    Solution sol;

    ZeroRun() {
        cfg.moll.delta = 0.5;
        sol = solve(particles, TimeGrid(0.1, 2), 2, cfg, 0);
    }
};

}  // namespace

TEST_CASE("sha256 known answers") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const fs::path dir = scratch_dir("sha");
    write_text_file(dir / "abc.txt", "abc");
    CHECK(sha256_file(dir / "abc.txt") == sha256_hex("abc"));
    CHECK_THROWS_AS(sha256_file(dir / "missing"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("field csv layout") {
    std::ostringstream os;
    const std::vector<VelocitySample> s{{{0.5, 0, -1}, 0.1, {1e-17, -2, 0.25}}};
    write_field_csv(os, s);
    CHECK(os.str() == "x,y,z,t,u,v,w\n0.5,0,-1,0.1,1e-17,-2,0.25\n");
}

TEST_CASE("single point export in a zero field") {
    const ZeroRun run;
    const fs::path dir = scratch_dir("single");
    LatticeSpec one;
    one.origin = {0.3, 0.2, 0.1};
    one.r = 2;
    export_field(run.sol, run.particles, run.cfg, one, dir / "f.csv");
    const std::string text = slurp(dir / "f.csv");
    CHECK(text == "x,y,z,t,u,v,w\n0.3,0.2,0.1,0.1,0,0,0\n");
    fs::remove_all(dir);
}

TEST_CASE("lattice export row count and byte-identical re-export") {
    ParticleSet p = lamb_oseen_particles();
    SolverConfig cfg;
    cfg.moll.delta = 0.25;
    const Solution sol = solve(p, TimeGrid(0.1, 5), 2, cfg, 3);
    LatticeSpec l;
    l.origin = {-0.5, -0.5, 0};
    l.spacing = {0.25, 0.25, 1};
    l.lo = {0, 0, 0};
    l.hi = {4, 4, 1};
    l.r = 5;
    const fs::path dir = scratch_dir("lattice");
    export_field(sol, p, cfg, l, dir / "a.csv");
    cfg.threads = 3;
    export_field(sol, p, cfg, l, dir / "b.csv");
    const std::string a = slurp(dir / "a.csv");
    CHECK(count_lines(a) == l.count() + 1);
    CHECK(a == slurp(dir / "b.csv"));

    CHECK_THROWS_AS(export_field(sol, p, cfg, l, dir / "no_such_dir" / "c.csv"), IoError);
    LatticeSpec late = l;
    late.r = 6;
    CHECK_THROWS_AS(export_field(sol, p, cfg, late, dir / "d.csv"), ContractViolation);
    fs::remove_all(dir);
}

TEST_CASE("streamline csv layout") {
    std::vector<Streamline> lines(2);
    lines[0].points = {{0, 0, 0}, {1, 0, 0}};
    lines[0].time = 0.5;
    lines[1].points = {{2, 2, 2}};
    std::ostringstream os;
    write_streamlines_csv(os, lines);
    CHECK(os.str() == "line,index,x,y,z,t\n0,0,0,0,0,0.5\n0,1,1,0,0,0.5\n1,0,2,2,2,0\n");
}

TEST_CASE("manifest json round trip") {
    RunManifest m;
    m.version = software_version();
    m.command = "simulate";
    m.config = "initializer = lamb_oseen\nnu = 0.5\n";
    m.extra = {{"threshold", "0.3"}};
    m.iterations_used = 4;
    m.final_update_norm = 3.5e-9;
    m.converged = true;
    m.norm_history = {0.1, 1e-4, 2e-7, 3.5e-9};
    m.checksums = {{"a.csv", sha256_hex("a")}, {"b.csv", sha256_hex("b")}};
    const RunManifest back = RunManifest::from_json(m.to_json());
    CHECK(back.version == m.version);
    CHECK(back.command == m.command);
    CHECK(back.config == m.config);
    CHECK(back.extra == m.extra);
    CHECK(back.iterations_used == 4);
    CHECK(back.final_update_norm == m.final_update_norm);
    CHECK(back.converged);
    CHECK(back.norm_history == m.norm_history);
    CHECK(back.checksums == m.checksums);
    CHECK(back.to_json() == m.to_json());

    const fs::path dir = scratch_dir("manifest");
    write_manifest(dir, m);
    CHECK(read_manifest(dir / "manifest.json").to_json() == m.to_json());
    write_timing(dir, 1.5, 4);
    CHECK(slurp(dir / "timing.json").find("\"threads\"") != std::string::npos);
    CHECK(slurp(dir / "manifest.json").find("wall") == std::string::npos);
    CHECK_THROWS_AS(RunManifest::from_json("{not json"), IoError);
    CHECK_THROWS_AS(RunManifest::from_json("[1,2]"), IoError);
    CHECK_THROWS_AS(read_manifest(dir / "missing.json"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint rejects a truncated file") {
    const ZeroRun run;
    const fs::path dir = scratch_dir("ckpt");
    write_checkpoint(dir / "c.bin", run.sol.trajectories, run.sol.gauges);
    TrajectoryEnsemble X;
    GaugeEnsemble G;
    read_checkpoint(dir / "c.bin", X, G);
    CHECK(X == run.sol.trajectories);
    CHECK(G == run.sol.gauges);
    const std::string bytes = slurp(dir / "c.bin");
    write_text_file(dir / "t.bin", bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(read_checkpoint(dir / "t.bin", X, G), IoError);
    write_text_file(dir / "m.bin", "NOTMAGIC" + bytes.substr(8));
    CHECK_THROWS_AS(read_checkpoint(dir / "m.bin", X, G), IoError);
    fs::remove_all(dir);
}
