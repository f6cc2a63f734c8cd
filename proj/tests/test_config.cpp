#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rvm/config.hpp"
#include "rvm/errors.hpp"

using namespace rvm;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("rvm_test_config_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

template <class F>
ConfigError config_error(F&& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("no ConfigError");
    return ConfigError("", "");
}

}  // namespace

TEST_CASE("defaults with only an initializer") {
    const RunConfig c = parse("initializer = lamb_oseen\n");
    CHECK(c.nu == 0.5);
    CHECK(c.T == 0.1);
    CHECK(c.resolved_steps() == 5);
    CHECK(c.grid().dt() == doctest::Approx(0.02));
    CHECK(c.copies == 1);
    CHECK(c.scheme == NoiseScheme::Shared);
    CHECK(c.tol == 1e-7);
    CHECK(c.max_iters == 200);
    CHECK_FALSE(c.delta.has_value());
    CHECK(c.resolved_delta(0.5) == 0.25);
    CHECK(c.solver_config(0.5).moll.delta == 0.25);
}

TEST_CASE("comments, whitespace and explicit values") {
    const RunConfig c = parse(
        "# a comment\n"
        "  initializer = taylor_green   # trailing\n"
        "\n"
        "nu=0.000625\nT = 1\nsteps = 50\ncopies = 4\nscheme = independent\ndelta = 0.1\n"
        "seed = 123\nthreads = 2\nself_interaction = exclude_self\nlattice_per_pi = 4\n");
    CHECK(c.initializer == Initializer::TaylorGreen);
    CHECK(c.nu == 0.000625);
    CHECK(c.resolved_steps() == 50);
    CHECK(c.copies == 4);
    CHECK(c.scheme == NoiseScheme::Independent);
    CHECK(c.delta == 0.1);
    CHECK(c.seed == 123);
    CHECK(c.threads == 2);
    CHECK(c.self_interaction == SelfInteraction::ExcludeSelf);
    const SolverConfig s = c.solver_config(1.0);
    CHECK(s.nu == c.nu);
    CHECK(s.threads == 2);
    CHECK(s.moll.delta == 0.1);
}

TEST_CASE("invalid values name the key and line") {
    const ConfigError e = config_error([] { parse("initializer = lamb_oseen\nnu = -1\n"); });
    CHECK(e.key() == "nu");
    CHECK(e.line() == 2);
    for (const char* bad : {"T = 0", "steps = 0", "copies = 0", "delta = -0.1", "tol = 0", "max_iters = 0",
                            "threads = 0", "scheme = mixed", "nu = abc", "copies = 1.5", "seed = -3",
                            "keep_zero_weights = maybe", "field_origin = 1,2"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse(std::string("initializer = lamb_oseen\n") + bad + "\n"), ConfigError);
    }
    const ConfigError unk = config_error([] { parse("initializer = lamb_oseen\n\nfoo = 1\n"); });
    CHECK(unk.key() == "foo");
    CHECK(unk.line() == 3);
    const ConfigError syn = config_error([] { parse("initializer = lamb_oseen\nnonsense\n"); });
    CHECK(syn.line() == 2);
    const ConfigError dup = config_error([] { parse("initializer = lamb_oseen\nnu = 1\nnu = 2\n"); });
    CHECK(dup.key() == "nu");
    CHECK(dup.line() == 3);
}

TEST_CASE("missing or inconsistent keys") {
    CHECK(config_error([] { parse("nu = 1\n"); }).key() == "initializer");
    CHECK_THROWS_AS(parse("initializer = custom\n"), ConfigError);
    CHECK_THROWS_AS(parse("initializer = lamb_oseen\nsteps = 5\nfield_time_index = 6\n"), ConfigError);
    CHECK_THROWS_AS(parse("initializer = lamb_oseen\nfield_origin = 0,0,0\n"), ConfigError);
    CHECK_NOTHROW(parse("initializer = lamb_oseen\nfield_origin = 0,0,0\nfield_spacing = 0.1,0.1,0.1\n"
                        "field_counts = 2,2,1\n"));
}

TEST_CASE("serialize then parse is the identity") {
    RunConfig c = parse("initializer = isotropic\n");
    CHECK(parse(serialize_config(c)) == c);

    c.nu = 0.1 + 0.2;
    c.T = 1.0 / 3.0;
    c.steps = 7;
    c.copies = 11;
    c.scheme = NoiseScheme::Independent;
    c.delta = 0.123456789012345678;
    c.tol = 3e-9;
    c.max_iters = 17;
    c.seed = 18446744073709551615ull;
    c.threads = 3;
    c.self_interaction = SelfInteraction::ExcludeSelf;
    c.output_dir = "out dir";
    c.lattice_per_pi = 8;
    c.lattice_lo = -2;
    c.lattice_hi = 5;
    c.keep_zero_weights = false;
    c.field_origin = Vec3{-1, 0.5, 2};
    c.field_spacing = Vec3{0.1, 0.2, 0.3};
    c.field_counts = std::array<long, 3>{3, 4, 5};
    c.field_time_index = 2;
    c.streamline_seeds = {{1, 0, 0}, {0, -2.5, 1e-3}};
    c.streamline_step = 0.002;
    c.streamline_count = 42;
    c.streamline_time_index = 7;
    c.streamline_box = std::array<double, 6>{-1, -2, -3, 1, 2, 3};
    const std::string text = serialize_config(c);
    CHECK(parse(text) == c);
    CHECK(serialize_config(parse(text)) == text);

    const std::string repro = serialize_config(c, false, false);
    CHECK(repro.find("threads") == std::string::npos);
    CHECK(repro.find("output_dir") == std::string::npos);
    RunConfig back = parse(repro);
    back.threads = c.threads;
    back.output_dir = c.output_dir;
    CHECK(back == c);
}

TEST_CASE("later entries override earlier ones") {
    const fs::path dir = scratch_dir("override");
    const fs::path file = dir / "run.cfg";
    std::ofstream(file) << "initializer = lamb_oseen\ncopies = 5\nseed = 1\n";
    const RunConfig c = parse_config_file(file, {{"copies", "9", 0}, {"seed", "2", 0}, {"seed", "3", 0}});
    CHECK(c.copies == 9);
    CHECK(c.seed == 3);
    CHECK_THROWS_AS(parse_config_file(dir / "missing.cfg"), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("enum names") {
    CHECK(to_string(Initializer::TaylorGreen) == "taylor_green");
    CHECK(to_string(NoiseScheme::Shared) == "shared");
    CHECK(to_string(SelfInteraction::IncludeAll) == "include_all");
}

TEST_CASE("particles from the config") {
    const RunConfig lo = parse("initializer = lamb_oseen\n");
    CHECK(make_particles(lo).size() == 41);

    const RunConfig tg = parse("initializer = taylor_green\nlattice_per_pi = 2\n");
    const ParticleSet p = make_particles(tg);
    CHECK(p.size() == 9u * 9u * 9u);
    CHECK(p.h == doctest::Approx(std::numbers::pi / 2));

    const RunConfig sub = parse("initializer = taylor_green\nlattice_per_pi = 2\nlattice_lo = 0\nlattice_hi = 1\n");
    CHECK(make_particles(sub).size() == 8);

    const fs::path dir = scratch_dir("particles");
    std::ofstream(dir / "p.csv") << "x,y,z,wx,wy,wz\n# comment\n0,0,0,0,0,0.1\n0,1,0,0,0,-0.1\n";
    RunConfig cu = parse("initializer = custom\nspacing = 0.5\nparticles_file = " + (dir / "p.csv").string() + "\n");
    const ParticleSet c = make_particles(cu);
    REQUIRE(c.size() == 2);
    CHECK(c.weights[1] == Vec3{0, 0, -0.1});
    CHECK(c.h == 0.5);

    std::ofstream(dir / "bad.csv") << "x,y,z\n0,0,0\n";
    CHECK_THROWS(read_particles_csv(dir / "bad.csv", 1.0));
    std::ofstream(dir / "short.csv") << "x,y,z,wx,wy,wz\n0,0,0,1\n";
    CHECK_THROWS(read_particles_csv(dir / "short.csv", 1.0));
    CHECK_THROWS(read_particles_csv(dir / "none.csv", 1.0));
    fs::remove_all(dir);
}
