#include "rvm/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "rvm/config.hpp"
#include "rvm/errors.hpp"
#include "rvm/format.hpp"
#include "rvm/io.hpp"
#include "rvm/validation.hpp"

#ifndef RVM_DATA_DIR
#define RVM_DATA_DIR "data"
#endif

namespace fs = std::filesystem;

namespace rvm {
namespace {

// ---------------------------------------------------------------------------------------------
// Flag plumbing

/// A subcommand parameter that is not part of RunConfig. Its final value is recorded in the
/// manifest so that --from-manifest can restore it.
struct Extra {
    std::string key;
    std::string value;
    CLI::Option* opt = nullptr;
};

struct Sub {
    CLI::App* app = nullptr;
    bool uses_config = true;
    std::vector<Extra> extras;

    std::string config_path;
    std::vector<std::string> sets;
    std::string from_manifest;
    std::map<std::string, std::string> flag_values;  ///< config key -> value from dedicated flags
    std::map<std::string, CLI::Option*> flag_opts;
    std::vector<std::pair<std::string, std::string>> defaults;  ///< config defaults for this command
    std::function<void(Sub&)> adjust_defaults;                   ///< may inspect resolved extras

    const std::string& get(const std::string& key) const {
        for (const auto& e : extras)
            if (e.key == key) return e.value;
        throw ContractViolation("unknown extra " + key);
    }
};

void bind_extras(Sub& s, const std::vector<std::tuple<std::string, std::string, std::string>>& defs) {
    s.extras.reserve(defs.size());
    for (const auto& [key, def, help] : defs) s.extras.push_back({key, def, nullptr});
    for (std::size_t i = 0; i < defs.size(); ++i) {
        std::string flag = "--" + std::get<0>(defs[i]);
        std::replace(flag.begin(), flag.end(), '_', '-');
        s.extras[i].opt = s.app->add_option(flag, s.extras[i].value, std::get<2>(defs[i]))->capture_default_str();
    }
}

void bind_config_flag(Sub& s, const std::string& flag, const std::string& key, const std::string& help) {
    s.flag_opts[key] = s.app->add_option(flag, s.flag_values[key], help);
}

void bind_common(Sub& s) {
    s.app->add_option("--from-manifest", s.from_manifest,
                      "Re-run with the configuration and parameters recorded in a manifest");
    bind_config_flag(s, "--threads", "threads", "Worker threads or 'auto' (results do not depend on it)");
    bind_config_flag(s, "--output-dir", "output_dir", "Output directory (default $RVM_OUTPUT_DIR or rvm_out)");
    if (!s.uses_config) return;
    s.app->add_option("--config", s.config_path, "Config file of 'key = value' lines");
    s.app->add_option("--set", s.sets, "Override a config key: --set key=value (repeatable)");
    bind_config_flag(s, "--copies", "copies", "Number of independent copies N");
    bind_config_flag(s, "--seed", "seed", "64-bit seed");
    bind_config_flag(s, "--scheme", "scheme", "shared or independent");
    bind_config_flag(s, "--steps", "steps", "Number of time steps m");
    bind_config_flag(s, "--delta", "delta", "Mollifier width or 'auto'");
}

double to_real(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw ConfigError("expected a real number, got '" + text + "'", key);
    return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw ConfigError("expected a non-negative integer, got '" + text + "'", key);
    return v;
}

std::vector<double> to_reals(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::string cell;
    std::istringstream is(text);
    while (std::getline(is, cell, ',')) {
        const auto b = cell.find_first_not_of(' ');
        const auto e = cell.find_last_not_of(' ');
        out.push_back(to_real(key, b == std::string::npos ? "" : cell.substr(b, e - b + 1)));
    }
    return out;
}

Vec3 to_vec3(const std::string& key, const std::string& text) {
    const auto v = to_reals(key, text);
    if (v.size() != 3) throw ConfigError("expected x,y,z", key);
    return {v[0], v[1], v[2]};
}

bool to_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("expected true or false, got '" + text + "'", key);
}

// ---------------------------------------------------------------------------------------------
// Run context

struct Run {
    std::string command;
    RunConfig cfg;
    fs::path out_dir;
    int threads = 0;
    std::ostream& out;
    std::ostream& err;
    RunManifest manifest;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    Run(std::ostream& o, std::ostream& e) : out(o), err(e) {}

    fs::path path(const std::string& name) {
        outputs.push_back(name);
        return out_dir / name;
    }

    void write(const std::string& name, const std::string& text) { write_text_file(path(name), text); }

    void finish() {
        manifest.version = software_version();
        manifest.command = command;
        std::sort(outputs.begin(), outputs.end());
        outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());
        for (const auto& name : outputs) manifest.checksums[name] = sha256_file(out_dir / name);
        write_manifest(out_dir, manifest);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_timing(out_dir, wall, resolve_threads(threads));
        err << "wrote " << (out_dir / "manifest.json").string() << '\n';
    }

    void record_solution(const Solution& sol) {
        manifest.iterations_used = sol.iterations_used;
        manifest.final_update_norm = sol.final_update_norm;
        manifest.converged = sol.converged;
        manifest.norm_history = sol.norm_history;
    }
};

std::vector<ConfigEntry> parse_sets(const std::vector<std::string>& sets) {
    std::vector<ConfigEntry> out;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + s + "'", "--set");
        out.push_back({s.substr(0, eq), s.substr(eq + 1), 0});
    }
    return out;
}

/// Resolves the run: subcommand defaults, then the config file (or manifest), then --set, then
/// dedicated flags. Extras come from flags, falling back to the manifest, then to defaults.
void resolve(Sub& s, Run& run) {
    std::optional<RunManifest> from;
    if (!s.from_manifest.empty()) {
        from = read_manifest(s.from_manifest);
        if (from->command != run.command)
            throw ConfigError("manifest was written by '" + from->command + "'", "--from-manifest");
        if (!s.config_path.empty())
            throw ConfigError("--config and --from-manifest are mutually exclusive", "--from-manifest");
    }
    for (auto& e : s.extras) {
        if (from && e.opt->count() == 0) {
            if (auto it = from->extra.find(e.key); it != from->extra.end()) e.value = it->second;
        }
        run.manifest.extra[e.key] = e.value;
    }
    if (s.adjust_defaults) s.adjust_defaults(s);

    std::vector<ConfigEntry> entries;
    for (const auto& [k, v] : s.defaults) entries.push_back({k, v, 0});
    if (s.uses_config) {
        if (from) {
            std::istringstream is(from->config);
            auto file = read_config_entries(is);
            entries.insert(entries.end(), file.begin(), file.end());
        } else if (!s.config_path.empty()) {
            std::ifstream is(s.config_path);
            if (!is) throw ConfigError("cannot open config file " + s.config_path, "--config");
            auto file = read_config_entries(is);
            entries.insert(entries.end(), file.begin(), file.end());
        }
        const auto sets = parse_sets(s.sets);
        entries.insert(entries.end(), sets.begin(), sets.end());
    } else if (entries.empty() || std::none_of(entries.begin(), entries.end(),
                                               [](const ConfigEntry& e) { return e.key == "initializer"; })) {
        entries.push_back({"initializer", "lamb_oseen", 0});
    }
    for (const auto& [key, opt] : s.flag_opts)
        if (opt->count() > 0) entries.push_back({key, s.flag_values[key], 0});

    run.cfg = config_from_entries(entries);
    run.threads = run.cfg.threads;
    run.out_dir = run.cfg.output_dir;
    if (run.cfg.initializer == Initializer::Custom && from == std::nullopt && !s.config_path.empty()) {
        const fs::path pf = run.cfg.particles_file;
        if (pf.is_relative() && !fs::exists(pf))
            run.cfg.particles_file = (fs::path(s.config_path).parent_path() / pf).string();
    }
    if (s.uses_config) run.manifest.config = serialize_config(run.cfg, false, false);
    std::error_code ec;
    fs::create_directories(run.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + run.out_dir.string() + ": " + ec.message());
}

SolverConfig solver_for(Run& run, const ParticleSet& particles) {
    SolverConfig s = run.cfg.solver_config(particles.h);
    std::ostream* err = &run.err;
    s.on_iteration = [err](const IterationLog& log) { *err << format_log_line(log) << '\n'; };
    return s;
}

Solution run_solver(Run& run, const ParticleSet& particles, const SolverConfig& scfg) {
    run.err << "solving: " << particles.size() << " particles x " << run.cfg.copies << " copies, "
            << run.cfg.resolved_steps() << " steps, delta " << format_double(scfg.moll.delta) << '\n';
    Solution sol = solve(particles, run.cfg.grid(), run.cfg.copies, scfg, run.cfg.seed);
    run.record_solution(sol);
    if (!sol.converged)
        run.err << "warning: Picard iteration did not converge after " << sol.iterations_used
                << " iterations (update_norm " << format_double(sol.final_update_norm) << ")\n";
    return sol;
}

std::optional<LatticeSpec> field_lattice(const RunConfig& c) {
    if (!c.field_counts) return std::nullopt;
    LatticeSpec l;
    l.origin = *c.field_origin;
    l.spacing = {c.field_spacing->x, c.field_spacing->y, c.field_spacing->z};
    l.lo = {0, 0, 0};
    l.hi = {(*c.field_counts)[0] - 1, (*c.field_counts)[1] - 1, (*c.field_counts)[2] - 1};
    l.r = c.field_time_index.value_or(c.resolved_steps());
    return l;
}

std::string csv_of(const std::function<void(std::ostream&)>& f) {
    std::ostringstream os;
    f(os);
    return os.str();
}

RunMetadata metadata(const Run& run, const SolverConfig& scfg) {
    RunMetadata m;
    m.seed = run.cfg.seed;
    m.copies = run.cfg.copies;
    m.dt = run.cfg.grid().dt();
    m.delta = scfg.moll.delta;
    m.scheme = to_string(run.cfg.scheme);
    return m;
}

std::string vec_text(const Vec3& v) { return format_double(v.x) + "," + format_double(v.y) + "," + format_double(v.z); }

// ---------------------------------------------------------------------------------------------
// Subcommands

int cmd_simulate(Sub& s, Run& run) {
    const ParticleSet particles = make_particles(run.cfg);
    const SolverConfig scfg = solver_for(run, particles);
    const Solution sol = run_solver(run, particles, scfg);
    if (to_bool("write_trajectories", s.get("write_trajectories"))) {
        run.write("trajectories.csv", csv_of([&](std::ostream& os) { write_trajectories_csv(os, sol.trajectories); }));
        run.write("gauges.csv", csv_of([&](std::ostream& os) { write_gauges_csv(os, sol.gauges); }));
    }
    write_checkpoint(run.path("checkpoint.bin"), sol.trajectories, sol.gauges);
    if (const auto lattice = field_lattice(run.cfg)) export_field(sol, particles, scfg, *lattice, run.path("field.csv"));
    run.finish();
    run.out << "iterations_used " << sol.iterations_used << "\nfinal_update_norm "
            << format_double(sol.final_update_norm) << "\nconverged " << (sol.converged ? "true" : "false") << '\n';
    return sol.converged ? kExitOk : kExitNumerical;
}

int cmd_streamlines(Sub&, Run& run) {
    if (run.cfg.streamline_seeds.empty()) throw ConfigError("no seeds given", "streamline_seeds");
    const ParticleSet particles = make_particles(run.cfg);
    const SolverConfig scfg = solver_for(run, particles);
    const Solution sol = run_solver(run, particles, scfg);
    BoundingBox box;
    if (run.cfg.streamline_box) {
        const auto& b = *run.cfg.streamline_box;
        box.lo = {b[0], b[1], b[2]};
        box.hi = {b[3], b[4], b[5]};
    }
    const std::size_t r = run.cfg.streamline_time_index.value_or(sol.grid.m);
    const auto lines = trace_streamlines(sol, particles, scfg, run.cfg.streamline_seeds, r,
                                         run.cfg.streamline_step, run.cfg.streamline_count, box);
    run.write("streamlines.csv", csv_of([&](std::ostream& os) { write_streamlines_csv(os, lines); }));
    if (const auto lattice = field_lattice(run.cfg)) export_field(sol, particles, scfg, *lattice, run.path("field.csv"));
    run.finish();
    run.out << "streamlines " << lines.size() << " at t=" << format_double(sol.grid.t(r)) << '\n';
    return sol.converged ? kExitOk : kExitNumerical;
}

int cmd_validate_lamb_oseen(Sub& s, Run& run) {
    if (run.cfg.initializer != Initializer::LambOseen)
        throw ConfigError("validate-lamb-oseen requires initializer = lamb_oseen", "initializer");
    const double threshold = to_real("threshold", s.get("threshold"));
    std::ifstream ref_in(s.get("reference"));
    if (!ref_in) throw IoError("cannot open reference table " + s.get("reference"));
    const ReferenceTable ref = read_reference_table(ref_in, 0.0);

    const ParticleSet particles = make_particles(run.cfg);
    const SolverConfig scfg = solver_for(run, particles);
    const Solution sol = run_solver(run, particles, scfg);
    const std::size_t r = sol.grid.m;
    const double t = sol.grid.T;

    std::vector<Vec3> exact;
    for (const auto& p : ref.points) exact.push_back(lamb_oseen_exact(p, t, run.cfg.nu));
    ComparisonReport table = table_compare(sol, particles, scfg, ref.points, exact, r, 1.0);
    table.meta = metadata(run, scfg);
    run.write("table_comparison.csv", csv_of([&](std::ostream& os) { write_report_csv(os, table); }));
    const std::string table_text = csv_of([&](std::ostream& os) { write_report_table(os, table); });
    run.write("table_comparison.txt", table_text);

    const LatticeSpec lattice = lamb_oseen_error_lattice(r);
    const auto points = lattice.points();
    std::vector<Vec3> lattice_exact;
    for (const auto& p : points) lattice_exact.push_back(lamb_oseen_exact(p, t, run.cfg.nu));
    const auto approx = probe_velocity(sol, particles, scfg, points, r);
    ComparisonReport l1 = make_report(points, lattice_exact, approx, lattice.cell_volume());
    l1.meta = table.meta;
    run.write("l1_lattice.csv", csv_of([&](std::ostream& os) { write_report_csv(os, l1); }));
    run.finish();

    run.out << table_text << "L1 error " << format_double(l1.l1_error) << " (threshold "
            << format_double(threshold) << ")\n";
    if (!sol.converged) return kExitNumerical;
    return l1.l1_error <= threshold ? kExitOk : kExitThreshold;
}

int cmd_validate_taylor_green(Sub& s, Run& run) {
    if (run.cfg.initializer != Initializer::TaylorGreen)
        throw ConfigError("validate-taylor-green requires initializer = taylor_green", "initializer");
    const bool full = to_bool("full", s.get("full"));
    const ParticleSet particles = make_particles(run.cfg);
    const SolverConfig scfg = solver_for(run, particles);

    if (full) {
        const double tol = to_real("point_tol", s.get("point_tol"));
        std::ifstream ref_in(s.get("reference"));
        if (!ref_in) throw IoError("cannot open reference table " + s.get("reference"));
        const ReferenceTable ref = read_reference_table(ref_in, to_real("plane_z", s.get("plane_z")));
        const Solution sol = run_solver(run, particles, scfg);
        ComparisonReport table = table_compare(sol, particles, scfg, ref.points, ref.exact, sol.grid.m, 1.0);
        table.meta = metadata(run, scfg);
        run.write("table_comparison.csv", csv_of([&](std::ostream& os) { write_report_csv(os, table); }));
        const std::string text = csv_of([&](std::ostream& os) { write_report_table(os, table); });
        run.write("table_comparison.txt", text);
        run.finish();
        std::size_t bad = 0;
        for (const auto& row : table.rows)
            if (row.abs_diff.x > tol || row.abs_diff.y > tol) ++bad;
        run.out << text << bad << " of " << table.rows.size() << " points exceed " << format_double(tol) << '\n';
        if (!sol.converged) return kExitNumerical;
        return bad == 0 ? kExitOk : kExitThreshold;
    }

    bool ok = true;
    std::vector<int> per_pi;
    for (double v : to_reals("refine", s.get("refine"))) per_pi.push_back(static_cast<int>(v));
    const LatticeSpec probes = taylor_green_probe_lattice(0);
    const auto probe_points = probes.points();
    const RefinementStudy study = taylor_green_refinement(per_pi, probe_points, run.threads);
    std::string csv = "per_pi,particles,rel_l2\n";
    for (std::size_t i = 0; i < study.per_pi.size(); ++i)
        csv += std::to_string(study.per_pi[i]) + "," + std::to_string(study.particles[i]) + "," +
               format_double(study.rel_l2[i]) + "\n";
    run.write("refinement.csv", csv);
    for (std::size_t i = 0; i < study.per_pi.size(); ++i)
        run.out << "t=0 h=pi/" << study.per_pi[i] << " rel_l2 " << format_double(study.rel_l2[i]) << '\n';
    run.out << "refinement strictly decreasing: " << (study.strictly_decreasing ? "yes" : "no") << '\n';
    ok = ok && study.strictly_decreasing;

    const Solution sol = run_solver(run, particles, scfg);
    LatticeSpec final_probes = taylor_green_probe_lattice(sol.grid.m);
    export_field(sol, particles, scfg, final_probes, run.path("field.csv"));
    const auto level = std::make_shared<SourceLevel>(sol.trajectories, sol.gauges, particles, sol.grid.m);
    const double delta2 = scfg.moll.delta * scfg.moll.delta;
    const VectorField field = [level, delta2](const Vec3& x) { return level->velocity(x, std::nullopt, delta2); };
    const double div = max_divergence(field, probe_points);
    const double div_tol = to_real("div_tol", s.get("div_tol"));
    bool finite = true;
    for (const auto& v : probe_velocity(sol, particles, scfg, probe_points, sol.grid.m)) finite = finite && is_finite(v);
    run.finish();
    run.out << "coarse solve: " << particles.size() << " particles, iterations " << sol.iterations_used
            << ", converged " << (sol.converged ? "yes" : "no") << ", finite " << (finite ? "yes" : "no")
            << ", max |div u| " << format_double(div) << " (tol " << format_double(div_tol) << ")\n";
    if (!sol.converged) return kExitNumerical;
    ok = ok && finite && std::abs(div) <= div_tol;
    return ok ? kExitOk : kExitThreshold;
}

Mat3 to_mat3(const std::string& key, const std::string& text) {
    const auto v = to_reals(key, text);
    if (v.size() != 9) throw ConfigError("expected 9 comma-separated entries (row-major)", key);
    Mat3 m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = v[i];
    return m;
}

int cmd_check_fk(Sub& s, Run& run) {
    FkConfig fk;
    fk.nu = to_real("nu", s.get("nu"));
    fk.T = to_real("T", s.get("T"));
    fk.dt = to_real("dt", s.get("dt"));
    fk.strain = to_mat3("strain", s.get("strain"));
    fk.f0.amplitude = to_vec3("amplitude", s.get("amplitude"));
    fk.f0.wavevector = to_vec3("wavevector", s.get("wavevector"));
    fk.x = to_vec3("x", s.get("x"));
    fk.samples = to_uint("samples", s.get("samples"));
    fk.seed = to_uint("seed", s.get("seed"));
    fk.threads = run.threads;
    if (fk.samples < 1000) throw ConfigError("must be >= 1000", "samples");
    const double tol = to_real("tol", s.get("tol"));

    const FkResult res = fk_oracle_check(fk);
    std::string csv = "quantity,x,y,z\n";
    csv += "monte_carlo," + vec_text(res.monte_carlo) + "\noracle," + vec_text(res.oracle) + "\n";
    csv += "rel_error," + format_double(res.rel_error) + ",,\n";
    bool ok = res.rel_error <= tol;
    run.out << "monte carlo " << vec_text(res.monte_carlo) << "\noracle      " << vec_text(res.oracle)
            << "\nrel_error " << format_double(res.rel_error) << " (tol " << format_double(tol) << ")\n";

    const std::size_t reps = to_uint("rate_reps", s.get("rate_reps"));
    if (reps > 0) {
        std::vector<std::size_t> counts;
        for (double c : to_reals("rate_samples", s.get("rate_samples"))) counts.push_back(static_cast<std::size_t>(c));
        FkConfig base = fk;
        base.dt = to_real("rate_dt", s.get("rate_dt"));
        const FkRateResult rate = fk_rate_study(base, counts, reps);
        const double lo = to_real("slope_min", s.get("slope_min"));
        const double hi = to_real("slope_max", s.get("slope_max"));
        for (std::size_t i = 0; i < rate.samples.size(); ++i) {
            csv += "rms_rel_error_" + std::to_string(rate.samples[i]) + "," + format_double(rate.rms_rel_error[i]) + ",,\n";
            run.out << "samples " << rate.samples[i] << " rms rel_error " << format_double(rate.rms_rel_error[i]) << '\n';
        }
        csv += "slope," + format_double(rate.slope) + ",,\n";
        run.out << "log-log slope " << format_double(rate.slope) << " (band [" << format_double(lo) << ", "
                << format_double(hi) << "])\n";
        ok = ok && rate.slope >= lo && rate.slope <= hi;
    }
    run.write("fk_check.csv", csv);
    run.finish();
    return ok ? kExitOk : kExitThreshold;
}

int cmd_check_duality(Sub& s, Run& run) {
    DualityConfig d;
    d.drift = to_vec3("drift", s.get("drift"));
    d.xi = to_vec3("xi", s.get("xi"));
    d.eta = to_vec3("eta", s.get("eta"));
    d.nu = to_real("nu", s.get("nu"));
    d.T = to_real("T", s.get("T"));
    d.samples = to_uint("samples", s.get("samples"));
    d.bin_width = to_real("bin", s.get("bin"));
    d.threads = run.threads;
    if (d.samples < 10000) throw ConfigError("must be >= 10000", "samples");
    const std::uint64_t seed = to_uint("seed", s.get("seed"));
    const std::size_t reps = to_uint("reps", s.get("reps"));
    const std::size_t min_pass = to_uint("min_pass", s.get("min_pass"));
    const double k = to_real("k", s.get("k"));

    std::string csv = "rep,lhs_x,lhs_y,lhs_z,rhs_x,rhs_y,rhs_z,std_err,lhs_count,rhs_count,pass\n";
    std::size_t passed = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        d.seed = seed + rep;
        const DualityResult res = duality_check(d);
        const bool pass = res.agrees(k);
        passed += pass ? 1 : 0;
        csv += std::to_string(rep) + "," + vec_text(res.lhs) + "," + vec_text(res.rhs) + "," +
               format_double(res.std_err) + "," + std::to_string(res.lhs_count) + "," +
               std::to_string(res.rhs_count) + "," + (pass ? "1" : "0") + "\n";
    }
    run.write("duality.csv", csv);
    run.finish();
    run.out << passed << " of " << reps << " repetitions agree within " << format_double(k)
            << " standard errors (need " << min_pass << ")\n";
    return passed >= min_pass ? kExitOk : kExitThreshold;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Random vortex particle solver and validation tools", "rvm"};
    app.require_subcommand(1);
    app.set_version_flag("--version", software_version());

    const std::string data_dir = RVM_DATA_DIR;
    std::map<std::string, std::unique_ptr<Sub>> subs;
    std::map<std::string, std::function<int(Sub&, Run&)>> handlers;
    auto add = [&](const std::string& name, const std::string& desc, bool uses_config,
                   std::function<int(Sub&, Run&)> handler) -> Sub& {
        auto s = std::make_unique<Sub>();
        s->app = app.add_subcommand(name, desc);
        s->uses_config = uses_config;
        Sub& ref = *s;
        subs[name] = std::move(s);
        handlers[name] = std::move(handler);
        return ref;
    };

    {
        Sub& s = add("simulate", "Solve the particle system and write trajectories, gauges and fields", true,
                     cmd_simulate);
        bind_common(s);
        bind_extras(s, {{"write_trajectories", "true", "Write trajectories.csv and gauges.csv"}});
    }
    {
        Sub& s = add("streamlines", "Solve and trace streamlines of the reconstructed velocity", true,
                     cmd_streamlines);
        bind_common(s);
    }
    {
        Sub& s = add("validate-lamb-oseen", "Lamb-Oseen comparison table and lattice L1 error", true,
                     cmd_validate_lamb_oseen);
        s.defaults = {{"initializer", "lamb_oseen"}, {"copies", "100"}, {"delta", "0.1"}};
        bind_common(s);
        bind_extras(s, {{"threshold", "0.3", "Pass if the lattice L1 error is at most this"},
                        {"reference", data_dir + "/table1_lamb_oseen.csv", "Reference table CSV"}});
    }
    {
        Sub& s = add("validate-taylor-green", "Taylor-Green property checks, or the full table run with --full",
                     true, cmd_validate_taylor_green);
        bind_common(s);
        bind_extras(s, {{"full", "false", "Run the full-resolution table comparison (very long)"},
                        {"refine", "8,16", "Lattice resolutions pi/n for the t=0 refinement check"},
                        {"div_tol", "1e-8", "Largest allowed |div u| on the probes"},
                        {"point_tol", "0.05", "Per-point tolerance for --full"},
                        {"plane_z", "0.1", "Plane of the reference table"},
                        {"reference", data_dir + "/table2_taylor_green.csv", "Reference table CSV for --full"}});
    }
    {
        Sub& s = add("check-fk", "Monte Carlo check of the Feynman-Kac formula with constant strain", false,
                     cmd_check_fk);
        bind_common(s);
        bind_extras(s, {{"nu", "0.5", "Viscosity"},
                        {"T", "1", "Final time"},
                        {"dt", "0.001", "Gauge and path step"},
                        {"strain", "0.3,0.1,0,0.1,-0.2,0.05,0,0.05,-0.1", "Constant S, row-major"},
                        {"amplitude", "1,0.5,-0.25", "Initial data amplitude"},
                        {"wavevector", "1,0,0", "Initial data wavevector (0 = constant)"},
                        {"x", "0.2,-0.1,0.3", "Evaluation point"},
                        {"samples", "100000", "Paths"},
                        {"seed", "0", "Seed"},
                        {"tol", "0.05", "Relative error tolerance"},
                        {"rate_samples", "1000,10000,100000", "Sample counts for the rate study"},
                        {"rate_reps", "20", "Repetitions per count (0 skips the rate study)"},
                        {"rate_dt", "0.02", "Path step for the rate study"},
                        {"slope_min", "-0.6", "Lower end of the slope band"},
                        {"slope_max", "-0.4", "Upper end of the slope band"}});
    }
    {
        Sub& s = add("check-duality", "Forward/backward bridge midpoint comparison with constant drift", false,
                     cmd_check_duality);
        bind_common(s);
        bind_extras(s, {{"drift", "1,0.5,-0.2", "Constant drift b"},
                        {"xi", "0,0,0", "Start point"},
                        {"eta", "0.3,0,0", "End point"},
                        {"nu", "0.5", "Viscosity"},
                        {"T", "1", "Final time"},
                        {"samples", "100000", "Paths per side and repetition"},
                        {"bin", "0.2", "Terminal bin width per axis"},
                        {"reps", "100", "Repetitions"},
                        {"min_pass", "95", "Repetitions that must agree"},
                        {"k", "3", "Agreement band in standard errors"},
                        {"seed", "0", "Seed of the first repetition"}});
    }
    {
        Sub& s = *subs["validate-taylor-green"];
        s.defaults = {{"initializer", "taylor_green"}, {"nu", "0.000625"}, {"T", "0.2"}, {"steps", "10"},
                      {"lattice_per_pi", "4"}};
        s.adjust_defaults = [](Sub& self) {
            // Full-resolution run; the config file and flags still win.
            if (to_bool("full", self.get("full")))
                self.defaults = {{"initializer", "taylor_green"}, {"nu", "0.000625"}, {"T", "1"},
                                 {"steps", "50"}, {"lattice_per_pi", "16"}};
        };
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << software_version() << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    for (auto& [name, sub] : subs) {
        if (!sub->app->parsed()) continue;
        Run run(out, err);
        run.command = name;
        try {
            resolve(*sub, run);
            return handlers[name](*sub, run);
        } catch (const ConfigError& e) {
            err << "config error: " << e.what() << '\n';
            return kExitUsage;
        } catch (const BlowUpError& e) {
            err << "numerical blow-up: " << e.what() << '\n';
            return kExitNumerical;
        } catch (const SingularityError& e) {
            err << "singularity: " << e.what() << '\n';
            return kExitNumerical;
        } catch (const DomainError& e) {
            err << "domain error: " << e.what() << '\n';
            return kExitNumerical;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << '\n';
            return kExitUsage;
        }
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace rvm
