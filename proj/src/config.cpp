#include "rvm/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "rvm/errors.hpp"
#include "rvm/format.hpp"

namespace rvm {

std::size_t RunConfig::resolved_steps() const {
    if (steps > 0) return steps;
    return static_cast<std::size_t>(std::max(1.0, std::round(T / 0.02)));
}

double RunConfig::resolved_delta(double h) const { return delta ? *delta : 0.5 * h; }

SolverConfig RunConfig::solver_config(double h) const {
    SolverConfig s;
    s.nu = nu;
    s.tol = tol;
    s.max_iters = max_iters;
    s.scheme = scheme;
    s.moll.delta = resolved_delta(h);
    s.self_interaction = self_interaction;
    s.threads = threads;
    return s;
}

std::string to_string(Initializer init) {
    switch (init) {
        case Initializer::LambOseen: return "lamb_oseen";
        case Initializer::TaylorGreen: return "taylor_green";
        case Initializer::Isotropic: return "isotropic";
        case Initializer::Custom: return "custom";
    }
    return "?";
}

std::string to_string(NoiseScheme scheme) {
    return scheme == NoiseScheme::Shared ? "shared" : "independent";
}

std::string to_string(SelfInteraction mode) {
    return mode == SelfInteraction::IncludeAll ? "include_all" : "exclude_self";
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_real(const ConfigEntry& e, const std::string& text) {
    double v = 0.0;
    const std::string t = trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v))
        throw ConfigError("expected a real number, got '" + text + "'", e.key, e.line);
    return v;
}

template <typename Int>
Int parse_int(const ConfigEntry& e, const std::string& text) {
    Int v = 0;
    const std::string t = trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
        throw ConfigError("expected an integer, got '" + text + "'", e.key, e.line);
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(s);
    while (std::getline(is, cell, sep)) out.push_back(trim(cell));
    return out;
}

std::vector<double> parse_reals(const ConfigEntry& e, const std::string& text, std::size_t n) {
    const auto parts = split(text, ',');
    if (parts.size() != n)
        throw ConfigError("expected " + std::to_string(n) + " comma-separated numbers", e.key, e.line);
    std::vector<double> v;
    for (const auto& p : parts) v.push_back(parse_real(e, p));
    return v;
}

Vec3 parse_vec3(const ConfigEntry& e, const std::string& text) {
    const auto v = parse_reals(e, text, 3);
    return {v[0], v[1], v[2]};
}

bool parse_bool(const ConfigEntry& e) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw ConfigError("expected true or false, got '" + e.value + "'", e.key, e.line);
}

void require(bool ok, const ConfigEntry& e, const std::string& msg) {
    if (!ok) throw ConfigError(msg, e.key, e.line);
}

std::string vec3_text(const Vec3& v) {
    return format_double(v.x) + "," + format_double(v.y) + "," + format_double(v.z);
}

std::string default_output_dir() {
    if (const char* env = std::getenv("RVM_OUTPUT_DIR"); env && *env) return env;
    return "rvm_out";
}

}  // namespace

std::vector<ConfigEntry> read_config_entries(std::istream& is) {
    std::vector<ConfigEntry> out;
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value'", trim(line), lineno);
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("empty key", "<empty>", lineno);
        out.push_back({key, trim(line.substr(eq + 1)), lineno});
    }
    return out;
}

RunConfig config_from_entries(const std::vector<ConfigEntry>& entries) {
    RunConfig c;
    c.output_dir = default_output_dir();
    bool have_initializer = false;
    std::map<std::string, int> file_lines;

    for (const auto& e : entries) {
        if (e.line > 0) {
            if (auto it = file_lines.find(e.key); it != file_lines.end())
                throw ConfigError("duplicate key (first set on line " + std::to_string(it->second) + ")",
                                  e.key, e.line);
            file_lines[e.key] = e.line;
        }
        const std::string& k = e.key;
        const std::string& v = e.value;
        if (k == "nu") {
            c.nu = parse_real(e, v);
            require(c.nu > 0.0, e, "must be > 0");
        } else if (k == "T") {
            c.T = parse_real(e, v);
            require(c.T > 0.0, e, "must be > 0");
        } else if (k == "steps") {
            const long s = parse_int<long>(e, v);
            require(s >= 1, e, "must be >= 1");
            c.steps = static_cast<std::size_t>(s);
        } else if (k == "copies") {
            const long s = parse_int<long>(e, v);
            require(s >= 1, e, "must be >= 1");
            c.copies = static_cast<std::size_t>(s);
        } else if (k == "scheme") {
            if (v == "shared") c.scheme = NoiseScheme::Shared;
            else if (v == "independent") c.scheme = NoiseScheme::Independent;
            else throw ConfigError("expected shared or independent, got '" + v + "'", k, e.line);
        } else if (k == "delta") {
            if (v == "auto") {
                c.delta.reset();
            } else {
                c.delta = parse_real(e, v);
                require(*c.delta >= 0.0, e, "must be >= 0 or 'auto'");
            }
        } else if (k == "tol") {
            c.tol = parse_real(e, v);
            require(c.tol > 0.0, e, "must be > 0");
        } else if (k == "max_iters") {
            c.max_iters = parse_int<int>(e, v);
            require(c.max_iters >= 1, e, "must be >= 1");
        } else if (k == "seed") {
            c.seed = parse_int<std::uint64_t>(e, v);
        } else if (k == "threads") {
            if (v == "auto") {
                c.threads = 0;
            } else {
                c.threads = parse_int<int>(e, v);
                require(c.threads >= 1, e, "must be >= 1 or 'auto'");
            }
        } else if (k == "initializer") {
            if (v == "lamb_oseen") c.initializer = Initializer::LambOseen;
            else if (v == "taylor_green") c.initializer = Initializer::TaylorGreen;
            else if (v == "isotropic") c.initializer = Initializer::Isotropic;
            else if (v == "custom") c.initializer = Initializer::Custom;
            else
                throw ConfigError("expected lamb_oseen, taylor_green, isotropic or custom, got '" + v + "'",
                                  k, e.line);
            have_initializer = true;
        } else if (k == "self_interaction") {
            if (v == "include_all") c.self_interaction = SelfInteraction::IncludeAll;
            else if (v == "exclude_self") c.self_interaction = SelfInteraction::ExcludeSelf;
            else throw ConfigError("expected include_all or exclude_self, got '" + v + "'", k, e.line);
        } else if (k == "output_dir") {
            require(!v.empty(), e, "must not be empty");
            c.output_dir = v;
        } else if (k == "lattice_per_pi") {
            c.lattice_per_pi = parse_int<int>(e, v);
            require(c.lattice_per_pi >= 1, e, "must be >= 1");
        } else if (k == "lattice_lo") {
            c.lattice_lo = parse_int<long>(e, v);
        } else if (k == "lattice_hi") {
            c.lattice_hi = parse_int<long>(e, v);
        } else if (k == "keep_zero_weights") {
            c.keep_zero_weights = parse_bool(e);
        } else if (k == "particles_file") {
            c.particles_file = v;
        } else if (k == "spacing") {
            c.spacing = parse_real(e, v);
            require(c.spacing > 0.0, e, "must be > 0");
        } else if (k == "field_origin") {
            c.field_origin = parse_vec3(e, v);
        } else if (k == "field_spacing") {
            c.field_spacing = parse_vec3(e, v);
            require(c.field_spacing->x > 0 && c.field_spacing->y > 0 && c.field_spacing->z > 0, e,
                    "spacings must be > 0");
        } else if (k == "field_counts") {
            const auto parts = split(v, ',');
            require(parts.size() == 3, e, "expected 3 comma-separated counts");
            std::array<long, 3> n{};
            for (int a = 0; a < 3; ++a) {
                n[a] = parse_int<long>(e, parts[a]);
                require(n[a] >= 1, e, "counts must be >= 1");
            }
            c.field_counts = n;
        } else if (k == "field_time_index") {
            c.field_time_index = static_cast<std::size_t>(parse_int<unsigned long>(e, v));
        } else if (k == "streamline_seeds") {
            c.streamline_seeds.clear();
            for (const auto& part : split(v, ';'))
                if (!part.empty()) c.streamline_seeds.push_back(parse_vec3(e, part));
        } else if (k == "streamline_step") {
            c.streamline_step = parse_real(e, v);
            require(c.streamline_step > 0.0, e, "must be > 0");
        } else if (k == "streamline_count") {
            c.streamline_count = static_cast<std::size_t>(parse_int<unsigned long>(e, v));
        } else if (k == "streamline_time_index") {
            c.streamline_time_index = static_cast<std::size_t>(parse_int<unsigned long>(e, v));
        } else if (k == "streamline_box") {
            const auto b = parse_reals(e, v, 6);
            c.streamline_box = std::array<double, 6>{b[0], b[1], b[2], b[3], b[4], b[5]};
        } else {
            throw ConfigError("unknown key", k, e.line);
        }
    }

    if (!have_initializer) throw ConfigError("missing required key", "initializer", 0);
    if (c.initializer == Initializer::Custom && c.particles_file.empty())
        throw ConfigError("missing required key for initializer = custom", "particles_file", 0);
    const std::size_t m = c.resolved_steps();
    if (c.field_time_index && *c.field_time_index > m)
        throw ConfigError("exceeds the step count", "field_time_index", file_lines["field_time_index"]);
    if (c.streamline_time_index && *c.streamline_time_index > m)
        throw ConfigError("exceeds the step count", "streamline_time_index",
                          file_lines["streamline_time_index"]);
    const bool any_field = c.field_origin || c.field_spacing || c.field_counts;
    if (any_field && !(c.field_origin && c.field_spacing && c.field_counts))
        throw ConfigError("field_origin, field_spacing and field_counts must be given together",
                          "field_counts", 0);
    return c;
}

RunConfig parse_config(std::istream& is) { return config_from_entries(read_config_entries(is)); }

RunConfig parse_config_file(const std::filesystem::path& path, const std::vector<ConfigEntry>& overrides) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string(), "config", 0);
    auto entries = read_config_entries(is);
    entries.insert(entries.end(), overrides.begin(), overrides.end());
    return config_from_entries(entries);
}

std::string serialize_config(const RunConfig& c, bool include_threads, bool include_output_dir) {
    std::ostringstream os;
    os << "initializer = " << to_string(c.initializer) << '\n';
    os << "nu = " << format_double(c.nu) << '\n';
    os << "T = " << format_double(c.T) << '\n';
    if (c.steps > 0) os << "steps = " << c.steps << '\n';
    os << "copies = " << c.copies << '\n';
    os << "scheme = " << to_string(c.scheme) << '\n';
    os << "delta = " << (c.delta ? format_double(*c.delta) : std::string("auto")) << '\n';
    os << "tol = " << format_double(c.tol) << '\n';
    os << "max_iters = " << c.max_iters << '\n';
    os << "seed = " << c.seed << '\n';
    if (include_threads) os << "threads = " << (c.threads == 0 ? std::string("auto") : std::to_string(c.threads)) << '\n';
    os << "self_interaction = " << to_string(c.self_interaction) << '\n';
    if (include_output_dir) os << "output_dir = " << c.output_dir << '\n';
    os << "lattice_per_pi = " << c.lattice_per_pi << '\n';
    if (c.lattice_lo) os << "lattice_lo = " << *c.lattice_lo << '\n';
    if (c.lattice_hi) os << "lattice_hi = " << *c.lattice_hi << '\n';
    os << "keep_zero_weights = " << (c.keep_zero_weights ? "true" : "false") << '\n';
    if (!c.particles_file.empty()) os << "particles_file = " << c.particles_file << '\n';
    os << "spacing = " << format_double(c.spacing) << '\n';
    if (c.field_origin) os << "field_origin = " << vec3_text(*c.field_origin) << '\n';
    if (c.field_spacing) os << "field_spacing = " << vec3_text(*c.field_spacing) << '\n';
    if (c.field_counts)
        os << "field_counts = " << (*c.field_counts)[0] << ',' << (*c.field_counts)[1] << ','
           << (*c.field_counts)[2] << '\n';
    if (c.field_time_index) os << "field_time_index = " << *c.field_time_index << '\n';
    if (!c.streamline_seeds.empty()) {
        os << "streamline_seeds = ";
        for (std::size_t i = 0; i < c.streamline_seeds.size(); ++i)
            os << (i ? "; " : "") << vec3_text(c.streamline_seeds[i]);
        os << '\n';
    }
    os << "streamline_step = " << format_double(c.streamline_step) << '\n';
    os << "streamline_count = " << c.streamline_count << '\n';
    if (c.streamline_time_index) os << "streamline_time_index = " << *c.streamline_time_index << '\n';
    if (c.streamline_box) {
        os << "streamline_box = ";
        for (int i = 0; i < 6; ++i) os << (i ? "," : "") << format_double((*c.streamline_box)[i]);
        os << '\n';
    }
    return os.str();
}

ParticleSet read_particles_csv(const std::filesystem::path& path, double spacing) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open particles file " + path.string());
    std::string line;
    std::vector<Vec3> pos, w;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!header_seen) {
            if (t != "x,y,z,wx,wy,wz")
                throw IoError(path.string() + ":" + std::to_string(lineno) +
                              ": expected header x,y,z,wx,wy,wz");
            header_seen = true;
            continue;
        }
        const auto parts = split(t, ',');
        if (parts.size() != 6)
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 6 columns");
        double v[6];
        for (int i = 0; i < 6; ++i) {
            const auto [ptr, ec] = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), v[i]);
            if (ec != std::errc{} || ptr != parts[i].data() + parts[i].size())
                throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + parts[i] + "'");
        }
        pos.push_back({v[0], v[1], v[2]});
        w.push_back({v[3], v[4], v[5]});
    }
    if (pos.empty()) throw IoError(path.string() + ": no particles");
    return particles_from_raw(std::move(pos), std::move(w), spacing);
}

ParticleSet make_particles(const RunConfig& c) {
    switch (c.initializer) {
        case Initializer::LambOseen: return lamb_oseen_particles();
        case Initializer::TaylorGreen:
        case Initializer::Isotropic: {
            LatticeBox box = periodic_box_lattice(c.lattice_per_pi);
            const long lo = c.lattice_lo.value_or(-c.lattice_per_pi);
            const long hi = c.lattice_hi.value_or(3L * c.lattice_per_pi);
            box.lo = {lo, lo, lo};
            box.hi = {hi, hi, hi};
            const auto field = c.initializer == Initializer::TaylorGreen
                                   ? VectorField([](const Vec3& x) { return taylor_green_initial(x).vorticity; })
                                   : VectorField([](const Vec3& x) { return isotropic_initial(x).vorticity; });
            return build_particles(box, field, c.keep_zero_weights);
        }
        case Initializer::Custom: return read_particles_csv(c.particles_file, c.spacing);
    }
    throw ContractViolation("make_particles: unknown initializer");
}

}  // namespace rvm
