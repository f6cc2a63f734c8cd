#include "rvm/validation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "rvm/errors.hpp"
#include "rvm/format.hpp"
#include "rvm/rng.hpp"

namespace rvm {

std::size_t LatticeSpec::count() const {
    std::size_t c = 1;
    for (int a = 0; a < 3; ++a) {
        if (hi[a] < lo[a]) return 0;
        c *= static_cast<std::size_t>(hi[a] - lo[a] + 1);
    }
    return c;
}

std::vector<Vec3> LatticeSpec::points() const {
    std::vector<Vec3> pts;
    pts.reserve(count());
    for (long i = lo[0]; i <= hi[0]; ++i)
        for (long j = lo[1]; j <= hi[1]; ++j)
            for (long k = lo[2]; k <= hi[2]; ++k)
                pts.push_back({origin.x + spacing[0] * static_cast<double>(i),
                               origin.y + spacing[1] * static_cast<double>(j),
                               origin.z + spacing[2] * static_cast<double>(k)});
    return pts;
}

LatticeSpec lamb_oseen_error_lattice(std::size_t r) {
    LatticeSpec l;
    l.spacing = {0.1, 0.1, 0.1};
    l.lo = {-10, -10, -10};
    l.hi = {9, 9, 9};
    l.r = r;
    return l;
}

double ComparisonReport::recompute_l1() const {
    double sum = 0.0;
    for (const auto& row : rows) sum += norm1(row.abs_diff);
    return sum * cell_volume;
}

double l1_error(std::span<const Vec3> approx, std::span<const Vec3> exact, double cell_volume) {
    if (approx.size() != exact.size()) throw ContractViolation("l1_error: size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < approx.size(); ++i) sum += norm1(approx[i] - exact[i]);
    return sum * cell_volume;
}

double l1_error(const VectorField& approx, const VectorField& exact, const LatticeSpec& lattice) {
    if (lattice.count() == 0) throw ContractViolation("l1_error: empty lattice");
    const auto pts = lattice.points();
    std::vector<Vec3> a(pts.size()), e(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        a[i] = approx(pts[i]);
        e[i] = exact(pts[i]);
    }
    return l1_error(a, e, lattice.cell_volume());
}

ComparisonReport make_report(std::span<const Vec3> points, std::span<const Vec3> exact,
                             std::span<const Vec3> approx, double cell_volume) {
    if (points.size() != exact.size() || points.size() != approx.size())
        throw ContractViolation("make_report: points, exact and approx differ in length");
    ComparisonReport report;
    report.cell_volume = cell_volume;
    report.rows.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3 d = approx[i] - exact[i];
        report.rows.push_back({points[i], exact[i], approx[i], {std::abs(d.x), std::abs(d.y), std::abs(d.z)}});
    }
    report.l1_error = report.recompute_l1();
    return report;
}

ComparisonReport table_compare(const Solution& sol, const ParticleSet& particles,
                               const SolverConfig& cfg, std::span<const Vec3> points,
                               std::span<const Vec3> exact, std::size_t r, double cell_volume) {
    const auto samples = reconstruct_velocity_batch(points, r, sol, particles, cfg);
    std::vector<Vec3> approx(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) approx[i] = samples[i].velocity;
    ComparisonReport report = make_report(points, exact, approx, cell_volume);
    report.meta.copies = sol.trajectories.copies();
    report.meta.dt = sol.grid.dt();
    report.meta.delta = cfg.moll.delta;
    report.meta.scheme = cfg.scheme == NoiseScheme::Shared ? "shared" : "independent";
    return report;
}

void write_report_csv(std::ostream& os, const ComparisonReport& report) {
    os << "# seed=" << report.meta.seed << " copies=" << report.meta.copies
       << " dt=" << format_double(report.meta.dt) << " delta=" << format_double(report.meta.delta)
       << " scheme=" << report.meta.scheme << '\n';
    os << "# cell_volume=" << format_double(report.cell_volume)
       << " l1_error=" << format_double(report.l1_error) << '\n';
    os << "x,y,z,exact_u,exact_v,exact_w,approx_u,approx_v,approx_w,diff_u,diff_v,diff_w\n";
    std::string line;
    for (const auto& row : report.rows) {
        line.clear();
        for (const Vec3* v : {&row.position, &row.exact, &row.approx, &row.abs_diff})
            for (int a = 0; a < 3; ++a) {
                if (!line.empty()) line += ',';
                append_double(line, (*v)[a]);
            }
        os << line << '\n';
    }
}

void write_report_table(std::ostream& os, const ComparisonReport& report) {
    auto pair = [](double a, double b) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << '(' << std::setw(5) << a << ", " << std::setw(5)
          << b << ')';
        return s.str();
    };
    os << std::left << std::setw(18) << "Point" << std::setw(18) << "Exact" << std::setw(18)
       << "Approx" << "|w|\n";
    for (const auto& row : report.rows) {
        os << std::left << std::setw(18) << pair(row.position.x, row.position.y) << std::setw(18)
           << pair(row.exact.x, row.exact.y) << std::setw(18) << pair(row.approx.x, row.approx.y)
           << std::scientific << std::setprecision(1) << std::abs(row.approx.z) << std::defaultfloat
           << '\n';
    }
    os << "Row L1 sum (cell volume " << report.cell_volume << ") = " << std::fixed << std::setprecision(4)
       << report.l1_error << std::defaultfloat << '\n';
}

const std::vector<Vec3>& ReferenceTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < column_names.size(); ++i)
        if (column_names[i] == name) return columns[i];
    throw ContractViolation("reference table has no column '" + name + "'");
}

namespace {
std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    return out;
}
}  // namespace

ReferenceTable read_reference_table(std::istream& is, double z) {
    ReferenceTable table;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# provenance:", 0) != 0)
        throw IoError("reference table: first line must be '# provenance: ...'");
    table.provenance = line.substr(13);
    while (!table.provenance.empty() && table.provenance.front() == ' ') table.provenance.erase(0, 1);
    if (!std::getline(is, line)) throw IoError("reference table: missing column header");
    const auto header = split_csv(line);
    if (header.size() < 4 || (header.size() - 4) % 2 != 0 || header[0] != "x" || header[1] != "y" ||
        header[2] != "exact_u" || header[3] != "exact_v")
        throw IoError("reference table: header must be x,y,exact_u,exact_v[,name_u,name_v]...");
    for (std::size_t c = 4; c < header.size(); c += 2) {
        const std::string& h = header[c];
        if (h.size() < 3 || h.substr(h.size() - 2) != "_u")
            throw IoError("reference table: bad column name " + h);
        table.column_names.push_back(h.substr(0, h.size() - 2));
    }
    table.columns.resize(table.column_names.size());
    int lineno = 2;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw IoError("reference table: wrong cell count on line " + std::to_string(lineno));
        std::vector<double> v(cells.size());
        try {
            for (std::size_t i = 0; i < cells.size(); ++i) v[i] = std::stod(cells[i]);
        } catch (const std::exception&) {
            throw IoError("reference table: non-numeric cell on line " + std::to_string(lineno));
        }
        table.points.push_back({v[0], v[1], z});
        table.exact.push_back({v[2], v[3], 0.0});
        for (std::size_t c = 0; c < table.columns.size(); ++c)
            table.columns[c].push_back({v[4 + 2 * c], v[5 + 2 * c], 0.0});
    }
    return table;
}

// ---------------------------------------------------------------------------------------------

double divergence_fd(const VectorField& f, const Vec3& x, double h) {
    double div = 0.0;
    for (int a = 0; a < 3; ++a) {
        Vec3 e{};
        e[a] = h;
        div += (8.0 * (f(x + e)[a] - f(x - e)[a]) - (f(x + 2.0 * e)[a] - f(x - 2.0 * e)[a])) / (12.0 * h);
    }
    return div;
}

double max_divergence(const VectorField& f, std::span<const Vec3> points, double h) {
    double worst = 0.0;
    for (const Vec3& p : points) {
        const double d = divergence_fd(f, p, h);
        if (!std::isfinite(d)) return d;
        worst = std::max(worst, std::abs(d));
    }
    return worst;
}

std::vector<Vec3> probe_velocity(const Solution& sol, const ParticleSet& particles,
                                 const SolverConfig& cfg, std::span<const Vec3> points, std::size_t r) {
    const auto samples = reconstruct_velocity_batch(points, r, sol, particles, cfg);
    std::vector<Vec3> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.velocity);
    return out;
}

LatticeSpec taylor_green_probe_lattice(std::size_t r) {
    LatticeSpec l;
    const double q = 0.25 * std::numbers::pi;
    l.origin = {2.0 * q, 2.0 * q, 2.0 * q};
    l.spacing = {q, q, q};
    l.lo = {0, 0, 0};
    l.hi = {4, 4, 4};
    l.r = r;
    return l;
}

double relative_l2(std::span<const Vec3> approx, std::span<const Vec3> exact) {
    if (approx.size() != exact.size() || exact.empty())
        throw ContractViolation("relative_l2: size mismatch or empty input");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        num += norm2(approx[i] - exact[i]);
        den += norm2(exact[i]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

RefinementStudy taylor_green_refinement(std::span<const int> per_pi, std::span<const Vec3> probes,
                                        int threads) {
    RefinementStudy out;
    std::vector<Vec3> exact;
    for (const Vec3& p : probes) exact.push_back(taylor_green_initial(p).velocity);
    for (int res : per_pi) {
        const LatticeBox box = periodic_box_lattice(res);
        const ParticleSet particles =
            build_particles(box, [](const Vec3& x) { return taylor_green_initial(x).vorticity; }, true);
        const auto approx = initial_velocity_batch(probes, particles, MollifyParam{0.5 * box.h}, threads);
        out.per_pi.push_back(res);
        out.particles.push_back(particles.size());
        out.rel_l2.push_back(relative_l2(approx, exact));
    }
    out.strictly_decreasing = out.rel_l2.size() >= 2;
    for (std::size_t i = 1; i < out.rel_l2.size(); ++i)
        if (!(out.rel_l2[i] < out.rel_l2[i - 1])) out.strictly_decreasing = false;
    return out;
}

// ---------------------------------------------------------------------------------------------

Mat3 matrix_exp(const Mat3& a, double tol) {
    double norm_inf = 0.0;
    for (int i = 0; i < 3; ++i)
        norm_inf = std::max(norm_inf, std::abs(a(i, 0)) + std::abs(a(i, 1)) + std::abs(a(i, 2)));
    int squarings = 0;
    while (norm_inf > 0.5) {
        norm_inf *= 0.5;
        ++squarings;
    }
    const Mat3 scaled = std::ldexp(1.0, -squarings) * a;
    Mat3 result = Mat3::identity();
    Mat3 term = Mat3::identity();
    for (int k = 1; k < 40; ++k) {
        term = (1.0 / k) * (term * scaled);
        result += term;
        if (max_abs(term) < tol * 1e-4) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

namespace {

constexpr std::size_t kBatch = 4096;

std::uint32_t lo32(std::size_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t hi32(std::size_t v) { return static_cast<std::uint32_t>(static_cast<std::uint64_t>(v) >> 32); }

}  // namespace

FkResult fk_oracle_check(const FkConfig& cfg) {
    if (cfg.samples < 1) throw ContractViolation("fk_oracle_check: samples must be >= 1");
    if (!(cfg.T > 0.0) || !(cfg.dt > 0.0) || !(cfg.nu >= 0.0))
        throw ContractViolation("fk_oracle_check: require T > 0, dt > 0, nu >= 0");
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::round(cfg.T / cfg.dt)));
    const double dt = cfg.T / static_cast<double>(steps);
    const double sd = std::sqrt(2.0 * cfg.nu * dt);
    const bool constant = !cfg.strain_field;
    Mat3 const_step = Mat3::identity();
    const_step += dt * cfg.strain;

    // With constant S the backward gauge recursion is the same along every path.
    Mat3 const_gauge = Mat3::identity();
    if (constant)
        for (std::size_t r = steps; r >= 1; --r) const_gauge = const_gauge * const_step;

    auto path_sample = [&](std::size_t j, Mat3* gauge_out) {
        Vec3 x = cfg.x;
        Mat3 q = Mat3::identity();
        for (std::size_t r = steps; r >= 1; --r) {
            if (!constant) {
                Mat3 step = Mat3::identity();
                step += dt * cfg.strain_field(x, dt * static_cast<double>(r));
                q = q * step;
            }
            const auto z = rng::normal3(cfg.seed, rng::Stream::FeynmanKac, lo32(j), hi32(j),
                                        static_cast<std::uint32_t>(r));
            x += Vec3{sd * z[0], sd * z[1], sd * z[2]};
        }
        if (constant) q = const_gauge;
        if (gauge_out) *gauge_out = q;
        return q * cfg.f0(x);
    };

    const std::size_t batches = (cfg.samples + kBatch - 1) / kBatch;
    std::vector<Vec3> partial(batches);
    const int nthreads = resolve_threads(cfg.threads);
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
    for (std::size_t b = 0; b < batches; ++b) {
        Vec3 acc{};
        const std::size_t end = std::min(cfg.samples, (b + 1) * kBatch);
        for (std::size_t j = b * kBatch; j < end; ++j) acc += path_sample(j, nullptr);
        partial[b] = acc;
    }
    Vec3 sum{};
    for (const auto& p : partial) sum += p;

    FkResult res;
    res.monte_carlo = (1.0 / static_cast<double>(cfg.samples)) * sum;
    path_sample(0, &res.gauge_numeric);
    const double decay = std::exp(-cfg.nu * norm2(cfg.f0.wavevector) * cfg.T);
    res.oracle = decay * (matrix_exp(cfg.T * cfg.strain) * cfg.f0(cfg.x));
    const double scale = norm(res.oracle);
    res.rel_error = scale > 0.0 ? norm(res.monte_carlo - res.oracle) / scale
                                : norm(res.monte_carlo - res.oracle);
    return res;
}

FkRateResult fk_rate_study(FkConfig base, std::span<const std::size_t> sample_counts,
                           std::size_t repetitions) {
    if (sample_counts.size() < 2 || repetitions < 1)
        throw ContractViolation("fk_rate_study: need >= 2 sample counts and >= 1 repetition");
    FkRateResult out;
    const std::uint64_t seed0 = base.seed;
    for (std::size_t c = 0; c < sample_counts.size(); ++c) {
        double sq = 0.0;
        for (std::size_t rep = 0; rep < repetitions; ++rep) {
            FkConfig cfg = base;
            cfg.samples = sample_counts[c];
            cfg.seed = seed0 + 0x9E3779B97F4A7C15ull * (c * repetitions + rep + 1);
            const double e = fk_oracle_check(cfg).rel_error;
            sq += e * e;
        }
        out.samples.push_back(sample_counts[c]);
        out.rms_rel_error.push_back(std::sqrt(sq / static_cast<double>(repetitions)));
    }
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(out.samples.size());
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        mx += std::log(static_cast<double>(out.samples[i]));
        my += std::log(out.rms_rel_error[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const double dx = std::log(static_cast<double>(out.samples[i])) - mx;
        sxy += dx * (std::log(out.rms_rel_error[i]) - my);
        sxx += dx * dx;
    }
    out.slope = sxy / sxx;
    return out;
}

// ---------------------------------------------------------------------------------------------

bool DualityResult::agrees(double k) const {
    for (int a = 0; a < 3; ++a) {
        const double se = std::sqrt(lhs_std_err[a] * lhs_std_err[a] + rhs_std_err[a] * rhs_std_err[a]);
        if (std::abs(lhs[a] - rhs[a]) > k * se) return false;
    }
    return true;
}

namespace {

struct Moments {
    std::size_t count = 0;
    Vec3 sum{};
    Vec3 sum_sq{};

    void add(const Vec3& v) {
        ++count;
        sum += v;
        sum_sq += Vec3{v.x * v.x, v.y * v.y, v.z * v.z};
    }
    void merge(const Moments& o) {
        count += o.count;
        sum += o.sum;
        sum_sq += o.sum_sq;
    }
};

/// Conditional midpoint moments of the constant-drift diffusion started at `start`, given
/// that the terminal point lands in the cube of side `width` centred at `target`.
Moments bridge_midpoints(const Vec3& start, const Vec3& drift, const Vec3& target, const DualityConfig& cfg,
                         rng::Stream stream) {
    const double half = 0.5 * cfg.T;
    const double sd = std::sqrt(2.0 * cfg.nu * half);
    const Vec3 shift = half * drift;
    const double w = 0.5 * cfg.bin_width;
    const std::size_t batches = (cfg.samples + kBatch - 1) / kBatch;
    std::vector<Moments> partial(batches);
    const int nthreads = resolve_threads(cfg.threads);
#pragma omp parallel for schedule(static) num_threads(nthreads)
    for (std::size_t b = 0; b < batches; ++b) {
        Moments acc;
        const std::size_t end = std::min(cfg.samples, (b + 1) * kBatch);
        for (std::size_t j = b * kBatch; j < end; ++j) {
            const auto z1 = rng::normal3(cfg.seed, stream, lo32(j), hi32(j), 0);
            const auto z2 = rng::normal3(cfg.seed, stream, lo32(j), hi32(j), 1);
            const Vec3 mid = start + shift + Vec3{sd * z1[0], sd * z1[1], sd * z1[2]};
            const Vec3 end_pt = mid + shift + Vec3{sd * z2[0], sd * z2[1], sd * z2[2]};
            const Vec3 d = end_pt - target;
            if (std::abs(d.x) <= w && std::abs(d.y) <= w && std::abs(d.z) <= w) acc.add(mid);
        }
        partial[b] = acc;
    }
    Moments total;
    for (const auto& p : partial) total.merge(p);
    return total;
}

void finish(const Moments& m, Vec3& mean, Vec3& se) {
    const double n = static_cast<double>(m.count);
    mean = (1.0 / n) * m.sum;
    for (int a = 0; a < 3; ++a) {
        const double var = m.count > 1 ? std::max(0.0, (m.sum_sq[a] - n * mean[a] * mean[a]) / (n - 1.0)) : 0.0;
        se[a] = std::sqrt(var / n);
    }
}

}  // namespace

DualityResult duality_check(const DualityConfig& cfg) {
    if (cfg.samples < 1 || !(cfg.T > 0.0) || !(cfg.bin_width > 0.0) || !(cfg.nu > 0.0))
        throw ContractViolation("duality_check: require samples >= 1, T > 0, nu > 0, bin_width > 0");
    const Moments fwd = bridge_midpoints(cfg.xi, cfg.drift, cfg.eta, cfg, rng::Stream::DualityForward);
    const Moments bwd = bridge_midpoints(cfg.eta, -cfg.drift, cfg.xi, cfg, rng::Stream::DualityBackward);
    if (fwd.count < 2 || bwd.count < 2)
        throw std::runtime_error("duality_check: terminal bin holds fewer than 2 samples (forward " +
                                 std::to_string(fwd.count) + ", backward " + std::to_string(bwd.count) +
                                 "); increase samples or bin_width");
    DualityResult res;
    res.lhs_count = fwd.count;
    res.rhs_count = bwd.count;
    finish(fwd, res.lhs, res.lhs_std_err);
    finish(bwd, res.rhs, res.rhs_std_err);
    for (int a = 0; a < 3; ++a)
        res.std_err = std::max(res.std_err, std::sqrt(res.lhs_std_err[a] * res.lhs_std_err[a] +
                                                      res.rhs_std_err[a] * res.rhs_std_err[a]));
    return res;
}

}  // namespace rvm
