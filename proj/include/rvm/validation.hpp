#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rvm/fields.hpp"
#include "rvm/linalg.hpp"
#include "rvm/solver.hpp"

namespace rvm {

/// Points origin + (i * dx, j * dy, k * dz) for index ranges [lo, hi] per axis, probed at grid
/// time index r. The cell volume is dx * dy * dz.
struct LatticeSpec {
    Vec3 origin{};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::array<long, 3> lo{};
    std::array<long, 3> hi{};
    std::size_t r = 0;

    std::size_t count() const;
    double cell_volume() const { return spacing[0] * spacing[1] * spacing[2]; }
    /// Points in (i, j, k) lexicographic order, k fastest.
    std::vector<Vec3> points() const;
};

/// The 20^3 lattice (i/10, j/10, k/10), -10 <= i, j, k <= 9.
LatticeSpec lamb_oseen_error_lattice(std::size_t r);

struct ComparisonRow {
    Vec3 position;
    Vec3 exact;
    Vec3 approx;
    Vec3 abs_diff;
};

struct RunMetadata {
    std::uint64_t seed = 0;
    std::size_t copies = 0;
    double dt = 0.0;
    double delta = 0.0;
    std::string scheme;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    double cell_volume = 1.0;
    double l1_error = 0.0;  ///< cell_volume * sum over rows of |approx - exact|_1
    RunMetadata meta;

    /// Recomputes the aggregate from the rows.
    double recompute_l1() const;
};

/// Sum over lattice points of |approx - exact|_1, times the cell volume.
double l1_error(const VectorField& approx, const VectorField& exact, const LatticeSpec& lattice);
double l1_error(std::span<const Vec3> approx, std::span<const Vec3> exact, double cell_volume);

/// Tabulates the reconstructed field at `points` against supplied exact values.
ComparisonReport table_compare(const Solution& sol, const ParticleSet& particles,
                               const SolverConfig& cfg, std::span<const Vec3> points,
                               std::span<const Vec3> exact, std::size_t r, double cell_volume = 1.0);

ComparisonReport make_report(std::span<const Vec3> points, std::span<const Vec3> exact,
                             std::span<const Vec3> approx, double cell_volume);

/// CSV with columns x,y,z,exact_u,exact_v,exact_w,approx_u,approx_v,approx_w,diff_u,diff_v,diff_w
/// preceded by '#' metadata lines.
void write_report_csv(std::ostream& os, const ComparisonReport& report);
/// Human-readable aligned table in the layout of a printed comparison table.
void write_report_table(std::ostream& os, const ComparisonReport& report);

/// A reference table: points and exact values, plus the provenance line from the file header.
struct ReferenceTable {
    std::string provenance;
    std::vector<Vec3> points;
    std::vector<Vec3> exact;
    /// Named columns of reported approximations (e.g. "N=100"), each aligned with points.
    std::vector<std::string> column_names;
    std::vector<std::vector<Vec3>> columns;

    const std::vector<Vec3>& column(const std::string& name) const;
};

/// Reads x,y,exact_u,exact_v[,<name>_u,<name>_v ...] rows; `z` fills the third coordinate.
/// The first line must be "# provenance: ...".
ReferenceTable read_reference_table(std::istream& is, double z);

/// Fourth-order central-difference divergence of f at x.
double divergence_fd(const VectorField& f, const Vec3& x, double h = 1e-3);

/// Largest |divergence_fd| over the points.
double max_divergence(const VectorField& f, std::span<const Vec3> points, double h = 1e-3);

/// Velocity probes at r on a lattice, reconstructed from a solution.
std::vector<Vec3> probe_velocity(const Solution& sol, const ParticleSet& particles,
                                 const SolverConfig& cfg, std::span<const Vec3> points, std::size_t r);

/// 5 x 5 x 5 probes spanning [pi/2, 3pi/2]^3.
LatticeSpec taylor_green_probe_lattice(std::size_t r = 0);

/// sqrt(sum |a - b|^2 / sum |b|^2).
double relative_l2(std::span<const Vec3> approx, std::span<const Vec3> exact);

struct RefinementStudy {
    std::vector<int> per_pi;
    std::vector<std::size_t> particles;
    std::vector<double> rel_l2;
    bool strictly_decreasing = false;
};

/// Reconstructs the t = 0 Taylor-Green velocity from lattice particles with unit gauges and
/// delta = h / 2 at each resolution pi / per_pi, against the closed form on the probes.
RefinementStudy taylor_green_refinement(std::span<const int> per_pi, std::span<const Vec3> probes,
                                        int threads = 0);

// ---------------------------------------------------------------------------------------------
// Feynman-Kac oracle with zero drift.

/// Initial data f0(xi) = amplitude * cos(wavevector . xi). A zero wavevector is a constant.
struct PlaneWave {
    Vec3 amplitude{1.0, 0.0, 0.0};
    Vec3 wavevector{};

    Vec3 operator()(const Vec3& xi) const { return std::cos(dot(wavevector, xi)) * amplitude; }
};

struct FkConfig {
    double nu = 0.5;
    double T = 1.0;
    double dt = 1e-3;
    Mat3 strain = Mat3::zero();  ///< constant S, used when strain_field is empty
    /// Optional S(x, t) evaluated along each path. The closed-form oracle assumes constant S.
    std::function<Mat3(const Vec3&, double)> strain_field;
    PlaneWave f0{};
    Vec3 x{};  ///< evaluation point
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    int threads = 0;
};

struct FkResult {
    Vec3 monte_carlo;
    Vec3 oracle;
    double rel_error = 0.0;
    Mat3 gauge_numeric;  ///< Q(0) from the discretized gauge ODE along the first path
};

/// Matrix exponential by scaling and squaring with a Taylor series truncated below `tol`.
Mat3 matrix_exp(const Mat3& a, double tol = 1e-12);

/// Monte Carlo estimate of f(x, T) = E[Q(0) f0(X(0))] over Brownian paths pinned at X(T) = x,
/// with the gauge dQ/dt = -Q S, Q(T) = I integrated backwards along each path, against the
/// closed form exp(S T) e^{-nu |k|^2 T} f0(x).
FkResult fk_oracle_check(const FkConfig& cfg);

struct FkRateResult {
    std::vector<std::size_t> samples;
    std::vector<double> rms_rel_error;
    double slope = 0.0;  ///< least-squares slope of log(rms error) vs log(samples)
};

/// Root-mean-square relative error over `repetitions` seeds at each sample count.
FkRateResult fk_rate_study(FkConfig base, std::span<const std::size_t> sample_counts,
                           std::size_t repetitions);

// ---------------------------------------------------------------------------------------------
// Pinned-diffusion duality with constant drift.

struct DualityConfig {
    Vec3 drift{};
    double nu = 0.5;
    double T = 1.0;
    Vec3 xi{};
    Vec3 eta{};
    std::size_t samples = 100000;
    double bin_width = 0.2;
    std::uint64_t seed = 0;
    int threads = 0;
};

struct DualityResult {
    Vec3 lhs;  ///< E[X_{T/2} | X_0 = xi, X_T in bin(eta)] for drift b
    Vec3 rhs;  ///< E[Y_{T/2} | Y_0 = eta, Y_T in bin(xi)] for drift -b
    Vec3 lhs_std_err;
    Vec3 rhs_std_err;
    double std_err = 0.0;  ///< largest per-component combined standard error
    std::size_t lhs_count = 0;
    std::size_t rhs_count = 0;

    /// |lhs - rhs| <= k * sqrt(se_l^2 + se_r^2) in every component.
    bool agrees(double k = 3.0) const;
};

DualityResult duality_check(const DualityConfig& cfg);

}  // namespace rvm
