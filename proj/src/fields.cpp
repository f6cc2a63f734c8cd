#include "rvm/fields.hpp"

#include <cmath>
#include <memory>
#include <numbers>

#include "rvm/errors.hpp"

namespace rvm {

Vec3 reconstruct_velocity(const Vec3& x, std::size_t r, const Solution& sol,
                          const ParticleSet& particles, const SolverConfig& cfg) {
    return interaction_velocity(x, r, sol.trajectories, sol.gauges, particles, std::nullopt, cfg);
}

Mat3 reconstruct_strain(const Vec3& x, std::size_t r, const Solution& sol,
                        const ParticleSet& particles, const SolverConfig& cfg) {
    return interaction_strain(x, r, sol.trajectories, sol.gauges, particles, std::nullopt, cfg);
}

std::vector<VelocitySample> reconstruct_velocity_batch(std::span<const Vec3> points, std::size_t r,
                                                       const Solution& sol,
                                                       const ParticleSet& particles,
                                                       const SolverConfig& cfg) {
    const SourceLevel level(sol.trajectories, sol.gauges, particles, r);
    const double delta2 = cfg.moll.delta * cfg.moll.delta;
    const double t = sol.grid.t(r);
    std::vector<VelocitySample> out(points.size());
    const int nthreads = resolve_threads(cfg.threads);
#pragma omp parallel for schedule(static) num_threads(nthreads)
    for (std::size_t i = 0; i < points.size(); ++i)
        out[i] = {points[i], t, level.velocity(points[i], std::nullopt, delta2)};
    return out;
}

std::vector<Vec3> initial_velocity_batch(std::span<const Vec3> points, const ParticleSet& particles,
                                         MollifyParam moll, int threads) {
    const TrajectoryEnsemble X = make_trajectories(particles, 0, 1);
    const GaugeEnsemble G = make_identity_gauges(0, particles.size(), 1);
    const SourceLevel level(X, G, particles, 0);
    const double delta2 = moll.delta * moll.delta;
    std::vector<Vec3> out(points.size());
    const int nthreads = resolve_threads(threads);
#pragma omp parallel for schedule(static) num_threads(nthreads)
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = level.velocity(points[i], std::nullopt, delta2);
    return out;
}

Vec3 lamb_oseen_exact(const Vec3& x, double t, double nu) {
    if (!(t > 0.0)) throw DomainError("lamb_oseen_exact: t must be > 0");
    if (!(nu > 0.0)) throw DomainError("lamb_oseen_exact: nu must be > 0");
    const double rho2 = x.x * x.x + x.y * x.y;
    if (rho2 == 0.0) return {};
    const double profile = -std::expm1(-rho2 / (4.0 * nu * t)) / (2.0 * std::numbers::pi * rho2);
    return {-x.y * profile, x.x * profile, 0.0};
}

ParticleSet lamb_oseen_particles() {
    std::vector<Vec3> pos;
    std::vector<Vec3> w;
    for (int k = -20; k <= 20; ++k) {
        pos.push_back({0.0, 0.0, 0.5 * k});
        w.push_back({0.0, 0.0, 0.5});
    }
    return particles_from_raw(std::move(pos), std::move(w), 0.5);
}

FlowSample taylor_green_initial(const Vec3& p) {
    const double sx = std::sin(p.x), cx = std::cos(p.x);
    const double sy = std::sin(p.y), cy = std::cos(p.y);
    const double sz = std::sin(p.z), cz = std::cos(p.z);
    return {{cx * sy * sz, -sx * cy * sz, 0.0},
            {sx * cy * cz, cx * sy * cz, -2.0 * cx * cy * sz}};
}

FlowSample isotropic_initial(const Vec3& p) {
    const double sx = std::sin(p.x), cx = std::cos(p.x);
    const double sy = std::sin(p.y), cy = std::cos(p.y);
    const double sz = std::sin(p.z), cz = std::cos(p.z);
    const double s2z = std::sin(2.0 * p.z), c2z = std::cos(2.0 * p.z);
    return {{cx * sy * sz + cx * sy * s2z, -sx * cy * sz + sx * cy * s2z, -sx * sy * c2z},
            {sx * cy * (cz - 3.0 * c2z), cx * sy * (cz + 3.0 * c2z), -2.0 * cx * cy * sz}};
}

LatticeBox periodic_box_lattice(int per_pi) {
    if (per_pi < 1) throw ContractViolation("periodic_box_lattice: resolution must be >= 1");
    LatticeBox box;
    box.h = std::numbers::pi / per_pi;
    box.lo = {-per_pi, -per_pi, -per_pi};
    box.hi = {3L * per_pi, 3L * per_pi, 3L * per_pi};
    return box;
}

std::vector<Streamline> trace_streamlines(const VectorField& field, std::span<const Vec3> seeds,
                                          double step, std::size_t count, const BoundingBox& box,
                                          double time) {
    if (!(step > 0.0)) throw ContractViolation("trace_streamlines: step must be > 0");
    std::vector<Streamline> lines;
    lines.reserve(seeds.size());
    for (const Vec3& seed : seeds) {
        Streamline line;
        line.time = time;
        line.points.push_back(seed);
        if (!box.contains(seed)) {
            lines.push_back(std::move(line));
            continue;
        }
        Vec3 p = seed;
        for (std::size_t i = 0; i < count; ++i) {
            const Vec3 k1 = field(p);
            const Vec3 k2 = field(p + (0.5 * step) * k1);
            const Vec3 k3 = field(p + (0.5 * step) * k2);
            const Vec3 k4 = field(p + step * k3);
            p += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!box.contains(p) || !is_finite(p)) break;
            line.points.push_back(p);
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

std::vector<Streamline> trace_streamlines(const Solution& sol, const ParticleSet& particles,
                                          const SolverConfig& cfg, std::span<const Vec3> seeds,
                                          std::size_t r, double step, std::size_t count,
                                          const BoundingBox& box) {
    const auto level = std::make_shared<SourceLevel>(sol.trajectories, sol.gauges, particles, r);
    const double delta2 = cfg.moll.delta * cfg.moll.delta;
    VectorField field = [level, delta2](const Vec3& x) { return level->velocity(x, std::nullopt, delta2); };
    return trace_streamlines(field, seeds, step, count, box, sol.grid.t(r));
}

}  // namespace rvm
