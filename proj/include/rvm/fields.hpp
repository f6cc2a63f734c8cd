#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rvm/ensemble.hpp"
#include "rvm/solver.hpp"

namespace rvm {

struct VelocitySample {
    Vec3 position;
    double time = 0.0;
    Vec3 velocity;
};

/// Reconstructed velocity at x and grid time t_r, summing over every particle-copy.
Vec3 reconstruct_velocity(const Vec3& x, std::size_t r, const Solution& sol,
                          const ParticleSet& particles, const SolverConfig& cfg);

/// Reconstructed strain (symmetric velocity gradient) at x and grid time t_r.
Mat3 reconstruct_strain(const Vec3& x, std::size_t r, const Solution& sol,
                        const ParticleSet& particles, const SolverConfig& cfg);

/// Batch probe evaluation; builds the source level once and evaluates probes in parallel.
std::vector<VelocitySample> reconstruct_velocity_batch(std::span<const Vec3> points, std::size_t r,
                                                       const Solution& sol,
                                                       const ParticleSet& particles,
                                                       const SolverConfig& cfg);

/// Velocity induced by the initial particles with identity gauges (the t = 0 field).
std::vector<Vec3> initial_velocity_batch(std::span<const Vec3> points, const ParticleSet& particles,
                                         MollifyParam moll, int threads = 0);

/// Closed-form Lamb-Oseen line vortex of unit circulation along the z axis:
/// u = (-y, x, 0) / (2 pi rho^2) * (1 - exp(-rho^2 / (4 nu t))), rho^2 = x^2 + y^2.
Vec3 lamb_oseen_exact(const Vec3& x, double t, double nu);

/// 41 filament particles at (0, 0, k/2), -20 <= k <= 20, raw weights (0, 0, 1/2), h = 1/2.
ParticleSet lamb_oseen_particles();

struct FlowSample {
    Vec3 velocity;
    Vec3 vorticity;
};

/// u = (cos x sin y sin z, -sin x cos y sin z, 0) and its curl.
FlowSample taylor_green_initial(const Vec3& x);

/// The two-mode solenoidal field with sin(2z) terms used for isotropic turbulence, and its curl.
FlowSample isotropic_initial(const Vec3& x);

/// The lattice (pi/16 * i, pi/16 * j, pi/16 * k), -16 <= i, j, k <= 48, generalized to spacing
/// h = pi / per_pi covering the same box [-pi, 3pi]^3.
LatticeBox periodic_box_lattice(int per_pi);

struct Streamline {
    std::vector<Vec3> points;
    double time = 0.0;
};

struct BoundingBox {
    Vec3 lo{-1e300, -1e300, -1e300};
    Vec3 hi{1e300, 1e300, 1e300};

    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
    }
};

/// Fixed-step classical RK4 integration of a frozen field from each seed. A streamline stops
/// when a point leaves the box; a seed outside the box yields a single-point streamline.
std::vector<Streamline> trace_streamlines(const VectorField& field, std::span<const Vec3> seeds,
                                          double step, std::size_t count, const BoundingBox& box,
                                          double time = 0.0);

/// Streamlines of the reconstructed field at grid time t_r.
std::vector<Streamline> trace_streamlines(const Solution& sol, const ParticleSet& particles,
                                          const SolverConfig& cfg, std::span<const Vec3> seeds,
                                          std::size_t r, double step, std::size_t count,
                                          const BoundingBox& box);

}  // namespace rvm
