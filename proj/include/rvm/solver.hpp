#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rvm/ensemble.hpp"
#include "rvm/kernels.hpp"

namespace rvm {

enum class SelfInteraction {
    IncludeAll,   ///< sum over every particle, valid because mollified kernels vanish at 0
    ExcludeSelf,  ///< sum over k != i (all copies of the target particle are skipped)
};

struct IterationLog {
    int iteration = 0;
    double update_norm = 0.0;
    double wall_seconds = 0.0;
};

/// `iter=3 update_norm=1.25e-09 wall_s=0.42`
std::string format_log_line(const IterationLog& log);

struct SolverConfig {
    double nu = 0.5;
    double tol = 1e-7;
    int max_iters = 200;
    NoiseScheme scheme = NoiseScheme::Shared;
    MollifyParam moll{};
    SelfInteraction self_interaction = SelfInteraction::IncludeAll;
    int threads = 0;  ///< 0 = use every available hardware thread; never changes results
    std::function<void(const IterationLog&)> on_iteration;

    void validate() const;
};

struct Solution {
    TrajectoryEnsemble trajectories;
    GaugeEnsemble gauges;
    TimeGrid grid;
    int iterations_used = 0;
    double final_update_norm = 0.0;
    bool converged = false;
    std::vector<double> norm_history;
};

/// Vortex sources of one time level: positions X_t^{(k,s)} and strengths G(t,0) w_k / N,
/// laid out in ascending (k, sigma) order.
class SourceLevel {
  public:
    SourceLevel(const TrajectoryEnsemble& X, const GaugeEnsemble& G, const ParticleSet& particles,
                std::size_t r);

    /// Velocity induced at x, skipping every copy of particle `exclude`.
    Vec3 velocity(const Vec3& x, std::optional<std::size_t> exclude, double delta2) const;
    /// Symmetric strain induced at x, skipping every copy of particle `exclude`.
    Mat3 strain(const Vec3& x, std::optional<std::size_t> exclude, double delta2) const;

    std::size_t copies() const { return copies_; }
    std::size_t size() const { return pos_.size(); }

  private:
    std::size_t copies_;
    std::vector<Vec3> pos_;
    std::vector<Vec3> strength_;
};

/// Approximate velocity (1/N) sum_{k != exclude} sum_s K(x - X_r^{(k,s)}) G(t_r,0)^{(k,s)} w_k.
Vec3 interaction_velocity(const Vec3& x, std::size_t r, const TrajectoryEnsemble& X,
                          const GaugeEnsemble& G, const ParticleSet& particles,
                          std::optional<std::size_t> exclude, const SolverConfig& cfg);

/// Same double sum contracting the strain kernel H; the result is symmetric.
Mat3 interaction_strain(const Vec3& x, std::size_t r, const TrajectoryEnsemble& X,
                        const GaugeEnsemble& G, const ParticleSet& particles,
                        std::optional<std::size_t> exclude, const SolverConfig& cfg);

/// G(t_r, 0) for particle-copy (l, lambda): start from G(t_r, t_r) = I and apply
/// G(t_r, t_{r'-1}) = G(t_r, t_{r'}) (I + M_{r'} dt) for r' = r..1, where M_{r'} is the strain
/// at X_{r'}^{(l,lambda)} computed from the previous iterate (X, G).
Mat3 gauge_backward_sweep(std::size_t r, std::size_t l, std::size_t lambda, const TimeGrid& grid,
                          const TrajectoryEnsemble& X, const GaugeEnsemble& G,
                          const ParticleSet& particles, const SolverConfig& cfg);

/// Recomputes G(t_r, 0) for every (r, particle-copy) from the previous iterate.
GaugeEnsemble gauge_phase(const TimeGrid& grid, const TrajectoryEnsemble& X, const GaugeEnsemble& G,
                          const ParticleSet& particles, const SolverConfig& cfg);

/// Euler-Maruyama sweep X_{r+1} = X_r + u(X_r) dt + sqrt(2 nu) Z_r with X_0 = x_i, the drift
/// using the supplied (current-iterate) gauges and the positions of this sweep.
TrajectoryEnsemble position_forward_sweep(const GaugeEnsemble& G, const NoiseStore& noise,
                                          const ParticleSet& particles, const SolverConfig& cfg);

/// Sum of squared entry-wise differences over all positions and all gauge entries.
double update_norm(const TrajectoryEnsemble& X0, const GaugeEnsemble& G0,
                   const TrajectoryEnsemble& X1, const GaugeEnsemble& G1);

/// Picard iteration: (X, G)^(0) uses identity gauges; each update recomputes the gauges from
/// iterate n and then the positions with the new gauges, until update_norm <= tol.
Solution solve(const ParticleSet& particles, const TimeGrid& grid, std::size_t copies,
               const SolverConfig& cfg, std::uint64_t seed);

Solution solve(const ParticleSet& particles, const NoiseStore& noise, const SolverConfig& cfg);

/// Resolved worker count for a config (0 maps to the hardware maximum).
int resolve_threads(int requested);

}  // namespace rvm
