#include "rvm/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "rvm/errors.hpp"
#include "rvm/format.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rvm {

std::string format_log_line(const IterationLog& log) {
    return "iter=" + std::to_string(log.iteration) + " update_norm=" + format_double(log.update_norm) +
           " wall_s=" + format_double(log.wall_seconds);
}

void SolverConfig::validate() const {
    if (!(nu >= 0.0) || !std::isfinite(nu)) throw ContractViolation("SolverConfig: nu must be >= 0");
    if (!(tol > 0.0)) throw ContractViolation("SolverConfig: tol must be > 0");
    if (max_iters < 1) throw ContractViolation("SolverConfig: max_iters must be >= 1");
    if (!(moll.delta >= 0.0) || !std::isfinite(moll.delta))
        throw ContractViolation("SolverConfig: delta must be >= 0");
    if (threads < 0) throw ContractViolation("SolverConfig: threads must be >= 0");
}

int resolve_threads(int requested) {
#ifdef _OPENMP
    return requested > 0 ? requested : omp_get_max_threads();
#else
    (void)requested;
    return 1;
#endif
}

SourceLevel::SourceLevel(const TrajectoryEnsemble& X, const GaugeEnsemble& G,
                         const ParticleSet& particles, std::size_t r)
    : copies_(X.copies()) {
    if (!X.same_shape(TrajectoryEnsemble(G.levels(), G.particles(), G.copies())) ||
        X.particles() != particles.size())
        throw ContractViolation("SourceLevel: ensemble shapes do not match the particle set");
    if (r >= X.levels()) throw ContractViolation("SourceLevel: time index out of range");
    const double inv_copies = 1.0 / static_cast<double>(copies_);
    pos_.resize(X.slots());
    strength_.resize(X.slots());
    for (std::size_t k = 0; k < X.particles(); ++k) {
        const Vec3 w = inv_copies * particles.weights[k];
        for (std::size_t s = 0; s < copies_; ++s) {
            const std::size_t p = k * copies_ + s;
            pos_[p] = X.slot(r, p);
            strength_[p] = G.slot(r, p) * w;
        }
    }
}

Vec3 SourceLevel::velocity(const Vec3& x, std::optional<std::size_t> exclude, double delta2) const {
    Vec3 acc{};
    const std::size_t skip_begin = exclude ? *exclude * copies_ : pos_.size();
    const std::size_t skip_end = exclude ? skip_begin + copies_ : pos_.size();
    for (std::size_t p = 0; p < skip_begin; ++p) acc += biot_savart_apply(x - pos_[p], strength_[p], delta2);
    for (std::size_t p = skip_end; p < pos_.size(); ++p)
        acc += biot_savart_apply(x - pos_[p], strength_[p], delta2);
    return acc;
}

Mat3 SourceLevel::strain(const Vec3& x, std::optional<std::size_t> exclude, double delta2) const {
    Mat3 acc{};
    const std::size_t skip_begin = exclude ? *exclude * copies_ : pos_.size();
    const std::size_t skip_end = exclude ? skip_begin + copies_ : pos_.size();
    for (std::size_t p = 0; p < skip_begin; ++p) strain_accumulate(x - pos_[p], strength_[p], delta2, acc);
    for (std::size_t p = skip_end; p < pos_.size(); ++p)
        strain_accumulate(x - pos_[p], strength_[p], delta2, acc);
    return acc;
}

namespace {

double delta_squared(const SolverConfig& cfg) { return cfg.moll.delta * cfg.moll.delta; }

std::optional<std::size_t> exclusion_for(const SolverConfig& cfg, std::size_t particle) {
    if (cfg.self_interaction == SelfInteraction::ExcludeSelf) return particle;
    return std::nullopt;
}

void check_singular_use(const SolverConfig& cfg) {
    if (cfg.moll.delta == 0.0 && cfg.self_interaction == SelfInteraction::IncludeAll)
        throw ContractViolation(
            "solver: delta = 0 requires self_interaction = exclude_self (singular self term)");
}

Mat3 backward_product(std::size_t r, double dt, const std::vector<Mat3>& strain_at_level) {
    // strain_at_level[r'] holds M_{r'} for one particle-copy, r' = 1..m.
    Mat3 g = Mat3::identity();
    for (std::size_t rp = r; rp >= 1; --rp) {
        Mat3 step = Mat3::identity();
        step += dt * strain_at_level[rp];
        g = g * step;
    }
    return g;
}

/// Index of the first flagged entry, or npos.
std::size_t first_flag(const std::vector<unsigned char>& flags) {
    for (std::size_t i = 0; i < flags.size(); ++i)
        if (flags[i]) return i;
    return std::numeric_limits<std::size_t>::max();
}

}  // namespace

Vec3 interaction_velocity(const Vec3& x, std::size_t r, const TrajectoryEnsemble& X,
                          const GaugeEnsemble& G, const ParticleSet& particles,
                          std::optional<std::size_t> exclude, const SolverConfig& cfg) {
    return SourceLevel(X, G, particles, r).velocity(x, exclude, delta_squared(cfg));
}

Mat3 interaction_strain(const Vec3& x, std::size_t r, const TrajectoryEnsemble& X,
                        const GaugeEnsemble& G, const ParticleSet& particles,
                        std::optional<std::size_t> exclude, const SolverConfig& cfg) {
    return SourceLevel(X, G, particles, r).strain(x, exclude, delta_squared(cfg));
}

Mat3 gauge_backward_sweep(std::size_t r, std::size_t l, std::size_t lambda, const TimeGrid& grid,
                          const TrajectoryEnsemble& X, const GaugeEnsemble& G,
                          const ParticleSet& particles, const SolverConfig& cfg) {
    if (r >= X.levels()) throw ContractViolation("gauge_backward_sweep: time index out of range");
    std::vector<Mat3> strain(r + 1);
    for (std::size_t rp = 1; rp <= r; ++rp) {
        strain[rp] = interaction_strain(X.at(rp, l, lambda), rp, X, G, particles, exclusion_for(cfg, l), cfg);
        if (!is_finite(strain[rp]))
            throw BlowUpError("non-finite strain in gauge recursion", rp, l, lambda);
    }
    return backward_product(r, grid.dt(), strain);
}

GaugeEnsemble gauge_phase(const TimeGrid& grid, const TrajectoryEnsemble& X, const GaugeEnsemble& G,
                          const ParticleSet& particles, const SolverConfig& cfg) {
    const std::size_t m = grid.m;
    const std::size_t slots = X.slots();
    const std::size_t copies = X.copies();
    const double delta2 = delta_squared(cfg);
    const int nthreads = resolve_threads(cfg.threads);

    // strain[r'][p] = M_{r'} for slot p; level 0 is never used by the recursion.
    std::vector<std::vector<Mat3>> strain(m + 1, std::vector<Mat3>(slots));
    std::vector<unsigned char> bad(slots * (m + 1), 0);
    for (std::size_t rp = 1; rp <= m; ++rp) {
        const SourceLevel level(X, G, particles, rp);
        auto& out = strain[rp];
#pragma omp parallel for schedule(static) num_threads(nthreads)
        for (std::size_t p = 0; p < slots; ++p) {
            out[p] = level.strain(X.slot(rp, p), exclusion_for(cfg, p / copies), delta2);
            if (!is_finite(out[p])) bad[rp * slots + p] = 1;
        }
    }
    if (const auto i = first_flag(bad); i != std::numeric_limits<std::size_t>::max()) {
        const std::size_t p = i % slots;
        throw BlowUpError("non-finite strain in gauge recursion", i / slots, p / copies, p % copies);
    }

    GaugeEnsemble next(m + 1, X.particles(), copies, Mat3::identity());
    const double dt = grid.dt();
#pragma omp parallel for schedule(static) num_threads(nthreads)
    for (std::size_t p = 0; p < slots; ++p) {
        std::vector<Mat3> column(m + 1);
        for (std::size_t rp = 1; rp <= m; ++rp) column[rp] = strain[rp][p];
        for (std::size_t r = 1; r <= m; ++r) next.slot(r, p) = backward_product(r, dt, column);
    }
    return next;
}

TrajectoryEnsemble position_forward_sweep(const GaugeEnsemble& G, const NoiseStore& noise,
                                          const ParticleSet& particles, const SolverConfig& cfg) {
    const TimeGrid& grid = noise.grid();
    const std::size_t m = grid.m;
    const std::size_t copies = noise.copies();
    if (G.levels() != m + 1 || G.particles() != particles.size() || G.copies() != copies ||
        noise.particles() != particles.size())
        throw ContractViolation("position_forward_sweep: gauge/noise/particle shapes differ");
    TrajectoryEnsemble X = make_trajectories(particles, m, copies);
    const std::size_t slots = X.slots();
    const double dt = grid.dt();
    const double diffusion = std::sqrt(2.0 * cfg.nu);
    const double delta2 = delta_squared(cfg);
    const int nthreads = resolve_threads(cfg.threads);
    const bool drift_free = particles.all_weights_zero();

    std::vector<unsigned char> bad(slots, 0);
    for (std::size_t r = 0; r < m; ++r) {
        if (drift_free) {
            for (std::size_t p = 0; p < slots; ++p)
                X.slot(r + 1, p) = X.slot(r, p) + diffusion * noise.at(r, p / copies, p % copies);
        } else {
            const SourceLevel level(X, G, particles, r);
#pragma omp parallel for schedule(static) num_threads(nthreads)
            for (std::size_t p = 0; p < slots; ++p) {
                const std::size_t k = p / copies;
                const Vec3 u = level.velocity(X.slot(r, p), exclusion_for(cfg, k), delta2);
                const Vec3 next = X.slot(r, p) + dt * u + diffusion * noise.at(r, k, p % copies);
                X.slot(r + 1, p) = next;
                if (!is_finite(next)) bad[p] = 1;
            }
        }
        if (const auto p = first_flag(bad); p != std::numeric_limits<std::size_t>::max())
            throw BlowUpError("non-finite position", r + 1, p / copies, p % copies);
    }
    return X;
}

double update_norm(const TrajectoryEnsemble& X0, const GaugeEnsemble& G0,
                   const TrajectoryEnsemble& X1, const GaugeEnsemble& G1) {
    if (!X0.same_shape(X1) || !G0.same_shape(G1))
        throw ContractViolation("update_norm: ensemble shapes differ");
    double sum = 0.0;
    const auto& a = X0.raw();
    const auto& b = X1.raw();
    for (std::size_t i = 0; i < a.size(); ++i) sum += norm2(a[i] - b[i]);
    const auto& ga = G0.raw();
    const auto& gb = G1.raw();
    for (std::size_t i = 0; i < ga.size(); ++i)
        for (std::size_t e = 0; e < 9; ++e) {
            const double d = ga[i].m[e] - gb[i].m[e];
            sum += d * d;
        }
    return sum;
}

Solution solve(const ParticleSet& particles, const TimeGrid& grid, std::size_t copies,
               const SolverConfig& cfg, std::uint64_t seed) {
    if (copies < 1) throw ContractViolation("solve: copy count must be >= 1");
    return solve(particles, sample_noise(grid, particles.size(), copies, cfg.scheme, seed), cfg);
}

Solution solve(const ParticleSet& particles, const NoiseStore& noise, const SolverConfig& cfg) {
    cfg.validate();
    check_singular_use(cfg);
    if (particles.size() == 0) throw ContractViolation("solve: empty particle set");
    const TimeGrid& grid = noise.grid();
    const auto start = std::chrono::steady_clock::now();

    Solution sol;
    sol.grid = grid;
    sol.gauges = make_identity_gauges(grid.m, particles.size(), noise.copies());
    sol.trajectories = position_forward_sweep(sol.gauges, noise, particles, cfg);

    for (int it = 1; it <= cfg.max_iters; ++it) {
        GaugeEnsemble G = gauge_phase(grid, sol.trajectories, sol.gauges, particles, cfg);
        TrajectoryEnsemble X = position_forward_sweep(G, noise, particles, cfg);
        const double norm = update_norm(sol.trajectories, sol.gauges, X, G);
        sol.trajectories = std::move(X);
        sol.gauges = std::move(G);
        sol.iterations_used = it;
        sol.final_update_norm = norm;
        sol.norm_history.push_back(norm);
        if (cfg.on_iteration) {
            const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
            cfg.on_iteration({it, norm, wall.count()});
        }
        if (norm <= cfg.tol) {
            sol.converged = true;
            break;
        }
    }
    return sol;
}

}  // namespace rvm
