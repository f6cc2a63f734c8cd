#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rvm/errors.hpp"
#include "rvm/fields.hpp"
#include "rvm/solver.hpp"
#include "rvm/validation.hpp"

using namespace rvm;

namespace {

const double kPi = std::numbers::pi;

/// A source at the origin with weight (0,0,1) and a passive target at (1,0,0).
ParticleSet source_and_target() {
    return particles_from_raw({{0, 0, 0}, {1, 0, 0}}, {{0, 0, 1}, {0, 0, 0}}, 1.0);
}

SolverConfig singular_cfg() {
    SolverConfig c;
    c.moll.delta = 0.0;
    c.self_interaction = SelfInteraction::ExcludeSelf;
    return c;
}

ParticleSet zero_weight_set() {
    return particles_from_raw({{0, 0, 0}, {1, 0, 0}, {0, 2, 0}}, {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}, 1.0);
}

}  // namespace

TEST_CASE("interaction velocity examples") {
    const ParticleSet p = source_and_target();
    const TrajectoryEnsemble X = make_trajectories(p, 1, 1);
    const GaugeEnsemble G = make_identity_gauges(1, 2, 1);
    const SolverConfig cfg = singular_cfg();
    const Vec3 u = interaction_velocity({1, 0, 0}, 0, X, G, p, std::nullopt, cfg);
    CHECK(u.x == 0.0);
    CHECK(u.y == doctest::Approx(1.0 / (4.0 * kPi)).epsilon(1e-15));
    CHECK(u.z == 0.0);

    const ParticleSet z = zero_weight_set();
    CHECK(interaction_velocity({0.3, 0.1, 0}, 0, make_trajectories(z, 1, 2), make_identity_gauges(1, 3, 2), z,
                               std::nullopt, cfg) == Vec3{});

    const ParticleSet one = particles_from_raw({{0, 0, 0}}, {{1, 2, 3}}, 1.0);
    CHECK(interaction_velocity({0.5, 0, 0}, 0, make_trajectories(one, 1, 3), make_identity_gauges(1, 1, 3), one, 0,
                               cfg) == Vec3{});
}

TEST_CASE("interaction strain examples") {
    const ParticleSet p = source_and_target();
    const TrajectoryEnsemble X = make_trajectories(p, 1, 1);
    const GaugeEnsemble G = make_identity_gauges(1, 2, 1);
    const Mat3 s = interaction_strain({1, 0, 0}, 0, X, G, p, std::nullopt, singular_cfg());
    CHECK(s(0, 1) == doctest::Approx(-3.0 / (8.0 * kPi)).epsilon(1e-14));
    CHECK(s(1, 0) == s(0, 1));

    const ParticleSet z = zero_weight_set();
    CHECK(max_abs(interaction_strain({0.3, 0.1, 0}, 0, make_trajectories(z, 1, 2), make_identity_gauges(1, 3, 2), z,
                                     std::nullopt, singular_cfg())) == 0.0);
}

TEST_CASE("strain is symmetric for an arbitrary state") {
    const ParticleSet p = lamb_oseen_particles();
    SolverConfig cfg;
    cfg.moll.delta = 0.25;
    TrajectoryEnsemble X = make_trajectories(p, 1, 3);
    GaugeEnsemble G = make_identity_gauges(1, p.size(), 3);
    for (std::size_t i = 0; i < X.slots(); ++i) {
        X.slot(0, i) += Vec3{0.01 * static_cast<double>(i % 7), -0.02 * static_cast<double>(i % 5), 0.0};
        G.slot(0, i)(0, 2) = 0.1 * static_cast<double>(i % 3);
    }
    const Mat3 s = interaction_strain({0.2, -0.3, 0.05}, 0, X, G, p, std::nullopt, cfg);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(s(i, j) == s(j, i));
}

TEST_CASE("gauge backward sweep: trivial cases and constant strain") {
    const ParticleSet p = source_and_target();
    SolverConfig cfg;
    cfg.moll.delta = 0.3;
    const TimeGrid grid(0.5, 10);
    // Positions frozen in time, so the strain seen by the target is the same at every level.
    const TrajectoryEnsemble X = make_trajectories(p, grid.m, 1);
    TrajectoryEnsemble Xs = X;
    for (std::size_t r = 1; r <= grid.m; ++r)
        for (std::size_t q = 0; q < 2; ++q) Xs.slot(r, q) = X.slot(0, q);
    const GaugeEnsemble G = make_identity_gauges(grid.m, 2, 1);

    CHECK(gauge_backward_sweep(0, 1, 0, grid, Xs, G, p, cfg) == Mat3::identity());

    const Mat3 M = interaction_strain({1, 0, 0}, 0, Xs, G, p, std::nullopt, cfg);
    Mat3 step = Mat3::identity();
    step += grid.dt() * M;
    Mat3 expect = Mat3::identity();
    for (std::size_t r = 1; r <= grid.m; ++r) {
        expect = expect * step;
        const Mat3 got = gauge_backward_sweep(r, 1, 0, grid, Xs, G, p, cfg);
        CHECK(got == expect);
        const double t = grid.t(r);
        CHECK(max_abs(got - matrix_exp(t * M)) <= grid.dt() * t * max_abs(M * M));
    }

    // A source with no strain at its own position (include-all with delta > 0 gives zero self term).
    const ParticleSet single = particles_from_raw({{0, 0, 0}}, {{0, 0, 1}}, 1.0);
    CHECK(gauge_backward_sweep(5, 0, 0, grid, make_trajectories(single, grid.m, 1), make_identity_gauges(grid.m, 1, 1),
                               single, cfg) == Mat3::identity());
}

TEST_CASE("position forward sweep examples") {
    const TimeGrid grid(0.1, 5);
    const ParticleSet z = zero_weight_set();
    const NoiseStore noise = sample_noise(grid, 3, 2, NoiseScheme::Independent, 11);
    const GaugeEnsemble G = make_identity_gauges(grid.m, 3, 2);

    SolverConfig cfg;
    cfg.moll.delta = 0.1;
    const TrajectoryEnsemble X = position_forward_sweep(G, noise, z, cfg);
    const double d = std::sqrt(2.0 * cfg.nu);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t s = 0; s < 2; ++s) {
            Vec3 x = z.positions[k];
            for (std::size_t r = 0; r < grid.m; ++r) {
                x = x + d * noise.at(r, k, s);
                CHECK(X.at(r + 1, k, s) == x);
            }
        }

    cfg.nu = 0.0;
    const TrajectoryEnsemble X0 = position_forward_sweep(G, noise, z, cfg);
    for (std::size_t r = 0; r <= grid.m; ++r)
        for (std::size_t k = 0; k < 3; ++k) CHECK(X0.at(r, k, 1) == z.positions[k]);

    // One step with a single nonzero source.
    const ParticleSet p = source_and_target();
    const TimeGrid g1(0.02, 1);
    const NoiseStore n1 = sample_noise(g1, 2, 1, NoiseScheme::Shared, 5);
    SolverConfig c1 = singular_cfg();
    const TrajectoryEnsemble X1 = position_forward_sweep(make_identity_gauges(1, 2, 1), n1, p, c1);
    const Vec3 u{0.0, 1.0 / (4.0 * kPi), 0.0};
    const Vec3 expect = Vec3{1, 0, 0} + g1.dt() * u + std::sqrt(2.0 * c1.nu) * n1.at(0, 1, 0);
    CHECK(norm(X1.at(1, 1, 0) - expect) <= 1e-15);
}

TEST_CASE("update norm examples") {
    const ParticleSet p = lamb_oseen_particles();
    const TrajectoryEnsemble X = make_trajectories(p, 2, 2);
    const GaugeEnsemble G = make_identity_gauges(2, p.size(), 2);
    CHECK(update_norm(X, G, X, G) == 0.0);
    TrajectoryEnsemble X1 = X;
    X1.at(1, 3, 1).y += 1e-3;
    CHECK(update_norm(X, G, X1, G) == doctest::Approx(1e-6).epsilon(1e-9));
    GaugeEnsemble G1 = G;
    G1.at(2, 7, 0)(2, 1) += 2e-4;
    CHECK(update_norm(X, G, X, G1) == doctest::Approx(4e-8).epsilon(1e-9));
    CHECK_THROWS_AS(update_norm(X, G, make_trajectories(p, 3, 2), G), ContractViolation);
}

TEST_CASE("zero vorticity: one update reaches the fixed point exactly") {
    const ParticleSet z = zero_weight_set();
    SolverConfig cfg;
    cfg.moll.delta = 0.5;
    const TimeGrid grid(0.2, 10);
    const NoiseStore noise = sample_noise(grid, z.size(), 4, NoiseScheme::Shared, 99);
    const Solution sol = solve(z, noise, cfg);
    CHECK(sol.converged);
    CHECK(sol.iterations_used == 1);
    CHECK(sol.final_update_norm == 0.0);
    for (const Mat3& g : sol.gauges.raw()) CHECK(g == Mat3::identity());
    for (std::size_t k = 0; k < z.size(); ++k)
        for (std::size_t s = 0; s < 4; ++s) {
            Vec3 x = z.positions[k];
            for (std::size_t r = 0; r < grid.m; ++r) {
                x = x + std::sqrt(2.0 * cfg.nu) * noise.at(r, k, s);
                CHECK(sol.trajectories.at(r + 1, k, s) == x);
            }
        }
}

TEST_CASE("lamb-oseen solve converges and is independent of the thread count") {
    const ParticleSet p = lamb_oseen_particles();
    SolverConfig cfg;
    cfg.moll.delta = 0.1;
    const TimeGrid grid(0.1, 5);
    cfg.threads = 1;
    const Solution a = solve(p, grid, 6, cfg, 7);
    cfg.threads = 4;
    const Solution b = solve(p, grid, 6, cfg, 7);
    CHECK(a.converged);
    CHECK(a.final_update_norm <= cfg.tol);
    CHECK(a.norm_history.size() == static_cast<std::size_t>(a.iterations_used));
    CHECK(a.trajectories == b.trajectories);
    CHECK(a.gauges == b.gauges);
    CHECK(a.norm_history == b.norm_history);
    for (std::size_t i = 0; i < a.gauges.slots(); ++i) CHECK(a.gauges.slot(0, i) == Mat3::identity());
}

TEST_CASE("iteration cap flags non-convergence instead of throwing") {
    const ParticleSet p = lamb_oseen_particles();
    SolverConfig cfg;
    cfg.moll.delta = 0.1;
    cfg.max_iters = 1;
    int calls = 0;
    cfg.on_iteration = [&](const IterationLog& log) {
        ++calls;
        CHECK(log.iteration == 1);
        CHECK(format_log_line(log).rfind("iter=1 update_norm=", 0) == 0);
    };
    const Solution sol = solve(p, TimeGrid(0.1, 5), 3, cfg, 1);
    CHECK_FALSE(sol.converged);
    CHECK(sol.iterations_used == 1);
    CHECK(sol.final_update_norm > cfg.tol);
    CHECK(calls == 1);
}

TEST_CASE("log line format") {
    CHECK(format_log_line({3, 1.25e-9, 0.5}) == "iter=3 update_norm=1.25e-09 wall_s=0.5");
}

TEST_CASE("contract and blow-up errors") {
    const ParticleSet p = source_and_target();
    SolverConfig cfg;
    cfg.moll.delta = 0.0;
    CHECK_THROWS_AS(solve(p, TimeGrid(0.1, 2), 1, cfg, 0), ContractViolation);
    cfg.moll.delta = 0.1;
    cfg.tol = 0.0;
    CHECK_THROWS_AS(solve(p, TimeGrid(0.1, 2), 1, cfg, 0), ContractViolation);
    cfg.tol = 1e-7;
    CHECK_THROWS_AS(solve(p, TimeGrid(0.1, 2), 0, cfg, 0), ContractViolation);

    const ParticleSet huge = particles_from_raw({{0, 0, 0}, {0.05, 0, 0}}, {{0, 0, 1e308}, {0, 0, 1e308}}, 1.0);
    try {
        (void)solve(huge, TimeGrid(0.1, 2), 1, cfg, 0);
        FAIL("expected a blow-up");
    } catch (const BlowUpError& e) {
        CHECK(e.step() == 1);
        CHECK(e.copy() == 0);
    }
}

TEST_CASE("schemes agree for a single particle") {
    const ParticleSet one = particles_from_raw({{0, 0, 0}}, {{0, 0, 1}}, 1.0);
    SolverConfig cfg;
    cfg.moll.delta = 0.2;
    const TimeGrid grid(0.1, 5);
    cfg.scheme = NoiseScheme::Shared;
    const Solution a = solve(one, grid, 5, cfg, 3);
    cfg.scheme = NoiseScheme::Independent;
    const Solution b = solve(one, grid, 5, cfg, 3);
    CHECK(a.trajectories == b.trajectories);
}
