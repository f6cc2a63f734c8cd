import math

import numpy as np
import pytest

import rvm


def test_version():
    assert rvm.__version__.count(".") == 2


def test_kernel_spot_values():
    k = rvm.biot_savart_kernel([1.0, 0.0, 0.0], 0.0)
    c = 1.0 / (4.0 * math.pi)
    assert k[1, 2] == pytest.approx(c)
    assert k[2, 1] == pytest.approx(-c)
    assert np.allclose(k, -k.T)
    h = rvm.strain_kernel([1.0, 0.0, 0.0], 0.0)
    assert h[1, 0, 2] == pytest.approx(-3.0 / (8.0 * math.pi))
    with pytest.raises(ValueError):
        rvm.biot_savart_kernel([0.0, 0.0, 0.0], 0.0)


def test_lamb_oseen_exact():
    u = rvm.lamb_oseen_exact([0.0, -1.0, 0.0], 0.1, 0.5)
    assert u[0] == pytest.approx((1.0 - math.exp(-5.0)) / (2.0 * math.pi))
    assert u[1] == 0.0


def test_zero_vorticity_solve():
    pos = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    p = rvm.ParticleSet(pos, np.zeros_like(pos), 1.0)
    sol = rvm.solve(p, 0.1, 5, 3, rvm.SolverConfig(delta=0.5), seed=1)
    assert sol.converged
    assert sol.iterations_used == 1
    assert sol.final_update_norm == 0.0
    g = sol.gauges
    assert g.shape == (6, 2, 3, 3, 3)
    assert np.array_equal(g, np.broadcast_to(np.eye(3), g.shape))
    x = sol.trajectories
    assert x.shape == (6, 2, 3, 3)
    assert np.array_equal(x[0, :, 0], pos)


def test_lamb_oseen_small_run():
    p = rvm.lamb_oseen_particles()
    assert len(p) == 41
    cfg = rvm.SolverConfig(delta=0.1)
    sol = rvm.solve(p, 0.1, 5, 4, cfg, seed=0)
    assert sol.converged
    assert sol.times[-1] == pytest.approx(0.1)
    v = rvm.reconstruct_velocity(np.array([[0.0, -1.0, 0.0]]), 5, sol, p, cfg)
    assert v.shape == (1, 3)
    assert abs(v[0, 0] - 0.159) < 0.1
    err = rvm.lamb_oseen_l1_error(sol, p, cfg)
    assert 0.0 < err < 2.0
    s = rvm.reconstruct_strain([0.5, 0.0, 0.0], 5, sol, p, cfg)
    assert np.allclose(s, s.T)


def test_thread_count_does_not_change_results():
    p = rvm.lamb_oseen_particles()
    a = rvm.solve(p, 0.1, 5, 3, rvm.SolverConfig(delta=0.1, threads=1), seed=5)
    b = rvm.solve(p, 0.1, 5, 3, rvm.SolverConfig(delta=0.1, threads=3), seed=5)
    assert np.array_equal(a.trajectories, b.trajectories)
    assert np.array_equal(a.gauges, b.gauges)


def test_matrix_exp_and_fk():
    a = np.array([[0.3, 0.1, 0.0], [0.1, -0.2, 0.05], [0.0, 0.05, -0.1]])
    e = rvm.matrix_exp(a)
    w, v = np.linalg.eigh(a)
    assert np.allclose(e, v @ np.diag(np.exp(w)) @ v.T, atol=1e-12)
    r = rvm.fk_oracle_check(a, [1.0, 0.5, -0.25], [1.0, 0.0, 0.0], [0.2, -0.1, 0.3], dt=0.02, samples=20000)
    assert r["rel_error"] < 0.1


def test_duality():
    r = rvm.duality_check([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.2, 0.0, 0.0], samples=20000)
    assert r["agrees"]


def test_cli_entry(tmp_path):
    code, out, err = rvm.run_command(["frobnicate"])
    assert code == 2
    code, out, err = rvm.run_command(
        ["simulate", "--set", "initializer=lamb_oseen", "--copies", "2", "--output-dir", str(tmp_path)]
    )
    assert code == 0
    assert (tmp_path / "manifest.json").exists()
