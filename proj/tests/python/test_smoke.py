"""Smoke tests for the Python bindings."""

import math

import numpy as np
import pytest

import hopper


@pytest.fixture(scope="module")
def gait():
    # One seed at N=10 keeps this to a few seconds.
    return hopper.warm_start(1.0, n_seeds=1, segments=10)


def test_parameters_and_cost():
    p = hopper.ModelParams()
    assert p.total_mass() == pytest.approx(1.0)
    assert p.to_dict()["k_alpha"] == 5.0
    # K = diag(m sqrt(g l0^3), m sqrt(g / l0))^-1 is the identity in normalized units.
    assert hopper.running_cost(0.5, 2.0) == pytest.approx(0.25 + 4.0)
    with pytest.raises(ValueError):
        hopper.ModelParams.parse("m_t = -1")


def test_impact_is_contact_compatible_and_dissipative():
    rng = np.random.default_rng(3)
    p = hopper.ModelParams()
    for _ in range(50):
        x = rng.uniform(-1, 1, 10)
        x[4] = 0.8 + 0.1 * rng.uniform()
        x[1] = x[4] * math.cos(x[2] + x[3]) + p.r_f
        post = hopper.impact_map(x)
        assert np.max(np.abs(hopper.contact_jacobian(post) @ post[5:])) < 1e-10
        assert hopper.kinetic_energy(post) <= hopper.kinetic_energy(x) + 1e-14


def test_dynamics_shapes():
    x = np.zeros(10)
    x[1], x[4] = 1.05, 1.0
    xdot, lam = hopper.stance_dynamics(x, 0.0, 0.0, 4.0)
    assert xdot.shape == (10,) and lam.shape == (2,)
    assert hopper.flight_dynamics(x, 0.0, 0.0, 4.0)[6] == pytest.approx(-1.0)


def test_warm_start_gait(gait, tmp_path):
    assert gait.status == hopper.SolveStatus.CONVERGED
    assert gait.free_stiffness
    assert gait.cot > 0 and gait.t_stance > 0 and gait.t_flight > 0
    assert hopper.gait_residual(gait) <= 1e-6
    path = tmp_path / "g.json"
    gait.save(path)
    back = hopper.Gait.load(path)
    assert np.array_equal(back.decision, gait.decision)
    rep = hopper.reintegrate(gait)
    assert rep["terminal_error"] < 1e-2


def test_fixed_solve_and_small_map(gait, tmp_path):
    g = hopper.solve_fixed(gait, 1.0, gait.k_l, segments=10)
    assert g.status == hopper.SolveStatus.CONVERGED
    assert abs(g.cot - gait.cot) < 1e-6
    spec = hopper.GridSpec(3.0, 4.0, 0.5, 0.9, 1.0, 0.1)
    m = hopper.explore_grid(gait, spec, segments=10, directory=tmp_path / "map")
    assert m.complete and m.solved_count() == 6
    grid = m.cot_grid()
    assert grid.shape == (2, 3) and np.all(np.isfinite(grid))
    fam = hopper.extract_families(hopper.load_map(tmp_path / "map"))
    assert all(r.cot_c >= r.cot_a for r in fam.rows)
    with pytest.raises(OSError):
        hopper.load_map(tmp_path / "missing")


def test_spearman():
    assert hopper.spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
