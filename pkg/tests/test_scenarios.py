import math
import warnings

import numpy as np
import pytest

from gfkit.errors import ConfigError, InputError, ScenarioError
from gfkit.evolve import SimConfig, Velocity
from gfkit.grid import Grid, write_csv
from gfkit.kernel import Kernel
from gfkit.scenarios import (
    build_initial,
    default_bump,
    eta_antiderivative,
    eta_mode,
    eta_profile,
    perturbed_steady,
    raised_cosine,
    tau_scenario,
    xi_mode,
)
from gfkit.steady import steady_explicit_uniform


def test_eta_closed_forms(desk_grid):
    assert eta_profile(1.0, 1.0) == pytest.approx(-math.exp(-1))
    x = desk_grid.nodes
    assert desk_grid.integrate(eta_profile(x, 1.0)) == pytest.approx(0.0, abs=1e-4)
    # antiderivative oracle: d/dx (-x^2 e^{-x}) = eta
    assert np.allclose(desk_grid.antiderivative(eta_profile(x, 1.0)), eta_antiderivative(x, 1.0), atol=1e-5)


def test_eta_mode(desk_grid):
    scen = eta_mode(1.0, 1.0, desk_grid)
    assert desk_grid.interpolate(scen.initial, 1.0) == pytest.approx(4 * math.exp(-2) - math.exp(-1), rel=1e-4)
    assert np.array_equal(scen.exact(0.0), scen.initial)
    assert scen.expected_rate == 1.0
    assert desk_grid.integrate(scen.initial) == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(ScenarioError):
        eta_mode(1.0, 0.0, desk_grid)


def test_eta_mode_warns_when_negative(desk_grid):
    with pytest.warns(UserWarning):
        scen = eta_mode(1.0, 0.05, desk_grid)
    assert scen.info["negative_mass"] > 0


def test_xi_mode(mitosis_N, desk_grid):
    scen = xi_mode(1.0, 1.0, desk_grid, mitosis_N)
    xi = scen.initial - mitosis_N.values
    l1 = desk_grid.integrate(np.abs(xi))
    assert abs(desk_grid.integrate(xi)) < 1e-3 * l1
    assert scen.info["xi0"] > 0
    assert np.array_equal(scen.exact(0.0), scen.initial)
    assert scen.expected_rate == 1.0


def test_xi_mode_gates(steady_small, mitosis_N, desk_grid):
    coarse = steady_small[Kernel.equal_mitosis()]
    assert coarse.residual_l1 > 1e-6
    with pytest.raises(ScenarioError):
        xi_mode(1.0, 1.0, coarse.grid, coarse)
    with pytest.raises(ScenarioError):
        xi_mode(2.0, 1.0, desk_grid, mitosis_N)


def test_raised_cosine():
    x = np.array([0.0, 1.0, 1.5, 2.0, 3.0])
    assert np.allclose(raised_cosine(x, 1.5, 0.5, 2.0), [0, 0, 2, 0, 0])


def test_perturbed_steady(explicit_N, desk_grid):
    kernel = Kernel.uniform()
    zero = perturbed_steady(kernel, 1.0, 2.0, {"center": 1.5, "width": 0.75, "amplitude": 0.0}, desk_grid, explicit_N)
    assert np.allclose(zero.initial, 2.0 * explicit_N.values)
    scen = perturbed_steady(kernel, 1.0, 1.0, default_bump(1.0), desk_grid, explicit_N)
    assert desk_grid.integrate(scen.initial) == pytest.approx(1.0, abs=1e-12)
    assert scen.initial.min() >= 0
    assert scen.expected_rate == 1.0
    with pytest.raises(ScenarioError):
        perturbed_steady(kernel, 1.0, 1.0, {"center": 0.3, "width": 0.2, "amplitude": -5.0}, desk_grid, explicit_N)


def test_perturbed_rates(steady_small, small_grid):
    h1 = perturbed_steady(Kernel.homogeneous(1.0), 1.0, 1.0, default_bump(1.0), small_grid, steady_small[Kernel.homogeneous(1.0)])
    assert h1.expected_rate == pytest.approx(0.5)
    gm = perturbed_steady(Kernel.general_mitosis(0.3), 1.0, 1.0, default_bump(1.0), small_grid, steady_small[Kernel.general_mitosis(0.3)])
    assert gm.expected_rate == pytest.approx(1.0)


def test_tau_scenario(explicit_N, desk_grid):
    scen = tau_scenario(1.0, 0.3, Kernel.uniform(), 1.0, desk_grid, explicit_N)
    assert scen.expected_rate == pytest.approx(0.7)
    assert scen.info["sup_tau_prime"] == 0.3
    flat = tau_scenario(1.0, 0.0, Kernel.uniform(), 1.0, desk_grid, explicit_N)
    assert flat.velocity.constant and flat.expected_rate == pytest.approx(1.0)
    with pytest.raises(ScenarioError):
        tau_scenario(1.0, 1.0, Kernel.uniform(), 1.0, desk_grid, explicit_N)


def _config(grid, kernel=Kernel.uniform(), **initial):
    return SimConfig(kernel, 1.0, grid, t_end=1.0, initial=initial)


def test_build_initial(explicit_N, desk_grid, tmp_path):
    built = build_initial(_config(desk_grid, scenario="eta_mode"), explicit_N)
    assert built.info["scenario"] == "eta_mode"
    built = build_initial(_config(desk_grid, scenario="steady", rho=2.0), explicit_N)
    assert np.allclose(built.initial, 2 * explicit_N.values)
    path = tmp_path / "n0.csv"
    write_csv(path, desk_grid, explicit_N.values)
    built = build_initial(_config(desk_grid, scenario="csv", path=str(path)), explicit_N)
    assert np.array_equal(built.initial, explicit_N.values)


def test_build_initial_errors(explicit_N, desk_grid, tmp_path):
    with pytest.raises(ConfigError):
        build_initial(_config(desk_grid, Kernel.equal_mitosis(), scenario="eta_mode"), explicit_N)
    with pytest.raises(ConfigError):
        build_initial(_config(desk_grid, scenario="gaussian"), explicit_N)
    with pytest.raises(ConfigError):
        build_initial(_config(desk_grid, scenario="csv"), explicit_N)
    with pytest.raises(InputError):
        build_initial(_config(desk_grid, scenario="csv", path=str(tmp_path / "nope.csv")), explicit_N)


def test_initial_data_integrates_to_rho(steady_small, small_grid):
    for kernel, N in steady_small.items():
        scen = perturbed_steady(kernel, 1.0, 1.5, default_bump(1.0), small_grid, N)
        assert small_grid.integrate(scen.initial) == pytest.approx(1.5, abs=1e-10)


def test_eta_run_converges_to_exact_solution_at_first_order():
    from gfkit.evolve import run

    errs = []
    for n in (1000, 2000):
        g = Grid(20.0, n)
        scen = eta_mode(1.0, 1.0, g)
        traj = run(SimConfig(Kernel.uniform(), 1.0, g, t_end=2.0, snapshot_every=0.5, initial={"scenario": "eta_mode"}))
        errs.append(max(g.integrate(np.abs(n_t - scen.exact(t))) for t, n_t in zip(traj.times, traj.n)))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.25)
