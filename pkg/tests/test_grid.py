import numpy as np
from scipy.integrate import quad
import pytest
from hypothesis import given, settings, strategies as st

from gfkit.errors import DomainError, InputError, ParameterError, ShapeError
from gfkit.grid import Grid, read_csv, write_csv


def test_nodes_and_spacing():
    g = Grid(5.0, 501)
    assert g.h == pytest.approx(0.01)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 5.0
    assert np.allclose(np.diff(g.nodes), g.h)


def test_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        Grid(0.0, 100)
    with pytest.raises(ParameterError):
        Grid(1.0, 4)


def test_default_grid_extent():
    g = Grid.default(2.0)
    assert g.x_max == 10.0 and g.n_nodes == 4000


def test_refined_halves_spacing():
    g = Grid(20.0, 4000)
    assert g.refined().h == pytest.approx(g.h / 2)
    assert np.array_equal(g.refined().nodes[::2], g.nodes)


def test_grids_are_hashable_values():
    assert Grid(3.0, 100) == Grid(3.0, 100)
    assert len({Grid(3.0, 100), Grid(3.0, 100), Grid(3.0, 101)}) == 2


def test_integrate_constant_and_linear():
    g = Grid(5.0, 101)
    assert g.integrate(np.ones(101)) == pytest.approx(5.0, abs=1e-14)
    assert g.integrate(g.nodes) == pytest.approx(12.5, abs=1e-13)
    assert g.integrate(np.zeros(101)) == 0.0


def test_integrate_second_order():
    # oracle: int_0^pi sin = 2, trapezoid error ~ h^2 pi / 12
    errs = []
    for n in (101, 201):
        g = Grid(np.pi, n)
        errs.append(abs(g.integrate(np.sin(g.nodes)) - 2.0))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.01)


def test_antiderivative_matches_integrate():
    g = Grid(5.0, 301)
    f = np.exp(-g.nodes) * np.cos(3 * g.nodes)
    F = g.antiderivative(f)
    assert F[0] == 0.0
    assert F[-1] == g.integrate(f)
    assert np.allclose(g.antiderivative(np.ones(301)), g.nodes, atol=1e-13)


def test_antiderivative_of_mean_zero_vanishes_at_end():
    g = Grid(20.0, 4000)
    x = g.nodes
    f = x * (x - 2) * np.exp(-x)
    assert abs(g.antiderivative(f)[-1]) < 1e-4


def test_interpolate_rules():
    g = Grid(5.0, 51)
    f = 2.0 * g.nodes + 1.0
    assert g.interpolate(f, g.nodes[7]) == pytest.approx(f[7])
    assert g.interpolate(f, 0.05) == pytest.approx(1.1)
    assert g.interpolate(f, 6.0) == 0.0
    assert isinstance(g.interpolate(f, 1.0), float)
    with pytest.raises(DomainError):
        g.interpolate(f, -0.1)


def test_differentiate():
    g = Grid(2.0, 401)
    x = g.nodes
    assert np.allclose(g.differentiate(3 * x + 1), 3.0)
    assert np.allclose(g.differentiate(np.full_like(x, 4.0)), 0.0)
    err = np.abs(g.differentiate(x**2)[1:-1] - 2 * x[1:-1]).max()
    assert err < 1e-12  # central differences are exact for quadratics


def test_integrate_of_derivative():
    g = Grid(3.0, 601)
    f = np.sin(g.nodes)
    assert g.integrate(g.differentiate(f)) == pytest.approx(f[-1] - f[0], abs=5e-4)


def test_shape_checked():
    g = Grid(1.0, 20)
    with pytest.raises(ShapeError):
        g.integrate(np.ones(19))


def test_tail_mass_covers_last_tenth():
    g = Grid(10.0, 1001)
    f = np.where(g.nodes > 9.0, 1.0, 0.0)
    assert g.tail_mass(f) == pytest.approx(1.0, abs=0.02)


def test_csv_round_trip(tmp_path):
    g = Grid(4.0, 41)
    f = np.exp(-g.nodes) / 3.0
    path = tmp_path / "f.csv"
    write_csv(path, g, f)
    assert path.read_text().splitlines()[0] == "x,value"
    x, f2 = read_csv(path)
    assert np.array_equal(x, g.nodes)
    assert np.array_equal(f2, f)
    _, resampled = read_csv(path, Grid(4.0, 81))
    assert resampled[::2] == pytest.approx(f, abs=1e-15)


def test_csv_errors(tmp_path):
    with pytest.raises(InputError):
        read_csv(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("x,value\n0,abc\n")
    with pytest.raises(InputError):
        read_csv(bad)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=16, max_size=60),
    st.floats(-10, 10),
    st.floats(-10, 10),
)
def test_integrate_is_linear(values, a, b):
    g = Grid(7.0, len(values))
    f = np.array(values)
    h = np.cos(g.nodes)
    lhs = g.integrate(a * f + b * h)
    rhs = a * g.integrate(f) + b * g.integrate(h)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-7)


def test_tail_integral_without_cancellation():
    # f = 1/x^3 near the origin dwarfs the tail; the tail must still be accurate
    g = Grid(20.0, 20001)
    x = g.nodes
    f = np.zeros_like(x)
    f[1:] = np.exp(-x[1:]) / x[1:] ** 3
    tail = g.tail_integral(f)
    i = np.searchsorted(x, 15.0)

    exact, _ = quad(lambda y: np.exp(-y) / y**3, x[i], 20.0, epsrel=1e-13)
    assert tail[i] == pytest.approx(exact, rel=1e-6)
    assert tail[-1] == 0.0
    assert tail[0] == pytest.approx(g.integrate(f), rel=1e-12)
