import numpy as np
import pytest

from weylprod.einstein import einstein_residual_at
from weylprod.toda import (
    GridField,
    TodaGrid,
    discrete_residual,
    grid_chart,
    interior_error,
    load_grid,
    observed_order,
    save_grid,
    toda_solve,
    write_history_csv,
)


def bilinear(a, b, c, d):
    return a * c


def harmonic_product(a, b, c, d):
    # Delta_1 f = Delta_2 f = 0, so this solves the Toda equation, but unlike
    # bilinear fields it carries central-difference truncation error
    return 0.1 * np.exp(a) * np.cos(b) * np.exp(c) * np.cos(d)


def unit_grid(fn, n):
    return TodaGrid.from_function(fn, (n,) * 4, 1.0 / (n - 1))


def test_grid_validation():
    with pytest.raises(ValueError, match="4-dimensional"):
        TodaGrid(np.zeros((3, 3, 3)), 0.1)
    with pytest.raises(ValueError, match="at least 3"):
        TodaGrid(np.zeros((3, 3, 3, 2)), 0.1)
    with pytest.raises(ValueError, match="finite"):
        TodaGrid(np.full((3,) * 4, np.nan), 0.1)
    with pytest.raises(ValueError, match="positive"):
        TodaGrid(np.zeros((3,) * 4), 0.0)
    g = TodaGrid(np.zeros((3, 4, 5, 6)), (0.1, 0.2, 0.3, 0.4), origin=1.0)
    assert g.upper() == pytest.approx((1.2, 1.6, 2.2, 3.0))
    assert g.boundary_mask().sum() == 3 * 4 * 5 * 6 - 1 * 2 * 3 * 4


def test_zero_boundary_converges_in_one_sweep():
    res = toda_solve(unit_grid(lambda *x: 0.0 * x[0], 9))
    assert res.converged and res.sweeps == 1
    assert np.all(res.grid.values == 0)


def test_bilinear_solution_is_reproduced_exactly():
    for n in (9, 17):
        res = toda_solve(unit_grid(bilinear, n), tol=1e-11)
        assert res.converged
        assert interior_error(res.grid, bilinear) <= 1e-9


def test_second_order_convergence():
    errs, hs = [], []
    for n in (9, 17):
        res = toda_solve(unit_grid(harmonic_product, n), tol=1e-11)
        assert res.converged
        errs.append(interior_error(res.grid, harmonic_product))
        hs.append(1.0 / (n - 1))
    assert observed_order(errs, hs) >= 1.9


@pytest.mark.parametrize("fn", [bilinear, harmonic_product])
def test_residual_history_is_monotone(fn):
    res = toda_solve(unit_grid(fn, 9), omega=1.0, tol=1e-11)
    assert np.all(np.diff(res.history) <= 0)


def test_boundary_is_untouched():
    g = unit_grid(harmonic_product, 9)
    res = toda_solve(g, omega=1.5, tol=1e-9)
    mask = g.boundary_mask()
    assert np.array_equal(res.grid.values[mask], g.values[mask])


def test_argument_checks():
    g = unit_grid(bilinear, 5)
    for w in (0.0, 2.0, 2.5, -1.0):
        with pytest.raises(ValueError, match="omega"):
            toda_solve(g, omega=w)
    with pytest.raises(ValueError):
        toda_solve(g, max_iters=0)
    with pytest.raises(ValueError):
        toda_solve(g, mode="spiral")


def test_non_convergence_returns_best_iterate():
    res = toda_solve(unit_grid(harmonic_product, 9), tol=1e-14, max_iters=3)
    assert not res.converged and res.sweeps == 3
    assert res.residual == min(res.history)
    assert np.abs(discrete_residual(res.grid)).max() == pytest.approx(res.residual)


def test_red_black_is_deterministic_and_agrees():
    g = unit_grid(harmonic_product, 9)
    a = toda_solve(g, tol=1e-11, mode="redblack")
    b = toda_solve(g, tol=1e-11, mode="redblack", threads=1)
    assert a.history == b.history
    lex = toda_solve(g, tol=1e-11)
    assert np.abs(a.grid.values - lex.grid.values).max() <= 1e-10


def test_solved_grid_is_einstein_weyl(rng):
    def fn(a, b, c, d):
        return 0.1 * (a * c + b * d)

    tol = 1e-10
    res = toda_solve(unit_grid(fn, 9), tol=tol)
    assert res.converged
    assert np.abs(discrete_residual(res.grid)).max() <= tol
    chart = grid_chart(res.grid)
    pts = chart.sample_points(rng, 30)
    assert max(einstein_residual_at(chart, p) for p in pts) <= 10 * tol


def test_grid_field_reproduces_bilinear(rng):
    def fn(a, b, c, d):
        return 0.3 * a * c - b * d + a

    g = unit_grid(fn, 5)
    f = GridField(g.with_values(fn(*g.mesh())))
    for p in rng.random((10, 4)):
        v, g, h = f.jet(p, 2)
        assert v == pytest.approx(0.3 * p[0] * p[2] - p[1] * p[3] + p[0], abs=1e-13)
        assert g == pytest.approx([0.3 * p[2] + 1, -p[3], 0.3 * p[0], -p[1]], abs=1e-12)
        expected = np.zeros((4, 4))
        expected[0, 2] = expected[2, 0] = 0.3
        expected[1, 3] = expected[3, 1] = -1
        assert h == pytest.approx(expected, abs=1e-11)


def test_grid_field_converges(rng):
    pts = rng.random((50, 4))
    errs = []
    for n in (9, 17):
        g = unit_grid(harmonic_product, n)
        g = g.with_values(harmonic_product(*g.mesh()))
        f = GridField(g)
        errs.append(max(abs(f(p) - harmonic_product(*p)) for p in pts))
    assert errs[1] < errs[0] / 4
    node = GridField(g).eval(g.origin)
    assert node == pytest.approx(harmonic_product(0, 0, 0, 0))


@pytest.mark.parametrize("suffix", [".bin", ".csv"])
def test_grid_files_round_trip(tmp_path, suffix):
    g = TodaGrid(np.random.default_rng(1).random((3, 4, 5, 3)), (0.1, 0.2, 0.3, 0.4), (1, 2, 3, 4))
    path = save_grid(g, tmp_path / f"g{suffix}")
    assert (tmp_path / f"g{suffix}.json").exists()
    back = load_grid(path)
    assert np.array_equal(back.values, g.values)
    assert back.spacing == g.spacing and back.origin == g.origin


def test_history_csv(tmp_path):
    write_history_csv([1.0, 0.5, 0.25], tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "sweep,max_residual" and lines[-1] == "3,0.25"


def test_observed_order_degenerate():
    assert np.isnan(observed_order([0.0, 1e-3], [0.1, 0.05]))
    assert observed_order([4e-2, 1e-2], [0.2, 0.1]) == pytest.approx(2.0)
