import math

import numpy as np
import pytest

from weylprod.chart import faraday_at, make_chart
from weylprod.curvature import ricci_weyl_at
from weylprod.einstein import (
    CLOSED_TOL,
    SymmetrizedFaraday,
    einstein_factor_at,
    einstein_residual_at,
    einstein_scan,
    factor_ricci_at,
    no_go_scan,
    ricci_decomposition_at,
    toda_residual,
)
from weylprod.expr import parse

from conftest import CHARTS, chart_of

BOX = lambda n: [[0.5, 1.5]] * n  # noqa: E731


def test_symmetrized_faraday(rng):
    m = rng.standard_normal((5, 5))
    F = m - m.T
    Fh = SymmetrizedFaraday.from_faraday(F, 2).coeffs
    assert np.all(Fh[:2, :2] == 0) and np.all(Fh[2:, 2:] == 0)
    assert np.all(Fh[:2, 2:] == F[:2, 2:])
    assert np.all(Fh == Fh.T)


@pytest.mark.parametrize("name", sorted(CHARTS))
def test_two_ricci_paths_agree(name, rng):
    chart, gauge = chart_of(name, "x1 + 0.3*x4")
    for p in chart.sample_points(rng, 20):
        a = ricci_weyl_at(chart, gauge, p).ric
        b = ricci_decomposition_at(chart, p).ric
        assert np.abs(a - b).max() <= 1e-10


def test_flat_ricci_vanishes():
    chart, _ = make_chart(2, 2, "0")
    assert np.abs(ricci_decomposition_at(chart, [0.2] * 4).ric).max() == 0


def test_equal_dimensions_drop_symmetrized_term(rng):
    chart, gauge = make_chart(2, 2, "exp(x1)*sin(x3) + x2*x4")
    for p in chart.sample_points(rng, 5):
        r1, r2 = factor_ricci_at(chart, p)
        block = np.zeros((4, 4))
        block[:2, :2], block[2:, 2:] = r1, r2
        F = faraday_at(chart, gauge, p).coeffs
        assert ricci_decomposition_at(chart, p).ric - block == pytest.approx(-F, abs=1e-14)


def test_einstein_residual_examples(rng):
    chart, gauge = make_chart(2, 2, "x1*x3")
    assert max(einstein_residual_at(chart, p) for p in chart.sample_points(rng, 50)) <= 1e-8
    assert einstein_residual_at(make_chart(2, 2, "0")[0], [0.3] * 4) == 0.0
    with pytest.raises(ValueError):
        einstein_residual_at(chart, [0.3] * 4, method="guess")


def test_no_go_witness_needs_a_point_off_the_axes():
    chart, _ = make_chart(3, 3, "x1*x4")
    # both factor Ricci tensors vanish on x1 = x4 = 0
    assert einstein_residual_at(chart, [0.0] * 6) <= 1e-14
    p = [1.0, 0, 0, 1.0, 0, 0]
    assert einstein_residual_at(chart, p) > 0.1
    assert einstein_residual_at(chart, p, method="decomposition") == pytest.approx(
        einstein_residual_at(chart, p), rel=1e-12
    )


def test_residual_is_gauge_invariant(rng):
    chart, g0 = make_chart(2, 3, "exp(x1)*sin(x4) + x2*x5")
    _, g1 = make_chart(2, 3, "exp(x1)*sin(x4) + x2*x5", gauge="x1 + 0.3*x4")
    for p in chart.sample_points(rng, 5):
        a, b = einstein_residual_at(chart, p, g0), einstein_residual_at(chart, p, g1)
        # the trace-free part is measured in the gauge metric, so the max-norm
        # changes by the conformal factor but vanishing does not
        assert a > 1e-3 and b > 1e-3


def test_toda_residual_examples():
    assert toda_residual(parse("1.5", 4), [0.1, 0.2, 0.3, 0.4]) == 0.0
    assert toda_residual(parse("x1*x3", 4), [0.7, -0.2, 0.3, 0.9]) == 0.0
    assert toda_residual(parse("x1^2", 4), [0.0] * 4) == pytest.approx(2.0)
    p = [0.4, 0.0, 0.0, 0.0]
    assert toda_residual(parse("x1^2", 4), p) == pytest.approx(2 * math.exp(2 * 0.16))
    with pytest.raises(ValueError):
        toda_residual(parse("x1", 3), [0, 0, 0])


TODA_FIELDS = [
    ("x1*x3", True),
    ("0.1*(x1*x3 + x2*x4)", True),
    ("0.5*exp(x1)*cos(x2)*exp(x3)*cos(x4)", True),
    ("ln(x1) - ln(x3)", True),
    ("x1*x4 - x2*x3 + exp(x2)*sin(x1)", True),
    ("x1^2", False),
    ("x1*x3 + x3^2", False),
    ("sin(x1)*x3", False),
    ("exp(x1 + x3)", False),
    ("x1^2*x4", False),
]


@pytest.mark.parametrize("src, is_toda", TODA_FIELDS)
def test_toda_iff_einstein_weyl(src, is_toda, rng):
    chart, gauge = make_chart(2, 2, src, domain=BOX(4))
    pts = chart.sample_points(rng, 20)
    toda_zero = max(abs(toda_residual(chart.f, p)) for p in pts) <= 1e-10
    ew = max(einstein_residual_at(chart, p) for p in pts) <= 1e-7
    assert toda_zero == is_toda
    assert ew == toda_zero
    if is_toda:
        assert einstein_scan(chart, pts).phi_block_gap <= 1e-7


def test_einstein_factor_consistency():
    chart, _ = make_chart(2, 2, "ln(x1) - ln(x3)", domain=BOX(4))
    phi, phi1, phi2 = einstein_factor_at(chart, [1.2, 0.7, 0.9, 1.1])
    # Ric^1 = Delta_1 f g1 = -1/x1^2 g1
    assert phi1 == pytest.approx(-1 / 1.2**2) and phi2 == pytest.approx(phi1) and phi == pytest.approx(phi1)


def test_scan_report(rng):
    chart, _ = make_chart(2, 2, "x1*x3")
    rep = einstein_scan(chart, chart.sample_points(rng, 10))
    d = rep.to_dict()
    assert d["points"] == 10 and not d["closed"] and d["residual_max"] >= 0
    assert len(d["phi_values"]) == 10
    with pytest.raises(ValueError):
        einstein_scan(chart, [])


def test_no_go_scan(rng):
    chart, _ = make_chart(3, 3, "x1*x4")
    rep = no_go_scan(chart, chart.sample_points(rng, 100))
    assert rep.residual_min > 0 and not rep.closed_flag and rep.extra["mixed"]
    sep, _ = make_chart(3, 3, "x1 + x4")
    assert no_go_scan(sep, sep.sample_points(rng, 10)).closed_flag
    zero, _ = make_chart(3, 3, "0")
    rep = no_go_scan(zero, zero.sample_points(rng, 10))
    assert rep.residual_max == 0 and rep.closed_flag and not rep.extra["mixed"]
    with pytest.raises(ValueError, match="n1 = n2 >= 3"):
        no_go_scan(make_chart(2, 2, "x1*x3")[0], [[0.1] * 4])
    assert CLOSED_TOL <= 1e-10
