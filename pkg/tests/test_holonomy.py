import numpy as np
import pytest

from weylprod.chart import gauge_metric_at, make_chart
from weylprod.holonomy import (
    CLOSED_REDUCIBLE,
    COMPLEX_DIAGONAL,
    OTHER,
    REDUCIBLE_GENERIC,
    bracket_closure,
    classify_holonomy,
    curvature_generators,
    generation_check,
    holonomy_algebra,
    lemma_generators,
    parallel_transport,
    richardson_order,
    square_loop,
    tolerance_sweep,
)
from weylprod.tensor import MetricAtPoint, wedge_as_endo

from conftest import chart_of

EYE3 = MetricAtPoint.identity(3)


def w(i, j, n):
    e = np.eye(n)
    return wedge_as_endo(e[i], e[j], MetricAtPoint.identity(n)).coeffs


def random_mixed_form(rng, n1, n2):
    F = np.zeros((n1 + n2,) * 2)
    F[:n1, n1:] = rng.standard_normal((n1, n2))
    return F - F.T


# -- bracket closure -------------------------------------------------------------------


def test_abelian_span():
    assert bracket_closure([w(0, 1, 3)]).dim == 1


def test_two_rotations_generate_so3():
    alg = bracket_closure([w(0, 1, 3), w(1, 2, 3)])
    assert alg.dim == 3
    assert alg.residual(w(0, 2, 3)) <= 1e-12


def test_empty_and_invalid_input():
    assert bracket_closure([]).dim == 0
    with pytest.raises(ValueError):
        bracket_closure([np.eye(2), np.eye(3)])


def test_closure_invariants(rng):
    gens = [rng.standard_normal((4, 4)) * s for s in (1e-3, 1.0, 1e3)]
    alg = bracket_closure(gens)
    assert alg.orthonormality_error() <= 1e-10
    assert alg.closure_residual() <= 10 * alg.rank_tol
    assert alg.dim <= 16
    again = bracket_closure(alg.basis, alg.rank_tol)
    assert again.dim == alg.dim


def test_dependent_generators_are_pruned():
    a, b = w(0, 1, 4), w(2, 3, 4)
    alg = bracket_closure([a, b, a + 2 * b, 1e-14 * w(0, 2, 4)])
    assert alg.dim == 2


@pytest.mark.parametrize("n1, n2, expected", [(2, 3, 4), (3, 3, 6), (2, 4, 7), (3, 4, 9)])
def test_generation_lemma(n1, n2, expected, rng):
    for _ in range(20):
        F = random_mixed_form(rng, n1, n2)
        res = generation_check(F, n1, n2)
        assert res["dim"] == expected and res["ok"] and not res["flagged"]


def test_generation_lemma_flags_two_by_two(rng):
    for _ in range(20):
        F = random_mixed_form(rng, 2, 2)
        res = generation_check(F, 2, 2)
        assert res["dim"] == 2 and res["flagged"]
    # equal singular values of the mixed block: only the diagonal rotation survives
    F = np.zeros((4, 4))
    F[0, 2] = F[1, 3] = 1.0
    assert generation_check(F - F.T, 2, 2)["dim"] == 1


def test_lemma_generators_are_block_skew(rng):
    for M in lemma_generators(random_mixed_form(rng, 2, 3), 2, 3):
        assert np.abs(M + M.T).max() <= 1e-14
        assert np.abs(M[:2, 2:]).max() <= 1e-14


# -- classification --------------------------------------------------------------------


def test_classify_reducible_generic():
    alg = bracket_closure([np.eye(4), w(0, 1, 4), w(2, 3, 4)])
    c = classify_holonomy(alg, 2, 2)
    assert (c.label, c.dim) == (REDUCIBLE_GENERIC, 3)


@pytest.mark.parametrize("sign", [1, -1])
def test_classify_complex_diagonal(sign):
    alg = bracket_closure([np.eye(4), w(0, 1, 4) + sign * w(2, 3, 4)])
    c = classify_holonomy(alg, 2, 2)
    assert (c.label, c.dim) == (COMPLEX_DIAGONAL, 2)


def test_classify_one_dimensional_factors():
    empty = bracket_closure([np.zeros((2, 2))])
    assert classify_holonomy(empty, 1, 1).label == CLOSED_REDUCIBLE
    dil = classify_holonomy(bracket_closure([np.eye(2)]), 1, 1)
    assert (dil.label, dil.dim) == (REDUCIBLE_GENERIC, 1)


def test_classify_other_and_closed():
    assert classify_holonomy(bracket_closure([np.eye(4), w(0, 1, 4)]), 2, 2).label == OTHER
    assert classify_holonomy(bracket_closure([w(0, 2, 4)]), 2, 2).label == OTHER
    assert classify_holonomy(bracket_closure([np.eye(4) + w(0, 1, 4)]), 2, 2).label == OTHER
    c = classify_holonomy(bracket_closure([w(0, 1, 5), w(2, 3, 5), w(3, 4, 5)]), 2, 3)
    assert (c.label, c.dim) == (CLOSED_REDUCIBLE, 4)
    with pytest.raises(ValueError):
        classify_holonomy(bracket_closure([np.eye(3)]), 2, 2)


def _random_adapted_co(rng, n1, n2):
    O1, _ = np.linalg.qr(rng.standard_normal((n1, n1)))
    O2, _ = np.linalg.qr(rng.standard_normal((n2, n2)))
    P = np.zeros((n1 + n2,) * 2)
    P[:n1, :n1], P[n1:, n1:] = O1, O2
    return np.exp(rng.uniform(-1, 1)) * P


@pytest.mark.parametrize("name", ["bilinear22", "mixed23", "mixed33"])
def test_classification_is_conjugation_invariant(name, rng):
    chart, gauge = chart_of(name)
    gens = [g.coeffs for g in curvature_generators(chart, gauge, chart.center())]
    ref = classify_holonomy(bracket_closure(gens), chart.n1, chart.n2)
    for _ in range(5):
        P = _random_adapted_co(rng, chart.n1, chart.n2)
        Pi = np.linalg.inv(P)
        c = classify_holonomy(bracket_closure([Pi @ g @ P for g in gens]), chart.n1, chart.n2)
        assert (c.label, c.dim) == (ref.label, ref.dim)


# -- charts ----------------------------------------------------------------------------


@pytest.mark.parametrize(
    "n1, n2, f, dim",
    [
        (2, 2, "x1*x3", 3),
        (2, 3, "x1*x4", 5),
        (3, 3, "x1*x4", 7),
        (2, 2, "exp(x1)*sin(x3) + x2*x4", 3),
        (3, 3, "sin(x1 + x5) + x2*x6", 7),
    ],
)
def test_theorem_dimensions(n1, n2, f, dim):
    chart, gauge = make_chart(n1, n2, f)
    alg, cls = holonomy_algebra(chart, gauge, chart.center())
    assert (cls.label, alg.dim) == (REDUCIBLE_GENERIC, dim)
    assert alg.id_projection() >= 0.999
    assert tolerance_sweep(curvature_generators(chart, gauge, chart.center()))["stable"]


def test_flat_chart_has_trivial_holonomy():
    chart, gauge = make_chart(2, 2, "0")
    gens = curvature_generators(chart, gauge, chart.center())
    assert all(np.abs(g.coeffs).max() == 0 for g in gens)
    alg, cls = holonomy_algebra(chart, gauge, chart.center())
    assert (alg.dim, cls.label) == (0, CLOSED_REDUCIBLE)


def test_closed_chart_has_no_dilation():
    chart, gauge = make_chart(2, 2, "x1^2 + x3^2")
    alg, cls = holonomy_algebra(chart, gauge, chart.center())
    assert cls.label == CLOSED_REDUCIBLE and alg.id_projection() <= 1e-9


def test_base_generators_contain_dilation():
    chart, gauge = make_chart(2, 2, "x1*x3")
    gens = [g.coeffs for g in curvature_generators(chart, gauge, chart.center())]
    span = bracket_closure(gens)
    # the span of the raw generators (before brackets) already holds Id
    assert bracket_closure(gens).id_projection() >= 0.999
    V = np.stack([g.ravel() for g in gens])
    coef, *_ = np.linalg.lstsq(V.T, np.eye(4).ravel(), rcond=None)
    assert np.linalg.norm(V.T @ coef - np.eye(4).ravel()) <= 1e-12
    assert span.dim == 3


def test_transported_generators_stay_in_algebra(rng):
    chart, gauge = chart_of("mixed23")
    base = chart.center()
    samples = chart.sample_points(rng, 3)
    alg, cls = holonomy_algebra(chart, gauge, base, samples)
    assert (cls.label, alg.dim) == (REDUCIBLE_GENERIC, 5)
    for g in curvature_generators(chart, gauge, base, samples):
        assert alg.residual(g.coeffs) <= 1e-8 * max(1.0, np.abs(g.coeffs).max())


# -- transport -------------------------------------------------------------------------


def test_flat_transport_is_identity(rng):
    chart, gauge = make_chart(2, 2, "0")
    path = chart.sample_points(rng, 4)
    assert parallel_transport(chart, gauge, path) == pytest.approx(np.eye(4), abs=1e-14)


def test_retraced_path_has_trivial_holonomy(rng):
    chart, gauge = chart_of("mixed33", "x1 + 0.3*x4")
    base, q = chart.center(), chart.sample_points(rng, 1)[0]
    A = parallel_transport(chart, gauge, [base, q, base])
    assert np.abs(A - np.eye(chart.n)).max() <= 1e-6


def test_transport_is_conformal(rng):
    chart, gauge = chart_of("curved22", "x1 + 0.3*x4")
    path = chart.sample_points(rng, 3)
    A = parallel_transport(chart, gauge, path)
    g0 = gauge_metric_at(chart, gauge, path[0]).coeffs
    g1 = gauge_metric_at(chart, gauge, path[-1]).coeffs
    M = A.T @ g1 @ A
    lam = float(np.mean(np.diag(M) / np.diag(g0)))
    assert lam > 0
    assert np.abs(M - lam * g0).max() <= 1e-6


def test_transport_rejects_bad_paths():
    chart, gauge = make_chart(2, 2, "0")
    with pytest.raises(ValueError):
        parallel_transport(chart, gauge, [[0, 0, 0, 0]])
    with pytest.raises(ValueError):
        parallel_transport(chart, gauge, [[0, 0, 0], [1, 1, 1]])


def test_square_loop_shape():
    loop = square_loop([0.0, 0.0, 0.0], 0, 2, 0.1)
    assert loop[0] == pytest.approx(loop[-1])
    assert loop[1] == pytest.approx([0.1, 0, 0]) and loop[2] == pytest.approx([0.1, 0, 0.1])


@pytest.mark.parametrize("name, i, j", [("bilinear22", 0, 2), ("mixed23", 1, 3), ("curved22", 0, 1)])
def test_small_loop_holonomy_order(name, i, j):
    chart, gauge = chart_of(name, "x1 + 0.3*x4")
    order, defects = richardson_order(chart, gauge, chart.center(), i, j)
    assert order >= 2.0
    assert defects[1] < defects[0]
