"""Local model of a conformal product ``(M1 x M2, [g1 + e^{2f} g2], D)``.

Coordinates are ``x1..xn`` with ``n = n1 + n2``; the first ``n1`` belong to
``M1``. A gauge ``u`` selects the representative metric
``g = e^{2u} (g1 + e^{2f} g2)``. ``D`` is the adapted Weyl structure (both
factor distributions parallel); in the gauge ``u = 0`` its Lee form is
``theta = -d_1 f`` (the ``M1``-part of ``-df``), and ``theta_u = theta - du``.

All point quantities are assembled from exact symbolic first and second
derivatives of ``f``, ``u`` and the block coefficients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .expr import ScalarField, parse
from .tensor import MetricAtPoint, TwoFormAtPoint


class ChartError(ValueError):
    pass


@dataclass(frozen=True)
class GaugeChoice:
    """Conformal factor exponent ``u``; ``None`` means ``u = 0``."""

    u: ScalarField | None = None

    def __post_init__(self):
        if self.u is not None and self.u.is_zero():
            object.__setattr__(self, "u", None)


DEFAULT_GAUGE = GaugeChoice()


@dataclass(frozen=True)
class LeeFormAtPoint:
    theta: np.ndarray
    weight: int = 0


def _identity_block(m: int, nvars: int) -> tuple[tuple[ScalarField, ...], ...]:
    one, zero = ScalarField.constant(1.0, nvars), ScalarField.constant(0.0, nvars)
    return tuple(tuple(one if i == j else zero for j in range(m)) for i in range(m))


@dataclass(frozen=True, eq=False)
class ConformalProductChart:
    """``c = [g1 + e^{2f} g2]`` on an open box of R^(n1+n2).

    ``g1``/``g2`` are ``None`` for flat (identity) blocks. ``f`` is a
    :class:`ScalarField` or any object exposing ``nvars`` and
    ``jet(point, order)``.
    """

    n1: int
    n2: int
    f: Any
    g1: tuple[tuple[ScalarField, ...], ...] | None = None
    g2: tuple[tuple[ScalarField, ...], ...] | None = None
    domain: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ChartError("factor dimensions must be positive")
        n = self.n
        if self.f.nvars != n:
            raise ChartError(f"f must be a field on {n} variables, got {self.f.nvars}")
        for name, blk, m, allowed in (
            ("g1", self.g1, self.n1, range(1, self.n1 + 1)),
            ("g2", self.g2, self.n2, range(self.n1 + 1, n + 1)),
        ):
            if blk is None:
                continue
            blk = tuple(tuple(row) for row in blk)
            if len(blk) != m or any(len(r) != m for r in blk):
                raise ChartError(f"{name} must be {m}x{m}")
            for i in range(m):
                for j in range(m):
                    e = blk[i][j]
                    if e.nvars != n:
                        raise ChartError(f"{name}[{i}][{j}] must be a field on {n} variables")
                    bad = sorted(set(e.variables()) - set(allowed))
                    if bad:
                        raise ChartError(
                            f"{name}[{i}][{j}] depends on x{bad[0]}, which is not a coordinate of its factor"
                        )
                    if j > i and blk[i][j] != blk[j][i]:
                        raise ChartError(f"{name} is not symmetric at ({i},{j})")
            object.__setattr__(self, name, blk)
        dom = self.domain
        if dom is None:
            dom = np.tile([0.0, 1.0], (n, 1))
        dom = np.asarray(dom, dtype=float)
        if dom.shape != (n, 2) or np.any(dom[:, 0] >= dom[:, 1]):
            raise ChartError(f"domain must be {n} intervals [lo, hi] with lo < hi")
        dom.setflags(write=False)
        object.__setattr__(self, "domain", dom)

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def flat(self) -> bool:
        return self.g1 is None and self.g2 is None

    def block(self, i: int):
        """Coefficient array of factor ``i`` (1 or 2), identity if flat."""
        blk = self.g1 if i == 1 else self.g2
        m = self.n1 if i == 1 else self.n2
        return _identity_block(m, self.n) if blk is None else blk

    def factor_indices(self, i: int) -> range:
        return range(0, self.n1) if i == 1 else range(self.n1, self.n)

    def f_depends_on_both(self) -> bool:
        """Syntactic check that ``f`` involves coordinates of both factors."""
        if not isinstance(self.f, ScalarField):
            return True
        vs = self.f.variables()
        return any(v <= self.n1 for v in vs) and any(v > self.n1 for v in vs)

    def sample_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo, hi = self.domain[:, 0], self.domain[:, 1]
        return lo + (hi - lo) * rng.random((count, self.n))

    def center(self) -> np.ndarray:
        return self.domain.mean(axis=1)

    def with_f(self, f) -> "ConformalProductChart":
        return ConformalProductChart(self.n1, self.n2, f, self.g1, self.g2, self.domain)


# -- jets --------------------------------------------------------------------------


@dataclass(frozen=True)
class GeometryJet:
    """Gauge metric, its derivatives and the Lee form at one point.

    ``dg[m, a, b] = d_m g_ab``, ``ddg[m, k, a, b] = d_m d_k g_ab``,
    ``dtheta[m, a] = d_m theta_a``.
    """

    g: np.ndarray
    dg: np.ndarray
    theta: np.ndarray
    ddg: np.ndarray | None = None
    dtheta: np.ndarray | None = None


def _zero_jet(n: int, order: int):
    return (0.0, np.zeros(n), np.zeros((n, n))) if order >= 2 else (0.0, np.zeros(n))


def _scalar_jet(field_, p, order: int):
    if field_ is None:
        return _zero_jet(len(p), order)
    jet = field_.jet(p, order)
    return jet if order >= 2 else jet[:2]


def _block_jet(chart: ConformalProductChart, which: int, p, order: int):
    """Value/derivative arrays for one factor block: G[a,b], dG[m,a,b], ddG[m,k,a,b]."""
    m = chart.n1 if which == 1 else chart.n2
    n = chart.n
    blk = chart.g1 if which == 1 else chart.g2
    G = np.eye(m)
    dG = np.zeros((n, m, m))
    ddG = np.zeros((n, n, m, m)) if order >= 2 else None
    if blk is None:
        return G, dG, ddG
    for a in range(m):
        for b in range(a, m):
            e = blk[a][b]
            if e.variables():
                jet = e.jet(p, order)
                G[a, b] = G[b, a] = jet[0]
                dG[:, a, b] = dG[:, b, a] = jet[1]
                if order >= 2:
                    ddG[:, :, a, b] = ddG[:, :, b, a] = jet[2]
            else:
                G[a, b] = G[b, a] = e.eval(p)
    return G, dG, ddG


def _scaled_block(phi_jet, blk_jet, order: int):
    """Derivatives of ``e^phi G`` from jets of ``phi`` and ``G``."""
    G, dG, ddG = blk_jet
    s = np.exp(phi_jet[0])
    dphi = phi_jet[1]
    val = s * G
    d = s * (dphi[:, None, None] * G + dG)
    dd = None
    if order >= 2:
        hphi = phi_jet[2]
        dd = s * (
            (np.outer(dphi, dphi) + hphi)[:, :, None, None] * G
            + dphi[:, None, None, None] * dG[None, :, :, :]
            + dphi[None, :, None, None] * dG[:, None, :, :]
            + ddG
        )
    return val, d, dd


def geometry_jet(
    chart: ConformalProductChart, gauge: GaugeChoice, p: Sequence[float], order: int = 2
) -> GeometryJet:
    p = np.asarray(p, dtype=float)
    n, n1 = chart.n, chart.n1
    if p.shape != (n,):
        raise ChartError(f"point must have {n} coordinates")
    fj = _scalar_jet(chart.f, p, order)
    uj = _scalar_jet(gauge.u, p, order)
    phi1 = tuple(2.0 * x for x in uj)
    phi2 = tuple(2.0 * (a + b) for a, b in zip(uj, fj))

    g = np.zeros((n, n))
    dg = np.zeros((n, n, n))
    ddg = np.zeros((n, n, n, n)) if order >= 2 else None
    for which, phi, sl in ((1, phi1, slice(0, n1)), (2, phi2, slice(n1, n))):
        v, d, dd = _scaled_block(phi, _block_jet(chart, which, p, order), order)
        g[sl, sl] = v
        dg[:, sl, sl] = d
        if order >= 2:
            ddg[:, :, sl, sl] = dd

    theta = -uj[1].copy()
    theta[:n1] -= fj[1][:n1]
    dtheta = None
    if order >= 2:
        dtheta = -uj[2].copy()
        dtheta[:, :n1] -= fj[2][:, :n1]
    return GeometryJet(g, dg, theta, ddg, dtheta)


# -- connection --------------------------------------------------------------------


def levi_civita_christoffels(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """``Gamma[k, i, j]`` of the Levi-Civita connection of ``g``."""
    gi = np.linalg.inv(g)
    # C[l, i, j] = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
    C = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    return np.einsum("kl,lij->kij", gi, C)


def levi_civita_christoffel_derivs(g, dg, ddg) -> tuple[np.ndarray, np.ndarray]:
    """``(Gamma, dGamma)`` with ``dGamma[m, k, i, j] = d_m Gamma^k_ij``."""
    gi = np.linalg.inv(g)
    C = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    dC = 0.5 * (
        np.einsum("milj->mlij", ddg) + np.einsum("mjli->mlij", ddg) - ddg
    )
    dgi = -np.einsum("ka,mab,bl->mkl", gi, dg, gi)
    Gam = np.einsum("kl,lij->kij", gi, C)
    dGam = np.einsum("mkl,lij->mkij", dgi, C) + np.einsum("kl,mlij->mkij", gi, dC)
    return Gam, dGam


def weyl_correction(g: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``W[k, i, j] = theta_i delta^k_j + theta_j delta^k_i - g_ij theta^k``."""
    n = len(theta)
    eye = np.eye(n)
    th_up = np.linalg.solve(g, theta)
    return (
        np.einsum("i,kj->kij", theta, eye)
        + np.einsum("j,ki->kij", theta, eye)
        - np.einsum("ij,k->kij", g, th_up)
    )


def weyl_connection(jet: GeometryJet, derivs: bool = False):
    """Christoffel symbols of ``D`` (and their first derivatives if requested)."""
    g, dg, theta = jet.g, jet.dg, jet.theta
    if not derivs:
        return levi_civita_christoffels(g, dg) + weyl_correction(g, theta)
    if jet.ddg is None:
        raise ValueError("second-order jet required for Christoffel derivatives")
    Gam, dGam = levi_civita_christoffel_derivs(g, dg, jet.ddg)
    n = len(theta)
    eye = np.eye(n)
    gi = np.linalg.inv(g)
    th_up = gi @ theta
    dgi = -np.einsum("ka,mab,bl->mkl", gi, dg, gi)
    dth_up = np.einsum("mkl,l->mk", dgi, theta) + np.einsum("kl,ml->mk", gi, jet.dtheta)
    dW = (
        np.einsum("mi,kj->mkij", jet.dtheta, eye)
        + np.einsum("mj,ki->mkij", jet.dtheta, eye)
        - np.einsum("mij,k->mkij", dg, th_up)
        - np.einsum("ij,mk->mkij", g, dth_up)
    )
    return Gam + weyl_correction(g, theta), dGam + dW


# -- public point operations ---------------------------------------------------------


def gauge_metric_at(chart: ConformalProductChart, gauge: GaugeChoice, p) -> MetricAtPoint:
    """``e^{2u} diag(g1, e^{2f} g2)`` at ``p``; raises ValueError if not positive definite."""
    return MetricAtPoint(geometry_jet(chart, gauge, p, order=1).g, weight=0)


def adapted_lee_form_at(chart: ConformalProductChart, gauge: GaugeChoice, p) -> LeeFormAtPoint:
    th = geometry_jet(chart, gauge, p, order=1).theta
    th.setflags(write=False)
    return LeeFormAtPoint(th)


def weyl_christoffels_at(chart: ConformalProductChart, gauge: GaugeChoice, p) -> np.ndarray:
    """``Gamma[k, i, j]`` with ``D_{e_i} e_j = Gamma^k_ij e_k``."""
    return weyl_connection(geometry_jet(chart, gauge, p, order=1))


def faraday_at(chart: ConformalProductChart, gauge: GaugeChoice, p) -> TwoFormAtPoint:
    """``F = d theta``, ``F_ab = d_a theta_b - d_b theta_a``."""
    dth = geometry_jet(chart, gauge, p, order=2).dtheta
    return TwoFormAtPoint(dth - dth.T)


def faraday_from_jet(jet: GeometryJet) -> TwoFormAtPoint:
    return TwoFormAtPoint(jet.dtheta - jet.dtheta.T)


def metric_compatibility_residual(chart: ConformalProductChart, gauge: GaugeChoice, p) -> float:
    """Max entry of ``D g + 2 theta (x) g``, which vanishes for a Weyl connection."""
    jet = geometry_jet(chart, gauge, p, order=1)
    g, Gam = jet.g, weyl_connection(jet)
    Dg = jet.dg - np.einsum("mki,mj->kij", Gam, g) - np.einsum("mkj,im->kij", Gam, g)
    return float(np.abs(Dg + 2.0 * np.einsum("k,ij->kij", jet.theta, g)).max())


def parallelism_residual(chart: ConformalProductChart, gauge: GaugeChoice, p) -> float:
    """Max Christoffel component carrying one factor's directions into the other's;
    zero when both distributions are ``D``-parallel."""
    Gam = weyl_christoffels_at(chart, gauge, p)
    n1 = chart.n1
    return float(max(np.abs(Gam[n1:, :, :n1]).max(), np.abs(Gam[:n1, :, n1:]).max()))


def lee_form_fields(chart: ConformalProductChart, gauge: GaugeChoice) -> list[ScalarField]:
    """Symbolic Lee form components (requires a symbolic ``f``)."""
    if not isinstance(chart.f, ScalarField):
        raise ChartError("symbolic Lee form needs an expression-valued f")
    from .expr import neg, sub

    out = []
    for a in range(1, chart.n + 1):
        node = neg(chart.f.diff(a).ast) if a <= chart.n1 else ScalarField.constant(0.0, chart.n).ast
        if gauge.u is not None:
            node = sub(node, gauge.u.diff(a).ast)
        out.append(ScalarField(node, chart.n))
    return out


def faraday_fields(chart: ConformalProductChart, gauge: GaugeChoice) -> list[list[ScalarField]]:
    """Symbolic ``F_ab = d_a theta_b - d_b theta_a``."""
    from .expr import sub

    th = lee_form_fields(chart, gauge)
    n = chart.n
    return [
        [ScalarField(sub(th[b].diff(a + 1).ast, th[a].diff(b + 1).ast), n) for b in range(n)]
        for a in range(n)
    ]


# -- chart files -------------------------------------------------------------------


def _parse_block(spec, m: int, nvars: int, name: str):
    if spec is None or spec == "flat":
        return None
    if not isinstance(spec, list) or len(spec) != m:
        raise ChartError(f"{name} must be 'flat' or a {m}x{m} array of expressions")
    rows = []
    for i, row in enumerate(spec):
        if not isinstance(row, list) or len(row) != m:
            raise ChartError(f"{name} row {i} must have {m} entries")
        rows.append(tuple(parse(str(e), nvars) for e in row))
    return tuple(rows)


def chart_from_dict(d: dict) -> tuple[ConformalProductChart, GaugeChoice]:
    """Build a chart and gauge from the JSON chart description.

    Keys: ``n1``, ``n2``, ``f`` (required); ``g1``, ``g2`` (arrays of
    expressions or ``"flat"``, default flat); ``gauge`` (expression,
    default ``0``); ``domain`` (list of ``[lo, hi]``, default unit cube).
    """
    if not isinstance(d, dict):
        raise ChartError("chart description must be a JSON object")
    try:
        n1, n2 = int(d["n1"]), int(d["n2"])
    except KeyError as exc:
        raise ChartError(f"missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError):
        raise ChartError("n1 and n2 must be integers") from None
    if "f" not in d:
        raise ChartError("missing key 'f'")
    n = n1 + n2
    f = parse(str(d["f"]), n)
    g1 = _parse_block(d.get("g1", "flat"), n1, n, "g1")
    g2 = _parse_block(d.get("g2", "flat"), n2, n, "g2")
    gauge_src = d.get("gauge")
    gauge = GaugeChoice(parse(str(gauge_src), n)) if gauge_src not in (None, "", "0") else DEFAULT_GAUGE
    chart = ConformalProductChart(n1, n2, f, g1, g2, d.get("domain"))
    return chart, gauge


def load_chart(path: str | Path) -> tuple[ConformalProductChart, GaugeChoice]:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ChartError(f"invalid JSON: {exc}") from None
    return chart_from_dict(d)


def make_chart(n1: int, n2: int, f: str, gauge: str | None = None, **kw):
    """Convenience constructor from expression strings (flat blocks by default)."""
    d = {"n1": n1, "n2": n2, "f": f}
    if gauge is not None:
        d["gauge"] = gauge
    d.update(kw)
    return chart_from_dict(d)
