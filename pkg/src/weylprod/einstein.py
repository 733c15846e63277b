"""Einstein-Weyl conditions for conformal products.

The Ricci tensor of the adapted Weyl structure splits as

    Ric^D = Ric^1 + Ric^2 + (2 - n)/2 F + (n1 - n2)/2 F_hat

where ``Ric^i`` is the Ricci tensor of ``h_i = e^{2 eps_i f} g_i`` on factor
``i`` (``eps_1 = -1``, ``eps_2 = +1``) and ``F_hat`` is the symmetric
extension of the mixed block of ``F``. :func:`ricci_decomposition_at`
evaluates this using the conformal change formula for Ricci tensors; it
shares no curvature code path with :mod:`weylprod.curvature` beyond the
Riemann contraction used for the (usually flat) factor metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chart import (
    DEFAULT_GAUGE,
    ConformalProductChart,
    GaugeChoice,
    _block_jet,
    _scalar_jet,
    levi_civita_christoffel_derivs,
)
from .curvature import RicciAtPoint, riemann_from_connection, ricci_weyl_at
from .tensor import MetricAtPoint

CLOSED_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SymmetrizedFaraday:
    """Symmetric form vanishing on pure blocks and equal to ``F`` on ``TM1 x TM2``."""

    coeffs: np.ndarray
    n1: int

    @classmethod
    def from_faraday(cls, F: np.ndarray, n1: int) -> "SymmetrizedFaraday":
        F = np.asarray(F, dtype=float)
        out = np.zeros_like(F)
        out[:n1, n1:] = F[:n1, n1:]
        out[n1:, :n1] = F[:n1, n1:].T
        out.setflags(write=False)
        return cls(out, n1)


def _factor_ricci(chart: ConformalProductChart, which: int, p, fj) -> tuple[np.ndarray, np.ndarray]:
    """Ricci tensor of ``h = e^{2 phi} g_i`` on factor ``which`` and the block ``g_i``.

    ``phi = -f`` on ``M1`` and ``phi = f`` on ``M2``; the other factor's
    coordinates are parameters.
    """
    idx = np.array(chart.factor_indices(which))
    m = len(idx)
    G, dG, ddG = _block_jet(chart, which, p, 2)
    dG = dG[idx]
    ddG = ddG[np.ix_(idx, idx)]
    sign = -1.0 if which == 1 else 1.0
    dphi = sign * fj[1][idx]
    hphi = sign * fj[2][np.ix_(idx, idx)]

    Gam, dGam = levi_civita_christoffel_derivs(G, dG, ddG)
    riem = riemann_from_connection(Gam, dGam)
    ric_g = np.einsum("ijik->jk", riem)

    Gi = np.linalg.inv(G)
    hess = hphi - np.einsum("cab,c->ab", Gam, dphi)
    lap = float(np.sum(Gi * hess))
    grad2 = float(dphi @ Gi @ dphi)
    ric_h = ric_g - (m - 2) * (hess - np.outer(dphi, dphi)) - (lap + (m - 2) * grad2) * G
    return ric_h, G


def ricci_decomposition_at(chart: ConformalProductChart, p) -> RicciAtPoint:
    """``Ric^D`` assembled from the factor Ricci tensors and the two Faraday terms.

    The returned tensor is gauge independent; its metric is the default
    representative ``g1 + e^{2f} g2``.
    """
    p = np.asarray(p, dtype=float)
    n, n1, n2 = chart.n, chart.n1, chart.n2
    fj = _scalar_jet(chart.f, p, 2)
    ric = np.zeros((n, n))
    g0 = np.zeros((n, n))
    for which, sl in ((1, slice(0, n1)), (2, slice(n1, n))):
        ric_h, G = _factor_ricci(chart, which, p, fj)
        ric[sl, sl] = ric_h
        g0[sl, sl] = G if which == 1 else np.exp(2.0 * fj[0]) * G
    # F_{a i} = d_a d_i f on the mixed block
    F = np.zeros((n, n))
    F[:n1, n1:] = fj[2][:n1, n1:]
    F[n1:, :n1] = -fj[2][:n1, n1:].T
    Fhat = SymmetrizedFaraday.from_faraday(F, n1).coeffs
    ric += 0.5 * (2 - n) * F + 0.5 * (n1 - n2) * Fhat
    return RicciAtPoint(ric, MetricAtPoint(g0))


def factor_ricci_at(chart: ConformalProductChart, p) -> tuple[np.ndarray, np.ndarray]:
    """``(Ric^1, Ric^2)`` as block arrays."""
    fj = _scalar_jet(chart.f, np.asarray(p, float), 2)
    return _factor_ricci(chart, 1, p, fj)[0], _factor_ricci(chart, 2, p, fj)[0]


def einstein_residual_at(
    chart: ConformalProductChart, p, gauge: GaugeChoice = DEFAULT_GAUGE, method: str = "weyl"
) -> float:
    """Max-norm of the trace-free symmetric part of ``Ric^D`` in the gauge metric.

    ``method='weyl'`` contracts the curvature tensor, ``'decomposition'`` uses
    :func:`ricci_decomposition_at`; the value is gauge invariant.
    """
    if method == "weyl":
        ric = ricci_weyl_at(chart, gauge, p)
    elif method == "decomposition":
        ric = ricci_decomposition_at(chart, p)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(np.abs(ric.tracefree).max())


def einstein_factor_at(chart: ConformalProductChart, p) -> tuple[float, float, float]:
    """Measured Einstein factor: ``(phi, phi_1, phi_2)``.

    ``phi = tr(Ric^1 + Ric^2)/n`` against ``g1 + e^{2f} g2``; ``phi_1`` from
    ``Ric^1 = phi g1`` and ``phi_2`` from ``Ric^2 = phi e^{2f} g2``.
    """
    p = np.asarray(p, dtype=float)
    fj = _scalar_jet(chart.f, p, 2)
    r1, g1 = _factor_ricci(chart, 1, p, fj)
    r2, g2 = _factor_ricci(chart, 2, p, fj)
    e2f = np.exp(2.0 * fj[0])
    phi1 = float(np.sum(np.linalg.inv(g1) * r1)) / chart.n1
    phi2 = float(np.sum(np.linalg.inv(g2) * r2)) / (chart.n2 * e2f)
    phi = (phi1 * chart.n1 + phi2 * chart.n2) / chart.n
    return phi, phi1, phi2


def toda_residual(f, p) -> float:
    """``e^{2f}(f_11 + f_22) + f_33 + f_44`` at ``p`` for a field on 4 variables."""
    if f.nvars != 4:
        raise ValueError("the Toda-type equation needs a field on exactly 4 variables")
    val, _, hess = f.jet(np.asarray(p, float), 2)
    return float(np.exp(2.0 * val) * (hess[0, 0] + hess[1, 1]) + hess[2, 2] + hess[3, 3])


@dataclass
class EinsteinReport:
    residual_max: float
    residual_min: float
    residuals: list[float]
    phi_values: list[float]
    phi_block_gap: float
    faraday_max: float
    closed_flag: bool
    points: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "points": self.points,
            "residual_max": self.residual_max,
            "residual_min": self.residual_min,
            "phi_values": self.phi_values,
            "phi_block_gap": self.phi_block_gap,
            "faraday_max": self.faraday_max,
            "closed": self.closed_flag,
            **self.extra,
        }


def einstein_scan(
    chart: ConformalProductChart, points, gauge: GaugeChoice = DEFAULT_GAUGE
) -> EinsteinReport:
    residuals, phis, gaps, fmax = [], [], [], 0.0
    n1 = chart.n1
    for p in points:
        p = np.asarray(p, float)
        residuals.append(einstein_residual_at(chart, p, gauge))
        phi, phi1, phi2 = einstein_factor_at(chart, p)
        phis.append(phi)
        gaps.append(abs(phi1 - phi2))
        hess = _scalar_jet(chart.f, p, 2)[2]
        fmax = max(fmax, float(np.abs(hess[:n1, n1:]).max()))
    if not residuals:
        raise ValueError("no sample points")
    return EinsteinReport(
        residual_max=max(residuals),
        residual_min=min(residuals),
        residuals=residuals,
        phi_values=phis,
        phi_block_gap=max(gaps),
        faraday_max=fmax,
        closed_flag=fmax <= CLOSED_TOL,
        points=len(residuals),
    )


def no_go_scan(chart: ConformalProductChart, points) -> EinsteinReport:
    """Einstein residual over ``points`` for ``n1 = n2 >= 3``.

    For non-closed charts the residual stays positive everywhere: such
    products are never Einstein-Weyl. ``extra['mixed']`` records whether
    ``f`` involves coordinates of both factors (checked syntactically).
    """
    if chart.n1 != chart.n2 or chart.n1 < 3:
        raise ValueError(f"no-go scan needs n1 = n2 >= 3, got ({chart.n1}, {chart.n2})")
    rep = einstein_scan(chart, points)
    rep.extra["mixed"] = chart.f_depends_on_both()
    return rep
