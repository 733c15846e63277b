"""Curvature and Ricci tensor of the adapted Weyl connection at a point.

``R_{X,Y} = [D_X, D_Y] - D_{[X,Y]}``; the 4-index form is
``R(X, Y, Z, T) = g(R_{X,Y} Z, T)`` with the gauge metric ``g``. Curvature
is computed from exact Christoffel derivatives, never finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import (
    ConformalProductChart,
    GaugeChoice,
    GeometryJet,
    faraday_from_jet,
    geometry_jet,
    weyl_connection,
)
from .tensor import EndoAtPoint, MetricAtPoint, TwoFormAtPoint, raise_form


@dataclass(frozen=True, eq=False)
class CurvatureAtPoint:
    """``R[i, j, k, l] = g(R_{e_i,e_j} e_k, e_l)``; ``endo[i, j]`` is the matrix of
    ``R_{e_i,e_j}`` (``endo[i, j, l, k] = R^l_{ijk}``)."""

    R: np.ndarray
    endo: np.ndarray
    metric: MetricAtPoint
    weight: int = 2

    @property
    def dim(self) -> int:
        return self.R.shape[0]

    def on_form(self, omega: TwoFormAtPoint) -> EndoAtPoint:
        """``R(omega) = 1/2 omega^{ij} R_{e_i,e_j}`` (so ``R(e^i ^ e^j)`` = ``R_{e_i,e_j}``
        in an orthonormal frame)."""
        up = raise_form(omega, self.metric)
        return EndoAtPoint(0.5 * np.einsum("ij,ijlk->lk", up, self.endo), omega.weight)

    def pair(self, i: int, j: int) -> EndoAtPoint:
        return EndoAtPoint(self.endo[i, j])


@dataclass(frozen=True, eq=False)
class RicciAtPoint:
    ric: np.ndarray
    metric: MetricAtPoint

    @property
    def sym(self) -> np.ndarray:
        return 0.5 * (self.ric + self.ric.T)

    @property
    def skew(self) -> np.ndarray:
        return 0.5 * (self.ric - self.ric.T)

    @property
    def scalar(self) -> float:
        """``tr_g sym``."""
        return float(np.sum(self.metric.inverse * self.sym))

    @property
    def tracefree(self) -> np.ndarray:
        n = self.ric.shape[0]
        return self.sym - (self.scalar / n) * self.metric.coeffs


def riemann_from_connection(Gam: np.ndarray, dGam: np.ndarray) -> np.ndarray:
    """``endo[i, j, l, k] = R^l_{ijk}`` from ``Gam[k,i,j]`` and ``dGam[m,k,i,j]``."""
    A = np.einsum("iljk->ijlk", dGam)
    B = np.einsum("lim,mjk->ijlk", Gam, Gam)
    return (A - A.transpose(1, 0, 2, 3)) + (B - B.transpose(1, 0, 2, 3))


def curvature_from_jet(jet: GeometryJet) -> CurvatureAtPoint:
    Gam, dGam = weyl_connection(jet, derivs=True)
    endo = riemann_from_connection(Gam, dGam)
    R = np.einsum("ijlk,lm->ijkm", endo, jet.g)
    return CurvatureAtPoint(R, endo, MetricAtPoint(jet.g))


def weyl_curvature_at(chart: ConformalProductChart, gauge: GaugeChoice, p) -> CurvatureAtPoint:
    return curvature_from_jet(geometry_jet(chart, gauge, p, order=2))


def symmetry_failure_tensor(curv: CurvatureAtPoint, F: TwoFormAtPoint) -> np.ndarray:
    """Left minus right side of the pair-symmetry failure identity on coordinate vectors.

    ``R(X,Y,V,W) - R(V,W,X,Y) - (F(X)^Y - F(Y)^X)(V,W) - F(X,Y)g(V,W) + F(V,W)g(X,Y)``
    with ``(A ^ Y)(V,W) = g(A,V) g(Y,W) - g(A,W) g(Y,V)`` and ``g(F(X), V) = F(X, V)``.
    """
    R, g, Fc = curv.R, curv.metric.coeffs, F.coeffs
    T1 = np.einsum("xv,yw->xyvw", Fc, g) - np.einsum("xw,yv->xyvw", Fc, g)
    wedge_part = T1 - T1.transpose(1, 0, 2, 3)
    scalar_part = np.einsum("xy,vw->xyvw", Fc, g) - np.einsum("vw,xy->xyvw", Fc, g)
    return R - R.transpose(2, 3, 0, 1) - wedge_part - scalar_part


def symmetry_failure_residual(chart: ConformalProductChart, gauge: GaugeChoice, p) -> float:
    jet = geometry_jet(chart, gauge, p, order=2)
    curv = curvature_from_jet(jet)
    return float(np.abs(symmetry_failure_tensor(curv, faraday_from_jet(jet))).max())


def ricci_from_curvature(curv: CurvatureAtPoint, frame: str = "cholesky") -> RicciAtPoint:
    """``Ric(X,Y) = 1/2 sum_k [g(R_{X,e_k} e_k, Y) - g(R_{X,e_k} Y, e_k)]`` over a
    g-orthonormal frame (``'cholesky'`` or ``'eigen'``)."""
    g = curv.metric
    if frame == "cholesky":
        E = g.orthonormal_frame()
    elif frame == "eigen":
        w, V = np.linalg.eigh(g.coeffs)
        E = V / np.sqrt(w)
    else:
        raise ValueError(f"unknown frame {frame!r}")
    R = curv.R
    Rf = np.einsum("xaby,ak,bk->xy", R, E, E) - np.einsum("xayb,ak,bk->xy", R, E, E)
    return RicciAtPoint(0.5 * Rf, g)


def ricci_weyl_at(
    chart: ConformalProductChart, gauge: GaugeChoice, p, frame: str = "cholesky"
) -> RicciAtPoint:
    return ricci_from_curvature(weyl_curvature_at(chart, gauge, p), frame)


def is_mixed(omega: TwoFormAtPoint, n1: int, tol: float = 1e-12) -> bool:
    c = omega.coeffs
    scale = max(1.0, float(np.abs(c).max()))
    return bool(
        np.abs(c[:n1, :n1]).max(initial=0.0) <= tol * scale
        and np.abs(c[n1:, n1:]).max(initial=0.0) <= tol * scale
    )


def curvature_action_on_form(
    chart: ConformalProductChart, gauge: GaugeChoice, p, omega: TwoFormAtPoint
) -> EndoAtPoint:
    """``R(omega)`` for a 2-form in ``T*M1 (x) T*M2``.

    Raises
    ------
    ValueError
        If ``omega`` has components on a pure block.
    """
    if omega.dim != chart.n:
        raise ValueError(f"omega has dimension {omega.dim}, chart has {chart.n}")
    if not is_mixed(omega, chart.n1):
        raise ValueError("omega must lie in T*M1 (x) T*M2 (no pure-block components)")
    return weyl_curvature_at(chart, gauge, p).on_form(omega)
