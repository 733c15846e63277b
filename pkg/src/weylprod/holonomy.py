"""Restricted holonomy algebras of adapted Weyl structures.

Generators are curvature endomorphisms (Ambrose-Singer), optionally
transported to the base point; the algebra is their Lie-bracket closure.
Classification compares the result with ``R Id + so(n1) + so(n2)`` and, for
``n1 = n2 = 2``, the diagonally embedded ``C*``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .chart import ConformalProductChart, GaugeChoice, gauge_metric_at, geometry_jet, weyl_connection
from .curvature import weyl_curvature_at
from .tensor import EndoAtPoint, MetricAtPoint, wedge_as_endo

REDUCIBLE_GENERIC = "ReducibleGeneric"
COMPLEX_DIAGONAL = "ComplexDiagonal"
CLOSED_REDUCIBLE = "ClosedReducible"
OTHER = "Other"


class TransportError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LieAlgebraBasis:
    """Trace-orthonormal basis (``basis[k]`` is an ``n x n`` matrix)."""

    dim_ambient: int
    basis: np.ndarray
    rank_tol: float

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def _rows(self) -> np.ndarray:
        return self.basis.reshape(self.dim, self.dim_ambient**2)

    def project(self, m: np.ndarray) -> np.ndarray:
        v = np.asarray(m, float).ravel()
        Q = self._rows()
        return (Q.T @ (Q @ v)).reshape(self.dim_ambient, self.dim_ambient)

    def residual(self, m: np.ndarray) -> float:
        """Frobenius norm of the component of ``m`` outside the span."""
        return float(np.linalg.norm(np.asarray(m, float) - self.project(m)))

    def id_projection(self) -> float:
        """``|P Id| / |Id|`` for the orthogonal projection ``P`` onto the span."""
        eye = np.eye(self.dim_ambient)
        return float(np.linalg.norm(self.project(eye)) / np.linalg.norm(eye))

    def closure_residual(self) -> float:
        worst = 0.0
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                a, b = self.basis[i], self.basis[j]
                worst = max(worst, self.residual(a @ b - b @ a))
        return worst

    def orthonormality_error(self) -> float:
        Q = self._rows()
        return float(np.abs(Q @ Q.T - np.eye(self.dim)).max(initial=0.0))

    def conjugated(self, P: np.ndarray) -> "LieAlgebraBasis":
        """Span of ``P^{-1} B P`` (re-orthonormalized)."""
        Pi = np.linalg.inv(P)
        return bracket_closure([Pi @ b @ P for b in self.basis], self.rank_tol)


@dataclass(frozen=True)
class HolonomyClass:
    label: str
    dim: int
    details: str
    id_projection: float = 0.0
    skew_dim: int = 0


def _as_matrix(g) -> np.ndarray:
    return np.asarray(g.coeffs if isinstance(g, EndoAtPoint) else g, dtype=float)


def _residual(Q: list[np.ndarray], v: np.ndarray) -> np.ndarray:
    # modified Gram-Schmidt, applied twice
    r = v.copy()
    for _ in range(2):
        for q in Q:
            r -= (q @ r) * q
    return r


def bracket_closure(
    gens: Iterable, rank_tol: float = 1e-9, atol: float = 1e-12
) -> LieAlgebraBasis:
    """Lie algebra generated by ``gens``.

    The initial span keeps singular values above ``max(rank_tol * s_max, atol)``.
    Brackets of unit-norm basis elements are added when their component
    outside the current span exceeds ``rank_tol``.
    """
    mats = [_as_matrix(g) for g in gens]
    if not mats:
        return LieAlgebraBasis(0, np.zeros((0, 0, 0)), rank_tol)
    n = mats[0].shape[0]
    if any(m.shape != (n, n) for m in mats):
        raise ValueError("generators must be square matrices of one size")
    V = np.stack([m.ravel() for m in mats])
    _, s, Vt = np.linalg.svd(V, full_matrices=False)
    cut = max(rank_tol * (s[0] if s.size else 0.0), atol)
    Q: list[np.ndarray] = [Vt[k].copy() for k in range(len(s)) if s[k] > cut]

    cap = n * n
    queue = list(range(len(Q)))
    while queue and len(Q) < cap:
        i = queue.pop(0)
        A = Q[i].reshape(n, n)
        j = 0
        while j < len(Q) and len(Q) < cap:
            if j != i:
                B = Q[j].reshape(n, n)
                r = _residual(Q, (A @ B - B @ A).ravel())
                nr = np.linalg.norm(r)
                if nr > rank_tol:
                    Q.append(r / nr)
                    queue.append(len(Q) - 1)
            j += 1
    basis = np.stack(Q).reshape(len(Q), n, n) if Q else np.zeros((0, n, n))
    basis.setflags(write=False)
    return LieAlgebraBasis(n, basis, rank_tol)


def _structure_basis(n1: int, n2: int):
    """Orthonormal rows: ``Id/sqrt(n)``, then ``so(n1)``, then ``so(n2)`` units."""
    n = n1 + n2
    eye = MetricAtPoint.identity(n)
    rows = [np.eye(n).ravel() / math.sqrt(n)]
    e = np.eye(n)
    for lo, hi in ((0, n1), (n1, n)):
        for a in range(lo, hi):
            for b in range(a + 1, hi):
                rows.append(wedge_as_endo(e[a], e[b], eye).coeffs.ravel() / math.sqrt(2.0))
    return np.array(rows)


def classify_holonomy(alg: LieAlgebraBasis, n1: int, n2: int, tol: float = 1e-6) -> HolonomyClass:
    """Match an algebra, given in a frame orthonormal and adapted to the
    splitting, against the possible holonomies of conformal products."""
    n = n1 + n2
    full = n1 * (n1 - 1) // 2 + n2 * (n2 - 1) // 2
    if alg.dim == 0:
        return HolonomyClass(CLOSED_REDUCIBLE, 0, "trivial algebra", 0.0, 0)
    if alg.dim_ambient != n:
        raise ValueError(f"algebra acts on R^{alg.dim_ambient}, expected n1 + n2 = {n}")
    Q = alg._rows()
    S = _structure_basis(n1, n2)
    outside = float(np.linalg.norm(Q - (Q @ S.T) @ S, axis=1).max())
    id_proj = alg.id_projection()
    coords = Q @ S.T
    skew = coords[:, 1:]
    sv = np.linalg.svd(skew, compute_uv=False) if skew.size else np.zeros(0)
    skew_dim = int(np.sum(sv > tol))
    id_part = float(np.abs(coords[:, 0]).max())

    if outside > tol:
        return HolonomyClass(
            OTHER, alg.dim, f"not contained in R Id + so({n1}) + so({n2}) (residual {outside:.2e})",
            id_proj, skew_dim,
        )
    has_id = id_proj >= 1.0 - tol
    if has_id:
        if skew_dim == full and alg.dim == 1 + full:
            return HolonomyClass(
                REDUCIBLE_GENERIC, alg.dim, f"R*+ x SO({n1}) x SO({n2})", id_proj, skew_dim
            )
        if n1 == n2 == 2 and skew_dim == 1 and alg.dim == 2:
            _, _, vt = np.linalg.svd(skew)
            a, b = vt[0]  # components along e1^e2 and e3^e4
            if abs(abs(a) - abs(b)) <= tol:
                orient = "J+J" if a * b > 0 else "J-J"
                return HolonomyClass(
                    COMPLEX_DIAGONAL, alg.dim, f"C* (diagonal {orient})", id_proj, skew_dim
                )
        return HolonomyClass(
            OTHER, alg.dim, f"dilations plus a {skew_dim}-dimensional skew part", id_proj, skew_dim
        )
    if id_part <= tol:
        return HolonomyClass(
            CLOSED_REDUCIBLE, alg.dim, f"no dilation; {skew_dim}-dimensional subalgebra of so({n1}) + so({n2})",
            id_proj, skew_dim,
        )
    return HolonomyClass(OTHER, alg.dim, "dilation component without the dilation direction", id_proj, skew_dim)


# -- transport -------------------------------------------------------------------------


def _connection_matrix(chart, gauge, x, v) -> np.ndarray:
    Gam = weyl_connection(geometry_jet(chart, gauge, x, order=1))
    return np.einsum("kij,i->kj", Gam, v)


def parallel_transport(
    chart: ConformalProductChart,
    gauge: GaugeChoice,
    path: Sequence[Sequence[float]],
    frame: np.ndarray | None = None,
    rel_step: float = 1e-3,
) -> np.ndarray:
    """Transport the columns of ``frame`` along a polyline with classic RK4.

    Solves ``dA/ds = -Gamma(gamma'(s)) A`` with a fixed arclength step of
    ``rel_step`` times the total path length.
    """
    pts = np.asarray(path, dtype=float)
    n = chart.n
    if pts.ndim != 2 or pts.shape[1] != n or len(pts) < 2:
        raise ValueError("path must be at least two points in R^n")
    A = np.eye(n) if frame is None else np.array(frame, dtype=float)
    seg = np.diff(pts, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    total = float(lengths.sum())
    if total == 0.0:
        return A
    h_target = rel_step * total
    for start, d, L in zip(pts[:-1], seg, lengths):
        if L == 0.0:
            continue
        steps = max(1, math.ceil(L / h_target - 1e-9))
        h = L / steps
        v = d / L
        for k in range(steps):
            x = start + (k * h) * v
            k1 = -_connection_matrix(chart, gauge, x, v) @ A
            xm = x + 0.5 * h * v
            Cm = _connection_matrix(chart, gauge, xm, v)
            k2 = -Cm @ (A + 0.5 * h * k1)
            k3 = -Cm @ (A + 0.5 * h * k2)
            k4 = -_connection_matrix(chart, gauge, x + h * v, v) @ (A + h * k3)
            A = A + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(A)):
            raise TransportError(f"transport diverged on segment starting at {start}")
    return A


def square_loop(p, i: int, j: int, eps: float) -> np.ndarray:
    """Coordinate square at ``p``: first along ``e_i``, then ``e_j``."""
    p = np.asarray(p, dtype=float)
    ei = np.zeros_like(p)
    ej = np.zeros_like(p)
    ei[i] = eps
    ej[j] = eps
    return np.array([p, p + ei, p + ei + ej, p + ej, p])


def small_loop_defect(chart, gauge, p, i: int, j: int, eps: float, rel_step: float = 1e-3) -> float:
    """``|P - (Id - eps^2 R_{e_i,e_j})|`` for the transport ``P`` around :func:`square_loop`."""
    P = parallel_transport(chart, gauge, square_loop(p, i, j, eps), rel_step=rel_step)
    R = weyl_curvature_at(chart, gauge, p).endo[i, j]
    return float(np.linalg.norm(P - (np.eye(chart.n) - eps**2 * R)))


def richardson_order(chart, gauge, p, i: int, j: int, eps=(1e-2, 1e-3)) -> tuple[float, list[float]]:
    """Observed order of the small-loop defect between two loop sizes."""
    e1, e2 = eps
    d = [small_loop_defect(chart, gauge, p, i, j, e) for e in (e1, e2)]
    return math.log(d[0] / d[1]) / math.log(e1 / e2), d


# -- generators ------------------------------------------------------------------------


def _adapted_frame(chart, gauge, base) -> np.ndarray:
    return gauge_metric_at(chart, gauge, base).orthonormal_frame()


def curvature_generators(
    chart: ConformalProductChart,
    gauge: GaugeChoice,
    base,
    samples: Sequence = (),
    frame: str = "orthonormal",
    rel_step: float = 1e-3,
) -> list[EndoAtPoint]:
    """Curvature endomorphisms ``R_{e_i,e_j}`` at ``base`` and at each sample,
    the latter conjugated to ``base`` by transport along the straight segment.

    With ``frame='orthonormal'`` the matrices are expressed in the Cholesky
    frame of the gauge metric at ``base`` (adapted to the splitting).
    """
    base = np.asarray(base, dtype=float)
    n = chart.n
    mats = []
    points = [base] + [np.asarray(q, float) for q in samples if not np.allclose(q, base)]
    for idx, q in enumerate(points):
        endo = weyl_curvature_at(chart, gauge, q).endo
        if idx == 0:
            T = Ti = np.eye(n)
        else:
            T = parallel_transport(chart, gauge, [q, base], rel_step=rel_step)
            Ti = np.linalg.inv(T)
        for a in range(n):
            for b in range(a + 1, n):
                mats.append(T @ endo[a, b] @ Ti)
    if frame == "orthonormal":
        E = _adapted_frame(chart, gauge, base)
        Ei = np.linalg.inv(E)
        mats = [Ei @ m @ E for m in mats]
    elif frame != "coordinate":
        raise ValueError(f"unknown frame {frame!r}")
    return [EndoAtPoint(m) for m in mats]


def holonomy_algebra(
    chart: ConformalProductChart,
    gauge: GaugeChoice,
    base,
    samples: Sequence = (),
    rank_tol: float = 1e-9,
) -> tuple[LieAlgebraBasis, HolonomyClass]:
    gens = curvature_generators(chart, gauge, base, samples)
    alg = bracket_closure(gens, rank_tol)
    return alg, classify_holonomy(alg, chart.n1, chart.n2)


def lemma_generators(F: np.ndarray, n1: int, n2: int) -> list[np.ndarray]:
    """``[F, e_a ^ e_i]`` for all ``a`` in the first factor and ``i`` in the second.

    ``F`` is a mixed 2-form (antisymmetric coefficients, Euclidean metric),
    taken as a skew endomorphism.
    """
    n = n1 + n2
    eye = MetricAtPoint.identity(n)
    Fm = np.asarray(F, float).T  # endomorphism of the 2-form under the identity metric
    e = np.eye(n)
    out = []
    for a in range(n1):
        for i in range(n1, n):
            W = wedge_as_endo(e[a], e[i], eye).coeffs
            out.append(Fm @ W - W @ Fm)
    return out


def generation_check(F: np.ndarray, n1: int, n2: int, rank_tol: float = 1e-9) -> dict:
    alg = bracket_closure(lemma_generators(F, n1, n2), rank_tol)
    expected = n1 * (n1 - 1) // 2 + n2 * (n2 - 1) // 2
    return {
        "dim": alg.dim,
        "expected": expected,
        "flagged": n1 == n2 == 2,
        "ok": alg.dim == expected,
    }


def tolerance_sweep(gens, tols=(1e-10, 1e-9, 1e-8, 1e-7)) -> dict:
    dims = {f"{t:.0e}": bracket_closure(gens, t).dim for t in tols}
    return {"dims": dims, "stable": len(set(dims.values())) == 1}
