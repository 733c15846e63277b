"""Finite-difference relaxation for the Toda-type equation

    e^{2f} (f_11 + f_22) + f_33 + f_44 = 0

on a rectangular 4-dimensional grid with Dirichlet boundary values.

Each nodal update solves the central-difference equation for the node value
with ``e^{2f}`` frozen at the current iterate (Picard linearization), then
over-relaxes by ``omega``. Sweeps run lexicographically (deterministic) or
in red-black order (parallel, still deterministic).
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numba
import numpy as np

# prefer OpenMP; probing an outdated TBB only produces a warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_LEX = "lex"
_REDBLACK = "redblack"


@dataclass(frozen=True, eq=False)
class TodaGrid:
    """Node values over ``origin + index * spacing``; boundary nodes hold the
    Dirichlet data."""

    values: np.ndarray
    spacing: tuple[float, float, float, float]
    origin: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 4:
            raise ValueError(f"grid values must be 4-dimensional, got shape {v.shape}")
        if min(v.shape) < 3:
            raise ValueError(f"need at least 3 nodes per axis, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        sp = tuple(float(h) for h in np.broadcast_to(self.spacing, (4,)))
        if min(sp) <= 0:
            raise ValueError("spacing must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "spacing", sp)
        object.__setattr__(self, "origin", tuple(float(o) for o in np.broadcast_to(self.origin, (4,))))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def axis(self, k: int) -> np.ndarray:
        return self.origin[k] + self.spacing[k] * np.arange(self.shape[k])

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*(self.axis(k) for k in range(4)), indexing="ij")

    def upper(self) -> tuple[float, ...]:
        return tuple(self.origin[k] + self.spacing[k] * (self.shape[k] - 1) for k in range(4))

    def interior(self) -> tuple[slice, ...]:
        return (slice(1, -1),) * 4

    def boundary_mask(self) -> np.ndarray:
        m = np.ones(self.shape, dtype=bool)
        m[self.interior()] = False
        return m

    @classmethod
    def from_function(
        cls,
        fn: Callable[..., np.ndarray],
        shape: Sequence[int],
        spacing,
        origin=(0.0, 0.0, 0.0, 0.0),
        initial: float = 0.0,
    ) -> "TodaGrid":
        """Boundary from ``fn(x1, x2, x3, x4)`` (vectorized), interior set to ``initial``."""
        probe = cls(np.zeros(tuple(shape)), spacing, origin)
        vals = np.asarray(fn(*probe.mesh()), dtype=float) * np.ones(probe.shape)
        vals[probe.interior()] = initial
        return cls(vals, probe.spacing, probe.origin)

    def with_values(self, values: np.ndarray) -> "TodaGrid":
        return replace(self, values=values)


@dataclass
class TodaResult:
    grid: TodaGrid
    converged: bool
    history: list[float]
    sweeps: int
    elapsed: float = 0.0
    best_sweep: int = 0
    mode: str = _LEX
    omega: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return self.history[self.best_sweep - 1] if self.history else math.inf


# -- kernels ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _node_update(f, i, j, k, l, a1, a2, a3, a4, omega):
    E = math.exp(2.0 * f[i, j, k, l])
    s12 = a1 * (f[i + 1, j, k, l] + f[i - 1, j, k, l]) + a2 * (f[i, j + 1, k, l] + f[i, j - 1, k, l])
    s34 = a3 * (f[i, j, k + 1, l] + f[i, j, k - 1, l]) + a4 * (f[i, j, k, l + 1] + f[i, j, k, l - 1])
    diag = 2.0 * E * (a1 + a2) + 2.0 * (a3 + a4)
    star = (E * s12 + s34) / diag
    f[i, j, k, l] += omega * (star - f[i, j, k, l])


@numba.njit(cache=True)
def _sweep_lex(f, a1, a2, a3, a4, omega):
    n1, n2, n3, n4 = f.shape
    for i in range(1, n1 - 1):
        for j in range(1, n2 - 1):
            for k in range(1, n3 - 1):
                for l in range(1, n4 - 1):
                    _node_update(f, i, j, k, l, a1, a2, a3, a4, omega)


@numba.njit(cache=True, parallel=True)
def _sweep_color(f, a1, a2, a3, a4, omega, color):
    n1, n2, n3, n4 = f.shape
    for i in numba.prange(1, n1 - 1):
        for j in range(1, n2 - 1):
            for k in range(1, n3 - 1):
                start = 1 + ((i + j + k + 1 + color) % 2)
                for l in range(start, n4 - 1, 2):
                    _node_update(f, i, j, k, l, a1, a2, a3, a4, omega)


@numba.njit(cache=True, parallel=True)
def _residual_field(f, a1, a2, a3, a4, out):
    n1, n2, n3, n4 = f.shape
    for i in numba.prange(1, n1 - 1):
        for j in range(1, n2 - 1):
            for k in range(1, n3 - 1):
                for l in range(1, n4 - 1):
                    c = 2.0 * f[i, j, k, l]
                    d1 = a1 * (f[i + 1, j, k, l] - c + f[i - 1, j, k, l])
                    d2 = a2 * (f[i, j + 1, k, l] - c + f[i, j - 1, k, l])
                    d3 = a3 * (f[i, j, k + 1, l] - c + f[i, j, k - 1, l])
                    d4 = a4 * (f[i, j, k, l + 1] - c + f[i, j, k, l - 1])
                    out[i, j, k, l] = math.exp(c) * (d1 + d2) + d3 + d4


def _coeffs(grid: TodaGrid) -> tuple[float, ...]:
    return tuple(1.0 / h**2 for h in grid.spacing)


def discrete_residual(grid: TodaGrid) -> np.ndarray:
    """Central-difference Toda residual at every node (zero on the boundary)."""
    out = np.zeros(grid.shape)
    _residual_field(np.ascontiguousarray(grid.values), *_coeffs(grid), out)
    return out


def toda_solve(
    grid: TodaGrid,
    omega: float = 1.0,
    tol: float = 1e-10,
    max_iters: int = 10_000,
    mode: str = _LEX,
    threads: int | None = None,
) -> TodaResult:
    """Relax the interior of ``grid`` until the max nodal residual drops below ``tol``.

    Parameters
    ----------
    omega : float
        Relaxation factor in ``(0, 2)``; 1 is plain nonlinear Gauss-Seidel.
    mode : {'lex', 'redblack'}
    threads : int, optional
        Cap on numba worker threads (red-black sweeps and residuals).

    Returns
    -------
    TodaResult
        ``grid`` holds the iterate with the smallest residual; ``converged``
        is false when ``max_iters`` sweeps did not reach ``tol``.
    """
    if not 0.0 < omega < 2.0:
        raise ValueError(f"omega must lie in (0, 2), got {omega}")
    if max_iters < 1:
        raise ValueError("max_iters must be positive")
    if mode not in (_LEX, _REDBLACK):
        raise ValueError(f"unknown sweep mode {mode!r}")
    if threads is not None:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    a = _coeffs(grid)
    f = np.array(grid.values, dtype=np.float64, order="C")
    r = np.zeros_like(f)
    history: list[float] = []
    best, best_val, best_sweep = f.copy(), math.inf, 0
    converged = False
    t0 = time.perf_counter()
    for sweep in range(1, max_iters + 1):
        if mode == _LEX:
            _sweep_lex(f, *a, omega)
        else:
            _sweep_color(f, *a, omega, 0)
            _sweep_color(f, *a, omega, 1)
        if not np.all(np.isfinite(f[grid.interior()])):
            break
        _residual_field(f, *a, r)
        res = float(np.abs(r).max())
        history.append(res)
        if res < best_val:
            best_val, best_sweep = res, sweep
            best[...] = f
        if res < tol:
            converged = True
            break
    return TodaResult(
        grid=grid.with_values(best),
        converged=converged,
        history=history,
        sweeps=len(history),
        elapsed=time.perf_counter() - t0,
        best_sweep=best_sweep,
        mode=mode,
        omega=omega,
    )


# -- off-node evaluation ---------------------------------------------------------------


def _catmull_rom(t: float, h: float):
    """Weights on nodes ``i-1 .. i+2`` for value, first and second derivative."""
    t2, t3 = t * t, t * t * t
    w0 = 0.5 * np.array([-t + 2 * t2 - t3, 2 - 5 * t2 + 3 * t3, t + 4 * t2 - 3 * t3, -t2 + t3])
    w1 = 0.5 * np.array([-1 + 4 * t - 3 * t2, -10 * t + 9 * t2, 1 + 8 * t - 9 * t2, -2 * t + 3 * t2]) / h
    w2 = 0.5 * np.array([4 - 6 * t, -10 + 18 * t, 8 - 18 * t, -2 + 6 * t]) / h**2
    return w0, w1, w2


def _pad_quadratic(v: np.ndarray) -> np.ndarray:
    out = np.pad(v, 1)
    for ax in range(v.ndim):
        src = [slice(None)] * v.ndim
        for ghost, a, b, c in ((0, 1, 2, 3), (-1, -2, -3, -4)):
            def at(k):
                idx = list(src)
                idx[ax] = k
                return out[tuple(idx)]
            idx = list(src)
            idx[ax] = ghost
            out[tuple(idx)] = 3 * at(a) - 3 * at(b) + at(c)
        # later axes see the ghosts filled so far, which covers the corners
    return out


class GridField:
    """Separable Catmull-Rom interpolant of a :class:`TodaGrid`.

    Quacks like :class:`~weylprod.expr.ScalarField` for ``jet``/``eval`` so a
    solved grid can be fed to the curvature pipeline. Ghost nodes outside the
    grid are quadratic extrapolations, so second derivatives stay meaningful
    in boundary cells.
    """

    nvars = 4

    def __init__(self, grid: TodaGrid):
        self.grid = grid
        self._padded = _pad_quadratic(grid.values)

    def _locate(self, p):
        g = self.grid
        idx, ws = [], []
        for k in range(4):
            s = (float(p[k]) - g.origin[k]) / g.spacing[k]
            i = min(max(int(math.floor(s)), 0), g.shape[k] - 2)
            idx.append(i)
            ws.append(_catmull_rom(s - i, g.spacing[k]))
        # padded index of node i-1 is i
        block = self._padded[tuple(slice(i, i + 4) for i in idx)]
        return block, ws

    def jet(self, p, order: int = 2):
        block, ws = self._locate(p)

        def contract(which):
            return float(np.einsum("abcd,a,b,c,d->", block, *(ws[k][which[k]] for k in range(4))))

        val = contract((0, 0, 0, 0))
        if order == 0:
            return val, None, None
        grad = np.zeros(4)
        for k in range(4):
            grad[k] = contract(tuple(1 if m == k else 0 for m in range(4)))
        hess = None
        if order >= 2:
            hess = np.zeros((4, 4))
            for k in range(4):
                for m in range(k, 4):
                    sel = [0] * 4
                    if k == m:
                        sel[k] = 2
                    else:
                        sel[k] = sel[m] = 1
                    hess[k, m] = hess[m, k] = contract(tuple(sel))
        return val, grad, hess

    def eval(self, p) -> float:
        return self.jet(p, 0)[0]

    __call__ = eval

    def is_zero(self) -> bool:
        return not np.any(self.grid.values)

    def variables(self) -> frozenset[int]:
        return frozenset(range(1, 5))

    def __str__(self) -> str:
        return f"<grid field {self.grid.shape}>"


# -- convergence -----------------------------------------------------------------------


def observed_order(errors: Sequence[float], spacings: Sequence[float]) -> float:
    """``log(e_1/e_2) / log(h_1/h_2)`` from two refinement levels."""
    (e1, e2), (h1, h2) = errors[:2], spacings[:2]
    if e1 <= 0 or e2 <= 0:
        return math.nan
    return math.log(e1 / e2) / math.log(h1 / h2)


def interior_error(grid: TodaGrid, exact: Callable[..., np.ndarray]) -> float:
    diff = grid.values - np.asarray(exact(*grid.mesh()), float)
    return float(np.abs(diff[grid.interior()]).max())


# -- files -----------------------------------------------------------------------------


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def save_grid(grid: TodaGrid, path: str | os.PathLike) -> Path:
    """Write node values (``.csv`` text or raw little-endian float64 otherwise)
    plus a JSON sidecar ``<path>.json`` with shape, spacing and origin."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        np.savetxt(path, grid.values.reshape(-1, 1), delimiter=",", fmt="%.17g")
    else:
        grid.values.astype("<f8").tofile(path)
    meta = {"shape": list(grid.shape), "spacing": list(grid.spacing), "origin": list(grid.origin)}
    _sidecar(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def load_grid(path: str | os.PathLike) -> TodaGrid:
    path = Path(path)
    meta = json.loads(_sidecar(path).read_text())
    shape = tuple(int(s) for s in meta["shape"])
    if path.suffix.lower() == ".csv":
        vals = np.loadtxt(path, delimiter=",", dtype=float).reshape(shape)
    else:
        vals = np.fromfile(path, dtype="<f8").reshape(shape)
    return TodaGrid(vals, tuple(meta["spacing"]), tuple(meta.get("origin", (0.0,) * 4)))


def write_history_csv(history: Sequence[float], path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write("sweep,max_residual\n")
        for k, r in enumerate(history, 1):
            fh.write(f"{k},{r:.17g}\n")


def grid_chart(grid: TodaGrid):
    """Flat ``(2, 2)`` chart whose warping function interpolates ``grid``."""
    from .chart import ConformalProductChart

    dom = [[grid.origin[k], grid.upper()[k]] for k in range(4)]
    return ConformalProductChart(2, 2, GridField(grid), domain=dom)
