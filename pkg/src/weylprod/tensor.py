"""Point-level tensor algebra: metrics, 2-forms, endomorphisms and the
identification of 2-forms with skew endomorphisms.

Conventions
-----------
* ``(X ^ Y)(Z) = g(X, Z) Y - g(Y, Z) X``.
* A 2-form ``a`` corresponds to the endomorphism ``A`` with
  ``g(A Z, T) = a(Z, T)``, i.e. ``A^l_k = g^{lm} a_{km}``.
* ``<X ^ Y, Z ^ T> = g(X,Z) g(Y,T) - g(X,T) g(Y,Z)``, so for coefficient
  arrays ``<a, b> = 1/2 a_{ij} b^{ij}``.
* Weights are integer tags (powers of the length line bundle); the
  conformal structure in a gauge carries weight 2. Raising a slot with a
  metric of weight ``w`` subtracts ``w``, lowering adds ``w``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ArrayLike = np.ndarray


class WeightError(ValueError):
    """Raised when tensors of incompatible weights are combined."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_dim(*dims: int) -> int:
    if len(set(dims)) != 1:
        raise ValueError(f"dimension mismatch: {dims}")
    return dims[0]


@dataclass(frozen=True, eq=False)
class MetricAtPoint:
    coeffs: np.ndarray
    weight: int = 0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"metric must be square, got shape {c.shape}")
        scale = max(1.0, float(np.abs(c).max()))
        if np.abs(c - c.T).max() > 1e-12 * scale:
            raise ValueError("metric coefficients are not symmetric")
        c = 0.5 * (c + c.T)
        try:
            chol = np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise ValueError("metric is not positive definite") from None
        object.__setattr__(self, "coeffs", _frozen(c))
        object.__setattr__(self, "_chol", _frozen(chol))
        object.__setattr__(self, "_inv", _frozen(np.linalg.inv(c)))

    @classmethod
    def identity(cls, dim: int, weight: int = 0) -> "MetricAtPoint":
        return cls(np.eye(dim), weight)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def inverse(self) -> np.ndarray:
        return self._inv

    @property
    def cholesky(self) -> np.ndarray:
        """Lower-triangular ``L`` with ``g = L L^T``."""
        return self._chol

    def orthonormal_frame(self) -> np.ndarray:
        """Columns form a g-orthonormal frame, ``E^T g E = I`` (from Cholesky)."""
        return np.linalg.inv(self._chol).T

    def inner(self, x, y) -> float:
        return float(np.asarray(x) @ self.coeffs @ np.asarray(y))


@dataclass(frozen=True, eq=False)
class TwoFormAtPoint:
    """Antisymmetric coefficients ``a_{ij} = a(e_i, e_j)``.

    Only the strict lower triangle of the input is kept and mirrored.
    """

    coeffs: np.ndarray
    weight: int = 0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"2-form must be square, got shape {c.shape}")
        scale = max(1.0, float(np.abs(c).max()))
        if np.abs(c + c.T).max() > 1e-9 * scale:
            raise ValueError("2-form coefficients are not antisymmetric")
        low = np.tril(c, -1)
        object.__setattr__(self, "coeffs", _frozen(low - low.T))

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def wedge(cls, x, y, weight: int = 0) -> "TwoFormAtPoint":
        """``x ^ y`` for covectors ``x``, ``y``."""
        x, y = np.asarray(x, float), np.asarray(y, float)
        return cls(np.outer(x, y) - np.outer(y, x), weight)


@dataclass(frozen=True, eq=False)
class EndoAtPoint:
    """Endomorphism with matrix ``coeffs[l, k] = A^l_k``."""

    coeffs: np.ndarray
    weight: int = 0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"endomorphism must be square, got shape {c.shape}")
        object.__setattr__(self, "coeffs", _frozen(c))

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def __add__(self, other: "EndoAtPoint") -> "EndoAtPoint":
        _check_dim(self.dim, other.dim)
        if self.weight != other.weight:
            raise WeightError(f"cannot add weights {self.weight} and {other.weight}")
        return EndoAtPoint(self.coeffs + other.coeffs, self.weight)

    def __sub__(self, other: "EndoAtPoint") -> "EndoAtPoint":
        _check_dim(self.dim, other.dim)
        if self.weight != other.weight:
            raise WeightError(f"cannot subtract weights {self.weight} and {other.weight}")
        return EndoAtPoint(self.coeffs - other.coeffs, self.weight)

    def scaled(self, s: float) -> "EndoAtPoint":
        return EndoAtPoint(s * self.coeffs, self.weight)

    def __call__(self, z) -> np.ndarray:
        return self.coeffs @ np.asarray(z, float)

    def is_skew(self, g: MetricAtPoint, tol: float = 1e-10) -> bool:
        """True when ``g(A X, Y) = -g(X, A Y)``."""
        m = g.coeffs @ self.coeffs
        return bool(np.abs(m + m.T).max() <= tol * max(1.0, np.abs(m).max()))


@dataclass(frozen=True, eq=False)
class PointTensor:
    """Dense tensor at a point; ``variance[k]`` is ``'u'`` (contravariant) or
    ``'d'`` (covariant) for slot ``k``."""

    coeffs: np.ndarray
    variance: tuple[str, ...]
    weight: int = 0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        var = tuple(self.variance)
        if c.ndim != len(var):
            raise ValueError(f"arity {c.ndim} does not match variance {var}")
        if c.ndim > 4:
            raise ValueError("tensors of arity > 4 are not supported")
        if any(v not in ("u", "d") for v in var):
            raise ValueError(f"variance entries must be 'u' or 'd', got {var}")
        if len(set(c.shape)) > 1:
            raise ValueError(f"all slots must share one dimension, got {c.shape}")
        object.__setattr__(self, "coeffs", _frozen(c))
        object.__setattr__(self, "variance", var)

    @property
    def arity(self) -> int:
        return len(self.variance)

    def __mul__(self, other: "PointTensor") -> "PointTensor":
        """Tensor product; weights add."""
        if self.arity + other.arity > 4:
            raise ValueError("tensors of arity > 4 are not supported")
        if self.arity and other.arity:
            _check_dim(self.coeffs.shape[0], other.coeffs.shape[0])
        return PointTensor(
            np.multiply.outer(self.coeffs, other.coeffs),
            self.variance + other.variance,
            self.weight + other.weight,
        )


# -- operations ------------------------------------------------------------------


def wedge_as_endo(x, y, g: MetricAtPoint) -> EndoAtPoint:
    """The g-skew endomorphism ``Z -> g(x, Z) y - g(y, Z) x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_dim(len(x), len(y), g.dim)
    gx = g.coeffs @ x
    gy = g.coeffs @ y
    return EndoAtPoint(np.outer(y, gx) - np.outer(x, gy), g.weight)


def two_form_commutator(a: EndoAtPoint, b: EndoAtPoint) -> EndoAtPoint:
    """Matrix commutator ``ab - ba``; weights add."""
    _check_dim(a.dim, b.dim)
    A, B = a.coeffs, b.coeffs
    return EndoAtPoint(A @ B - B @ A, a.weight + b.weight)


def form_to_endo(a: TwoFormAtPoint, g: MetricAtPoint) -> EndoAtPoint:
    _check_dim(a.dim, g.dim)
    return EndoAtPoint(g.inverse @ a.coeffs.T, a.weight - g.weight)


def endo_to_form(e: EndoAtPoint, g: MetricAtPoint) -> TwoFormAtPoint:
    """Inverse of :func:`form_to_endo`; ``e`` must be g-skew."""
    _check_dim(e.dim, g.dim)
    return TwoFormAtPoint((g.coeffs @ e.coeffs).T, e.weight + g.weight)


def raise_form(a: TwoFormAtPoint, g: MetricAtPoint) -> np.ndarray:
    """Bivector components ``a^{ij} = g^{ik} g^{jl} a_{kl}``."""
    gi = g.inverse
    return gi @ a.coeffs @ gi.T


def form_inner(a: TwoFormAtPoint, b: TwoFormAtPoint, g: MetricAtPoint) -> float:
    _check_dim(a.dim, b.dim, g.dim)
    return 0.5 * float(np.sum(a.coeffs * raise_form(b, g)))


def form_norm2(a: TwoFormAtPoint, g: MetricAtPoint) -> float:
    return form_inner(a, a, g)


def raise_lower(t: PointTensor, g: MetricAtPoint, slot: int, direction: str) -> PointTensor:
    """Contract ``slot`` with ``g^{-1}`` (``direction='up'``) or ``g`` (``'down'``)."""
    if not 0 <= slot < t.arity:
        raise IndexError(f"slot {slot} out of range for arity {t.arity}")
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    _check_dim(t.coeffs.shape[slot], g.dim)
    want = "u" if direction == "up" else "d"
    if t.variance[slot] == want:
        raise ValueError(f"slot {slot} is already {'contravariant' if want == 'u' else 'covariant'}")
    m = g.inverse if direction == "up" else g.coeffs
    c = np.moveaxis(np.tensordot(m, t.coeffs, axes=([1], [slot])), 0, slot)
    var = list(t.variance)
    var[slot] = want
    dw = -g.weight if direction == "up" else g.weight
    return PointTensor(c, tuple(var), t.weight + dw)


def eq_expansion(x1, y1, x2, y2, g: MetricAtPoint) -> EndoAtPoint:
    """Four-term expansion of ``[x1^y1, x2^y2]`` via inner products."""
    ip = g.inner
    w = lambda a, b: wedge_as_endo(a, b, g).coeffs  # noqa: E731
    c = (
        ip(x1, x2) * w(y1, y2)
        + ip(y1, y2) * w(x1, x2)
        - ip(y1, x2) * w(x1, y2)
        - ip(x1, y2) * w(y1, x2)
    )
    return EndoAtPoint(c, 2 * g.weight)


def commutator_identity_error(x1, y1, x2, y2, g: MetricAtPoint) -> float:
    """Distance between ``[x1^y1, x2^y2]`` and :func:`eq_expansion`, relative to
    ``|x1^y1| |x2^y2|`` (Frobenius), which bounds the commutator up to a factor 2."""
    a = wedge_as_endo(x1, y1, g)
    b = wedge_as_endo(x2, y2, g)
    scale = float(np.linalg.norm(a.coeffs) * np.linalg.norm(b.coeffs))
    if scale == 0.0:
        return 0.0
    diff = two_form_commutator(a, b).coeffs - eq_expansion(x1, y1, x2, y2, g).coeffs
    return float(np.linalg.norm(diff)) / scale
