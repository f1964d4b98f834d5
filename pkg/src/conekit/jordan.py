"""Euclidean Jordan algebras, their symmetric cones and quadratic representations.

Elements are stored as coordinates in an orthonormal basis for the trace
inner product ``<x, y> = tr(x o y)``.  The array-level methods of
:class:`JordanAlgebra` accept arbitrary leading batch dimensions (the last
axis is the coordinate axis); the module-level functions work on
:class:`Element` and :class:`ConeOperator` values.

Supported simple algebras:

* ``SymMatrix(r)``   real symmetric r x r matrices, n = r(r+1)/2, d = 1
* ``HermComplex(r)`` complex Hermitian r x r matrices, n = r^2, d = 2
* ``SpinFactor(n)``  R x R^(n-1) with (x1, xb) o (y1, yb) = (x1 y1 + xb.yb, x1 yb + y1 xb),
  rank 2, d = n - 2

Rank-one algebras (``SymMatrix(1)``, ``HermComplex(1)``) are the real line with d = 0.

For the spin factor the trace form is ``2 (x1 y1 + xb.yb)``, so coordinates
are ``sqrt(2)`` times the natural components; use :meth:`JordanAlgebra.to_natural`
and :meth:`JordanAlgebra.from_natural` to convert.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    AlgebraMismatch,
    ConvergenceFailure,
    InvalidSize,
    NotAFrame,
    NotInCone,
    SingularElement,
    UnsupportedAlgebra,
)

SQRT2 = math.sqrt(2.0)
DEFAULT_TOL = 1e-9


class Kind(str, enum.Enum):
    SYM = "SymMatrix"
    HERM = "HermComplex"
    SPIN = "SpinFactor"


class ConeClass(str, enum.Enum):
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"
    OUTSIDE = "Outside"


_ALIASES = {
    "symmatrix": Kind.SYM, "sym": Kind.SYM, "s": Kind.SYM, "symmetric": Kind.SYM,
    "hermcomplex": Kind.HERM, "herm": Kind.HERM, "hermitian": Kind.HERM, "h": Kind.HERM,
    "spinfactor": Kind.SPIN, "spin": Kind.SPIN, "lorentz": Kind.SPIN,
}
_UNSUPPORTED = {
    "hermquaternion", "quaternion", "quat", "hermoctonion", "octonion",
    "albert", "exceptional",
}


def _parse_kind(kind) -> Kind:
    if isinstance(kind, Kind):
        return kind
    key = str(kind).strip().lower().replace("_", "").replace("-", "")
    if key in _UNSUPPORTED:
        raise UnsupportedAlgebra(f"algebra kind {kind!r} is not implemented")
    try:
        return _ALIASES[key]
    except KeyError:
        raise UnsupportedAlgebra(f"unknown algebra kind {kind!r}") from None


class JordanAlgebra:
    """A simple Euclidean Jordan algebra with a fixed orthonormal basis.

    Instances are cached by :func:`make_algebra`, so identity comparison works,
    but equality is by ``(kind, size)`` anyway.
    """

    def __init__(self, kind: Kind, size: int):
        self.kind = kind
        self.size = size
        if kind is Kind.SPIN:
            self.n, self.r, self.d = size, 2, size - 2
        else:
            r = size
            self.r = r
            self.n = r * (r + 1) // 2 if kind is Kind.SYM else r * r
            self.d = 0 if r == 1 else (1 if kind is Kind.SYM else 2)
            self._iu = np.triu_indices(r, 1)
        self.identity = self.from_natural(self._natural_identity())
        self.identity.setflags(write=False)
        eye = np.eye(self.n)
        # S[i, j, k] = (b_i o b_j)_k
        S = self.product(eye[:, None, :], eye[None, :, :])
        S[np.abs(S) < 1e-15] = 0.0
        self.struct = S
        self.struct.setflags(write=False)

    # -- descriptors --------------------------------------------------------
    def __repr__(self):
        return f"{self.kind.value}({self.size})"

    def __eq__(self, other):
        return isinstance(other, JordanAlgebra) and (self.kind, self.size) == (other.kind, other.size)

    def __hash__(self):
        return hash((self.kind, self.size))

    def descriptor(self) -> dict:
        return {"kind": self.kind.value, "size": self.size, "n": self.n, "r": self.r, "d": self.d}

    @property
    def is_matrix(self) -> bool:
        return self.kind is not Kind.SPIN

    @property
    def dtype(self):
        return complex if self.kind is Kind.HERM else float

    # -- natural representation --------------------------------------------
    def _natural_identity(self):
        if self.kind is Kind.SPIN:
            v = np.zeros(self.n)
            v[0] = 1.0
            return v
        return np.eye(self.r, dtype=self.dtype)

    def to_natural(self, x) -> np.ndarray:
        """Coordinates -> matrix (matrix kinds) or (x1, xb) vector (spin factor)."""
        x = np.asarray(x, dtype=float)
        if self.kind is Kind.SPIN:
            return x / SQRT2
        r = self.r
        i0, i1 = self._iu
        m = len(i0)
        M = np.zeros(x.shape[:-1] + (r, r), dtype=self.dtype)
        idx = np.arange(r)
        M[..., idx, idx] = x[..., :r]
        if self.kind is Kind.SYM:
            off = x[..., r:] / SQRT2
        else:
            off = (x[..., r:r + m] + 1j * x[..., r + m:]) / SQRT2
        M[..., i0, i1] = off
        M[..., i1, i0] = np.conj(off)
        return M

    def from_natural(self, M) -> np.ndarray:
        """Inverse of :meth:`to_natural`; the input is symmetrised first."""
        if self.kind is Kind.SPIN:
            return np.asarray(M, dtype=float) * SQRT2
        M = np.asarray(M)
        r = self.r
        i0, i1 = self._iu
        idx = np.arange(r)
        diag = np.real(M[..., idx, idx])
        off = 0.5 * (M[..., i0, i1] + np.conj(M[..., i1, i0]))
        if self.kind is Kind.SYM:
            return np.concatenate([diag, SQRT2 * np.real(off)], axis=-1).astype(float)
        return np.concatenate([diag, SQRT2 * off.real, SQRT2 * off.imag], axis=-1)

    # -- bilinear structure -------------------------------------------------
    def product(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind is Kind.SPIN:
            x, y = np.broadcast_arrays(x, y)
            out = np.empty(x.shape)
            out[..., 0] = np.sum(x * y, axis=-1)
            out[..., 1:] = x[..., :1] * y[..., 1:] + y[..., :1] * x[..., 1:]
            return out / SQRT2
        X, Y = self.to_natural(x), self.to_natural(y)
        return self.from_natural(0.5 * (X @ Y + Y @ X))

    def inner(self, x, y) -> np.ndarray:
        return np.sum(np.asarray(x, dtype=float) * np.asarray(y, dtype=float), axis=-1)

    def norm(self, x) -> np.ndarray:
        return np.sqrt(self.inner(x, x))

    def trace(self, x) -> np.ndarray:
        return self.inner(x, self.identity)

    def lmat(self, x) -> np.ndarray:
        """Matrix of L(x): y -> x o y."""
        return np.einsum("...i,ijk->...kj", np.asarray(x, dtype=float), self.struct)

    def pmat(self, x) -> np.ndarray:
        """Matrix of the quadratic representation P(x) = 2 L(x)^2 - L(x^2)."""
        L = self.lmat(x)
        return 2.0 * L @ L - self.lmat(self.product(x, x))

    def pmat2(self, x, y) -> np.ndarray:
        """Matrix of P(x, y) = L(x)L(y) + L(y)L(x) - L(x o y)."""
        Lx, Ly = self.lmat(x), self.lmat(y)
        return Lx @ Ly + Ly @ Lx - self.lmat(self.product(x, y))

    def quad(self, x, y) -> np.ndarray:
        """P(x) y without forming the matrix: 2 x o (x o y) - x^2 o y."""
        xy = self.product(x, y)
        return 2.0 * self.product(x, xy) - self.product(self.product(x, x), y)

    # -- spectral theory ------------------------------------------------------
    def eigvals(self, x) -> np.ndarray:
        """Eigenvalues in descending order, shape (..., r)."""
        x = np.asarray(x, dtype=float)
        _check_finite(x)
        if self.r <= 2:
            return self._eig_low_rank(x)[0]
        try:
            w = np.linalg.eigvalsh(self.to_natural(x))
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(str(exc)) from exc
        return w[..., ::-1]

    def min_eig(self, x) -> np.ndarray:
        return self.eigvals(x)[..., -1]

    def _eig_low_rank(self, x, frames: bool = False):
        # rank one: V = R e.  Rank two: x - (tr/2) e has eigenvalues +-g, so
        # lambda = tr/2 +- g and p = e/2 +- (x - (tr/2) e) / (2g).
        if self.r == 1:
            lam = x / self.identity[0]
            return lam, (np.broadcast_to(self.identity, x.shape + (1,)).copy() if frames else None)
        half_tr = 0.5 * self.trace(x)
        z = x - half_tr[..., None] * self.identity
        g = np.linalg.norm(z, axis=-1) / SQRT2
        lam = np.stack([half_tr + g, half_tr - g], axis=-1)
        if not frames:
            return lam, None
        scale = np.maximum(np.linalg.norm(x, axis=-1), 1e-300)
        small = g <= 1e-14 * scale
        direction = z / np.where(small, 1.0, 2.0 * g)[..., None]
        can = self.canonical_frame()
        direction = np.where(small[..., None], can[0] - 0.5 * self.identity, direction)
        p1 = 0.5 * self.identity + direction
        p2 = 0.5 * self.identity - direction
        return lam, np.stack([p1, p2], axis=-2)

    def eigh(self, x):
        """Eigenvalues (descending) and a Jordan frame, shapes (..., r) and (..., r, n)."""
        x = np.asarray(x, dtype=float)
        _check_finite(x)
        if self.r <= 2:
            return self._eig_low_rank(x, frames=True)
        try:
            w, V = np.linalg.eigh(self.to_natural(x))
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(str(exc)) from exc
        w, V = w[..., ::-1], V[..., ::-1]
        # p_i = v_i v_i^*
        proj = np.einsum("...ai,...bi->...iab", V, np.conj(V))
        return w, self.from_natural(proj)

    def apply(self, x, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Spectral calculus: sum_i f(lambda_i) p_i."""
        lam, frame = self.eigh(x)
        return np.einsum("...i,...ik->...k", f(lam), frame)

    def det(self, x) -> np.ndarray:
        return np.prod(self.eigvals(x), axis=-1)

    def inv(self, x, tol: float = DEFAULT_TOL) -> np.ndarray:
        lam, frame = self.eigh(x)
        scale = np.max(np.abs(lam), axis=-1, keepdims=True)
        if np.any(np.abs(lam) <= tol * scale) or np.any(scale == 0):
            raise SingularElement("element is not invertible")
        return np.einsum("...i,...ik->...k", 1.0 / lam, frame)

    def sqrt(self, x, tol: float = DEFAULT_TOL) -> np.ndarray:
        lam, frame = self.eigh(x)
        scale = np.max(np.abs(lam), axis=-1, keepdims=True)
        if np.any(lam < -tol * scale):
            raise NotInCone("square root needs an element of the closed cone")
        return np.einsum("...i,...ik->...k", np.sqrt(np.clip(lam, 0.0, None)), frame)

    def project_cone(self, x) -> np.ndarray:
        """Nearest point of the closed cone (eigenvalue clipping)."""
        return self.apply(x, lambda lam: np.clip(lam, 0.0, None))

    def classify(self, x, tol: float = DEFAULT_TOL) -> np.ndarray:
        """Integer classes: 1 interior, 0 boundary, -1 outside."""
        lam = self.eigvals(x)
        scale = np.max(np.abs(lam), axis=-1)
        lo = lam[..., -1]
        out = np.where(lo > tol * scale, 1, np.where(lo >= -tol * scale, 0, -1))
        return np.where(scale == 0, 0, out)

    def minors(self, x) -> np.ndarray:
        """Principal minors Delta_1 .. Delta_r relative to the canonical frame."""
        x = np.asarray(x, dtype=float)
        if self.kind is Kind.SPIN:
            v = x / SQRT2
            d1 = v[..., 0] + v[..., 1]
            d2 = v[..., 0] ** 2 - np.sum(v[..., 1:] ** 2, axis=-1)
            return np.stack([d1, d2], axis=-1)
        M = self.to_natural(x)
        return np.stack([np.real(np.linalg.det(M[..., :k, :k])) for k in range(1, self.r + 1)], axis=-1)

    # -- frames and random elements ----------------------------------------
    def canonical_frame(self) -> np.ndarray:
        if self.kind is Kind.SPIN:
            p = np.zeros((2, self.n))
            p[:, 0] = 0.5
            p[0, 1], p[1, 1] = 0.5, -0.5
            return p * SQRT2
        r = self.r
        P = np.zeros((r, r, r), dtype=self.dtype)
        P[np.arange(r), np.arange(r), np.arange(r)] = 1.0
        return self.from_natural(P)

    def haar(self, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
        """Haar-distributed orthogonal automorphisms in the natural picture.

        Returns unitary r x r matrices (matrix kinds) or orthogonal
        (n-1) x (n-1) rotations of the vector part (spin factor).
        """
        shape = () if count is None else (count,)
        m = self.n - 1 if self.kind is Kind.SPIN else self.r
        Z = rng.standard_normal(shape + (m, m))
        if self.kind is Kind.HERM:
            Z = (Z + 1j * rng.standard_normal(shape + (m, m))) / SQRT2
        Q, R = np.linalg.qr(Z)
        ph = np.diagonal(R, axis1=-2, axis2=-1)
        ph = ph / np.abs(ph)
        return Q * ph[..., None, :]

    def act(self, g: np.ndarray, x) -> np.ndarray:
        """Apply automorphisms returned by :meth:`haar` to coordinates."""
        x = np.asarray(x, dtype=float)
        if self.kind is Kind.SPIN:
            out = np.empty(np.broadcast_shapes(x.shape, g.shape[:-2] + (self.n,)))
            out[..., 0] = x[..., 0]
            out[..., 1:] = np.einsum("...ij,...j->...i", g, x[..., 1:])
            return out
        X = self.to_natural(x)
        return self.from_natural(g @ X @ np.conj(np.swapaxes(g, -1, -2)))

    def random_frame(self, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
        g = self.haar(rng, count)
        if count is not None:
            g = g[:, None]
        return self.act(g, self.canonical_frame())

    def random_cone(self, rng: np.random.Generator, count: int | None = None,
                    low: float = 0.1, high: float = 2.0) -> np.ndarray:
        """Interior elements with eigenvalues uniform on [low, high] in a Haar frame."""
        frame = self.random_frame(rng, count)
        shape = (self.r,) if count is None else (count, self.r)
        lam = rng.uniform(low, high, size=shape)
        return np.einsum("...i,...ik->...k", lam, frame)

    def random(self, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
        shape = (self.n,) if count is None else (count, self.n)
        return rng.standard_normal(shape)

    # -- Element helpers ------------------------------------------------------
    def element(self, coords) -> "Element":
        return Element(self, coords)

    def natural_element(self, M) -> "Element":
        return Element(self, self.from_natural(M))

    @property
    def e(self) -> "Element":
        return Element(self, self.identity)

    @property
    def zero(self) -> "Element":
        return Element(self, np.zeros(self.n))


def _check_finite(x):
    if not np.all(np.isfinite(x)):
        raise ConvergenceFailure("non-finite coordinates")


@functools.lru_cache(maxsize=None)
def _make(kind: Kind, size: int) -> JordanAlgebra:
    return JordanAlgebra(kind, size)


def make_algebra(kind, size: int) -> JordanAlgebra:
    """Build (or fetch the cached) algebra of the given kind and size.

    >>> make_algebra("SymMatrix", 2).n
    3
    """
    k = _parse_kind(kind)
    if isinstance(size, bool) or int(size) != size:
        raise InvalidSize(f"size must be an integer, got {size!r}")
    size = int(size)
    if k is Kind.SPIN and size < 3:
        raise InvalidSize("SpinFactor needs size >= 3")
    if size < 1:
        raise InvalidSize("matrix algebras need size >= 1")
    return _make(k, size)


def parse_algebra(text: str) -> JordanAlgebra:
    """Parse ``kind:size`` (e.g. ``sym:3``, ``spin:4``) or a descriptor dict."""
    if isinstance(text, JordanAlgebra):
        return text
    if isinstance(text, dict):
        return make_algebra(text["kind"], text["size"])
    kind, sep, size = str(text).partition(":")
    if not sep:
        raise InvalidSize(f"algebra descriptor {text!r} should look like kind:size")
    try:
        size = int(size)
    except ValueError:
        raise InvalidSize(f"bad size in {text!r}") from None
    return make_algebra(kind, size)


# ---------------------------------------------------------------------------
# Elements and operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Element:
    """An immutable element of a Jordan algebra in orthonormal coordinates."""

    algebra: JordanAlgebra
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.shape != (self.algebra.n,):
            raise InvalidSize(f"{self.algebra} needs {self.algebra.n} coordinates, got {c.size}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def _wrap(self, c):
        return Element(self.algebra, c)

    def _other(self, y):
        if not isinstance(y, Element):
            return NotImplemented
        if y.algebra != self.algebra:
            raise AlgebraMismatch(f"{self.algebra} vs {y.algebra}")
        return y.coords

    def __add__(self, y):
        c = self._other(y)
        return NotImplemented if c is NotImplemented else self._wrap(self.coords + c)

    def __sub__(self, y):
        c = self._other(y)
        return NotImplemented if c is NotImplemented else self._wrap(self.coords - c)

    def __neg__(self):
        return self._wrap(-self.coords)

    def __mul__(self, s):
        if isinstance(s, Element):
            return NotImplemented
        return self._wrap(float(s) * self.coords)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self._wrap(self.coords / float(s))

    def __eq__(self, y):
        return isinstance(y, Element) and y.algebra == self.algebra and np.array_equal(y.coords, self.coords)

    __hash__ = None

    def __repr__(self):
        return f"Element({self.algebra}, {np.array2string(self.coords, precision=6)})"

    def natural(self) -> np.ndarray:
        return self.algebra.to_natural(self.coords)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def eigenvalues(self) -> np.ndarray:
        return self.algebra.eigvals(self.coords)

    def to_dict(self) -> dict:
        return {"algebra": {"kind": self.algebra.kind.value, "size": self.algebra.size},
                "coords": [float(v) for v in self.coords]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Element":
        return cls(parse_algebra(doc["algebra"]), doc["coords"])


@dataclass(frozen=True, eq=False)
class ConeOperator:
    """A linear map V -> V, stored as its matrix in the orthonormal basis."""

    algebra: JordanAlgebra
    matrix: np.ndarray

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        n = self.algebra.n
        if M.shape != (n, n):
            raise InvalidSize(f"operator on {self.algebra} must be {n}x{n}, got {M.shape}")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @classmethod
    def identity(cls, algebra: JordanAlgebra) -> "ConeOperator":
        return cls(algebra, np.eye(algebra.n))

    @classmethod
    def zero(cls, algebra: JordanAlgebra) -> "ConeOperator":
        return cls(algebra, np.zeros((algebra.n, algebra.n)))

    @classmethod
    def from_function(cls, algebra: JordanAlgebra, f: Callable[[np.ndarray], np.ndarray]) -> "ConeOperator":
        """Matrix of a linear map given on coordinate vectors."""
        cols = [np.asarray(f(col), dtype=float) for col in np.eye(algebra.n)]
        return cls(algebra, np.stack(cols, axis=1))

    @classmethod
    def lyapunov(cls, algebra: JordanAlgebra, H) -> "ConeOperator":
        """The map x -> H x + x H^* on a matrix algebra (an element of the cone's Lie algebra)."""
        if not algebra.is_matrix:
            raise UnsupportedAlgebra("lyapunov drift needs a matrix algebra")
        H = np.asarray(H, dtype=algebra.dtype)

        def f(c):
            X = algebra.to_natural(c)
            return algebra.from_natural(H @ X + X @ np.conj(H.T))

        return cls.from_function(algebra, f)

    def __call__(self, x):
        if isinstance(x, Element):
            if x.algebra != self.algebra:
                raise AlgebraMismatch(f"{self.algebra} vs {x.algebra}")
            return Element(self.algebra, self.matrix @ x.coords)
        return np.einsum("ij,...j->...i", self.matrix, np.asarray(x, dtype=float))

    def _other(self, B):
        if not isinstance(B, ConeOperator):
            return NotImplemented
        if B.algebra != self.algebra:
            raise AlgebraMismatch(f"{self.algebra} vs {B.algebra}")
        return B.matrix

    def __matmul__(self, B):
        M = self._other(B)
        return NotImplemented if M is NotImplemented else ConeOperator(self.algebra, self.matrix @ M)

    def __add__(self, B):
        M = self._other(B)
        return NotImplemented if M is NotImplemented else ConeOperator(self.algebra, self.matrix + M)

    def __sub__(self, B):
        M = self._other(B)
        return NotImplemented if M is NotImplemented else ConeOperator(self.algebra, self.matrix - M)

    def __neg__(self):
        return ConeOperator(self.algebra, -self.matrix)

    def __mul__(self, s):
        return ConeOperator(self.algebra, float(s) * self.matrix)

    __rmul__ = __mul__

    @property
    def T(self) -> "ConeOperator":
        return ConeOperator(self.algebra, self.matrix.T)

    def expm(self, t: float = 1.0) -> "ConeOperator":
        return ConeOperator(self.algebra, scipy.linalg.expm(t * self.matrix))

    def __repr__(self):
        return f"ConeOperator({self.algebra}, shape={self.matrix.shape})"


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    frame: tuple

    def __iter__(self):
        return iter((self.eigenvalues, self.frame))

    def reconstruct(self) -> Element:
        alg = self.frame[0].algebra
        return Element(alg, sum(l * p.coords for l, p in zip(self.eigenvalues, self.frame)))


def _same_algebra(*xs):
    alg = xs[0].algebra
    for x in xs[1:]:
        if x.algebra != alg:
            raise AlgebraMismatch(f"{alg} vs {x.algebra}")
    return alg


def inner(x: Element, y: Element) -> float:
    _same_algebra(x, y)
    return float(x.coords @ y.coords)


def jordan_product(x: Element, y: Element) -> Element:
    alg = _same_algebra(x, y)
    return Element(alg, alg.product(x.coords, y.coords))


def left_mult(x: Element) -> ConeOperator:
    return ConeOperator(x.algebra, x.algebra.lmat(x.coords))


def quad_rep(x: Element) -> ConeOperator:
    return ConeOperator(x.algebra, x.algebra.pmat(x.coords))


def quad_rep_polarized(x: Element, y: Element) -> ConeOperator:
    alg = _same_algebra(x, y)
    return ConeOperator(alg, alg.pmat2(x.coords, y.coords))


def spectral_decompose(x: Element, tol: float = DEFAULT_TOL) -> SpectralDecomposition:
    """Eigenvalues (descending) and a Jordan frame of primitive idempotents.

    Eigenvalues closer than ``tol * |x|`` are merged into one eigenspace; the
    frame inside a merged eigenspace is re-orthonormalised and the group gets
    the mean eigenvalue, so the reconstruction is exact up to that tolerance.
    """
    alg = x.algebra
    _check_finite(x.coords)
    scale = x.norm()
    if alg.r <= 2:
        lam, frame = alg.eigh(x.coords)
        if alg.r == 2 and lam[0] - lam[1] <= tol * scale:
            lam = np.full(2, lam.mean())
            frame = alg.canonical_frame()
    else:
        try:
            w, V = np.linalg.eigh(alg.to_natural(x.coords))
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(str(exc)) from exc
        w, V = w[::-1].copy(), V[:, ::-1]
        start = 0
        for i in range(1, alg.r + 1):
            if i == alg.r or w[start] - w[i] > tol * scale:
                if i - start > 1:
                    w[start:i] = w[start:i].mean()
                    Q, _ = np.linalg.qr(V[:, start:i])
                    V = V.copy()
                    V[:, start:i] = Q
                start = i
        lam = w
        frame = alg.from_natural(np.einsum("ai,bi->iab", V, np.conj(V)))
    return SpectralDecomposition(np.asarray(lam, dtype=float), tuple(Element(alg, p) for p in frame))


def det(x: Element) -> float:
    return float(x.algebra.det(x.coords))


def trace(x: Element) -> float:
    return float(x.algebra.trace(x.coords))


def inverse(x: Element, tol: float = DEFAULT_TOL) -> Element:
    return Element(x.algebra, x.algebra.inv(x.coords, tol))


def sqrt(x: Element, tol: float = DEFAULT_TOL) -> Element:
    return Element(x.algebra, x.algebra.sqrt(x.coords, tol))


def cone_classify(x: Element, tol: float = DEFAULT_TOL) -> ConeClass:
    c = int(x.algebra.classify(x.coords, tol))
    return {1: ConeClass.INTERIOR, 0: ConeClass.BOUNDARY, -1: ConeClass.OUTSIDE}[c]


def check_frame(frame: Sequence[Element], tol: float = 1e-8) -> JordanAlgebra:
    """Raise :class:`NotAFrame` unless ``frame`` is a complete Jordan frame."""
    if len(frame) == 0:
        raise NotAFrame("empty frame")
    alg = _same_algebra(*frame)
    if len(frame) != alg.r:
        raise NotAFrame(f"a Jordan frame of {alg} has {alg.r} idempotents, got {len(frame)}")
    P = np.stack([p.coords for p in frame])
    for i in range(alg.r):
        if np.linalg.norm(alg.product(P[i], P[i]) - P[i]) > tol:
            raise NotAFrame(f"element {i} is not idempotent")
        if abs(alg.trace(P[i]) - 1.0) > tol:
            raise NotAFrame(f"idempotent {i} is not primitive")
        for j in range(i + 1, alg.r):
            if np.linalg.norm(alg.product(P[i], P[j])) > tol:
                raise NotAFrame(f"idempotents {i} and {j} are not orthogonal")
    if np.linalg.norm(P.sum(axis=0) - alg.identity) > tol:
        raise NotAFrame("idempotents do not sum to the identity")
    return alg


def peirce_projections(frame) -> dict:
    """Peirce projections {(i, j): operator} for i <= j (0-based indices).

    Pi_ii = P(p_i) and Pi_ij = 4 L(p_i) L(p_j) for i < j.
    """
    if isinstance(frame, SpectralDecomposition):
        frame = frame.frame
    alg = check_frame(frame)
    P = [p.coords for p in frame]
    L = [alg.lmat(p) for p in P]
    out = {}
    for i in range(alg.r):
        out[(i, i)] = ConeOperator(alg, alg.pmat(P[i]))
        for j in range(i + 1, alg.r):
            out[(i, j)] = ConeOperator(alg, 4.0 * L[i] @ L[j])
    return out


def peirce_basis(frame, i: int, j: int) -> np.ndarray:
    """Orthonormal basis (rows) of the Peirce space V_ij."""
    proj = peirce_projections(frame)[(min(i, j), max(i, j))].matrix
    w, V = np.linalg.eigh(0.5 * (proj + proj.T))
    return V[:, w > 0.5].T
