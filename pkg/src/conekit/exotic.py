"""Two affine diffusions on non-symmetric cones.

* A squared-Bessel type process on the polyhedral cone generated by
  a1 = (0,0,1), a2 = (1,0,1), a3 = (1,1,1), a4 = (0,1,1), obtained as
  X = q(y + B) with q(y) = sum y_i^2 a_i and B a 4-dim Brownian motion.
* A process on the dual Vinberg cone (3x3 PSD matrices with a zero (2,3)
  entry) assembled from a scalar squared Bessel block and two rank-one
  2x2 Wishart blocks, together with its closed-form phi and psi.

These are fixed demonstrations, not generic homogeneous-cone support.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlockSingular, NotInCone
from .simulate import MCEstimate, _record_indices, _run_blocks, _stream

POLY_GENERATORS = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
E11 = np.array([[1.0, 0.0], [0.0, 0.0]])
VINBERG_COORDS = ("a", "b1", "b2", "c1", "c2")


@dataclass
class ExampleEnsemble:
    """Paths of an example process; ``margin`` is the per-state distance
    indicator written to the ``min_eigen`` column (smallest inequality slack
    for the polyhedral cone, smallest eigenvalue for the Vinberg cone)."""
    name: str
    times: np.ndarray
    paths: np.ndarray  # (count, len(times), dim)
    margin: np.ndarray  # (count, len(times))
    seed: int
    extras: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.paths.shape[0]

    def at(self, i: int = -1) -> np.ndarray:
        return self.paths[:, i, :]

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        dim = self.paths.shape[-1]
        w.writerow(["path_id", "t"] + [f"coord_{i + 1}" for i in range(dim)] + ["min_eigen"])
        for p in range(self.count):
            for k, t in enumerate(self.times):
                w.writerow([p, repr(float(t))] + [repr(float(v)) for v in self.paths[p, k]]
                           + [repr(float(self.margin[p, k]))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# polyhedral cone
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyhedralConeSpec:
    generators: np.ndarray = field(default_factory=lambda: POLY_GENERATORS.copy())

    def q(self, y) -> np.ndarray:
        y2 = np.asarray(y, dtype=float) ** 2
        if not np.array_equal(self.generators, POLY_GENERATORS):
            return y2 @ self.generators
        x1 = y2[..., 1] + y2[..., 2]
        x2 = y2[..., 2] + y2[..., 3]
        # x3 >= max(x1, x2) in exact arithmetic; keep it so after rounding
        x3 = np.maximum(x1 + (y2[..., 0] + y2[..., 3]), x2)
        return np.stack([x1, x2, x3], axis=-1)

    @staticmethod
    def slacks(x) -> np.ndarray:
        """(x1, x2, x3 - x1, x3 - x2); all non-negative iff x is in the cone."""
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 0], x[..., 1], x[..., 2] - x[..., 0], x[..., 2] - x[..., 1]], axis=-1)

    def contains(self, x) -> np.ndarray:
        return np.all(self.slacks(x) >= 0.0, axis=-1)

    @staticmethod
    def drift() -> np.ndarray:
        return np.array([2.0, 2.0, 4.0])

    @staticmethod
    def diffusion(x) -> np.ndarray:
        """The affine matrix 2[[x1, x1+x2-x3, x1], [., x2, x2], [x1, x2, x3]]."""
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        off = x1 + x2 - x3
        return 2.0 * np.stack([np.stack([x1, off, x1], -1), np.stack([off, x2, x2], -1),
                               np.stack([x1, x2, x3], -1)], -2)

    @staticmethod
    def diffusion_from_y(y) -> np.ndarray:
        """Half the instantaneous covariation of q(Y) computed from Y itself.

        Equals :meth:`diffusion` except in the (1,2) entry, which is 2 y3^2
        and is not a function of x = q(y).
        """
        y2 = np.asarray(y, dtype=float) ** 2
        G = POLY_GENERATORS
        return 2.0 * np.einsum("...i,ij,ik->...jk", y2, G, G)


def polyhedral_path(y0, t_end: float, steps: int, count: int, seed: int = 0, workers=None,
                    keep_y: bool = True, record="all") -> ExampleEnsemble:
    """X = q(y0 + B) on a uniform grid; every state satisfies the cone inequalities exactly."""
    spec = PolyhedralConeSpec()
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (4,):
        raise ValueError("y0 must have four components")
    dt = float(t_end) / steps

    def block(b, size):
        rng, _ = _stream(seed, b)
        dB = rng.standard_normal((size, steps, 4)) * math.sqrt(dt)
        Y = np.concatenate([np.tile(y0, (size, 1, 1)), y0 + np.cumsum(dB, axis=1)], axis=1)
        return Y[:, rec]

    rec = _record_indices(steps, record)
    Y = np.concatenate(_run_blocks(block, count, workers))
    X = spec.q(Y)
    margin = spec.slacks(X).min(axis=-1)
    extras = {"y": Y} if keep_y else {}
    return ExampleEnsemble("polyhedral", rec * dt, X, margin, seed, extras)


def drift_estimate(ens: ExampleEnsemble) -> tuple:
    """Per-coordinate mean and standard error of (X_T - X_0) / T."""
    T = ens.times[-1] - ens.times[0]
    inc = (ens.at(-1) - ens.at(0)) / T
    return inc.mean(axis=0), inc.std(axis=0, ddof=1) / math.sqrt(ens.count)


def covariation_estimate(ens: ExampleEnsemble, use_y: bool = False):
    """Mean and standard error over paths of
    (1/2) sum_k dX dX^T - sum_k [(a(X_k) + a(X_{k+1})) / 2 + b b^T dt / 2] dt,
    entrywise, where a is the stated affine diffusion (``use_y=False``) or
    the exact one computed from Y.  With the exact a the summand has mean
    zero for every grid, so any systematic offset is a model error."""
    dt = np.diff(ens.times)
    dX = np.diff(ens.paths, axis=1)
    realized = 0.5 * np.einsum("pki,pkj->pij", dX, dX)
    if use_y:
        A = PolyhedralConeSpec.diffusion_from_y(ens.extras["y"])
    else:
        A = PolyhedralConeSpec.diffusion(ens.paths)
    A = 0.5 * (A[:, :-1] + A[:, 1:])
    b = PolyhedralConeSpec.drift()
    predicted = np.einsum("pkij,k->pij", A, dt) + 0.5 * np.outer(b, b) * np.sum(dt ** 2)
    diff = realized - predicted
    return diff.mean(axis=0), diff.std(axis=0, ddof=1) / math.sqrt(ens.count)


# ---------------------------------------------------------------------------
# dual Vinberg cone
# ---------------------------------------------------------------------------

def vinberg_matrix(v) -> np.ndarray:
    """3x3 matrix from coordinates (a, b1, b2, c1, c2); batched over leading axes."""
    v = np.asarray(v, dtype=float)
    if v.shape[-2:] == (3, 3):
        return v
    a, b1, b2, c1, c2 = (v[..., i] for i in range(5))
    z = np.zeros_like(a)
    return np.stack([np.stack([a, b1, b2], -1), np.stack([b1, c1, z], -1), np.stack([b2, z, c2], -1)], -2)


def vinberg_coords(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape[-1] == 5:
        return m
    return np.stack([m[..., 0, 0], m[..., 0, 1], m[..., 0, 2], m[..., 1, 1], m[..., 2, 2]], -1)


def vinberg_inner(u, x) -> np.ndarray:
    """tr(u x) for coordinate vectors or matrices."""
    u, x = vinberg_coords(u), vinberg_coords(x)
    w = np.array([1.0, 2.0, 2.0, 1.0, 1.0])
    return np.sum(u * x * w, axis=-1)


def in_vinberg_cone(u, tol: float = 1e-12) -> bool:
    """u11 >= 0 and both 2x2 blocks on {1,2}, {1,3} positive semidefinite."""
    a, b1, b2, c1, c2 = vinberg_coords(u)
    s = tol * max(1.0, abs(a), abs(c1), abs(c2))
    return bool(a >= -s and c1 >= -s and c2 >= -s and a * c1 - b1 * b1 >= -s * s - s
                and a * c2 - b2 * b2 >= -s * s - s)


def in_dual_vinberg_cone(x, tol: float = 1e-12) -> bool:
    """Positive semidefinite with the (2,3) entry equal to zero."""
    m = vinberg_matrix(x) if np.asarray(x).shape[-1] == 5 else np.asarray(x, dtype=float)
    if abs(m[1, 2]) > tol or abs(m[2, 1]) > tol:
        return False
    w = np.linalg.eigvalsh(m)
    return bool(w[0] >= -tol * max(1.0, abs(w[-1])))


@dataclass(frozen=True)
class VinbergProcessSpec:
    b: float
    x0: float
    z1: tuple
    z2: tuple

    def __post_init__(self):
        if self.b < 0 or self.x0 < 0:
            raise ValueError("b and x0 must be non-negative")
        object.__setattr__(self, "z1", tuple(float(v) for v in self.z1))
        object.__setattr__(self, "z2", tuple(float(v) for v in self.z2))
        if len(self.z1) != 2 or len(self.z2) != 2:
            raise ValueError("z1 and z2 must have two components")

    def initial(self) -> np.ndarray:
        """X_0 = x0 E11 + z1 z1^T (on rows/cols 1,2) + z2 z2^T (on rows/cols 1,3)."""
        (p1, q1), (p2, q2) = self.z1, self.z2
        return vinberg_matrix([self.x0 + p1 * p1 + p2 * p2, p1 * q1, p2 * q2, q1 * q1, q2 * q2])


def _psi0(t, a):
    return a / (1.0 + 2.0 * t * a)


def _psi1(t, v):
    """(v^{-1} + 2t E11)^{-1} in the form v (I + 2t E11 v)^{-1}, valid for singular v too."""
    M = np.eye(2) + 2.0 * t * E11 @ v
    det = np.linalg.det(M)
    if abs(det) <= 1e-14 * max(1.0, np.abs(M).max()) ** 2:
        raise BlockSingular(f"I + 2t E11 v is singular for v = {v.tolist()}")
    out = v @ np.linalg.inv(M)
    return 0.5 * (out + out.T)


def vinberg_phi_psi(spec: VinbergProcessSpec | float, t: float, u, check: bool = True):
    """Closed-form (phi, psi) for the dual Vinberg process, psi as a 3x3 matrix.

    ``spec`` may be a :class:`VinbergProcessSpec` or just the drift b.
    """
    b = spec.b if isinstance(spec, VinbergProcessSpec) else float(spec)
    U = vinberg_matrix(vinberg_coords(u))
    if check and not in_vinberg_cone(U):
        raise NotInCone("u must lie in the Vinberg cone")
    if t < 0:
        raise ValueError("t must be non-negative")
    a = U[0, 0]
    p1 = _psi1(t, U[np.ix_([0, 1], [0, 1])])
    p2 = _psi1(t, U[np.ix_([0, 2], [0, 2])])
    phi = (0.5 * b + 1.0) * math.log1p(2.0 * t * a)
    psi = vinberg_matrix([_psi0(t, a), p1[0, 1], p2[0, 1], p1[1, 1], p2[1, 1]])
    return phi, psi


def vinberg_laplace(spec: VinbergProcessSpec, t: float, u) -> float:
    phi, psi = vinberg_phi_psi(spec, t, u)
    return math.exp(-phi - float(vinberg_inner(psi, spec.initial())))


def vinberg_path(spec: VinbergProcessSpec, t_end: float, steps: int, count: int, seed: int = 0,
                 workers=None, record="all") -> ExampleEnsemble:
    """Paths of X = X^0 + X^1 + X^2 in coordinates (a, b1, b2, c1, c2).

    X^0 is dX = b dt + 2 sqrt(X) dB by Euler with sqrt(max(X, 0)) and
    reflection at 0.  X^i (i = 1, 2) is (z^i_1 + Z^i, z^i_2)(z^i_1 + Z^i, z^i_2)^T
    with Z^i a standard Brownian motion, sampled exactly on the grid.
    """
    dt = float(t_end) / steps
    sq = math.sqrt(dt)
    (p1, q1), (p2, q2) = spec.z1, spec.z2
    rec = _record_indices(steps, record)
    gaps = np.diff(rec) * dt

    def block(b, size):
        rng, rng_z = _stream(seed, b)
        X0 = np.empty((size, len(rec)))
        X0[:, 0] = spec.x0
        x = np.full(size, spec.x0)
        ri = 1
        for k in range(1, steps + 1):
            x = np.abs(x + spec.b * dt + 2.0 * np.sqrt(np.maximum(x, 0.0)) * sq * rng.standard_normal(size))
            if rec[ri] == k:
                X0[:, ri] = x
                ri += 1
        # the rank-one blocks are exact, so only recorded times are needed
        Z = np.zeros((size, len(rec), 2))
        Z[:, 1:] = np.cumsum(rng_z.standard_normal((size, len(rec) - 1, 2)) * np.sqrt(gaps)[:, None], axis=1)
        w1 = p1 + Z[..., 0]
        w2 = p2 + Z[..., 1]
        out = np.stack([X0 + w1 * w1 + w2 * w2, w1 * q1, w2 * q2,
                        np.full_like(w1, q1 * q1), np.full_like(w2, q2 * q2)], axis=-1)
        return out

    paths = np.concatenate(_run_blocks(block, count, workers))
    margin = np.linalg.eigvalsh(vinberg_matrix(paths))[..., 0]
    return ExampleEnsemble("vinberg", rec * dt, paths, margin, seed,
                           {"b": spec.b, "x0": spec.x0, "z1": spec.z1, "z2": spec.z2})


def vinberg_mc_laplace(ens: ExampleEnsemble, u, t_index: int = -1) -> MCEstimate:
    v = np.exp(-vinberg_inner(u, ens.at(t_index)))
    return MCEstimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v))))


def random_vinberg_u(rng: np.random.Generator, count: int, low: float = 0.1, high: float = 1.0) -> np.ndarray:
    """Points of the open Vinberg cone in coordinates (a, b1, b2, c1, c2)."""
    a = rng.uniform(low, high, count)
    b = rng.uniform(-1.0, 1.0, (count, 2)) * a[:, None]
    c = b ** 2 / a[:, None] + rng.uniform(low, high, (count, 2))
    return np.column_stack([a, b, c])
