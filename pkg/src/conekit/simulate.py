"""Path simulation of affine processes on symmetric cones.

Schemes: projected Euler-Maruyama, Euler with thinned jumps, and exact
transitions for Bru processes.  Random streams are derived from
(seed, block index) for fixed-size blocks of paths, so results do not
depend on how blocks are spread over worker threads.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import jordan as J
from .affine_params import AffineParameterSet, validate
from .errors import NotAdmissible, NotConservative, ThinningBoundExceeded, UnsupportedCombination
from .jordan import Element, JordanAlgebra, Kind
from .riccati import _workers

BLOCK = 4096
MAX_THINNING_RETRIES = 20


@dataclass
class PathEnsemble:
    algebra: JordanAlgebra
    times: np.ndarray
    paths: np.ndarray  # (count, len(times), n)
    scheme: str
    seed: int
    x0: Element
    running_min: np.ndarray  # min eigenvalue over every simulated step, per path
    jump_counts: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.paths.shape[0]

    def at(self, i: int = -1) -> np.ndarray:
        return self.paths[:, i, :]

    def min_eigs(self) -> np.ndarray:
        return self.algebra.min_eig(self.paths)

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        n = self.algebra.n
        w.writerow(["path_id", "t"] + [f"coord_{i + 1}" for i in range(n)] + ["min_eigen"])
        mins = self.min_eigs()
        for p in range(self.count):
            for k, t in enumerate(self.times):
                w.writerow([p, repr(float(t))] + [repr(float(v)) for v in self.paths[p, k]]
                           + [repr(float(mins[p, k]))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# stepping kernels
# ---------------------------------------------------------------------------

class _Stepper:
    """Projected Euler step for the continuous part of the dynamics."""

    def __init__(self, params: AffineParameterSet):
        alg = params.algebra
        self.alg = alg
        self.b = params.b.coords
        self.Bt = params.drift_tilde()
        self.alpha = params.alpha.coords
        self.noise = bool(np.any(self.alpha))
        if alg.is_matrix:
            na = alg.to_natural(self.alpha)
            w, V = np.linalg.eigh(na)
            self.sqrt_alpha = (V * np.sqrt(np.clip(w, 0.0, None))) @ np.conj(V.T)

    def sqrt_state(self, X):
        if not (self.alg.is_matrix and self.noise):
            return None
        if self.alg.r <= 2:
            return self.alg.to_natural(self.alg.sqrt(X))
        w, V = np.linalg.eigh(self.alg.to_natural(X))
        return (V * np.sqrt(np.clip(w, 0.0, None))[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))

    def step(self, X, S, dt, rng):
        """Advance one step; returns (X_new, S_new, min eigenvalue before projection)."""
        alg = self.alg
        Y = X + (self.b + X @ self.Bt.T) * dt
        m = X.shape[0]
        if self.noise:
            if alg.is_matrix:
                r = alg.r
                Wn = rng.standard_normal((m, r, r))
                if alg.kind is Kind.HERM:
                    Wn = Wn + 1j * rng.standard_normal((m, r, r))
                H = S @ (Wn * np.sqrt(dt)) @ self.sqrt_alpha
                H = H + np.conj(np.swapaxes(H, -1, -2))
                Y = Y + alg.from_natural(H)
            else:
                A = 4.0 * alg.pmat2(X, self.alpha)
                w, V = np.linalg.eigh(A)
                root = (V * np.sqrt(np.clip(w, 0.0, None))[..., None, :]) @ np.swapaxes(V, -1, -2)
                Y = Y + np.einsum("kij,kj->ki", root, rng.standard_normal((m, alg.n))) * np.sqrt(dt)
        if alg.is_matrix and alg.r >= 3:
            w, V = np.linalg.eigh(alg.to_natural(Y))
            wc = np.clip(w, 0.0, None)
            Vh = np.conj(np.swapaxes(V, -1, -2))
            Xn = alg.from_natural((V * wc[..., None, :]) @ Vh)
            Sn = (V * np.sqrt(wc)[..., None, :]) @ Vh
            return Xn, Sn, w[..., 0]
        # rank <= 2 (and spin factors): closed-form spectral calculus in coordinates
        lam, frame = alg.eigh(Y)
        lc = np.clip(lam, 0.0, None)
        Xn = np.einsum("ki,kij->kj", lc, frame)
        Sn = None
        if alg.is_matrix and self.noise:
            Sn = alg.to_natural(np.einsum("ki,kij->kj", np.sqrt(lc), frame))
        return Xn, Sn, lam[..., -1]


class _Jumps:
    """Thinning sampler for constant and state-dependent jump atoms."""

    def __init__(self, params: AffineParameterSet):
        self.m_pts = params.m.points
        self.m_w = params.m.weights
        self.mu_pts = params.mu.points
        self.mu_c = params.mu.values
        self.W = float(self.m_w.sum())
        self.points = np.vstack([self.m_pts, self.mu_pts])
        self.retries = 0

    def intensities(self, Y):
        """Jump rates per atom for states Y (shape (m, n)) -> (m, atoms)."""
        Y = np.atleast_2d(Y)
        lin = np.clip(Y @ self.mu_c.T, 0.0, None) if len(self.mu_c) else np.zeros((Y.shape[0], 0))
        return np.concatenate([np.broadcast_to(self.m_w, (Y.shape[0], len(self.m_w))), lin], axis=1)

    def _retry(self, x, lam_bar, dt, rng):
        """Serial thinning with a refreshed bound after the bound was exceeded."""
        for _ in range(MAX_THINNING_RETRIES):
            self.retries += 1
            n_cand = rng.poisson(lam_bar * dt)
            Y, jumped, ok = x.copy(), 0, True
            for _ in range(n_cand):
                rates = self.intensities(Y)[0]
                lam = rates.sum()
                if lam > lam_bar:
                    ok = False
                    lam_bar = 2.0 * lam
                    break
                if rng.uniform() * lam_bar < lam:
                    Y = Y + self.points[rng.choice(len(rates), p=rates / lam)]
                    jumped += 1
            if ok:
                return Y, jumped
        raise ThinningBoundExceeded("thinning bound kept being exceeded")

    def apply(self, X, dt, rng, counts):
        """Jumps on (t, t + dt] by thinning against 1.5 x the intensity at the step start.

        Candidates are processed in rounds across all paths; the intensity is
        re-evaluated after every accepted jump.  Paths whose intensity outgrows
        the bound are redone serially with a refreshed bound.
        """
        m = X.shape[0]
        bound = 1.5 * self.intensities(X).sum(axis=1) + 1e-12
        N = rng.poisson(bound * dt)
        total = np.zeros_like(X)
        idx = np.nonzero(N)[0]
        if idx.size == 0:
            return total
        Y = X[idx].copy()
        lam_bar, n = bound[idx], N[idx]
        jumped = np.zeros(idx.size, dtype=np.int64)
        bad = np.zeros(idx.size, dtype=bool)
        viol = np.zeros(idx.size)
        K = self.points.shape[0]
        for j in range(int(n.max())):
            a = np.nonzero((n > j) & ~bad)[0]
            if a.size == 0:
                break
            rates = self.intensities(Y[a])
            lam = rates.sum(axis=1)
            over = lam > lam_bar[a]
            bad[a[over]] = True
            viol[a[over]] = lam[over]
            acc = (rng.uniform(size=a.size) * lam_bar[a] < lam) & ~over
            target = rng.uniform(size=a.size) * lam
            pick = np.minimum((np.cumsum(rates, axis=1) <= target[:, None]).sum(axis=1), K - 1)
            rows = a[acc]
            Y[rows] += self.points[pick[acc]]
            jumped[rows] += 1
        for loc in np.nonzero(bad)[0]:
            Y[loc], jumped[loc] = self._retry(X[idx[loc]], 2.0 * viol[loc], dt, rng)
        total[idx] = Y - X[idx]
        counts[idx] += jumped
        return total


def _stream(seed: int, block: int):
    ss = np.random.SeedSequence([int(seed), int(block)])
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def _record_indices(steps: int, record) -> np.ndarray:
    if record == "all" or record is None:
        return np.arange(steps + 1)
    if record == "final":
        return np.array([0, steps])
    stride = int(record)
    idx = np.arange(0, steps + 1, stride)
    if idx[-1] != steps:
        idx = np.append(idx, steps)
    return idx


def _run_blocks(fn, count: int, workers):
    blocks = [(b, min(BLOCK, count - b * BLOCK)) for b in range((count + BLOCK - 1) // BLOCK)]
    n = _workers(workers)
    if n == 1 or len(blocks) == 1:
        return [fn(b, size) for b, size in blocks]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(lambda bs: fn(*bs), blocks))


def _prepare(params: AffineParameterSet, x0) -> Element:
    if not params.is_conservative:
        raise NotConservative("path simulation needs c = 0 and gamma = 0")
    rep = validate(params, n_boundary_samples=16, seed=0)
    if not rep.admissible:
        raise NotAdmissible("parameters fail: " + ", ".join(c.name for c in rep.failures))
    x0 = x0 if isinstance(x0, Element) else Element(params.algebra, x0)
    if J.cone_classify(x0) is J.ConeClass.OUTSIDE:
        raise NotAdmissible("x0 must lie in the cone")
    return x0


def _simulate(params, x0: Element, t_end: float, steps: int, count: int, seed: int, record, workers,
              with_jumps: bool, scheme: str) -> PathEnsemble:
    alg = params.algebra
    dt = float(t_end) / steps
    rec = _record_indices(steps, record)
    stepper = _Stepper(params)
    jumps = _Jumps(params) if with_jumps and params.has_jumps else None

    def block(b, size):
        rng_d, rng_j = _stream(seed, b)
        X = np.tile(x0.coords, (size, 1))
        S = stepper.sqrt_state(X)
        out = np.empty((size, len(rec), alg.n))
        out[:, 0] = X
        run_min = alg.min_eig(X)
        counts = np.zeros(size, dtype=np.int64)
        ri = 1
        for k in range(1, steps + 1):
            Xn, S, lo = stepper.step(X, S, dt, rng_d)
            if jumps is not None:
                J_ = jumps.apply(X, dt, rng_j, counts)
                hit = np.nonzero(np.any(J_, axis=1))[0]
                if hit.size:
                    Xn = Xn + J_
                    if S is not None:
                        S[hit] = stepper.sqrt_state(Xn[hit])
                    lo[hit] = np.minimum(lo[hit], alg.min_eig(Xn[hit]))
            X = Xn
            run_min = np.minimum(run_min, lo)
            if ri < len(rec) and rec[ri] == k:
                out[:, ri] = X
                ri += 1
        return out, run_min, counts

    res = _run_blocks(block, count, workers)
    paths = np.concatenate([r[0] for r in res])
    ens = PathEnsemble(alg, rec * dt, paths, scheme, seed, x0, np.concatenate([r[1] for r in res]),
                       np.concatenate([r[2] for r in res]) if jumps is not None else None)
    if jumps is not None:
        ens.stats["thinning_retries"] = jumps.retries
    return ens


def euler_advance(params: AffineParameterSet, X: np.ndarray, dt: float, steps: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Advance an array of states by ``steps`` projected Euler steps (no recording)."""
    stepper = _Stepper(params)
    X = np.atleast_2d(np.asarray(X, dtype=float)).copy()
    S = stepper.sqrt_state(X)
    for _ in range(steps):
        X, S, _ = stepper.step(X, S, dt, rng)
    return X


def euler_path(params: AffineParameterSet, x0, t_end: float, steps: int, count: int, seed: int = 0,
               record="all", workers: int | None = None) -> PathEnsemble:
    """Projected Euler-Maruyama: X <- Pi_K[X + (b + B(X)) dt + A(X)^(1/2) dW].

    For matrix algebras the noise is generated as sqrt(X) dW sqrt(alpha) + h.c.,
    which has covariance A(X) = 4 P(X, alpha).  Jump atoms, if present, are
    simulated as in :func:`jump_augmented_path`.
    """
    x0 = _prepare(params, x0)
    scheme = "EulerPlusJumps" if params.has_jumps else "Euler"
    return _simulate(params, x0, t_end, steps, count, seed, record, workers, True, scheme)


def jump_augmented_path(params: AffineParameterSet, x0, t_end: float, steps: int, count: int, seed: int = 0,
                        record="all", workers: int | None = None) -> PathEnsemble:
    """Euler for the continuous part plus thinned jumps: constant atoms at rate w_k,
    state-dependent atoms at rate <X, c_k>."""
    x0 = _prepare(params, x0)
    return _simulate(params, x0, t_end, steps, count, seed, record, workers, True, "EulerPlusJumps")


def exact_bru_path(alpha: Element, delta: float, x0, t_grid, count: int, seed: int = 0,
                   workers: int | None = None, record="all") -> PathEnsemble:
    """Chain exact Wishart transitions W(delta, alpha, dt, X) along the grid."""
    from .wishart import gindikin_contains, sample_transitions

    alg = alpha.algebra
    if not gindikin_contains(alg, delta):
        raise UnsupportedCombination(f"delta = {delta} is outside the Gindikin set")
    x0 = x0 if isinstance(x0, Element) else Element(alg, x0)
    grid = np.asarray(t_grid, dtype=float)
    if grid[0] != 0.0:
        grid = np.concatenate([[0.0], grid])
    steps = len(grid) - 1
    rec = _record_indices(steps, record)

    def block(b, size):
        rng, _ = _stream(seed, b)
        X = np.tile(x0.coords, (size, 1))
        out = np.empty((size, len(rec), alg.n))
        out[:, 0] = X
        run_min = alg.min_eig(X)
        ri = 1
        for k in range(1, steps + 1):
            X = sample_transitions(alg, delta, alpha.coords, grid[k] - grid[k - 1], X, rng, fallback=False)
            run_min = np.minimum(run_min, alg.min_eig(X))
            if ri < len(rec) and rec[ri] == k:
                out[:, ri] = X
                ri += 1
        return out, run_min

    res = _run_blocks(block, count, workers)
    return PathEnsemble(alg, grid[rec], np.concatenate([r[0] for r in res]), "ExactBru", seed, x0,
                        np.concatenate([r[1] for r in res]))


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    se: float

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.se


def mc_laplace(ensemble: PathEnsemble, u: Element, t_index: int = -1) -> MCEstimate:
    """Sample mean and standard error of exp(-<u, X_t>)."""
    v = np.exp(-(ensemble.at(t_index) @ u.coords))
    return MCEstimate(float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v))))


@dataclass(frozen=True)
class BoundaryStats:
    fraction_touching: float
    min_eigen: np.ndarray


def boundary_stats(ensemble: PathEnsemble, eps: float = 1e-6) -> BoundaryStats:
    """Fraction of paths whose smallest eigenvalue drops to eps or below at some step."""
    mins = ensemble.running_min
    return BoundaryStats(float(np.mean(mins <= eps)), mins)
