"""Wishart laws on symmetric cones: Gindikin set, cone gamma function,
zonal polynomials, transforms, densities and exact sampling.

The law W(delta, alpha, t, x) is the time-t marginal of the Bru process
dX = delta alpha dt + (noise with A(X) = 4 P(X, alpha)) started at x.  Its
Laplace transform is

    det(e + 2t P(sqrt alpha) u)^(-delta/2) exp(-<(u^{-1} + 2t alpha)^{-1}, x>).
"""
from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.special

from . import jordan as J
from .errors import (
    CalibrationFailure,
    CapExceeded,
    DensityDoesNotExist,
    InvalidLaw,
    NotInCone,
    NotInterior,
    PoleArgument,
    UnsupportedAlgebra,
    UnsupportedCombination,
)
from .jordan import ConeOperator, Element, JordanAlgebra, Kind
from .riccati import bru_arrays

ZONAL_CAP = 40
GAMMA_MIN = 0.8856031944108887  # min of Gamma on (0, inf), attained near 1.4616


def gindikin_contains(algebra: JordanAlgebra, delta: float, tol: float = 1e-12) -> bool:
    """delta in {0, d, ..., d(r-1)} or delta > d(r-1)."""
    d, r = algebra.d, algebra.r
    if delta > d * (r - 1):
        return True
    if delta < -tol:
        return False
    return any(abs(delta - d * j) <= tol for j in range(r))


@dataclass(frozen=True, eq=False)
class WishartLaw:
    algebra: JordanAlgebra
    delta: float
    alpha: Element
    t: float
    x: Element | None = None

    def __post_init__(self):
        alg = self.algebra
        if self.x is None:
            object.__setattr__(self, "x", alg.zero)
        for name in ("alpha", "x"):
            v = getattr(self, name)
            if not isinstance(v, Element):
                object.__setattr__(self, name, Element(alg, v))
            elif v.algebra != alg:
                raise InvalidLaw(f"{name} lives in {v.algebra}, not {alg}")
        if not gindikin_contains(alg, self.delta):
            raise InvalidLaw(f"delta = {self.delta} is outside the Gindikin set of {alg}")
        if not self.t >= 0.0:
            raise InvalidLaw("t must be non-negative")
        if J.cone_classify(self.alpha) is J.ConeClass.OUTSIDE:
            raise InvalidLaw("alpha must lie in the cone")
        if J.cone_classify(self.x) is J.ConeClass.OUTSIDE:
            raise InvalidLaw("x must lie in the cone")

    @property
    def scale(self) -> Element:
        """The scale parameter 2 t alpha."""
        return 2.0 * self.t * self.alpha

    def mean(self) -> Element:
        return self.x + self.delta * self.t * self.alpha


# ---------------------------------------------------------------------------
# gamma function of the cone
# ---------------------------------------------------------------------------

def _gamma_args(algebra: JordanAlgebra, s: float, m=None) -> np.ndarray:
    r = algebra.r
    mm = np.zeros(r) if m is None else np.asarray(tuple(m) + (0,) * (r - len(m)), dtype=float)
    if mm.size > r:
        raise ValueError(f"multi-index has more than {r} parts")
    return mm + s - np.arange(r) * algebra.d / 2.0


def cone_gamma(algebra: JordanAlgebra, s: float, m=None, log: bool = False) -> float:
    """Gamma_K(m + s) = (2 pi)^((n - r)/2) prod_j Gamma(m_j + s - (j - 1) d / 2)."""
    args = _gamma_args(algebra, s, m)
    if np.any(args <= 0.0):
        raise PoleArgument(f"cone gamma is undefined at s = {s}, m = {m}")
    val = 0.5 * (algebra.n - algebra.r) * math.log(2 * math.pi) + float(np.sum(scipy.special.gammaln(args)))
    return val if log else math.exp(val)


# ---------------------------------------------------------------------------
# zonal polynomials
# ---------------------------------------------------------------------------

class MultiIndex(tuple):
    """Weakly decreasing tuple of non-negative integers (a partition)."""

    def __new__(cls, parts=()):
        parts = tuple(int(p) for p in parts)
        if any(p < 0 for p in parts) or any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"{parts} is not a partition")
        while parts and parts[-1] == 0:
            parts = parts[:-1]
        return super().__new__(cls, parts)

    @property
    def degree(self) -> int:
        return sum(self)


def partitions(k: int, max_parts: int | None = None, max_part: int | None = None):
    """Partitions of k in decreasing lexicographic order."""
    if max_part is None:
        max_part = k
    if k == 0:
        yield MultiIndex()
        return
    if max_parts == 0:
        return
    for first in range(min(k, max_part), 0, -1):
        for rest in partitions(k - first, None if max_parts is None else max_parts - 1, first):
            yield MultiIndex((first,) + tuple(rest))


def _multinomial(parts) -> float:
    k = sum(parts)
    return math.exp(math.lgamma(k + 1) - sum(math.lgamma(p + 1) for p in parts))


@functools.lru_cache(maxsize=None)
def _james(k: int, r: int):
    """Coefficients of zonal polynomials in the monomial symmetric basis.

    Returns (parts, C) with C[a, b] the coefficient of M_{parts[b]} in
    Z_{parts[a]}, restricted to partitions with at most r parts, normalised
    so that the zonal polynomials of degree k sum to (y_1 + ... + y_r)^k.
    """
    parts = list(partitions(k, r))
    idx = {p: i for i, p in enumerate(parts)}
    P = len(parts)
    rho = [sum(p * (p - i) for i, p in enumerate(q, start=1)) for q in parts]
    target = [_multinomial(q) for q in parts]
    C = np.zeros((P, P))
    for a in range(P):
        C[a, a] = target[a] - C[:a, a].sum()
        for c in range(a + 1, P):
            lam = parts[c]
            acc = 0.0
            for i in range(len(lam)):
                for j in range(i + 1, len(lam)):
                    for t in range(1, lam[j] + 1):
                        mu = list(lam)
                        mu[i] += t
                        mu[j] -= t
                        key = MultiIndex(sorted((v for v in mu if v), reverse=True))
                        b = idx.get(key)
                        if b is not None and a <= b < c:
                            acc += (lam[i] - lam[j] + 2 * t) * C[a, b]
            if acc != 0.0:
                C[a, c] = acc / (rho[a] - rho[c])
    return parts, C


@functools.lru_cache(maxsize=None)
def _perms(parts, r):
    padded = tuple(parts) + (0,) * (r - len(parts))
    return np.array(sorted(set(itertools.permutations(padded))), dtype=float)


def monomial(parts, y: np.ndarray) -> np.ndarray:
    """Monomial symmetric function M_parts evaluated at the rows of y."""
    y = np.asarray(y, dtype=float)
    r = y.shape[-1]
    if len(parts) > r:
        return np.zeros(y.shape[:-1])
    E = _perms(tuple(parts), r)
    return np.sum(np.prod(y[..., None, :] ** E, axis=-1), axis=-1)


def _zonal_recursive_all(k: int, lam: np.ndarray) -> dict:
    parts, C = _james(k, lam.shape[-1])
    M = np.stack([monomial(p, lam) for p in parts], axis=-1)
    vals = M @ C.T
    return {p: vals[..., i] for i, p in enumerate(parts)}


def _recursive_ok(algebra: JordanAlgebra) -> bool:
    return algebra.r == 1 or (algebra.kind is Kind.SYM and algebra.r <= 4)


def _power_fn(algebra, m, minors) -> np.ndarray:
    m = tuple(m) + (0,) * (algebra.r - len(m))
    expo = np.array([m[i] - (m[i + 1] if i + 1 < algebra.r else 0) for i in range(algebra.r)], dtype=float)
    return np.prod(np.where(expo > 0, minors, 1.0) ** expo, axis=-1)


class _Calibration(NamedTuple):
    haar: np.ndarray
    omega: dict
    residual: float


@functools.lru_cache(maxsize=64)
def _mc_calibration(algebra: JordanAlgebra, k: int, n_mc: int, seed: int) -> _Calibration:
    rng = np.random.default_rng(seed)
    g = algebra.haar(rng, n_mc)
    parts = list(partitions(k, algebra.r))
    frame = algebra.canonical_frame()
    crng = np.random.default_rng(seed + 7919)
    npts = 2 * len(parts) + 2
    lam = crng.uniform(0.5, 1.5, (npts, algebra.r))
    pts = lam @ frame
    minors = algebra.minors(algebra.act(g[None], pts[:, None, :]))  # (npts, n_mc, r)
    Phi = np.stack([_power_fn(algebra, p, minors).mean(axis=1) for p in parts], axis=1)
    rhs = lam.sum(axis=1) ** k
    omega, *_ = np.linalg.lstsq(Phi, rhs, rcond=None)
    resid = float(np.linalg.norm(Phi @ omega - rhs) / np.linalg.norm(rhs))
    if np.any(omega <= 0) or resid > 0.05:
        raise CalibrationFailure(f"degree {k}: weights {omega}, residual {resid:.3g}")
    return _Calibration(g, dict(zip(parts, omega)), resid)


def zonal(algebra: JordanAlgebra, m, xi, mode: str | None = None, cap: int = ZONAL_CAP,
          n_mc: int = 20_000, seed: int = 0) -> float:
    """Zonal polynomial Z_m(xi), normalised so sum_{|m| = k} Z_m = tr(xi)^k.

    ``mode`` is ``"Recursive"`` (exact recurrence, SymMatrix up to rank 4 and
    every rank-one algebra) or ``"MonteCarlo"`` (Haar average of the
    generalised power function, weights calibrated against the
    normalisation).  Defaults to Recursive when available.
    """
    m = MultiIndex(m)
    if m.degree > cap:
        raise CapExceeded(f"|m| = {m.degree} exceeds cap {cap}")
    if len(m) > algebra.r:
        return 0.0
    coords = xi.coords if isinstance(xi, Element) else np.asarray(xi, dtype=float)
    mode = mode or ("Recursive" if _recursive_ok(algebra) else "MonteCarlo")
    if mode == "Recursive":
        if not _recursive_ok(algebra):
            raise UnsupportedAlgebra("recursive zonal polynomials need SymMatrix with r <= 4 or rank one")
        lam = algebra.eigvals(coords)
        return float(_zonal_recursive_all(m.degree, lam)[m])
    if mode != "MonteCarlo":
        raise ValueError(f"unknown zonal mode {mode!r}")
    if m.degree == 0:
        return 1.0
    cal = _mc_calibration(algebra, m.degree, n_mc, seed)
    minors = algebra.minors(algebra.act(cal.haar, coords))
    return float(cal.omega[m] * _power_fn(algebra, m, minors).mean())


def zonal_all(algebra: JordanAlgebra, k: int, xi, mode: str | None = None, n_mc: int = 20_000,
              seed: int = 0) -> dict:
    """All Z_m(xi) with |m| = k as a dict."""
    coords = xi.coords if isinstance(xi, Element) else np.asarray(xi, dtype=float)
    mode = mode or ("Recursive" if _recursive_ok(algebra) else "MonteCarlo")
    if mode == "Recursive":
        if not _recursive_ok(algebra):
            raise UnsupportedAlgebra("recursive zonal polynomials need SymMatrix with r <= 4 or rank one")
        return {p: float(v) for p, v in _zonal_recursive_all(k, algebra.eigvals(coords)).items()}
    return {p: zonal(algebra, p, coords, "MonteCarlo", cap=max(k, ZONAL_CAP), n_mc=n_mc, seed=seed)
            for p in partitions(k, algebra.r)}


# ---------------------------------------------------------------------------
# transforms and densities
# ---------------------------------------------------------------------------

def log_laplace(law: WishartLaw, u: Element) -> float:
    alg = law.algebra
    if J.cone_classify(u) is J.ConeClass.OUTSIDE:
        raise NotInCone("u must lie in the cone")
    phi, psi = bru_arrays(alg, law.alpha.coords, law.delta, u.coords, law.t)
    return float(-phi - psi @ law.x.coords)


def laplace(law: WishartLaw, u: Element) -> float:
    """E exp(-<u, X>) for X ~ law, evaluated in log space."""
    return math.exp(log_laplace(law, u))


def _density_setup(law: WishartLaw, xi: Element):
    alg = law.algebra
    if J.cone_classify(xi) is not J.ConeClass.INTERIOR:
        raise NotInterior("densities are evaluated on the open cone")
    if law.t <= 0.0 or J.cone_classify(law.alpha) is not J.ConeClass.INTERIOR:
        raise DensityDoesNotExist("the law has no density (alpha singular or t = 0)")
    if law.delta <= law.algebra.d * (law.algebra.r - 1):
        raise DensityDoesNotExist("delta in the discrete part of the Gindikin set gives a singular law")
    ainv = alg.inv(law.alpha.coords) / (2.0 * law.t)
    nr = alg.n / alg.r
    logdet_a = float(np.sum(np.log(alg.eigvals(ainv))))
    logdet_xi = float(np.sum(np.log(alg.eigvals(xi.coords))))
    return alg, ainv, nr, logdet_a, logdet_xi


def central_density(law: WishartLaw, xi: Element, log: bool = False) -> float:
    """Density of W(delta, alpha, t, 0) with respect to Lebesgue measure in orthonormal coordinates."""
    alg, ainv, nr, logdet_a, logdet_xi = _density_setup(law, xi)
    h = 0.5 * law.delta
    val = (-cone_gamma(alg, h, log=True) + h * logdet_a - float(ainv @ xi.coords)
           + (h - nr) * logdet_xi)
    return val if log else math.exp(val)


class DensitySeries(NamedTuple):
    value: float
    tail_bound: float


def noncentral_density(law: WishartLaw, xi: Element, series_cap: int = ZONAL_CAP, target_tol: float = 1e-8,
                       mode: str | None = None, n_mc: int = 20_000, seed: int = 0,
                       raise_on_tail: bool = True) -> DensitySeries:
    """Zonal series for the density of W(delta, alpha, t, x), truncated at |m| <= series_cap.

    The returned tail bound certifies the truncation error: each skipped term
    is bounded via Gamma_K >= (2 pi)^((n-r)/2) Gamma_min^r and
    sum_{|m| = k} Z_m(eta) = tr(eta)^k.
    """
    alg, ainv, nr, logdet_a, logdet_xi = _density_setup(law, xi)
    h = 0.5 * law.delta
    x = law.x.coords
    log_pref = h * logdet_a - float(ainv @ (xi.coords + x)) + (h - nr) * logdet_xi
    if not np.any(x):
        terms_log = [-cone_gamma(alg, h, log=True)]
        tr_eta = 0.0
    else:
        ainv_full = alg.inv(law.alpha.coords)
        eta = alg.pmat(alg.sqrt(x)) @ (alg.pmat(ainv_full) @ xi.coords) / (4.0 * law.t ** 2)
        tr_eta = float(alg.trace(eta))
        terms_log = []
        use_mode = mode or ("Recursive" if _recursive_ok(alg) else "MonteCarlo")
        for k in range(series_cap + 1):
            zs = zonal_all(alg, k, eta, use_mode, n_mc=n_mc, seed=seed)
            lk = math.lgamma(k + 1)
            for m, z in zs.items():
                if z <= 0.0:
                    continue
                terms_log.append(math.log(z) - lk - cone_gamma(alg, h, m, log=True))
    log_series = float(scipy.special.logsumexp(terms_log))
    value = math.exp(log_pref + log_series)
    log_M = 0.5 * (alg.n - alg.r) * math.log(2 * math.pi) + alg.r * math.log(GAMMA_MIN)
    if tr_eta > 0.0:
        # sum_{k > cap} a^k / k! = e^a P(cap + 1, a)
        log_tail = tr_eta + math.log(max(scipy.special.gammainc(series_cap + 1, tr_eta), 1e-300))
        log_b = log_pref - log_M + log_tail
        tail = math.exp(log_b) if log_b < 709.0 else math.inf
    else:
        tail = 0.0
    if raise_on_tail and tail > target_tol:
        from .errors import TailNotConverged
        raise TailNotConverged(f"tail bound {tail:.3e} exceeds {target_tol:.1e} at cap {series_cap}")
    return DensitySeries(value, tail)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _factor(alg: JordanAlgebra, X: np.ndarray, cols: int, tol: float = 1e-12):
    """M with M M^* = X (natural picture), using the top ``cols`` eigenvectors.

    Returns None if X has rank above ``cols``.
    """
    w, V = np.linalg.eigh(alg.to_natural(X))
    w, V = w[..., ::-1], V[..., ::-1]
    scale = np.maximum(np.abs(w).max(axis=-1, keepdims=True), 1e-300)
    r = alg.r
    if cols < r and np.any(w[..., cols:] > tol * scale):
        return None
    w = np.clip(w, 0.0, None)
    M = V * np.sqrt(w)[..., None, :]
    if cols <= r:
        return M[..., :cols]
    pad = np.zeros(M.shape[:-1] + (cols - r,), dtype=M.dtype)
    return np.concatenate([M, pad], axis=-1)


def _rank(alg, X, tol=1e-12):
    lam = alg.eigvals(X)
    scale = np.maximum(np.abs(lam).max(axis=-1, keepdims=True), 1e-300)
    return np.sum(lam > tol * scale, axis=-1)


def _bartlett(alg: JordanAlgebra, delta: float, L: np.ndarray, count: int, rng) -> np.ndarray:
    r = alg.r
    A = np.zeros((count, r, r))
    il = np.tril_indices(r, -1)
    A[:, il[0], il[1]] = rng.standard_normal((count, len(il[0])))
    A[:, np.arange(r), np.arange(r)] = np.sqrt(rng.chisquare(delta - np.arange(r), size=(count, r)))
    G = L @ A
    return G @ np.swapaxes(G, -1, -2)


def _is_int(v, tol=1e-12):
    return abs(v - round(v)) <= tol


def sample_transitions(alg: JordanAlgebra, delta: float, alpha: np.ndarray, t: float, X: np.ndarray,
                       rng: np.random.Generator, fallback: bool = True, fallback_steps: int = 200) -> np.ndarray:
    """One draw from W(delta, alpha, t, x) for every row x of X (shape (count, n))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    count = X.shape[0]
    if t == 0.0:
        return X.copy()
    r = alg.r
    if r == 1:
        a = float(alpha[0])
        if a == 0.0:
            return X.copy()
        lam = np.clip(X[:, 0], 0.0, None) / (t * a)
        if delta > 0:
            y = rng.noncentral_chisquare(delta, np.maximum(lam, 1e-300), size=count)
        else:
            N = rng.poisson(lam / 2.0)
            y = np.where(N > 0, rng.gamma(np.maximum(N, 1), 2.0), 0.0)
        return (t * a * y)[:, None]
    if alg.is_matrix:
        w, V = np.linalg.eigh(alg.to_natural(t * alpha))
        L = (V * np.sqrt(np.clip(w, 0.0, None))) @ np.conj(V.T)  # sqrt(t alpha), natural
    if alg.kind is Kind.SYM:
        if _is_int(delta) and delta >= 1:
            k = int(round(delta))
            M = _factor(alg, X, k)
            if M is not None:
                G = M + L @ rng.standard_normal((count, r, k))
                return alg.from_natural(G @ np.swapaxes(G, -1, -2))
        elif delta > r - 1:
            kmax = int(_rank(alg, X).max())
            if delta - kmax > r - 1:
                out = _bartlett(alg, delta - kmax, L, count, rng)
                if kmax:
                    M = _factor(alg, X, kmax)
                    G = M + L @ rng.standard_normal((count, r, kmax))
                    out = out + G @ np.swapaxes(G, -1, -2)
                return alg.from_natural(out)
        elif delta == 0 and not np.any(X):
            return np.zeros_like(X)
    elif alg.kind is Kind.HERM and _is_int(delta / 2.0) and delta >= 2:
        k = int(round(delta / 2.0))
        M = _factor(alg, X, k)
        if M is not None:
            Z = (rng.standard_normal((count, r, k)) + 1j * rng.standard_normal((count, r, k)))
            G = M + L @ Z
            return alg.from_natural(G @ np.conj(np.swapaxes(G, -1, -2)))
    if not fallback:
        raise UnsupportedCombination(f"no exact sampler for {alg} with delta = {delta} at this noncentrality")
    warnings.warn(f"no exact sampler for {alg} with delta = {delta}; using {fallback_steps} Euler substeps",
                  RuntimeWarning, stacklevel=2)
    from .affine_params import AffineParameterSet
    from .simulate import euler_advance
    params = AffineParameterSet.bru(alg, Element(alg, alpha), delta)
    return euler_advance(params, X, t / fallback_steps, fallback_steps, rng)


def sample_coords(law: WishartLaw, count: int, seed=None, **kw) -> np.ndarray:
    rng = np.random.default_rng(seed)
    X = np.tile(law.x.coords, (count, 1))
    return sample_transitions(law.algebra, law.delta, law.alpha.coords, law.t, X, rng, **kw)


def sample(law: WishartLaw, count: int, seed=None, **kw) -> list:
    """``count`` independent draws from the law as Elements."""
    return [Element(law.algebra, row) for row in sample_coords(law, count, seed, **kw)]


def density_exists(alpha: Element, B: ConeOperator, rel_tol: float = 1e-10) -> bool:
    """Rank test: [L(alpha), L(B alpha), ..., L(B^{n-1} alpha)] has full rank n."""
    alg = alpha.algebra
    blocks, v = [], alpha.coords.copy()
    for _ in range(alg.n):
        blocks.append(alg.lmat(v))
        v = B.matrix @ v
    s = np.linalg.svd(np.hstack(blocks), compute_uv=False)
    if s[0] == 0.0:
        return False
    return int(np.sum(s > rel_tol * s[0])) == alg.n
