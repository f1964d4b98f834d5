"""Generalized Riccati equations

    d/dt phi = F(psi),   phi(0) = 0
    d/dt psi = R(psi),   psi(0) = u

and their closed-form solutions for Bru (b = delta alpha, B = 0) and Wishart
(B in the Lie algebra of the cone) parameters.  The transform of the
process is E_x exp(-<u, X_t>) = exp(-phi(t, u) - <psi(t, u), x>).
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
import scipy.linalg

from . import jordan as J
from .affine_params import AffineParameterSet, lie_algebra_drift_check, validate
from .errors import (
    AlgebraMismatch,
    DriftNotInLieAlgebra,
    NotAdmissible,
    NotInCone,
    NotInterior,
    StepUnderflow,
)
from .jordan import ConeOperator, Element, JordanAlgebra


@dataclass
class RiccatiFlow:
    """Sampled solution (phi, psi) of the Riccati system started at u."""

    algebra: JordanAlgebra
    u: Element
    times: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    method: str
    stats: dict = field(default_factory=dict)

    def psi_at(self, i: int = -1) -> Element:
        return Element(self.algebra, self.psi[i])

    def phi_at(self, i: int = -1) -> float:
        return float(self.phi[i])

    def transform(self, x: Element, i: int = -1) -> float:
        """exp(-phi - <psi, x>) at grid index i."""
        return float(np.exp(-self.phi[i] - self.psi[i] @ x.coords))

    def table(self) -> np.ndarray:
        return np.column_stack([self.times, self.phi, self.psi])


def _workers(requested: int | None = None) -> int:
    cap = os.environ.get("CONEKIT_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, n)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)
# ---------------------------------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array(_A[6] + [0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def dopri54(rhs: Callable[[np.ndarray], np.ndarray], y0: np.ndarray, t_end: float, *,
            rtol: float = 1e-10, atol: float = 1e-12, grid: Sequence[float] | None = None,
            guard: Callable[[np.ndarray], bool] | None = None, h0: float | None = None,
            max_steps: int = 1_000_000):
    """Adaptive Dormand-Prince integration of an autonomous system y' = rhs(y).

    With a ``grid`` the states at exactly those times are returned (steps are
    clipped to land on them); otherwise every accepted step is recorded,
    starting with t = 0.  ``guard(y)`` returning False rejects a step and
    halves it.  Returns (times, states, stats).
    """
    y = np.asarray(y0, dtype=float).copy()
    targets = [float(t_end)] if grid is None else sorted(float(g) for g in grid)
    if targets and targets[0] < 0.0:
        raise ValueError("integration times must be non-negative")
    t = 0.0
    ts, ys = [], []
    if grid is None:
        ts.append(0.0)
        ys.append(y.copy())
    stats = {"accepted": 0, "rejected": 0, "guard_rejections": 0}
    ti = 0
    while ti < len(targets) and targets[ti] <= 0.0:
        if grid is not None:
            ts.append(0.0)
            ys.append(y.copy())
        ti += 1
    if ti == len(targets):
        return np.array(ts), np.array(ys).reshape(len(ts), -1), stats
    t_last = targets[-1]
    k1 = rhs(y)
    if h0 is None:
        h = 0.01 * (np.linalg.norm(y) + 1e-3) / (np.linalg.norm(k1) + 1e-3)
    else:
        h = float(h0)
    h = min(h, t_last)
    h_min = 1e-14 * t_last
    steps = 0
    while ti < len(targets):
        target = targets[ti]
        hit = t + h >= target - 1e-15 * t_last
        step = target - t if hit else h
        K = [k1]
        for s in range(1, 7):
            y_stage = y + step * sum(a * k for a, k in zip(_A[s], K) if a != 0.0)
            K.append(rhs(y_stage))
        y_new = y_stage  # last tableau row is the 5th-order solution (FSAL)
        err = step * sum(e * k for e, k in zip(_E, K) if e != 0.0)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.max(np.abs(err) / sc))
        steps += 1
        if steps > max_steps:
            raise StepUnderflow(f"exceeded {max_steps} steps")
        fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        if en <= 1.0 and (guard is None or guard(y_new)):
            t = target if hit else t + step
            y = y_new
            k1 = K[6]
            stats["accepted"] += 1
            if grid is None:
                ts.append(t)
                ys.append(y.copy())
            if hit:
                while ti < len(targets) and targets[ti] <= t:
                    if grid is not None:
                        ts.append(targets[ti])
                        ys.append(y.copy())
                    ti += 1
            if not (hit and step < h):
                h = step * fac
        else:
            if en <= 1.0:
                stats["guard_rejections"] += 1
                h = 0.5 * step
            else:
                stats["rejected"] += 1
                h = step * fac
            if h < h_min:
                raise StepUnderflow(f"step size {h:.3e} below {h_min:.3e} at t = {t:.6g}")
    return np.array(ts), np.array(ys), stats


def _interior_guard(alg: JordanAlgebra, atol: float):
    def guard(y):
        return bool(alg.min_eig(y[1:]) > -atol)
    return guard


def _check_admissible(params: AffineParameterSet):
    rep = validate(params, n_boundary_samples=16, seed=0)
    if not rep.admissible:
        names = ", ".join(c.name for c in rep.failures)
        raise NotAdmissible(f"parameters fail: {names}")


def _check_u(params_alg: JordanAlgebra, u: Element) -> Element:
    if not isinstance(u, Element):
        u = Element(params_alg, u)
    if u.algebra != params_alg:
        raise AlgebraMismatch(f"{params_alg} vs {u.algebra}")
    if J.cone_classify(u) is J.ConeClass.OUTSIDE:
        raise NotInCone("u must lie in the closed cone")
    return u


def solve_numeric(params: AffineParameterSet, u: Element, t_end: float, rtol: float = 1e-10,
                  atol: float = 1e-12, times: Sequence[float] | None = None, check: bool = True) -> RiccatiFlow:
    """Integrate the Riccati system with Dormand-Prince 5(4) and an interior guard."""
    alg = params.algebra
    u = _check_u(alg, u)
    if check:
        _check_admissible(params)

    def rhs(y):
        out = np.empty_like(y)
        out[0] = params.F_coords(y[1:])
        out[1:] = params.R_coords(y[1:])
        return out

    y0 = np.concatenate([[0.0], u.coords])
    ts, ys, stats = dopri54(rhs, y0, float(t_end), rtol=rtol, atol=atol, grid=times,
                            guard=_interior_guard(alg, atol))
    stats["min_margin"] = float(np.min(alg.min_eig(ys[:, 1:])))
    return RiccatiFlow(alg, u, ts, ys[:, 0], ys[:, 1:], "numeric", stats)


def solve_batch(params: AffineParameterSet, us: Sequence[Element], t_end: float, workers: int | None = None,
                **kw) -> list:
    """Independent Riccati solves, fanned out over a thread pool."""
    if check := kw.pop("check", True):
        _check_admissible(params)
    n = _workers(workers)
    if n == 1 or len(us) < 2:
        return [solve_numeric(params, u, t_end, check=False, **kw) for u in us]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(lambda u: solve_numeric(params, u, t_end, check=False, **kw), us))


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _logdet_pos(alg: JordanAlgebra, z: np.ndarray) -> np.ndarray:
    return np.sum(np.log(alg.eigvals(z)), axis=-1)


def bru_arrays(alg: JordanAlgebra, alpha: np.ndarray, delta: float, u: np.ndarray, t: float):
    """Batched Bru flow for u in the closed cone.

    psi = P(sqrt u)(e + 2t P(sqrt u) alpha)^{-1}, which equals (u^{-1} + 2t alpha)^{-1}
    for invertible u, and phi = (delta/2) ln det(e + 2t P(sqrt u) alpha).
    """
    u = np.asarray(u, dtype=float)
    if t == 0.0:
        return np.zeros(u.shape[:-1]), u.copy()
    su = alg.sqrt(u)
    Psu = alg.pmat(su)
    z = alg.identity + 2.0 * t * np.einsum("...ij,j->...i", Psu, alpha)
    psi = np.einsum("...ij,...j->...i", Psu, alg.inv(z))
    phi = 0.5 * delta * _logdet_pos(alg, z)
    return phi, psi


def _closed_form_u(alg, u) -> Element:
    if not isinstance(u, Element):
        u = Element(alg, u)
    if u.algebra != alg:
        raise AlgebraMismatch(f"{alg} vs {u.algebra}")
    if np.any(u.coords) and J.cone_classify(u) is not J.ConeClass.INTERIOR:
        raise NotInterior("closed-form flows need u in the open cone (or u = 0)")
    return u


def bru_flow(alpha: Element, delta: float, u: Element, t: float):
    """(phi, psi) of the Bru system: psi = (u^{-1} + 2t alpha)^{-1},
    phi = (delta/2) ln det(e + 2t P(sqrt alpha) u)."""
    alg = alpha.algebra
    u = _closed_form_u(alg, u)
    if t == 0.0 or not np.any(u.coords):
        return 0.0, u
    phi, psi = bru_arrays(alg, alpha.coords, delta, u.coords, float(t))
    return float(phi), Element(alg, psi)


def sigma_B(alpha: Element, B: ConeOperator, t: float, method: str = "quad") -> Element:
    """sigma_t = 2 int_0^t exp(B s) alpha ds.

    ``quad`` uses adaptive Gauss-Kronrod quadrature; ``expm`` uses the
    augmented-matrix exponential and serves as a cross-check.
    """
    n = alpha.algebra.n
    M = B.matrix
    if method == "expm":
        aug = np.zeros((n + 1, n + 1))
        aug[:n, :n] = M
        aug[:n, n] = alpha.coords
        return Element(alpha.algebra, 2.0 * scipy.linalg.expm(t * aug)[:n, n])
    val, _ = scipy.integrate.quad_vec(lambda s: scipy.linalg.expm(s * M) @ alpha.coords, 0.0, t,
                                      epsabs=1e-14, epsrel=1e-13)
    return Element(alpha.algebra, 2.0 * val)


def wishart_flow(alpha: Element, delta: float, B: ConeOperator, u: Element, t: float, check_lie: bool = True):
    """(phi, psi) for R(u) = -2P(u)alpha + B^T u and F(u) = delta <alpha, u>:
    psi = exp(B^T t)(u^{-1} + sigma_t)^{-1}, phi = (delta/2) ln det(e + P(sqrt sigma_t) u)."""
    alg = alpha.algebra
    if check_lie and not lie_algebra_drift_check(B):
        raise DriftNotInLieAlgebra("B does not preserve the cone's automorphism structure")
    u = _closed_form_u(alg, u)
    if t == 0.0 or not np.any(u.coords):
        return 0.0, u
    sig = sigma_B(alpha, B, t).coords
    su = alg.sqrt(u.coords)
    Psu = alg.pmat(su)
    z = alg.identity + Psu @ sig
    psi = scipy.linalg.expm(t * B.matrix.T) @ (Psu @ alg.inv(z))
    phi = 0.5 * delta * _logdet_pos(alg, z)
    return float(phi), Element(alg, psi)


def closed_form_for(params: AffineParameterSet):
    """A (t, u) -> (phi, psi) closure when the parameters admit a closed form, else None."""
    if params.has_jumps or not params.is_conservative:
        return None
    delta = params.bru_delta()
    if delta is None:
        return None
    if not np.any(params.B.matrix):
        return lambda t, u: bru_flow(params.alpha, delta, u, t)
    if lie_algebra_drift_check(params.B):
        return lambda t, u: wishart_flow(params.alpha, delta, params.B, u, t, check_lie=False)
    return None


def closed_form_flow(params: AffineParameterSet, u: Element, times: Sequence[float]) -> RiccatiFlow:
    f = closed_form_for(params)
    if f is None:
        raise DriftNotInLieAlgebra("no closed form: parameters are not of Bru/Wishart type")
    res = [f(float(t), u) for t in times]
    return RiccatiFlow(params.algebra, u, np.asarray(times, dtype=float), np.array([p for p, _ in res]),
                       np.array([s.coords for _, s in res]), "closed")


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def split_flow(params: AffineParameterSet, u: Element, t: float, N: int, rtol: float = 1e-12,
               atol: float = 1e-14, check: bool = True) -> RiccatiFlow:
    """Lie-Trotter splitting into a Bru part with delta = d(r-1) and a jump/drift part.

    The Bru substep is exact; the remainder is integrated numerically.
    Global error is O(1/N).
    """
    alg = params.algebra
    u = _check_u(alg, u)
    if check:
        _check_admissible(params)
    if N < 1:
        raise ValueError("N must be positive")
    d0 = alg.d * (alg.r - 1)
    alpha = params.alpha.coords
    b2 = params.b.coords - d0 * alpha
    rest = params.replace(alpha=alg.zero, b=Element(alg, b2))
    tau = float(t) / N

    def rhs(y):
        out = np.empty_like(y)
        out[0] = rest.F_coords(y[1:])
        out[1:] = rest.R_coords(y[1:])
        return out

    guard = _interior_guard(alg, atol)
    y = u.coords.copy()
    w = 0.0
    times, phis, psis = [0.0], [0.0], [y.copy()]
    for k in range(N):
        phi1, v = bru_arrays(alg, alpha, d0, y, tau)
        if tau > 0.0:
            _, ys, _ = dopri54(rhs, np.concatenate([[0.0], v]), tau, rtol=rtol, atol=atol, guard=guard)
            phi2, y = ys[-1, 0], ys[-1, 1:]
        else:
            phi2, y = 0.0, v
        w += float(phi1) + float(phi2)
        times.append((k + 1) * tau)
        phis.append(w)
        psis.append(y.copy())
    return RiccatiFlow(alg, u, np.array(times), np.array(phis), np.array(psis), "split", {"N": N})


# ---------------------------------------------------------------------------
# semiflow
# ---------------------------------------------------------------------------

@dataclass
class SemiflowCheck:
    ok: bool
    defect: float

    def __bool__(self):
        return self.ok


def verify_semiflow(flow: Callable[[float, Element], tuple], u: Element, t: float, s: float,
                    tol: float = 1e-9) -> SemiflowCheck:
    """Compare (phi, psi)(t + s, u) with phi(t, u) + phi(s, psi(t, u)) and psi(s, psi(t, u))."""
    phi_ts, psi_ts = flow(t + s, u)
    phi_t, psi_t = flow(t, u)
    phi_s, psi_s = flow(s, psi_t)
    d_phi = abs(phi_ts - phi_t - phi_s)
    d_psi = float(np.max(np.abs(psi_ts.coords - psi_s.coords)))
    defect = max(d_phi, d_psi)
    return SemiflowCheck(defect <= tol, defect)


def numeric_flow(params: AffineParameterSet, rtol: float = 1e-10, atol: float = 1e-12):
    """(t, u) -> (phi, psi) closure around :func:`solve_numeric`."""
    _check_admissible(params)

    def f(t, u):
        fl = solve_numeric(params, u, t, rtol=rtol, atol=atol, check=False)
        return fl.phi_at(), fl.psi_at()
    return f
