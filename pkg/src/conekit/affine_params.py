"""Parameter sets of affine processes on a symmetric cone.

A parameter set (alpha, b, B, c, gamma, m, mu) with a truncation function chi
determines the Riccati functions

    F(u) = <b, u> + c - sum_k w_k (exp(-<u, xi_k>) - 1)
    R(u) = -2 P(u) alpha + B^T(u) + gamma
           - sum_k (exp(-<u, zeta_k>) - 1 + <chi(zeta_k), u>) c_k

where m = sum_k w_k delta_{xi_k} is the constant jump measure and
mu = sum_k c_k delta_{zeta_k} the state-dependent (cone valued) one.
The diffusion matrix at a state x is A(x) = 4 P(x, alpha).
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import jordan as J
from .errors import AlgebraMismatch, ConfigError, InvalidSize, NotInCone
from .jordan import ConeOperator, Element, JordanAlgebra

CONE_TOL = 1e-9


class Truncation(str, enum.Enum):
    INDICATOR_BALL = "IndicatorBall"
    ZERO = "Zero"


def _points(alg: JordanAlgebra, pts) -> np.ndarray:
    arr = np.asarray([p.coords if isinstance(p, Element) else p for p in pts], dtype=float)
    if arr.size == 0:
        return np.zeros((0, alg.n))
    if arr.ndim != 2 or arr.shape[1] != alg.n:
        raise InvalidSize(f"atoms on {alg} need {alg.n} coordinates")
    return arr


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite positive measure sum_k w_k delta_{xi_k} on the cone."""

    algebra: JordanAlgebra
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = _points(self.algebra, self.points)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise InvalidSize("one weight per atom")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def empty(cls, algebra):
        return cls(algebra, np.zeros((0, algebra.n)), np.zeros(0))

    def __len__(self):
        return len(self.weights)

    @property
    def total(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True, eq=False)
class ConeValuedMeasure:
    """Cone valued measure sum_k c_k delta_{xi_k}, with c_k in the cone."""

    algebra: JordanAlgebra
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = _points(self.algebra, self.points)
        vals = _points(self.algebra, self.values)
        if vals.shape != pts.shape:
            raise InvalidSize("one cone value per atom")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @classmethod
    def empty(cls, algebra):
        z = np.zeros((0, algebra.n))
        return cls(algebra, z, z)

    def __len__(self):
        return len(self.points)


def _as_element(alg, x) -> Element:
    if isinstance(x, Element):
        if x.algebra != alg:
            raise AlgebraMismatch(f"{alg} vs {x.algebra}")
        return x
    return Element(alg, x)


@dataclass(frozen=True, eq=False)
class AffineParameterSet:
    algebra: JordanAlgebra
    alpha: Element
    b: Element
    B: ConeOperator
    c: float = 0.0
    gamma: Element | None = None
    m: AtomicMeasure | None = None
    mu: ConeValuedMeasure | None = None
    truncation: Truncation = Truncation.INDICATOR_BALL

    def __post_init__(self):
        alg = self.algebra
        object.__setattr__(self, "alpha", _as_element(alg, self.alpha))
        object.__setattr__(self, "b", _as_element(alg, self.b))
        B = self.B if isinstance(self.B, ConeOperator) else ConeOperator(alg, self.B)
        if B.algebra != alg:
            raise AlgebraMismatch(f"{alg} vs {B.algebra}")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "gamma", alg.zero if self.gamma is None else _as_element(alg, self.gamma))
        for name, cls in (("m", AtomicMeasure), ("mu", ConeValuedMeasure)):
            meas = getattr(self, name)
            if meas is None:
                object.__setattr__(self, name, cls.empty(alg))
            elif meas.algebra != alg:
                raise AlgebraMismatch(f"{alg} vs {meas.algebra}")
        object.__setattr__(self, "truncation", Truncation(self.truncation))

    # -- convenience constructors -----------------------------------------
    @classmethod
    def bru(cls, algebra, alpha, delta: float) -> "AffineParameterSet":
        """Pure diffusion with b = delta * alpha and no linear drift."""
        a = _as_element(algebra, alpha)
        return cls(algebra, a, delta * a, ConeOperator.zero(algebra))

    @classmethod
    def wishart(cls, algebra, alpha, delta: float, B) -> "AffineParameterSet":
        a = _as_element(algebra, alpha)
        if not isinstance(B, ConeOperator):
            B = ConeOperator(algebra, B)
        return cls(algebra, a, delta * a, B)

    def replace(self, **kw) -> "AffineParameterSet":
        fields = dict(algebra=self.algebra, alpha=self.alpha, b=self.b, B=self.B, c=self.c,
                      gamma=self.gamma, m=self.m, mu=self.mu, truncation=self.truncation)
        fields.update(kw)
        return AffineParameterSet(**fields)

    # -- derived quantities ---------------------------------------------------
    @property
    def has_jumps(self) -> bool:
        return len(self.m) > 0 or len(self.mu) > 0

    @property
    def is_conservative(self) -> bool:
        return self.c == 0.0 and not np.any(self.gamma.coords)

    def chi(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.truncation is Truncation.ZERO:
            return np.zeros_like(xi)
        inside = np.linalg.norm(xi, axis=-1) <= 1.0
        return xi * inside[..., None]

    def drift_tilde(self) -> np.ndarray:
        """Matrix of B_chi(x) = B(x) - sum_k chi(zeta_k) <c_k, x>, the drift between jumps."""
        M = self.B.matrix.copy()
        if len(self.mu):
            M -= self.chi(self.mu.points).T @ self.mu.values
        return M

    def to_zero_truncation(self) -> "AffineParameterSet":
        """Equivalent parameters under the truncation chi = 0."""
        if self.truncation is Truncation.ZERO:
            return self
        return self.replace(B=ConeOperator(self.algebra, self.drift_tilde()), truncation=Truncation.ZERO)

    def bru_delta(self, tol: float = 1e-12) -> float | None:
        """delta if b = delta * alpha (with alpha != 0), else None."""
        a, b = self.alpha.coords, self.b.coords
        aa = a @ a
        if aa == 0.0:
            return None
        delta = float(b @ a / aa)
        if np.linalg.norm(b - delta * a) > tol * max(1.0, np.linalg.norm(b)):
            return None
        return delta

    # -- Riccati right-hand sides on raw coordinates (batched) ---------------
    def F_coords(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = u @ self.b.coords + self.c
        if len(self.m):
            out = out - (np.expm1(-(u @ self.m.points.T)) @ self.m.weights)
        return out

    def R_coords(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        alg = self.algebra
        out = -2.0 * alg.quad(u, self.alpha.coords) + u @ self.B.matrix + self.gamma.coords
        if len(self.mu):
            z = self.mu.points
            coef = np.expm1(-(u @ z.T)) + u @ self.chi(z).T
            out = out - coef @ self.mu.values
        return out

    # -- serialisation --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "algebra": {"kind": self.algebra.kind.value, "size": self.algebra.size},
            "alpha": self.alpha.coords.tolist(),
            "b": self.b.coords.tolist(),
            "B": self.B.matrix.tolist(),
            "c": self.c,
            "gamma": self.gamma.coords.tolist(),
            "m": [{"xi": p.tolist(), "w": float(w)} for p, w in zip(self.m.points, self.m.weights)],
            "mu": [{"xi": p.tolist(), "c": v.tolist()} for p, v in zip(self.mu.points, self.mu.values)],
            "truncation": self.truncation.value,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AffineParameterSet":
        return params_from_dict(doc)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_element(alg: JordanAlgebra, spec: Any, name: str = "element") -> Element:
    """Accepts coordinates, ``identity``/``zero``, a multiple ``"2*identity"``,
    ``{"natural": ...}`` or ``{"coords": ...}``."""
    try:
        if isinstance(spec, Element):
            return _as_element(alg, spec)
        if spec is None or (isinstance(spec, str) and spec.strip() == "zero"):
            return alg.zero
        if isinstance(spec, str):
            s = spec.strip()
            factor = 1.0
            if "*" in s:
                f, _, s = s.partition("*")
                factor = float(f)
            if s in ("identity", "e"):
                return factor * alg.e
            if s == "zero":
                return alg.zero
            raise ConfigError(f"{name}: unknown element keyword {spec!r}")
        if isinstance(spec, dict):
            if "natural" in spec:
                M = np.asarray(spec["natural"], dtype=complex if alg.kind is J.Kind.HERM else float)
                return alg.natural_element(M)
            if "coords" in spec:
                return Element(alg, spec["coords"])
            raise ConfigError(f"{name}: element object needs 'coords' or 'natural'")
        return Element(alg, spec)
    except ConfigError:
        raise
    except (ValueError, TypeError, InvalidSize) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def parse_operator(alg: JordanAlgebra, spec: Any, name: str = "B") -> ConeOperator:
    try:
        if spec is None or spec == "zero":
            return ConeOperator.zero(alg)
        if isinstance(spec, dict):
            if "H" in spec:
                H = np.asarray(spec["H"], dtype=complex if alg.kind is J.Kind.HERM else float)
                return ConeOperator.lyapunov(alg, H)
            if "scalar" in spec:
                return float(spec["scalar"]) * ConeOperator.identity(alg)
            raise ConfigError(f"{name}: operator object needs 'H' or 'scalar'")
        return ConeOperator(alg, spec)
    except ConfigError:
        raise
    except (ValueError, TypeError, InvalidSize) as exc:
        raise ConfigError(f"{name}: {exc}") from None


def params_from_dict(doc: dict) -> AffineParameterSet:
    if not isinstance(doc, dict):
        raise ConfigError("parameter document must be a JSON object")
    if "algebra" not in doc:
        raise ConfigError("missing field 'algebra'")
    try:
        alg = J.parse_algebra(doc["algebra"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"algebra: {exc}") from None
    if "alpha" not in doc:
        raise ConfigError("missing field 'alpha'")
    alpha = parse_element(alg, doc["alpha"], "alpha")
    if "b" in doc:
        b = parse_element(alg, doc["b"], "b")
    elif "delta" in doc:
        b = float(doc["delta"]) * alpha
    else:
        raise ConfigError("missing field 'b' (or 'delta')")
    B = parse_operator(alg, doc.get("B"), "B")
    gamma = parse_element(alg, doc.get("gamma"), "gamma")
    try:
        c = float(doc.get("c", 0.0))
        m_pts = [parse_element(alg, a["xi"], f"m[{i}].xi").coords for i, a in enumerate(doc.get("m", []))]
        m_w = [float(a["w"]) for a in doc.get("m", [])]
        mu_pts = [parse_element(alg, a["xi"], f"mu[{i}].xi").coords for i, a in enumerate(doc.get("mu", []))]
        mu_c = [parse_element(alg, a["c"], f"mu[{i}].c").coords for i, a in enumerate(doc.get("mu", []))]
        trunc = Truncation(doc.get("truncation", "IndicatorBall"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"jump or scalar field: {exc}") from None
    return AffineParameterSet(alg, alpha, b, B, c, gamma,
                              AtomicMeasure(alg, np.reshape(m_pts, (-1, alg.n)), m_w),
                              ConeValuedMeasure(alg, np.reshape(mu_pts, (-1, alg.n)),
                                                np.reshape(mu_c, (-1, alg.n))),
                              trunc)


def load_params(path) -> AffineParameterSet:
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return params_from_dict(doc)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _require_cone(x: Element, what: str):
    if J.cone_classify(x) is J.ConeClass.OUTSIDE:
        raise NotInCone(f"{what} must lie in the closed cone")


def eval_F(params: AffineParameterSet, u: Element) -> float:
    _as_element(params.algebra, u)
    _require_cone(u, "u")
    return float(params.F_coords(u.coords))


def eval_R(params: AffineParameterSet, u: Element) -> Element:
    _as_element(params.algebra, u)
    _require_cone(u, "u")
    return Element(params.algebra, params.R_coords(u.coords))


def diffusion_operator(params: AffineParameterSet, x: Element) -> ConeOperator:
    """A(x) with <u, A(x) v> = 4 <x, P(u, v) alpha>; equals 4 P(x, alpha)."""
    x = _as_element(params.algebra, x)
    _require_cone(x, "x")
    return 4.0 * J.quad_rep_polarized(x, params.alpha)


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    verdict: str
    detail: str = ""
    samples: int = 0
    witness: dict | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "verdict": self.verdict,
                "detail": self.detail, "samples": self.samples, "witness": self.witness}


@dataclass
class ValidationReport:
    algebra: JordanAlgebra
    checks: list = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"algebra": self.algebra.descriptor(), "admissible": self.admissible,
                "checks": [c.to_dict() for c in self.checks]}

    def summary(self) -> str:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.verdict} {c.detail}".rstrip()
                 for c in self.checks]
        return "\n".join(lines)


def _cone_check(alg, name, coords, what) -> Check:
    lam = alg.eigvals(coords)
    cls = int(alg.classify(coords, CONE_TOL))
    ok = cls >= 0
    return Check(name, ok, "pass" if ok else "fail-with-witness",
                 f"{what}; min eigenvalue {lam[-1]:.3e}", 1,
                 None if ok else {"min_eigenvalue": float(lam[-1]), "coords": np.asarray(coords).tolist()})


def _fixed_frames(alg, count=3):
    rng = np.random.default_rng(20240611)
    frames = [alg.canonical_frame()]
    frames += list(alg.random_frame(rng, count))
    return frames


def _inward_value(Bt: np.ndarray, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    # <x, B^T u> - sum_k <chi(zeta_k), u> <x, c_k> = <B_chi x, u>
    return np.einsum("...i,ij,...j->...", u, Bt, x)


def _inward_check(params, n_samples, rng) -> Check:
    alg = params.algebra
    Bt = params.drift_tilde()
    scale = max(1.0, np.abs(Bt).max())
    xs, us = [], []
    if alg.r >= 2:
        for frame in _fixed_frames(alg):
            for i in range(alg.r):
                for j in range(alg.r):
                    if i != j:
                        xs.append(frame[i])
                        us.append(frame[j])
            fr = [Element(alg, p) for p in frame]
            for i in range(alg.r):
                for j in range(i + 1, alg.r):
                    base = frame[i] + frame[j]
                    for w in J.peirce_basis(fr, i, j):
                        xs.append(base + np.sqrt(2.0) * w)
                        us.append(base - np.sqrt(2.0) * w)
        if n_samples > 0:
            frames = alg.random_frame(rng, n_samples)
            mask = np.zeros((n_samples, alg.r), dtype=bool)
            for k in range(n_samples):
                size = rng.integers(1, alg.r)
                mask[k, rng.permutation(alg.r)[:size]] = True
            a = rng.uniform(0.1, 2.0, (n_samples, alg.r))
            xs.extend(np.einsum("ki,kij->kj", a * mask, frames))
            us.extend(np.einsum("ki,kij->kj", a[:, ::-1] * ~mask, frames))
    if not xs:
        return Check("inward_drift", True, "pass-certified-on-samples", "no orthogonal pairs in rank one", 0)
    X, U = np.array(xs), np.array(us)
    vals = _inward_value(Bt, X, U)
    tol = 1e-10 * scale * np.linalg.norm(X, axis=1) * np.linalg.norm(U, axis=1)
    bad = np.nonzero(vals < -tol)[0]
    if bad.size:
        k = bad[np.argmin(vals[bad])]
        return Check("inward_drift", False, "fail-with-witness",
                     f"<x, B^T u> - jump compensator = {vals[k]:.3e} < 0", len(vals),
                     {"x": X[k].tolist(), "u": U[k].tolist(), "value": float(vals[k])})
    return Check("inward_drift", True, "pass-certified-on-samples",
                 f"min value {vals.min():.3e}", len(vals))


def validate(params: AffineParameterSet, n_boundary_samples: int = 256, seed: int = 0) -> ValidationReport:
    """Check the admissibility conditions; failures are report entries, not exceptions."""
    alg = params.algebra
    rng = np.random.default_rng(seed)
    rep = ValidationReport(alg)
    d, r = alg.d, alg.r
    rep.checks.append(_cone_check(alg, "alpha_in_cone", params.alpha.coords, "alpha in K"))
    rep.checks.append(_cone_check(alg, "constant_drift", params.b.coords - d * (r - 1) * params.alpha.coords,
                                  f"b - {d * (r - 1)} alpha in K"))
    ok = params.c >= 0.0
    rep.checks.append(Check("killing_rate", ok, "pass" if ok else "fail-with-witness", f"c = {params.c}", 1,
                            None if ok else {"c": params.c}))
    rep.checks.append(_cone_check(alg, "gamma_in_cone", params.gamma.coords, "gamma in K"))
    for name, pts, extra in (("m_support", params.m.points, params.m.weights),
                             ("mu_support", params.mu.points, None)):
        bad = [k for k, p in enumerate(pts) if alg.classify(p, CONE_TOL) < 0]
        if extra is not None:
            bad += [k for k, w in enumerate(extra) if not w >= 0.0]
        ok = not bad
        rep.checks.append(Check(name, ok, "pass" if ok else "fail-with-witness",
                                f"{len(pts)} atoms", len(pts), None if ok else {"atoms": sorted(set(bad))}))
    bad = [k for k, v in enumerate(params.mu.values) if alg.classify(v, CONE_TOL) < 0]
    rep.checks.append(Check("mu_values", not bad, "pass" if not bad else "fail-with-witness",
                            f"{len(params.mu)} cone values", len(params.mu), {"atoms": bad} if bad else None))
    rep.checks.append(_inward_check(params, n_boundary_samples, rng))
    return rep


@dataclass
class QuasiMonotoneResult:
    ok: bool
    samples: int
    witness: dict | None = None
    min_gap: float = 0.0

    def __bool__(self):
        return self.ok


def sample_monotone_triples(alg: JordanAlgebra, n: int, rng: np.random.Generator):
    """Triples (x, u, v): x on the boundary, u in K, v - u in K orthogonal to x."""
    frames = alg.random_frame(rng, n)
    mask = np.zeros((n, alg.r), dtype=bool)
    if alg.r >= 2:
        for k in range(n):
            mask[k, rng.permutation(alg.r)[: rng.integers(1, alg.r)]] = True
    a = rng.uniform(0.1, 2.0, (n, alg.r))
    x = np.einsum("ki,kij->kj", a * mask, frames)
    comp = np.einsum("ki,kij->kj", (~mask).astype(float), frames)
    y = alg.random_cone(rng, n, 0.0, 2.0)
    w = np.einsum("kij,kj->ki", alg.pmat(comp), y)
    u = alg.random_cone(rng, n, 0.0, 2.0)
    return x, u, u + w


def check_quasi_monotone(params: AffineParameterSet, n_samples: int = 10_000, seed: int = 0,
                         tol: float = 1e-9) -> QuasiMonotoneResult:
    """Sample <R(u), x> <= <R(v), x> over boundary triples and report a witness on failure."""
    alg = params.algebra
    rng = np.random.default_rng(seed)
    x, u, v = sample_monotone_triples(alg, n_samples, rng)
    Ru = np.einsum("ki,ki->k", params.R_coords(u), x)
    Rv = np.einsum("ki,ki->k", params.R_coords(v), x)
    gap = Rv - Ru
    scale = 1.0 + np.abs(Ru) + np.abs(Rv)
    bad = np.nonzero(gap < -tol * scale)[0]
    if bad.size:
        k = bad[np.argmin(gap[bad] / scale[bad])]
        return QuasiMonotoneResult(False, n_samples,
                                   {"x": x[k].tolist(), "u": u[k].tolist(), "v": v[k].tolist(),
                                    "gap": float(gap[k])}, float(gap.min()))
    return QuasiMonotoneResult(True, n_samples, None, float(gap.min()) if n_samples else 0.0)


def lie_algebra_residual(B: ConeOperator, n_samples: int = 32, seed: int = 0) -> float:
    """max over samples of |2 P(B u, u) - B P(u) - P(u) B^T| relative to |B| |u|^2."""
    alg = B.algebra
    rng = np.random.default_rng(seed)
    M = B.matrix
    worst = 0.0
    for u in alg.random(rng, n_samples):
        lhs = 2.0 * alg.pmat2(M @ u, u)
        Pu = alg.pmat(u)
        rhs = M @ Pu + Pu @ M.T
        denom = max(np.abs(M).max(), 1e-300) * (u @ u)
        worst = max(worst, np.abs(lhs - rhs).max() / denom)
    return worst


def lie_algebra_drift_check(B: ConeOperator, n_samples: int = 32, seed: int = 0, tol: float = 1e-9) -> bool:
    """True if B lies in the Lie algebra of the cone's automorphism group."""
    if not np.any(B.matrix):
        return True
    return lie_algebra_residual(B, n_samples, seed) <= tol


@dataclass(frozen=True)
class BoundaryFlags:
    conservative: bool
    boundary_non_attainment: bool


def conservativeness_and_boundary_checks(params: AffineParameterSet) -> BoundaryFlags:
    """Sufficient conditions: c = 0 and gamma = 0 give a conservative process;
    b - (d(r-1) + 2) alpha in K (dim V > 2) keeps the process off the boundary."""
    alg = params.algebra
    conservative = params.is_conservative
    shifted = params.b.coords - (alg.d * (alg.r - 1) + 2) * params.alpha.coords
    interior = alg.n > 2 and int(alg.classify(shifted, CONE_TOL)) >= 0
    return BoundaryFlags(conservative, bool(interior))
