"""Named parameter sets shared by the acceptance suite, tests and configs."""
from __future__ import annotations

import numpy as np

from .affine_params import AffineParameterSet, AtomicMeasure, ConeValuedMeasure, Truncation
from .jordan import ConeOperator, Element, make_algebra


def s2():
    return make_algebra("sym", 2)


def bru(kind: str, size: int, delta: float, alpha=None) -> AffineParameterSet:
    """Bru parameters with alpha = e unless given."""
    alg = make_algebra(kind, size)
    a = alg.e if alpha is None else Element(alg, alpha)
    return AffineParameterSet.bru(alg, a, delta)


def spin_generator(n: int, boost: float = 0.3, rot: float = 0.5, scale: float = -0.2) -> np.ndarray:
    """Boost along axis 1, rotation in the (2, 3) plane and a dilation: a Lie algebra element of the Lorentz cone."""
    M = scale * np.eye(n)
    M[0, 1] = M[1, 0] = boost
    if n >= 4:
        M[2, 3], M[3, 2] = -rot, rot
    return M


def wishart(kind: str, size: int, delta: float) -> AffineParameterSet:
    """Wishart-type parameters with a drift from the cone's Lie algebra."""
    alg = make_algebra(kind, size)
    rng = np.random.default_rng(17)
    if alg.r == 1:
        return AffineParameterSet.wishart(alg, Element(alg, [0.7]), delta, [[-0.4]])
    alpha = Element(alg, alg.random_cone(rng, None, 0.3, 1.0))
    if alg.is_matrix:
        H = -0.3 * np.eye(alg.r) + 0.2 * rng.standard_normal((alg.r, alg.r))
        if alg.dtype is complex:
            H = H + 0.1j * rng.standard_normal((alg.r, alg.r))
        B = ConeOperator.lyapunov(alg, H)
    else:
        B = ConeOperator(alg, spin_generator(alg.n))
    return AffineParameterSet.wishart(alg, alpha, delta, B)


def jump_s2() -> AffineParameterSet:
    """Diffusion plus constant and state-dependent jumps on S2 (zero truncation)."""
    alg = s2()
    alpha = Element(alg, [0.6, 0.4, 0.1])
    b = 2.0 * alpha + Element(alg, [0.2, 0.1, 0.0])
    B = ConeOperator.lyapunov(alg, [[-0.3, 0.2], [0.1, -0.2]])
    m = AtomicMeasure(alg, [[0.5, 0.2, 0.1]], [0.8])
    mu = ConeValuedMeasure(alg, [[0.3, 0.3, 0.2], [1.2, 0.8, 0.5]], [[0.2, 0.1, 0.0], [0.1, 0.3, 0.05]])
    return AffineParameterSet(alg, alpha, b, B, m=m, mu=mu, truncation=Truncation.ZERO)


def pure_jump_s2() -> AffineParameterSet:
    """alpha = 0: constant drift, linear drift and jumps only."""
    alg = s2()
    b = Element(alg, [0.3, 0.2, 0.05])
    B = ConeOperator.lyapunov(alg, [[-0.4, 0.1], [0.2, -0.3]])
    m = AtomicMeasure(alg, [[0.5, 0.2, 0.1], [0.2, 0.6, -0.1]], [0.8, 0.5])
    mu = ConeValuedMeasure(alg, [[0.3, 0.3, 0.2]], [[0.4, 0.2, 0.05]])
    return AffineParameterSet(alg, alg.zero, b, B, m=m, mu=mu, truncation=Truncation.ZERO)


def broken_s2() -> AffineParameterSet:
    """Bru parameters plus an outward-pointing linear drift (not quasi-monotone)."""
    alg = s2()
    B = np.zeros((3, 3))
    B[0, 1] = B[1, 0] = -1.0
    return AffineParameterSet(alg, alg.e, 3.0 * alg.e, ConeOperator(alg, B))


def admissible_fixtures() -> dict:
    return {
        "bru_r1": bru("sym", 1, 1.0),
        "bru_s2": bru("sym", 2, 3.0),
        "bru_s3": bru("sym", 3, 2.5),
        "bru_spin4": bru("spin", 4, 2.0),
        "bru_herm2": bru("herm", 2, 2.0),
        "wishart_r1": wishart("sym", 1, 1.5),
        "wishart_s2": wishart("sym", 2, 2.0),
        "wishart_s3": wishart("sym", 3, 3.0),
        "wishart_spin4": wishart("spin", 4, 2.5),
        "jump_s2": jump_s2(),
        "pure_jump_s2": pure_jump_s2(),
    }
