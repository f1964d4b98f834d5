import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conekit.affine_params import Truncation
from conekit.jordan import ConeOperator, make_algebra

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ALGEBRAS = [("sym", 1), ("sym", 2), ("sym", 3), ("sym", 4), ("herm", 2), ("herm", 3),
            ("spin", 3), ("spin", 4), ("spin", 5)]


@pytest.fixture(params=ALGEBRAS, ids=lambda a: f"{a[0]}{a[1]}")
def alg(request):
    return make_algebra(*request.param)


algebras = st.sampled_from(ALGEBRAS).map(lambda a: make_algebra(*a))


def coords(alg, lo=-3.0, hi=3.0):
    return hnp.arrays(np.float64, alg.n, elements=st.floats(lo, hi, allow_nan=False, width=64))


@st.composite
def alg_and(draw, count=1, lo=-3.0, hi=3.0):
    """An algebra and ``count`` coordinate vectors in it."""
    a = draw(algebras)
    return (a,) + tuple(draw(coords(a, lo, hi)) for _ in range(count))


@st.composite
def alg_and_cone(draw, count=1, low=0.1, high=2.0):
    """An algebra and ``count`` interior cone elements with eigenvalues in [low, high]."""
    a = draw(algebras)
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return (a,) + tuple(a.random_cone(rng, None, low, high) for _ in range(count))


def indicator_version(p):
    """Same process written with the indicator-ball truncation."""
    chi = p.replace(truncation=Truncation.INDICATOR_BALL).chi(p.mu.points)
    B = p.B.matrix + chi.T @ p.mu.values
    return p.replace(B=ConeOperator(p.algebra, B), truncation=Truncation.INDICATOR_BALL)
