"""Acceptance suite: twelve standalone criteria with fixed seeds and tolerances.

Each ``criterion_k`` returns a :class:`CriterionResult`; :func:`run_all`
prints one line per criterion.  The suite is used by ``conekit selftest``
and by ``tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.special
import scipy.stats

from . import exotic, fixtures, simulate
from . import jordan as J
from . import riccati as R
from . import wishart as W
from .affine_params import check_quasi_monotone, diffusion_operator
from .jordan import Element, make_algebra


@dataclass
class CriterionResult:
    id: int
    title: str
    passed: bool
    detail: str
    seconds: float
    limit: float | None = None

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        lim = f", limit {self.limit:.0f} s" if self.limit else ""
        return f"[{tag}] {self.id:>2} {self.title}: {self.detail} ({self.seconds:.1f} s{lim})"

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "passed": self.passed, "detail": self.detail,
                "seconds": round(self.seconds, 3), "limit": self.limit}


def _timed(cid, title, limit=None):
    def deco(fn):
        def run():
            t0 = time.perf_counter()
            ok, detail = fn()
            dt = time.perf_counter() - t0
            if limit is not None and dt >= limit:
                ok, detail = False, detail + f"; runtime {dt:.1f} s over {limit} s"
            return CriterionResult(cid, title, bool(ok), detail, dt, limit)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        run.cid = cid
        run.title = title
        return run
    return deco


# ---------------------------------------------------------------------------

@_timed(1, "Jordan kernel oracle equivalence", limit=10.0)
def criterion_1():
    worst = {}
    for size in (2, 3):
        alg = make_algebra("sym", size)
        rng = np.random.default_rng(100 + size)
        x, y = alg.random(rng, 1000), alg.random(rng, 1000)
        X, Y = alg.to_natural(x), alg.to_natural(y)
        e_p = np.abs(np.einsum("kij,kj->ki", alg.pmat(x), y) - alg.from_natural(X @ Y @ X)).max()
        lam = np.linalg.eigvalsh(X)
        e_det = np.abs(alg.det(x) - np.prod(lam, axis=-1)).max()
        e_tr = np.abs(alg.trace(x) - np.sum(lam, axis=-1)).max()
        z = alg.random_cone(rng, 1000, 0.1, 2.0)
        e_inv = np.abs(alg.product(z, alg.inv(z)) - alg.identity).max()
        worst[f"S{size}"] = max(e_p, e_det, e_tr, e_inv)
    m = max(worst.values())
    return m < 1e-10, "max abs error " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())


@_timed(2, "Trace identity")
def criterion_2():
    worst = {}
    for kind, size in (("sym", 2), ("sym", 3), ("spin", 4), ("spin", 5)):
        alg = make_algebra(kind, size)
        rng = np.random.default_rng(200 + alg.n)
        x = alg.random_cone(rng, 1000, 0.1, 2.0)
        a = alg.random_cone(rng, 1000, 0.0, 2.0)
        xinv = alg.inv(x)
        A = 4.0 * alg.pmat2(x, a)
        lhs = np.einsum("kij,kji->k", A, alg.pmat(xinv))
        rhs = 4.0 * alg.n / alg.r * np.sum(xinv * a, axis=-1)
        worst[repr(alg)] = float(np.abs(lhs - rhs).max())
    # the operator built through the public API agrees with the batched one
    alg = make_algebra("sym", 2)
    p = fixtures.bru("sym", 2, 3.0, [0.7, 0.4, 0.2])
    x = Element(alg, [1.0, 0.5, 0.3])
    api = diffusion_operator(p, x).matrix
    worst["api"] = float(np.abs(api - 4.0 * alg.pmat2(x.coords, p.alpha.coords)).max())
    m = max(worst.values())
    return m < 1e-9, "max |lhs - rhs| " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())


@_timed(3, "Riccati closed-form agreement", limit=30.0)
def criterion_3():
    grid = np.linspace(0.0, 2.0, 20)
    worst = {}
    for kind, size in (("sym", 1), ("sym", 2), ("sym", 3), ("spin", 4)):
        alg = make_algebra(kind, size)
        rng = np.random.default_rng(300 + alg.n)
        for label, p in (("bru", fixtures.bru(kind, size, float(alg.d * (alg.r - 1) + 1.5),
                                             alg.random_cone(rng, None, 0.3, 1.0))),
                         ("wishart", fixtures.wishart(kind, size, float(alg.d * (alg.r - 1) + 2.0)))):
            f = R.closed_form_for(p)
            err = 0.0
            for u in alg.random_cone(rng, 2, 0.2, 2.0):
                u = Element(alg, u)
                num = R.solve_numeric(p, u, 2.0, rtol=1e-10, atol=1e-12, times=grid)
                for i, t in enumerate(grid):
                    phi, psi = f(float(t), u)
                    err = max(err, abs(num.phi[i] - phi), float(np.abs(num.psi[i] - psi.coords).max()))
            worst[f"{label} {alg!r}"] = err
    m = max(worst.values())
    return m < 1e-8, f"max error {m:.1e} over " + ", ".join(worst)


@_timed(4, "Semiflow defects")
def criterion_4():
    rng = np.random.default_rng(400)
    alg = make_algebra("sym", 2)
    closed = {"bru_s2": R.closed_form_for(fixtures.bru("sym", 2, 3.0, [0.8, 0.5, 0.2])),
              "wishart_s2": R.closed_form_for(fixtures.wishart("sym", 2, 2.0))}
    numeric = {"jump_s2": R.numeric_flow(fixtures.jump_s2())}
    out, ok = [], True
    for group, flows, tol in (("closed", closed, 1e-9), ("numeric", numeric, 1e-7)):
        for name, f in flows.items():
            worst = 0.0
            for _ in range(100):
                t, s = rng.uniform(0.0, 1.5, 2)
                u = Element(alg, alg.random_cone(rng, None, 0.1, 2.0))
                worst = max(worst, R.verify_semiflow(f, u, float(t), float(s), tol).defect)
            ok &= worst < tol
            out.append(f"{name} {worst:.1e} (< {tol:.0e})")
    return ok, ", ".join(out)


@_timed(5, "Splitting convergence order")
def criterion_5():
    p = fixtures.jump_s2()
    u = Element(p.algebra, [1.0, 0.7, 0.3])
    ref = R.solve_numeric(p, u, 1.0, rtol=1e-12, atol=1e-14)
    Ns = np.array([8, 16, 32, 64])
    errs = np.array([np.abs(R.split_flow(p, u, 1.0, int(N)).psi[-1] - ref.psi[-1]).max() for N in Ns])
    order = -np.polyfit(np.log(Ns), np.log(errs), 1)[0]
    return order >= 0.9, "errors " + ", ".join(f"{e:.2e}" for e in errs) + f"; order {order:.3f}"


def scalar_noncentral_density(xi, delta, alpha, t, x, terms: int = 2000):
    """Poisson mixture of gamma densities: sum_k Pois(k; x/(2 t alpha)) Gamma(xi; delta/2 + k, 2 t alpha)."""
    s = 2.0 * t * alpha
    lam = x / s
    k = np.arange(terms)
    h = 0.5 * delta + k
    logp = -lam + k * math.log(lam) - scipy.special.gammaln(k + 1) if lam > 0 else np.where(k == 0, 0.0, -np.inf)
    logg = (h - 1) * math.log(xi) - xi / s - scipy.special.gammaln(h) - h * math.log(s)
    return float(np.exp(scipy.special.logsumexp(logp + logg)))


@_timed(6, "Rank-1 reduction")
def criterion_6():
    alg = make_algebra("sym", 1)
    rng = np.random.default_rng(600)
    e_tr = 0.0
    for _ in range(200):
        delta, a, t, x, u = rng.uniform(0.0, 3.0), rng.uniform(0.1, 2.0), rng.uniform(0.0, 2.0), \
            rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0)
        law = W.WishartLaw(alg, delta, Element(alg, [a]), t, Element(alg, [x]))
        want = (1 + 2 * t * a * u) ** (-delta / 2) * math.exp(-u * x / (1 + 2 * t * a * u))
        e_tr = max(e_tr, abs(W.laplace(law, Element(alg, [u])) - want))
    e_d = 0.0
    for _ in range(50):
        delta, a, t, x, xi = rng.uniform(0.2, 4.0), rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0), \
            rng.uniform(0.0, 3.0), rng.uniform(0.05, 8.0)
        law = W.WishartLaw(alg, delta, Element(alg, [a]), t, Element(alg, [x]))
        got = W.noncentral_density(law, Element(alg, [xi]), series_cap=60, raise_on_tail=False).value
        want = scalar_noncentral_density(xi, delta, a, t, x)
        e_d = max(e_d, abs(got - want) / max(1.0, want))
    return e_tr < 1e-12 and e_d < 1e-10, f"transform error {e_tr:.1e}, density error {e_d:.1e}"


@_timed(7, "Density normalization")
def criterion_7():
    alg = make_algebra("sym", 2)
    law = W.WishartLaw(alg, 3.0, 0.5 * alg.e, 1.0)

    def f(l2, l1):
        xi = Element(alg, [l1, l2, 0.0])
        return W.central_density(law, xi) * (l1 - l2)

    # S2 in orthonormal coordinates: dx = sqrt(2) pi |l1 - l2| dl1 dl2 over l1 > l2
    inner, _ = scipy.integrate.dblquad(f, 0.0, np.inf, lambda l1: 0.0, lambda l1: l1, epsabs=1e-12, epsrel=1e-10)
    total_s2 = math.sqrt(2.0) * math.pi * inner
    r1 = make_algebra("sym", 1)
    law1 = W.WishartLaw(r1, 2.5, Element(r1, [0.8]), 0.7, Element(r1, [1.3]))
    total_r1, _ = scipy.integrate.quad(
        lambda v: W.noncentral_density(law1, Element(r1, [v]), series_cap=60, raise_on_tail=False).value,
        0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
    ok = abs(total_s2 - 1.0) <= 1e-3 and abs(total_r1 - 1.0) <= 1e-6
    return ok, f"S2 central {total_s2:.10f}, rank-1 noncentral {total_r1:.10f}"


@_timed(8, "Monte Carlo transform agreement", limit=120.0)
def criterion_8():
    alg = make_algebra("sym", 2)
    us = [Element(alg, u) for u in alg.random_cone(np.random.default_rng(4), 5, 0.1, 1.0)]
    p = fixtures.bru("sym", 2, 3.0)
    ens = simulate.euler_path(p, alg.e, 1.0, 400, 100_000, seed=11, record="final")
    z_bru = []
    for u in us:
        phi, psi = R.bru_flow(alg.e, 3.0, u, 1.0)
        est = simulate.mc_laplace(ens, u)
        z_bru.append((est.mean - math.exp(-phi - psi.coords @ alg.e.coords)) / est.se)
    pj = fixtures.pure_jump_s2()
    ens = simulate.jump_augmented_path(pj, alg.e, 1.0, 400, 100_000, seed=12, record="final")
    z_jump = []
    for u in us:
        est = simulate.mc_laplace(ens, u)
        z_jump.append((est.mean - R.solve_numeric(pj, u, 1.0).transform(alg.e)) / est.se)
    z = np.abs(np.concatenate([z_bru, z_jump]))
    fmt = lambda zs: " ".join(f"{v:+.2f}" for v in zs)
    return bool(np.all(z <= 3.0)), f"z bru [{fmt(z_bru)}], z jump [{fmt(z_jump)}]"


@_timed(9, "Gindikin degeneracy")
def criterion_9():
    alg = make_algebra("sym", 2)
    law = W.WishartLaw(alg, 1.0, Element(alg, [0.9, 0.6, 0.2]), 1.0)
    X = W.sample_coords(law, 1000, seed=9)
    lam = alg.eigvals(X)
    rank = np.sum(lam > 1e-10 * np.abs(lam).max(axis=-1, keepdims=True), axis=-1)
    n1 = int(np.sum(rank == 1))
    return n1 == 1000, f"{n1}/1000 samples of numeric rank 1"


@_timed(10, "Boundary behaviour")
def criterion_10():
    grid = np.linspace(0.0, 1.0, 1001)
    alg = make_algebra("sym", 2)
    ens = simulate.exact_bru_path(alg.e, 3.0, 4.0 * alg.e, grid, 1000, seed=7, record="final")
    f2 = simulate.boundary_stats(ens, 1e-6).fraction_touching
    r1 = make_algebra("sym", 1)
    ens1 = simulate.exact_bru_path(r1.e, 1.0, Element(r1, [0.25]), grid, 1000, seed=7, record="final")
    f1 = simulate.boundary_stats(ens1, 1e-6).fraction_touching
    return f2 == 0.0 and f1 > 0.2, f"S2 delta=3 touching {f2:.3f} (want 0), rank-1 delta=1 touching {f1:.3f} (want > 0.2)"


@_timed(11, "Exotic examples")
def criterion_11():
    spec = exotic.VinbergProcessSpec(2.0, 0.5, (0.7, 0.4), (0.3, -0.6))
    ens = exotic.vinberg_path(spec, 1.5, 500, 100_000, seed=3, record=50)
    rng = np.random.default_rng(5)
    idx = rng.integers(1, len(ens.times), 3)
    zs = []
    for k, u in zip(idx, exotic.random_vinberg_u(rng, 3)):
        est = exotic.vinberg_mc_laplace(ens, u, int(k))
        zs.append((est.mean - exotic.vinberg_laplace(spec, float(ens.times[k]), u)) / est.se)
    pe = exotic.polyhedral_path([0.5, -0.3, 0.8, 0.2], 0.05, 50, 20_000, seed=1, keep_y=False)
    violations = int(np.sum(exotic.PolyhedralConeSpec.slacks(pe.paths) < 0.0))
    mean, se = exotic.drift_estimate(pe)
    zd = (mean - exotic.PolyhedralConeSpec.drift()) / se
    ok = max(abs(v) for v in zs) <= 3.0 and violations == 0 and bool(np.all(np.abs(zd) <= 3.0))
    return ok, (f"vinberg z [{' '.join(f'{v:+.2f}' for v in zs)}], polyhedral violations {violations}, "
                f"drift {np.round(mean, 3).tolist()} z [{' '.join(f'{v:+.2f}' for v in zd)}]")


@_timed(12, "Quasi-monotonicity suite")
def criterion_12():
    bad = []
    for name, p in fixtures.admissible_fixtures().items():
        if not check_quasi_monotone(p, 10_000, seed=12):
            bad.append(name)
    broken = check_quasi_monotone(fixtures.broken_s2(), 10_000, seed=12)
    ok = not bad and not broken.ok and broken.witness is not None
    n = len(fixtures.admissible_fixtures())
    wit = f"witness gap {broken.witness['gap']:.3f}" if broken.witness else "no witness"
    return ok, f"{n - len(bad)}/{n} admissible fixtures pass; broken fixture: {wit}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12]


def run_all(ids=None, stream=print) -> list:
    results = []
    for fn in CRITERIA:
        if ids and fn.cid not in ids:
            continue
        res = fn()
        if stream:
            stream(res.line())
        results.append(res)
    return results
