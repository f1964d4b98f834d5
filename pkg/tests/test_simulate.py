import math

import numpy as np
import pytest
import scipy.linalg
import scipy.stats

from conekit import fixtures
from conekit.affine_params import AffineParameterSet, AtomicMeasure, Truncation
from conekit.errors import NotAdmissible, NotConservative, UnsupportedCombination
from conekit.jordan import ConeOperator, Element, make_algebra
from conekit.riccati import bru_flow, solve_numeric
from conekit.simulate import (BLOCK, boundary_stats, euler_path, exact_bru_path, jump_augmented_path,
                              mc_laplace)
from conekit.wishart import WishartLaw, laplace


def drift_only(alg, b):
    return AffineParameterSet(alg, alg.zero, Element(alg, b), ConeOperator.zero(alg))


def test_deterministic_path_is_linear():
    alg = make_algebra("sym", 2)
    b = [0.5, 0.2, 0.1]
    x0 = Element(alg, [1.0, 1.0, 0.0])
    ens = euler_path(drift_only(alg, b), x0, 2.0, 50, 3, seed=0)
    want = x0.coords + np.outer(ens.times, b)
    for p in range(3):
        np.testing.assert_allclose(ens.paths[p], want, atol=1e-13)
    u = Element(alg, [0.3, 0.4, 0.1])
    est = mc_laplace(ens, u)
    assert est.mean == pytest.approx(math.exp(-u.coords @ want[-1]), rel=1e-13)
    assert est.se == 0.0


def test_zero_argument_transform_is_one():
    p = fixtures.bru("sym", 2, 3.0)
    ens = euler_path(p, p.algebra.e, 1.0, 10, 100, seed=1)
    est = mc_laplace(ens, p.algebra.zero)
    assert est.mean == 1.0 and est.se == 0.0


def test_initial_state_recorded():
    p = fixtures.jump_s2()
    x0 = Element(p.algebra, [1.0, 0.5, 0.2])
    ens = euler_path(p, x0, 1.0, 20, 10, seed=2)
    assert ens.times[0] == 0.0 and ens.times[-1] == pytest.approx(1.0)
    np.testing.assert_array_equal(ens.paths[:, 0], np.tile(x0.coords, (10, 1)))
    assert ens.scheme == "EulerPlusJumps"


def test_rank_one_bru_mean():
    alg = make_algebra("sym", 1)
    p = AffineParameterSet.bru(alg, Element(alg, [0.8]), 2.5)
    ens = euler_path(p, [0.6], 1.0, 100, 100_000, seed=3, record="final")
    X = ens.at()[:, 0]
    want = 0.6 + 2.5 * 0.8 * 1.0
    assert abs(X.mean() - want) < 3 * X.std() / math.sqrt(len(X))


def test_s2_bru_euler_transform():
    p = fixtures.bru("sym", 2, 3.0)
    alg = p.algebra
    x0 = Element(alg, [1.0, 0.8, 0.2])
    u = Element(alg, [0.5, 0.4, 0.1])
    ens = euler_path(p, x0, 0.5, 400, 20_000, seed=4, record="final")
    phi, psi = bru_flow(p.alpha, 3.0, u, 0.5)
    assert mc_laplace(ens, u).within(math.exp(-phi - psi.coords @ x0.coords))


def test_euler_weak_self_convergence():
    alg = make_algebra("sym", 1)
    p = AffineParameterSet.bru(alg, alg.e, 0.5)
    u = Element(alg, [2.0])
    v = {s: mc_laplace(euler_path(p, [0.1], 1.0, s, 100_000, seed=s, record="final"), u).mean
         for s in (4, 16, 64)}
    assert abs(v[64] - v[16]) < abs(v[16] - v[4])


def test_states_never_leave_the_cone():
    p = fixtures.bru("sym", 2, 1.0)
    x0 = Element(p.algebra, [0.3, 0.1, 0.05])
    ens = euler_path(p, x0, 1.0, 100, 500, seed=5)
    assert ens.min_eigs().min() >= -1e-12
    # running_min tracks the unprojected Euler proposal, so excursions show up there
    assert ens.running_min.min() < 0.0


def test_mean_dynamics_at_time_zero():
    p = fixtures.jump_s2()
    alg = p.algebra
    x0 = np.array([1.0, 0.8, 0.3])
    h, steps = 0.01, 10
    ens = euler_path(p, x0, h, steps, 40_000, seed=6, record="final")
    drift = (p.b.coords + p.B.matrix @ x0 + p.m.weights @ p.m.points
             + (p.mu.values @ x0) @ p.mu.points)
    rate = (ens.at() - x0) / h
    se = rate.std(axis=0, ddof=1) / math.sqrt(ens.count)
    assert np.all(np.abs(rate.mean(axis=0) - drift) < 3 * se + 0.05 * np.abs(drift)), (rate.mean(axis=0), drift)


def test_pure_jump_mean_matches_linear_ode():
    p = fixtures.pure_jump_s2()
    alg = p.algebra
    x0 = np.array([0.5, 0.4, 0.1])
    T = 1.0
    ens = jump_augmented_path(p, x0, T, 100, 20_000, seed=7, record="final")
    beta = p.b.coords + p.m.weights @ p.m.points
    M = p.B.matrix + p.mu.points.T @ p.mu.values
    aug = np.zeros((alg.n + 1, alg.n + 1))
    aug[:alg.n, :alg.n], aug[:alg.n, alg.n] = M, beta
    want = (scipy.linalg.expm(T * aug) @ np.r_[x0, 1.0])[:alg.n]
    X = ens.at()
    se = X.std(axis=0, ddof=1) / math.sqrt(len(X))
    # Euler drift error is O(dt); allow it on top of the sampling error
    assert np.all(np.abs(X.mean(axis=0) - want) < 3 * se + 0.01 * np.abs(want)), (X.mean(axis=0), want)


def test_pure_jump_transform_against_riccati():
    p = fixtures.pure_jump_s2()
    alg = p.algebra
    x0 = Element(alg, [0.5, 0.4, 0.1])
    u = Element(alg, [0.6, 0.5, 0.1])
    ens = jump_augmented_path(p, x0, 1.0, 200, 8192, seed=8, record="final")
    fl = solve_numeric(p, u, 1.0)
    assert mc_laplace(ens, u).within(fl.transform(x0), k=3.5)


def test_constant_jump_counts_are_poisson():
    alg = make_algebra("sym", 2)
    w, T = 1.3, 2.0
    p = AffineParameterSet(alg, alg.zero, alg.zero, ConeOperator.zero(alg),
                           m=AtomicMeasure(alg, [[0.2, 0.1, 0.05]], [w]), truncation=Truncation.ZERO)
    ens = jump_augmented_path(p, alg.zero, T, 20, 20_000, seed=9, record="final")
    counts = ens.jump_counts
    np.testing.assert_allclose(ens.at(), np.outer(counts, [0.2, 0.1, 0.05]), atol=1e-12)
    kmax = 7
    obs = np.bincount(np.minimum(counts, kmax), minlength=kmax + 1)
    probs = scipy.stats.poisson.pmf(np.arange(kmax), w * T)
    probs = np.append(probs, 1.0 - probs.sum())
    _, pval = scipy.stats.chisquare(obs, probs * len(counts))
    assert pval > 0.01


def test_no_atoms_matches_euler():
    p = fixtures.wishart("sym", 2, 2.0)
    a = euler_path(p, p.algebra.e, 1.0, 30, 200, seed=10)
    b = jump_augmented_path(p, p.algebra.e, 1.0, 30, 200, seed=10)
    np.testing.assert_array_equal(a.paths, b.paths)


def test_determinism_across_workers(monkeypatch):
    p = fixtures.jump_s2()
    count = BLOCK + 300
    a = euler_path(p, p.algebra.e, 0.5, 5, count, seed=11, record="final", workers=4)
    b = euler_path(p, p.algebra.e, 0.5, 5, count, seed=11, record="final", workers=4)
    monkeypatch.setenv("CONEKIT_THREADS", "1")
    c = euler_path(p, p.algebra.e, 0.5, 5, count, seed=11, record="final", workers=4)
    np.testing.assert_array_equal(a.paths, b.paths)
    np.testing.assert_array_equal(a.paths, c.paths)
    np.testing.assert_array_equal(a.jump_counts, c.jump_counts)
    d = euler_path(p, p.algebra.e, 0.5, 5, count, seed=12, record="final")
    assert not np.array_equal(a.paths, d.paths)


def test_full_blocks_do_not_depend_on_count():
    p = fixtures.bru("sym", 2, 3.0)
    a = euler_path(p, p.algebra.e, 0.5, 5, BLOCK + 10, seed=13, record="final")
    b = euler_path(p, p.algebra.e, 0.5, 5, BLOCK, seed=13, record="final")
    np.testing.assert_array_equal(a.paths[:BLOCK], b.paths)


def test_record_options():
    p = fixtures.bru("sym", 2, 3.0)
    e = euler_path(p, p.algebra.e, 1.0, 10, 5, seed=0, record=4)
    np.testing.assert_allclose(e.times, [0.0, 0.4, 0.8, 1.0])
    f = euler_path(p, p.algebra.e, 1.0, 10, 5, seed=0, record="final")
    np.testing.assert_array_equal(f.at(), e.at())


def test_simulation_errors():
    with pytest.raises(NotAdmissible):
        euler_path(fixtures.broken_s2(), fixtures.s2().e, 1.0, 10, 10)
    p = fixtures.bru("sym", 2, 3.0)
    with pytest.raises(NotConservative):
        euler_path(p.replace(c=0.5), p.algebra.e, 1.0, 10, 10)
    with pytest.raises(NotAdmissible):
        euler_path(p, [1.0, -1.0, 0.0], 1.0, 10, 10)


# -- exact Bru transitions ----------------------------------------------------

def test_chapman_kolmogorov():
    alg = make_algebra("sym", 2)
    alpha = Element(alg, [1.0, 0.6, 0.2])
    x0 = Element(alg, [0.5, 0.9, 0.3])
    u = Element(alg, [0.7, 0.3, 0.2])
    one = exact_bru_path(alpha, 2.0, x0, [0.0, 0.8], 40_000, seed=14)
    two = exact_bru_path(alpha, 2.0, x0, [0.0, 0.4, 0.8], 40_000, seed=15)
    a, b = mc_laplace(one, u), mc_laplace(two, u)
    assert abs(a.mean - b.mean) < 3 * math.hypot(a.se, b.se)
    want = laplace(WishartLaw(alg, 2.0, alpha, 0.8, x0), u)
    assert a.within(want) and b.within(want)


def test_exact_central_marginal_and_rank():
    alg = make_algebra("sym", 3)
    ens = exact_bru_path(alg.e, 1.0, alg.zero, [0.0, 0.3, 1.0], 1000, seed=16)
    lam = alg.eigvals(ens.at())
    assert np.all(np.sum(lam > 1e-10 * lam[:, :1], axis=1) == 1)
    u = Element(alg, alg.random_cone(np.random.default_rng(0), None, 0.2, 1.0))
    big = exact_bru_path(alg.e, 4.0, alg.zero, [0.0, 0.5, 1.0], 20_000, seed=17)
    assert mc_laplace(big, u).within(laplace(WishartLaw(alg, 4.0, alg.e, 1.0), u))


def test_zero_time_grid_keeps_initial_state():
    alg = make_algebra("sym", 2)
    x0 = Element(alg, [1.0, 2.0, 0.5])
    ens = exact_bru_path(alg.e, 3.0, x0, [0.0, 0.0, 0.0], 20, seed=0)
    np.testing.assert_array_equal(ens.paths, np.broadcast_to(x0.coords, ens.paths.shape))


def test_exact_path_unsupported():
    s3 = make_algebra("sym", 3)
    with pytest.raises(UnsupportedCombination):
        exact_bru_path(s3.e, 1.5, s3.e, [0.0, 1.0], 10)
    spin = make_algebra("spin", 4)
    with pytest.raises(UnsupportedCombination):
        exact_bru_path(spin.e, 3.0, spin.e, [0.0, 1.0], 10)


# -- boundary statistics ------------------------------------------------------

def test_boundary_statistics():
    s2 = make_algebra("sym", 2)
    grid = np.linspace(0.0, 1.0, 201)
    inner = exact_bru_path(s2.e, 3.0, 2.0 * s2.e, grid, 500, seed=18)
    assert boundary_stats(inner).fraction_touching == 0.0
    r1 = make_algebra("sym", 1)
    cir = exact_bru_path(r1.e, 1.0, [0.25], grid, 500, seed=19)
    assert boundary_stats(cir, eps=1e-6).fraction_touching > 0.05
    edge = exact_bru_path(s2.e, 3.0, s2.natural_element(np.diag([1.0, 0.0])), grid[:3], 5, seed=0)
    np.testing.assert_allclose(edge.min_eigs()[:, 0], 0.0, atol=1e-15)
    assert np.all(boundary_stats(edge).min_eigen <= 1e-15)


def test_csv_schema():
    p = fixtures.bru("sym", 2, 3.0)
    ens = euler_path(p, p.algebra.e, 1.0, 4, 2, seed=0)
    lines = ens.to_csv().splitlines()
    assert lines[0] == "path_id,t,coord_1,coord_2,coord_3,min_eigen"
    assert len(lines) == 1 + 2 * 5
    row = lines[6].split(",")
    assert row[0] == "1" and float(row[1]) == 0.0
    np.testing.assert_allclose([float(v) for v in row[2:5]], p.algebra.identity)
