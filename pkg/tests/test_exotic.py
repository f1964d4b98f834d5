import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conekit.errors import BlockSingular, NotInCone
from conekit.exotic import (PolyhedralConeSpec, VinbergProcessSpec, covariation_estimate, drift_estimate,
                            in_dual_vinberg_cone, in_vinberg_cone, polyhedral_path, random_vinberg_u,
                            vinberg_coords, vinberg_inner, vinberg_laplace, vinberg_matrix,
                            vinberg_mc_laplace, vinberg_path, vinberg_phi_psi)

SPEC = VinbergProcessSpec(2.0, 0.5, (0.7, 0.4), (0.3, -0.6))


@pytest.fixture(scope="module")
def poly_ensemble():
    return polyhedral_path([0.5, -0.3, 0.8, 0.2], 0.05, 50, 20_000, seed=1)


# -- polyhedral cone ------------------------------------------------------------

def test_zero_start_is_the_apex():
    ens = polyhedral_path(np.zeros(4), 1.0, 10, 5, seed=0)
    np.testing.assert_array_equal(ens.paths[:, 0], 0.0)
    assert np.all(ens.margin[:, 0] == 0.0)


@given(hnp.arrays(np.float64, (8, 4), elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_q_satisfies_the_inequalities_exactly(y):
    spec = PolyhedralConeSpec()
    x = spec.q(y)
    assert np.all(spec.slacks(x) >= 0.0)
    assert np.all(spec.contains(x))


def test_q_matches_generator_sum():
    rng = np.random.default_rng(0)
    y = rng.standard_normal((100, 4))
    spec = PolyhedralConeSpec()
    np.testing.assert_allclose(spec.q(y), (y ** 2) @ spec.generators, rtol=1e-14)


def test_paths_stay_in_the_cone(poly_ensemble):
    spec = PolyhedralConeSpec()
    assert np.all(spec.slacks(poly_ensemble.paths) >= 0.0)
    assert poly_ensemble.margin.min() >= 0.0


def test_drift_estimate(poly_ensemble):
    mean, se = drift_estimate(poly_ensemble)
    assert np.all(np.abs(mean - [2.0, 2.0, 4.0]) < 3 * se), (mean, se)


def test_diffusion_from_y_differs_only_in_one_entry():
    rng = np.random.default_rng(1)
    y = rng.standard_normal((50, 4))
    spec = PolyhedralConeSpec()
    Ax = spec.diffusion(spec.q(y))
    Ay = spec.diffusion_from_y(y)
    mask = np.ones((3, 3), dtype=bool)
    mask[0, 1] = mask[1, 0] = False
    np.testing.assert_allclose(Ax[:, mask], Ay[:, mask], atol=1e-12)
    np.testing.assert_allclose(Ay[:, 0, 1], 2.0 * y[:, 2] ** 2, atol=1e-12)


@pytest.mark.parametrize("i,j", [(0, 0), (1, 1), (2, 2), (0, 2), (1, 2)])
def test_covariation_matches_affine_matrix(poly_ensemble, i, j):
    mean, se = covariation_estimate(poly_ensemble)
    assert abs(mean[i, j]) < 3 * se[i, j]


@pytest.mark.xfail(strict=True, reason="the stated (1,2) entry 2(x1 + x2 - x3) is not the covariation of "
                                       "q(y + B); the true value is 2 y3^2, which is not a function of x")
def test_covariation_entry_12_matches_stated_formula(poly_ensemble):
    mean, se = covariation_estimate(poly_ensemble)
    assert abs(mean[0, 1]) < 3 * se[0, 1]


def test_covariation_entry_12_matches_true_value(poly_ensemble):
    mean, se = covariation_estimate(poly_ensemble, use_y=True)
    assert np.all(np.abs(mean) < 3 * se), mean / se


def test_polyhedral_csv_and_input_check():
    ens = polyhedral_path([1.0, 0.0, 0.0, 0.0], 1.0, 2, 2, seed=0)
    lines = ens.to_csv().splitlines()
    assert lines[0] == "path_id,t,coord_1,coord_2,coord_3,min_eigen"
    assert len(lines) == 1 + 2 * 3
    with pytest.raises(ValueError):
        polyhedral_path([1.0, 2.0], 1.0, 2, 2)


def test_polyhedral_is_deterministic():
    a = polyhedral_path([0.1, 0.2, 0.3, 0.4], 1.0, 10, 100, seed=5, record="final")
    b = polyhedral_path([0.1, 0.2, 0.3, 0.4], 1.0, 10, 100, seed=5, record="final")
    np.testing.assert_array_equal(a.paths, b.paths)


# -- dual Vinberg cone: closed forms -------------------------------------------

def test_coordinates_and_inner_product():
    v = np.array([1.0, 0.2, -0.3, 0.5, 0.7])
    M = vinberg_matrix(v)
    np.testing.assert_array_equal(M, [[1.0, 0.2, -0.3], [0.2, 0.5, 0.0], [-0.3, 0.0, 0.7]])
    np.testing.assert_array_equal(vinberg_coords(M), v)
    w = np.array([0.4, 0.1, 0.6, 1.0, 2.0])
    assert vinberg_inner(v, w) == pytest.approx(np.trace(M @ vinberg_matrix(w)))


def test_cone_membership():
    assert in_dual_vinberg_cone(SPEC.initial())
    assert not in_dual_vinberg_cone(np.array([[1.0, 0, 0], [0, 1.0, 0.1], [0, 0.1, 1.0]]))
    # the Vinberg cone only constrains the two 2x2 blocks, so u need not be PSD
    u = [1.0, 0.9, 0.9, 1.0, 1.0]
    assert in_vinberg_cone(u)
    assert np.linalg.eigvalsh(vinberg_matrix(u))[0] < 0
    assert not in_vinberg_cone([1.0, 1.5, 0.0, 1.0, 1.0])


def test_time_zero_and_scalar_block():
    u = np.array([1.0, 0.3, -0.2, 0.8, 0.6])
    phi, psi = vinberg_phi_psi(SPEC, 0.0, u)
    assert phi == 0.0
    np.testing.assert_allclose(vinberg_coords(psi), u, atol=1e-15)
    phi, psi = vinberg_phi_psi(SPEC, 1.0, [1.0, 0.0, 0.0, 1.0, 1.0])
    assert psi[0, 0] == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert phi == pytest.approx(2.0 * math.log(3.0), abs=1e-15)


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0))
def test_blocks_match_direct_inverse(seed, t):
    u = random_vinberg_u(np.random.default_rng(seed), 1)[0]
    _, psi = vinberg_phi_psi(SPEC, t, u)
    U = vinberg_matrix(u)
    E = np.diag([1.0, 0.0])
    for idx in ([0, 1], [0, 2]):
        v = U[np.ix_(idx, idx)]
        want = np.linalg.inv(np.linalg.inv(v) + 2 * t * E)
        np.testing.assert_allclose(psi[np.ix_(idx, idx)], want, rtol=1e-10, atol=1e-12)
        # the (1,1) entry of each rank-two block is the scalar flow
        assert want[0, 0] == pytest.approx(u[0] / (1 + 2 * t * u[0]), rel=1e-10)
    assert psi[1, 2] == 0.0


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_semiflow(seed, t, s):
    u = random_vinberg_u(np.random.default_rng(seed), 1)[0]
    phi_ts, psi_ts = vinberg_phi_psi(SPEC, t + s, u)
    phi_t, psi_t = vinberg_phi_psi(SPEC, t, u)
    phi_s, psi_s = vinberg_phi_psi(SPEC, s, psi_t)
    assert abs(phi_ts - phi_t - phi_s) < 1e-10
    assert np.abs(psi_ts - psi_s).max() < 1e-10
    assert in_vinberg_cone(psi_t)


def test_singular_block_and_cone_errors():
    with pytest.raises(BlockSingular):
        vinberg_phi_psi(SPEC, 1.0, [-0.5, 0.0, 0.0, 1.0, 1.0], check=False)
    with pytest.raises(NotInCone):
        vinberg_phi_psi(SPEC, 1.0, [-0.5, 0.0, 0.0, 1.0, 1.0])
    # boundary u with singular blocks is fine
    phi, psi = vinberg_phi_psi(SPEC, 1.0, [1.0, 1.0, 0.0, 1.0, 0.0])
    assert np.all(np.isfinite(psi))


def test_spec_validation():
    with pytest.raises(ValueError):
        VinbergProcessSpec(-1.0, 0.5, (1, 1), (1, 1))
    with pytest.raises(ValueError):
        VinbergProcessSpec(1.0, 0.5, (1, 1, 1), (1, 1))


# -- dual Vinberg cone: paths --------------------------------------------------

def test_path_structure_and_foliation():
    ens = vinberg_path(SPEC, 1.0, 100, 300, seed=2)
    P = ens.paths
    np.testing.assert_allclose(P[:, 0], np.tile(vinberg_coords(SPEC.initial()), (300, 1)), atol=1e-15)
    # c1 and c2 are frozen, which confines the paths to a 3-dimensional leaf
    assert np.all(P[..., 3] == SPEC.z1[1] ** 2)
    assert np.all(P[..., 4] == SPEC.z2[1] ** 2)
    # the rank-one blocks are singular, so the Schur complement is the scalar block (>= 0)
    schur = P[..., 0] - P[..., 1] ** 2 / P[..., 3] - P[..., 2] ** 2 / P[..., 4]
    assert schur.min() >= -1e-12
    assert ens.margin.min() >= -1e-12


def test_zero_second_block_stays_zero():
    spec = VinbergProcessSpec(1.0, 0.3, (0.5, 0.8), (0.0, 0.0))
    ens = vinberg_path(spec, 1.0, 50, 200, seed=3)
    assert not np.any(ens.paths[..., 2])
    assert not np.any(ens.paths[..., 4])


def test_transform_by_monte_carlo():
    ens = vinberg_path(SPEC, 1.0, 400, 30_000, seed=4, record="final")
    rng = np.random.default_rng(6)
    for u in random_vinberg_u(rng, 2):
        assert vinberg_mc_laplace(ens, u).within(vinberg_laplace(SPEC, 1.0, u))


def test_vinberg_is_deterministic():
    a = vinberg_path(SPEC, 1.0, 20, 50, seed=8)
    b = vinberg_path(SPEC, 1.0, 20, 50, seed=8)
    np.testing.assert_array_equal(a.paths, b.paths)
    assert a.to_csv().splitlines()[0] == "path_id,t,coord_1,coord_2,coord_3,coord_4,coord_5,min_eigen"
