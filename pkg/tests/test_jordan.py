import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conekit import jordan as J
from conekit.errors import (AlgebraMismatch, InvalidSize, NotAFrame, NotInCone, SingularElement,
                            UnsupportedAlgebra)
from conekit.jordan import ConeClass, ConeOperator, Element, make_algebra

from .conftest import alg_and, alg_and_cone


# -- classification ---------------------------------------------------------

@pytest.mark.parametrize("kind,size,n,r,d", [
    ("sym", 1, 1, 1, 0), ("sym", 2, 3, 2, 1), ("sym", 3, 6, 3, 1), ("sym", 5, 15, 5, 1),
    ("herm", 2, 4, 2, 2), ("herm", 3, 9, 3, 2),
    ("spin", 3, 3, 2, 1), ("spin", 4, 4, 2, 2), ("spin", 7, 7, 2, 5),
])
def test_classification_rows(kind, size, n, r, d):
    a = make_algebra(kind, size)
    assert (a.n, a.r, a.d) == (n, r, d)
    if r > 1:
        assert a.n == r + d * r * (r - 1) // 2
    assert J.det(a.e) == pytest.approx(1.0, abs=1e-15)
    assert J.trace(a.e) == pytest.approx(r, abs=1e-15)


def test_rank_one_identity_is_scalar_one():
    a = make_algebra("sym", 1)
    assert a.e.coords.tolist() == [1.0]


@pytest.mark.parametrize("kind", ["quaternion", "HermQuaternion", "octonion", "albert", "nonsense"])
def test_unsupported_kinds(kind):
    with pytest.raises(UnsupportedAlgebra):
        make_algebra(kind, 3)


@pytest.mark.parametrize("kind,size", [("spin", 2), ("spin", 1), ("sym", 0), ("herm", -1)])
def test_invalid_sizes(kind, size):
    with pytest.raises(InvalidSize):
        make_algebra(kind, size)


def test_parse_algebra():
    assert J.parse_algebra("sym:3") is make_algebra("sym", 3)
    assert J.parse_algebra({"kind": "SpinFactor", "size": 4}) == make_algebra("spin", 4)
    with pytest.raises(InvalidSize):
        J.parse_algebra("sym")


# -- products and operators: worked examples ------------------------------

def test_s2_product_example():
    a = make_algebra("sym", 2)
    x = a.natural_element([[1.0, 0.0], [0.0, 0.0]])
    y = a.natural_element([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(J.jordan_product(x, y).natural(), [[0.0, 0.5], [0.5, 0.0]], atol=1e-15)


def test_spin_product_formula():
    a = make_algebra("spin", 4)
    x0, xb = 1.3, np.array([0.2, -0.5, 0.7])
    y0, yb = -0.4, np.array([1.1, 0.3, 0.0])
    x = a.natural_element(np.r_[x0, xb])
    y = a.natural_element(np.r_[y0, yb])
    want = np.r_[x0 * y0 + xb @ yb, x0 * yb + y0 * xb]
    np.testing.assert_allclose(J.jordan_product(x, y).natural(), want, atol=1e-14)
    e1 = a.natural_element([1.0, 0, 0, 0])
    np.testing.assert_allclose(J.jordan_product(e1, e1).natural(), [1.0, 0, 0, 0])
    # det from the minimal polynomial l^2 - 2 x0 l + (x0^2 - |xb|^2)
    assert J.det(x) == pytest.approx(x0 ** 2 - xb @ xb, rel=1e-13)
    assert J.trace(x) == pytest.approx(2 * x0, rel=1e-14)


def test_spin_outside_example():
    a = make_algebra("spin", 3)
    x = a.natural_element([1.0, 2.0, 0.0])
    assert J.det(x) == pytest.approx(-3.0)
    assert J.cone_classify(x) is ConeClass.OUTSIDE
    with pytest.raises(NotInCone):
        J.sqrt(x)


def test_spectral_examples():
    a = make_algebra("sym", 2)
    sd = J.spectral_decompose(a.natural_element(np.diag([2.0, 3.0])))
    np.testing.assert_allclose(sd.eigenvalues, [3.0, 2.0])
    np.testing.assert_allclose(sd.frame[0].natural(), np.diag([0.0, 1.0]), atol=1e-15)
    np.testing.assert_allclose(sd.frame[1].natural(), np.diag([1.0, 0.0]), atol=1e-15)
    x = a.natural_element(np.diag([2.0, 3.0]))
    assert J.det(x) == pytest.approx(6.0) and J.trace(x) == pytest.approx(5.0)

    s = make_algebra("spin", 3)
    sd = J.spectral_decompose(s.natural_element([2.0, 1.0, 0.0]))
    np.testing.assert_allclose(sd.eigenvalues, [3.0, 1.0])
    np.testing.assert_allclose(sd.frame[0].natural(), [0.5, 0.5, 0.0], atol=1e-15)
    np.testing.assert_allclose(sd.frame[1].natural(), [0.5, -0.5, 0.0], atol=1e-15)


def test_identity_decomposition_and_boundary():
    for kind, size in [("sym", 3), ("herm", 2), ("spin", 5)]:
        a = make_algebra(kind, size)
        sd = J.spectral_decompose(a.e)
        np.testing.assert_allclose(sd.eigenvalues, np.ones(a.r), atol=1e-14)
        np.testing.assert_allclose(sum(p.coords for p in sd.frame), a.identity, atol=1e-12)
        assert J.cone_classify(a.e) is ConeClass.INTERIOR
        np.testing.assert_allclose(J.sqrt(a.e).coords, a.identity, atol=1e-14)
    s2 = make_algebra("sym", 2)
    assert J.cone_classify(s2.natural_element(np.diag([1.0, 0.0]))) is ConeClass.BOUNDARY


def test_p_of_identity_is_identity_operator(alg):
    np.testing.assert_allclose(J.quad_rep(alg.e).matrix, np.eye(alg.n), atol=1e-14)


def test_algebra_mismatch():
    with pytest.raises(AlgebraMismatch):
        J.jordan_product(make_algebra("sym", 2).e, make_algebra("spin", 3).e)


def test_singular_inverse():
    a = make_algebra("sym", 2)
    with pytest.raises(SingularElement):
        J.inverse(a.natural_element(np.diag([1.0, 0.0])))


def test_element_serialisation_roundtrip():
    a = make_algebra("herm", 2)
    x = Element(a, [1.0, 2.0, 0.3, -0.4])
    doc = x.to_dict()
    assert doc["algebra"] == {"kind": "HermComplex", "size": 2}
    assert Element.from_dict(doc) == x


def test_lyapunov_operator_matches_matrix_formula():
    a = make_algebra("sym", 3)
    rng = np.random.default_rng(0)
    H = rng.standard_normal((3, 3))
    B = ConeOperator.lyapunov(a, H)
    x = a.random(rng)
    X = a.to_natural(x)
    np.testing.assert_allclose(B(x), a.from_natural(H @ X + X @ H.T), atol=1e-13)


# -- properties -----------------------------------------------------------

@given(alg_and(3))
def test_inner_product_is_trace_form_and_product_is_symmetric(args):
    a, x, y, z = args
    np.testing.assert_allclose(a.inner(x, y), a.trace(a.product(x, y)), atol=1e-11)
    np.testing.assert_allclose(a.product(x, y), a.product(y, x), atol=1e-12)
    assert abs(a.inner(a.product(x, y), z) - a.inner(y, a.product(x, z))) < 1e-12 * 30


@given(alg_and(2))
def test_jordan_axiom(args):
    a, x, y = args
    x2 = a.product(x, x)
    lhs = a.product(x2, a.product(x, y))
    rhs = a.product(x, a.product(x2, y))
    assert np.abs(lhs - rhs).max() < 1e-10 * (1 + np.abs(lhs).max())


@given(alg_and(1, -1.5, 1.5))
def test_power_associativity(args):
    a, x = args
    pw = [a.identity, x]
    for _ in range(5):
        pw.append(a.product(pw[-1], x))
    for m in range(1, 6):
        for k in range(1, 7 - m):
            got = a.product(pw[m], pw[k])
            assert np.abs(got - pw[m + k]).max() < 1e-10 * (1 + np.abs(pw[m + k]).max())


@given(alg_and(2))
def test_operators_are_self_adjoint_and_quadratic(args):
    a, x, y = args
    L, P = a.lmat(x), a.pmat(x)
    np.testing.assert_allclose(L, L.T, atol=1e-12)
    np.testing.assert_allclose(P, P.T, atol=1e-10)
    np.testing.assert_allclose(P @ y, a.quad(x, y), atol=1e-10)
    # polarisation: P(x, y) = (P(x + y) - P(x) - P(y)) / 2
    pol = 0.5 * (a.pmat(x + y) - P - a.pmat(y))
    np.testing.assert_allclose(a.pmat2(x, y), pol, atol=1e-10)


@given(alg_and(2))
def test_p_matches_xyx_on_matrix_algebras(args):
    a, x, y = args
    assume(a.is_matrix)
    X, Y = a.to_natural(x), a.to_natural(y)
    np.testing.assert_allclose(a.pmat(x) @ y, a.from_natural(X @ Y @ X), atol=1e-10)


@given(alg_and_cone(2))
def test_inverse_identities(args):
    a, x, y = args
    xi = a.inv(x)
    np.testing.assert_allclose(a.product(x, xi), a.identity, atol=1e-10)
    np.testing.assert_allclose(a.pmat(x) @ xi, x, atol=1e-10)
    np.testing.assert_allclose(np.linalg.inv(a.pmat(x)), a.pmat(xi), rtol=1e-8, atol=1e-8)
    Pxy = a.pmat(x) @ y
    np.testing.assert_allclose(a.inv(Pxy), a.pmat(xi) @ a.inv(y), rtol=1e-8, atol=1e-8)
    assert a.det(x) * a.det(xi) == pytest.approx(1.0, rel=1e-10)
    assert a.det(Pxy) == pytest.approx(a.det(x) ** 2 * a.det(y), rel=1e-9)


@given(alg_and_cone(2))
def test_inverse_derivative_and_log_det_gradient(args):
    a, x, u = args
    h = 1e-6
    fd = (a.inv(x + h * u) - a.inv(x - h * u)) / (2 * h)
    exact = -a.pmat(a.inv(x)) @ u
    assert np.linalg.norm(fd - exact) <= 1e-6 * np.linalg.norm(exact)
    logdet = lambda z: math.log(a.det(z))
    grad = np.array([(logdet(x + h * ei) - logdet(x - h * ei)) / (2 * h) for ei in np.eye(a.n)])
    assert np.linalg.norm(grad - a.inv(x)) <= 1e-6 * np.linalg.norm(a.inv(x))


@given(alg_and(1))
def test_spectral_decomposition_invariants(args):
    a, x = args
    sd = J.spectral_decompose(Element(a, x))
    assert np.all(np.diff(sd.eigenvalues) <= 1e-12)
    J.check_frame(sd.frame)
    np.testing.assert_allclose(sd.reconstruct().coords, x, atol=1e-9 * (1 + np.abs(x).max()))
    np.testing.assert_allclose(a.det(x), np.prod(sd.eigenvalues), atol=1e-9 * (1 + np.abs(x).max()) ** a.r)
    np.testing.assert_allclose(a.trace(x), np.sum(sd.eigenvalues), atol=1e-10 * (1 + np.abs(x).max()))


@given(alg_and(1))
def test_eigenvalues_match_natural_eigensolver(args):
    a, x = args
    assume(a.is_matrix)
    np.testing.assert_allclose(a.eigvals(x), np.linalg.eigvalsh(a.to_natural(x))[::-1], atol=1e-10)


def test_repeated_eigenvalues_give_a_frame():
    a = make_algebra("sym", 4)
    rng = np.random.default_rng(1)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    X = Q @ np.diag([2.0, 2.0, 2.0, -1.0]) @ Q.T
    sd = J.spectral_decompose(a.natural_element(X))
    J.check_frame(sd.frame)
    np.testing.assert_allclose(sd.reconstruct().natural(), X, atol=1e-12)
    s = make_algebra("spin", 4)
    sd = J.spectral_decompose(3.0 * s.e)
    J.check_frame(sd.frame)


@given(alg_and_cone(1, 0.0, 2.0))
def test_sqrt_squares_back(args):
    a, x = args
    r = a.sqrt(x)
    np.testing.assert_allclose(a.product(r, r), x, atol=1e-9)
    assert a.min_eig(r) >= -1e-12


@given(alg_and(1))
def test_peirce_projections(args):
    a, x = args
    sd = J.spectral_decompose(Element(a, a.random_cone(np.random.default_rng(int(abs(x[0]) * 1e6)), None)))
    proj = J.peirce_projections(sd)
    total = sum(p.matrix for p in proj.values())
    np.testing.assert_allclose(total, np.eye(a.n), atol=1e-10)
    np.testing.assert_allclose(total @ x, x, atol=1e-10)
    for k1, p1 in proj.items():
        np.testing.assert_allclose(p1.matrix @ p1.matrix, p1.matrix, atol=1e-10)
        rank = int(round(np.trace(p1.matrix)))
        assert rank == (1 if k1[0] == k1[1] else a.d)
        for k2, p2 in proj.items():
            if k1 != k2:
                np.testing.assert_allclose(p1.matrix @ p2.matrix, 0.0, atol=1e-10)


def test_peirce_examples():
    a = make_algebra("sym", 2)
    basis = J.peirce_basis(tuple(Element(a, p) for p in a.canonical_frame()), 0, 1)
    assert basis.shape == (1, 3)
    np.testing.assert_allclose(np.abs(basis[0]), [0.0, 0.0, 1.0], atol=1e-14)
    s = make_algebra("spin", 4)
    assert J.peirce_basis(tuple(Element(s, p) for p in s.canonical_frame()), 0, 1).shape[0] == 2


def test_not_a_frame():
    a = make_algebra("sym", 2)
    with pytest.raises(NotAFrame):
        J.check_frame((a.e, a.zero))
    with pytest.raises(NotAFrame):
        J.check_frame((a.e,))


@given(alg_and(1), st.integers(0, 2**32 - 1))
def test_orthogonality_of_complementary_cone_elements(args, seed):
    a, _ = args
    assume(a.r >= 2)
    rng = np.random.default_rng(seed)
    frame = a.random_frame(rng)
    k = int(rng.integers(1, a.r))
    wa, wb = rng.uniform(0.1, 2.0, a.r), rng.uniform(0.1, 2.0, a.r)
    x = (wa[:k, None] * frame[:k]).sum(axis=0)
    y = (wb[k:, None] * frame[k:]).sum(axis=0)
    assert abs(a.inner(x, y)) < 1e-12
    assert np.abs(a.product(x, y)).max() < 1e-12


@given(alg_and(2), st.integers(0, 2**32 - 1))
def test_haar_automorphisms_preserve_product(args, seed):
    a, x, y = args
    g = a.haar(np.random.default_rng(seed))
    lhs = a.act(g, a.product(x, y))
    rhs = a.product(a.act(g, x), a.act(g, y))
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)
    np.testing.assert_allclose(a.norm(a.act(g, x)), a.norm(x), rtol=1e-12, atol=1e-12)


@given(alg_and(1))
def test_classification_consistent_with_eigenvalues(args):
    a, x = args
    c = J.cone_classify(Element(a, x))
    lo = a.min_eig(x)
    if lo > 1e-6 * (1 + np.abs(x).max()):
        assert c is ConeClass.INTERIOR
    elif lo < -1e-6 * (1 + np.abs(x).max()):
        assert c is ConeClass.OUTSIDE
