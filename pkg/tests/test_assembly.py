import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.sparse.linalg import spsolve

from uipdg.analysis import compute_errors
from uipdg.assembly import PenaltyConfig, export_matrix, interface_weights, reduce_system
from uipdg.discretize import discretize
from uipdg.errors import DimensionMismatch
from uipdg.problems import make_curve, manufactured


def test_single_interior_node_diagonal():
    disc = discretize(make_curve("none"), manufactured("none", 1.0, 1.0), 2, p=1)
    assert disc.N == 1
    # four bilinear elements around the node, each contributing 2/3
    assert disc.system.A[0, 0] == pytest.approx(8 / 3, rel=1e-14)


def test_poisson_matrix_matches_five_plus_four_stencil():
    disc = discretize(make_curve("none"), manufactured("none", 1.0, 1.0), 4, p=1)
    A = disc.system.A.toarray()
    assert A.shape == (9, 9)
    centre = 4
    assert A[centre, centre] == pytest.approx(8 / 3)
    np.testing.assert_allclose(sorted(A[centre][A[centre] != 0])[:-1], [-1 / 3] * 8, rtol=1e-13)


@pytest.mark.parametrize("p", [1, 2])
def test_symmetric_variant_gives_symmetric_matrix(p):
    disc = discretize(make_curve("flower"), manufactured("flower"), 16, p=p)
    A = disc.system.A
    scale = abs(A).max()
    assert abs(A - A.T).max() <= 1e-12 * scale
    At = disc.A_tilde
    assert abs(At - At.T).max() <= 1e-12 * abs(At).max()


def test_nonsymmetric_variant_is_not_symmetric():
    disc = discretize(make_curve("flower"), manufactured("flower"), 16, p=1,
                      penalty=PenaltyConfig(beta=-1.0))
    A = disc.system.A
    assert abs(A - A.T).max() > 1e-6 * abs(A).max()


def test_harmonic_weights_for_high_contrast():
    w1, w2, aw = interface_weights(1000.0, 1.0)
    assert w1 == pytest.approx(1 / 1001, rel=1e-15)
    assert w2 == pytest.approx(1000 / 1001, rel=1e-15)
    assert aw == pytest.approx(2000 / 1001, rel=1e-15)
    assert interface_weights(1000.0, 1.0, "arithmetic") == (0.5, 0.5, 500.5)


@settings(max_examples=100, deadline=None)
@given(a1=st.floats(1e-4, 1e4), a2=st.floats(1e-4, 1e4))
def test_harmonic_weights_bounds(a1, a2):
    w1, w2, aw = interface_weights(a1, a2)
    assert w1 + w2 == pytest.approx(1.0, abs=1e-14)
    assert w1 * a1 == pytest.approx(w2 * a2, rel=1e-12)
    assert min(a1, a2) <= aw <= 2 * min(a1, a2) * (1 + 1e-12)


def test_reduction_with_identity_is_a_copy():
    rng = np.random.default_rng(0)
    M = sp.random(6, 6, density=0.5, random_state=1)
    M = (M + M.T).tocsr()
    F = rng.standard_normal(6)
    sys = reduce_system(M, F, sp.identity(6, format="csr"))
    assert abs(sys.A - M).max() == 0.0
    np.testing.assert_array_equal(sys.F, F)
    with pytest.raises(DimensionMismatch):
        reduce_system(M, F, sp.identity(5, format="csr"))


def test_reduction_preserves_quadratic_form():
    disc = discretize(make_curve("flower"), manufactured("flower"), 16, p=1)
    rng = np.random.default_rng(3)
    for _ in range(3):
        v = rng.standard_normal(disc.N)
        w = disc.dofmap.B @ v
        assert v @ (disc.system.A @ v) == pytest.approx(w @ (disc.A_tilde @ w), rel=1e-12)
        assert disc.system.F @ v == pytest.approx(disc.F_tilde @ w, rel=1e-12)


def test_patch_test_reproduces_quadratic():
    disc = discretize(make_curve("patch"), manufactured("patch", 1.0, 1.0), 16, p=2)
    u = spsolve(disc.system.A.tocsc(), disc.system.F)
    rep = compute_errors(disc, u)
    assert rep.rel_energy <= 1e-8
    assert rep.rel_l2 <= 1e-8


def test_discrete_solution_minimizes_energy():
    disc = discretize(make_curve("flower"), manufactured("flower"), 16, p=1)
    A, F = disc.system.A, disc.system.F
    u = spsolve(A.tocsc(), F)

    def energy(v):
        return 0.5 * v @ (A @ v) - F @ v

    rng = np.random.default_rng(5)
    e0 = energy(u)
    for _ in range(5):
        d = rng.standard_normal(u.size) * 1e-3 * np.abs(u).max()
        assert energy(u + d) > e0


def _fd_operator(u, alpha, x, y, eps=1e-4):
    lap = (u(x + eps, y) + u(x - eps, y) + u(x, y + eps) + u(x, y - eps) - 4 * u(x, y)) / eps ** 2
    return -alpha * lap


@pytest.mark.parametrize("example", ["flower", "straight", "none"])
def test_manufactured_source_matches_finite_differences(example):
    prob = manufactured(example, 1000.0 if example != "none" else 1.0, 1.0)
    rng = np.random.default_rng(2)
    x, y = rng.uniform(0.1, 0.9, (2, 50))
    ex = prob.exact
    for sub, u in ((1, ex.u1), (2, ex.u2)):
        fd = _fd_operator(u, prob.alpha(sub), x, y)
        scale = np.abs(prob.f(sub, x, y)).max()
        np.testing.assert_allclose(fd, prob.f(sub, x, y), atol=1e-5 * scale)


def test_manufactured_values_at_the_origin():
    prob = manufactured("flower", 1000.0, 1.0)
    assert prob.f(1, 0.0, 0.0) == 0.0
    assert prob.f(2, 0.0, 0.0) == 0.0
    assert prob.exact.value(1, 0.0, 0.0) == pytest.approx(1e-3)


def test_interface_data_follow_the_exact_solution():
    prob = manufactured("flower", 1000.0, 1.0)
    curve = make_curve("flower")
    s = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    pts, nrm = curve.point(s), curve.normal(s)
    x, y = pts.T
    ex = prob.exact
    np.testing.assert_allclose(prob.g_D(x, y), ex.u1(x, y) - ex.u2(x, y), rtol=1e-14)
    eps = 1e-6
    dn1 = (ex.u1(x + eps * nrm[:, 0], y + eps * nrm[:, 1]) - ex.u1(x - eps * nrm[:, 0], y - eps * nrm[:, 1])) / (2 * eps)
    dn2 = (ex.u2(x + eps * nrm[:, 0], y + eps * nrm[:, 1]) - ex.u2(x - eps * nrm[:, 0], y - eps * nrm[:, 1])) / (2 * eps)
    np.testing.assert_allclose(prob.g_N(x, y, nrm[:, 0], nrm[:, 1]), 1000.0 * dn1 - dn2, atol=1e-7)


def test_export_format(tmp_path):
    A = sp.csr_matrix(np.array([[2.0, 0.1], [0.1, 1.0 / 3.0]]))
    path = tmp_path / "A.txt"
    export_matrix(A, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "0 0 2"
    assert lines[-1] == "1 1 0.33333333333333331"
    r, c, v = np.loadtxt(path, unpack=True)
    assert np.array_equal(sp.coo_matrix((v, (r.astype(int), c.astype(int)))).toarray(), A.toarray())


@pytest.mark.parametrize("n", [8, 16, 32])
def test_matrix_depends_smoothly_on_curve_position(n):
    # no element drops in or out: the change is linear in the shift, of size shift / h
    prob = manufactured("flower")
    a = discretize(make_curve("flower"), prob, n, p=1).system.A
    diffs = []
    for shift in (1e-13, 1e-12):
        b = discretize(make_curve("flower", offset=(shift, 0.0)), prob, n, p=1).system.A
        assert b.shape == a.shape
        diffs.append(abs(a - b).max() / abs(a).max())
        assert diffs[-1] <= 2.0 * shift * n
    assert diffs[1] / diffs[0] == pytest.approx(10.0, rel=0.05)
