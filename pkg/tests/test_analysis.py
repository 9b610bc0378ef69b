import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from uipdg.analysis import (
    SolveConfig,
    compute_errors,
    estimate_condition,
    evaluate_solution,
    observed_rates,
    pcg,
    solve,
)
from uipdg.assembly import PenaltyConfig, SparseSymmetricSystem
from uipdg.discretize import discretize
from uipdg.errors import IndefiniteDetected, NoExactSolution, NotConverged, OutOfDomain
from uipdg.problems import make_curve, manufactured


def _laplacian(m):
    return sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1], format="csr")


def test_pcg_scalar():
    x, it, res = pcg(sp.csr_matrix([[2.0]]), np.array([4.0]))
    assert x[0] == pytest.approx(2.0) and it == 1 and res == 0.0


def test_pcg_matches_direct_solve():
    A = _laplacian(50)
    b = np.random.default_rng(0).standard_normal(50)
    x, it, res = pcg(A, b, tol=1e-12)
    np.testing.assert_allclose(x, spsolve(A.tocsc(), b), rtol=1e-9, atol=1e-10)
    assert res <= 1e-12 and it <= 50 + 5


def test_pcg_detects_indefinite_matrix():
    A = sp.csr_matrix([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(IndefiniteDetected):
        pcg(A, np.array([1.0, -1.0]))
    with pytest.raises(IndefiniteDetected):
        pcg(sp.diags([1.0, -1.0]).tocsr(), np.ones(2))


def test_pcg_budget():
    with pytest.raises(NotConverged) as info:
        pcg(_laplacian(40), np.ones(40), maxiter=3)
    assert info.value.iterations == 3


def test_solver_methods_agree():
    disc = discretize(make_curve("flower"), manufactured("flower"), 16, p=1)
    xs = [solve(disc.system, SolveConfig(m)).x for m in ("cg", "dense", "direct")]
    np.testing.assert_allclose(xs[0], xs[1], rtol=1e-8, atol=1e-12 * np.abs(xs[1]).max())
    np.testing.assert_allclose(xs[1], xs[2], rtol=1e-10, atol=1e-14 * np.abs(xs[1]).max())


def test_tiny_penalty_breaks_coercivity():
    disc = discretize(make_curve("flower"), manufactured("flower"), 16, p=1,
                      penalty=PenaltyConfig(gamma=0.01))
    with pytest.raises((IndefiniteDetected, NotConverged)):
        solve(disc.system, SolveConfig("cg", maxiter=2000))
    with pytest.raises(IndefiniteDetected):
        estimate_condition(disc.system.A)


def test_condition_of_simple_matrices():
    assert estimate_condition(sp.identity(10, format="csr")).kappa == pytest.approx(1.0)
    d = np.linspace(1.0, 1e4, 200)
    est = estimate_condition(sp.diags(d).tocsr())
    assert est.kappa == pytest.approx(1e4, rel=1e-8)
    assert est.lambda_min == pytest.approx(1.0, rel=1e-8)


def test_condition_estimate_matches_dense_eigensolve():
    disc = discretize(make_curve("flower"), manufactured("flower"), 16, p=1)
    A = disc.system.A
    assert 64 < A.shape[0] <= 500
    ev = np.linalg.eigvalsh(A.toarray())
    assert estimate_condition(A).kappa == pytest.approx(ev[-1] / ev[0], rel=0.05)


def test_evaluation_of_constant_away_from_the_boundary():
    disc = discretize(make_curve("flower"), manufactured("flower"), 16, p=1)
    ones = np.ones(disc.N)
    for x, y, sub in ((0.5, 0.5, 1), (0.2, 0.2, 2), (0.5 + 0.26, 0.5, 2), (0.5 + 0.2, 0.5, 1)):
        v, g = evaluate_solution(disc, ones, x, y, sub)
        assert v == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(g, 0.0, atol=1e-10)


def test_evaluated_gradient_matches_finite_differences():
    disc = discretize(make_curve("flower"), manufactured("flower"), 16, p=2)
    c = np.random.default_rng(4).standard_normal(disc.N)
    eps = 1e-6
    for x, y, sub in ((0.51, 0.47, 1), (0.13, 0.81, 2)):
        _, g = evaluate_solution(disc, c, x, y, sub)
        fx = (evaluate_solution(disc, c, x + eps, y, sub)[0] - evaluate_solution(disc, c, x - eps, y, sub)[0]) / (2 * eps)
        fy = (evaluate_solution(disc, c, x, y + eps, sub)[0] - evaluate_solution(disc, c, x, y - eps, sub)[0]) / (2 * eps)
        np.testing.assert_allclose(g, [fx, fy], rtol=1e-6, atol=1e-6)


def test_bilinear_value_at_cell_centre_is_nodal_mean():
    disc = discretize(make_curve("none"), manufactured("none", 1.0, 1.0), 4, p=1)
    c = np.arange(1.0, 10.0)
    # cell (1, 1) has the interior lattice nodes 0, 1, 3, 4 as corners
    v, _ = evaluate_solution(disc, c, 0.375, 0.375, 2)
    assert v == pytest.approx((1 + 2 + 4 + 5) / 4)
    with pytest.raises(OutOfDomain):
        evaluate_solution(disc, c, 1.5, 0.5, 2)


def test_poisson_l2_rate():
    hs, errs = [], []
    for n in (8, 16, 32):
        disc = discretize(make_curve("none"), manufactured("none", 1.0, 1.0), n, p=1)
        u = solve(disc.system, SolveConfig("direct")).x
        hs.append(disc.h)
        errs.append(compute_errors(disc, u).l2)
    assert observed_rates(hs, errs)[-1] == pytest.approx(2.0, abs=0.1)


def test_errors_are_stable_under_quadrature_refinement():
    disc = discretize(make_curve("flower"), manufactured("flower"), 16, p=1)
    u = solve(disc.system, SolveConfig("direct")).x
    a = compute_errors(disc, u)
    b = compute_errors(disc, u, q=disc.p + 5)
    for name in ("energy", "l2", "flux"):
        assert abs(getattr(a, name) / getattr(b, name) - 1) < 1e-3


def test_missing_exact_solution():
    disc = discretize(make_curve("none"), manufactured("none", 1.0, 1.0), 4, p=1)
    disc.problem = dataclasses.replace(disc.problem, exact=None)
    with pytest.raises(NoExactSolution):
        compute_errors(disc, np.zeros(disc.N))


def test_observed_rates():
    r = observed_rates([0.1, 0.05, 0.025], [1.0, 0.25, 0.0625])
    assert r[0] is None and r[1] == pytest.approx(2.0) and r[2] == pytest.approx(2.0)


def test_zero_load_returns_zero():
    sys = SparseSymmetricSystem(_laplacian(5), np.zeros(5))
    res = solve(sys)
    assert np.all(res.x == 0) and res.iterations == 0


def test_jacobi_scaled_poisson_condition_grows_like_h_minus_two():
    hs, ks = [], []
    for n in (8, 16, 32, 64):
        A = discretize(make_curve("none"), manufactured("none", 1.0, 1.0), n, p=1).system.A
        d = sp.diags(1 / np.sqrt(A.diagonal()))
        hs.append(1 / n)
        ks.append(estimate_condition(d @ A @ d).kappa)
    slope = np.polyfit(np.log(1 / np.array(hs)), np.log(ks), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)
