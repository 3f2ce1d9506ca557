import math

import numpy as np
import pytest
from scipy.stats import ortho_group

from polysosp.linalg import (candidate_point, coordinate_median, iteration_count,
                             jacobi_diagonalize, projected_power_iteration, secular_derivative,
                             secular_function, secular_solve)
from polysosp.objectives import rotation_pairs_matrix
from polysosp.polyhedron import Polyhedron, affine_subspace


def quad_grad(M, saddle=None):
    M = np.asarray(M, dtype=float)
    s = np.zeros(M.shape[0]) if saddle is None else np.asarray(saddle, dtype=float)
    return lambda x: M @ (x - s)


def full_space(d):
    return affine_subspace(Polyhedron([], [], d=d), np.zeros(d), [])


def scan_roots(lambdas, v, r, step=1e-5):
    """Sign changes of ``w - r^2`` on a uniform grid covering every root."""
    lam = np.asarray(lambdas, dtype=float)
    reach = 2 * np.linalg.norm(v) / r
    spread = lam.max() - lam.min()
    lo = lam.min() - max(5 * spread, reach) - step
    hi = lam.max() + max(5 * spread, reach) + step
    grid = np.arange(lo, hi, step)
    with np.errstate(divide="ignore"):
        g = secular_function(grid, lam, v) - r * r
    s = np.sign(g)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    return [(grid[i], grid[i + 1]) for i in idx]


class TestIterationCount:
    def test_formula(self):
        # ceil(8 * 4 * log(800))
        assert iteration_count(1, 1, 0.5, 0.5, 2, 0.01) == 214
        assert iteration_count(1, 1, 0.5, 0.5, 2, 0.01) == math.ceil(32 * math.log(800))

    def test_floor(self):
        assert iteration_count(1e-6, 1e-3, 1.0, 0.9, 10_000, 0.5) == math.ceil(10 * math.log(10_000))

    def test_monotone(self):
        base = iteration_count(1, 1, 0.1, 0.5, 4, 0.01)
        assert iteration_count(2, 1, 0.1, 0.5, 4, 0.01) >= 2 * base - 1
        assert iteration_count(1, 1, 0.05, 0.5, 4, 0.01) >= 2 * base - 1

    @pytest.mark.parametrize("kw", [dict(L=0), dict(delta=-1), dict(eps=1.0), dict(d=0)])
    def test_rejects_bad_arguments(self, kw):
        args = dict(L=1, r=1, delta=0.5, eps=0.5, d=2, fail_prob=0.01)
        args.update(kw)
        with pytest.raises(ValueError):
            iteration_count(**args)


class TestPowerIteration:
    def test_saddle_direction(self):
        M = np.diag([1.0, -1.0])
        e = projected_power_iteration(quad_grad(M), np.zeros(2), full_space(2), 1.0, 200)
        np.testing.assert_allclose(np.abs(e), [0, 1], atol=1e-3)
        assert e @ M @ e <= -0.999

    def test_rotated_saddle_on_face(self):
        M = rotation_pairs_matrix(2)
        cone = Polyhedron([[1, 0], [0, 1]], [0, 0])
        sub = affine_subspace(cone, np.zeros(2), [0])
        e = projected_power_iteration(quad_grad(M), np.zeros(2), sub, 2.0, 200)
        np.testing.assert_allclose(np.abs(e), [0, 1], atol=1e-12)
        # on the face x = 0 the quadratic is -y^2 / 2
        assert 0.5 * e @ M @ e == pytest.approx(-0.5)

    @pytest.mark.parametrize("seed", range(10))
    def test_known_spectrum(self, seed):
        rng = np.random.default_rng(seed)
        Q = ortho_group.rvs(8, random_state=rng)
        lam = np.sort(rng.uniform(-1, 1, 8))
        lam[0] = -1.0
        M = Q @ np.diag(lam) @ Q.T
        eps, L, r = 0.25, 1.0, 1.0
        delta = 0.5 * abs(lam[0]) * r * r
        T = iteration_count(L, r, delta, eps, 8, 0.01)
        e = projected_power_iteration(quad_grad(M), np.zeros(8), full_space(8), L, T, rng_seed=seed)
        assert np.linalg.norm(e) == pytest.approx(1.0)
        assert e @ M @ e <= (1 - eps) * lam[0]

    @pytest.mark.parametrize("seed", range(10))
    def test_iterates_stay_in_subspace(self, seed):
        rng = np.random.default_rng(seed)
        d = 5
        A = rng.standard_normal((2, d))
        P = Polyhedron(A, A @ rng.standard_normal(d))
        saddle = np.linalg.lstsq(A, P.b, rcond=None)[0]
        sub = affine_subspace(P, saddle, [0, 1])
        M = rng.standard_normal((d, d))
        M = M + M.T
        seen = []
        projected_power_iteration(quad_grad(M, saddle), saddle, sub, np.linalg.norm(M, 2), 50,
                                  rng_seed=seed, callback=seen.append)
        assert len(seen) == 51
        O = sub.basis
        for z in seen:
            w = z - sub.anchor
            assert np.linalg.norm(w - O @ (O.T @ w)) <= 1e-10

    def test_deterministic(self):
        M = np.diag([2.0, -1.0, 0.5])
        a = projected_power_iteration(quad_grad(M), np.zeros(3), full_space(3), 2.0, 30, rng_seed=7)
        b = projected_power_iteration(quad_grad(M), np.zeros(3), full_space(3), 2.0, 30, rng_seed=7)
        np.testing.assert_array_equal(a, b)

    def test_eigenvalue_at_step_scale(self):
        # M = L * I makes every step vanish; the start is kept
        e = projected_power_iteration(quad_grad(np.eye(2)), np.zeros(2), full_space(2), 1.0, 5)
        assert np.linalg.norm(e) == pytest.approx(1.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            projected_power_iteration(quad_grad(np.eye(2)), np.zeros(2), full_space(2), 1.0, 0)
        sub = affine_subspace(Polyhedron(np.eye(2), [0, 0]), np.zeros(2), [0, 1])
        with pytest.raises(ValueError):
            projected_power_iteration(quad_grad(np.eye(2)), np.zeros(2), sub, 1.0, 5)


class TestJacobi:
    def test_diagonal(self):
        D = jacobi_diagonalize(np.diag([3.0, -1.0, 2.0]), 1e-12)
        np.testing.assert_array_equal(D.lambdas, [3, -1, 2])
        np.testing.assert_array_equal(D.Q, np.eye(3))

    def test_two_by_two(self):
        D = jacobi_diagonalize([[0.0, 1.0], [1.0, 0.0]], 1e-12)
        np.testing.assert_allclose(np.sort(D.lambdas), [-1, 1], atol=1e-15)
        assert D.residual <= 1e-12

    @pytest.mark.parametrize("m", [3, 10, 20])
    @pytest.mark.parametrize("seed", range(5))
    def test_random(self, m, seed):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((m, m))
        M = M + M.T
        D = jacobi_diagonalize(M, 1e-10)
        recon = D.Q.T @ np.diag(D.lambdas) @ D.Q
        assert np.linalg.norm(recon - M) <= 1e-9
        assert np.abs(D.Q @ D.Q.T - np.eye(m)).max() <= 1e-10
        np.testing.assert_allclose(np.sort(D.lambdas), np.linalg.eigvalsh(M), atol=1e-9)

    def test_characteristic_polynomial(self):
        M = np.array([[2.0, 1.0, 0.0], [1.0, 0.0, -1.0], [0.0, -1.0, 1.0]])
        D = jacobi_diagonalize(M, 1e-12)
        for lam in D.lambdas:
            assert abs(np.linalg.det(M - lam * np.eye(3))) <= 1e-10

    def test_residual_is_spectral_bound(self):
        rng = np.random.default_rng(3)
        M = rng.standard_normal((6, 6))
        M = M + M.T
        D = jacobi_diagonalize(M, 1e-3)
        R = D.Q.T @ np.diag(D.lambdas) @ D.Q - M
        assert np.linalg.norm(R, 2) <= 1e-3

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            jacobi_diagonalize(np.eye(2), 0.0)


class TestSecular:
    def test_single_pole(self):
        roots = secular_solve([0.0], [1.0], 2.0, 1e-12)
        np.testing.assert_allclose(roots, [-0.5, 0.5], atol=1e-12)

    def test_empty(self):
        assert secular_solve([], [], 1.0, 1e-8) == []
        assert secular_solve([1.0, 2.0], [0.0, 0.0], 1.0, 1e-8) == []

    def test_two_poles_against_scan(self):
        lam, v, r = [1.0, -1.0], [1.0, 1.0], 1.0
        roots = secular_solve(lam, v, r, 1e-10)
        scan = scan_roots(lam, v, r)
        assert len(roots) == len(scan) == 2  # w(0) = 2 > r^2, no interior roots
        for (a, b), mu in zip(scan, roots):
            assert a - 1e-10 <= mu <= b + 1e-10

    def test_interior_roots(self):
        lam, v, r = [1.0, -1.0], [0.2, 0.2], 1.0
        roots = secular_solve(lam, v, r, 1e-10)
        scan = scan_roots(lam, v, r)
        assert len(roots) == len(scan) == 4
        for (a, b), mu in zip(scan, roots):
            assert a - 1e-10 <= mu <= b + 1e-10

    def test_derivative(self):
        lam, v = np.array([0.3, -1.2, 2.0]), np.array([0.5, -1.0, 0.25])
        h = 1e-6
        mu = 0.9
        fd = (secular_function(mu + h, lam, v) - secular_function(mu - h, lam, v)) / (2 * h)
        assert secular_derivative(mu, lam, v) == pytest.approx(fd, rel=1e-6)

    def test_merged_poles(self):
        lam = [1.0, 1.0 + 1e-15, -2.0]
        v = [0.6, 0.8, 1.0]
        roots = secular_solve(lam, v, 0.5, 1e-12)
        ref = secular_solve([1.0, -2.0], [1.0, 1.0], 0.5, 1e-12)
        np.testing.assert_allclose(roots, ref, atol=1e-9)

    @pytest.mark.parametrize("seed", range(15))
    def test_random_against_scan(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(2, 9))
        lam = rng.uniform(-1, 1, m)
        v = rng.standard_normal(m) * 10.0 ** rng.uniform(-2, 0, m)
        r = float(rng.uniform(0.5, 3))
        tol = 1e-8
        roots = secular_solve(lam, v, r, tol)
        assert len(roots) >= 2
        assert roots[0] < lam.min() and roots[-1] > lam.max()
        for mu in roots:
            w, dw = secular_function(mu, lam, v), secular_derivative(mu, lam, v)
            assert abs(w - r * r) <= abs(dw) * tol + 1e-12 * r * r
        for a, b in scan_roots(lam, v, r, step=1e-4):
            assert any(a - tol <= mu <= b + tol for mu in roots)


class TestCandidate:
    def test_examples(self):
        np.testing.assert_allclose(candidate_point([0.0], [1.0], 0.5, 2.0), [2.0])
        np.testing.assert_array_equal(candidate_point([1.0, 2.0], [0.0, 0.0], 0.3, 1.0), [0, 0])

    def test_norm_matches_radius(self):
        lam, v, r, tol = [1.0, -1.0], [1.0, 1.0], 1.0, 1e-8
        for mu in secular_solve(lam, v, r, tol):
            y = candidate_point(lam, v, mu, r, tol)
            assert abs(np.linalg.norm(y) - r) <= 10 * tol * r * r / 1.0

    def test_guard_band(self):
        # |mu - lambda| = 0.1 < |v| / r = 1
        assert candidate_point([0.0], [1.0], 0.1, 1.0, 1e-8) is None
        assert candidate_point([0.0], [1.0], 0.0, 1.0) is None


class TestMedian:
    def test_examples(self):
        np.testing.assert_array_equal(coordinate_median([(1, 0), (0, 1), (2, 2)]), [1, 1])
        np.testing.assert_array_equal(coordinate_median([(3.0, -2.0)]), [3, -2])
        np.testing.assert_array_equal(coordinate_median([(1,), (4,), (2,), (3,)]), [2])

    def test_empty(self):
        with pytest.raises(ValueError):
            coordinate_median(np.zeros((0, 3)))

    def test_median_of_means(self):
        rng = np.random.default_rng(0)
        mu, sigma, groups, K, d = np.array([1.0, -2.0, 0.5]), 1.0, 25, 40, 3
        ok = 0
        for _ in range(100):
            # per-coordinate std sigma / sqrt(d) gives total variance sigma^2
            samples = mu + rng.standard_normal((groups, K, d)) * sigma / np.sqrt(d)
            est = coordinate_median(samples.mean(axis=1))
            ok += np.linalg.norm(est - mu) <= 2 * sigma / np.sqrt(K)
        assert ok >= 99
