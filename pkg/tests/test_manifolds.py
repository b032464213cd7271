import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trivopt import dense
from trivopt.errors import ConstraintError, ContractError, ShapeError
from trivopt.expm import expm, logm_spd, sqrtm_spd
from trivopt.manifolds import (SPD, Euclidean, Grassmannian, Product, SpecialOrthogonal, Sphere, Stiefel, frame_skew,
                               henaff_init, orthogonality_residual, product_compose, pullback_grad, random_point,
                               tangent_project_so, triv_grassmann, triv_so, triv_spd, triv_stiefel)
from trivopt.verify import grassmann_formula_crosscheck, principal_angles, submersion_check

SPECS = [
    SpecialOrthogonal(2),
    SpecialOrthogonal(5),
    Stiefel(5, 2),
    Stiefel(4, 1),
    Grassmannian(5, 2),
    Grassmannian(6, 3),
    SPD(3),
    Sphere(4),
    Euclidean(3, 2),
    Product([SpecialOrthogonal(3), SPD(2), Euclidean(2)]),
]
IDS = [s.name for s in SPECS]


def _leaves(x):
    return x if isinstance(x, tuple) else (x,)


def _inner(a, b):
    return sum(float(np.sum(x * y)) for x, y in zip(_leaves(a), _leaves(b)))


def _axpy(x, e, t):
    out = tuple(a + t * b for a, b in zip(_leaves(x), _leaves(e)))
    return out if isinstance(x, tuple) else out[0]


def _objective(spec, rng):
    """A smooth ambient function (value, gradient) with random coefficients."""
    shapes = _leaves(spec.point_shape) if isinstance(spec, Product) else (spec.point_shape,)
    Cs = [rng.standard_normal(s) for s in shapes]
    Ds = [rng.standard_normal(s) for s in shapes]

    def value(x):
        return sum(float(np.sum(c * v) + 0.5 * np.sum(d * v * v)) for c, d, v in zip(Cs, Ds, _leaves(x)))

    def grad(x):
        out = tuple(c + d * v for c, d, v in zip(Cs, Ds, _leaves(x)))
        return out if isinstance(spec, Product) else out[0]

    return value, grad


class TestFrames:
    def test_frame_skew(self):
        np.testing.assert_array_equal(frame_skew(np.zeros((3, 3))), 0)
        X = np.array([[9.0, 9.0], [1.5, 9.0]])
        np.testing.assert_array_equal(frame_skew(X), [[0.0, -1.5], [1.5, 0.0]])

    @given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
    def test_frame_skew_exact(self, n, seed):
        X = np.random.default_rng(seed).standard_normal((n, n))
        M = frame_skew(X)
        np.testing.assert_array_equal(M, -M.T)
        np.testing.assert_array_equal(np.tril(M, -1), np.tril(X, -1))

    def test_frame_skew_shape(self):
        with pytest.raises(ShapeError):
            frame_skew(np.ones((2, 3)))


class TestSO:
    def test_zero_is_identity_map(self, rng):
        B = random_point(SpecialOrthogonal(4), rng)
        np.testing.assert_array_equal(triv_so(B, np.zeros((4, 4))), B)

    def test_quarter_turn(self):
        X = np.array([[0.0, 0.0], [math.pi / 2, 0.0]])
        np.testing.assert_allclose(triv_so(np.eye(2), X), [[0.0, -1.0], [1.0, 0.0]], atol=1e-15)

    def test_random(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 9))
            B = random_point(SpecialOrthogonal(n), rng)
            Q = triv_so(B, 3.0 * rng.standard_normal((n, n)))
            assert orthogonality_residual(Q) <= 1e-12
            assert dense.det(Q) == pytest.approx(1.0, abs=1e-10)

    def test_bad_base(self):
        with pytest.raises(ConstraintError):
            triv_so(2.0 * np.eye(3), np.zeros((3, 3)))
        with pytest.raises(ConstraintError):
            triv_so(np.diag([1.0, 1.0, -1.0]), np.zeros((3, 3)))

    def test_tangent_projection(self, rng):
        B = random_point(SpecialOrthogonal(5), rng)
        M = rng.standard_normal((5, 5))
        T = tangent_project_so(B, M)
        np.testing.assert_allclose(B.T @ T, -(B.T @ T).T, atol=1e-13)
        assert dense.fro(tangent_project_so(B, T) - T) <= 1e-12
        S = M + M.T
        np.testing.assert_allclose(tangent_project_so(np.eye(5), S), 0.0, atol=1e-15)


class TestStiefel:
    def test_zero(self, rng):
        B = random_point(Stiefel(5, 2), rng)
        np.testing.assert_array_equal(triv_stiefel(B, np.zeros((5, 2))), B[:, :2])

    def test_single_column_is_great_circle(self):
        v = np.array([0.0, 0.3, -0.4, 1.2])
        t = np.linalg.norm(v)
        expected = math.cos(t) * np.eye(4)[:, 0] + math.sin(t) * v / t
        np.testing.assert_allclose(triv_stiefel(np.eye(4), v[:, None])[:, 0], expected, atol=1e-14)

    def test_random(self, rng):
        for _ in range(20):
            M = Stiefel(7, 3)
            U = M.triv(M.random_base(rng), 2.0 * rng.standard_normal((7, 3)))
            assert orthogonality_residual(U) <= 1e-12

    def test_square_rejected(self):
        with pytest.raises(ContractError):
            Stiefel(3, 3)

    def test_base_from_point(self, rng):
        M = Stiefel(6, 2)
        U = M.point(M.random_base(rng))
        B = M.base_from_point(U)
        np.testing.assert_array_equal(B[:, :2], U)
        assert orthogonality_residual(B) <= 1e-12 and dense.det(B) > 0

    def test_submersion(self):
        assert submersion_check(6, 2, seed=3).passed


class TestGrassmann:
    def test_zero(self, rng):
        B = random_point(Grassmannian(5, 2), rng)
        np.testing.assert_array_equal(triv_grassmann(B, np.zeros((5, 2))), B[:, :2])

    def test_top_block_ignored(self, rng):
        M = Grassmannian(5, 2)
        B = M.random_base(rng)
        X = rng.standard_normal((5, 2))
        Y = X.copy()
        Y[:2] = rng.standard_normal((2, 2))
        np.testing.assert_array_equal(M.triv(B, X), M.triv(B, Y))

    @pytest.mark.parametrize("n,k,scale", [(5, 2, 0.5), (5, 2, 1.5), (7, 3, 1.0), (6, 1, 2.0)])
    def test_svd_formula(self, n, k, scale):
        assert grassmann_formula_crosscheck(n, k, seed=n + k, scale=scale).passed

    def test_random(self, rng):
        M = Grassmannian(6, 2)
        assert orthogonality_residual(M.triv(M.random_base(rng), rng.standard_normal((6, 2)))) <= 1e-12

    def test_principal_angles(self):
        Y = np.eye(3)[:, :1]
        Z = np.array([[math.cos(0.3)], [math.sin(0.3)], [0.0]])
        assert principal_angles(Y, Z)[0] == pytest.approx(0.3)
        assert principal_angles(Y, -Y)[0] == pytest.approx(0.0, abs=1e-8)


class TestSPD:
    def test_identity_base(self, rng):
        M = rng.standard_normal((3, 3))
        D = M + M.T
        np.testing.assert_allclose(triv_spd(np.eye(3), D), expm(D), rtol=1e-13)

    def test_diagonal(self):
        out = triv_spd(np.diag([4.0, 4.0]), np.diag([4 * math.log(2.0)] * 2))
        np.testing.assert_allclose(out, np.diag([8.0, 8.0]), rtol=1e-14)

    def test_random_positive(self, rng):
        M = SPD(5)
        for _ in range(20):
            P = M.triv(M.random_base(rng), 2.0 * rng.standard_normal((5, 5)))
            assert dense.fro(P - P.T) <= 1e-10
            assert dense.sym_eig(P)[0][0] > 0

    def test_bad_base(self):
        with pytest.raises(ConstraintError):
            triv_spd(np.diag([1.0, -1.0]), np.zeros((2, 2)))

    def test_geodesic_endpoint(self, rng):
        M = SPD(4)
        for _ in range(10):
            A = M.random_base(rng)
            Q, _ = dense.qr(rng.standard_normal((4, 4)))
            B = dense.sym((Q * np.geomspace(1.0, 100.0, 4)) @ Q.T)
            S, Si = sqrtm_spd(A), sqrtm_spd(A, inverse=True)
            log_map = S @ logm_spd(dense.sym(Si @ B @ Si)) @ S
            assert dense.fro(M.triv(A, log_map) - B) <= 1e-9 * dense.fro(B)


class TestSphere:
    def test_geodesic(self, rng):
        M = Sphere(4)
        x = M.random_base(rng)
        v = rng.standard_normal(4)
        v -= (x @ v) * x
        t = np.linalg.norm(v)
        np.testing.assert_allclose(M.triv(x, v), math.cos(t) * x + math.sin(t) * v / t, atol=1e-14)

    def test_normal_component_ignored(self, rng):
        M = Sphere(3)
        x = M.random_base(rng)
        v = rng.standard_normal(3)
        np.testing.assert_allclose(M.triv(x, v), M.triv(x, v + 2.5 * x), atol=1e-15)


@pytest.mark.parametrize("spec", SPECS, ids=IDS)
class TestCommon:
    def test_retraction_at_zero(self, spec, rng):
        base = spec.random_base(rng)
        got = spec.triv(base, spec.zero_raw())
        want = spec.point(base)
        for g, w in zip(_leaves(got), _leaves(want)):
            if isinstance(spec, SpecialOrthogonal):
                np.testing.assert_array_equal(g, w)
            else:
                assert dense.fro(np.atleast_2d(g - w)) <= 1e-13

    def test_differential_at_zero(self, spec, rng):
        factors = spec.factors if isinstance(spec, Product) else (spec,)
        bases = _leaves(spec.random_base(rng))
        for f, base in zip(factors, bases):
            E = f.project_raw(rng.standard_normal(f.raw_shape))
            h = 1e-6
            fd = (f.triv(base, h * E) - f.triv(base, -h * E)) / (2 * h)
            np.testing.assert_allclose(fd, f.raw_to_tangent(base, E), atol=1e-6)

    def test_pullback_matches_finite_differences(self, spec):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            base = spec.random_base(rng)
            raw = spec.random_raw(rng, 0.8)
            value, grad = _objective(spec, rng)
            E = spec.random_raw(rng)
            g = spec.pullback_grad(base, raw, grad(spec.triv(base, raw)))
            h = 1e-5
            fd = (value(spec.triv(base, _axpy(raw, E, h))) - value(spec.triv(base, _axpy(raw, E, -h)))) / (2 * h)
            assert abs(_inner(g, E) - fd) <= 1e-6 * max(1.0, abs(fd))

    def test_pullback_zero_gradient(self, spec, rng):
        base = spec.random_base(rng)
        raw = spec.random_raw(rng)
        zero = tuple(np.zeros(s) for s in spec.point_shape) if isinstance(spec, Product) else np.zeros(spec.point_shape)
        for g in _leaves(spec.pullback_grad(base, raw, zero)):
            np.testing.assert_array_equal(g, 0.0)

    def test_functional_pullback(self, spec, rng):
        base = spec.random_base(rng)
        raw = spec.random_raw(rng)
        _, grad = _objective(spec, rng)
        G = grad(spec.triv(base, raw))
        for a, b in zip(_leaves(pullback_grad(spec, base, raw, G)), _leaves(spec.pullback_grad(base, raw, G))):
            np.testing.assert_array_equal(a, b)

    def test_seed_determinism(self, spec):
        a, b = random_point(spec, 7), random_point(spec, 7)
        for x, y in zip(_leaves(a), _leaves(b)):
            np.testing.assert_array_equal(x, y)

    def test_lift_then_point(self, spec, rng):
        base = spec.random_base(rng)
        raw = spec.random_raw(rng)
        lifted = spec.lift(base, raw)
        for x, y in zip(_leaves(spec.point(lifted)), _leaves(spec.triv(base, raw))):
            np.testing.assert_allclose(x, y, atol=1e-15)
        spec.check_point(spec.point(lifted))


class TestSampling:
    def test_so_det(self):
        for seed in range(10):
            assert dense.det(random_point(SpecialOrthogonal(8), seed)) == pytest.approx(1.0, abs=1e-10)

    def test_spd_range(self):
        for seed in range(10):
            w = dense.sym_eig(random_point(SPD(5), seed))[0]
            assert w[0] >= 0.5 * (1 - 1e-10) and w[-1] <= 2.0 * (1 + 1e-10)

    def test_henaff_two(self):
        A = henaff_init(2, 0)
        assert A[0, 0] == A[1, 1] == 0.0
        assert -math.pi <= A[1, 0] <= math.pi and A[0, 1] == -A[1, 0]

    @pytest.mark.parametrize("n", [2, 5, 8])
    def test_henaff_blocks(self, n):
        A = henaff_init(n, 3)
        np.testing.assert_array_equal(A, -A.T)
        mask = np.zeros((n, n), dtype=bool)
        for i in range(n // 2):
            mask[2 * i:2 * i + 2, 2 * i:2 * i + 2] = True
        assert not np.any(A[~mask])
        Q = expm(A)
        for i in range(n // 2):
            s = A[2 * i + 1, 2 * i]
            rot = np.array([[math.cos(s), -math.sin(s)], [math.sin(s), math.cos(s)]])
            assert dense.fro(Q[2 * i:2 * i + 2, 2 * i:2 * i + 2] - rot) <= 1e-12
        if n % 2:
            assert Q[-1, -1] == pytest.approx(1.0)

    def test_henaff_small(self):
        with pytest.raises(ContractError):
            henaff_init(1, 0)


class TestProduct:
    def test_singleton(self, rng):
        so, prod = SpecialOrthogonal(3), product_compose([SpecialOrthogonal(3)])
        B = so.random_base(rng)
        X = rng.standard_normal((3, 3))
        G = rng.standard_normal((3, 3))
        np.testing.assert_array_equal(prod.triv((B,), (X,))[0], so.triv(B, X))
        np.testing.assert_array_equal(prod.pullback_grad((B,), (X,), (G,))[0], so.pullback_grad(B, X, G))

    def test_componentwise(self, rng):
        prod = Product([SpecialOrthogonal(3), SPD(2)])
        base = prod.random_base(rng)
        raw = prod.random_raw(rng)
        out = prod.triv(base, raw)
        np.testing.assert_array_equal(out[0], SpecialOrthogonal(3).triv(base[0], raw[0]))
        np.testing.assert_array_equal(out[1], SPD(2).triv(base[1], raw[1]))

    def test_arity(self, rng):
        prod = Product([SpecialOrthogonal(3), SPD(2)])
        with pytest.raises(ShapeError):
            prod.triv((np.eye(3),), (np.zeros((3, 3)),))
        with pytest.raises(ContractError):
            Product([])


def test_curvature_table():
    assert SpecialOrthogonal(2).curvature.Delta == 0.0
    p = SpecialOrthogonal(4).curvature
    assert (p.delta, p.Delta, p.Lambda) == (0.0, 0.25, 0.0)
    p = Grassmannian(5, 2).curvature
    assert (p.delta, p.Delta, p.Lambda) == (0.0, 2.0, 0.0)
    p = Sphere(3).curvature
    assert (p.delta, p.Delta) == (1.0, 1.0)
    assert SPD(3).curvature is None


def test_frame_gain_matches_metric(rng):
    # ||B frame_skew(X)||_F^2 = 2 ||tril(X, -1)||_F^2
    M = SpecialOrthogonal(5)
    X = M.project_raw(rng.standard_normal((5, 5)))
    assert dense.fro(M.raw_to_tangent(M.random_base(rng), X)) ** 2 == pytest.approx(M.frame_gain * dense.fro(X) ** 2)
