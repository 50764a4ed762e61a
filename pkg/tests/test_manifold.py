"""Product Stiefel points, tangent projection, retraction, random draws."""

from __future__ import annotations

import numpy as np
import pytest

from bmsync import (
    ProductStiefelPoint,
    TangentDirection,
    ValidationError,
    embed_reference,
    gauss_identity_check,
    project_tangent,
    proof_direction,
    random_point,
    random_tangent,
    read_point_text,
    retract,
    write_point_text,
)


def feasibility_error(S):
    g = S.blocks @ S.blocks.transpose(0, 2, 1)
    return float(np.max(np.linalg.norm(g - np.eye(S.d), axis=(1, 2))))


class TestTypes:
    def test_point_validation(self):
        with pytest.raises(ValidationError):
            ProductStiefelPoint(2, 2, 3, np.ones((4, 3)))

    def test_p_less_than_d(self):
        with pytest.raises(ValidationError):
            ProductStiefelPoint(2, 3, 2, np.zeros((6, 2)))
        with pytest.raises(ValidationError):
            random_point(2, 3, 2, 0)

    def test_tangent_validation(self):
        S = random_point(3, 2, 4, 0)
        with pytest.raises(ValidationError):
            TangentDirection(S.stack.copy(), S)  # the point itself is not tangent

    def test_blocks_view(self):
        S = random_point(4, 2, 5, 1)
        assert S.blocks.shape == (4, 2, 5)
        assert np.array_equal(S.block(2), S.stack[4:6])


class TestProjectTangent:
    def test_projection_of_point_vanishes(self):
        S = random_point(5, 2, 4, 2)
        V = project_tangent(S, S.stack)
        assert V.norm() <= 1e-12

    def test_normal_free_input_unchanged(self):
        S = random_point(4, 3, 7, 3)
        rng = np.random.default_rng(4)
        W = rng.standard_normal((4, 3, 7))
        # Z_i = W_i (I - S_i^T S_i) satisfies Z_i S_i^T = 0 exactly up to fp.
        Sb = S.blocks
        Z = W - (W @ Sb.transpose(0, 2, 1)) @ Sb
        V = project_tangent(S, Z.reshape(12, 7))
        assert np.max(np.abs(V.stack - Z.reshape(12, 7))) <= 1e-12

    def test_idempotent(self):
        S = random_point(6, 2, 5, 5)
        Z = np.random.default_rng(6).standard_normal((12, 5))
        once = project_tangent(S, Z)
        twice = project_tangent(S, once.stack)
        assert np.max(np.abs(once.stack - twice.stack)) <= 1e-12

    def test_self_adjoint(self):
        S = random_point(5, 3, 6, 7)
        rng = np.random.default_rng(8)
        Y = rng.standard_normal((15, 6))
        Z = rng.standard_normal((15, 6))
        PY = project_tangent(S, Y).stack
        PZ = project_tangent(S, Z).stack
        lhs = float(np.vdot(PY, Z))
        rhs = float(np.vdot(Y, PZ))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_shape_mismatch(self):
        S = random_point(3, 2, 4, 9)
        with pytest.raises(ValidationError):
            project_tangent(S, np.zeros((6, 5)))


class TestRetract:
    def test_zero_step_exact(self):
        S = random_point(4, 2, 5, 10)
        V = random_tangent(S, 11)
        assert retract(S, V, 0.0) is S

    def test_d1_is_normalization(self):
        S = random_point(6, 1, 3, 12)
        V = random_tangent(S, 13)
        t = 0.37
        R = retract(S, V, t)
        Y = S.stack + t * V.stack
        expected = Y / np.linalg.norm(Y, axis=1, keepdims=True)
        assert np.max(np.abs(R.stack - expected)) <= 1e-13

    def test_feasible_for_many_steps(self):
        S = random_point(3, 3, 5, 14)
        V = random_tangent(S, 15)
        for t in (1e-3, 0.1, 1.0, 10.0):
            assert feasibility_error(retract(S, V, t)) <= 1e-10

    def test_second_order_agreement_slope(self):
        S = random_point(4, 2, 6, 16)
        V = random_tangent(S, 17)
        ts = np.array([1e-1, 1e-2, 1e-3, 1e-4])
        gaps = []
        for t in ts:
            R = retract(S, V, t)
            gaps.append(np.linalg.norm(R.stack - (S.stack + t * V.stack)))
        slope = np.polyfit(np.log(ts), np.log(gaps), 1)[0]
        assert slope >= 1.9

    def test_wrong_base_rejected(self):
        S = random_point(3, 2, 4, 18)
        S2 = random_point(3, 2, 4, 19)
        V = random_tangent(S, 20)
        with pytest.raises(ValidationError):
            retract(S2, V, 0.1)


class TestRandomDraws:
    def test_point_deterministic(self):
        a = random_point(5, 2, 4, 21)
        b = random_point(5, 2, 4, 21)
        assert np.array_equal(a.stack, b.stack)

    def test_point_feasible(self):
        for seed in range(5):
            assert feasibility_error(random_point(4, 3, 6, seed)) <= 1e-10

    def test_d1_rows_uniform_on_sphere(self):
        # 1e4 unit vectors in R^3: the empirical mean should be near zero.
        S = random_point(10000, 1, 3, 22)
        assert np.linalg.norm(S.stack.mean(axis=0)) <= 0.05

    def test_tangent_deterministic_and_tangency(self):
        S = random_point(4, 2, 5, 23)
        a = random_tangent(S, 24)
        b = random_tangent(S, 24)
        assert np.array_equal(a.stack, b.stack)
        skew = a.blocks @ S.blocks.transpose(0, 2, 1)
        assert np.max(np.abs(skew + skew.transpose(0, 2, 1))) <= 1e-10

    def test_tangent_nonzero(self):
        S = random_point(3, 1, 4, 25)
        norms = [random_tangent(S, seed).norm() for seed in range(100)]
        assert min(norms) > 0


class TestProofDirection:
    def test_canonical_embedding_formula(self):
        rng = np.random.default_rng(26)
        n, d, p = 5, 2, 6
        O = np.linalg.qr(rng.standard_normal((n, d, d)))[0]
        S = embed_reference(O, n, d, p)
        psi = rng.standard_normal((d, p - d))
        phi = np.concatenate([np.zeros((d, d)), psi], axis=1)
        V = proof_direction(S, O, phi)
        expected = np.concatenate([np.zeros((n, d, d)), O @ psi], axis=2)
        assert np.max(np.abs(V.blocks - expected)) <= 1e-12

    def test_zero_probe_gives_zero(self):
        S = random_point(4, 2, 5, 27)
        O = np.linalg.qr(np.random.default_rng(28).standard_normal((4, 2, 2)))[0]
        V = proof_direction(S, O, np.zeros((2, 5)))
        assert V.norm() == 0.0

    def test_always_tangent(self):
        rng = np.random.default_rng(29)
        for seed in range(5):
            S = random_point(5, 3, 7, seed)
            O = np.linalg.qr(rng.standard_normal((5, 3, 3)))[0]
            V = proof_direction(S, O, rng.standard_normal((3, 7)))
            skew = V.blocks @ S.blocks.transpose(0, 2, 1)
            res = np.max(np.abs(skew + skew.transpose(0, 2, 1)))
            assert res <= 1e-10 * max(1.0, V.norm())

    def test_non_orthogonal_reference_rejected(self):
        S = random_point(3, 2, 4, 30)
        bad = np.ones((3, 2, 2))
        with pytest.raises(ValidationError):
            proof_direction(S, bad, np.zeros((2, 4)))


def test_gaussian_moment_identities_monte_carlo():
    assert gauss_identity_check(draws=100000, seed=0) <= 5.0


def test_point_text_round_trip(tmp_path):
    S = random_point(4, 2, 5, 31)
    path = tmp_path / "point.txt"
    write_point_text(S, path)
    back = read_point_text(path)
    assert (back.n, back.d, back.p) == (4, 2, 5)
    assert np.array_equal(back.stack, S.stack)
