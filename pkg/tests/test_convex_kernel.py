import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saginopt import convex_kernel as ck
from saginopt.convex_kernel import (AffineEq, ConvexProblem, SocConstraint,
                                    conj_inner_rows, lift, norm_ball,
                                    quadratic_leq_affine, real_part_functional,
                                    transpose_inner_rows,
                                    transpose_real_functional, unlift)

from conftest import complex_array


def test_projection_onto_affine():
    problem = ConvexProblem(dimension=2, quad_rows=np.eye(2),
                            affine_eq=[AffineEq(np.array([1.0, 0.0]), 1.0)])
    sol = ck.solve(problem)
    assert sol.status == ck.OPTIMAL
    np.testing.assert_allclose(sol.x, [1.0, 0.0], atol=1e-7)
    assert sol.objective_value == pytest.approx(1.0, abs=1e-7)


def test_cone_boundary_minimum():
    problem = ConvexProblem(dimension=1, linear=np.array([1.0]),
                            soc_constraints=[norm_ball([0], 2.0, 1)])
    sol = ck.solve(problem)
    assert sol.status == ck.OPTIMAL
    assert sol.x[0] == pytest.approx(-2.0, abs=1e-6)


def projected_gradient_oracle(P, q, radius, steps=400_000, lr=None):
    n = P.shape[0]
    lr = lr or 0.9 / np.linalg.eigvalsh(P).max()
    x = np.zeros(n)
    for _ in range(steps):
        x = x - lr * (2.0 * P @ x + q)
        norm = np.linalg.norm(x)
        if norm > radius:
            x *= radius / norm
    return x


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_against_projected_gradient(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(2, 10)
    A = rng.standard_normal((n, n))
    P = A.T @ A + 0.1 * np.eye(n)
    q = rng.standard_normal(n)
    radius = 0.8
    problem = ConvexProblem.from_quadratic(
        P, q, soc_constraints=[norm_ball(range(n), radius, n)])
    sol = ck.solve(problem, tolerance=1e-9)
    x_pg = projected_gradient_oracle(P, q, radius, steps=60_000)
    val_pg = x_pg @ P @ x_pg + q @ x_pg
    assert sol.objective_value <= val_pg + 1e-6
    np.testing.assert_allclose(sol.x, x_pg, atol=1e-4)


def test_deterministic():
    rng = np.random.default_rng(3)
    P = np.diag(rng.uniform(0.5, 2.0, size=4))
    q = rng.standard_normal(4)
    problem = ConvexProblem.from_quadratic(
        P, q, soc_constraints=[norm_ball(range(4), 1.0, 4)])
    a = ck.solve(problem)
    b = ck.solve(problem)
    np.testing.assert_array_equal(a.x, b.x)


def test_scaling_invariance_of_argmin():
    rng = np.random.default_rng(4)
    P = np.diag(rng.uniform(0.5, 2.0, size=3))
    q = rng.standard_normal(3)
    ball = norm_ball(range(3), 1.0, 3)
    base = ck.solve(ConvexProblem.from_quadratic(P, q, soc_constraints=[ball]),
                    tolerance=1e-9)
    scaled = ck.solve(ConvexProblem.from_quadratic(5.0 * P, 5.0 * q,
                                                   soc_constraints=[ball]),
                      tolerance=1e-9)
    np.testing.assert_allclose(base.x, scaled.x, atol=1e-8)


def test_infeasible_detected():
    problem = ConvexProblem(
        dimension=1, quad_rows=np.eye(1),
        soc_constraints=[norm_ball([0], 1.0, 1)],
        affine_eq=[AffineEq(np.array([1.0]), 5.0)])
    assert ck.solve(problem).status == ck.INFEASIBLE


def test_trace_monotone():
    problem = ConvexProblem(dimension=3, quad_rows=np.eye(3),
                            linear=np.array([1.0, -2.0, 0.5]),
                            soc_constraints=[norm_ball(range(3), 1.0, 3)])
    sol = ck.solve(problem, record_trace=True)
    assert sol.status == ck.OPTIMAL
    assert len(sol.trace) >= 1
    assert all(b <= a + 1e-12 for a, b in zip(sol.trace, sol.trace[1:]))


def test_from_quadratic_rejects_indefinite():
    P = np.diag([1.0, -0.5])
    with pytest.raises(ValueError, match="PSD"):
        ConvexProblem.from_quadratic(P, np.zeros(2))


def test_quadratic_matrix_round_trip():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((4, 4))
    P = A.T @ A
    problem = ConvexProblem.from_quadratic(P, np.zeros(4))
    np.testing.assert_allclose(problem.quadratic_matrix(), P, atol=1e-10)


class TestQuadraticLeqAffine:
    def test_encoding_matches_inequality(self):
        rng = np.random.default_rng(6)
        n = 4
        A = rng.standard_normal((3, n))
        b = rng.standard_normal(3)
        const = 0.3
        c = rng.standard_normal(n)
        d = 1.5
        soc = quadratic_leq_affine(A, b, const, c, d)
        for _ in range(200):
            x = rng.standard_normal(n)
            lhs = np.sum((A @ x + b) ** 2) + const
            rhs = c @ x + d
            encoded = np.linalg.norm(soc.A @ x + soc.b) <= soc.c @ x + soc.d
            assert encoded == (lhs <= rhs and rhs >= 0) or \
                abs(lhs - rhs) < 1e-9

    def test_negative_constant_rejected(self):
        with pytest.raises(ValueError):
            quadratic_leq_affine(np.eye(2), np.zeros(2), -1.0, np.zeros(2), 1.0)


class TestLifting:
    @settings(max_examples=50)
    @given(st.integers(1, 6), st.integers(0, 1000))
    def test_conj_inner_rows(self, n, seed):
        rng = np.random.default_rng(seed)
        h = complex_array(rng, (n,))
        w = complex_array(rng, (n,))
        rows = conj_inner_rows(h) @ lift(w)
        direct = np.vdot(h, w)
        assert rows[0] == pytest.approx(direct.real, abs=1e-12)
        assert rows[1] == pytest.approx(direct.imag, abs=1e-12)

    @settings(max_examples=50)
    @given(st.integers(1, 6), st.integers(0, 1000))
    def test_transpose_inner_rows(self, n, seed):
        rng = np.random.default_rng(seed)
        c = complex_array(rng, (n,))
        z = complex_array(rng, (n,))
        rows = transpose_inner_rows(c) @ lift(z)
        direct = z @ c
        assert rows[0] == pytest.approx(direct.real, abs=1e-12)
        assert rows[1] == pytest.approx(direct.imag, abs=1e-12)

    def test_real_functionals(self, rng):
        a = complex_array(rng, (5,))
        w = complex_array(rng, (5,))
        assert real_part_functional(a) @ lift(w) == pytest.approx(
            np.vdot(a, w).real, abs=1e-12)
        assert transpose_real_functional(a) @ lift(w) == pytest.approx(
            (w @ a).real, abs=1e-12)

    def test_lift_unlift_round_trip(self, rng):
        z = complex_array(rng, (7,))
        np.testing.assert_allclose(unlift(lift(z)), z)


def test_problem_dump(tmp_path):
    problem = ConvexProblem(dimension=2, quad_rows=np.eye(2),
                            linear=np.array([0.5, -1.0]),
                            soc_constraints=[norm_ball([0, 1], 2.0, 2)],
                            affine_eq=[AffineEq(np.array([1.0, 1.0]), 0.5)])
    path = tmp_path / "problem.txt"
    ck.dump_problem(problem, path)
    text = path.read_text()
    assert text.startswith("dimension 2")
    assert "soc 0" in text and "eq 0" in text
