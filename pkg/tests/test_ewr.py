import math

import numpy as np
import pytest

from dmabeam import QuadraticProblem, ewr_solve, ewr_step, quad_objective, uc_solve
from dmabeam.dma import lorentzian, random_lorentzian

from conftest import random_psd


def naive_objective(D, c, q):
    n = len(q)
    total = 0.0j
    for i in range(n):
        for j in range(n):
            total += np.conj(q[i]) * D[i, j] * q[j]
    total -= 2 * np.real(sum(np.conj(q[i]) * c[i] for i in range(n)))
    return total.real


def random_problem(n, rng, tag="LP"):
    D = random_psd(n, rng)
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return QuadraticProblem(D=D, c=c, tag=tag)


def lp_objective_on_grid(p, thetas):
    q = lorentzian(np.asarray(thetas))
    return quad_objective(p, q)


class TestQuadObjective:
    def test_zero(self, rng):
        p = random_problem(3, rng)
        assert quad_objective(p, np.zeros(3)) == 0.0

    def test_identity_lorentzian(self, rng):
        thetas = rng.uniform(0, 2 * math.pi, 6)
        q = lorentzian(thetas)
        p = QuadraticProblem(D=np.eye(6, dtype=complex), c=np.zeros(6), tag="LP")
        expected = np.sum((1 + np.sin(thetas)) / 2)
        assert quad_objective(p, q) == pytest.approx(expected, rel=1e-12)

    def test_against_double_loop(self, rng):
        p = random_problem(2, rng)
        q = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        assert quad_objective(p, q) == pytest.approx(
            naive_objective(p.D, p.c, q), rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError, match="Hermitian"):
            QuadraticProblem(D=np.array([[1, 1j], [1j, 1]]), c=np.zeros(2),
                             tag="LP")
        with pytest.raises(ValueError, match="nonnegative"):
            QuadraticProblem(D=-np.eye(2), c=np.zeros(2), tag="LP")


class TestEwrStep:
    def test_single_element_closed_form(self):
        # D=[[1]], c=[1+j/2]: eta = 1, theta* = 0, q* = (1+j)/2
        p = QuadraticProblem(D=np.eye(1, dtype=complex),
                             c=np.array([1 + 0.5j]), tag="LP")
        q = lorentzian(np.array([2.0]))
        assert ewr_step(p, q, 0) == pytest.approx(0.5 + 0.5j, rel=1e-12)

    def test_grid_oracle(self, rng):
        # closed form never loses to a 3600-point grid
        grid = np.linspace(0, 2 * math.pi, 3600, endpoint=False)
        for _ in range(100):
            n = int(rng.integers(1, 5))
            p = random_problem(n, rng)
            q = random_lorentzian(n, rng)
            idx = int(rng.integers(n))
            q_star = q.copy()
            q_star[idx] = ewr_step(p, q, idx)
            best = min(
                quad_objective(p, np.concatenate(
                    [q[:idx], [lorentzian(t)], q[idx + 1:]]))
                for t in grid)
            assert quad_objective(p, q_star) <= best + 1e-8

    def test_eta_zero_keeps_current(self):
        p = QuadraticProblem(D=np.zeros((1, 1), dtype=complex),
                             c=np.zeros(1), tag="LP")
        q = lorentzian(np.array([1.3]))
        assert ewr_step(p, q, 0) == q[0]

    def test_ba_two_point(self):
        p = QuadraticProblem(D=np.eye(1, dtype=complex), c=np.zeros(1),
                             tag="BA")
        q = np.array([0.1 + 0j])
        assert ewr_step(p, q, 0) == 0.0  # 0 beats 0.01

    def test_ao_clip(self):
        p = QuadraticProblem(D=np.eye(1, dtype=complex), c=np.array([10.0 + 0j]),
                             tag="AO")
        q = np.array([1.0 + 0j])
        assert ewr_step(p, q, 0) == pytest.approx(5.0)  # optimum 10, clipped
        p2 = QuadraticProblem(D=np.eye(1, dtype=complex),
                              c=np.array([-3.0 + 0j]), tag="AO")
        assert ewr_step(p2, q, 0) == pytest.approx(0.001)

    def test_ao_degenerate_linear(self):
        p = QuadraticProblem(D=np.zeros((1, 1), dtype=complex),
                             c=np.array([1.0 + 0j]), tag="AO")
        q = np.array([1.0 + 0j])
        assert ewr_step(p, q, 0) == pytest.approx(5.0)  # maximize 2x on [.001,5]

    def test_argmax_property(self, rng):
        # Re(e^{-j theta*} eta) = |eta| at the chosen phase
        for _ in range(20):
            p = random_problem(3, rng)
            q = random_lorentzian(3, rng)
            n = 1
            eta = p.c[n] - (p.D[n] @ q - p.D[n, n] * q[n]) - 0.5j * p.D[n, n]
            q_new = ewr_step(p, q, n)
            theta = np.angle(q_new - 0.5j)
            assert np.real(np.exp(-1j * theta) * eta) == pytest.approx(
                abs(eta), rel=1e-12)


class TestEwrSolve:
    def test_identity_no_linear(self, rng):
        # minimizer of sum (1+sin)/2 has every weight at the origin
        p = QuadraticProblem(D=np.eye(4, dtype=complex), c=np.zeros(4), tag="LP")
        q = ewr_solve(p, random_lorentzian(4, rng))
        assert quad_objective(p, q) == pytest.approx(0.0, abs=1e-12)
        assert np.abs(q).max() < 1e-8

    def test_monotone_per_step(self, rng):
        p = random_problem(4, rng)
        q = random_lorentzian(4, rng)
        obj = quad_objective(p, q)
        for _ in range(3):
            for n in range(4):
                q[n] = ewr_step(p, q, n)
                new_obj = quad_objective(p, q)
                assert new_obj <= obj + 1e-9
                obj = new_obj

    def test_feasibility_preserved(self, rng):
        p = random_problem(6, rng)
        q = ewr_solve(p, random_lorentzian(6, rng))
        assert np.abs(np.abs(q - 0.5j) - 0.5).max() < 1e-12

    def test_two_coordinate_brute_force(self, rng):
        grid = np.linspace(0, 2 * math.pi, 720, endpoint=False)
        for _ in range(3):
            p = random_problem(2, rng)
            q = ewr_solve(p, random_lorentzian(2, rng), tol=1e-12,
                          max_sweeps=500)
            t1, t2 = np.meshgrid(grid, grid, indexing="ij")
            q1 = lorentzian(t1.ravel())
            q2 = lorentzian(t2.ravel())
            vals = (np.conj(q1) * p.D[0, 0] * q1
                    + np.conj(q1) * p.D[0, 1] * q2
                    + np.conj(q2) * p.D[1, 0] * q1
                    + np.conj(q2) * p.D[1, 1] * q2).real \
                - 2 * np.real(np.conj(q1) * p.c[0] + np.conj(q2) * p.c[1])
            delta = 2 * math.pi / 720
            bound = sum(abs(p.c[n]) + np.abs(p.D[n]).sum() for n in range(2))
            assert quad_objective(p, q) <= vals.min() + bound * delta

    def test_infeasible_start_rejected(self, rng):
        p = random_problem(2, rng)
        with pytest.raises(ValueError, match="infeasible"):
            ewr_solve(p, np.array([1.0 + 0j, 2.0]))

    def test_uc_tag_rejected(self, rng):
        p = random_problem(2, rng, tag="UC")
        with pytest.raises(ValueError, match="uc_solve"):
            ewr_solve(p, np.zeros(2))

    def test_ba_solve(self, rng):
        p = random_problem(4, rng, tag="BA")
        q0 = np.full(4, 0.1, dtype=complex)
        q = ewr_solve(p, q0)
        assert set(np.round(q.real, 10)) <= {0.0, 0.1}
        assert quad_objective(p, q) <= quad_objective(p, q0) + 1e-12


class TestUcSolve:
    def test_identity(self, rng):
        c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        p = QuadraticProblem(D=np.eye(3, dtype=complex), c=c, tag="UC")
        res = uc_solve(p)
        assert np.allclose(res.q, c)
        assert not res.indefinite

    def test_residual_contract(self, rng):
        p = random_problem(5, rng, tag="UC")
        res = uc_solve(p)
        assert np.linalg.norm(p.D @ res.q - p.c) < 1e-8 * np.linalg.norm(p.c)

    def test_uc_dominates_constrained(self, rng):
        for _ in range(5):
            p_lp = random_problem(3, rng, tag="LP")
            q_lp = ewr_solve(p_lp, random_lorentzian(3, rng))
            p_ao = QuadraticProblem(D=p_lp.D, c=p_lp.c, tag="AO")
            q_ao = ewr_solve(p_ao, np.ones(3, dtype=complex))
            p_uc = QuadraticProblem(D=p_lp.D, c=p_lp.c, tag="UC")
            q_uc = uc_solve(p_uc).q
            uc_val = quad_objective(p_uc, q_uc)
            assert uc_val <= quad_objective(p_lp, q_lp) + 1e-9
            assert uc_val <= quad_objective(p_ao, q_ao) + 1e-9

    def test_singular_ridged(self):
        p = QuadraticProblem(D=np.zeros((2, 2), dtype=complex),
                             c=np.array([1.0, 0.0], dtype=complex), tag="UC")
        res = uc_solve(p)
        assert res.ridged
