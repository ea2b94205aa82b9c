import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from degstirap.morris_shore import ms_decompose, second_stage_ms, split_pump_blocks
from degstirap.oracle_check import permutation_error, run_checks, subsystem_121, subsystem_123
from degstirap.oracles import (SCALE_121, SCALE_123, Analytic121, Analytic123, DegenerateAngleError, a_prime_121,
                               condition_121, dark_vectors_123, eigvals_121, eigvals_123, ms_matrices_121,
                               ms_matrices_123, phase_equivalent, pi_121, pi_and_condition_121)

from helpers import FIG4_ETA, FIG4_PHASES, FIG4_THETA

angles = st.floats(-np.pi, np.pi, allow_nan=False)


def exact_stokes_123(theta):
    """Printed J = 2 -> 3 Stokes block in units of Omega_S, exact."""
    c, s = sp.cos(theta), sp.sin(theta)
    r = sp.sqrt
    return sp.Rational(1, 2) / r(5) * sp.Matrix([[s, r(sp.Rational(1, 15)) * c, 0, 0],
                                                   [0, r(sp.Rational(2, 5)) * s, r(sp.Rational(2, 5)) * c, 0],
                                                   [0, 0, r(sp.Rational(1, 15)) * s, c]])


def exact_lambdas_123(theta):
    S = exact_stokes_123(theta)
    ev = (S * S.T / sp.Rational(7, 20)).eigenvals()
    return sorted(float(sp.re(sp.N(k, 30))) for k, m in ev.items() for _ in range(m))


class TestEigvals123:
    @pytest.mark.parametrize("theta", [0, sp.pi / 4, sp.pi / 6])
    def test_exact_values(self, theta):
        assert np.allclose(np.sort(eigvals_123(float(theta))), exact_lambdas_123(theta), rtol=1e-12)

    def test_frozen(self):
        assert np.allclose(np.sort(eigvals_123(0.0)), [1 / 105, 2 / 35, 1 / 7], rtol=1e-12)
        assert np.allclose(np.sort(eigvals_123(np.pi / 4)), [1 / 21, 8 / 105, 3 / 35], rtol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(angles)
    def test_positive_and_numeric(self, theta):
        lam = np.sort(eigvals_123(theta))
        assert lam.min() > 0
        _, S = subsystem_123(0.2, theta)
        num = np.sort(ms_decompose(S).sigma ** 2 / SCALE_123)
        assert np.allclose(num, lam, rtol=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(angles)
    def test_sigma_swap_symmetry(self, theta):
        assert np.allclose(np.sort(eigvals_123(theta)), np.sort(eigvals_123(theta + np.pi / 2)), rtol=1e-9)


class TestMatrices123:
    def test_fig4_equivalent_to_numeric(self):
        _, S = subsystem_123(FIG4_ETA, FIG4_THETA, FIG4_PHASES)
        dec = ms_decompose(S)
        A, B = ms_matrices_123(FIG4_THETA, FIG4_PHASES)
        assert phase_equivalent(A, dec.A) and phase_equivalent(B, dec.B)

    def test_unitary(self):
        A, B = ms_matrices_123(0.9, (0.1, 0.2, 0.3, 0.4))
        for U in (A, B):
            assert np.abs(U @ U.conj().T - np.eye(len(U))).max() < 1e-10

    def test_uncoupled_row_at_quarter_pi(self):
        A, _ = ms_matrices_123(np.pi / 4)
        d = np.array([-1, np.sqrt(15), -np.sqrt(15), 1]) / np.sqrt(32)
        assert np.isclose(np.abs(A.conj() @ d).max(), 1.0)

    @pytest.mark.parametrize("theta", [0.0, np.pi / 2, np.pi + 2e-4])
    def test_degenerate_angles(self, theta):
        with pytest.raises(DegenerateAngleError):
            ms_matrices_123(theta)

    def test_dark_vectors(self):
        x1, x2, up, vp = dark_vectors_123(FIG4_ETA, FIG4_THETA, FIG4_PHASES)
        assert np.linalg.norm(x1) == pytest.approx(1) and np.linalg.norm(x2) == pytest.approx(1)
        assert abs(np.vdot(x1, x2)) < 1e-12

    def test_evaluate_bundle(self):
        r = Analytic123.evaluate(FIG4_ETA, FIG4_THETA, FIG4_PHASES)
        assert np.allclose(r.lambdas, eigvals_123(FIG4_THETA))
        assert len(r.x0) == 2


class TestEigvals121:
    def test_frozen_values(self):
        assert np.allclose(eigvals_121(0.0), [0.12, 0.02], atol=1e-15)
        assert np.allclose(eigvals_121(np.pi / 4), [0.08, 0.06], atol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(angles)
    def test_numeric(self, theta):
        lam = eigvals_121(theta)
        assert lam.min() > 0
        _, S = subsystem_121(0.5, theta)
        assert np.allclose(np.sort(ms_decompose(S).sigma ** 2 / SCALE_121), np.sort(lam), atol=1e-10)


class TestMatrices121:
    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 0.7), st.tuples(angles, angles, angles, angles))
    def test_against_numeric(self, theta, ph):
        _, S = subsystem_121(0.3, theta, ph)
        dec = ms_decompose(S)
        A, B_a, B_b = ms_matrices_121(theta, ph)
        assert permutation_error(A, dec.A) < 1e-8
        assert permutation_error(np.vstack([B_a, B_b]), dec.B) < 1e-8
        assert np.abs(B_b @ S).max() < 1e-12

    def test_printed_form_fails(self):
        ph = (0.3, -0.2, 1.1, 0.4)
        _, S = subsystem_121(0.3, 0.35, ph)
        _, _, Bb = ms_matrices_121(0.35, ph, as_printed=True)
        assert np.abs(Bb @ S).max() > 1e-3

    @pytest.mark.parametrize("theta", [0.0, np.pi / 4, -np.pi / 4, np.pi / 2])
    def test_degenerate(self, theta):
        with pytest.raises(DegenerateAngleError):
            ms_matrices_121(theta)

    def test_a_prime_blocks(self):
        ph = (0.3, -0.2, 1.1, 0.4)
        eta, th = 0.9, 0.35
        P, S = subsystem_121(eta, th, ph)
        _, _, Bb = ms_matrices_121(th, ph)
        Ap = a_prime_121(th, ph)
        col = Ap @ P @ Bb.conj().T
        assert abs(col[0, 0]) < 1e-12
        assert abs(col[1, 0]) == pytest.approx(abs(pi_121(eta, th, ph)), abs=1e-12)


class TestPi:
    def test_frozen(self):
        assert pi_121(2 * np.pi / 5, -np.pi / 7) == pytest.approx(-0.15716068814098566, abs=1e-14)
        assert pi_121(0.9, 0.35, (0.3, -0.2, 1.1, 0.4)) == pytest.approx(-0.07613919947535944 + 0.020654346107254508j,
                                                                         abs=1e-14)

    def test_fig10(self):
        Pi, flag = pi_and_condition_121(2 * np.pi / 5, np.pi / 10)
        assert abs(Pi) < 1e-15 and flag

    def test_fig9(self):
        Pi, flag = pi_and_condition_121(2 * np.pi / 5, -np.pi / 7)
        assert abs(Pi) > 0.1 and not flag

    @settings(max_examples=100, deadline=None)
    @given(angles, angles, st.tuples(angles, angles, angles, angles))
    def test_matches_second_stage(self, eta, theta, ph):
        P, S = subsystem_121(eta, theta, ph, 3.0)
        sec = second_stage_ms(*split_pump_blocks(P, ms_decompose(S)))
        assert abs(sec.Pi[0, 0]) == pytest.approx(abs(pi_121(eta, theta, ph, 3.0)), abs=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(angles, st.integers(-2, 2), st.tuples(angles, angles, angles), st.integers(-2, 2))
    def test_condition_implies_zero(self, eta, k, ph3, n):
        pP, qP, pS = ph3
        qS = k * np.pi + pS - pP + qP
        theta = np.pi / 2 - (-1) ** k * eta + n * np.pi
        ph = (pP, qP, pS, qS)
        assert condition_121(eta, theta, ph)
        assert abs(pi_121(eta, theta, ph)) < 1e-12

    def test_corner_any_phase(self):
        # cos(eta) cos(theta) = sin(eta) sin(theta) = 0 kills Pi whatever the phases
        ph = (0.1, 0.7, -1.3, 2.0)
        assert abs(pi_121(0.0, np.pi / 2, ph)) < 1e-15
        assert condition_121(0.0, np.pi / 2, ph)

    def test_phase_mismatch(self):
        ph = (0.0, 0.0, 0.0, 0.3)
        assert not condition_121(2 * np.pi / 5, np.pi / 10, ph)
        assert abs(pi_121(2 * np.pi / 5, np.pi / 10, ph)) > 1e-3

    def test_bundle(self):
        r = Analytic121.evaluate(2 * np.pi / 5, np.pi / 10)
        assert r.condition_met and abs(r.Pi) < 1e-15


class TestRunChecks:
    def test_all_pass(self):
        out = run_checks(points=24, seed=1)
        assert out["passed"], {k: v for k, v in out["checks"].items() if not v["passed"]}
