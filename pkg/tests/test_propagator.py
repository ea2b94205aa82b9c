import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from degstirap.adiabatic_basis import dark_states
from degstirap.errors import IntegrationError
from degstirap.hamiltonian import GaussianPulse, RwaHamiltonian
from degstirap.linkage import CouplingPair
from degstirap.propagator import DarkSubspaceWarning, adiabatic_transfer, fidelity, integrate, populations
from degstirap.scenario import load_scenario, resolve

from helpers import random_pair


def bundled(name):
    return load_scenario(resolve(name))


def midpoint_expm(H, psi0, t0, t1, steps):
    """Reference propagator: product of exponentials at the step midpoints."""
    ts = np.linspace(t0, t1, steps + 1)
    psi = np.asarray(psi0, dtype=complex)
    for a, b in zip(ts[:-1], ts[1:]):
        psi = expm(-1j * (b - a) * H(0.5 * (a + b))) @ psi
    return psi


class TestIntegrate:
    def test_zero_hamiltonian(self):
        pair = CouplingPair(np.zeros((1, 1)), np.zeros((1, 1)))
        H = RwaHamiltonian(pair, GaussianPulse(0, 1), GaussianPulse(0, 1))
        psi = np.array([0.6, 0.8j, 0])
        tr = integrate(H, psi, (-3, 3))
        assert np.allclose(tr.final, psi, atol=1e-14)

    def test_against_midpoint_reference(self):
        rng = np.random.default_rng(0)
        H = RwaHamiltonian(random_pair(rng, (2, 3, 2)), GaussianPulse(0.5, 1), GaussianPulse(-0.5, 1), 0.4)
        psi0 = np.zeros(7, dtype=complex)
        psi0[0] = 1
        tr = integrate(H, psi0, (-4, 4))
        ref = midpoint_expm(H, psi0, -4, 4, 4000)
        assert np.abs(tr.final - ref).max() < 1e-5

    def test_norm_and_positivity(self):
        sc = bundled("fig4")
        tr = integrate(sc.hamiltonian(), sc.initial, sc.integration_window())
        assert tr.norm_drift < 1e-9
        assert np.all(tr.populations > -1e-12)
        assert np.allclose(tr.populations.sum(axis=1), 1.0, atol=1e-9)

    def test_fig4_transfer(self):
        sc = bundled("fig4")
        pg, pe, pf = integrate(sc.hamiltonian(), sc.initial).final_populations
        assert pf > 0.999

    def test_mixed_is_average_of_pure(self):
        sc = bundled("fig5")
        H = sc.hamiltonian()
        rho = integrate(H, sc.initial, sc.integration_window(), n_points=3)
        acc = np.zeros_like(rho.final)
        for i in np.flatnonzero(np.diag(sc.initial).real > 0):
            psi = np.zeros(H.N, dtype=complex)
            psi[i] = 1
            f = integrate(H, psi, sc.integration_window(), n_points=3).final
            acc += sc.initial[i, i].real * np.outer(f, f.conj())
        assert np.abs(rho.final - acc).max() < 1e-8
        assert rho.kind == "mixed" and rho.norm_drift < 1e-9
        assert np.linalg.eigvalsh(rho.final).min() > -1e-10

    def test_twin_diamond_dichotomy(self):
        p9 = integrate(bundled("fig9").hamiltonian(), bundled("fig9").initial).final_populations
        p10 = integrate(bundled("fig10").hamiltonian(), bundled("fig10").initial).final_populations
        assert p9[0] + p9[1] > 0.01
        assert p10[2] > 0.99

    def test_budget_exceeded(self):
        sc = bundled("fig4")
        with pytest.raises(IntegrationError, match="rtol"):
            integrate(sc.hamiltonian(), sc.initial, max_evaluations=50)

    def test_validation(self):
        H = bundled("fig4").hamiltonian()
        with pytest.raises(ValueError):
            integrate(H, np.ones(H.N))
        with pytest.raises(ValueError):
            integrate(H, np.ones(3) / np.sqrt(3))
        with pytest.raises(ValueError):
            integrate(H, np.diag(np.r_[1.5, -0.5, np.zeros(H.N - 2)]))
        with pytest.raises(ValueError):
            integrate(H, np.eye(H.N)[0], window=(1.0, 0.0))

    def test_csv(self):
        sc = bundled("fig9")
        tr = integrate(sc.hamiltonian(), sc.initial, n_points=5)
        lines = tr.to_csv().splitlines()
        assert lines[0].startswith("t,re_g(-1),im_g(-1)") and lines[0].endswith("P_g,P_e,P_f")
        assert len(lines) == 6
        assert "0.94868329805051377" in lines[1]

    def test_to_dict(self):
        sc = bundled("fig5")
        d = integrate(sc.hamiltonian(), sc.initial, n_points=3).to_dict()
        assert d["kind"] == "mixed" and len(d["final_state"]["re"]) == sum(d["sizes"])


class TestPopulations:
    def test_pure_ground(self):
        psi = np.zeros(15)
        psi[2] = 1
        assert populations(psi, (3, 5, 7)) == (1.0, 0.0, 0.0)

    def test_density(self):
        rho = np.diag([0.2, 0.3, 0.5])
        assert populations(rho, (1, 1, 1)) == pytest.approx((0.2, 0.3, 0.5))

    def test_fidelity(self):
        a = np.array([1, 1j]) / np.sqrt(2)
        assert fidelity(a, a) == pytest.approx(1.0)
        assert fidelity(np.outer(a, a.conj()), a) == pytest.approx(1.0, abs=1e-8)
        assert fidelity(np.eye(2) / 2, np.array([1, 0])) == pytest.approx(0.5, abs=1e-8)


class TestAdiabaticTransfer:
    def setup_method(self):
        self.sc = bundled("fig4")
        self.H = self.sc.hamiltonian()
        self.fam = dark_states(self.H.couplings)

    def test_same_time_is_projector(self):
        op = adiabatic_transfer(self.fam, self.H, -3.0, -3.0)
        assert np.allclose(op.matrix, op.initial_projector, atol=1e-12)

    def test_partial_isometry(self):
        op = adiabatic_transfer(self.fam, self.H, -20.0, 20.0)
        U = op.matrix
        assert np.abs(U.conj().T @ U - op.initial_projector).max() < 1e-11

    def test_fig4_prediction(self):
        t0, t1 = self.sc.integration_window()
        op = adiabatic_transfer(self.fam, self.H, t0, t1)
        psi0 = op.initial_projector @ self.sc.initial
        psi0 /= np.linalg.norm(psi0)
        pred = op.apply(psi0)
        got = integrate(self.H, self.sc.initial, (t0, t1)).final
        assert fidelity(pred, got) > 0.999

    def test_bright_component_warns(self):
        op = adiabatic_transfer(self.fam, self.H, -3.0, 20.0)
        psi = np.zeros(self.H.N, dtype=complex)
        psi[0] = 1  # g(-1) at the pulse overlap is not dark
        with pytest.warns(DarkSubspaceWarning) as rec:
            op.apply(psi)
        assert rec[0].message.residual == pytest.approx(op.residual(psi))
        assert op.residual(psi) > 1e-3

    def test_dark_state_silent(self):
        t0, t1 = self.sc.integration_window()
        op = adiabatic_transfer(self.fam, self.H, t0, t1)
        psi = self.fam.at(self.H, t0)[:, 0]
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            op.apply(psi)

    def test_density_matrix(self):
        t0, t1 = self.sc.integration_window()
        op = adiabatic_transfer(self.fam, self.H, t0, t1)
        V = self.fam.at(self.H, t0)
        rho = V[:, :2] @ V[:, :2].conj().T / 2
        out = op.apply(rho)
        assert np.trace(out).real == pytest.approx(1.0)
