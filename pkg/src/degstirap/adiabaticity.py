"""Adiabaticity diagnostics for the dark subspace.

For a dark state l and a bright state k the ratio

    r_lk(t) = |<Phi_l | d/dt Phi_k>| / |eps_k(t)|

must stay small for the state vector to remain in the dark subspace.  It
is evaluated two ways: by central differences, and in closed form

    r_lk = |p sdot - s pdot| |<X_l| P |y_k>| / (N_l N_k |eps_k|)

which follows from the dark-state template used in
:mod:`degstirap.adiabatic_basis`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .adiabatic_basis import BrightStates, DarkStateFamily, bright_states, uncoupled_e_states
from .errors import CoarseGridError
from .hamiltonian import RwaHamiltonian

DEFAULT_THRESHOLD = 0.1


@dataclass(frozen=True, eq=False)
class AdiabaticityReport:
    """Ratios r_lk(t) on a time grid.

    ``ratio`` and ``ratio_closed`` have shape (T, N_D, K) where K is the
    largest number of bright states seen; missing or excluded entries are
    NaN.  ``excluded`` counts, per time, bright states whose energy fell
    below the zero tolerance.
    """

    times: np.ndarray
    ratio: np.ndarray
    ratio_closed: np.ndarray
    energies: np.ndarray
    fd_error: np.ndarray
    excluded: np.ndarray
    threshold: float = DEFAULT_THRESHOLD
    notes: tuple[str, ...] = field(default=())

    @property
    def max_ratio(self) -> float:
        return float(np.nanmax(self.ratio, initial=0.0))

    @property
    def max_ratio_closed(self) -> float:
        return float(np.nanmax(self.ratio_closed, initial=0.0))

    @property
    def per_time_max(self) -> np.ndarray:
        return np.nan_to_num(np.nanmax(self.ratio, axis=(1, 2), initial=0.0))

    @property
    def adiabatic(self) -> bool:
        return self.max_ratio < self.threshold

    def to_dict(self) -> dict:
        i = int(np.argmax(self.per_time_max)) if len(self.times) else 0
        return {
            "threshold": self.threshold,
            "max_ratio": self.max_ratio,
            "max_ratio_closed_form": self.max_ratio_closed,
            "time_of_max": float(self.times[i]) if len(self.times) else None,
            "adiabatic": bool(self.adiabatic),
            "max_fd_error_estimate": float(np.nanmax(self.fd_error, initial=0.0)),
            "excluded_bright_states": int(self.excluded.sum()),
            "grid_points": int(len(self.times)),
            "notes": list(self.notes),
        }


def _fd(family: DarkStateFamily, h: RwaHamiltonian, t: float, step: float) -> np.ndarray:
    return (family.at(h, t + step) - family.at(h, t - step)) / (2.0 * step)


def adiabaticity_scan(darks: DarkStateFamily, brights: Callable[[float, float], BrightStates] | None,
                      H: RwaHamiltonian, tgrid, threshold: float = DEFAULT_THRESHOLD,
                      zero_tol: float = 1e-9, fd_rtol: float = 1e-2) -> AdiabaticityReport:
    """Evaluate the dark/bright adiabaticity ratios along ``tgrid``.

    Parameters
    ----------
    darks : DarkStateFamily
        Dark family of the system driven by ``H``.
    brights : callable or None
        Maps envelope values (p, s) to :class:`BrightStates`; defaults to
        the bare-basis bright states of ``H``.
    H : RwaHamiltonian
    tgrid : array_like
        Increasing time samples; the central-difference step is the local
        grid spacing.
    threshold : float
        Value the largest ratio must stay below to count as adiabatic.
    zero_tol : float
        Bright states with |eps| below zero_tol times the coupling scale
        are excluded.
    fd_rtol : float
        Largest tolerated relative change of the derivative estimate when
        the step is halved; above it a :class:`CoarseGridError` is raised.
    """
    t = np.asarray(tgrid, dtype=float)
    if t.ndim != 1 or t.size < 3 or np.any(np.diff(t) <= 0):
        raise ValueError("tgrid must hold at least three increasing times")
    if brights is None:
        pair, delta = H.couplings, H.detuning

        def brights(p, s):
            return bright_states(pair, delta=delta, p=p, s=s)

    Ng, Ne, Nf = H.sizes
    P = np.asarray(H.couplings.P)
    scale = max(np.linalg.norm(P, 2) if P.size else 0.0,
                np.linalg.norm(H.couplings.S, 2) if H.couplings.S.size else 0.0, 1e-300)
    spacing = np.diff(t)
    # e states uncoupled from both fields at all times are not bright states
    baseline = uncoupled_e_states(H.couplings).shape[1]
    L = darks.count
    m = darks.parameterized_count
    snaps, kmax = [], 0
    for ti in t:
        b = brights(*H.envelopes(ti))
        snaps.append(b)
        kmax = max(kmax, b.count)

    T = t.size
    ratio = np.full((T, L, kmax), np.nan)
    ratio_c = np.full((T, L, kmax), np.nan)
    energies = np.full((T, kmax), np.nan)
    fd_err = np.zeros(T)
    excluded = np.zeros(T, dtype=int)
    for i, (ti, b) in enumerate(zip(t, snaps)):
        hstep = min(spacing[max(i - 1, 0)], spacing[min(i, T - 2)])
        d1 = _fd(darks, H, ti, hstep)
        d2 = _fd(darks, H, ti, 0.5 * hstep)
        mag = np.abs(d2).max(initial=0.0)
        err = np.abs(d1 - d2).max(initial=0.0)
        fd_err[i] = err / mag if mag > 0 else 0.0
        if mag > 1e-8 and fd_err[i] > fd_rtol:
            raise CoarseGridError(
                f"derivative estimate at t={ti:g} changes by {fd_err[i]:.2e} (relative) when the step "
                f"is halved; refine the grid to a spacing below {hstep / 4:g}")
        eps = b.energies
        good = np.abs(eps) > zero_tol * scale
        # each mu the bright solver dropped as vanishing stands for two bright states
        dropped = max(b.uncoupled.shape[1] - baseline, 0)
        excluded[i] = int((~good).sum()) + 2 * dropped
        if not b.count:
            continue
        energies[i, : b.count] = eps
        # d/dt <Phi_l|Phi_k> = 0 gives <Phi_l|dPhi_k> = -<dPhi_l|Phi_k>
        ov = np.abs(d2.conj().T @ b.vectors)
        r = ov / np.abs(np.where(good, eps, np.nan))[np.newaxis, :]
        ratio[i, :, : b.count] = r

        p, s = H.envelopes(ti)
        pdot, sdot = float(H.pump.derivative(ti)), float(H.stokes.derivative(ti))
        closed = np.zeros((L, b.count))
        if m:
            nl = darks.norms(p, s)
            with np.errstate(divide="ignore", invalid="ignore"):
                y_over_nk = b.vectors[Ng:Ng + Ne] / eps[np.newaxis, :]
            elem = np.abs(darks.X.conj().T @ P @ y_over_nk)
            closed[:m] = abs(p * sdot - s * pdot) * elem / nl[:, np.newaxis]
        ratio_c[i, :, : b.count] = closed / np.abs(np.where(good, eps, np.nan))[np.newaxis, :]
    notes = []
    if excluded.any():
        notes.append("bright states with vanishing energy were excluded")
    return AdiabaticityReport(t, ratio, ratio_c, energies, fd_err, excluded, threshold, tuple(notes))


@dataclass(frozen=True, eq=False)
class ConventionalCriterion:
    """Nondegenerate three-level adiabaticity curves.

    ``ratio_plus`` compares the coupling to the upper bright state with its
    energy, ``ratio_minus`` the lower one; ``ratio`` is the stricter
    (larger) of the two.
    """

    omega0: np.ndarray
    phi: np.ndarray
    theta_dot: np.ndarray
    eps_plus: np.ndarray
    eps_minus: np.ndarray
    ratio_plus: np.ndarray
    ratio_minus: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        return np.maximum(self.ratio_plus, self.ratio_minus)


def conventional_adiabaticity(omega_p, omega_s, domega_p, domega_s, delta: float = 0.0) -> ConventionalCriterion:
    """Classic STIRAP adiabaticity criterion from full Rabi frequencies.

    With Omega0 = sqrt(Omega_P^2 + Omega_S^2), tan 2 phi = Omega0 / Delta
    and mixing-angle rate thetadot = (Omega_S dOmega_P - Omega_P dOmega_S) / Omega0^2,
    the bright energies are (Omega0/2) cot(phi) and -(Omega0/2) tan(phi)
    and the nonadiabatic couplings are thetadot sin(phi) and thetadot cos(phi).
    Delta = 0 gives phi = pi/4.  Where Omega0 vanishes the ratios are set to 0.
    """
    wp, ws, dp, ds = (np.asarray(x, dtype=float) for x in (omega_p, omega_s, domega_p, domega_s))
    w0 = np.hypot(wp, ws)
    phi = 0.5 * np.arctan2(w0, delta)
    safe = w0 > 0
    w0s = np.where(safe, w0, 1.0)
    thdot = np.where(safe, (ws * dp - wp * ds) / w0s**2, 0.0)
    sphi, cphi = np.sin(phi), np.cos(phi)
    root = np.sqrt(delta * delta + w0 * w0)
    with np.errstate(divide="ignore", invalid="ignore"):
        # eps_p * eps_m = -Omega0^2 / 4; take the small root from the product
        if delta >= 0:
            eps_p = 0.5 * (delta + root)
            eps_m = np.where(eps_p > 0, -0.25 * w0 * w0 / eps_p, 0.0)
        else:
            eps_m = 0.5 * (delta - root)
            eps_p = np.where(eps_m < 0, -0.25 * w0 * w0 / eps_m, 0.0)
        r_p = np.where(safe & (eps_p != 0), np.abs(thdot) * sphi / np.abs(eps_p), 0.0)
        r_m = np.where(safe & (eps_m != 0), np.abs(thdot) * cphi / np.abs(eps_m), 0.0)
    return ConventionalCriterion(w0, phi, thdot, eps_p, eps_m, r_p, r_m)


def conventional_from_hamiltonian(H: RwaHamiltonian, times) -> ConventionalCriterion:
    """Conventional criterion for a nondegenerate (1, 1, 1) Hamiltonian.

    The coupling entries are half Rabi frequencies, so Omega = 2 |P| p(t).
    """
    if H.sizes != (1, 1, 1):
        raise ValueError("conventional criterion needs a nondegenerate three-level system")
    t = np.asarray(times, dtype=float)
    a = 2.0 * abs(H.couplings.P[0, 0])
    b = 2.0 * abs(H.couplings.S[0, 0])
    return conventional_adiabaticity(a * H.pump(t), b * H.stokes(t), a * H.pump.derivative(t),
                                     b * H.stokes.derivative(t), float(H.detuning))
