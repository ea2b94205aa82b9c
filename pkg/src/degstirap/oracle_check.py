"""Cross-validation of the closed-form references against the numerical pipeline."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .adiabatic_basis import metric_matrix
from .linkage import FieldSpec, LinkageSpec, build_couplings
from .morris_shore import ms_decompose, second_stage_ms, split_pump_blocks
from .oracles import (GUARD_BAND, SCALE_121, SCALE_123, condition_121, dark_vectors_123, eigvals_121,
                      eigvals_123, ms_matrices_121, ms_matrices_123, pi_121)

# index sets of the sigma-coupled blocks inside the full manifolds (ascending M)
_G = [0, 2]
_E = [0, 2, 4]
_F_123 = [0, 2, 4, 6]
_F_121 = [0, 2]


def subsystem_123(eta: float, theta: float, phases=(0, 0, 0, 0), omega_p: float = 1.0,
                  omega_s: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Numerical (P, S) of the (2, 3, 4) block of J = 1 <-> 2 <-> 3."""
    pP, qP, pS, qS = phases
    spec = LinkageSpec(1, 2, 3, FieldSpec.from_angles(omega_p, eta, pP, qP),
                       FieldSpec.from_angles(omega_s, theta, pS, qS))
    pair = build_couplings(spec)
    return pair.P[np.ix_(_G, _E)], pair.S[np.ix_(_E, _F_123)]


def subsystem_121(eta: float, theta: float, phases=(0, 0, 0, 0), omega_p: float = 1.0,
                  omega_s: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Numerical (P, S) of the twin-diamond block of J = 1 <-> 2 <-> 1."""
    pP, qP, pS, qS = phases
    spec = LinkageSpec(1, 2, 1, FieldSpec.from_angles(omega_p, eta, pP, qP),
                       FieldSpec.from_angles(omega_s, theta, pS, qS))
    pair = build_couplings(spec)
    return pair.P[np.ix_(_G, _E)], pair.S[np.ix_(_E, _F_121)]


def permutation_error(M1: np.ndarray, M2: np.ndarray) -> float:
    """Distance of |M1 M2^+| from the nearest permutation matrix.

    Zero when the rows agree up to one phase each and an ordering.
    """
    G = np.abs(np.asarray(M1) @ np.asarray(M2).conj().T)
    r, c = linear_sum_assignment(-G)
    Pm = np.zeros_like(G)
    Pm[r, c] = 1.0
    return float(np.abs(G - Pm).max())


def theta_grid(points: int, lo: float, hi: float, bad=(), guard: float = GUARD_BAND) -> np.ndarray:
    """``points`` angles in [lo, hi] keeping ``guard`` away from each value in ``bad`` (mod pi)."""
    t = np.linspace(lo, hi, points)
    for b in bad:
        d = np.abs((t - b + np.pi / 2) % np.pi - np.pi / 2)
        t = np.where(d < guard, t + 2 * guard, t)
    return t


def _check(errors, tol) -> dict:
    e = float(np.max(errors)) if len(errors) else 0.0
    return {"max_error": e, "tolerance": tol, "passed": bool(e <= tol), "samples": int(len(errors))}


def run_checks(points: int = 100, seed: int = 0) -> dict:
    """Run every oracle comparison; returns a JSON-ready summary."""
    rng = np.random.default_rng(seed)
    checks = {}

    # eigenvalues of the (2, 3, 4) Stokes block
    grid = np.linspace(-np.pi / 2, np.pi / 2, points)
    errs, mins = [], []
    for th in grid:
        _, S = subsystem_123(0.3, th)
        num = np.sort(ms_decompose(S).sigma ** 2 / SCALE_123)
        lam = np.sort(eigvals_123(th))
        errs.append(np.max(np.abs(num - lam) / np.abs(lam)))
        mins.append(lam.min())
    checks["eigvals_123"] = _check(errs, 1e-9)
    checks["eigvals_123_positive"] = {"max_error": float(max(0.0, -min(mins))), "tolerance": 0.0,
                                      "passed": bool(min(mins) > 0), "samples": len(mins),
                                      "min_value": float(min(mins))}

    errs = []
    for th in grid:
        _, S = subsystem_121(0.3, th)
        num = np.sort(ms_decompose(S).sigma ** 2 / SCALE_121)
        errs.append(np.max(np.abs(num - np.sort(eigvals_121(th)))))
    checks["eigvals_121"] = _check(errs, 1e-10)

    # MS matrices up to row phases and ordering
    g123 = theta_grid(points, 0.0, np.pi, bad=(0.0, np.pi / 2))
    errs = []
    for th in g123:
        ph = tuple(rng.uniform(-np.pi, np.pi, 4))
        _, S = subsystem_123(0.3, th, ph)
        dec = ms_decompose(S)
        A, B = ms_matrices_123(th, ph)
        errs.append(max(permutation_error(A, dec.A), permutation_error(B, dec.B)))
    checks["ms_matrices_123"] = _check(errs, 1e-8)

    g121 = theta_grid(points, -np.pi / 2, np.pi / 2, bad=(0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4))
    errs, null = [], []
    for th in g121:
        ph = tuple(rng.uniform(-np.pi, np.pi, 4))
        _, S = subsystem_121(0.3, th, ph)
        dec = ms_decompose(S)
        A, B_a, B_b = ms_matrices_121(th, ph)
        errs.append(max(permutation_error(A, dec.A), permutation_error(np.vstack([B_a, B_b]), dec.B)))
        null.append(np.abs(B_b @ S).max())
    checks["ms_matrices_121"] = _check(errs, 1e-8)
    checks["uncoupled_e_row_121"] = _check(null, 1e-12)

    # dark-state constant parts
    errs = []
    for _ in range(points):
        eta, th = rng.uniform(-np.pi, np.pi, 2)
        ph = tuple(rng.uniform(-np.pi, np.pi, 4))
        P, S = subsystem_123(eta, th, ph)
        w, v = np.linalg.eigh(metric_matrix(P, S))
        if abs(w[1] - w[0]) < 1e-6 * max(abs(w).max(), 1e-300):
            continue
        x1, x2, _, _ = dark_vectors_123(eta, th, ph)
        errs.append(permutation_error(np.array([x1, x2]), v.T))
    checks["dark_vectors_123"] = _check(errs, 1e-9)

    # Pi from the closed form and from the second MS stage
    errs = []
    for _ in range(points):
        eta = rng.uniform(-np.pi, np.pi)
        th = rng.uniform(-np.pi, np.pi)
        ph = tuple(rng.uniform(-np.pi, np.pi, 4))
        P, S = subsystem_121(eta, th, ph)
        dec = ms_decompose(S)
        sec = second_stage_ms(*split_pump_blocks(P, dec))
        errs.append(abs(abs(sec.Pi[0, 0]) - abs(pi_121(eta, th, ph))))
    checks["pi_121"] = _check(errs, 1e-10)

    # Pi = 0 exactly when the condition holds
    mismatches = []
    for eta, th, ph in condition_grid(points // 4 or 1, rng):
        P, S = subsystem_121(eta, th, ph)
        sec = second_stage_ms(*split_pump_blocks(P, ms_decompose(S)))
        vanishes = abs(sec.Pi[0, 0]) < 1e-12 and abs(pi_121(eta, th, ph)) < 1e-12
        mismatches.append(float(vanishes != condition_121(eta, th, ph)))
    checks["pi_condition_121"] = _check(mismatches, 0.0)

    return {"passed": all(c["passed"] for c in checks.values()), "checks": checks,
            "points": points, "seed": seed}


def condition_grid(n: int, rng) -> list[tuple[float, float, tuple]]:
    """(eta, theta, phases) samples on and next to the vanishing condition."""
    out = []
    for eta in np.linspace(-np.pi, np.pi, n, endpoint=False):
        for k in (0, 1):
            base = rng.uniform(-np.pi, np.pi, 3)
            # psi_S - phi_S + phi_P - psi_P = k pi
            pP, qP, pS = base
            qS = k * np.pi + pS - pP + qP
            th = np.pi / 2 - (-1) ** k * eta
            out.append((float(eta), float(th), (pP, qP, pS, qS)))
            out.append((float(eta), float(th + rng.uniform(0.05, 1.0)), (pP, qP, pS, qS)))
            out.append((float(eta), float(th), (pP, qP, pS, qS + rng.uniform(0.05, 1.0))))
    return out
