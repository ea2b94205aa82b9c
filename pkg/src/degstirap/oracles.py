"""Closed-form reference results for two sigma-polarized linkages.

Two subsystems are covered:

* the (2, 3, 4) block of J = 1 <-> 2 <-> 3 (g: M = -1, +1; e: M = -2, 0, 2;
  f: M = -3, -1, 1, 3), with eigenvalues of S S^+ given by a trigonometric
  cubic-root formula and the MS matrices given by polynomials in those roots;
* the (2, 3, 2) "twin diamond" block of J = 1 <-> 2 <-> 1 (g, f: M = -1, +1;
  e: M = -2, 0, 2), with a quadratic for the eigenvalues and a scalar
  coupling Pi between g and the e state left without an f partner.

Polarizations use an angle and two phases per field:
Omega(+) = Omega exp(i phi) cos(angle), Omega(-) = Omega exp(i psi) sin(angle).
``phases`` arguments are always ordered (phi_P, psi_P, phi_S, psi_S).

Nothing here calls the numerical MS or dark-state code; the functions are
meant to be compared against it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: angles closer than this to a degenerate value are rejected
GUARD_BAND = 1e-3

#: normalization for S S^+ of the (2, 3, 4) block: eig(S S^+) = SCALE_123 * lambda * Omega_S^2
SCALE_123 = 7.0 / 20.0

#: normalization for the twin diamond: eig(S S^+) = lambda * (Omega_S / 2)^2
SCALE_121 = 0.25


class DegenerateAngleError(ValueError):
    """The closed form has a vanishing normalization at this angle."""


def _phases(phases) -> tuple[float, float, float, float]:
    if phases is None:
        return 0.0, 0.0, 0.0, 0.0
    ph = tuple(float(x) for x in phases)
    if len(ph) != 4:
        raise ValueError("phases must be (phi_P, psi_P, phi_S, psi_S)")
    return ph


def _near(x: float, period: float, targets, band: float) -> bool:
    r = np.mod(x, period)
    return any(min(abs(r - t), abs(r - t - period), abs(r - t + period)) < band for t in targets)


# ---------------------------------------------------------------------------
# J = 1 <-> 2 <-> 3, (2, 3, 4) block


def _uvwz_123(theta: float):
    c4, c8, c12 = np.cos(4 * theta), np.cos(8 * theta), np.cos(12 * theta)
    u = 0.75 * np.sqrt(146004 * c12 + 857454 * c8 + 2234532 * c4 + 1524810)
    v = 2 * u / (839 + 909 * c4)
    w = (73002 * c12 + 428727 * c8 + 1117266 * c4 + 762405) / (22960 * u + 19320 * u * c4)
    z = (709 * c4 + 923) / (14490 * c4 + 17220)
    return u, v, w, z


def eigvals_123(theta: float) -> np.ndarray:
    """lambda_k, k = 1, 2, 3, from the cotangent form of the cubic roots.

    The eigenvalues of S S^+ for the (2, 3, 4) block are
    ``SCALE_123 * lambda_k * Omega_S**2``.  The point where 839 + 909 cos 4theta
    vanishes is handled by the arctan limit (v -> +-inf).

    >>> lam = eigvals_123(0.4636)
    >>> bool(np.all(lam > 0))
    True
    """
    u, v, w, z = _uvwz_123(theta)
    at = np.arctan(v) if np.isfinite(v) else np.copysign(np.pi / 2, v)
    k = np.arange(1, 4)
    return z + w / np.tan((1 - k) / 3 * np.pi + at / 3)


def _check_123(theta: float, band: float):
    if _near(theta, np.pi, (0.0, np.pi / 2), band):
        raise DegenerateAngleError(f"theta={theta:g} lies within {band:g} of a degenerate value (multiple of pi/2)")


def _poly_A_123(x: float, theta: float, ph) -> np.ndarray:
    _, _, pS, qS = ph
    s, c = np.sin(theta), np.cos(theta)
    c2, c4 = np.cos(2 * theta), np.cos(4 * theta)
    return np.array([
        np.exp(2j * (qS - pS)) / 8 * s * (14700 * x * x - 980 * (2 + c2) * x + c4 + 56 * c2 + 63),
        np.sqrt(15) / 24 * np.exp(1j * (qS - pS)) * c * (2940 * x * x - (308 + 280 * c2) * x + 3 * c4 + 12 * c2 + 9),
        np.sqrt(15) / 8 * s * (28 * (1 + c2) * x - c4 - 4 * c2 - 3),
        np.exp(1j * (pS - qS)) / 8 * c * (1 - c4),
    ])


def _poly_B_123(x: float, theta: float, ph) -> np.ndarray:
    _, _, pS, qS = ph
    c2, c4 = np.cos(2 * theta), np.cos(4 * theta)
    s2 = np.sin(2 * theta)
    p1 = np.exp(1j * (pS - qS)) * np.exp(2j * (qS - pS)) / 8 * (14700 * x * x - 980 * (2 + c2) * x + c4 + 56 * c2 + 63)
    return np.array([
        p1,
        np.sqrt(6) / 12 * s2 * (105 * x - 7 * c2 - 8),
        0.25 * np.exp(1j * (pS - qS)) * s2 * s2,
    ])


def _unit_rows(rows, what: str) -> np.ndarray:
    out = []
    for r in rows:
        n = np.linalg.norm(r)
        if n < 1e-12:
            raise DegenerateAngleError(f"normalization of {what} vanishes")
        out.append(r / n)
    return np.array(out)


def ms_matrices_123(theta: float, phases=None, guard: float = GUARD_BAND) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form Stokes MS matrices (A on f, 4 x 4; B on e, 3 x 3).

    Row k < 3 of both matrices belongs to lambda_{k+1}; the last row of A is
    the f state with no e partner.  Agreement with a numerical SVD holds up
    to a phase per row and a row permutation.

    Raises
    ------
    DegenerateAngleError
        If theta is within ``guard`` of a multiple of pi/2, where the cot
        terms and the sin/cos prefactors make the rows ill defined.
    """
    ph = _phases(phases)
    _check_123(theta, guard)
    lam = eigvals_123(theta)
    A_rows = [_poly_A_123(x, theta, ph) for x in lam]
    _, _, pS, qS = ph
    ct = 1.0 / np.tan(theta)
    d = np.array([-np.exp(2j * (qS - pS)) * ct**3, np.sqrt(15) * np.exp(1j * (qS - pS)) * ct**2,
                  -np.sqrt(15) * ct, np.exp(1j * (pS - qS))])
    nd = np.sqrt(1 + 15 * ct**2 + 15 * ct**4 + ct**6)
    A = np.exp(1j * pS) * np.vstack([_unit_rows(A_rows, "A rows"), d / nd])
    B = _unit_rows([_poly_B_123(x, theta, ph) for x in lam], "B rows")
    return A, B


def _chi(up: complex, vp: float) -> float:
    if vp == 0:
        return np.pi / 4 if abs(up) > 0 else 0.0
    return float(0.5 * np.arctan(2 * abs(up) / vp))


def dark_vectors_123(eta: float, theta: float, phases=None) -> tuple[np.ndarray, np.ndarray, complex, float]:
    """Constant g parts x0^(1), x0^(2) of the two transfer dark states.

    Returns ``(x1, x2, u_prime, v_prime)``.  The vectors are eigenvectors of
    P (S S^+)^-1 P^+ for the (2, 3, 4) block, in the g basis (M = -1, +1).
    v' = 0 is taken as the limit chi = pi/4.
    """
    pP, qP, pS, qS = _phases(phases)
    s2t, c2t = np.sin(2 * theta), np.cos(2 * theta)
    s2e, c2e = np.sin(2 * eta), np.cos(2 * eta)
    up = (7 / 60 * np.exp(1j * (pS - qS)) * s2t * (-8 + 7 * c2t * c2e)
          + np.exp(1j * (pP - qP)) * s2e * (7 / 24 + (343 / 360 + 7 / 40 * np.exp(2j * (pS - qS + qP - pP))) * s2t**2))
    vp = (49 / 60 * np.cos(pS - qS + qP - pP) * s2e * np.sin(4 * theta)
          + (301 / 36 + 203 / 90 * c2t**2) * c2e - 49 / 5 * c2t)
    chi = _chi(up, vp)
    xi = float(np.angle(up))
    x1 = np.array([np.sin(chi) * np.exp(1j * xi), np.cos(chi)])
    x2 = np.array([np.cos(chi) * np.exp(1j * xi), -np.sin(chi)])
    return x1, x2, complex(up), float(vp)


@dataclass(frozen=True)
class Analytic123:
    """Bundle of closed-form values for the (2, 3, 4) block at one setting."""

    eta: float
    theta: float
    phases: tuple[float, float, float, float]
    u: float
    v: float
    w: float
    z: float
    lambdas: np.ndarray
    A: np.ndarray
    B: np.ndarray
    x0: tuple[np.ndarray, np.ndarray]
    chi: float
    xi: float
    u_prime: complex
    v_prime: float

    @classmethod
    def evaluate(cls, eta: float, theta: float, phases=None, guard: float = GUARD_BAND) -> "Analytic123":
        ph = _phases(phases)
        u, v, w, z = _uvwz_123(theta)
        A, B = ms_matrices_123(theta, ph, guard)
        x1, x2, up, vp = dark_vectors_123(eta, theta, ph)
        return cls(eta, theta, ph, float(u), float(v), float(w), float(z), eigvals_123(theta), A, B,
                   (x1, x2), _chi(up, vp), float(np.angle(up)), up, vp)


# ---------------------------------------------------------------------------
# J = 1 <-> 2 <-> 1 twin diamond, (2, 3, 2) block


def eigvals_121(theta: float) -> np.ndarray:
    """lambda_{1,2} = 7/100 +- sqrt(24 cos^2 2theta + 1)/100.

    The eigenvalues of S S^+ (nonzero part) are ``lambda * (Omega_S / 2)**2``.

    >>> [round(float(x), 12) for x in eigvals_121(0.0)]
    [0.12, 0.02]
    """
    r = np.sqrt(24 * np.cos(2 * theta) ** 2 + 1) / 100
    return np.array([0.07 + r, 0.07 - r])


def _check_121(theta: float, band: float):
    if _near(theta, np.pi / 4, (0.0,), band):
        raise DegenerateAngleError(f"theta={theta:g} lies within {band:g} of a multiple of pi/4, where a "
                                   "twin-diamond MS row has vanishing normalization")


def ms_matrices_121(theta: float, phases=None, as_printed: bool = False,
                    guard: float = GUARD_BAND) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form Stokes MS matrices of the twin diamond: (A 2x2, B_a 2x3, B_b 1x3).

    With ``as_printed=False`` (default) two misprints are corrected: the
    B_a rows are normalized by their own norm, and the phases of the first
    and last entry of B_b are exchanged so that B_b S = 0.  ``as_printed=True``
    returns the formulas literally, for comparison.
    """
    _, _, pS, qS = _phases(phases)
    _check_121(theta, guard)
    s, c = np.sin(theta), np.cos(theta)
    A_rows, B_rows = [], []
    for x in eigvals_121(theta):
        a = np.array([-1 - 5 * s * s + 50 * x, s * c * np.exp(-1j * (qS - pS))])
        b = np.array([-np.exp(-1j * (pS - qS)) * c * c * (7 * s * s + c * c - 50 * x),
                      np.sqrt(6) / 4 * np.sin(4 * theta),
                      np.exp(-1j * (qS - pS)) * s * s * (7 * c * c + s * s - 50 * x)])
        na = np.linalg.norm(a)
        nb = na if as_printed else np.linalg.norm(b)
        if na < 1e-12 or nb < 1e-12:
            raise DegenerateAngleError("normalization of a twin-diamond MS row vanishes")
        A_rows.append(a / na)
        B_rows.append(b / nb)
    A = np.exp(1j * qS) * np.array(A_rows)
    signs = np.diag([np.sign(np.sin(4 * theta) * s), np.sign(c)])
    B_a = signs @ np.array(B_rows)
    if as_printed:
        d = np.array([np.exp(1j * (pS - qS)) * s * s, -np.sqrt(6) * s * c, np.exp(1j * (qS - pS)) * c * c])
    else:
        d = np.array([np.exp(1j * (qS - pS)) * s * s, -np.sqrt(6) * s * c, np.exp(1j * (pS - qS)) * c * c])
    B_b = (d / np.sqrt(1 + np.sin(2 * theta) ** 2))[np.newaxis, :]
    return A, B_a, B_b


def a_prime_121(theta: float, phases=None) -> np.ndarray:
    """Second-stage unitary on g for the twin diamond.

    Its first row is the g state without a link to the leftover e state; the
    second row carries the scalar coupling Pi.
    """
    pP, qP, pS, qS = _phases(phases)
    s, c = np.sin(theta), np.cos(theta)
    return np.array([
        [c, np.exp(-1j * (qS - pS)) * s],
        [np.exp(-0.5j * (pS - qS + pP + qP)) * s, -np.exp(-0.5j * (qS - pS + pP + qP)) * c],
    ])


def pi_121(eta: float, theta: float, phases=None, omega_p: float = 1.0) -> complex:
    """Scalar coupling between g and the e state left without an f partner."""
    pP, qP, pS, qS = _phases(phases)
    a = qS - pS + pP - qP
    pref = -omega_p / (2 * np.sqrt(3) * np.sqrt(2 - np.cos(2 * theta) ** 2))
    return complex(pref * (np.cos(eta) * np.cos(theta) * np.exp(0.5j * a)
                           - np.sin(eta) * np.sin(theta) * np.exp(-0.5j * a)))


def _mod_distance(x: float, period: float) -> float:
    r = np.mod(x, period)
    return float(min(r, period - r))


def condition_121(eta: float, theta: float, phases=None, tol: float = 1e-12) -> bool:
    """Polarization/phase condition under which Pi vanishes.

    True when, for some integer k,
    psi_S - phi_S + phi_P - psi_P = k pi (mod 2 pi) and
    theta + (-1)^k eta = pi/2 (mod pi).
    Also true in the corner where both terms of Pi vanish on their own
    (cos eta cos theta = sin eta sin theta = 0), for any phases.
    """
    pP, qP, pS, qS = _phases(phases)
    a = qS - pS + pP - qP
    corner = (abs(np.cos(eta) * np.cos(theta)) < tol and abs(np.sin(eta) * np.sin(theta)) < tol)
    if corner:
        return True
    for k in (0, 1):
        if _mod_distance(a - k * np.pi, 2 * np.pi) < tol:
            if _mod_distance(theta + (-1) ** k * eta - np.pi / 2, np.pi) < tol:
                return True
    return False


def pi_and_condition_121(eta: float, theta: float, phases=None, omega_p: float = 1.0,
                         tol: float = 1e-12) -> tuple[complex, bool]:
    """(Pi, condition_met) for the twin diamond.

    >>> pi, ok = pi_and_condition_121(2 * np.pi / 5, np.pi / 10)
    >>> ok, abs(pi) < 1e-15
    (True, True)
    """
    return pi_121(eta, theta, phases, omega_p), condition_121(eta, theta, phases, tol)


@dataclass(frozen=True)
class Analytic121:
    """Bundle of closed-form twin-diamond values at one setting."""

    eta: float
    theta: float
    phases: tuple[float, float, float, float]
    lambdas: np.ndarray
    A: np.ndarray
    B_a: np.ndarray
    B_b: np.ndarray
    A_prime: np.ndarray
    Pi: complex
    condition_met: bool

    @property
    def B(self) -> np.ndarray:
        return np.vstack([self.B_a, self.B_b])

    @classmethod
    def evaluate(cls, eta: float, theta: float, phases=None, omega_p: float = 1.0,
                 as_printed: bool = False, guard: float = GUARD_BAND) -> "Analytic121":
        ph = _phases(phases)
        A, B_a, B_b = ms_matrices_121(theta, ph, as_printed, guard)
        pi, ok = pi_and_condition_121(eta, theta, ph, omega_p)
        return cls(eta, theta, ph, eigvals_121(theta), A, B_a, B_b, a_prime_121(theta, ph), pi, ok)


# ---------------------------------------------------------------------------
# comparison helpers


def phase_equivalent(M1: np.ndarray, M2: np.ndarray, tol: float = 1e-9) -> bool:
    """True if the rows of M1 equal rows of M2 up to one phase each and a permutation.

    Checked through |M1 M2^+|, which must be a permutation matrix.
    """
    M1, M2 = np.asarray(M1), np.asarray(M2)
    if M1.shape != M2.shape:
        return False
    G = np.abs(M1 @ M2.conj().T)
    n = G.shape[0]
    hit = np.abs(G - 1.0) < tol
    return bool(np.all(hit.sum(axis=0) == 1) and np.all(hit.sum(axis=1) == 1)
                and np.abs(G[~hit]).max(initial=0.0) < tol and hit.sum() == n)
