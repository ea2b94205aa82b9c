"""Morris-Shore (MS) transformations.

An MS transformation of a coupling block X (rows: one manifold, columns:
the other) is a pair of unitaries B (rows) and A (columns) such that
B X A^+ is quasi-diagonal: a real nonnegative diagonal padded by zero rows
or columns.  Numerically this is the singular value decomposition
X = U s Vh with B = U^+ and A = Vh.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CaseMismatchError

DEFAULT_ZERO_TOL = 1e-10

COLUMNS_PADDED = "columns-padded"
SQUARE = "square"
ROWS_PADDED = "rows-padded"


def _phase_fix(vec: np.ndarray) -> complex:
    """Phase factor that makes the largest-modulus entry of ``vec`` real positive."""
    if vec.size == 0:
        return 1.0
    mags = np.round(np.abs(vec), 12)
    k = int(np.argmax(mags))
    if mags[k] == 0:
        return 1.0
    return np.conj(vec[k]) / abs(vec[k])


def _canonical(B: np.ndarray, A: np.ndarray, npair: int) -> tuple[np.ndarray, np.ndarray]:
    # paired rows share one phase so that B X A^+ is unchanged
    B = B.copy()
    A = A.copy()
    for k in range(B.shape[0]):
        ph = _phase_fix(B[k])
        B[k] *= ph
        if k < npair:
            A[k] *= ph
    for k in range(npair, A.shape[0]):
        A[k] *= _phase_fix(A[k])
    return B, A


def _structure(rows: int, cols: int) -> str:
    if cols > rows:
        return COLUMNS_PADDED
    if cols == rows:
        return SQUARE
    return ROWS_PADDED


@dataclass(frozen=True)
class MSDecomposition:
    """Result of an MS transformation B X A^+ = [quasi-diagonal sigma].

    Attributes
    ----------
    A : ndarray
        Unitary acting on the column manifold (f for Stokes, e for pump).
    B : ndarray
        Unitary acting on the row manifold (e for Stokes, g for pump).
    sigma : ndarray
        MS Rabi frequencies, real, nonnegative, sorted descending; length
        min(rows, cols).
    structure : str
        'columns-padded', 'square' or 'rows-padded'.
    rank : int
        Number of sigma values above ``zero_tol * max(sigma)``.
    zero_tol : float
        Relative threshold below which a singular value counts as zero.
    """

    A: np.ndarray
    B: np.ndarray
    sigma: np.ndarray
    structure: str
    rank: int
    zero_tol: float = DEFAULT_ZERO_TOL

    @property
    def shape(self) -> tuple[int, int]:
        return self.B.shape[0], self.A.shape[0]

    @property
    def null_count(self) -> int:
        """Number of vanishing MS Rabi frequencies among the paired states."""
        return len(self.sigma) - self.rank

    @property
    def uncoupled_rows(self) -> tuple[int, ...]:
        """MS row states without a partner (structural padding plus null sigma)."""
        return tuple(range(self.rank, self.shape[0]))

    @property
    def uncoupled_cols(self) -> tuple[int, ...]:
        return tuple(range(self.rank, self.shape[1]))

    @property
    def sigma_C(self) -> np.ndarray:
        """Nonvanishing block of sigma."""
        return self.sigma[: self.rank]

    @property
    def sigma_matrix(self) -> np.ndarray:
        """Quasi-diagonal rows x cols matrix holding sigma."""
        out = np.zeros(self.shape, dtype=complex)
        n = len(self.sigma)
        out[np.arange(n), np.arange(n)] = self.sigma
        return out

    def apply(self, X: np.ndarray) -> np.ndarray:
        """B X A^+."""
        return self.B @ np.asarray(X) @ self.A.conj().T

    def structure_residual(self, X: np.ndarray) -> float:
        """Largest deviation of B X A^+ from the quasi-diagonal form, relative to max sigma."""
        dev = np.abs(self.apply(X) - self.sigma_matrix).max(initial=0.0)
        scale = self.sigma[0] if len(self.sigma) and self.sigma[0] > 0 else 1.0
        return float(dev / scale)


def _rank(sigma: np.ndarray, zero_tol: float) -> int:
    if sigma.size == 0 or sigma[0] == 0:
        return 0
    return int(np.sum(sigma >= zero_tol * sigma[0]))


def ms_decompose(X, zero_tol: float = DEFAULT_ZERO_TOL) -> MSDecomposition:
    """MS transformation of a coupling block.

    For the Stokes block S (N_e x N_f) this returns B on e and A on f with
    B S A^+ quasi-diagonal.  Rank-deficient input is fine: vanishing sigma
    values sit at the end and their states are listed as uncoupled.
    """
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2:
        raise ValueError("coupling block must be a matrix")
    rows, cols = X.shape
    n = min(rows, cols)
    if n == 0 or not np.any(X):
        sigma = np.zeros(n)
        B, A = np.eye(rows, dtype=complex), np.eye(cols, dtype=complex)
    else:
        U, sigma, Vh = np.linalg.svd(X, full_matrices=True)
        B, A = _canonical(U.conj().T, Vh, n)
    sigma = np.asarray(sigma, dtype=float)
    return MSDecomposition(A, B, sigma, _structure(rows, cols), _rank(sigma, zero_tol), zero_tol)


def pump_side_ms(P, zero_tol: float = DEFAULT_ZERO_TOL) -> MSDecomposition:
    """MS transformation of the pump block P (N_g x N_e).

    B acts on g and A on e, so that B P A^+ = [Pi; 0] (or [Pi 0]).
    """
    return ms_decompose(P, zero_tol)


def reorder_singular(dec: MSDecomposition) -> tuple[MSDecomposition, np.ndarray]:
    """Move vanishing MS Rabi frequencies to the trailing corner.

    Returns the reordered decomposition and the permutation applied to the
    paired states.  Decompositions from :func:`ms_decompose` are already in
    this order, in which case the permutation is the identity.
    """
    n = len(dec.sigma)
    thr = dec.zero_tol * dec.sigma.max(initial=0.0)
    nonzero = dec.sigma > thr if n and dec.sigma.max() > 0 else np.zeros(n, bool)
    perm = np.concatenate([np.flatnonzero(nonzero), np.flatnonzero(~nonzero)]).astype(int)
    if np.array_equal(perm, np.arange(n)):
        return dec, perm
    rows, cols = dec.shape
    prow = np.concatenate([perm, np.arange(n, rows)]).astype(int)
    pcol = np.concatenate([perm, np.arange(n, cols)]).astype(int)
    out = MSDecomposition(dec.A[pcol], dec.B[prow], dec.sigma[perm], dec.structure,
                          int(nonzero.sum()), dec.zero_tol)
    return out, perm


def split_pump_blocks(P, dec: MSDecomposition) -> tuple[np.ndarray, np.ndarray]:
    """Pump couplings to active (P_a) and uncoupled (P_b) MS e-states.

    ``dec`` is the Stokes-side decomposition; P B^+ = [P_a  P_b].
    """
    P = np.asarray(P, dtype=complex)
    if P.shape[1] != dec.shape[0]:
        raise ValueError("P columns do not match the e manifold of the decomposition")
    if not dec.uncoupled_rows:
        raise CaseMismatchError(
            "first-stage decomposition has no uncoupled e states (not rows-padded and no null sigma)")
    Pt = P @ dec.B.conj().T
    return Pt[:, : dec.rank], Pt[:, dec.rank:]


@dataclass(frozen=True)
class SecondStageMS:
    """Second MS transformation between g and the uncoupled MS e-states.

    A_prime acts on g, B_prime on the uncoupled e-states.  With
    k = number of uncoupled e-states and N_g = number of g states:

    * case 'lt' (k < N_g): A' P_b B'^+ = [0; Pi], A' P_a = [P_tilde; P_tilde_prime]
    * case 'eq' (k = N_g): A' P_b B'^+ = Pi,      A' P_a = P_tilde_prime
    * case 'gt' (k > N_g): A' P_b B'^+ = [Pi 0],  A' P_a = P_tilde_prime

    ``Pi`` is square and diagonal (k x k for 'lt', N_g x N_g otherwise).
    """

    A_prime: np.ndarray
    B_prime: np.ndarray
    P_tilde: np.ndarray
    P_tilde_prime: np.ndarray
    Pi: np.ndarray
    case: str
    pi_null_count: int
    zero_tol: float = DEFAULT_ZERO_TOL

    @property
    def pi_values(self) -> np.ndarray:
        return np.real(np.diag(self.Pi))

    @property
    def n_plain(self) -> int:
        """Number of g MS states with no coupling to uncoupled e-states by construction."""
        return self.P_tilde.shape[0]

    def pi_null_vectors(self) -> np.ndarray:
        """Columns span the null space of Pi (coordinates in the Pi-coupled g block)."""
        n = self.Pi.shape[0]
        idx = np.arange(n - self.pi_null_count, n)
        return np.eye(n, dtype=complex)[:, idx]

    def structured_block(self, P_b) -> np.ndarray:
        """A' P_b B'^+."""
        return self.A_prime @ np.asarray(P_b) @ self.B_prime.conj().T

    def expected_block(self) -> np.ndarray:
        Ng = self.A_prime.shape[0]
        k = self.B_prime.shape[0]
        out = np.zeros((Ng, k), dtype=complex)
        n = self.Pi.shape[0]
        if self.case == "lt":
            out[Ng - k:, :] = self.Pi
        else:
            out[:n, :n] = self.Pi
        return out


def second_stage_ms(P_a, P_b, zero_tol: float = DEFAULT_ZERO_TOL) -> SecondStageMS:
    """MS transformation of the g <-> uncoupled-e block P_b."""
    P_a = np.asarray(P_a, dtype=complex)
    P_b = np.asarray(P_b, dtype=complex)
    if P_a.ndim != 2 or P_b.ndim != 2 or P_a.shape[0] != P_b.shape[0]:
        raise ValueError("P_a and P_b must be matrices with the same number of g rows")
    Ng, k = P_b.shape
    if k == 0:
        raise CaseMismatchError("no uncoupled e states: second stage not applicable")
    case = "lt" if k < Ng else ("eq" if k == Ng else "gt")
    n = min(Ng, k)

    scale = max(np.linalg.norm(P_a, 2) if P_a.size else 0.0, np.linalg.norm(P_b, 2) if P_b.size else 0.0)
    if scale == 0 or np.linalg.norm(P_b, 2) <= zero_tol * scale:
        U = np.eye(Ng, dtype=complex)
        s = np.zeros(n)
        Vh = np.eye(k, dtype=complex)
        if case == "lt":
            # Pi-coupled rows are the last k of A'
            U = np.roll(U, k, axis=1)
    else:
        U, s, Vh = np.linalg.svd(P_b, full_matrices=True)
        Bc, Ac = _canonical(U.conj().T, Vh, n)
        U, Vh = Bc.conj().T, Ac

    if case == "lt":
        A_prime = np.vstack([U[:, k:].conj().T, U[:, :k].conj().T])
    else:
        A_prime = U.conj().T
    B_prime = Vh
    Pi = np.diag(s).astype(complex)
    nzero = int(np.sum(s < zero_tol * scale)) if scale > 0 else n

    Pa_t = A_prime @ P_a
    if case == "lt":
        P_tilde, P_tilde_prime = Pa_t[: Ng - k], Pa_t[Ng - k:]
    else:
        P_tilde, P_tilde_prime = Pa_t[:0], Pa_t
    return SecondStageMS(A_prime, B_prime, P_tilde, P_tilde_prime, Pi, case, nzero, zero_tol)
