"""Dark and bright adiabatic states, dark-state counting and transfer feasibility.

All dark states built here share one template.  With constant vectors X
(on g) and W (on f) obeying P^+ X = S W,

    Phi(p, s) = (s X, 0, -p W) / sqrt(s^2 |X|^2 + p^2 |W|^2)

is annihilated by H for every pair of envelope values (p, s), whatever
the detuning.  Choosing the X vectors orthonormal with mutually orthogonal
W vectors makes the family orthonormal at all times and removes every
dark-dark nonadiabatic coupling.  The constructions for the three
degeneracy orderings differ only in how X and W are obtained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CaseMismatchError, SingularCouplingError
from .linkage import CouplingPair, FieldSpec, LinkageSpec, build_couplings, transition_matrix
from .morris_shore import (DEFAULT_ZERO_TOL, MSDecomposition, SecondStageMS, ms_decompose,
                           pump_side_ms, second_stage_ms, split_pump_blocks)

CASE_A = "A"  # N_g <= N_e <= N_f
CASE_B = "B"  # N_g > N_e > N_f
CASE_C = "C"  # N_g, N_f < N_e
CASE_OTHER = "other"


def classify(sizes: Sequence[int]) -> str:
    """Degeneracy ordering of (N_g, N_e, N_f)."""
    Ng, Ne, Nf = sizes
    if Ng <= Ne <= Nf:
        return CASE_A
    if Ng > Ne > Nf:
        return CASE_B
    if Ng < Ne and Nf < Ne:
        return CASE_C
    return CASE_OTHER


def dark_count(Ng: int, Ne: int, Nf: int) -> int:
    """Generic number of dark states, max(N_g + N_f - N_e, 0).

    Assumes couplings of maximal rank; special polarizations can raise the
    true count (see :func:`reconciled_dark_count`).

    >>> dark_count(5, 7, 9)
    7
    """
    for n in (Ng, Ne, Nf):
        if n < 0:
            raise ValueError("manifold sizes must be nonnegative")
    return max(Ng + Nf - Ne, 0)


def _as_pair(P, S=None) -> CouplingPair:
    if isinstance(P, CouplingPair):
        return P
    if isinstance(P, LinkageSpec):
        return build_couplings(P)
    return CouplingPair(P, S)


def _scale(pair: CouplingPair) -> float:
    vals = [np.linalg.norm(m, 2) for m in (pair.P, pair.S) if m.size]
    return max(vals, default=0.0)


def metric_matrix(P, S, zero_tol: float = DEFAULT_ZERO_TOL) -> np.ndarray:
    """M = P (S S^+)^-1 P^+, the Hermitian matrix fixing the constant dark parts.

    Raises :class:`SingularCouplingError` when S S^+ is singular.
    """
    P = np.asarray(P, dtype=complex)
    S = np.asarray(S, dtype=complex)
    dec = ms_decompose(S, zero_tol)
    if dec.rank < S.shape[0]:
        raise SingularCouplingError(
            f"S S^+ has {S.shape[0] - dec.rank} vanishing eigenvalue(s); "
            "use the singular-coupling construction")
    Pt = P @ dec.B.conj().T
    inv = Pt / dec.sigma[np.newaxis, : S.shape[0]]
    M = inv @ inv.conj().T
    return 0.5 * (M + M.conj().T)


@dataclass(frozen=True, eq=False)
class DarkStateFamily:
    """Orthonormal dark states as closures over the envelope values (p, s).

    Attributes
    ----------
    X, W : ndarray
        Columns are the constant g and f parts of the parameterized dark
        states (bare basis, unnormalized so that P^+ X = S W).
    constants : ndarray
        Columns are time-independent dark vectors: g states decoupled from
        the pump and f states decoupled from the Stokes field.
    constant_parts : ndarray
        Columns are the constant vectors in MS coordinates (x0, z0, or
        stacked (x0, x0') depending on the case).
    case : str
        'A', 'B', 'C' or 'other'.
    """

    sizes: tuple[int, int, int]
    X: np.ndarray
    W: np.ndarray
    constants: np.ndarray
    constant_parts: np.ndarray
    case: str
    trapped_count: int = 0
    notes: tuple[str, ...] = field(default=())

    @property
    def N(self) -> int:
        return sum(self.sizes)

    @property
    def parameterized_count(self) -> int:
        return self.X.shape[1]

    @property
    def count(self) -> int:
        return self.X.shape[1] + self.constants.shape[1]

    def __len__(self) -> int:
        return self.count

    def norms(self, p: float, s: float) -> np.ndarray:
        """Normalization factors of the parameterized states."""
        if p == 0 and s == 0:
            p, s = 0.0, 1.0
        a = np.sum(np.abs(self.X) ** 2, axis=0)
        b = np.sum(np.abs(self.W) ** 2, axis=0)
        return np.sqrt(s * s * a + p * p * b)

    def vectors(self, p: float, s: float) -> np.ndarray:
        """N x N_D matrix whose columns are the normalized dark states."""
        Ng, Ne, Nf = self.sizes
        if p == 0 and s == 0:
            # the limit s -> 1, p -> 0 of the counterintuitive ordering
            p, s = 0.0, 1.0
        m = self.parameterized_count
        out = np.zeros((self.N, self.count), dtype=complex)
        if m:
            nrm = self.norms(p, s)
            out[:Ng, :m] = s * self.X / nrm
            out[Ng + Ne:, :m] = -p * self.W / nrm
        out[:, m:] = self.constants
        return out

    __call__ = vectors

    def at(self, h, t: float) -> np.ndarray:
        return self.vectors(*h.envelopes(t))

    def derivative(self, p: float, s: float, pdot: float, sdot: float) -> np.ndarray:
        """Exact time derivative of :meth:`vectors` given envelope derivatives."""
        Ng, Ne, Nf = self.sizes
        m = self.parameterized_count
        out = np.zeros((self.N, self.count), dtype=complex)
        if not m or (p == 0 and s == 0):
            return out
        a = np.sum(np.abs(self.X) ** 2, axis=0)
        b = np.sum(np.abs(self.W) ** 2, axis=0)
        nrm = np.sqrt(s * s * a + p * p * b)
        ndot = (s * sdot * a + p * pdot * b) / nrm
        out[:Ng, :m] = (sdot * nrm - s * ndot) * self.X / nrm**2
        out[Ng + Ne:, :m] = -(pdot * nrm - p * ndot) * self.W / nrm**2
        return out

    def projector(self, p: float, s: float) -> np.ndarray:
        V = self.vectors(p, s)
        return V @ V.conj().T

    def g_support(self) -> np.ndarray:
        """Columns span the g-manifold part of the dark subspace at s = 1, p = 0."""
        Ng = self.sizes[0]
        return self.vectors(0.0, 1.0)[:Ng]

    def rotated(self, R: np.ndarray) -> "DarkStateFamily":
        """Mix the parameterized states by a constant unitary R.

        Only rotations inside an eigenspace of the metric keep the family
        orthonormal at all (p, s); anything else is rejected.
        """
        R = np.asarray(R, dtype=complex)
        m = self.parameterized_count
        if R.shape != (m, m) or not np.allclose(R.conj().T @ R, np.eye(m), atol=1e-12):
            raise ValueError("R must be a unitary matching the parameterized count")
        X, W = self.X @ R, self.W @ R
        G = W.conj().T @ W
        if np.abs(G - np.diag(np.diag(G))).max(initial=0.0) > 1e-10 * max(1.0, np.abs(G).max(initial=0.0)):
            raise ValueError("rotation mixes states with different metric eigenvalues")
        return DarkStateFamily(self.sizes, X, W, self.constants, self.constant_parts @ R
                               if self.constant_parts.shape[1] == m else self.constant_parts,
                               self.case, self.trapped_count, self.notes)


def _family(sizes, X, W, trapped_g, free_f, case, constant_parts, notes) -> DarkStateFamily:
    Ng, Ne, Nf = sizes
    N = Ng + Ne + Nf
    C = np.zeros((N, trapped_g.shape[1] + free_f.shape[1]), dtype=complex)
    C[:Ng, :trapped_g.shape[1]] = trapped_g
    C[Ng + Ne:, trapped_g.shape[1]:] = free_f
    return DarkStateFamily(tuple(sizes), X, W, C, constant_parts, case, trapped_g.shape[1], tuple(notes))


def _split_null(Y: np.ndarray, Q: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Split span(Q) into directions q with |Y q| <= tol and the rest (both orthonormal)."""
    if Q.shape[1] == 0:
        return Q, Q
    _, sv, Vh = np.linalg.svd(Y @ Q, full_matrices=True)
    sv = np.concatenate([sv, np.zeros(Q.shape[1] - sv.size)])
    keep = sv > tol
    V = Vh.conj().T
    return Q @ V[:, keep], Q @ V[:, ~keep]


def _stokes_side_family(pair: CouplingPair, dec: MSDecomposition, second: SecondStageMS | None,
                        case: str, notes: list[str]) -> DarkStateFamily:
    """Dark states from the Stokes-side MS basis, with an optional second stage.

    Covers the pyramid ordering with nonsingular sigma (no second stage),
    the diamond ordering, and any ordering where sigma is singular.
    """
    Ng, Ne, Nf = pair.sizes
    r = dec.rank
    P_a = (pair.P @ dec.B.conj().T)[:, :r]

    # allowed g directions: no coupling into e states the Stokes field leaves uncoupled
    if second is None:
        Q = np.eye(Ng, dtype=complex)
    else:
        n_pi = second.Pi.shape[0]
        offset = second.n_plain
        idx = list(range(second.n_plain))
        idx += [offset + j for j in range(n_pi - second.pi_null_count, n_pi)]
        Q = second.A_prime.conj().T[:, idx]

    tol = dec.zero_tol * max(_scale(pair), 1e-300)
    Qc, trapped = _split_null(pair.P.conj().T, Q, tol)
    if trapped.shape[1]:
        notes.append(f"{trapped.shape[1]} g direction(s) decoupled from the pump keep their population")

    inv = P_a / dec.sigma_C[np.newaxis, :]
    L = inv.conj().T @ Qc
    Mq = L.conj().T @ L
    mu, a = np.linalg.eigh(0.5 * (Mq + Mq.conj().T))
    order = np.argsort(-mu, kind="stable")
    a = a[:, order]
    X = Qc @ a
    W = dec.A.conj().T[:, :r] @ (inv.conj().T @ X)
    free_f = dec.A.conj().T[:, r:]
    U_g = np.eye(Ng, dtype=complex) if second is None else second.A_prime
    return _family(pair.sizes, X, W, trapped, free_f, case, U_g @ X, notes)


def dark_states_case_A(P, S=None, dec: MSDecomposition | None = None,
                       zero_tol: float = DEFAULT_ZERO_TOL) -> DarkStateFamily:
    """Dark states for N_g <= N_e <= N_f.

    N_g states follow the pump/Stokes ratio; N_f - N_e f states that the
    MS transformation leaves uncoupled are constant dark states.  A
    singular sigma is handled through a second MS stage on the uncoupled
    e states.
    """
    pair = _as_pair(P, S)
    Ng, Ne, Nf = pair.sizes
    if classify(pair.sizes) != CASE_A:
        raise CaseMismatchError(f"sizes {pair.sizes} do not satisfy N_g <= N_e <= N_f")
    dec = dec if dec is not None else ms_decompose(pair.S, zero_tol)
    notes: list[str] = []
    if dec.rank < Ne:
        notes.append(f"{Ne - dec.rank} vanishing MS Rabi frequency(ies): singular-coupling path")
        P_a, P_b = split_pump_blocks(pair.P, dec)
        second = second_stage_ms(P_a, P_b, zero_tol)
        return _stokes_side_family(pair, dec, second, CASE_A, notes)
    return _stokes_side_family(pair, dec, None, CASE_A, notes)


def dark_states_case_C(P, S=None, dec: MSDecomposition | None = None, second: SecondStageMS | None = None,
                       zero_tol: float = DEFAULT_ZERO_TOL) -> DarkStateFamily:
    """Dark states for N_g, N_f < N_e via two successive MS transformations.

    Only g states outside the range of the pump coupling to the uncoupled
    e states (the null space of Pi) join the dark family.  An empty family
    is a valid result.
    """
    pair = _as_pair(P, S)
    if classify(pair.sizes) != CASE_C:
        raise CaseMismatchError(f"sizes {pair.sizes} do not satisfy N_g, N_f < N_e")
    dec = dec if dec is not None else ms_decompose(pair.S, zero_tol)
    if second is None:
        P_a, P_b = split_pump_blocks(pair.P, dec)
        second = second_stage_ms(P_a, P_b, zero_tol)
    return _stokes_side_family(pair, dec, second, CASE_C, [])


def dark_states_case_B(P, S=None, zero_tol: float = DEFAULT_ZERO_TOL) -> DarkStateFamily:
    """Dark states for N_g > N_e > N_f from the pump-side MS transformation.

    N_g - N_e g states decoupled from the pump are constant; N_f states
    have constant f parts z0, the eigenvectors of S~^+ Pi^-1 Pi^+-1 S~.
    """
    pair = _as_pair(P, S)
    Ng, Ne, Nf = pair.sizes
    if classify(pair.sizes) != CASE_B:
        raise CaseMismatchError(f"sizes {pair.sizes} do not satisfy N_g > N_e > N_f")
    pdec = pump_side_ms(pair.P, zero_tol)
    if pdec.rank < Ne:
        # singular Pi: same construction as the mirrored problem would need,
        # handled by the general Stokes-side path
        dec = ms_decompose(pair.S, zero_tol)
        notes = [f"pump coupling has {Ne - pdec.rank} vanishing MS Rabi frequency(ies)"]
        if dec.uncoupled_rows:
            P_a, P_b = split_pump_blocks(pair.P, dec)
            return _stokes_side_family(pair, dec, second_stage_ms(P_a, P_b, zero_tol), CASE_B, notes)
        return _stokes_side_family(pair, dec, None, CASE_B, notes)

    Pi = pdec.sigma  # length N_e, all nonzero
    St = pdec.A @ pair.S  # N_e x N_f
    G = St / Pi[:, np.newaxis]
    K = G.conj().T @ G
    K = 0.5 * (K + K.conj().T)
    mu, z0 = np.linalg.eigh(K)
    order = np.argsort(-mu, kind="stable")
    mu, z0 = mu[order], z0[:, order]
    Xms = np.zeros((Ng, Nf), dtype=complex)
    Xms[:Ne] = G @ z0
    X = pdec.B.conj().T @ Xms
    W = z0
    trapped = pdec.B.conj().T[:, Ne:]
    notes: list[str] = []
    # states with S~ z0 = 0 have no g part: constant f states
    xn = np.linalg.norm(X, axis=0) if X.size else np.zeros(0)
    thr = 1e-12 * max(1.0, xn.max(initial=0.0))
    f_only = xn <= thr
    free_f = W[:, f_only]
    X, W = X[:, ~f_only], W[:, ~f_only]
    return _family(pair.sizes, X, W, trapped, free_f, CASE_B, z0[:, ~f_only], notes)


def dark_states(P, S=None, zero_tol: float = DEFAULT_ZERO_TOL) -> DarkStateFamily:
    """Dark family for any coupling pair, dispatching on the degeneracy ordering."""
    pair = _as_pair(P, S)
    case = classify(pair.sizes)
    if case == CASE_A:
        return dark_states_case_A(pair, zero_tol=zero_tol)
    if case == CASE_B:
        return dark_states_case_B(pair, zero_tol=zero_tol)
    if case == CASE_C:
        return dark_states_case_C(pair, zero_tol=zero_tol)
    dec = ms_decompose(pair.S, zero_tol)
    second = None
    if dec.uncoupled_rows and pair.sizes[0]:
        P_a, P_b = split_pump_blocks(pair.P, dec)
        second = second_stage_ms(P_a, P_b, zero_tol)
    return _stokes_side_family(pair, dec, second, CASE_OTHER, [])


def reconciled_dark_count(P, S=None, zero_tol: float = DEFAULT_ZERO_TOL) -> int:
    """Dark-state count from the actual ranks of the couplings.

    Equals dark_count() for generic couplings and exceeds it when MS Rabi
    frequencies vanish or the pump decouples from the uncoupled e states.
    """
    return dark_states(P, S, zero_tol).count


def uncoupled_e_states(P, S=None, zero_tol: float = DEFAULT_ZERO_TOL) -> np.ndarray:
    """Columns span the e states coupled to neither g nor f (eigenvalue Delta)."""
    pair = _as_pair(P, S)
    K = pair.P.conj().T @ pair.P + pair.S @ pair.S.conj().T
    if not K.size:
        return np.zeros((pair.sizes[1], 0), dtype=complex)
    w, v = np.linalg.eigh(K)
    scale = max(w.max(initial=0.0), 1e-300)
    return v[:, w <= zero_tol * scale]


# ---------------------------------------------------------------- bright states

@dataclass(frozen=True, eq=False)
class BrightStates:
    """Bright adiabatic states at one pair of envelope values.

    ``vectors`` columns pair with ``energies``.  ``mu`` and ``y`` are the
    eigenpairs of the e-space eigenproblem generating them (two energies
    per mu).  e states uncoupled from both fields (energy Delta) are
    kept apart in ``uncoupled``.
    """

    energies: np.ndarray
    vectors: np.ndarray
    mu: np.ndarray
    y: np.ndarray
    uncoupled: np.ndarray
    uncoupled_energy: float
    case: str

    @property
    def count(self) -> int:
        return len(self.energies)


def _roots(mu: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    disc = np.sqrt(delta * delta + 4.0 * mu)
    plus = 0.5 * (delta + disc)
    # stable form of the smaller-magnitude root
    minus = np.where(plus != 0, -mu / np.where(plus != 0, plus, 1.0), 0.5 * (delta - disc))
    return plus, minus


def _bright_from_e_problem(K: np.ndarray, G: np.ndarray, T: np.ndarray, p: float, s: float,
                           delta: float, case: str, to_bare, scale: float,
                           zero_tol: float) -> BrightStates:
    """Solve K y = mu y in some e basis and assemble bright vectors.

    G maps e coordinates to g coordinates (pump), T to f coordinates (Stokes^+).
    ``to_bare`` rotates (g, e, f) coordinate blocks back to the bare basis.
    """
    K = 0.5 * (K + K.conj().T)
    mu, y = np.linalg.eigh(K)
    mu = np.clip(mu, 0.0, None)
    thr = zero_tol * max(scale, 1e-300) ** 2
    active = mu > thr
    mu_a, y_a = mu[active], y[:, active]
    plus, minus = _roots(mu_a, delta)
    energies, cols = [], []
    for eps_set in (plus, minus):
        for j, eps in enumerate(eps_set):
            g = p * (G @ y_a[:, j])
            e = eps * y_a[:, j]
            f = s * (T @ y_a[:, j])
            v = np.concatenate([g, e, f])
            v = v / math.sqrt(mu_a[j] + eps * eps)
            cols.append(to_bare(v))
            energies.append(eps)
    vecs = np.array(cols).T if cols else np.zeros((0, 0), dtype=complex)
    unc = []
    Ng = G.shape[0]
    for j in np.flatnonzero(~active):
        v = np.concatenate([np.zeros(Ng), y[:, j], np.zeros(T.shape[0])])
        unc.append(to_bare(v))
    uncm = np.array(unc).T if unc else np.zeros((Ng + K.shape[0] + T.shape[0], 0), dtype=complex)
    order = np.argsort(energies, kind="stable")
    energies = np.asarray(energies)[order]
    if cols:
        vecs = vecs[:, order]
    else:
        vecs = np.zeros((Ng + K.shape[0] + T.shape[0], 0), dtype=complex)
    return BrightStates(energies, vecs, mu_a, y_a, uncm, float(delta), case)


def _block_rotator(sizes, Ug, Ue, Uf):
    Ng, Ne, Nf = sizes

    def to_bare(v):
        return np.concatenate([Ug.conj().T @ v[:Ng], Ue.conj().T @ v[Ng:Ng + Ne],
                               Uf.conj().T @ v[Ng + Ne:]])

    return to_bare


def bright_states(P, S=None, delta: float = 0.0, p: float = 1.0, s: float = 1.0,
                  zero_tol: float = DEFAULT_ZERO_TOL) -> BrightStates:
    """Bright states in the bare basis from K = p^2 P^+ P + s^2 S S^+."""
    pair = _as_pair(P, S)
    Ng, Ne, Nf = pair.sizes
    K = p * p * pair.P.conj().T @ pair.P + s * s * pair.S @ pair.S.conj().T
    eye = [np.eye(n, dtype=complex) for n in pair.sizes]
    return _bright_from_e_problem(K, pair.P, pair.S.conj().T, p, s, delta, classify(pair.sizes),
                                  _block_rotator(pair.sizes, *eye), _scale(pair), zero_tol)


def bright_states_case_A(P, S=None, dec: MSDecomposition | None = None, delta: float = 0.0,
                         p: float = 1.0, s: float = 1.0,
                         zero_tol: float = DEFAULT_ZERO_TOL) -> BrightStates:
    """Bright states for N_g <= N_e <= N_f in Stokes-side MS coordinates.

    Each eigenpair (mu, y) of p^2 P~^+ P~ + s^2 Sigma Sigma^+ yields the two
    energies solving eps (eps - Delta) = mu.
    """
    pair = _as_pair(P, S)
    if classify(pair.sizes) != CASE_A:
        raise CaseMismatchError(f"sizes {pair.sizes} do not satisfy N_g <= N_e <= N_f")
    dec = dec if dec is not None else ms_decompose(pair.S, zero_tol)
    Pt = pair.P @ dec.B.conj().T
    St = dec.sigma_matrix  # N_e x N_f
    K = p * p * Pt.conj().T @ Pt + s * s * St @ St.conj().T
    to_bare = _block_rotator(pair.sizes, np.eye(pair.sizes[0]), dec.B, dec.A)
    return _bright_from_e_problem(K, Pt, St.conj().T, p, s, delta, CASE_A, to_bare,
                                  _scale(pair), zero_tol)


def case_C_blocks(P, S, dec: MSDecomposition | None = None, second: SecondStageMS | None = None,
                  zero_tol: float = DEFAULT_ZERO_TOL):
    """Couplings after both MS stages.

    Returns (Pg, Sigma, U_g, U_e) where Pg = A' P~ diag(I, B'^+) is the
    full g-e block, Sigma the quasi-diagonal Stokes block, and U_g, U_e the
    g and e basis rotations (bare -> MS).
    """
    pair = _as_pair(P, S)
    dec = dec if dec is not None else ms_decompose(pair.S, zero_tol)
    if second is None:
        P_a, P_b = split_pump_blocks(pair.P, dec)
        second = second_stage_ms(P_a, P_b, zero_tol)
    Ne = pair.sizes[1]
    r = dec.rank
    Ue_extra = np.eye(Ne, dtype=complex)
    Ue_extra[r:, r:] = second.B_prime
    U_e = Ue_extra @ dec.B
    U_g = second.A_prime
    Pg = U_g @ pair.P @ U_e.conj().T
    return Pg, dec.sigma_matrix, U_g, U_e, second


def bright_states_case_C(P, S, dec: MSDecomposition | None, second: SecondStageMS | None,
                         delta: float, p: float, s: float,
                         zero_tol: float = DEFAULT_ZERO_TOL) -> BrightStates:
    """Bright states for N_g, N_f < N_e from the two-block e-space eigenproblem.

    In two-stage MS coordinates the e space splits into active states (y)
    and uncoupled states (y').  The generating matrix is

        [[p^2 (P~^+ P~ + P~'^+ P~') + s^2 Sigma Sigma^+,  p^2 P~'^+ Pi],
         [p^2 Pi^+ P~',                                    p^2 Pi^+ Pi ]]
    """
    pair = _as_pair(P, S)
    if classify(pair.sizes) != CASE_C:
        raise CaseMismatchError(f"sizes {pair.sizes} do not satisfy N_g, N_f < N_e")
    Pg, St, U_g, U_e, second = case_C_blocks(pair, None, dec, second, zero_tol)
    K = p * p * Pg.conj().T @ Pg + s * s * St @ St.conj().T
    dec_A = (dec if dec is not None else ms_decompose(pair.S, zero_tol)).A
    to_bare = _block_rotator(pair.sizes, U_g, U_e, dec_A)
    return _bright_from_e_problem(K, Pg, St.conj().T, p, s, delta, CASE_C, to_bare,
                                  _scale(pair), zero_tol)


def align_phases(previous: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Rephase columns of ``current`` to maximize overlap with ``previous``.

    Keeps eigenvector columns continuous between neighbouring time samples.
    """
    out = np.array(current, dtype=complex, copy=True)
    for j in range(out.shape[1]):
        ov = np.vdot(out[:, j], previous[:, j])
        if abs(ov) > 0:
            out[:, j] *= ov / abs(ov)
    return out


# ---------------------------------------------------------------- feasibility

COMPLETE = "complete_any_initial"
CONDITIONAL = "conditional"
PARTIAL = "partial"
NONE = "none"


@dataclass(frozen=True)
class FeasibilityVerdict:
    """Whether an arbitrary g population can be moved to f adiabatically.

    ``condition`` is 'condition satisfied' when complete transfer holds
    for the given fields although the sizes violate N_g <= N_e <= N_f,
    'requires special pump polarization' when it could be reached by
    changing only the pump polarization, and '' otherwise.
    """

    verdict: str
    N_D: int
    uncoupled_g_count: int
    null_sigma_count: int
    ordering_satisfied: bool
    case: str
    condition: str = ""
    generic_count: int = 0
    notes: tuple[str, ...] = ()
    suggested_pump_polarization: tuple[complex, complex, complex] | None = None

    def label(self) -> str:
        return f"{self.verdict}: {self.condition}" if self.condition else self.verdict

    def to_dict(self) -> dict:
        d = {
            "verdict": self.verdict,
            "label": self.label(),
            "condition": self.condition,
            "N_D": self.N_D,
            "generic_dark_count": self.generic_count,
            "uncoupled_g_count": self.uncoupled_g_count,
            "null_sigma_count": self.null_sigma_count,
            "ordering_satisfied": self.ordering_satisfied,
            "case": self.case,
            "notes": list(self.notes),
        }
        if self.suggested_pump_polarization is not None:
            d["suggested_pump_polarization"] = [[c.real, c.imag] for c in self.suggested_pump_polarization]
        return d


def _complete(P: np.ndarray, dec: MSDecomposition, zero_tol: float) -> tuple[bool, int, float]:
    """(complete?, rank of P, relative size of the coupling to uncoupled e states)."""
    Ng = P.shape[0]
    pdec = pump_side_ms(P, zero_tol)
    scale = max(np.linalg.norm(P, 2) if P.size else 0.0, 1e-300)
    if dec.uncoupled_rows:
        Pb = P @ dec.B.conj().T[:, dec.rank:]
        leak = float(np.linalg.norm(Pb, 2) / scale) if Pb.size else 0.0
    else:
        leak = 0.0
    return (pdec.rank == Ng and leak <= zero_tol * 10), pdec.rank, leak


def feasibility(target, S=None, zero_tol: float = DEFAULT_ZERO_TOL) -> FeasibilityVerdict:
    """Classify adiabatic transfer of an arbitrary g state into f.

    Complete transfer needs two things: every g state couples to the pump
    (rank P = N_g), and no g state couples to an e state that the Stokes
    field leaves uncoupled (including e states behind vanishing MS Rabi
    frequencies).  With a :class:`LinkageSpec` the pump polarization is
    also searched for a choice that meets the second requirement.
    """
    spec = target if isinstance(target, LinkageSpec) else None
    pair = _as_pair(target, S)
    Ng, Ne, Nf = pair.sizes
    ordering = Ng <= Ne <= Nf
    case = classify(pair.sizes)
    dec = ms_decompose(pair.S, zero_tol)
    fam = dark_states(pair, zero_tol=zero_tol)
    ok, rankP, leak = _complete(pair.P, dec, zero_tol)
    notes = []
    if case == CASE_A and dec.null_count:
        notes.append(f"{dec.null_count} vanishing Stokes MS Rabi frequency(ies) despite N_g <= N_e <= N_f")
    common = dict(N_D=fam.count, uncoupled_g_count=Ng - rankP, null_sigma_count=dec.null_count,
                  ordering_satisfied=ordering, case=case, generic_count=dark_count(Ng, Ne, Nf))

    g_part = fam.g_support() if fam.count else np.zeros((Ng, 0))
    if Ng and (g_part.size == 0 or np.linalg.norm(g_part) < 1e-12):
        return FeasibilityVerdict(NONE, notes=tuple(notes + ["no dark state overlaps the g manifold"]),
                                  **common)
    if ok:
        if ordering:
            return FeasibilityVerdict(COMPLETE, notes=tuple(notes), **common)
        return FeasibilityVerdict(CONDITIONAL, condition="condition satisfied",
                                  notes=tuple(notes + ["sizes violate N_g <= N_e <= N_f; "
                                                       "complete transfer relies on the chosen fields"]),
                                  **common)
    if spec is not None:
        eps = _pump_polarization_for_completion(spec, dec, zero_tol)
        if eps is not None:
            return FeasibilityVerdict(CONDITIONAL, condition="requires special pump polarization",
                                      notes=tuple(notes), suggested_pump_polarization=eps, **common)
    if Ng - rankP:
        notes.append(f"{Ng - rankP} g state(s) uncoupled from the pump")
    if leak > zero_tol * 10:
        notes.append("g population couples to e states uncoupled from f")
    return FeasibilityVerdict(PARTIAL, notes=tuple(notes), **common)


def _pump_polarization_for_completion(spec: LinkageSpec, dec: MSDecomposition, zero_tol: float):
    """Pump polarization making P B_b^+ vanish while keeping rank P = N_g, if any."""
    if not dec.uncoupled_rows:
        return None
    Bb = dec.B[dec.rank:]
    red = spec.reduced_matrix_elements[0]
    basis = [transition_matrix(spec.J_g, spec.J_e, FieldSpec(2.0, tuple(np.eye(3)[i])), red)
             for i in range(3)]
    blocks = [Pq @ Bb.conj().T for Pq in basis]
    G = np.array([[np.vdot(a, b) for b in blocks] for a in blocks])
    w, v = np.linalg.eigh(0.5 * (G + G.conj().T))
    scale = max(w.max(initial=0.0), 1e-300)
    for j in np.flatnonzero(w <= zero_tol * scale):
        eps = v[:, j]
        P = sum(c * Pq for c, Pq in zip(eps, basis))
        if ms_decompose(P, zero_tol).rank == P.shape[0]:
            return tuple(complex(c) for c in eps)
    return None


# ---------------------------------------------------------------- chain linearization

@dataclass(frozen=True, eq=False)
class ChainBasis:
    """Basis in which the pyramid-ordered system splits into N_g three-state chains.

    Columns of ``g_basis``, ``e_basis`` and ``f_basis`` are in Stokes-side
    MS coordinates.  ``e_basis`` is not orthogonal; ``e_dual`` holds the
    biorthogonal rows with e_dual @ e_basis = I.
    """

    g_basis: np.ndarray
    e_basis: np.ndarray
    e_dual: np.ndarray
    f_basis: np.ndarray
    ms_unitary: np.ndarray
    P_ms: np.ndarray
    S_ms: np.ndarray
    norms_e: np.ndarray
    norms_f: np.ndarray
    sizes: tuple[int, int, int]

    @property
    def chain_count(self) -> int:
        return self.g_basis.shape[1]

    @property
    def T(self) -> np.ndarray:
        """Similarity transform from chain coordinates to MS coordinates."""
        Ng, Ne, Nf = self.sizes
        N = Ng + Ne + Nf
        T = np.zeros((N, N), dtype=complex)
        T[:Ng, :Ng] = self.g_basis
        T[Ng:Ng + Ne, Ng:Ng + Ne] = self.e_basis
        T[Ng + Ne:, Ng + Ne:] = self.f_basis
        return T

    @property
    def T_inv(self) -> np.ndarray:
        Ng, Ne, Nf = self.sizes
        N = Ng + Ne + Nf
        T = np.zeros((N, N), dtype=complex)
        T[:Ng, :Ng] = self.g_basis.conj().T
        T[Ng:Ng + Ne, Ng:Ng + Ne] = self.e_dual
        T[Ng + Ne:, Ng + Ne:] = self.f_basis.conj().T
        return T

    def hamiltonian(self, p: float, s: float, delta: float = 0.0) -> np.ndarray:
        """T^-1 H_MS T for the given envelope values."""
        Ng, Ne, Nf = self.sizes
        N = Ng + Ne + Nf
        H = np.zeros((N, N), dtype=complex)
        H[:Ng, Ng:Ng + Ne] = p * self.P_ms
        H[Ng:Ng + Ne, :Ng] = p * self.P_ms.conj().T
        H[Ng:Ng + Ne, Ng + Ne:] = s * self.S_ms
        H[Ng + Ne:, Ng:Ng + Ne] = s * self.S_ms.conj().T
        H[Ng:Ng + Ne, Ng:Ng + Ne] = delta * np.eye(Ne)
        return self.T_inv @ H @ self.T

    def blocks(self) -> dict[str, np.ndarray]:
        """Q1, Q2, Sigma1, Sigma2 coupling blocks of the chain Hamiltonian (p = s = 1)."""
        Ng, Ne, Nf = self.sizes
        Ht = self.hamiltonian(1.0, 1.0)
        g, e, f = slice(0, Ng), slice(Ng, Ng + Ne), slice(Ng + Ne, Ng + Ne + Nf)
        return {
            "Q1": Ht[g, e][:, :Ng],
            "Q2": Ht[e, g][:Ng],
            "Sigma1": Ht[e, f][:Ng, :Ng],
            "Sigma2": Ht[f, e][:Ng, :Ng],
            "e_rest_from_g": Ht[e, g][Ng:],
            "e_rest_from_f": Ht[e, f][Ng:, :Ng],
        }

    def coordinates(self, vec: np.ndarray) -> np.ndarray:
        """Chain-basis amplitudes of a bare-basis vector."""
        return self.T_inv @ (self.ms_unitary @ np.asarray(vec))

    def transfer_residual(self, vec: np.ndarray, p: float, s: float) -> np.ndarray:
        """p N_f x~ + s z~~ for each chain; vanishes along dark states."""
        Ng, Ne, _ = self.sizes
        c = self.coordinates(vec)
        return p * self.norms_f * c[:Ng] + s * c[Ng + Ne:Ng + Ne + Ng]


def _orth_complement(V: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis of the complement of span(V) in C^n."""
    if V.shape[1] == 0:
        return np.eye(n, dtype=complex)
    U, sv, _ = np.linalg.svd(V, full_matrices=True)
    r = int(np.sum(sv > 1e-12 * sv.max()))
    return U[:, r:]


def linearize_chains(P, S=None, dec: MSDecomposition | None = None,
                     family: DarkStateFamily | None = None,
                     zero_tol: float = DEFAULT_ZERO_TOL) -> ChainBasis:
    """Change of basis turning the pyramid-ordered linkage into independent chains.

    g basis: the constant dark parts x_l.  e basis: P~^+ x_l / N_e plus a
    complement orthogonal to the dual directions (Sigma Sigma^+)^-1 P~^+ x_l.
    f basis: Sigma^-1 P~^+ x_l / N_f plus an orthonormal complement.
    """
    pair = _as_pair(P, S)
    Ng, Ne, Nf = pair.sizes
    if classify(pair.sizes) != CASE_A:
        raise CaseMismatchError("chain linearization needs N_g <= N_e <= N_f")
    dec = dec if dec is not None else ms_decompose(pair.S, zero_tol)
    if dec.rank < Ne:
        raise SingularCouplingError("chain linearization needs a nonsingular Sigma")
    family = family if family is not None else dark_states_case_A(pair, dec=dec, zero_tol=zero_tol)
    if family.parameterized_count < Ng:
        raise SingularCouplingError("a g state is decoupled from the pump; no chain for it")

    x = family.X  # bare g basis equals MS g basis in this ordering
    Pt = pair.P @ dec.B.conj().T
    sig = dec.sigma[:Ne]
    PtX = Pt.conj().T @ x  # N_e x N_g
    n_e = np.linalg.norm(PtX, axis=0)
    e_main = PtX / n_e
    fvec = np.zeros((Nf, Ng), dtype=complex)
    fvec[:Ne] = PtX / sig[:, np.newaxis]
    n_f = np.linalg.norm(fvec, axis=0)
    f_main = fvec / n_f
    duals = PtX / (sig**2)[:, np.newaxis]
    e_rest = _orth_complement(duals, Ne)
    E = np.hstack([e_main, e_rest])
    E_dual = np.linalg.inv(E)
    f_rest = _orth_complement(f_main, Nf)
    F = np.hstack([f_main, f_rest])
    U = np.zeros((pair.N, pair.N), dtype=complex)
    U[:Ng, :Ng] = np.eye(Ng)
    U[Ng:Ng + Ne, Ng:Ng + Ne] = dec.B
    U[Ng + Ne:, Ng + Ne:] = dec.A
    return ChainBasis(x, E, E_dual, F, U, Pt, dec.sigma_matrix, n_e, n_f, pair.sizes)
