"""Coupling matrices for angular-momentum linkages g <-> e <-> f.

States inside each manifold are ordered by ascending magnetic quantum number
M = -J, ..., +J.  Matrix entries are half Rabi frequencies (hbar = 1), so
a scalar three-level system with Rabi frequency Omega has P = [[Omega / 2]].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

CG_ZERO = 1e-14

#: spherical component order used throughout: q = -1, 0, +1
Q_VALUES = (-1, 0, 1)


def _twice(x, name: str = "value") -> int:
    """Return 2*x as an int, rejecting anything that is not a half-integer."""
    t = 2 * float(x)
    r = round(t)
    if abs(t - r) > 1e-9:
        raise ValueError(f"{name}={x!r} is not an integer or half-integer")
    return int(r)


@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return math.factorial(n)


@lru_cache(maxsize=4096)
def _cg_twice(j1: int, m1: int, j2: int, m2: int, J: int, M: int) -> float:
    # all arguments are doubled quantum numbers
    if m1 + m2 != M:
        return 0.0
    if J < abs(j1 - j2) or J > j1 + j2 or (j1 + j2 + J) % 2:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(M) > J:
        return 0.0
    if (j1 + m1) % 2 or (j2 + m2) % 2 or (J + M) % 2:
        return 0.0

    a = (j1 + j2 - J) // 2
    b = (j1 - m1) // 2
    c = (j2 + m2) // 2
    d = (J - j2 + m1) // 2
    e = (J - j1 - m2) // 2

    total = Fraction(0)
    for k in range(max(0, -d, -e), min(a, b, c) + 1):
        den = _fact(k) * _fact(a - k) * _fact(b - k) * _fact(c - k) * _fact(d + k) * _fact(e + k)
        total += Fraction((-1) ** k, den)

    pref = Fraction(
        (J + 1)
        * _fact((J + j1 - j2) // 2)
        * _fact((J - j1 + j2) // 2)
        * _fact((j1 + j2 - J) // 2),
        _fact((j1 + j2 + J) // 2 + 1),
    )
    pref *= (
        _fact((J + M) // 2)
        * _fact((J - M) // 2)
        * _fact((j1 - m1) // 2)
        * _fact((j1 + m1) // 2)
        * _fact((j2 - m2) // 2)
        * _fact((j2 + m2) // 2)
    )
    value = float(total) * math.sqrt(pref)
    return 0.0 if abs(value) < CG_ZERO else value


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient <j1 m1, j2 m2 | J M> (Condon-Shortley phase).

    Angular momenta may be integers or half-integers.  Returns 0 when
    M != m1 + m2, when the triangle rule fails, or when |m| > j.

    >>> round(clebsch_gordan(1, 1, 1, -1, 0, 0), 12) == round(1 / math.sqrt(3), 12)
    True
    """
    args = [_twice(v, n) for v, n in zip((j1, m1, j2, m2, J, M), ("j1", "m1", "j2", "m2", "J", "M"))]
    for jj, name in zip(args[::2], ("j1", "j2", "J")):
        if jj < 0:
            raise ValueError(f"{name} must be nonnegative")
    return _cg_twice(*args)


def m_values(J) -> np.ndarray:
    """Magnetic quantum numbers -J..J of a manifold, ascending."""
    tj = _twice(J, "J")
    if tj < 0:
        raise ValueError("J must be nonnegative")
    return np.array([(-tj + 2 * k) / 2 for k in range(tj + 1)])


@dataclass(frozen=True)
class FieldSpec:
    """Peak Rabi frequency and unit spherical polarization vector of one field.

    ``components`` holds the weights eps_q for q = -1, 0, +1 (sigma-minus,
    pi, sigma-plus).
    """

    peak_rabi: float
    components: tuple[complex, complex, complex]

    def __post_init__(self):
        if self.peak_rabi < 0 or not np.isfinite(self.peak_rabi):
            raise ValueError("peak_rabi must be a finite nonnegative number")
        comps = tuple(complex(c) for c in self.components)
        if len(comps) != 3:
            raise ValueError("components must hold three values (q = -1, 0, +1)")
        norm = sum(abs(c) ** 2 for c in comps)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"polarization must be unit-normalized, got sum |eps_q|^2 = {norm!r}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "peak_rabi", float(self.peak_rabi))

    @classmethod
    def from_angles(cls, peak_rabi: float, angle: float, phase_plus: float = 0.0,
                    phase_minus: float = 0.0) -> "FieldSpec":
        """sigma+/sigma- field: Omega+ = Omega e^{i phase_plus} cos(angle),
        Omega- = Omega e^{i phase_minus} sin(angle)."""
        return cls(
            peak_rabi,
            (np.exp(1j * phase_minus) * np.sin(angle), 0.0, np.exp(1j * phase_plus) * np.cos(angle)),
        )

    @classmethod
    def from_components(cls, peak_rabi: float, sigma_minus: complex = 0.0, pi: complex = 0.0,
                        sigma_plus: complex = 0.0, normalize: bool = False) -> "FieldSpec":
        comps = np.array([sigma_minus, pi, sigma_plus], dtype=complex)
        norm = np.linalg.norm(comps)
        if norm == 0:
            raise ValueError("polarization vector must not vanish")
        if normalize:
            comps = comps / norm
        return cls(peak_rabi, tuple(comps))

    @property
    def spherical(self) -> dict[int, complex]:
        return dict(zip(Q_VALUES, self.components))


@dataclass(frozen=True)
class LinkageSpec:
    J_g: float
    J_e: float
    J_f: float
    pump: FieldSpec
    stokes: FieldSpec
    reduced_matrix_elements: tuple[complex, complex] = (1.0, 1.0)

    def __post_init__(self):
        for name in ("J_g", "J_e", "J_f"):
            tj = _twice(getattr(self, name), name)
            if tj < 0:
                raise ValueError(f"{name} must be nonnegative")
        if abs(self.J_g - self.J_e) > 1 or abs(self.J_e - self.J_f) > 1:
            raise ValueError(
                f"dipole selection rule |dJ| <= 1 violated for J = "
                f"{self.J_g} <-> {self.J_e} <-> {self.J_f}"
            )
        if len(self.reduced_matrix_elements) != 2:
            raise ValueError("need one reduced matrix element per transition")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return tuple(_twice(j) + 1 for j in (self.J_g, self.J_e, self.J_f))


@dataclass(frozen=True)
class CouplingPair:
    """Constant pump (g-e) and Stokes (e-f) coupling matrices."""

    P: np.ndarray
    S: np.ndarray
    labels: tuple[tuple, tuple, tuple] | None = field(default=None, compare=False)

    def __post_init__(self):
        P = np.array(self.P, dtype=complex)
        S = np.array(self.S, dtype=complex)
        if P.ndim != 2 or S.ndim != 2:
            raise ValueError("P and S must be matrices")
        if P.shape[1] != S.shape[0]:
            raise ValueError(f"P is {P.shape} but S is {S.shape}: e-manifold sizes disagree")
        P.setflags(write=False)
        S.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "S", S)
        if self.labels is not None:
            if tuple(len(lab) for lab in self.labels) != self.sizes:
                raise ValueError("labels do not match manifold sizes")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.P.shape[0], self.P.shape[1], self.S.shape[1]

    @property
    def N(self) -> int:
        return sum(self.sizes)

    def mirrored(self) -> "CouplingPair":
        """Swap the roles of g and f (P -> S^dagger, S -> P^dagger)."""
        labels = None if self.labels is None else self.labels[::-1]
        return CouplingPair(self.S.conj().T, self.P.conj().T, labels)


def transition_matrix(J_lower, J_upper, field_spec: FieldSpec, reduced: complex = 1.0) -> np.ndarray:
    """Half-Rabi coupling matrix between two angular-momentum manifolds.

    Entry (i, j) is (Omega/2) * reduced * sum_q eps_q <J_l M_i, 1 q | J_u M_j> / sqrt(2 J_l + 1).
    """
    ml, mu = m_values(J_lower), m_values(J_upper)
    X = np.zeros((ml.size, mu.size), dtype=complex)
    norm = math.sqrt(2 * float(J_lower) + 1)
    eps = field_spec.spherical
    for i, Mi in enumerate(ml):
        for j, Mj in enumerate(mu):
            q = Mj - Mi
            if abs(q) > 1:
                continue
            cg = clebsch_gordan(J_lower, Mi, 1, q, J_upper, Mj)
            if cg:
                X[i, j] = eps[int(round(q))] * cg / norm
    return 0.5 * field_spec.peak_rabi * complex(reduced) * X


def build_couplings(spec: LinkageSpec) -> CouplingPair:
    """Pump and Stokes matrices for a J_g <-> J_e <-> J_f linkage."""
    red_p, red_s = spec.reduced_matrix_elements
    P = transition_matrix(spec.J_g, spec.J_e, spec.pump, red_p)
    S = transition_matrix(spec.J_e, spec.J_f, spec.stokes, red_s)
    labels = tuple(tuple(m_values(J).tolist()) for J in (spec.J_g, spec.J_e, spec.J_f))
    return CouplingPair(P, S, labels)


@dataclass(frozen=True)
class Subsystem:
    """One connected component of the coupling graph."""

    g: tuple[int, ...]
    e: tuple[int, ...]
    f: tuple[int, ...]
    pair: CouplingPair

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.g), len(self.e), len(self.f)

    def global_indices(self, sizes: Sequence[int]) -> np.ndarray:
        """Indices of this component's states in the full g+e+f ordering."""
        Ng, Ne, _ = sizes
        return np.array(list(self.g) + [Ng + i for i in self.e] + [Ng + Ne + i for i in self.f], dtype=int)


def decompose_subsystems(pair: CouplingPair, tol: float = 0.0) -> list[Subsystem]:
    """Split a linkage into independent connected subsystems.

    Nonzero entries of P and S (|x| > tol) are edges of the tripartite
    graph.  Components are returned ordered by their smallest global index;
    states without couplings come back as singleton components.
    """
    Ng, Ne, Nf = pair.sizes
    N = Ng + Ne + Nf
    pi, pj = np.nonzero(np.abs(pair.P) > tol)
    si, sj = np.nonzero(np.abs(pair.S) > tol)
    rows = np.concatenate([pi, Ng + si])
    cols = np.concatenate([Ng + pj, Ng + Ne + sj])
    graph = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(N, N))
    ncomp, lab = connected_components(graph, directed=False)

    order = sorted(range(ncomp), key=lambda c: int(np.flatnonzero(lab == c)[0]))
    out = []
    for c in order:
        idx = np.flatnonzero(lab == c)
        g = tuple(int(i) for i in idx if i < Ng)
        e = tuple(int(i - Ng) for i in idx if Ng <= i < Ng + Ne)
        f = tuple(int(i - Ng - Ne) for i in idx if i >= Ng + Ne)
        labels = None
        if pair.labels is not None:
            labels = tuple(tuple(lab_[k] for k in ks) for lab_, ks in zip(pair.labels, (g, e, f)))
        gi, ei, fi = (np.array(ks, dtype=int) for ks in (g, e, f))
        sub = CouplingPair(pair.P[np.ix_(gi, ei)], pair.S[np.ix_(ei, fi)], labels)
        out.append(Subsystem(g, e, f, sub))
    return out
