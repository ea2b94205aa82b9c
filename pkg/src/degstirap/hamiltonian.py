"""Pulse envelopes and the block RWA Hamiltonian.

    H(t) = [[0,          p(t) P,   0       ],
            [p(t) P^+,   Delta,    s(t) S  ],
            [0,          s(t) S^+, 0       ]]
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np
from scipy.interpolate import CubicSpline

from .linkage import CouplingPair


class PulseEnvelope(Protocol):
    def __call__(self, t): ...

    def derivative(self, t): ...


@dataclass(frozen=True)
class GaussianPulse:
    """exp(-(t - center)^2 / width^2); unit peak at ``center``."""

    center: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")

    def __call__(self, t):
        x = (np.asarray(t, dtype=float) - self.center) / self.width
        return np.exp(-x * x)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return -2.0 * (t - self.center) / self.width**2 * self(t)

    def window(self, n_widths: float = 4.0) -> tuple[float, float]:
        return self.center - n_widths * self.width, self.center + n_widths * self.width


class TabulatedPulse:
    """Cubic-spline interpolation of sampled envelope values (zero outside)."""

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 4:
            raise ValueError("need at least four (time, value) samples")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if values.max() > 1 + 1e-12 or values.min() < -1e-12:
            raise ValueError("envelope samples must lie in [0, 1]")
        self.times = times
        self.values = values
        self._spline = CubicSpline(times, values)
        self._dspline = self._spline.derivative()

    def _inside(self, t):
        return (t >= self.times[0]) & (t <= self.times[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._inside(t), self._spline(t), 0.0)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(self._inside(t), self._dspline(t), 0.0)

    def window(self, n_widths: float = 4.0) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])


class CustomPulse:
    """Wrap an arbitrary callable; derivative by central difference unless given."""

    def __init__(self, func: Callable, derivative: Callable | None = None, step: float = 1e-5):
        self.func = func
        self._deriv = derivative
        self.step = step

    def __call__(self, t):
        return self.func(t)

    def derivative(self, t):
        if self._deriv is not None:
            return self._deriv(t)
        h = self.step
        return (self.func(np.asarray(t) + h) - self.func(np.asarray(t) - h)) / (2 * h)


class RwaHamiltonian:
    """Time-dependent Hamiltonian built from constant couplings and two envelopes."""

    def __init__(self, couplings: CouplingPair, pump: PulseEnvelope, stokes: PulseEnvelope,
                 detuning=0.0):
        self.couplings = couplings
        self.pump = pump
        self.stokes = stokes
        Ng, Ne, Nf = couplings.sizes
        det = np.asarray(detuning, dtype=float)
        if det.ndim == 0:
            self.detuning = float(det)
            det_diag = np.full(Ne, float(det))
        else:
            if det.shape != (Ne,):
                raise ValueError(f"detuning vector must have length N_e = {Ne}")
            warnings.warn("state-dependent detuning breaks the uniform e-manifold detuning "
                          "assumed by the dark-state analysis", stacklevel=2)
            self.detuning = det.copy()
            det_diag = det
        N = Ng + Ne + Nf
        self.sizes = (Ng, Ne, Nf)
        self.slices = (slice(0, Ng), slice(Ng, Ng + Ne), slice(Ng + Ne, N))

        # H(t) = p(t) Hp + s(t) Hs + D
        g, e, f = self.slices
        self._Hp = np.zeros((N, N), dtype=complex)
        self._Hp[g, e] = couplings.P
        self._Hp[e, g] = couplings.P.conj().T
        self._Hs = np.zeros((N, N), dtype=complex)
        self._Hs[e, f] = couplings.S
        self._Hs[f, e] = couplings.S.conj().T
        self._D = np.zeros((N, N), dtype=complex)
        self._D[e, e] = np.diag(det_diag)
        for arr in (self._Hp, self._Hs, self._D):
            arr.setflags(write=False)

    @property
    def N(self) -> int:
        return self._D.shape[0]

    @property
    def parts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Constant pieces (Hp, Hs, D) with H(t) = p(t) Hp + s(t) Hs + D."""
        return self._Hp, self._Hs, self._D

    def envelopes(self, t) -> tuple[float, float]:
        return float(self.pump(t)), float(self.stokes(t))

    def at(self, p: float, s: float) -> np.ndarray:
        """Hamiltonian for given envelope values."""
        return p * self._Hp + s * self._Hs + self._D

    def __call__(self, t) -> np.ndarray:
        return self.at(*self.envelopes(t))

    def derivative(self, t) -> np.ndarray:
        return float(self.pump.derivative(t)) * self._Hp + float(self.stokes.derivative(t)) * self._Hs

    def window(self, n_widths: float = 4.0) -> tuple[float, float]:
        """Union of both pulse windows [center -/+ n_widths * width]."""
        lo, hi = [], []
        for env in (self.pump, self.stokes):
            if not hasattr(env, "window"):
                raise ValueError("envelope has no natural window; pass one explicitly")
            a, b = env.window(n_widths)
            lo.append(a)
            hi.append(b)
        return min(lo), max(hi)

    def with_envelopes(self, pump: PulseEnvelope, stokes: PulseEnvelope) -> "RwaHamiltonian":
        return RwaHamiltonian(self.couplings, pump, stokes, self.detuning)

    def projector(self, manifold: str) -> np.ndarray:
        """Diagonal 0/1 mask selecting one manifold ('g', 'e' or 'f')."""
        mask = np.zeros(self.N)
        mask[self.slices["gef".index(manifold)]] = 1.0
        return mask


def evaluate(h: RwaHamiltonian, t: float) -> np.ndarray:
    return h(t)


def block_unitary(g: np.ndarray | None, e: np.ndarray | None, f: np.ndarray | None,
                  sizes: tuple[int, int, int]) -> np.ndarray:
    """Block-diagonal unitary diag(Ug, Ue, Uf); ``None`` blocks are identities."""
    N = sum(sizes)
    U = np.zeros((N, N), dtype=complex)
    start = 0
    for block, n in zip((g, e, f), sizes):
        U[start:start + n, start:start + n] = np.eye(n) if block is None else block
        start += n
    return U


def transform(H: np.ndarray, U: np.ndarray, sizes: tuple[int, int, int] | None = None) -> np.ndarray:
    """Return U H U^+.

    With ``sizes`` given, U must be block diagonal on the g/e/f manifolds.
    """
    H = np.asarray(H)
    U = np.asarray(U)
    if H.shape != U.shape or H.shape[0] != H.shape[1]:
        raise ValueError(f"dimension mismatch: H is {H.shape}, U is {U.shape}")
    if sizes is not None:
        if sum(sizes) != H.shape[0]:
            raise ValueError("sizes do not add up to the Hamiltonian dimension")
        mask = np.zeros(H.shape, dtype=bool)
        start = 0
        for n in sizes:
            mask[start:start + n, start:start + n] = True
            start += n
        if np.any(np.abs(U[~mask]) > 1e-12):
            raise ValueError("U mixes different manifolds")
    return U @ H @ U.conj().T
