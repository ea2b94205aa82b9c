"""Time evolution: direct integration and the adiabatic dark-subspace map."""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .adiabatic_basis import DarkStateFamily
from .errors import IntegrationError
from .hamiltonian import RwaHamiltonian

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_MAX_EVALUATIONS = 2_000_000


class DarkSubspaceWarning(UserWarning):
    """The initial state has weight outside the dark subspace."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"initial state has a bright-subspace component of norm {residual:.3e}; "
                         "the adiabatic map ignores it")


def populations(state, sizes) -> tuple[float, float, float]:
    """(P_g, P_e, P_f) of a state vector or density matrix."""
    Ng, Ne, Nf = sizes
    state = np.asarray(state)
    diag = np.abs(state) ** 2 if state.ndim == 1 else np.real(np.diagonal(state))
    return float(diag[:Ng].sum()), float(diag[Ng:Ng + Ne].sum()), float(diag[Ng + Ne:].sum())


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(a, b) -> float:
    """Uhlmann fidelity of two states, each a vector or a density matrix."""
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim == 1 and b.ndim == 1:
        return float(abs(np.vdot(a, b)) ** 2)
    if a.ndim == 1 or b.ndim == 1:
        psi, rho = (a, b) if a.ndim == 1 else (b, a)
        return float(np.real(np.vdot(psi, rho @ psi)))
    sa = _psd_sqrt(a)
    w = np.linalg.eigvalsh(sa @ b @ sa)
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)


def state_labels(h: RwaHamiltonian) -> list[str]:
    """Column labels such as 'g(-1)' built from the manifold quantum numbers."""
    labels = h.couplings.labels
    out = []
    for name, n, lab in zip("gef", h.sizes, labels if labels is not None else (None,) * 3):
        for i in range(n):
            if lab is None:
                out.append(f"{name}[{i}]")
            else:
                m = lab[i]
                out.append(f"{name}({m:g})" if isinstance(m, (int, float)) else f"{name}({m})")
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution of the Schrodinger equation.

    ``states`` has shape (T, N) for pure states and (T, N, N) for density
    matrices.  ``populations`` has shape (T, 3) holding P_g, P_e, P_f.
    """

    times: np.ndarray
    states: np.ndarray
    populations: np.ndarray
    sizes: tuple[int, int, int]
    kind: str
    stats: dict = field(default_factory=dict)
    labels: tuple[str, ...] = ()

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_populations(self) -> tuple[float, float, float]:
        return tuple(float(x) for x in self.populations[-1])

    def norms(self) -> np.ndarray:
        if self.kind == "pure":
            return np.sum(np.abs(self.states) ** 2, axis=1)
        return np.real(np.trace(self.states, axis1=1, axis2=2))

    @property
    def norm_drift(self) -> float:
        n = self.norms()
        return float(np.abs(n - n[0]).max())

    def csv_header(self) -> list[str]:
        labels = list(self.labels) or [str(i) for i in range(sum(self.sizes))]
        if self.kind == "pure":
            amp = [f"{pre}_{lab}" for lab in labels for pre in ("re", "im")]
        else:
            amp = [f"rho_{lab}" for lab in labels]
        return ["t"] + amp + ["P_g", "P_e", "P_f"]

    def to_csv(self, target=None) -> str:
        """CSV with columns t, (re, im) per amplitude or rho diagonal, P_g, P_e, P_f.

        Numbers are written with 17 significant digits.  Returns the text and
        writes it to ``target`` (path or file object) when given.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        for t, st, pop in zip(self.times, self.states, self.populations):
            if self.kind == "pure":
                vals = np.column_stack([st.real, st.imag]).ravel()
            else:
                vals = np.real(np.diagonal(st))
            w.writerow([f"{x:.17g}" for x in (t, *vals, *pop)])
        text = buf.getvalue()
        if target is not None:
            if hasattr(target, "write"):
                target.write(text)
            else:
                with open(target, "w", newline="") as fh:
                    fh.write(text)
        return text

    def to_dict(self) -> dict:
        fin = self.final
        d = {
            "kind": self.kind,
            "sizes": list(self.sizes),
            "labels": list(self.labels),
            "times": [float(t) for t in self.times],
            "populations": {k: [float(x) for x in self.populations[:, i]] for i, k in enumerate("gef")},
            "final_populations": dict(zip("gef", self.final_populations)),
            "norm_drift": self.norm_drift,
            "stats": {k: (v if isinstance(v, (str, bool)) else (int(v) if isinstance(v, (int, np.integer)) else float(v)))
                      for k, v in self.stats.items()},
        }
        if self.kind == "pure":
            d["final_state"] = {"re": [float(x) for x in fin.real], "im": [float(x) for x in fin.imag]}
        else:
            d["final_state"] = {"re": fin.real.tolist(), "im": fin.imag.tolist()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def _check_initial(initial, N: int) -> tuple[np.ndarray, str]:
    x = np.asarray(initial, dtype=complex)
    if x.ndim == 1:
        if x.shape != (N,):
            raise ValueError(f"initial vector must have length {N}")
        if abs(np.vdot(x, x).real - 1.0) > 1e-9:
            raise ValueError("initial state must be normalized")
        return x, "pure"
    if x.shape != (N, N):
        raise ValueError(f"initial density matrix must be {N} x {N}")
    if np.abs(x - x.conj().T).max() > 1e-12:
        raise ValueError("density matrix must be Hermitian")
    if abs(np.trace(x).real - 1.0) > 1e-9:
        raise ValueError("density matrix must have unit trace")
    if np.linalg.eigvalsh(x).min() < -1e-12:
        raise ValueError("density matrix must be positive semidefinite")
    return x, "mixed"


def integrate(H: RwaHamiltonian, initial, window: tuple[float, float] | None = None,
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL, n_points: int = 401,
              t_eval=None, max_evaluations: int = DEFAULT_MAX_EVALUATIONS,
              method: str = "DOP853") -> Trajectory:
    """Integrate i dC/dt = H(t) C over ``window``.

    Density matrices are evolved as V rho0 V^+ with the propagator V
    integrated from the identity, which keeps rho positive.  ``window``
    defaults to the union of the pulse windows (center -/+ 4 widths).
    """
    N = H.N
    x0, kind = _check_initial(initial, N)
    t0, t1 = window if window is not None else H.window()
    if not t1 > t0:
        raise ValueError("window must be increasing")
    if t_eval is None:
        t_eval = np.linspace(t0, t1, n_points)
    t_eval = np.asarray(t_eval, dtype=float)
    Hp, Hs, D = H.parts
    pump, stokes = H.pump, H.stokes
    count = [0]

    if kind == "pure":
        y0 = x0

        def rhs(t, y):
            count[0] += 1
            if count[0] > max_evaluations:
                raise IntegrationError(f"tolerance rtol={rtol:g} not reached within {max_evaluations} evaluations")
            return -1j * ((float(pump(t)) * Hp + float(stokes(t)) * Hs + D) @ y)
    else:
        y0 = np.eye(N, dtype=complex).ravel()

        def rhs(t, y):
            count[0] += 1
            if count[0] > max_evaluations:
                raise IntegrationError(f"tolerance rtol={rtol:g} not reached within {max_evaluations} evaluations")
            Ht = float(pump(t)) * Hp + float(stokes(t)) * Hs + D
            return (-1j * (Ht @ y.reshape(N, N))).ravel()

    sol = solve_ivp(rhs, (t0, t1), y0, method=method, t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(sol.message)
    if kind == "pure":
        states = sol.y.T.copy()
    else:
        V = sol.y.T.reshape(-1, N, N)
        states = V @ x0[np.newaxis] @ np.conj(np.transpose(V, (0, 2, 1)))
    pops = np.array([populations(st, H.sizes) for st in states])
    stats = {"nfev": int(sol.nfev), "status": int(sol.status), "method": method,
             "rtol": float(rtol), "atol": float(atol)}
    return Trajectory(sol.t.copy(), states, pops, H.sizes, kind, stats, tuple(state_labels(H)))


@dataclass(frozen=True, eq=False)
class TransferOperator:
    """U(t1, t0) = sum_l |Phi_l(t1)><Phi_l(t0)| over the dark family."""

    matrix: np.ndarray
    initial_dark: np.ndarray
    final_dark: np.ndarray
    t0: float
    t1: float

    @property
    def initial_projector(self) -> np.ndarray:
        return self.initial_dark @ self.initial_dark.conj().T

    def residual(self, state) -> float:
        """Norm of the part of ``state`` outside the dark subspace at t0."""
        x = np.asarray(state, dtype=complex)
        Pr = self.initial_projector
        if x.ndim == 1:
            return float(np.linalg.norm(x - Pr @ x))
        # weight of rho outside the dark subspace
        return float(np.sqrt(max(np.real(np.trace(x) - np.trace(Pr @ x @ Pr)), 0.0)))

    def apply(self, state, tolerance: float = 1e-6):
        """Map a state vector or density matrix; warns if it leaves the dark subspace."""
        x = np.asarray(state, dtype=complex)
        res = self.residual(x)
        if res > tolerance:
            warnings.warn(DarkSubspaceWarning(res), stacklevel=2)
        U = self.matrix
        if x.ndim == 1:
            return U @ x
        return U @ x @ U.conj().T


def adiabatic_transfer(family: DarkStateFamily, H: RwaHamiltonian, t0: float, t1: float) -> TransferOperator:
    """Adiabatic-limit evolution operator restricted to the dark subspace."""
    V0 = family.at(H, t0)
    V1 = family.at(H, t1)
    return TransferOperator(V1 @ V0.conj().T, V0, V1, float(t0), float(t1))
