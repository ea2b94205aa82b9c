"""Declarative scenario files (TOML).

A scenario names a linkage, the two fields with their envelopes, the
detuning, an initial state and integration/analysis settings::

    name = "fig4"
    detuning = 0.0

    [linkage]
    J = [1, 2, 3]              # or P = {re = [[...]], im = [[...]]}, S = {...}

    [pump]
    omega = 52.0
    angle = 1.3376             # or components = {sigma_minus = [re, im], pi = ..., sigma_plus = ...}
    phase_plus = 1.1814
    phase_minus = 0.0
    envelope = {shape = "gaussian", center = 3.0, width = 6.0}

    [stokes]
    ...

    [initial]
    kind = "pure"
    amplitudes = [{manifold = "g", M = 1, re = 1.0}]

States are referenced by manifold and magnetic quantum number ``M`` for
J-based linkages, or by manifold and zero-based ``index`` in general.
Mixed states use ``kind = "mixed"`` with ``populations`` and optional
``coherences`` (pairs ``a``, ``b`` of state references with ``re``/``im``).

Validation errors carry the line of the offending entry.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ScenarioError
from .hamiltonian import GaussianPulse, RwaHamiltonian, TabulatedPulse
from .linkage import CouplingPair, FieldSpec, LinkageSpec, build_couplings, m_values
from .morris_shore import DEFAULT_ZERO_TOL
from .propagator import DEFAULT_ATOL, DEFAULT_MAX_EVALUATIONS, DEFAULT_RTOL

_TOP_KEYS = {"name", "description", "detuning", "linkage", "pump", "stokes", "initial",
             "integration", "analysis", "outputs"}
_OUTPUT_KINDS = ("csv", "json")


class _Locator:
    """Maps dotted key paths to source lines by a light scan of the text."""

    _header = re.compile(r"^\s*\[\[?\s*([^\]]+?)\s*\]\]?\s*(#.*)?$")
    _key = re.compile(r"^\s*([A-Za-z0-9_\-\"']+)\s*=")

    def __init__(self, text: str):
        self.lines = {}
        table = ""
        for n, raw in enumerate(text.splitlines(), start=1):
            m = self._header.match(raw)
            if m:
                table = m.group(1).replace('"', "").replace("'", "")
                self.lines.setdefault(table, n)
                continue
            k = self._key.match(raw)
            if k:
                key = k.group(1).strip("\"'")
                path = f"{table}.{key}" if table else key
                self.lines.setdefault(path, n)

    def line(self, path: str) -> int | None:
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path.rpartition(".")[0]
        return None


@dataclass(frozen=True)
class StateRef:
    manifold: str
    index: int


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated scenario, ready to build a Hamiltonian and initial state."""

    name: str
    couplings: CouplingPair
    pump_envelope: object
    stokes_envelope: object
    detuning: float
    initial: np.ndarray
    initial_kind: str
    linkage_spec: LinkageSpec | None = None
    description: str = ""
    window: tuple[float, float] | None = None
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    points: int = 401
    max_evaluations: int = DEFAULT_MAX_EVALUATIONS
    zero_tol: float = DEFAULT_ZERO_TOL
    adiabaticity_threshold: float = 0.1
    adiabaticity_window: tuple[float, float] | None = None
    adiabaticity_points: int = 401
    outputs: tuple[str, ...] = _OUTPUT_KINDS
    source: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.couplings.sizes

    def hamiltonian(self) -> RwaHamiltonian:
        return RwaHamiltonian(self.couplings, self.pump_envelope, self.stokes_envelope, self.detuning)

    def integration_window(self) -> tuple[float, float]:
        return self.window if self.window is not None else self.hamiltonian().window()

    def replace(self, **changes) -> "Scenario":
        from dataclasses import replace
        return replace(self, **changes)


class _Reader:
    def __init__(self, data: dict, text: str, path: str | None):
        self.data = data
        self.loc = _Locator(text)
        self.path = path

    def fail(self, message: str, key: str = ""):
        raise ScenarioError(message, self.loc.line(key) if key else None, self.path)

    def table(self, key: str, required: bool = True) -> dict:
        cur = self.data
        for part in key.split("."):
            if not isinstance(cur, dict) or part not in cur:
                if required:
                    self.fail(f"missing section [{key}]", key.rpartition(".")[0])
                return {}
            cur = cur[part]
        if not isinstance(cur, dict):
            self.fail(f"'{key}' must be a table", key)
        return cur

    def known(self, tab: dict, section: str, keys):
        for k in tab:
            if k not in keys:
                self.fail(f"unknown key '{k}' in [{section}]", f"{section}.{k}")

    def number(self, tab: dict, key: str, path: str, default=None, positive=False, nonneg=False) -> float:
        if key not in tab:
            if default is None:
                self.fail(f"missing key '{key}'", path.rpartition(".")[0])
            return default
        v = tab[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"'{key}' must be a number, got {v!r}", path)
        v = float(v)
        if not np.isfinite(v):
            self.fail(f"'{key}' must be finite", path)
        if positive and v <= 0:
            self.fail(f"'{key}' must be positive", path)
        if nonneg and v < 0:
            self.fail(f"'{key}' must be nonnegative", path)
        return v

    def pair(self, v, path: str) -> tuple[float, float]:
        if (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                                        for x in v)):
            return float(v[0]), float(v[1])
        self.fail(f"expected a pair [a, b] of numbers, got {v!r}", path)

    def matrix(self, v, path: str) -> np.ndarray:
        if isinstance(v, dict):
            unknown = set(v) - {"re", "im"}
            if unknown:
                self.fail(f"unknown matrix keys {sorted(unknown)}", path)
            re_ = self._real_matrix(v.get("re"), path)
            im_ = self._real_matrix(v.get("im"), path) if "im" in v else np.zeros_like(re_)
            if re_.shape != im_.shape:
                self.fail("re and im parts have different shapes", path)
            return re_ + 1j * im_
        return self._real_matrix(v, path).astype(complex)

    def _real_matrix(self, v, path: str) -> np.ndarray:
        if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
            self.fail("matrix must be a nonempty list of rows", path)
        if len({len(r) for r in v}) != 1:
            self.fail("matrix rows have unequal lengths", path)
        try:
            arr = np.array(v, dtype=float)
        except (TypeError, ValueError):
            self.fail("matrix entries must be numbers", path)
        return arr


def _field(rd: _Reader, name: str) -> tuple[FieldSpec, object]:
    tab = rd.table(name)
    rd.known(tab, name, {"omega", "angle", "phase_plus", "phase_minus", "components", "envelope"})
    omega = rd.number(tab, "omega", f"{name}.omega", nonneg=True)
    if "components" in tab:
        if "angle" in tab:
            rd.fail("give either 'angle' or 'components', not both", f"{name}.components")
        comps = tab["components"]
        if not isinstance(comps, dict):
            rd.fail("'components' must be a table", f"{name}.components")
        bad = set(comps) - {"sigma_minus", "pi", "sigma_plus"}
        if bad:
            rd.fail(f"unknown polarization components {sorted(bad)}", f"{name}.components")
        vals = []
        for key in ("sigma_minus", "pi", "sigma_plus"):
            v = comps.get(key, [0.0, 0.0])
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                v = [v, 0.0]
            a, b = rd.pair(v, f"{name}.components")
            vals.append(complex(a, b))
        try:
            fs = FieldSpec.from_components(omega, *vals)
        except ValueError as exc:
            rd.fail(str(exc), f"{name}.components")
    else:
        angle = rd.number(tab, "angle", f"{name}.angle")
        fs = FieldSpec.from_angles(omega, angle, rd.number(tab, "phase_plus", f"{name}.phase_plus", 0.0),
                                   rd.number(tab, "phase_minus", f"{name}.phase_minus", 0.0))
    env = tab.get("envelope")
    if not isinstance(env, dict):
        rd.fail(f"[{name}] needs an 'envelope' table", f"{name}.envelope" if "envelope" in tab else name)
    envelope = _field_envelope(rd, env, f"{name}.envelope")
    return fs, envelope


def _state_index(rd: _Reader, ref: dict, labels, sizes, path: str) -> StateRef:
    if not isinstance(ref, dict):
        rd.fail("state reference must be a table with 'manifold' and 'M' or 'index'", path)
    man = ref.get("manifold")
    if man not in ("g", "e", "f"):
        rd.fail(f"manifold must be 'g', 'e' or 'f', got {man!r}", path)
    k = "gef".index(man)
    if "M" in ref:
        if labels is None:
            rd.fail("'M' references need a J-based linkage; use 'index'", path)
        M = ref["M"]
        if isinstance(M, bool) or not isinstance(M, (int, float)):
            rd.fail(f"M must be a number, got {M!r}", path)
        matches = [i for i, m in enumerate(labels[k]) if abs(m - M) < 1e-9]
        if not matches:
            rd.fail(f"M={M} does not exist in manifold {man} (M in {list(labels[k])})", path)
        return StateRef(man, matches[0])
    if "index" in ref:
        i = ref["index"]
        if isinstance(i, bool) or not isinstance(i, int) or not 0 <= i < sizes[k]:
            rd.fail(f"index must be an integer in [0, {sizes[k]})", path)
        return StateRef(man, i)
    rd.fail("state reference needs 'M' or 'index'", path)


def _initial(rd: _Reader, pair: CouplingPair) -> tuple[np.ndarray, str]:
    tab = rd.table("initial")
    sizes = pair.sizes
    N = sum(sizes)
    offs = {"g": 0, "e": sizes[0], "f": sizes[0] + sizes[1]}
    labels = pair.labels
    rd.known(tab, "initial", {"kind", "amplitudes", "normalize", "populations", "coherences"})
    kind = tab.get("kind", "pure")

    def flat(ref: StateRef) -> int:
        return offs[ref.manifold] + ref.index

    if kind == "pure":
        amps = tab.get("amplitudes")
        if not isinstance(amps, list) or not amps:
            rd.fail("pure initial state needs a nonempty 'amplitudes' list", "initial.amplitudes")
        psi = np.zeros(N, dtype=complex)
        for a in amps:
            i = flat(_state_index(rd, a, labels, sizes, "initial.amplitudes"))
            psi[i] += complex(rd.number(a, "re", "initial.amplitudes", 0.0), rd.number(a, "im", "initial.amplitudes", 0.0))
        norm = np.vdot(psi, psi).real
        if abs(norm - 1) > 1e-9:
            if tab.get("normalize", False) and norm > 0:
                psi /= np.sqrt(norm)
            else:
                rd.fail(f"initial state is not normalized (norm^2 = {norm:.12g}); "
                        "set normalize = true to rescale", "initial.amplitudes")
        return psi, "pure"
    if kind == "mixed":
        pops = tab.get("populations")
        if not isinstance(pops, list) or not pops:
            rd.fail("mixed initial state needs a nonempty 'populations' list", "initial.populations")
        rho = np.zeros((N, N), dtype=complex)
        for p in pops:
            i = flat(_state_index(rd, p, labels, sizes, "initial.populations"))
            rho[i, i] += rd.number(p, "value", "initial.populations", nonneg=True)
        for c in tab.get("coherences", []):
            path = "initial.coherences"
            if not isinstance(c, dict):
                rd.fail("coherence entries must be tables", path)
            i = flat(_state_index(rd, c.get("a"), labels, sizes, path))
            j = flat(_state_index(rd, c.get("b"), labels, sizes, path))
            if i == j:
                rd.fail("a coherence needs two different states", path)
            v = complex(rd.number(c, "re", path, 0.0), rd.number(c, "im", path, 0.0))
            rho[i, j] += v
            rho[j, i] += np.conj(v)
        tr = np.trace(rho).real
        if abs(tr - 1) > 1e-9:
            rd.fail(f"populations must sum to 1 (got {tr:.12g})", "initial.populations")
        if np.linalg.eigvalsh(rho).min() < -1e-12:
            rd.fail("density matrix is not positive semidefinite", "initial.coherences")
        return rho, "mixed"
    rd.fail(f"initial kind must be 'pure' or 'mixed', got {kind!r}", "initial.kind")


def parse_scenario(text: str, path: str | None = None) -> Scenario:
    """Parse and validate scenario text.

    Raises
    ------
    ScenarioError
        On TOML syntax errors or invalid content; the message starts with
        ``path:line:`` when the location is known.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ScenarioError(f"TOML syntax error: {exc}", int(m.group(1)) if m else None, path) from None
    return parse_data(data, text, path)


def parse_data(data: dict, text: str = "", path: str | None = None) -> Scenario:
    """Validate an already-decoded scenario table; ``text`` is used only for line numbers."""
    rd = _Reader(data, text, path)
    for k in data:
        if k not in _TOP_KEYS:
            rd.fail(f"unknown top-level key '{k}'", k)

    link = rd.table("linkage")
    rd.known(link, "linkage", {"J", "reduced_matrix_elements", "P", "S"})
    spec = None
    if "J" in link:
        if "P" in link or "S" in link:
            rd.fail("give either J or explicit P/S matrices, not both", "linkage.J")
        J = link["J"]
        if not isinstance(J, list) or len(J) != 3 or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                                              for x in J):
            rd.fail("J must be a list of three angular momenta [J_g, J_e, J_f]", "linkage.J")
        pump_fs, pump_env = _field(rd, "pump")
        stokes_fs, stokes_env = _field(rd, "stokes")
        red = link.get("reduced_matrix_elements", [1.0, 1.0])
        if not isinstance(red, list) or len(red) != 2:
            rd.fail("reduced_matrix_elements must hold two numbers", "linkage.reduced_matrix_elements")
        try:
            spec = LinkageSpec(J[0], J[1], J[2], pump_fs, stokes_fs, tuple(complex(x) for x in red))
            for j in J:
                m_values(j)
        except (ValueError, TypeError) as exc:
            rd.fail(str(exc), "linkage.J")
        pair = build_couplings(spec)
    elif "P" in link and "S" in link:
        P = rd.matrix(link["P"], "linkage.P")
        S = rd.matrix(link["S"], "linkage.S")
        try:
            pair = CouplingPair(P, S)
        except ValueError as exc:
            rd.fail(str(exc), "linkage.S")
        # explicit matrices hold half Rabi frequencies; the field tables give
        # only envelopes (omega, if present, scales the matrix)
        scales = []
        envs = []
        for name in ("pump", "stokes"):
            tab = rd.table(name)
            for k in tab:
                if k not in ("omega", "envelope"):
                    rd.fail(f"explicit-matrix linkages accept only 'omega' and 'envelope' in [{name}]",
                            f"{name}.{k}")
            scales.append(rd.number(tab, "omega", f"{name}.omega", 1.0, nonneg=True))
            env = tab.get("envelope")
            if not isinstance(env, dict):
                rd.fail(f"[{name}] needs an 'envelope' table", name)
            envs.append(_field_envelope(rd, env, f"{name}.envelope"))
        pair = CouplingPair(pair.P * scales[0], pair.S * scales[1])
        pump_env, stokes_env = envs
    else:
        rd.fail("[linkage] needs either J = [J_g, J_e, J_f] or both P and S", "linkage")

    detuning = rd.number(data, "detuning", "detuning", 0.0)
    initial, kind = _initial(rd, pair)

    integ = rd.table("integration", required=False)
    rd.known(integ, "integration", {"window", "rtol", "atol", "points", "max_evaluations"})
    window = None
    if "window" in integ:
        window = rd.pair(integ["window"], "integration.window")
        if not window[1] > window[0]:
            rd.fail("window must be increasing", "integration.window")
    rtol = rd.number(integ, "rtol", "integration.rtol", DEFAULT_RTOL, positive=True)
    atol = rd.number(integ, "atol", "integration.atol", DEFAULT_ATOL, positive=True)
    points = int(rd.number(integ, "points", "integration.points", 401, positive=True))
    max_ev = int(rd.number(integ, "max_evaluations", "integration.max_evaluations",
                           DEFAULT_MAX_EVALUATIONS, positive=True))
    if points < 2:
        rd.fail("points must be at least 2", "integration.points")

    ana = rd.table("analysis", required=False)
    rd.known(ana, "analysis", {"zero_tol", "adiabaticity_threshold", "adiabaticity_window", "adiabaticity_points"})
    zero_tol = rd.number(ana, "zero_tol", "analysis.zero_tol", DEFAULT_ZERO_TOL, positive=True)
    thr = rd.number(ana, "adiabaticity_threshold", "analysis.adiabaticity_threshold", 0.1, positive=True)
    awin = None
    if "adiabaticity_window" in ana:
        awin = rd.pair(ana["adiabaticity_window"], "analysis.adiabaticity_window")
        if not awin[1] > awin[0]:
            rd.fail("adiabaticity_window must be increasing", "analysis.adiabaticity_window")
    apts = int(rd.number(ana, "adiabaticity_points", "analysis.adiabaticity_points", 401, positive=True))
    if apts < 3:
        rd.fail("adiabaticity_points must be at least 3", "analysis.adiabaticity_points")

    out = rd.table("outputs", required=False)
    rd.known(out, "outputs", {"formats"})
    formats = out.get("formats", list(_OUTPUT_KINDS))
    if not isinstance(formats, list) or any(f not in _OUTPUT_KINDS for f in formats):
        rd.fail(f"outputs.formats must be a list drawn from {list(_OUTPUT_KINDS)}", "outputs.formats")

    name = data.get("name", Path(path).stem if path else "scenario")
    if not isinstance(name, str) or not name:
        rd.fail("name must be a nonempty string", "name")
    return Scenario(name, pair, pump_env, stokes_env, detuning, initial, kind, spec,
                    str(data.get("description", "")), window, rtol, atol, points, max_ev, zero_tol,
                    thr, awin, apts, tuple(formats), path, data)


def _field_envelope(rd: _Reader, env: dict, path: str):
    shape = env.get("shape", "gaussian")
    if shape == "gaussian":
        return GaussianPulse(rd.number(env, "center", path), rd.number(env, "width", path, positive=True))
    if shape == "tabulated":
        try:
            return TabulatedPulse(env.get("times"), env.get("values"))
        except (ValueError, TypeError) as exc:
            rd.fail(f"tabulated envelope: {exc}", path)
    rd.fail(f"unknown envelope shape {shape!r} (expected 'gaussian' or 'tabulated')", path)


def read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", None, str(path)) from None


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    return parse_scenario(read_text(path), str(path))


def bundled_dir() -> Path:
    return Path(__file__).with_name("scenarios")


def bundled_scenarios() -> dict[str, Path]:
    """Names and paths of the scenario files shipped with the package."""
    return {p.stem: p for p in sorted(bundled_dir().glob("*.toml"))}


def resolve(name_or_path) -> Path:
    """A path as given, or the bundled scenario of that name."""
    p = Path(name_or_path)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    if str(name_or_path) in bundled:
        return bundled[str(name_or_path)]
    raise ScenarioError(f"no such scenario file or bundled scenario: {name_or_path}")
