"""Command-line front end.

Verbs
-----
analyze       feasibility verdict, MS decompositions and dark-state count
run           analysis plus full time integration and adiabaticity report
sweep         run several scenarios (or one scenario over a parameter list) in parallel
oracle-check  compare the closed-form references with the numerical pipeline

Exit status: 0 on success, 1 on a numerical failure, 2 on a usage or
scenario error (in which case nothing is written).
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .adiabatic_basis import classify, dark_states, feasibility
from .adiabaticity import adiabaticity_scan
from .errors import DegStirapError, ScenarioError
from .linkage import decompose_subsystems
from .morris_shore import ms_decompose, pump_side_ms, second_stage_ms, split_pump_blocks
from .propagator import DarkSubspaceWarning, adiabatic_transfer, fidelity, integrate, populations
from .scenario import Scenario, load_scenario, parse_data, read_text, resolve

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _ms_summary(dec) -> dict:
    return {
        "shape": list(dec.shape),
        "structure": dec.structure,
        "sigma": [float(x) for x in dec.sigma],
        "rank": int(dec.rank),
        "null_count": int(dec.null_count),
        "uncoupled_rows": list(dec.uncoupled_rows),
        "uncoupled_cols": list(dec.uncoupled_cols),
    }


def analysis_report(sc: Scenario) -> dict:
    """Feasibility, MS and dark-state summary of a scenario (no integration)."""
    pair = sc.couplings
    tol = sc.zero_tol
    target = sc.linkage_spec if sc.linkage_spec is not None else pair
    verdict = feasibility(target, zero_tol=tol)
    stokes = ms_decompose(pair.S, tol)
    pump = pump_side_ms(pair.P, tol)
    second = None
    if stokes.uncoupled_rows and pair.sizes[0]:
        sec = second_stage_ms(*split_pump_blocks(pair.P, stokes), tol)
        second = {"case": sec.case, "pi": [float(x) for x in sec.pi_values],
                  "pi_null_count": int(sec.pi_null_count)}
    fam = dark_states(pair, zero_tol=tol)
    subs = []
    for sub in decompose_subsystems(pair):
        entry = {"sizes": list(sub.sizes), "g": list(sub.g), "e": list(sub.e), "f": list(sub.f)}
        if sub.pair.labels is not None:
            entry["M"] = {k: [float(m) for m in lab] for k, lab in zip("gef", sub.pair.labels)}
        subs.append(entry)
    return {
        "scenario": sc.name,
        "version": __version__,
        "sizes": list(pair.sizes),
        "case": classify(pair.sizes),
        "feasibility": verdict.to_dict(),
        "ms": {"stokes": _ms_summary(stokes), "pump": _ms_summary(pump), "second_stage": second},
        "dark_states": {"count": fam.count, "parameterized": fam.parameterized_count,
                        "trapped_g": fam.trapped_count,
                        "constant_f": fam.constants.shape[1] - fam.trapped_count,
                        "notes": list(fam.notes)},
        "subsystems": subs,
        "zero_tol": tol,
    }


def run_pipeline(sc: Scenario, adiabaticity: bool = True):
    """Full pipeline.  Returns (report dict, Trajectory or None, exit code)."""
    report = analysis_report(sc)
    report["status"] = "ok"
    H = sc.hamiltonian()
    window = sc.integration_window()
    report["window"] = [float(window[0]), float(window[1])]
    fam = dark_states(sc.couplings, zero_tol=sc.zero_tol)
    code = EXIT_OK

    if adiabaticity:
        awin = sc.adiabaticity_window or window
        grid = np.linspace(awin[0], awin[1], sc.adiabaticity_points)
        try:
            rep = adiabaticity_scan(fam, None, H, grid, threshold=sc.adiabaticity_threshold,
                                    zero_tol=max(sc.zero_tol, 1e-9))
            report["adiabaticity"] = rep.to_dict()
            report["adiabaticity"]["window"] = [float(awin[0]), float(awin[1])]
        except DegStirapError as exc:
            report["adiabaticity"] = {"error": str(exc)}
            report["status"] = "partial"
            code = EXIT_NUMERICAL

    try:
        traj = integrate(H, sc.initial, window=window, rtol=sc.rtol, atol=sc.atol,
                         n_points=sc.points, max_evaluations=sc.max_evaluations)
    except DegStirapError as exc:
        report["status"] = "failed"
        report["propagation"] = {"error": str(exc)}
        return report, None, EXIT_NUMERICAL

    U = adiabatic_transfer(fam, H, *window)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DarkSubspaceWarning)
        pred = U.apply(sc.initial)
    pg, pe, pf = traj.final_populations
    report["propagation"] = {
        "kind": traj.kind,
        "final_populations": {"g": pg, "e": pe, "f": pf},
        "norm_drift": traj.norm_drift,
        "stats": traj.to_dict()["stats"],
        "adiabatic_prediction": {
            "initial_dark_residual": U.residual(sc.initial),
            "fidelity": fidelity(pred, traj.final),
            "final_populations": dict(zip("gef", _pops(pred, sc.sizes))),
        },
    }
    return report, traj, code


def _pops(state, sizes):
    return [float(x) for x in populations(state, sizes)]


def _write_outputs(sc: Scenario, outdir: Path, report: dict, traj, formats) -> list[str]:
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    p = outdir / f"{sc.name}_report.json"
    p.write_text(_dump(report))
    written.append(str(p))
    if traj is not None:
        if "csv" in formats:
            p = outdir / f"{sc.name}_trajectory.csv"
            traj.to_csv(p)
            written.append(str(p))
        if "json" in formats:
            p = outdir / f"{sc.name}_trajectory.json"
            p.write_text(traj.to_json() + "\n")
            written.append(str(p))
    return written


def _apply_overrides(sc_path: Path, overrides: list[str]) -> Scenario:
    sc = load_scenario(sc_path)
    if not overrides:
        return sc
    data = copy.deepcopy(sc.raw)
    for item in overrides:
        key, value = _split_assignment(item)
        _set_dotted(data, key, value)
    return parse_data(data, read_text(sc_path), str(sc_path))


def _split_assignment(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ScenarioError(f"override {item!r} must look like key.path=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _set_dotted(data: dict, key: str, value):
    parts = key.split(".")
    cur = data
    for part in parts[:-1]:
        nxt = cur.setdefault(part, {})
        if not isinstance(nxt, dict):
            raise ScenarioError(f"override path {key!r} does not name a table entry")
        cur = nxt
    cur[parts[-1]] = value


def _apply_cli_tolerances(sc: Scenario, args) -> Scenario:
    changes = {}
    for name in ("rtol", "atol", "zero_tol"):
        v = getattr(args, name, None)
        if v is not None:
            if not v > 0:
                raise ScenarioError(f"--{name.replace('_', '-')} must be positive")
            changes[name] = v
    if getattr(args, "points", None) is not None:
        if args.points < 2:
            raise ScenarioError("--points must be at least 2")
        changes["points"] = args.points
    if getattr(args, "format", None):
        changes["outputs"] = tuple(args.format)
    return sc.replace(**changes) if changes else sc


# ---------------------------------------------------------------- verbs

def cmd_analyze(args) -> int:
    scenarios = [_apply_cli_tolerances(load_scenario(resolve(s)), args) for s in args.scenario]
    results = [analysis_report(sc) for sc in scenarios]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for sc, res in zip(scenarios, results):
            (out / f"{sc.name}_analysis.json").write_text(_dump(res))
    for res in results:
        if args.quiet:
            continue
        if args.text:
            f = res["feasibility"]
            print(f"{res['scenario']}: {f['label']} (N_D={f['N_D']}, uncoupled g={f['uncoupled_g_count']}, "
                  f"null sigma={f['null_sigma_count']})")
        else:
            sys.stdout.write(_dump(res))
    return EXIT_OK


def cmd_run(args) -> int:
    sc = _apply_cli_tolerances(_apply_overrides(resolve(args.scenario), args.set or []), args)
    report, traj, code = run_pipeline(sc, adiabaticity=not args.no_adiabaticity)
    out = Path(args.out) if args.out else Path(".")
    written = _write_outputs(sc, out, report, traj, sc.outputs)
    if not args.quiet:
        prop = report.get("propagation", {})
        fp = prop.get("final_populations")
        msg = f"{sc.name}: {report['feasibility']['label']}"
        if fp:
            msg += f"; final P_g={fp['g']:.6g} P_e={fp['e']:.6g} P_f={fp['f']:.6g}"
        if report["status"] != "ok":
            msg += f"; status={report['status']}"
        print(msg)
        for w in written:
            print(f"  wrote {w}")
    return code


def _sweep_job(job):
    path, overrides, outdir, adiabaticity, name = job
    try:
        sc = _apply_overrides(Path(path), overrides)
        if name:
            sc = sc.replace(name=name)
        report, traj, code = run_pipeline(sc, adiabaticity=adiabaticity)
        _write_outputs(sc, Path(outdir), report, traj, sc.outputs)
        fp = report.get("propagation", {}).get("final_populations")
        return {"name": sc.name, "exit": code, "status": report["status"], "final_populations": fp}
    except ScenarioError as exc:
        return {"name": name or Path(path).stem, "exit": EXIT_USAGE, "status": "invalid", "error": str(exc)}
    except DegStirapError as exc:
        return {"name": name or Path(path).stem, "exit": EXIT_NUMERICAL, "status": "failed", "error": str(exc)}


def _tolerance_overrides(args) -> list[str]:
    out = []
    for flag, key in (("rtol", "integration.rtol"), ("atol", "integration.atol"),
                      ("points", "integration.points"), ("zero_tol", "analysis.zero_tol")):
        v = getattr(args, flag, None)
        if v is not None:
            out.append(f"{key}={json.dumps(v)}")
    if args.format:
        out.append(f"outputs.formats={json.dumps(args.format)}")
    return out


def cmd_sweep(args) -> int:
    paths = [resolve(s) for s in args.scenario]
    if args.workers < 1:
        raise ScenarioError("--workers must be at least 1")
    args.set = (args.set or []) + _tolerance_overrides(args)
    jobs = []
    if args.vary:
        if len(paths) != 1:
            raise ScenarioError("--vary needs exactly one scenario")
        key, values = _split_assignment(args.vary)
        if not isinstance(values, list) or not values:
            raise ScenarioError("--vary expects key=[v1, v2, ...]")
        base = load_scenario(paths[0])
        for i, v in enumerate(values):
            ov = list(args.set or []) + [f"{key}={json.dumps(v)}"]
            jobs.append((str(paths[0]), ov, args.out, not args.no_adiabaticity, f"{base.name}_{i:03d}"))
    else:
        for p in paths:
            jobs.append((str(p), list(args.set or []), args.out, not args.no_adiabaticity, None))
    # validate everything up front so a bad input writes nothing
    for path, ov, *_ in jobs:
        _apply_overrides(Path(path), ov)
    if args.workers == 1:
        results = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    summary = {"version": __version__, "runs": results}
    Path(args.out).mkdir(parents=True, exist_ok=True)
    (Path(args.out) / "sweep_summary.json").write_text(_dump(summary))
    if not args.quiet:
        for r in results:
            print(f"{r['name']}: {r['status']}")
    return max((r["exit"] for r in results), default=EXIT_OK)


def cmd_oracle_check(args) -> int:
    from .oracle_check import run_checks
    res = run_checks(points=args.points, seed=args.seed)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "oracle_check.json").write_text(_dump(res))
    if not args.quiet:
        for name, c in sorted(res["checks"].items()):
            print(f"{'PASS' if c['passed'] else 'FAIL'}  {name}: max error {c['max_error']:.3e} "
                  f"(tolerance {c['tolerance']:.1e})")
    return EXIT_OK if res["passed"] else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="degstirap", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def tolerances(p):
        p.add_argument("--zero-tol", dest="zero_tol", type=float, help="relative threshold for vanishing MS Rabi frequencies")
        p.add_argument("-q", "--quiet", action="store_true")

    a = sub.add_parser("analyze", help="feasibility and MS report (no integration)")
    a.add_argument("scenario", nargs="+", help="scenario file or bundled scenario name")
    a.add_argument("-o", "--out", help="directory for <name>_analysis.json")
    a.add_argument("--text", action="store_true", help="one summary line per scenario instead of JSON")
    tolerances(a)

    def run_opts(p):
        p.add_argument("--rtol", type=float)
        p.add_argument("--atol", type=float)
        p.add_argument("--points", type=int, help="number of output time samples")
        p.add_argument("--format", action="append", choices=["csv", "json"],
                       help="trajectory format(s) to write (repeatable)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a scenario entry, e.g. pump.omega=40 (value parsed as JSON)")
        p.add_argument("--no-adiabaticity", action="store_true", help="skip the adiabaticity scan")
        tolerances(p)

    r = sub.add_parser("run", help="analyze and integrate one scenario")
    r.add_argument("scenario")
    r.add_argument("-o", "--out", help="output directory (default: current directory)")
    run_opts(r)

    s = sub.add_parser("sweep", help="run scenarios in parallel worker processes")
    s.add_argument("scenario", nargs="+")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("-j", "--workers", type=int, default=2)
    s.add_argument("--vary", metavar="KEY=[v1,...]", help="run one scenario once per listed value")
    run_opts(s)

    o = sub.add_parser("oracle-check", help="compare closed-form references with numerics")
    o.add_argument("--points", type=int, default=100, help="angles per grid")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("-o", "--out")
    o.add_argument("-q", "--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    handler = {"analyze": cmd_analyze, "run": cmd_run, "sweep": cmd_sweep,
               "oracle-check": cmd_oracle_check}[args.command]
    try:
        return handler(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegStirapError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
