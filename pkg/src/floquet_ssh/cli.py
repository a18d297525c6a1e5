"""Command-line front end.

Exit codes: 0 success, 2 invalid input (scenario, flags, export kind),
3 numerical failure inside the pipeline.
"""

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import scipy

from . import __version__
from .analysis import bond_tomography, domainwall_couplings, edge_state_spectrum, reported_bond
from .coupling import band_profile
from .dynamics import Trajectory
from .errors import ConfigError, SimulationError
from .floquet import dressed_matrix, zak_sweep
from .io import EXPORT_KINDS, csv_long, csv_wide, dumps, heatmap_svg, write_json, write_text
from .scenario import (
    ScenarioError,
    build_coupling,
    build_drive,
    config_hash,
    load_scenario,
    point_config,
    run_point,
    validate_dict,
)
from .trap import TrapConfig, solve_trap

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class InputError(Exception):
    """Problem with the command line or input files (exit code 2)."""


def _read_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")


def _scenario_dict(path):
    d = _read_json(path)
    # a manifest embeds the scenario it was produced from
    if isinstance(d, dict) and "scenario" in d and "config_sha256" in d:
        d = d["scenario"]
    return d


def _apply_overrides(d, args):
    d = dict(d)
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    if getattr(args, "tol", None) is not None:
        d["tol"] = args.tol
    return d


def _load(args):
    d = _apply_overrides(_scenario_dict(args.config), args)
    return load_scenario(d)


def _out_dir(args, default):
    out = args.out or default
    os.makedirs(out, exist_ok=True)
    return out


# ------------------------------------------------------------------ verbs


def cmd_modes(args):
    d = _read_json(args.config)
    t = d.get("trap", d) if isinstance(d, dict) else {}
    if isinstance(d, dict) and "coupling" in d:
        t = d["coupling"].get("trap", {})
    try:
        trap = TrapConfig.from_cyclic(t["n_ions"], t["com_radial_mhz"], t["axial_c2"], t["axial_c4"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"trap block needs n_ions, com_radial_mhz, axial_c2, axial_c4 ({exc})")
    spec = solve_trap(trap)
    text = dumps(spec.to_dict())
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_coupling(args):
    sc = _load(args)
    cm = build_coupling(sc.raw["coupling"])
    out = _out_dir(args, "coupling_out")
    write_json(os.path.join(out, "coupling.json"), cm.to_dict())
    write_text(os.path.join(out, "coupling.csv"), cm.to_csv())
    return EXIT_OK


def cmd_dress(args):
    sc = _load(args)
    cm = build_coupling(sc.raw["coupling"])
    dm = dressed_matrix(cm, build_drive(sc.raw.get("drive"), cm))
    out = _out_dir(args, "dress_out")
    write_json(os.path.join(out, "dressed.json"), dm.to_dict())
    write_text(os.path.join(out, "dressed.csv"), dm.to_csv())
    zs = sc.raw.get("zak_sweep")
    if zs:
        rows = zak_sweep(band_profile(cm) / cm.j_ref,
                         [p * math.pi for p in zs.get("phi_over_pi", [0.75])],
                         zs.get("eta_bar", [1.0]), n_k=zs.get("n_k", 2000))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phi", "eta_bar", "zak_phase", "min_gap"])
        for r in rows:
            w.writerow([repr(float(x)) for x in r])
        write_text(os.path.join(out, "zak_sweep.csv"), buf.getvalue())
    return EXIT_OK


def _write_trajectory(directory, traj, stem="trajectory"):
    write_text(os.path.join(directory, stem + ".csv"), traj.to_csv())
    write_json(os.path.join(directory, stem + ".json"), traj.metadata)


def cmd_evolve(args):
    sc = _load(args)
    axis, value = sc.points()[0]
    traj, analysis = run_point(point_config(sc.raw, axis, value))
    out = _out_dir(args, "evolve_out")
    _write_trajectory(out, traj)
    if analysis:
        write_json(os.path.join(out, "analysis.json"), analysis)
    return EXIT_OK


def cmd_tomography(args):
    sc = _load(args)
    cm = build_coupling(sc.raw["coupling"])
    drive = build_drive(sc.raw.get("drive"), cm)
    tomo = sc.raw.get("tomography", {})
    bonds = tomo.get("bonds") or [[j, j + 1] for j in range(1, cm.size)]
    rows = []
    for i, j in bonds:
        fit = bond_tomography(cm, drive, i, j, tau_max=tomo.get("tau_max", 3.0),
                              tol=sc.raw.get("tol", 1e-10))
        rec = fit.to_dict()
        rec["j_rep_expected"] = reported_bond(dressed_matrix(cm, drive).values[i - 1, j - 1])
        rows.append(rec)
    out = _out_dir(args, "tomography_out")
    write_json(os.path.join(out, "tomography.json"), {"bonds": rows, "j_ref_rad_s": cm.j_ref})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "j_fit", "gamma_fit", "residual_rms", "suppressed"])
    for r in rows:
        w.writerow([r["sites"][0], r["sites"][1], repr(r["j_fit"]), repr(r["gamma_fit"]),
                    repr(r["residual_rms"]), int(r["suppressed"])])
    write_text(os.path.join(out, "tomography.csv"), buf.getvalue())
    return EXIT_OK


def cmd_spectrum(args):
    sc = _load(args)
    cm = build_coupling(sc.raw["coupling"])
    dm = dressed_matrix(cm, build_drive(sc.raw.get("drive"), cm))
    out = _out_dir(args, "spectrum_out")
    rec = {"edge_spectrum": edge_state_spectrum(dm).to_dict()}
    if dm.size % 2 == 0:
        rec["domain_wall"] = domainwall_couplings(dm).to_dict()
    write_json(os.path.join(out, "spectrum.json"), rec)
    return EXIT_OK


def cmd_validate(args):
    try:
        d = _apply_overrides(_scenario_dict(args.config), args)
    except InputError as exc:
        print(dumps({"ok": False, "errors": [str(exc)], "warnings": []}), end="")
        return EXIT_INPUT
    rep = validate_dict(d)
    print(dumps(rep.to_dict()), end="")
    return EXIT_OK if rep.ok else EXIT_INPUT


def _point_dir_name(index, axis, value):
    if axis is None:
        return "point"
    return f"{index:03d}_{axis}={value}"


def _execute_point(task):
    raw, index, axis, value, out = task
    name = _point_dir_name(index, axis, value)
    pdir = os.path.join(out, "points", name)
    os.makedirs(pdir, exist_ok=True)
    t0 = time.perf_counter()
    try:
        traj, analysis = run_point(point_config(raw, axis, value))
    except (SimulationError, ConfigError) as exc:
        write_json(os.path.join(pdir, "failed.json"), {"error": type(exc).__name__, "message": str(exc)})
        return {"dir": name, "axis": axis, "value": value, "status": "failed",
                "error": str(exc), "seconds": time.perf_counter() - t0}
    _write_trajectory(pdir, traj)
    write_json(os.path.join(pdir, "analysis.json"), analysis)
    if raw.get("heatmap", False):
        write_text(os.path.join(pdir, "heatmap.svg"), heatmap_svg(traj, title=f"{raw['name']} {name}"))
    return {"dir": name, "axis": axis, "value": value, "status": "ok",
            "analysis": analysis, "seconds": time.perf_counter() - t0}


def _summaries(out, results):
    spread, late = [], []
    for r in results:
        a = r.get("analysis") or {}
        if "spreading_rate" in a:
            s = a["spreading_rate"]
            spread.append([r["value"], s.get("v_s", ""), s.get("ci_low", ""),
                           s.get("ci_high", ""), s["status"]])
        if "late_time" in a and "site" in a["late_time"]:
            lt = a["late_time"]
            late.append([r["value"], lt["site"], lt["s_bar_site"], lt["thermal_mean"]])
    for fname, header, rows in (
        ("spreading.csv", ["value", "v_s", "ci_low", "ci_high", "status"], spread),
        ("late_time.csv", ["value", "site", "s_bar", "thermal_mean"], late),
    ):
        if rows:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
            write_text(os.path.join(out, fname), buf.getvalue())


def cmd_run(args):
    sc = _load(args)
    out = _out_dir(args, os.path.join("runs", sc.name))
    t0 = time.perf_counter()
    tasks = [(sc.raw, k, axis, value, out) for k, (axis, value) in enumerate(sc.points())]
    workers = args.workers or os.cpu_count() or 1
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            results = list(pool.map(_execute_point, tasks))
    else:
        results = [_execute_point(t) for t in tasks]
    _summaries(out, results)
    manifest = {
        "scenario": sc.raw,
        "config_sha256": config_hash(sc.raw),
        "versions": {
            "floquet_ssh": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "points": [{"dir": r["dir"], "axis": r["axis"], "value": r["value"], "status": r["status"]}
                   for r in results],
    }
    write_json(os.path.join(out, "manifest.json"), manifest)
    # wall-clock times live apart from the manifest so that re-runs are byte-identical
    write_json(os.path.join(out, "timings.json"),
               {"total_s": time.perf_counter() - t0,
                "points": {r["dir"]: r["seconds"] for r in results}})
    failed = [r for r in results if r["status"] == "failed"]
    for r in failed:
        print(f"point {r['dir']} failed: {r['error']}", file=sys.stderr)
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_export(args):
    if args.kind not in EXPORT_KINDS:
        raise InputError(f"unknown export kind {args.kind!r}; choose from {list(EXPORT_KINDS)}")
    bundle = args.config
    manifest = _read_json(os.path.join(bundle, "manifest.json"))
    out = _out_dir(args, os.path.join(bundle, "export"))
    ext = {"heatmap_svg": ".svg", "csv_wide": ".csv", "csv_long": ".long.csv"}[args.kind]
    for p in manifest["points"]:
        if p["status"] != "ok":
            continue
        traj = Trajectory.read(os.path.join(bundle, "points", p["dir"], "trajectory"))
        if args.kind == "heatmap_svg":
            text = heatmap_svg(traj, title=f"{manifest['scenario']['name']} {p['dir']}")
        elif args.kind == "csv_wide":
            text = csv_wide(traj)
        else:
            text = csv_long(traj)
        write_text(os.path.join(out, p["dir"] + ext), text)
    return EXIT_OK


VERBS = {
    "modes": (cmd_modes, "radial mode spectrum of a trap (JSON)"),
    "coupling": (cmd_coupling, "bare coupling matrix of a scenario"),
    "dress": (cmd_dress, "Floquet-dressed coupling matrix (and optional Zak sweep)"),
    "evolve": (cmd_evolve, "single trajectory of a scenario"),
    "tomography": (cmd_tomography, "two-ion bond tomography fits"),
    "spectrum": (cmd_spectrum, "edge-state spectrum and domain-wall couplings"),
    "run": (cmd_run, "full scenario run with scans, manifest and summaries"),
    "validate": (cmd_validate, "schema and physics checks without running"),
    "export": (cmd_export, "export plot data from a run bundle"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="floquet-ssh", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, (_, helptext) in VERBS.items():
        p = sub.add_parser(verb, help=helptext)
        p.add_argument("--config", required=True, metavar="PATH",
                       help="bundle directory" if verb == "export" else "scenario or manifest JSON")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--workers", type=int, metavar="N")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--tol", type=float, metavar="FLOAT")
        if verb == "export":
            p.add_argument("--kind", required=True)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    func = VERBS[args.verb][0]
    try:
        return func(args)
    except ScenarioError as exc:
        for e in exc.report.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SimulationError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
