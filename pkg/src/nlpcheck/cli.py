"""Command-line analysis driver and report serialization.

``nlpcheck analyze`` loads a problem (file path or ``builtin:NAME``),
evaluates the candidate point, runs every check, and prints a short
summary.  ``--json`` writes the full machine-readable report; ``--csv-dir``
writes one CSV of arc samples per traced arc.  The JSON report is
deterministic: fixed key order, floats at 17 significant digits, and no
wall-clock content (timing goes to stdout only), so identical
configurations produce byte-identical files.

Exit codes: 0 when the analysis completed (whatever the verdicts), 2 for
input errors, 3 for internal numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from nlpcheck import arc as arc_mod
from nlpcheck import cones, cq, kkt
from nlpcheck._version import __version__
from nlpcheck.expr import DomainError
from nlpcheck.model import Problem, ProblemError, evaluate_point, feasibility, load_problem
from nlpcheck.problems import builtin_names, builtin_source

__all__ = [
    "InputError",
    "RunConfig",
    "run",
    "report_to_json",
    "emit_plot_data",
    "main",
]


class InputError(Exception):
    """Unusable input: missing file, malformed problem, bad point."""


@dataclass
class RunConfig:
    """Everything one analysis run depends on.

    ``problem`` is a path or ``builtin:NAME``.  ``arc_dirs`` lists explicit
    arc directions; when empty, ``arc_sample`` directions are sampled from
    the linearized cone with ``seed``.
    """

    problem: str
    point: np.ndarray | None = None
    seed: int = 0
    radii: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    samples: int = 64
    tol_rank: float = 1e-8
    tol_active: float = 1e-8
    tol_dir: float = 1e-8
    newton_tol: float = 1e-12
    verify_tol: float = 1e-7
    arc_dirs: tuple = ()
    arc_sample: int = 8
    arc_points: int = 41
    delta: float = 0.1
    json_path: str | None = None
    csv_dir: str | None = None


def _load(config: RunConfig) -> tuple[str, Problem]:
    ref = config.problem
    if ref.startswith("builtin:"):
        name = ref[len("builtin:") :]
        try:
            text = builtin_source(name)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    else:
        try:
            with open(ref, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read problem file {ref!r}: {exc}") from exc
    try:
        return ref, load_problem(text)
    except ProblemError as exc:
        raise InputError(f"problem {ref!r}: {exc}") from exc


def _verdict_dict(v: cq.Verdict) -> dict:
    return {
        "status": v.status,
        "certificate": v.certificate,
        "evidence": v.evidence,
    }


def _arc_entry(rep: arc_mod.DirectionArcReport) -> dict:
    entry: dict = {"direction": [float(v) for v in rep.direction]}
    if rep.error is not None:
        entry["error"] = rep.error
        return entry
    entry["pinned_ineq"] = list(rep.pinned.ineq) if rep.pinned else []
    entry["chart"] = rep.chart_summary
    a = rep.arc
    entry["delta_used"] = a.delta
    entry["truncated"] = a.truncated
    if a.note:
        entry["note"] = a.note
    props = {}
    for name, check in rep.properties.checks.items():
        props[name] = {
            "passed": check.passed,
            "worst_residual": check.worst,
            "detail": check.detail,
        }
    entry["properties"] = props
    entry["passed_all"] = rep.properties.passed_all()
    entry["samples"] = {
        "t": [float(v) for v in a.t],
        "zeta": [[float(v) for v in row] for row in a.points],
        "g": [[float(v) for v in row] for row in a.g_values],
        "h": [[float(v) for v in row] for row in a.h_values],
    }
    return entry


def run(config: RunConfig) -> dict:
    """Run the full analysis and return the report as an ordered dict."""
    ref, problem = _load(config)
    if config.point is not None:
        x = np.asarray(config.point, dtype=float)
    elif problem.point is not None:
        x = problem.point
    else:
        raise InputError(
            "no candidate point: give one with --point or a 'point' line"
        )
    if x.shape != (problem.n,):
        raise InputError(f"point must have {problem.n} coordinates, got {x.size}")

    report: dict = {
        "tool": "nlpcheck",
        "version": __version__,
        "problem": {
            "reference": ref,
            "n": problem.n,
            "m": problem.m,
            "p": problem.p,
            "source": problem.source,
        },
        "point": [float(v) for v in x],
        "seed": config.seed,
        "tolerances": {
            "rank": config.tol_rank,
            "active": config.tol_active,
            "direction": config.tol_dir,
            "newton": config.newton_tol,
            "verify": config.verify_tol,
        },
    }

    try:
        feas = feasibility(problem, x, config.tol_active)
    except DomainError as exc:
        raise InputError(f"point outside the problem domain: {exc}") from exc
    report["feasibility"] = {
        "feasible": feas.feasible,
        "max_ineq_violation": feas.max_ineq_violation,
        "max_eq_violation": feas.max_eq_violation,
        "tol": feas.tol,
    }
    if not feas.feasible:
        reason = "point is infeasible at tolerance; first-order analysis skipped"
        report["active_set"] = {"skipped": reason}
        report["constraint_qualifications"] = {"skipped": reason}
        report["kkt"] = {"skipped": reason}
        report["ssonc"] = {"skipped": reason}
        report["arcs"] = {"skipped": reason}
        return report

    try:
        pd = evaluate_point(problem, x, config.tol_active)
    except DomainError as exc:
        raise InputError(f"point outside the problem domain: {exc}") from exc
    report["active_set"] = list(pd.active)
    report["objective_value"] = pd.f_val

    sampler = cq.NeighborhoodSampler(
        radii=tuple(config.radii),
        samples_per_radius=config.samples,
        seed=config.seed,
    )
    cqs: dict = {}
    cqs["licq"] = _verdict_dict(cq.check_licq(pd, config.tol_rank))
    cqs["mfcq"] = _verdict_dict(cq.check_mfcq(pd, config.tol_rank))
    cqs["crcq"] = _verdict_dict(
        cq.check_crcq(problem, x, sampler, config.tol_active, config.tol_rank)
    )
    cqs["rcrcq"] = _verdict_dict(
        cq.check_rcrcq(problem, x, sampler, config.tol_active, config.tol_rank)
    )
    report["constraint_qualifications"] = cqs

    ms = kkt.solve_multipliers(pd, tol=config.tol_rank)
    report["kkt"] = {
        "stationarity_residual": ms.residual,
        "is_kkt_point": ms.residual <= config.tol_rank and bool(ms.vertices),
        "vertices": [
            {"mu": [float(v) for v in mu], "lam": [float(v) for v in lam]}
            for mu, lam in ms.vertices
        ],
        "rays": [
            {"mu": [float(v) for v in mu], "lam": [float(v) for v in lam]}
            for mu, lam in ms.rays
        ],
        "bounded": ms.bounded,
        "partial": ms.partial,
        "note": ms.note,
    }
    if ms.vertices and ms.residual <= config.tol_rank:
        ss = kkt.check_ssonc(pd, ms)
        report["ssonc"] = {
            "status": ss.status,
            "results": ss.results,
            "worst": ss.worst,
            "rationale": ss.rationale,
        }
    else:
        report["ssonc"] = {
            "skipped": "not a KKT point at tolerance; SSONC does not apply"
        }

    def arc_reports_for(directions) -> list[arc_mod.DirectionArcReport]:
        return [
            arc_mod.arc_for_direction(
                problem,
                pd,
                d,
                delta=config.delta,
                samples=config.arc_points,
                tol_dir=config.tol_dir,
                tol_rank=config.tol_rank,
                newton_tol=config.newton_tol,
                verify_tol=config.verify_tol,
            )
            for d in directions
        ]

    def sampled_directions() -> list[np.ndarray]:
        cone = cones.linearized_cone(pd)
        return cones.sample_directions(
            cone, config.arc_sample, config.seed, config.tol_dir
        )

    explicit = len(config.arc_dirs) > 0
    if explicit:
        directions = [np.asarray(d, dtype=float) for d in config.arc_dirs]
    else:
        directions = sampled_directions()
    arc_reports = arc_reports_for(directions)
    report["arcs"] = {
        "delta": config.delta,
        "samples_per_arc": config.arc_points,
        "directions_explicit": explicit,
        "entries": [_arc_entry(rep) for rep in arc_reports],
    }

    # the Abadie probe always uses sampled directions so its statistics are
    # comparable across runs; without explicit --arc-dir they are the same arcs
    acq_reports = arc_reports_for(sampled_directions()) if explicit else arc_reports
    acq_evidence = cq.summarize_acq(acq_reports, requested=config.arc_sample, seed=config.seed)
    if not acq_reports:
        acq_evidence["note"] = (
            "no nonzero linearized-cone directions at the sampling tolerance; "
            "vacuously realized"
        )
    report["constraint_qualifications"]["acq"] = {
        "status": "undetermined",
        "certificate": None,
        "evidence": acq_evidence,
    }
    return report


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def _json_scalar(obj) -> str | None:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    return None


def _write_json(obj, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    scalar = _json_scalar(obj)
    if scalar is not None:
        out.append(scalar)
        return
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for k, (key, value) in enumerate(items):
            out.append(pad + "  " + json.dumps(str(key)) + ": ")
            _write_json(value, indent + 1, out)
            out.append(",\n" if k + 1 < len(items) else "\n")
        out.append(pad + "}")
        return
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        if all(_json_scalar(v) is not None for v in seq):
            out.append("[" + ", ".join(_json_scalar(v) for v in seq) + "]")
            return
        out.append("[\n")
        for k, value in enumerate(seq):
            out.append(pad + "  ")
            _write_json(value, indent + 1, out)
            out.append(",\n" if k + 1 < len(seq) else "\n")
        out.append(pad + "]")
        return
    raise TypeError(f"cannot serialize {type(obj).__name__} to the report")


def report_to_json(report: dict) -> str:
    """Deterministic JSON: insertion-ordered keys, floats at 17 significant
    digits, 2-space indent.  Identical reports serialize byte-identically."""
    out: list[str] = []
    _write_json(report, 0, out)
    out.append("\n")
    return "".join(out)


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def emit_plot_data(entry: dict, path: str) -> None:
    """Write one arc's samples as CSV: t, zeta_*, g_*, h_*.

    Values carry 17 significant digits; the file is written to a temporary
    name and atomically renamed.  Truncated arcs simply have fewer rows.
    """
    samples = entry.get("samples")
    if samples is None:
        raise ValueError("arc entry has no samples (construction failed)")
    t = samples["t"]
    zeta = samples["zeta"]
    g = samples["g"]
    h = samples["h"]
    n = len(zeta[0]) if zeta else 0
    m = len(g[0]) if g else 0
    p = len(h[0]) if h else 0
    header = (
        ["t"]
        + [f"zeta_{i + 1}" for i in range(n)]
        + [f"g_{i + 1}" for i in range(m)]
        + [f"h_{j + 1}" for j in range(p)]
    )
    lines = [",".join(header)]
    for row in range(len(t)):
        cells = [format(t[row], ".17g")]
        cells += [format(v, ".17g") for v in zeta[row]]
        cells += [format(v, ".17g") for v in g[row]]
        cells += [format(v, ".17g") for v in h[row]]
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def _summary_lines(report: dict) -> list[str]:
    lines = []
    prob = report["problem"]
    lines.append(
        f"problem {prob['reference']}: n={prob['n']}, m={prob['m']}, p={prob['p']}"
    )
    feas = report["feasibility"]
    point = ", ".join(format(v, ".6g") for v in report["point"])
    status = "feasible" if feas["feasible"] else "INFEASIBLE"
    worst = max(feas["max_ineq_violation"], feas["max_eq_violation"])
    lines.append(f"point ({point}): {status} (worst violation {worst:.3e})")
    if isinstance(report["active_set"], dict):
        lines.append(report["active_set"]["skipped"])
        return lines
    lines.append(
        "active inequalities: {"
        + ", ".join(str(i) for i in report["active_set"])
        + "}"
    )
    cqs = report["constraint_qualifications"]
    lines.append(
        "cq: "
        + "  ".join(
            f"{name}={cqs[name]['status']}"
            for name in ("licq", "mfcq", "crcq", "rcrcq", "acq")
        )
    )
    kk = report["kkt"]
    lines.append(
        f"kkt: residual {kk['stationarity_residual']:.3e}, "
        f"{len(kk['vertices'])} vertex/vertices, {len(kk['rays'])} ray(s), "
        + ("bounded" if kk["bounded"] else "unbounded or partial")
    )
    ss = report["ssonc"]
    if "skipped" in ss:
        lines.append(f"ssonc: skipped ({ss['skipped']})")
    else:
        line = f"ssonc: {ss['status']}"
        if ss["worst"] is not None:
            line += (
                f" (worst value {ss['worst']['min_value']:.6g} at "
                f"{ss['worst']['kind']} {ss['worst']['index']})"
            )
        lines.append(line)
    arcs = report["arcs"]
    entries = arcs["entries"]
    passed = sum(1 for e in entries if e.get("passed_all"))
    lines.append(
        f"arcs: {len(entries)} direction(s), {passed} passed all properties"
    )
    acq = cqs["acq"]["evidence"]
    lines.append(
        f"acq probe: {acq['realized']}/{acq['directions_sampled']} "
        "sampled directions realized by feasible arcs"
    )
    return lines


def _parse_vector(text: str, flag: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",")], dtype=float)
    except ValueError:
        raise InputError(f"{flag} expects comma-separated numbers, got {text!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlpcheck",
        description="Optimality diagnostics for smooth nonlinear programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    pa = sub.add_parser(
        "analyze",
        help="analyze a problem at a candidate point",
        description=(
            "Analyze a problem file (or builtin:NAME; available: "
            + ", ".join(builtin_names())
            + ") at a candidate point."
        ),
    )
    pa.add_argument("problem", help="problem file path, or builtin:NAME")
    pa.add_argument("--point", help="candidate point v1,...,vn (overrides the file)")
    pa.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
    pa.add_argument(
        "--radii",
        default="1e-2,1e-3,1e-4",
        help="neighborhood radii for the rank scans (default 1e-2,1e-3,1e-4)",
    )
    pa.add_argument(
        "--samples", type=int, default=64, help="samples per radius (default 64)"
    )
    pa.add_argument("--tol-rank", type=float, default=1e-8)
    pa.add_argument("--tol-active", type=float, default=1e-8)
    pa.add_argument("--tol-dir", type=float, default=1e-8)
    pa.add_argument("--newton-tol", type=float, default=1e-12)
    pa.add_argument("--verify-tol", type=float, default=1e-7)
    pa.add_argument(
        "--arc-dir",
        action="append",
        default=[],
        metavar="D1,...,DN",
        help="explicit arc direction (repeatable)",
    )
    pa.add_argument(
        "--arc-sample",
        type=int,
        default=8,
        help="number of sampled arc directions (default 8)",
    )
    pa.add_argument(
        "--arc-points",
        type=int,
        default=41,
        help="samples per arc, odd and >= 5 (default 41)",
    )
    pa.add_argument("--delta", type=float, default=0.1, help="arc half-width (default 0.1)")
    pa.add_argument("--json", dest="json_path", help="write the JSON report here")
    pa.add_argument("--csv-dir", help="write one CSV of samples per arc here")
    args = parser.parse_args(argv)

    try:
        radii = tuple(
            float(tok) for tok in str(args.radii).split(",") if tok.strip()
        )
    except ValueError:
        print(f"error: --radii expects comma-separated numbers, got {args.radii!r}", file=sys.stderr)
        return 2
    try:
        config = RunConfig(
            problem=args.problem,
            point=_parse_vector(args.point, "--point") if args.point else None,
            seed=args.seed,
            radii=radii,
            samples=args.samples,
            tol_rank=args.tol_rank,
            tol_active=args.tol_active,
            tol_dir=args.tol_dir,
            newton_tol=args.newton_tol,
            verify_tol=args.verify_tol,
            arc_dirs=tuple(_parse_vector(d, "--arc-dir") for d in args.arc_dir),
            arc_sample=args.arc_sample,
            arc_points=args.arc_points,
            delta=args.delta,
            json_path=args.json_path,
            csv_dir=args.csv_dir,
        )
        start = time.perf_counter()
        report = run(config)
        elapsed = time.perf_counter() - start
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal numerical failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    for line in _summary_lines(report):
        print(line)
    # timing is printed but never serialized, so reports stay reproducible
    print(f"analysis time: {elapsed:.3f} s")
    try:
        if config.json_path:
            _atomic_write(config.json_path, report_to_json(report))
            print(f"report written to {config.json_path}")
        if config.csv_dir:
            arcs = report.get("arcs", {})
            entries = arcs.get("entries", []) if isinstance(arcs, dict) else []
            os.makedirs(config.csv_dir, exist_ok=True)
            written = 0
            for k, entry in enumerate(entries):
                if "samples" not in entry:
                    continue
                path = os.path.join(config.csv_dir, f"arc_{k + 1:02d}.csv")
                emit_plot_data(entry, path)
                written += 1
            print(f"{written} arc CSV file(s) written to {config.csv_dir}")
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
