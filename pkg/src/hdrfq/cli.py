"""Command-line front end: ``hdrfq run`` and ``hdrfq check``.

Exit status: 0 on success, 1 on a validation error, 2 when a property check
fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import platform
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import share_guarantee_report
from .bounds import BoundError, bound_report
from .hierarchy import HierarchyError
from .presets import PRESET_NAMES, Preset, PresetRun, build_preset
from .profiles import as_profile
from .properties import CHECKS, run_property_suite
from .schedulers import HDRFQ_KINDS, SCHEDULER_KINDS
from .sim.engine import Trace, run
from .sim.metrics import delay_stats, windowed_shares
from .sim.scenario import ScenarioError, load_scenario
from .sim.traffic import NS_PER_S

log = logging.getLogger("hdrfq")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PROPERTY = 2

GOLDEN_PERIODS = {
    "collapsed-hdrfq": ("f1", "f1", "f1", "f2.1", "f2.2"),
    "dovetailing-hdrfq": ("f1", "f2.1", "f1", "f1", "f2.2"),
}


# -- output helpers -----------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _table_text(header, rows, fmt: str) -> str:
    if fmt == "json":
        return _json_text([dict(zip(header, r)) for r in rows])
    return _csv_text(header, rows)


# -- analyses -----------------------------------------------------------------------------


def find_period(order, max_period: int = 64, max_prefix: int = 64):
    """Smallest ``(prefix, period)`` such that ``order[prefix:]`` repeats with
    that period for the whole sample, or ``None``."""
    n = len(order)
    for prefix in range(min(max_prefix, n) + 1):
        for p in range(1, max_period + 1):
            if prefix + 2 * p > n:
                break
            if all(order[k] == order[k - p] for k in range(prefix + p, n)):
                return prefix, p
    return None


def _steady_sample(trace: Trace, leaves) -> list[str]:
    """Dispatches made while every leaf still had a backlog."""
    order = trace.order()
    last = {leaf: max((i for i, l in enumerate(order) if l == leaf), default=-1) for leaf in leaves}
    cut = min(last.values())
    return order[: max(cut - 1, 0)]


def period_busy(trace: Trace, leaves, start: int, period: int, groups: dict[str, tuple[str, ...]]):
    """Exact per-resource busy sums (microseconds, as fractions) of each group
    over one period of the dispatch order."""
    dur = trace.duration[start : start + period]
    names = trace.order()[start : start + period]
    out = {}
    for g, members in groups.items():
        tot = [Fraction(0)] * trace.m
        for k, name in enumerate(names):
            if name in members:
                for r in range(trace.m):
                    tot[r] += Fraction(int(dur[k, r]), 1000)
        out[g] = tot
    return out


def analyse_orders(preset: Preset, traces: dict[str, Trace]) -> tuple[dict, bool]:
    report = {}
    ok = True
    for label, trace in traces.items():
        sample = _steady_sample(trace, trace.leaves)
        found = find_period(sample)
        golden = GOLDEN_PERIODS.get(label)
        entry = {"first_dispatches": trace.order()[:20], "sample_length": len(sample)}
        if found:
            prefix, p = found
            entry.update(prefix=sample[:prefix], period=sample[prefix : prefix + p])
            if golden is not None:
                # compare as a cyclic pattern starting where the golden one does
                rot = _align(sample[prefix:], golden)
                entry["matches_golden"] = rot is not None
                entry["warmup_prefix"] = sample[: prefix + (rot or 0)]
                ok &= rot is not None
        else:
            entry["period"] = None
            ok = False
        report[label] = entry
    return report, ok


def _align(seq, golden):
    p = len(golden)
    for shift in range(p):
        if len(seq) - shift >= 2 * p and all(seq[shift + k] == golden[k % p] for k in range(len(seq) - shift)):
            return shift
    return None


def analyse_naive(preset: Preset, traces: dict[str, Trace]) -> tuple[dict, bool]:
    report = {}
    ok = True
    for label, trace in traces.items():
        spec = preset.runs[0].scenario.hierarchy
        sample = _steady_sample(trace, trace.leaves)
        found = find_period(sample)
        entry: dict = {}
        if not found:
            entry["error"] = "no periodic pattern"
            ok = False
            report[label] = entry
            continue
        prefix, p = found
        counts = {leaf: sample[prefix : prefix + p].count(leaf) for leaf in spec.leaves}
        groups = {"R": tuple(spec.leaves), "f2": ("f2.1", "f2.2"), "f1": ("f1",)}
        busy = period_busy(trace, spec.leaves, prefix, p, groups)
        shares = [busy["f2"][r] / busy["R"][r] for r in range(trace.m)]
        dom = max(shares)
        slack = max(
            Fraction(int(d), 1000) for d in trace.duration[prefix : prefix + p].max(axis=1)
        ) / min(busy["R"])
        # whole-period sums are exact, so the long-run share is compared with
        # no slack; the one-packet slack is reported for reference only
        violated = dom < Fraction(1, 2)
        entry.update(
            period=sample[prefix : prefix + p],
            counts=counts,
            f2_period_shares=[str(s) for s in shares],
            f2_dominant_share=str(dom),
            guaranteed=str(Fraction(1, 2)),
            one_packet_slack=str(slack),
            violates_guarantee=bool(violated),
        )
        ok &= not violated
        report[label] = entry
    return report, ok


def analyse_dynamic(preset: Preset, traces: dict[str, Trace], window: float) -> tuple[dict, bool]:
    report = {}
    for label, trace in traces.items():
        spec = preset.runs[0].scenario.hierarchy
        ws = windowed_shares(trace, spec, window)
        per_node = {}
        for nid in ("f1", "f2", "f2.1", "f2.2"):
            s = ws.node(nid)
            per_node[nid] = {
                name: [round(float(x), 6) for x in s[:, r]] for r, name in enumerate(ws.resource_names)
            }
        report[label] = {"window_s": window, "edges_s": (ws.edges_ns / NS_PER_S).tolist(), "shares": per_node}
    return report, True


def analyse_delays(preset: Preset, traces: dict[str, Trace]) -> tuple[dict, bool]:
    report = {}
    for label, trace in traces.items():
        spec = preset.runs[0].scenario.hierarchy
        st = delay_stats(trace, spec, "level")
        report[label] = {
            row.group: {"count": row.count, "mean_us": row.mean_ns / 1000, "max_us": row.max_ns / 1000}
            for row in st.rows
        }
    return report, True


def analyse_sweep(preset: Preset, traces: dict[str, Trace]) -> tuple[dict, bool]:
    rows = []
    probes = preset.params["probes"]
    for pr in preset.runs:
        level, leaf, factor, kind = pr.label.split("-", 3)
        trace = traces[pr.label]
        sc = pr.scenario
        d = trace.start_delay[trace.mask([leaf])]
        rep = bound_report(sc.hierarchy, sc.nominal_profiles(), leaf)
        rows.append({
            "level": level,
            "leaf": leaf,
            "weight_factor": float(factor[1:]),
            "weight": sc.hierarchy.nodes[leaf].weight,
            "scheduler": kind,
            "mean_delay_us": float(d.mean()) / 1000 if len(d) else None,
            "collapsed_bound_us": rep.collapsed_bound,
            "dovetail_bound_us": rep.dovetail_bound,
        })
    return {"probes": probes, "rows": rows}, True


# -- run command ----------------------------------------------------------------------


def _bounds_doc(sc) -> dict:
    profiles = sc.nominal_profiles()
    out = {}
    for leaf in sc.hierarchy.leaves:
        try:
            rep = bound_report(sc.hierarchy, profiles, leaf)
        except BoundError as exc:
            out[leaf] = {"error": str(exc)}
            continue
        out[leaf] = {
            "profile_us": list(as_profile(profiles[leaf]).demand),
            "collapsed_bound_us": rep.collapsed_bound,
            "dovetail_bound_us": rep.dovetail_bound,
            "terms": [
                {"level": w, "coefficient": c, "max_sum_us": ms, "value_us": v}
                for w, c, ms, v in rep.per_term_breakdown
            ],
        }
    return out


def _write_run_outputs(out: Path, label: str, sc, trace: Trace, fmt: str) -> list[str]:
    ext = "json" if fmt == "json" else "csv"
    files = []
    trace_path = out / f"{label}.trace.csv"
    _atomic_write(trace_path, trace.to_csv())
    files.append(trace_path.name)
    ws = windowed_shares(trace, sc.hierarchy, sc.share_window)
    p = out / f"{label}.shares.{ext}"
    _atomic_write(p, _table_text(ws.header(), list(ws.rows()), fmt))
    files.append(p.name)
    p = out / f"{label}.delays.{ext}"
    if len(trace):
        rows = []
        header = None
        for group_by in ("leaf", "level"):
            st = delay_stats(trace, sc.hierarchy, group_by)
            header = ["group_by"] + st.header()
            rows += [[group_by] + r for r in st.table()]
        _atomic_write(p, _table_text(header, rows, fmt))
    else:
        _atomic_write(p, _table_text(["group_by", "group", "count"], [], fmt))
    files.append(p.name)
    p = out / f"{label}.bounds.json"
    _atomic_write(p, _json_text(_bounds_doc(sc)))
    files.append(p.name)
    return files


def _manifest(args, preset_name, runs: list[PresetRun], files, extra) -> dict:
    return {
        "tool": "hdrfq",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "command": "run",
        "preset": preset_name,
        "scenario_file": args.scenario,
        "seed": args.seed,
        "overrides": {"scheduler": args.scheduler, "horizon": args.horizon, "window": args.window},
        "runs": [{"label": r.label, "scenario": r.scenario.to_document()} for r in runs],
        "files": files,
        **extra,
    }


def cmd_run(args) -> int:
    out = Path(args.out)
    if args.preset == "random-property-suite":
        return _run_suite_preset(args, out)
    if args.preset:
        preset = build_preset(
            args.preset, seed=args.seed, scheduler=args.scheduler, horizon=args.horizon, window=args.window
        )
    else:
        sc = load_scenario(args.scenario)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.scheduler:
            changes["scheduler"] = args.scheduler
        if args.horizon:
            changes["horizon"] = args.horizon
        if args.window:
            changes["share_window"] = args.window
        sc = sc.replace(**changes) if changes else sc
        preset = Preset(sc.name or "scenario", "scenario", [PresetRun(sc.scheduler, sc)])
    traces = {}
    files = []
    for pr in preset.runs:
        t0 = time.perf_counter()
        trace = run(pr.scenario)
        log.info("%s: %d packets in %.2fs", pr.label, len(trace), time.perf_counter() - t0)
        traces[pr.label] = trace
        files += _write_run_outputs(out, pr.label, pr.scenario, trace, args.format)

    ok = True
    analysis = preset.analysis
    if analysis == "orders":
        report, ok = analyse_orders(preset, traces)
    elif analysis == "naive-violation":
        report, ok = analyse_naive(preset, traces)
    elif analysis == "dynamic-shares":
        report, ok = analyse_dynamic(preset, traces, preset.runs[0].scenario.share_window)
    elif analysis in ("delay-cdf", "delay-levels"):
        report, ok = analyse_delays(preset, traces)
    elif analysis == "weight-sweep":
        report, ok = analyse_sweep(preset, traces)
    else:
        report = {}
        for label, trace in traces.items():
            sc = preset.runs[0].scenario
            t1 = sc.horizon / 4
            reps = share_guarantee_report(trace, sc.hierarchy, (t1, sc.horizon), sc.nominal_profiles())
            report[label] = {
                "packets": len(trace),
                "share_guarantee": [
                    {"node": r.node, "measured": r.measured_dominant_share, "guaranteed": r.guaranteed_share,
                     "flagged": r.flagged}
                    for r in reps
                ],
            }
    _atomic_write(out / "report.json", _json_text({"preset": preset.name, "passed": ok, "results": report}))
    files.append("report.json")
    _atomic_write(out / "manifest.json", _json_text(_manifest(args, args.preset, preset.runs, files, {"params": preset.params})))
    print(json.dumps({"preset": preset.name, "passed": ok, "out": str(out)}, sort_keys=True))
    return EXIT_OK if ok else EXIT_PROPERTY


def _run_suite_preset(args, out: Path) -> int:
    schedulers = (args.scheduler,) if args.scheduler else HDRFQ_KINDS
    report = run_property_suite(seed=args.seed or 0, schedulers=schedulers)
    doc = report.to_dict()
    _atomic_write(out / "report.json", _json_text({"preset": args.preset, "passed": report.passed, "results": doc}))
    _atomic_write(out / "manifest.json", _json_text({
        "tool": "hdrfq", "version": __version__, "command": "run", "preset": args.preset,
        "seed": args.seed or 0, "schedulers": list(schedulers), "files": ["report.json"],
    }))
    print(json.dumps({"preset": args.preset, "passed": report.passed, "out": str(out)}, sort_keys=True))
    return EXIT_OK if report.passed else EXIT_PROPERTY


# -- check command ----------------------------------------------------------------------


def cmd_check(args) -> int:
    schedulers = (args.scheduler,) if args.scheduler else HDRFQ_KINDS
    checks = tuple(c.strip() for c in args.checks.split(",") if c.strip())
    report = run_property_suite(
        n_trees=args.trees,
        n_profile_sets=args.profile_sets,
        seed=args.seed or 0,
        schedulers=schedulers,
        checks=checks,
        dispatches=args.dispatches,
    )
    doc = report.to_dict()
    text = _json_text(doc)
    if args.out:
        out = Path(args.out)
        _atomic_write(out / "check.json", text)
        _atomic_write(out / "manifest.json", _json_text({
            "tool": "hdrfq", "version": __version__, "command": "check", "seed": args.seed or 0,
            "trees": args.trees, "profile_sets": args.profile_sets, "schedulers": list(schedulers),
            "checks": list(checks), "dispatches": args.dispatches,
        }))
    sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_PROPERTY


# -- parser --------------------------------------------------------------------------


def _positive(kind):
    def parse(s):
        v = kind(s)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {s}")
        return v

    return parse


def _seed(s):
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hdrfq", description="Hierarchical multi-resource fair queueing simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a preset or a scenario file")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESET_NAMES)
    src.add_argument("--scenario", help="scenario JSON file")
    r.add_argument("--out", default="out", help="output directory (default: ./out)")
    r.add_argument("--seed", type=_seed)
    r.add_argument("--scheduler", choices=SCHEDULER_KINDS)
    r.add_argument("--horizon", type=_positive(float), help="simulated seconds")
    r.add_argument("--window", type=_positive(float), help="share window in seconds")
    r.add_argument("--format", choices=("csv", "json"), default="csv", help="format of shares and delay tables")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="randomized property suite")
    c.add_argument("--trees", type=int, default=100)
    c.add_argument("--profile-sets", type=int, default=1)
    c.add_argument("--seed", type=_seed, default=0)
    c.add_argument("--scheduler", choices=SCHEDULER_KINDS, help="scheduler under test (default: both H-DRFQ)")
    c.add_argument("--checks", default=",".join(CHECKS), help=f"comma-separated subset of {','.join(CHECKS)}")
    c.add_argument("--dispatches", type=_positive(int), default=1500, help="packets per simulated run")
    c.add_argument("--out", help="also write check.json and manifest.json here")
    c.add_argument("--format", choices=("json",), default="json")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "check":
        if args.trees < 0 or args.profile_sets < 1:
            print("error: --trees must be >= 0 and --profile-sets >= 1", file=sys.stderr)
            return EXIT_INVALID
        bad = set(c.strip() for c in args.checks.split(",") if c.strip()) - set(CHECKS)
        if bad:
            print(f"error: unknown checks {sorted(bad)}", file=sys.stderr)
            return EXIT_INVALID
    try:
        return args.func(args)
    except (ScenarioError, HierarchyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
