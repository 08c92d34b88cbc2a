"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 invariant or oracle
violation (a minimized reproduction is written next to the working
directory when that happens).
"""

from __future__ import annotations

import argparse
import json
import pathlib
import random
import sys

from . import fuzz as fuzzmod
from .catalog import load_catalog_file, serialize_catalog
from .engine import compute_stats, run_scenario
from .errors import GuidebookError, InvariantViolation
from .oracle import oracle_run, timelines_agree
from .protocol import ProtocolConfig
from .scenario import dump_scenario, load_scenario_file, scenario_to_dict
from .simnet import NetworkConfig

SAMPLE_CATALOG = pathlib.Path(__file__).parent / "data" / "sample_catalog.json"


def cmd_validate(args) -> int:
    try:
        catalog = load_catalog_file(args.catalog)
    except GuidebookError as exc:
        print(json.dumps({"ok": False, "error": str(exc)}))
        return 1
    durations = [c.duration_ms for c in catalog.clips]
    summary = {
        "ok": True,
        "checksum": catalog.checksum,
        "rooms": len(catalog.rooms),
        "walls": len(catalog.walls),
        "targets": sum(len(w.targets) for w in catalog.walls),
        "clips": len(catalog.clips),
        "min_duration_ms": min(durations) if durations else None,
        "max_duration_ms": max(durations) if durations else None,
        "duration_histogram": {
            "5500_27000": sum(1 for d in durations if 5500 <= d <= 27000),
            "59000": durations.count(59000),
            "other": sum(1 for d in durations
                         if not (5500 <= d <= 27000) and d != 59000),
        },
    }
    print(json.dumps(summary, indent=2))
    return 0


def _load_run_inputs(path):
    scenario = load_scenario_file(path)
    catalog_path = pathlib.Path(scenario.catalog_ref)
    if not catalog_path.is_absolute():
        catalog_path = pathlib.Path(path).parent / catalog_path
    return scenario, load_catalog_file(catalog_path)


def cmd_run(args) -> int:
    try:
        scenario, catalog = _load_run_inputs(args.scenario)
        timeline = run_scenario(scenario, catalog=catalog)
    except GuidebookError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    lines = timeline.jsonl_lines()
    if args.out:
        pathlib.Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        for line in lines:
            print(line)
    if args.stats:
        print(json.dumps(compute_stats(timeline, scenario).to_dict()))
    return 0


def cmd_oracle_check(args) -> int:
    try:
        scenario, catalog = _load_run_inputs(args.scenario)
        engine_tl = run_scenario(scenario, catalog=catalog)
        oracle_tl = oracle_run(scenario, step_ms=args.step_ms, catalog=catalog)
    except GuidebookError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    problems = timelines_agree(engine_tl, oracle_tl, args.step_ms)
    if not problems:
        print(json.dumps({"ok": True, "step_ms": args.step_ms}))
        return 0
    for p in problems:
        print(f"mismatch: {p}", file=sys.stderr)
    repro = _write_repro(scenario, catalog, "oracle")
    print(f"minimized reproduction written to {repro}", file=sys.stderr)
    return 2


def _write_repro(scenario, catalog, label) -> pathlib.Path:
    out_dir = pathlib.Path.cwd()
    cat_path = out_dir / f"repro_{label}_catalog.json"
    cat_path.write_bytes(serialize_catalog(catalog))
    from dataclasses import replace
    minimized = fuzzmod.minimize_scenario(
        scenario, lambda s: _still_fails(s, catalog, label))
    minimized = replace(minimized, catalog_ref=cat_path.name)
    scen_path = out_dir / f"repro_{label}_scenario.json"
    scen_path.write_text(dump_scenario(minimized), encoding="utf-8")
    return scen_path


def _still_fails(scenario, catalog, label) -> bool:
    try:
        if label == "oracle":
            engine_tl = run_scenario(scenario, catalog=catalog)
            oracle_tl = oracle_run(scenario, step_ms=10, catalog=catalog)
            return bool(timelines_agree(engine_tl, oracle_tl, 10))
        fuzzmod.check_run(scenario, catalog)
        return False
    except InvariantViolation:
        return True
    except GuidebookError:
        return False


def cmd_fuzz(args) -> int:
    catalog = fuzzmod.fuzz_catalog()
    profile = fuzzmod.FuzzProfile(max_loss=args.max_loss)
    for i in range(args.runs):
        rng = random.Random(args.seed + i)
        scenario = fuzzmod.random_scenario(rng, catalog, profile)
        try:
            fuzzmod.check_run(scenario, catalog)
        except InvariantViolation as exc:
            print(f"run {i} (seed {args.seed + i}): {exc}", file=sys.stderr)
            repro = _write_repro(scenario, catalog, "invariant")
            print(f"minimized reproduction written to {repro}", file=sys.stderr)
            return 2
    print(json.dumps({"ok": True, "runs": args.runs, "seed": args.seed}))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    network = NetworkConfig(
        loss_probability=args.loss,
        delay_min_ms=args.delay_min_ms,
        delay_max_ms=args.delay_max_ms,
        seed=args.net_seed,
    )
    app = create_app(
        catalog_path=args.catalog,
        network=network,
        protocol=ProtocolConfig(),
        tick_ms=args.tick_ms,
        static_dir=args.static_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="guidebook",
        description="Paired audio guidebook engine: validate content, run and "
                    "check scenarios, fuzz invariants, serve live sessions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a catalog file")
    p.add_argument("catalog")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run a scenario, print its timeline")
    p.add_argument("scenario")
    p.add_argument("--out", help="write timeline JSONL here instead of stdout")
    p.add_argument("--stats", action="store_true", help="print sharing stats")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle-check", help="compare engine vs brute-force oracle")
    p.add_argument("scenario")
    p.add_argument("--step-ms", type=int, default=10)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("fuzz", help="random scenarios with invariant checking")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-loss", type=float, default=0.3)
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("serve", help="run the live session server")
    p.add_argument("--port", type=int, default=8089)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--catalog", default=str(SAMPLE_CATALOG))
    p.add_argument("--loss", type=float, default=0.0)
    p.add_argument("--delay-min-ms", type=int, default=0)
    p.add_argument("--delay-max-ms", type=int, default=0)
    p.add_argument("--net-seed", type=int, default=0)
    p.add_argument("--tick-ms", type=int, default=50)
    p.add_argument("--static-dir", default=None,
                   help="directory of UI assets to serve at /")
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
