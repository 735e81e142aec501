"""Command line: run experiments, solve single instances, replay transcripts.

Exit codes: 0 success, 1 runtime failure, 2 bad configuration or input.
All randomness is fixed by the seed flags, and float columns use a fixed
format, so identical invocations produce byte-identical output files.
Set RADARNET_LOG=DEBUG (or INFO, ...) for verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import cbba, cop, simkit

log = logging.getLogger("radarnet")

METRICS_HEADER = "tick,method,seed,scenario,utility,load_mean,coverage,conflicts"
AGGREGATE_HEADER = (
    "tick,utility_mean,utility_std,load_mean,load_std,"
    "coverage_mean,coverage_std,conflicts_mean,conflicts_std"
)


def _fmt(x: float) -> str:
    return f"{x:.9f}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radarnet",
        description="Decentralized multi-radar target allocation: experiments and tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run seeded episodes and write metrics CSVs")
    run.add_argument("--scenario", help="scenario family name")
    run.add_argument("--scenario-file", help="JSON file with a full scenario spec")
    run.add_argument(
        "--methods",
        default="cbba,central",
        help="comma list drawn from {cbba, central}",
    )
    run.add_argument(
        "--seeds",
        default="10",
        help="seed count (offset by --seed-base) or explicit comma list",
    )
    run.add_argument("--seed-base", type=int, default=0)
    run.add_argument("--ticks", type=int, default=200)
    run.add_argument("--out", default="out")
    run.add_argument("--time-limit-ms", type=int, default=100)
    run.add_argument(
        "--comm-graph",
        default="complete",
        help='"complete" or a JSON file with {"edges": [[i, j], ...]}',
    )
    run.add_argument("--gamma", help="override per-target load, e.g. 0.2 or 1/5")
    run.add_argument("--budget", help="override per-radar budget, e.g. 0.6 or 3/5")
    run.add_argument(
        "--transcript",
        help="write the consensus message transcript here (cbba, single seed only)",
    )

    solve = sub.add_parser("solve", help="solve one instance file exactly")
    solve.add_argument("instance", help="instance JSON path")
    solve.add_argument("--time-limit-ms", type=int, default=0, help="0 means no limit")

    replay = sub.add_parser("replay", help="re-run a transcript and verify digests")
    replay.add_argument("transcript", help="transcript JSONL path")
    return parser


def _parse_seeds(text: str, base: int) -> list[int]:
    if "," in text:
        return [int(s) for s in text.split(",") if s.strip()]
    count = int(text)
    if count <= 0:
        raise ValueError("seed count must be positive")
    return list(range(base, base + count))


def _load_comm_graph(arg: str, radar_ids) -> dict:
    if arg == "complete":
        return simkit.complete_graph(radar_ids)
    with open(arg, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    graph = simkit.graph_from_edges(radar_ids, [tuple(e) for e in doc["edges"]])
    if not simkit.is_path_connected(graph):
        log.warning("communication graph is not path-connected; consensus cannot span it")
    return graph


def _resolve_spec(args, seed: int) -> simkit.ScenarioSpec:
    if args.scenario_file:
        with open(args.scenario_file, "r", encoding="utf-8") as fh:
            base = simkit.ScenarioSpec.from_jsonable(json.load(fh))
    else:
        base = simkit.ScenarioSpec(kind=simkit.ScenarioKind(args.scenario))
    overrides = {"seed": seed}
    if args.gamma:
        overrides["gamma"] = args.gamma
    if args.budget:
        overrides["budget"] = args.budget
    from dataclasses import replace

    return replace(base, **overrides)


def cmd_run(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods or any(m not in ("cbba", "central") for m in methods):
        print(f"error: --methods must be drawn from cbba, central; got {args.methods}", file=sys.stderr)
        return 2
    if bool(args.scenario) == bool(args.scenario_file):
        print("error: give exactly one of --scenario or --scenario-file", file=sys.stderr)
        return 2
    if args.ticks <= 0:
        print("error: --ticks must be positive", file=sys.stderr)
        return 2
    try:
        seeds = _parse_seeds(args.seeds, args.seed_base)
    except ValueError as exc:
        print(f"error: bad --seeds: {exc}", file=sys.stderr)
        return 2
    if args.scenario:
        try:
            simkit.ScenarioKind(args.scenario)
        except ValueError:
            names = ", ".join(k.value for k in simkit.ScenarioKind)
            print(f"error: unknown scenario {args.scenario!r}; pick from {names}", file=sys.stderr)
            return 2
    if args.transcript and ("cbba" not in methods or len(seeds) != 1):
        print("error: --transcript needs method cbba and exactly one seed", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 2

    time_limit = args.time_limit_ms / 1000.0 if args.time_limit_ms > 0 else None
    all_records: list[simkit.MetricsRecord] = []
    transcript_records = None
    try:
        for seed in seeds:
            spec = _resolve_spec(args, seed).resolved()
            world = simkit.generate_scenario(spec)
            graph = _load_comm_graph(args.comm_graph, [c.id for c in world.radars])
            for method in methods:
                recorder = None
                if args.transcript and method == "cbba":
                    recorder = cbba.TranscriptRecorder()
                log.info("running %s seed %d (%d ticks)", method, seed, args.ticks)
                all_records.extend(
                    simkit.run_episode(
                        spec,
                        method,
                        args.ticks,
                        time_limit=time_limit,
                        comm_graph=graph,
                        recorder=recorder,
                    )
                )
                if recorder is not None:
                    transcript_records = (spec, graph, recorder.records)
    except (cop.EmptyInstance, simkit.EmptyScenario, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver/runtime failures
        log.exception("run failed")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1

    _write_metrics(out_dir / "metrics.csv", all_records)
    agg = simkit.aggregate(all_records)
    for method, rows in sorted(agg.items()):
        _write_aggregate(out_dir / f"aggregate_{method}.csv", rows)
    _write_summary(out_dir / "summary.txt", args, seeds, agg)
    if transcript_records is not None:
        spec, graph, records = transcript_records
        _write_transcript(Path(args.transcript), spec, graph, args, records)
    return 0


def _write_metrics(path: Path, records) -> None:
    lines = [METRICS_HEADER]
    for r in sorted(records, key=lambda r: (r.seed, r.method, r.tick)):
        lines.append(
            f"{r.tick},{r.method},{r.seed},{r.scenario},"
            f"{_fmt(r.utility)},{_fmt(r.load_mean)},{_fmt(r.coverage)},{r.conflicts}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_aggregate(path: Path, rows) -> None:
    lines = [AGGREGATE_HEADER]
    for r in rows:
        lines.append(
            f"{r.tick},{_fmt(r.utility_mean)},{_fmt(r.utility_std)},"
            f"{_fmt(r.load_mean)},{_fmt(r.load_std)},"
            f"{_fmt(r.coverage_mean)},{_fmt(r.coverage_std)},"
            f"{_fmt(r.conflicts_mean)},{_fmt(r.conflicts_std)}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_summary(path: Path, args, seeds, agg) -> None:
    scenario = args.scenario or args.scenario_file
    lines = [
        f"scenario: {scenario}",
        f"seeds: {len(seeds)} (base {seeds[0]})",
        f"ticks: {args.ticks}",
        "",
    ]
    for method, rows in sorted(agg.items()):
        final = rows[-1]
        lines.append(f"[{method}]")
        lines.append(
            f"  final tick: utility {_fmt(final.utility_mean)} "
            f"load {_fmt(final.load_mean)} coverage {_fmt(final.coverage_mean)}"
        )
        n = len(rows)
        lines.append(
            "  run mean:   utility "
            f"{_fmt(sum(r.utility_mean for r in rows) / n)} "
            f"load {_fmt(sum(r.load_mean for r in rows) / n)} "
            f"coverage {_fmt(sum(r.coverage_mean for r in rows) / n)}"
        )
        lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")


def _write_transcript(path: Path, spec, graph, args, records) -> None:
    header = {
        "kind": "header",
        "spec": spec.to_jsonable(),
        "ticks": args.ticks,
        "time_limit_ms": args.time_limit_ms,
        "comm_graph": sorted([i, j] for i in graph for j in graph[i] if i < j),
    }
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_jsonable(), sort_keys=True) + "\n")


def cmd_solve(args) -> int:
    try:
        inst = cop.load_instance(args.instance)
    except (OSError, json.JSONDecodeError, cop.ContractError, cop.EmptyInstance) as exc:
        print(f"error: cannot load instance: {exc}", file=sys.stderr)
        return 2
    time_limit = args.time_limit_ms / 1000.0 if args.time_limit_ms > 0 else None
    result = cop.solve_exact(inst, time_limit)
    print(f"objective {_fmt(result.objective)}")
    print(f"optimal {str(result.optimal).lower()}")
    for i, k, j in sorted(result.allocation.w, key=lambda t: (t[2], t[0], t[1])):
        print(f"w=({i},{k},{j})")
    return 0


def cmd_replay(args) -> int:
    try:
        with open(args.transcript, "r", encoding="utf-8") as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read transcript: {exc}", file=sys.stderr)
        return 2
    if not lines or lines[0].get("kind") != "header":
        print("error: transcript missing header line", file=sys.stderr)
        return 2
    header = lines[0]
    logged = [line for line in lines[1:] if line.get("kind") == "message"]
    spec = simkit.ScenarioSpec.from_jsonable(header["spec"])
    ids = list(range(spec.resolved().n_radars))
    edges = header.get("comm_graph")
    graph = (
        simkit.graph_from_edges(ids, [tuple(e) for e in edges])
        if edges is not None
        else simkit.complete_graph(ids)
    )
    time_limit_ms = header.get("time_limit_ms", 100)
    recorder = cbba.TranscriptRecorder()
    simkit.run_episode(
        spec,
        "cbba",
        header["ticks"],
        time_limit=time_limit_ms / 1000.0 if time_limit_ms else None,
        comm_graph=graph,
        recorder=recorder,
    )
    replayed = [r.to_jsonable() for r in recorder.records]
    for n, (want, got) in enumerate(zip(logged, replayed)):
        if want != got:
            print(f"divergence at tick {want.get('tick', '?')} (record {n})")
            return 1
    if len(logged) != len(replayed):
        tick = (logged + replayed)[min(len(logged), len(replayed))].get("tick", "?")
        print(f"divergence at tick {tick} (record count {len(logged)} vs {len(replayed)})")
        return 1
    print(f"transcript verified: {len(replayed)} messages match")
    return 0


def main(argv=None) -> int:
    level = os.environ.get("RADARNET_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "solve":
        return cmd_solve(args)
    return cmd_replay(args)


if __name__ == "__main__":
    sys.exit(main())
