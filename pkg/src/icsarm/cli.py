"""Command-line entry point: ``icsarm <command> [options]``.

Every command writes into ``--out`` and stamps each text output with the
seed and thresholds it ran under. Outputs never depend on ``--threads``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from . import plotting
from .binarizer import Transaction, drop_constant_attributes, read_transactions, to_transactions, write_transactions
from .config import PipelineConfig, load_config
from .errors import IcsArmError
from .historian import Dataset, load_csv, write_csv
from .miner import mine_frequent, read_itemsets, write_itemsets
from .plantsim.attack import (
    TABLE_HEADER,
    AttackScript,
    format_clock,
    format_prefix,
    launch_attack,
    read_scripts,
    run_scenario_table,
    write_scenario_csv,
)
from .plantsim.model import LEVEL_SENSORS, ORP_SENSOR, PH_SENSOR, run_normal
from .rulegen import (
    LABEL_ATTACK,
    antecedent_histogram,
    derive_rules,
    read_rules,
    serialize_rule,
    write_rules,
)
from .validator import (
    SUMMARY_HEADER,
    InvariantIndex,
    format_table,
    invalidation_summary,
    mine_invariants,
    scan_dataset,
    set_difference,
    summary_rows,
    write_matches_csv,
    write_summary_csv,
)

log = logging.getLogger("icsarm")

TRANSACTION_SUFFIX = ".tx"


def _header(cfg: PipelineConfig, *extra: str) -> list[str]:
    return [f"seed: {cfg.seed}", *extra]


def _thresholds(cfg: PipelineConfig) -> list[str]:
    return [f"support: {cfg.support}", f"confidence: {cfg.confidence}"]


def _load_dataset(path: str, cfg: PipelineConfig) -> Dataset:
    return load_csv(
        path,
        list(cfg.schema),
        timestamp_format=cfg.timestamp_format,
        check_cadence=cfg.check_cadence,
    )


def _load_transactions(path: str, cfg: PipelineConfig) -> list[Transaction]:
    """A historian CSV is binarized on the fly; anything else is read as a transaction file."""
    if Path(path).suffix.lower() == ".csv":
        d = _load_dataset(path, cfg)
        cfg.binarize.validate_for(d.schema)
        return to_transactions(d, cfg.binarize)
    return read_transactions(path)


def _write_histogram_csv(hist: dict[int, int], path: Path, comments: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("antecedent_size", "rules"))
        w.writerows(sorted(hist.items()))


def _emit_rules(rules, out: Path, comments: Sequence[str]) -> None:
    write_rules(rules, out / "rules.txt", comments)
    hist = antecedent_histogram(rules)
    _write_histogram_csv(hist, out / "histogram.csv", comments)
    print(f"{len(rules)} rules; antecedent sizes {hist}")


def cmd_simulate(args, cfg: PipelineConfig) -> None:
    params = cfg.plant
    if args.scripts:
        scripts = read_scripts(args.scripts)
        rows, trace = run_scenario_table(scripts, params, cfg.seed, until=args.duration - 1)
    else:
        rows, trace = [], run_normal(params, args.duration, cfg.seed)
    comments = _header(cfg, f"duration: {args.duration}")
    write_csv(trace, cfg.out / "trace.csv", comments)
    write_scenario_csv(rows, cfg.out / "scenarios.csv", comments)
    print(f"trace: {len(trace)} records; scenarios: {len(rows)}")
    for r in rows:
        print(f"{r.index:>3}  {r.classification!s:<20} {r.rule}")


def cmd_ingest(args, cfg: PipelineConfig) -> None:
    for path in args.inputs:
        d = _load_dataset(path, cfg)
        target = cfg.out / f"{Path(path).stem}.csv"
        write_csv(d, target, _header(cfg, f"source: {Path(path).name}"))
        first, last = (int(d.timestamps[0]), int(d.timestamps[-1]))
        print(f"{d.label}: {len(d)} records, {len(d.names)} attributes, t={first}..{last}")


def cmd_binarize(args, cfg: PipelineConfig) -> None:
    d = _load_dataset(args.input, cfg)
    cfg.binarize.validate_for(d.schema)
    transactions = to_transactions(d, cfg.binarize)
    comments = _header(cfg, f"source: {Path(args.input).name}")
    if args.drop_constant:
        transactions, dropped = drop_constant_attributes(transactions)
        comments.append(f"dropped constant attributes: {', '.join(dropped) or 'none'}")
    target = cfg.out / f"{Path(args.input).stem}{TRANSACTION_SUFFIX}"
    write_transactions(transactions, target, comments)
    print(f"{len(transactions)} transactions, {len({t.items for t in transactions})} distinct")


def cmd_mine(args, cfg: PipelineConfig) -> None:
    transactions = _load_transactions(args.input, cfg)
    itemsets = mine_frequent(transactions, cfg.support, max_size=cfg.max_size, threads=cfg.threads)
    comments = _header(cfg, f"source: {Path(args.input).name}", *_thresholds(cfg))
    write_itemsets(itemsets, cfg.out / "itemsets.txt", len(transactions), comments)
    print(f"{len(itemsets)} frequent itemsets over {len(transactions)} transactions")
    _emit_rules(derive_rules(itemsets, cfg.confidence), cfg.out, comments)


def cmd_rules(args, cfg: PipelineConfig) -> None:
    itemsets = read_itemsets(args.itemsets)
    comments = _header(cfg, f"source: {Path(args.itemsets).name}", f"confidence: {cfg.confidence}")
    _emit_rules(derive_rules(itemsets, cfg.confidence), cfg.out, comments)


def cmd_validate_invariants(args, cfg: PipelineConfig) -> None:
    a = read_rules(args.attack_rules, LABEL_ATTACK)
    normal = _load_transactions(args.normal, cfg)
    b = InvariantIndex(normal)
    c = set_difference(a, b)
    comments = _header(cfg, f"attack rules: {Path(args.attack_rules).name}", f"normal: {Path(args.normal).name}")
    if args.write_invariants:
        write_rules(mine_invariants(normal, threads=cfg.threads), cfg.out / "invariants.txt", comments)
    write_rules(c, cfg.out / "validated.txt", comments)
    s = invalidation_summary(a, b, c)
    with open(cfg.out / "invalidation.csv", "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("attack_patterns", "invariants", "invalidated", "validated", "invalidated_percent"))
        w.writerow((s.attack_patterns, s.invariants, s.invalidated, s.validated, f"{s.percentage}"))
    print(
        f"A={s.attack_patterns} B={s.invariants} C={s.validated}; "
        f"{s.invalidated} invalidated ({s.percentage}%)"
    )


def cmd_validate_dataset(args, cfg: PipelineConfig) -> None:
    rules = read_rules(args.rules)
    comments = _header(cfg, f"rules: {Path(args.rules).name}")
    reports = []
    for path in args.datasets:
        transactions = _load_transactions(path, cfg)
        report = scan_dataset(rules, transactions, Path(path).stem)
        reports.append(report)
        write_matches_csv(report, cfg.out / f"matches-{Path(path).stem}.csv", comments)
    write_summary_csv(reports, cfg.out / "summary.csv", comments)
    print(format_table(SUMMARY_HEADER, summary_rows(reports)))


def _replay_one(job):
    script, params, seed, reference = job
    trace, report = launch_attack(script, params, seed, reference=reference)
    return trace, report


def cmd_replay(args, cfg: PipelineConfig) -> None:
    scripts = read_scripts(args.scripts)
    reference = _load_transactions(args.reference, cfg) if args.reference else None
    jobs = [(s, cfg.plant, cfg.seed, reference) for s in scripts]
    if cfg.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.threads, len(jobs))) as pool:
            results = list(pool.map(_replay_one, jobs))
    else:
        results = [_replay_one(j) for j in jobs]
    comments = _header(cfg, f"scripts: {Path(args.scripts).name}")
    with open(cfg.out / "replay.csv", "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for k, (script, (trace, report)) in enumerate(zip(scripts, results), 1):
            w.writerow(
                (
                    k,
                    serialize_rule(script.rule),
                    format_prefix(script.state_prefix),
                    format_clock(script.start),
                    format_clock(script.end),
                    str(report.classification),
                    report.narrative,
                )
            )
            if args.traces:
                write_csv(trace, cfg.out / f"replay-{k:02d}.csv", comments)
            print(f"{k:>3}  {report.classification!s:<20} {serialize_rule(script.rule)}")


def cmd_report(args, cfg: PipelineConfig) -> None:
    if not (args.rules or args.trace):
        raise IcsArmError("report needs --rules and/or --trace")
    comments = _header(cfg)
    if args.rules:
        rules = read_rules(args.rules)
        hist = antecedent_histogram(rules)
        _write_histogram_csv(hist, cfg.out / "histogram.csv", comments)
        plotting.antecedent_histogram_figure(hist, cfg.out / "histogram.png")
        print(f"histogram of {len(rules)} rules: {hist}")
    if args.trace:
        trace = _load_dataset(args.trace, cfg)
        sensor = args.sensor
        tank = next((t for t, s in LEVEL_SENSORS.items() if s == sensor), None)
        th = cfg.plant.thresholds[tank] if tank else None
        window = None
        if args.scripts:
            script: AttackScript = read_scripts(args.scripts)[args.script_index - 1]
            epoch = cfg.plant.epoch
            window = (epoch + script.start, epoch + script.end)
        plotting.level_trace_figure(
            trace,
            sensor,
            cfg.out / "level_trace.png",
            window=window,
            high=th.high if th else None,
            high_high=th.high_high if th else None,
        )
        with open(cfg.out / "level_trace.csv", "w", encoding="utf-8", newline="") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("timestamp", sensor, "phase"))
            for ts, value in zip(trace.timestamps.tolist(), trace.column(sensor).tolist()):
                phase = "normal"
                if window:
                    phase = "before" if ts < window[0] else "during" if ts <= window[1] else "after"
                w.writerow((ts, value, phase))
        print(f"level trace of {sensor}: {len(trace)} records")
        if args.normal:
            normal = _load_dataset(args.normal, cfg)
            signals = [sensor, ORP_SENSOR, PH_SENSOR]
            plotting.comparison_figure(normal, trace, signals, cfg.out / "comparison.png")
            print("comparison against normal run written")


COMMANDS = {
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "binarize": cmd_binarize,
    "mine": cmd_mine,
    "rules": cmd_rules,
    "validate-invariants": cmd_validate_invariants,
    "validate-dataset": cmd_validate_dataset,
    "replay": cmd_replay,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML pipeline config")
    common.add_argument("--support", metavar="N/D", help="minimum support as a rational")
    common.add_argument("--confidence", metavar="N/D", help="minimum confidence as a rational")
    common.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    common.add_argument("--seed", type=int, help="top-level random seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="icsarm", description="Mine, validate and replay ICS attack rules.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run the plant, optionally with attack scripts")
    p.add_argument("--duration", type=int, default=3600, help="records to emit (default 3600)")
    p.add_argument("--scripts", help="attack script file (TSV)")

    p = sub.add_parser("ingest", parents=[common], help="validate and normalise historian CSVs")
    p.add_argument("inputs", nargs="+")

    p = sub.add_parser("binarize", parents=[common], help="historian CSV to transactions")
    p.add_argument("input")
    p.add_argument("--drop-constant", action="store_true", help="drop attributes with one state throughout")

    p = sub.add_parser("mine", parents=[common], help="frequent itemsets and rules from CSV or transactions")
    p.add_argument("input")

    p = sub.add_parser("rules", parents=[common], help="derive rules from an itemset file")
    p.add_argument("itemsets")

    p = sub.add_parser("validate-invariants", parents=[common], help="remove rules that are normal invariants")
    p.add_argument("attack_rules")
    p.add_argument("normal")
    p.add_argument(
        "--write-invariants", action="store_true", help="also write every invariant (large: one per occurring itemset)"
    )

    p = sub.add_parser("validate-dataset", parents=[common], help="scan rules against normal datasets")
    p.add_argument("rules")
    p.add_argument("datasets", nargs="+")

    p = sub.add_parser("replay", parents=[common], help="launch each script in its own plant run")
    p.add_argument("scripts")
    p.add_argument("--reference", help="normal data for false-attack checks")
    p.add_argument("--traces", action="store_true", help="also write each run's trace")

    p = sub.add_parser("report", parents=[common], help="render figures and their data")
    p.add_argument("--rules", help="rule file for the antecedent-size histogram")
    p.add_argument("--trace", help="historian CSV to plot")
    p.add_argument("--sensor", default="LIT101")
    p.add_argument("--scripts", help="script file marking the attack window")
    p.add_argument("--script-index", type=int, default=1, help="1-based script whose window to mark")
    p.add_argument("--normal", help="normal-run CSV to compare against")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(
            support=args.support,
            confidence=args.confidence,
            threads=args.threads,
            seed=args.seed,
            out=args.out,
        )
        cfg.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg)
    except (IcsArmError, ValueError) as exc:
        print(f"icsarm {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"icsarm {args.command}: error: {exc.strerror}: {exc.filename}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
