"""Command line: ``run`` one campaign, ``compare`` configs over trials, ``score`` a comparison.

Exit codes: 0 success, 1 campaign failure, 2 usage or configuration error.
Set ``CAMPAIGN_LOG`` (e.g. ``INFO`` or ``DEBUG``) for log output on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from fuzzsched import reporting
from fuzzsched.config import LoadedConfig, load_config
from fuzzsched.errors import FuzzschedError, InvariantError, ReportFormatError, UsageError
from fuzzsched.orchestrator import MINUTE, CampaignReport, run_campaign

log = logging.getLogger("fuzzsched")

EXIT_OK = 0
EXIT_CAMPAIGN = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def setup_logging() -> None:
    level = os.environ.get("CAMPAIGN_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    if getattr(args, "rounds", None) is not None:
        out["max_rounds"] = args.rounds
    if getattr(args, "duration", None) is not None:
        out["duration_ms"] = int(args.duration * MINUTE)
    return out


def write_run_outputs(out: Path, report: CampaignReport) -> None:
    """coverage.csv and summary.txt; the campaign itself streams trace.tsv."""
    reporting.write_coverage_csv(out / "coverage.csv", reporting.coverage_rows(report))
    (out / "summary.txt").write_text(report.summary())


def cmd_run(args: argparse.Namespace) -> int:
    loaded = load_config(args.config)
    if not 0 <= args.target < len(loaded.targets):
        raise UsageError(f"--target {args.target}: config has {len(loaded.targets)} target(s)")
    out = Path(args.out)
    kw = _overrides(args)
    if args.seed is not None:
        kw["rng_seed"] = args.seed
    cfg = loaded.campaign(args.target, campaign_dir=out, **kw)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise UsageError(f"cannot create output directory {out}: {e}") from None
    try:
        report = run_campaign(cfg)
    except InvariantError as e:
        print(f"error: invariant violated: {e}", file=sys.stderr)
        return EXIT_CAMPAIGN
    write_run_outputs(out, report)
    print(report.summary(), end="")
    if report.aborted:
        print(f"error: campaign aborted: {report.error}", file=sys.stderr)
        return EXIT_CAMPAIGN
    return EXIT_OK


def _strategy_names(configs: list[LoadedConfig]) -> list[str]:
    names: list[str] = []
    for c in configs:
        name, n = c.name, 2
        while name in names:
            name, n = f"{c.name}-{n}", n + 1
        names.append(name)
    return names


def cmd_compare(args: argparse.Namespace) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    configs = [load_config(p) for p in args.configs]
    if len(configs) < 2:
        raise UsageError("compare needs at least two configs")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = _strategy_names(configs)
    kw = _overrides(args)

    raw: dict[str, dict[str, list[int | None]]] = {}
    final_rows = []
    curve_rows = [["strategy", "target", "round", "median_branches"]]
    failures = 0
    for name, loaded in zip(names, configs):
        raw[name] = {}
        for ti, tname in enumerate(loaded.target_names()):
            series = []
            cells: list[int | None] = []
            for trial in range(args.trials):
                seed = (args.seed if args.seed is not None else loaded.base.rng_seed) + trial
                external = not loaded.campaign(ti).virtual_time
                run_dir = out / "runs" / name / tname / str(trial) if external else None
                cfg = loaded.campaign(ti, rng_seed=seed, campaign_dir=run_dir, **kw)
                try:
                    report = run_campaign(cfg)
                except (InvariantError, OSError) as e:
                    log.error("%s/%s trial %d failed: %s", name, tname, trial, e)
                    report = None
                if report is None or report.aborted:
                    failures += 1
                    cells.append(None)
                    final_rows.append((name, tname, trial, seed, None, "aborted"))
                    continue
                cells.append(report.final_branches)
                series.append([b for _, _, b in report.coverage_series])
                final_rows.append((name, tname, trial, seed, report.final_branches, "complete"))
                log.info("%s/%s trial %d: %d branches", name, tname, trial, report.final_branches)
            raw[name][tname] = cells
            for rnd, value in enumerate(reporting.median_curve(series)):
                curve_rows.append([name, tname, str(rnd), str(value)])

    reporting.write_final_csv(out / "final_coverage.csv", final_rows)
    reporting.write_rows(out / "curves.csv", curve_rows)
    try:
        table = reporting.compute_scores(raw)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAMPAIGN
    reporting.write_rows(out / "scores.csv", table.score_rows())
    summary = reporting.format_summary(table)
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    if failures:
        print(f"warning: {failures} campaign(s) aborted; their cells are marked invalid", file=sys.stderr)
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    path = Path(args.input) / "final_coverage.csv"
    if not path.is_file():
        raise UsageError(f"no comparison results at {path}")
    try:
        table = reporting.compute_scores(reporting.read_final_csv(path))
    except ReportFormatError as e:
        raise UsageError(str(e)) from None
    for row in table.score_rows():
        print("\t".join(row))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fuzzsched", description="Bandit-driven scheduling of a fuzzer ensemble.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one campaign")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, help="override the config's rng seed")
    r.add_argument("--rounds", type=int, help="stop after this many rounds")
    r.add_argument("--duration", type=float, metavar="MIN", help="stop after this many (virtual) minutes")
    r.add_argument("--target", type=int, default=0, help="index into the config's target list")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="run several configs over repeated trials and score them")
    c.add_argument("--configs", nargs="+", required=True)
    c.add_argument("--trials", type=int, required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--seed", type=int, help="base seed; trial i uses base + i (default: each config's seed)")
    c.add_argument("--rounds", type=int)
    c.add_argument("--duration", type=float, metavar="MIN")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("score", help="print FuzzBench-style scores of a comparison directory")
    s.add_argument("--in", dest="input", required=True)
    s.set_defaults(func=cmd_score)
    return p


def main(argv: list[str] | None = None) -> int:
    setup_logging()
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FuzzschedError as e:
        # configuration problems surface as ConfigError before any campaign starts
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
