"""Scores, coverage CSVs and comparison aggregates.

Scores follow the FuzzBench convention: on each target a strategy scores
``100 * median / best median``; the average score is the mean over targets.
Medians over trials are lower medians, so they are always an observed value.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from fuzzsched.errors import ReportFormatError, UsageError
from fuzzsched.orchestrator import CampaignReport

COVERAGE_COLUMNS = ("round", "virtual_ms", "branches", "selected_fuzzer", "reward")


@dataclass(frozen=True)
class CoverageRow:
    round: int
    virtual_ms: int
    branches: int
    selected_fuzzer: int
    reward: float


def coverage_rows(report: CampaignReport) -> list[CoverageRow]:
    """One row per completed round; the initial coverage is in summary.txt."""
    return [CoverageRow(r.round, r.elapsed_ms, r.branches, r.fuzzer, r.reward) for r in report.records]


def _cell(v) -> str:
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def format_coverage_csv(rows: Sequence[CoverageRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COVERAGE_COLUMNS)
    for r in rows:
        w.writerow([_cell(getattr(r, c)) for c in COVERAGE_COLUMNS])
    return buf.getvalue()


def parse_coverage_csv(text: str) -> list[CoverageRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != COVERAGE_COLUMNS:
        raise ReportFormatError(f"coverage csv header must be {','.join(COVERAGE_COLUMNS)}")
    rows = []
    for n, row in enumerate(reader, start=2):
        if len(row) != len(COVERAGE_COLUMNS):
            raise ReportFormatError(f"coverage csv line {n}: expected {len(COVERAGE_COLUMNS)} fields")
        try:
            rows.append(
                CoverageRow(int(row[0]), int(row[1]), int(row[2]), int(row[3]), float(row[4]))
            )
        except ValueError as e:
            raise ReportFormatError(f"coverage csv line {n}: {e}") from None
    return rows


def write_coverage_csv(path: str | Path, rows: Sequence[CoverageRow]) -> None:
    Path(path).write_text(format_coverage_csv(rows))


def read_coverage_csv(path: str | Path) -> list[CoverageRow]:
    return parse_coverage_csv(Path(path).read_text())


# -- scores -------------------------------------------------------------------

# raw[strategy][target] -> final branch counts, one per trial; None marks an aborted trial
RawMatrix = Mapping[str, Mapping[str, Sequence[int | None]]]


@dataclass
class ScoreTable:
    strategies: list[str]
    targets: list[str]
    raw: dict[str, dict[str, list[int | None]]]
    medians: dict[str, dict[str, int | None]] = field(default_factory=dict)
    scores: dict[str, dict[str, float | None]] = field(default_factory=dict)
    average: dict[str, float] = field(default_factory=dict)

    def score_rows(self) -> list[list[str]]:
        header = ["strategy", *self.targets, "average"]
        rows = [header]
        for s in self.strategies:
            cells = [_fmt(self.scores[s][t]) for t in self.targets]
            rows.append([s, *cells, _fmt(self.average.get(s))])
        return rows

    def median_rows(self) -> list[list[str]]:
        rows = [["strategy", *self.targets]]
        for s in self.strategies:
            rows.append([s, *(_cell(self.medians[s][t]) for t in self.targets)])
        return rows


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.2f}"


def compute_scores(raw: RawMatrix) -> ScoreTable:
    """Per-target FuzzBench scores and their average per strategy.

    A cell whose trials all aborted has no median and no score; it is left
    out of that strategy's average.
    """
    strategies = list(raw)
    if not strategies:
        raise UsageError("score matrix has no strategies")
    targets: list[str] = []
    for s in strategies:
        for t in raw[s]:
            if t not in targets:
                targets.append(t)
    if not targets:
        raise UsageError("score matrix has no targets")
    table = ScoreTable(strategies, targets, {s: {t: list(raw[s].get(t, [])) for t in targets} for s in strategies})
    for s in strategies:
        table.medians[s] = {}
        for t in targets:
            trials = [v for v in table.raw[s][t] if v is not None]
            table.medians[s][t] = statistics.median_low(trials) if trials else None
    if all(m is None for s in strategies for m in table.medians[s].values()):
        raise UsageError("score matrix has no completed trials")
    for s in strategies:
        table.scores[s] = {}
    for t in targets:
        present = [table.medians[s][t] for s in strategies if table.medians[s][t] is not None]
        best = max(present) if present else None
        for s in strategies:
            m = table.medians[s][t]
            if m is None or best is None:
                table.scores[s][t] = None
            elif best == 0:
                table.scores[s][t] = 100.0  # nobody covered anything: a tie
            else:
                table.scores[s][t] = 100.0 * m / best
    for s in strategies:
        vals = [v for v in table.scores[s].values() if v is not None]
        if vals:
            table.average[s] = statistics.fmean(vals)
    return table


@dataclass(frozen=True)
class Enhancement:
    """Relative coverage gain of one strategy over another, aggregated two ways."""

    mean_of_ratios: float
    ratio_of_means: float


def enhancement(table: ScoreTable, better: str, baseline: str) -> Enhancement | None:
    pairs = [
        (table.medians[better][t], table.medians[baseline][t])
        for t in table.targets
        if table.medians[better][t] is not None and table.medians[baseline][t]
    ]
    if not pairs:
        return None
    mean_of_ratios = statistics.fmean(a / b - 1.0 for a, b in pairs)
    ratio_of_means = statistics.fmean(a for a, _ in pairs) / statistics.fmean(b for _, b in pairs) - 1.0
    return Enhancement(mean_of_ratios, ratio_of_means)


def median_curve(series: Iterable[Sequence[int]]) -> list[int]:
    """Per-round lower median of several coverage series; shorter series hold their last value."""
    series = [list(s) for s in series if s]
    if not series:
        return []
    n = max(len(s) for s in series)
    padded = [s + [s[-1]] * (n - len(s)) for s in series]
    return [statistics.median_low(col) for col in zip(*padded)]


# -- matrix files ---------------------------------------------------------------

FINAL_COLUMNS = ("strategy", "target", "trial", "seed", "final_branches", "status")


def write_final_csv(path: str | Path, rows: Iterable[tuple[str, str, int, int, int | None, str]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FINAL_COLUMNS)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def read_final_csv(path: str | Path) -> dict[str, dict[str, list[int | None]]]:
    """Rebuild the raw score matrix from ``final_coverage.csv``."""
    raw: dict[str, dict[str, list[int | None]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FINAL_COLUMNS:
            raise ReportFormatError(f"{path}: header must be {','.join(FINAL_COLUMNS)}")
        for n, row in enumerate(reader, start=2):
            try:
                value = int(row["final_branches"]) if row["final_branches"] else None
            except ValueError:
                raise ReportFormatError(f"{path} line {n}: bad final_branches {row['final_branches']!r}") from None
            raw.setdefault(row["strategy"], {}).setdefault(row["target"], []).append(value)
    return raw


def write_rows(path: str | Path, rows: Sequence[Sequence[str]]) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def format_summary(table: ScoreTable, baseline: str | None = None) -> str:
    """Human-readable comparison summary; ``baseline`` defaults to the first strategy."""
    lines = ["# median final branch coverage"]
    width = max(len(s) for s in table.strategies)
    for s in table.strategies:
        cells = "  ".join(f"{t}={_cell(table.medians[s][t]) or 'n/a'}" for t in table.targets)
        lines.append(f"{s:<{width}}  {cells}")
    lines.append("# average score")
    for s in sorted(table.strategies, key=lambda s: -table.average.get(s, -1.0)):
        avg = table.average.get(s)
        lines.append(f"{s:<{width}}  {'n/a' if avg is None else f'{avg:.2f}'}")
    baseline = baseline or table.strategies[0]
    others = [s for s in table.strategies if s != baseline]
    if others:
        lines.append(f"# coverage change of {baseline} over each strategy")
        for s in others:
            e = enhancement(table, baseline, s)
            if e is None:
                lines.append(f"{s:<{width}}  n/a")
            else:
                lines.append(
                    f"{s:<{width}}  mean_of_ratios={100 * e.mean_of_ratios:+.1f}%  "
                    f"ratio_of_means={100 * e.ratio_of_means:+.1f}%"
                )
    return "\n".join(lines) + "\n"
