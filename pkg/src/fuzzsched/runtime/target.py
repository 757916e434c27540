"""Synthetic branch-graph targets for simulated fuzzers.

File format (``#`` starts a comment, block ids are hexadecimal)::

    [blocks]
    entry 0000000000000000      # entry blocks are always reachable
    0000000000000001            # plain block lines are optional

    [branches]
    <pred> <succ>

    [probs]
    <fuzzer> default <p>        # per-attempt solve probability, fallback
    <fuzzer> <pred> <succ> <p>  # probability for one branch

    [cycle_ms]
    <fuzzer> <milliseconds>

    [phases]
    <round> <fuzzer> default <p>
    <round> <fuzzer> <pred> <succ> <p>

    [corpus]
    <pred>:<succ> <pred>:<succ> ...   # one initial seed per line

A phase starting at ``<round>`` replaces the complete probability table of
every fuzzer it mentions; other fuzzers keep the table of the previous phase.
Fuzzers without any entry get probability 0 everywhere.
"""

from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from fuzzsched.coverage import Branch
from fuzzsched.errors import ConfigError


@dataclass
class ProbTable:
    default: float = 0.0
    explicit: dict[Branch, float] = field(default_factory=dict)

    def get(self, b: Branch) -> float:
        return self.explicit.get(b, self.default)


@dataclass
class Phase:
    switch_round: int
    tables: dict[int, ProbTable]


@dataclass
class SyntheticTarget:
    entries: tuple[int, ...]
    branches: tuple[Branch, ...]
    solve_prob: dict[int, ProbTable]
    cycle_ms: dict[int, int]
    phase_schedule: list[Phase] = field(default_factory=list)
    corpus: list[tuple[Branch, ...]] = field(default_factory=list)
    name: str = "target"

    def __post_init__(self):
        self.branches = tuple(sorted(set(Branch(*b) for b in self.branches)))
        self.entries = tuple(sorted(set(self.entries)))
        self.phase_schedule = sorted(self.phase_schedule, key=lambda p: p.switch_round)
        self.out_edges: dict[int, list[Branch]] = defaultdict(list)
        for b in self.branches:
            self.out_edges[b.pred].append(b)
        # effective per-fuzzer tables for each phase, base phase at round 0
        self._phase_rounds = [0]
        self._phase_tables = [dict(self.solve_prob)]
        for ph in self.phase_schedule:
            merged = dict(self._phase_tables[-1])
            merged.update(ph.tables)
            self._phase_rounds.append(ph.switch_round)
            self._phase_tables.append(merged)
        self.validate()

    @property
    def blocks(self) -> set[int]:
        out = set(self.entries)
        for b in self.branches:
            out.add(b.pred)
            out.add(b.succ)
        return out

    def validate(self) -> None:
        succs = {b.succ for b in self.branches}
        for b in self.branches:
            if b.pred not in succs and b.pred not in self.entries:
                raise ConfigError(f"{self.name}: branch {b} has unreachable predecessor")
        for tables in self._phase_tables:
            for f, tab in tables.items():
                for p in (tab.default, *tab.explicit.values()):
                    if not 0.0 <= p <= 1.0:
                        raise ConfigError(f"{self.name}: probability {p} for fuzzer {f} outside [0, 1]")
        for f, ms in self.cycle_ms.items():
            if ms <= 0:
                raise ConfigError(f"{self.name}: cycle_ms for fuzzer {f} must be positive")
        self._check_acyclic()
        known = set(self.branches)
        for seed in self.corpus:
            for b in seed:
                if b not in known:
                    raise ConfigError(f"{self.name}: corpus branch {b} not in target")

    def _check_acyclic(self) -> None:
        indeg: dict[int, int] = defaultdict(int)
        for b in self.branches:
            indeg[b.succ] += 1
        ready = [n for n in self.blocks if indeg[n] == 0]
        seen = 0
        while ready:
            n = ready.pop()
            seen += 1
            for b in self.out_edges.get(n, ()):
                indeg[b.succ] -= 1
                if indeg[b.succ] == 0:
                    ready.append(b.succ)
        if seen != len(self.blocks):
            raise ConfigError(f"{self.name}: branch graph has a cycle")

    def table(self, fuzzer: int, round_no: int = 0) -> ProbTable:
        i = bisect.bisect_right(self._phase_rounds, round_no) - 1
        return self._phase_tables[i].get(fuzzer, ProbTable())

    def prob(self, fuzzer: int, b: Branch, round_no: int = 0) -> float:
        return self.table(fuzzer, round_no).get(b)

    def cycle_time(self, fuzzer: int) -> int:
        return self.cycle_ms.get(fuzzer, 1000)

    # -- text format --------------------------------------------------------

    def dumps(self) -> str:
        out = ["[blocks]"]
        out += [f"entry {e:016x}" for e in self.entries]
        out += ["", "[branches]"]
        out += [f"{b.pred:016x} {b.succ:016x}" for b in self.branches]
        out += ["", "[probs]"]
        out += _table_lines("", self.solve_prob)
        out += ["", "[cycle_ms]"]
        out += [f"{f} {ms}" for f, ms in sorted(self.cycle_ms.items())]
        if self.phase_schedule:
            out += ["", "[phases]"]
            for ph in self.phase_schedule:
                out += _table_lines(f"{ph.switch_round} ", ph.tables)
        if self.corpus:
            out += ["", "[corpus]"]
            out += [" ".join(f"{b.pred:016x}:{b.succ:016x}" for b in seed) for seed in self.corpus]
        return "\n".join(out) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())


def _table_lines(prefix: str, tables: dict[int, ProbTable]) -> list[str]:
    lines = []
    for f, tab in sorted(tables.items()):
        lines.append(f"{prefix}{f} default {tab.default!r}")
        for b, p in sorted(tab.explicit.items()):
            lines.append(f"{prefix}{f} {b.pred:016x} {b.succ:016x} {p!r}")
    return lines


def _hex(tok: str, where: str) -> int:
    try:
        return int(tok, 16)
    except ValueError:
        raise ConfigError(f"{where}: bad block id {tok!r}") from None


def _prob_entry(parts: list[str], tables: dict[int, ProbTable], where: str) -> None:
    try:
        f = int(parts[0])
        if len(parts) == 3 and parts[1] == "default":
            tables.setdefault(f, ProbTable()).default = float(parts[2])
        elif len(parts) == 4:
            b = Branch(_hex(parts[1], where), _hex(parts[2], where))
            tables.setdefault(f, ProbTable()).explicit[b] = float(parts[3])
        else:
            raise ValueError
    except ValueError:
        raise ConfigError(f"{where}: malformed probability entry") from None


def loads(text: str, name: str = "target") -> SyntheticTarget:
    entries: list[int] = []
    branches: list[Branch] = []
    probs: dict[int, ProbTable] = {}
    cycle_ms: dict[int, int] = {}
    phases: dict[int, dict[int, ProbTable]] = {}
    corpus: list[tuple[Branch, ...]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{name}:{lineno}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("blocks", "branches", "probs", "cycle_ms", "phases", "corpus"):
                raise ConfigError(f"{where}: unknown section [{section}]")
            continue
        parts = line.split()
        if section == "blocks":
            if parts[0] == "entry" and len(parts) == 2:
                entries.append(_hex(parts[1], where))
            elif len(parts) == 1:
                _hex(parts[0], where)
            else:
                raise ConfigError(f"{where}: malformed block line")
        elif section == "branches":
            if len(parts) != 2:
                raise ConfigError(f"{where}: branch needs <pred> <succ>")
            branches.append(Branch(_hex(parts[0], where), _hex(parts[1], where)))
        elif section == "probs":
            _prob_entry(parts, probs, where)
        elif section == "cycle_ms":
            try:
                cycle_ms[int(parts[0])] = int(parts[1])
            except (ValueError, IndexError):
                raise ConfigError(f"{where}: malformed cycle_ms entry") from None
        elif section == "phases":
            try:
                rnd = int(parts[0])
            except ValueError:
                raise ConfigError(f"{where}: phase line must start with a round") from None
            _prob_entry(parts[1:], phases.setdefault(rnd, {}), where)
        elif section == "corpus":
            seed = []
            for tok in parts:
                p, _, s = tok.partition(":")
                seed.append(Branch(_hex(p, where), _hex(s, where)))
            corpus.append(tuple(sorted(set(seed))))
        else:
            raise ConfigError(f"{where}: content outside any section")
    if not entries:
        raise ConfigError(f"{name}: no entry block declared")
    return SyntheticTarget(
        entries=tuple(entries),
        branches=tuple(branches),
        solve_prob=probs,
        cycle_ms=cycle_ms,
        phase_schedule=[Phase(r, t) for r, t in sorted(phases.items())],
        corpus=corpus,
        name=name,
    )


def load(path: str | Path) -> SyntheticTarget:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read target file {path}: {e}") from None
    return loads(text, name=path.stem)
