"""Branch coverage bookkeeping and the coverage-interval reward.

A fuzzer is rewarded for every globally new branch it reports. The reward for
a branch is the number of rounds between the first discovery of the branch's
predecessor block and the current round, so branches that sat behind a hard
constraint for a long time are worth more than branches that fell out
immediately after their predecessor was reached.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Hashable, Iterable, NamedTuple, TextIO

from fuzzsched.errors import OrderingError, ReportFormatError, UsageError

BlockId = int


class Branch(NamedTuple):
    """Directed edge between two basic blocks."""

    pred: BlockId
    succ: BlockId

    def __str__(self) -> str:
        return f"{self.pred:016x}>{self.succ:016x}"


@dataclass(frozen=True)
class SeedCoverage:
    seed_id: Hashable
    branches: tuple[Branch, ...]

    @classmethod
    def of(cls, seed_id: Hashable, branches: Iterable[tuple[int, int]]) -> "SeedCoverage":
        """Build a coverage record with branches in canonical (sorted) order.

        Duplicates are kept so that callers can detect malformed reports.
        """
        return cls(seed_id, tuple(sorted(Branch(*b) for b in branches)))

    def has_duplicates(self) -> bool:
        return len(set(self.branches)) != len(self.branches)

    def blocks(self) -> set[BlockId]:
        out: set[BlockId] = set()
        for b in self.branches:
            out.add(b.pred)
            out.add(b.succ)
        return out


def canonical_payload(branches: Iterable[Branch]) -> bytes:
    """Serialize a branch set; simulated fuzzers use this as seed content."""
    return "".join(f"{b}\n" for b in sorted(set(branches))).encode()


def content_hash(payload: bytes) -> str:
    """128-bit digest of a seed payload, as 32 lowercase hex digits."""
    return hashlib.blake2b(payload, digest_size=16).hexdigest()


@dataclass
class DiscoveryLog:
    """Round of first global discovery for every block, plus known branches."""

    first_round: dict[BlockId, int] = field(default_factory=dict)
    known_branches: set[Branch] = field(default_factory=set)
    initialized: bool = False
    latest_round: int = 0

    def copy(self) -> "DiscoveryLog":
        return DiscoveryLog(
            dict(self.first_round), set(self.known_branches), self.initialized, self.latest_round
        )


@dataclass
class RewardNormalizer:
    r_min: float = 0
    r_max: float = 0


def register_initial_corpus(log: DiscoveryLog, seeds: Iterable[SeedCoverage]) -> DiscoveryLog:
    """Record every block and branch of the initial corpus at round 0."""
    if log.initialized or log.first_round or log.known_branches:
        raise UsageError("initial corpus already registered")
    for seed in seeds:
        for b in seed.branches:
            log.first_round.setdefault(b.pred, 0)
            log.first_round.setdefault(b.succ, 0)
            log.known_branches.add(b)
    log.initialized = True
    return log


def evaluate_seeds(t: int, new_seeds: Iterable[SeedCoverage], log: DiscoveryLog) -> int:
    """Sum of coverage intervals over branches not yet in ``log``.

    Seeds are visited by ascending ``seed_id`` and branches by ascending
    ``(pred, succ)``. A predecessor block that has never been seen is recorded
    at round ``t``, so its branch contributes 0.
    """
    if t < 1:
        raise OrderingError(f"round must be >= 1, got {t}")
    if t < log.latest_round:
        raise OrderingError(f"round {t} precedes recorded round {log.latest_round}")
    log.latest_round = t
    first = log.first_round
    known = log.known_branches
    raw = 0
    for seed in sorted(new_seeds, key=lambda s: s.seed_id):
        for b in sorted(set(seed.branches)):
            if b in known:
                continue
            t_p = first.setdefault(b.pred, t)
            raw += t - t_p
            first.setdefault(b.succ, t)
            known.add(b)
    return raw


def normalize(raw: float, norm: RewardNormalizer) -> float:
    """Running min-max scaling of a raw reward into [0, 1]."""
    if raw < 0:
        raise ValueError(f"raw reward must be non-negative, got {raw}")
    norm.r_max = max(norm.r_max, raw)
    norm.r_min = min(norm.r_min, raw)
    if norm.r_max == norm.r_min:
        return 0.0
    return (raw - norm.r_min) / (norm.r_max - norm.r_min)


# -- coverage report text format ---------------------------------------------
#
#   seed <seed_id> <content_hash>
#   branch <pred_hex> <succ_hex>
#   ...
#   <blank line>


@dataclass(frozen=True)
class ReportedSeed:
    seed_id: str
    content_hash: str
    coverage: SeedCoverage


def format_report(seeds: Iterable[ReportedSeed]) -> str:
    lines = []
    for s in seeds:
        lines.append(f"seed {s.seed_id} {s.content_hash}")
        for b in s.coverage.branches:
            lines.append(f"branch {b.pred:016x} {b.succ:016x}")
        lines.append("")
    return "".join(line + "\n" for line in lines)


def _parse_hex(token: str, lineno: int) -> int:
    if len(token) != 16:
        raise ReportFormatError(f"line {lineno}: block id {token!r} is not 16 hex digits")
    try:
        return int(token, 16)
    except ValueError:
        raise ReportFormatError(f"line {lineno}: bad block id {token!r}") from None


def parse_report_lines(lines: Iterable[str]) -> list[ReportedSeed]:
    """Parse coverage report stanzas. A trailing stanza without a blank line is accepted."""
    out: list[ReportedSeed] = []
    header: tuple[str, str] | None = None
    branches: list[tuple[int, int]] = []

    def flush():
        nonlocal header, branches
        if header is not None:
            out.append(ReportedSeed(header[0], header[1], SeedCoverage.of(header[0], branches)))
        header, branches = None, []

    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        parts = line.split()
        if parts[0] == "seed" and len(parts) == 3:
            if header is not None:
                raise ReportFormatError(f"line {lineno}: stanza not terminated by blank line")
            header = (parts[1], parts[2])
        elif parts[0] == "branch" and len(parts) == 3:
            if header is None:
                raise ReportFormatError(f"line {lineno}: branch outside a seed stanza")
            branches.append((_parse_hex(parts[1], lineno), _parse_hex(parts[2], lineno)))
        else:
            raise ReportFormatError(f"line {lineno}: unrecognized line {line!r}")
    flush()
    return out


def parse_report(stream: TextIO | str) -> list[ReportedSeed]:
    if isinstance(stream, str):
        return parse_report_lines(stream.splitlines())
    return parse_report_lines(stream)
