"""The campaign round loop.

Every round selects one fuzzer, syncs the global pool into it, runs it for
its auto-cycle count, merges its new seeds, scores them and updates the
selected arm. A timer on (virtual) time resets all arms every ``I_R``.
"""

from __future__ import annotations

import hashlib
import logging
import random
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence

from fuzzsched import bandit as ts
from fuzzsched.bandit import BanditState
from fuzzsched.coverage import (
    DiscoveryLog,
    RewardNormalizer,
    SeedCoverage,
    canonical_payload,
    evaluate_seeds,
    normalize,
    register_initial_corpus,
)
from fuzzsched.errors import ConfigError, FuzzschedError, InvariantError, SyncError
from fuzzsched.runtime.base import Fuzzer, FuzzerStatus
from fuzzsched.runtime.external import ExternalFuzzer
from fuzzsched.runtime.simulated import SimulatedFuzzer
from fuzzsched.runtime.target import SyntheticTarget
from fuzzsched.schedulers import SCHEDULERS, select_fuzzer
from fuzzsched.seed_pool import INITIAL_CORPUS, SeedPool

log = logging.getLogger(__name__)

SECOND = 1000
MINUTE = 60 * SECOND

REWARD_MODES = ("interval", "naive")


def derive_seed(base: int, *labels: object) -> int:
    """Stable 64-bit sub-seed for one consumer of randomness."""
    key = "/".join(str(x) for x in (base, *labels)).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


@dataclass
class FuzzerStats:
    total_duration: int = 0
    num_selection: int = 0
    avg_cycle_time: int = 0
    cycles: int = 1


def update_auto_cycle(stats: FuzzerStats, d_t: int, round_budget: int) -> FuzzerStats:
    """Grow the duration tally and derive next selection's cycle count.

    ``avg_cycle_time`` is the mean duration per selection, counting the round
    that just finished; both it and ``cycles`` are clamped to at least 1.
    """
    if d_t <= 0:
        raise ValueError(f"round duration must be positive, got {d_t}")
    stats.total_duration += d_t
    stats.num_selection += 1
    stats.avg_cycle_time = max(1, stats.total_duration // stats.num_selection)
    stats.cycles = max(1, round_budget // stats.avg_cycle_time)
    return stats


def check_reset(timer: int, d_t: int, reset_interval: float, state: BanditState) -> tuple[int, bool]:
    timer += d_t
    if timer >= reset_interval:
        ts.reset(state)
        return 0, True
    return timer, False


@dataclass
class FuzzerSpec:
    kind: str = "simulated"
    name: str | None = None
    command: list[str] = field(default_factory=list)
    faults: dict[int, str] = field(default_factory=dict)


@dataclass
class CampaignConfig:
    fuzzers: list[FuzzerSpec]
    target: SyntheticTarget | None = None
    round_budget_ms: int = 120 * SECOND
    reset_interval_ms: int = 120 * MINUTE
    max_rounds: int | None = None
    duration_ms: int | None = None
    target_coverage: int | None = None
    rng_seed: int = 0
    scheduler: str = "ts"
    sync_enabled: bool = True
    reward_mode: str = "interval"
    reset_enabled: bool = True
    timeout_factor: float = 3.0
    campaign_dir: Path | None = None
    name: str = "campaign"
    check_invariants: bool = False

    def validate(self) -> None:
        if not self.fuzzers:
            raise ConfigError("fuzzer roster is empty")
        if self.round_budget_ms <= 0:
            raise ConfigError("round time budget must be positive")
        if self.reset_interval_ms <= 0:
            raise ConfigError("reset interval must be positive")
        if self.scheduler not in SCHEDULERS:
            raise ConfigError(f"unknown scheduler {self.scheduler!r}; choose from {', '.join(SCHEDULERS)}")
        if self.reward_mode not in REWARD_MODES:
            raise ConfigError(f"unknown reward mode {self.reward_mode!r}")
        if self.max_rounds is None and self.duration_ms is None and self.target_coverage is None:
            raise ConfigError("no stopping condition (max_rounds, duration or target_coverage)")
        for i, spec in enumerate(self.fuzzers):
            if spec.kind == "simulated" and self.target is None:
                raise ConfigError(f"fuzzer {i} is simulated but no target is configured")
            if spec.kind == "external" and not spec.command:
                raise ConfigError(f"fuzzer {i} is external but has no command")
            if spec.kind not in ("simulated", "external"):
                raise ConfigError(f"fuzzer {i}: unknown kind {spec.kind!r}")

    @property
    def timeout_ms(self) -> int:
        return int(self.timeout_factor * self.round_budget_ms)

    @property
    def virtual_time(self) -> bool:
        return all(f.kind == "simulated" for f in self.fuzzers)


TRACE_COLUMNS = (
    "round",
    "fuzzer",
    "cycles",
    "duration_ms",
    "elapsed_ms",
    "outcome",
    "raw",
    "reward",
    "r_hat",
    "accepted",
    "branches",
    "reset",
    "arms",
)


@dataclass
class RoundRecord:
    round: int
    fuzzer: int
    cycles: int
    duration_ms: int
    elapsed_ms: int
    outcome: str
    raw: int
    reward: float
    r_hat: int | None
    accepted: int
    branches: int
    reset: bool
    arms: list[tuple[float, float]]

    def to_line(self) -> str:
        arms = ";".join(f"{a:g},{b:g}" for a, b in self.arms)
        r_hat = "-" if self.r_hat is None else str(self.r_hat)
        fields = (
            self.round,
            self.fuzzer,
            self.cycles,
            self.duration_ms,
            self.elapsed_ms,
            self.outcome,
            self.raw,
            repr(float(self.reward)),
            r_hat,
            self.accepted,
            self.branches,
            int(self.reset),
            arms,
        )
        return "\t".join(str(x) for x in fields)

    @classmethod
    def from_line(cls, line: str) -> "RoundRecord":
        p = line.rstrip("\n").split("\t")
        if len(p) != len(TRACE_COLUMNS):
            raise ValueError(f"trace line has {len(p)} fields, expected {len(TRACE_COLUMNS)}")
        arms = [tuple(float(x) for x in a.split(",")) for a in p[12].split(";")] if p[12] else []
        return cls(
            round=int(p[0]),
            fuzzer=int(p[1]),
            cycles=int(p[2]),
            duration_ms=int(p[3]),
            elapsed_ms=int(p[4]),
            outcome=p[5],
            raw=int(p[6]),
            reward=float(p[7]),
            r_hat=None if p[8] == "-" else int(p[8]),
            accepted=int(p[9]),
            branches=int(p[10]),
            reset=bool(int(p[11])),
            arms=arms,  # type: ignore[arg-type]
        )


def trace_header(cfg: CampaignConfig) -> str:
    return (
        f"# fuzzsched trace name={cfg.name} seed={cfg.rng_seed} scheduler={cfg.scheduler} "
        f"sync={int(cfg.sync_enabled)} reward={cfg.reward_mode} reset={int(cfg.reset_enabled)} "
        f"round_budget_ms={cfg.round_budget_ms} reset_interval_ms={cfg.reset_interval_ms}\n"
        "# " + "\t".join(TRACE_COLUMNS) + "\n"
    )


def read_trace(path: str | Path) -> list[RoundRecord]:
    with open(path) as fh:
        return [RoundRecord.from_line(line) for line in fh if line.strip() and not line.startswith("#")]


@dataclass
class CampaignReport:
    config: CampaignConfig
    records: list[RoundRecord]
    initial_branches: int
    final_branches: int
    selections: list[int]
    reward_sums: list[float]
    aborted: bool = False
    error: str | None = None

    @property
    def coverage_series(self) -> list[tuple[int, int, int]]:
        """(round, elapsed_ms, branches), starting with round 0."""
        out = [(0, 0, self.initial_branches)]
        out += [(r.round, r.elapsed_ms, r.branches) for r in self.records]
        return out

    def trace_text(self) -> str:
        return trace_header(self.config) + "".join(r.to_line() + "\n" for r in self.records)

    def summary(self) -> str:
        cfg = self.config
        lines = [
            f"name = {cfg.name}",
            f"seed = {cfg.rng_seed}",
            f"scheduler = {cfg.scheduler}",
            f"sync = {str(cfg.sync_enabled).lower()}",
            f"reward = {cfg.reward_mode}",
            f"reset = {str(cfg.reset_enabled).lower()}",
            f"rounds = {len(self.records)}",
            f"elapsed_ms = {self.records[-1].elapsed_ms if self.records else 0}",
            f"initial_branches = {self.initial_branches}",
            f"final_branches = {self.final_branches}",
            f"status = {'aborted' if self.aborted else 'complete'}",
        ]
        if self.error:
            lines.append(f"error = {self.error}")
        for i, spec in enumerate(cfg.fuzzers):
            name = spec.name or f"fuzzer{i}"
            lines.append(
                f"fuzzer.{i} = {name} selections={self.selections[i]} reward_sum={self.reward_sums[i]:.6f}"
            )
        return "\n".join(lines) + "\n"


class Campaign:
    def __init__(self, config: CampaignConfig, fuzzers: Sequence[Fuzzer] | None = None):
        config.validate()
        self.config = config
        self._tmp: tempfile.TemporaryDirectory | None = None
        if fuzzers is None:
            fuzzers = self._build_fuzzers()
        self.fuzzers = list(fuzzers)
        k = len(self.fuzzers)
        storage = config.campaign_dir / "global_queue" if config.campaign_dir else None
        self.pool = SeedPool(storage)
        self.log = DiscoveryLog()
        self.norm = RewardNormalizer()
        self.bandit = BanditState([ts.ArmState() for _ in range(k)], random.Random(derive_seed(config.rng_seed, "bandit")))
        self.stats = [FuzzerStats() for _ in range(k)]
        self.timer = 0
        self.round = 0
        self.elapsed_ms = 0
        self.records: list[RoundRecord] = []
        self.updates_since_reset = [0] * k
        self.initial_branches = 0
        self._trace: IO[str] | None = None
        self._wall_start = 0.0
        self._started = False

    def _build_fuzzers(self) -> list[Fuzzer]:
        cfg = self.config
        out: list[Fuzzer] = []
        for i, spec in enumerate(cfg.fuzzers):
            if spec.kind == "simulated":
                assert cfg.target is not None
                rng = random.Random(derive_seed(cfg.rng_seed, "fuzzer", i))
                out.append(SimulatedFuzzer(i, cfg.target, rng, name=spec.name, faults=spec.faults))
            else:
                base = cfg.campaign_dir
                if base is None:
                    self._tmp = self._tmp or tempfile.TemporaryDirectory(prefix="fuzzsched-")
                    base = Path(self._tmp.name)
                queue_dir = base / "fuzzers" / str(i) / "queue"
                out.append(ExternalFuzzer(i, spec.command, queue_dir, name=spec.name))
        return out

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        cfg = self.config
        if cfg.campaign_dir is not None:
            cfg.campaign_dir.mkdir(parents=True, exist_ok=True)
            self._trace = open(cfg.campaign_dir / "trace.tsv", "w")
            self._trace.write(trace_header(cfg))
            self._trace.flush()
        for f in self.fuzzers:
            f.start()
        corpus = cfg.target.corpus if cfg.target is not None else []
        seeds = [SeedCoverage(i, tuple(branches)) for i, branches in enumerate(corpus)]
        initial = self.pool.merge([(canonical_payload(s.branches), s) for s in seeds], INITIAL_CORPUS, 0)
        register_initial_corpus(self.log, seeds)
        for f in self.fuzzers:
            f.import_seeds(initial)
        self.initial_branches = len(self.pool.branch_union)
        self._wall_start = time.monotonic()

    def close(self) -> None:
        for f in self.fuzzers:
            f.close()
        if self._trace is not None:
            self._trace.close()
            self._trace = None
        if self._tmp is not None:
            self._tmp.cleanup()
            self._tmp = None

    def __enter__(self) -> "Campaign":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- round loop ---------------------------------------------------------

    def should_stop(self) -> bool:
        cfg = self.config
        if cfg.max_rounds is not None and self.round >= cfg.max_rounds:
            return True
        if cfg.duration_ms is not None:
            spent = self.elapsed_ms if cfg.virtual_time else (time.monotonic() - self._wall_start) * 1000
            if spent >= cfg.duration_ms:
                return True
        if cfg.target_coverage is not None and len(self.pool.branch_union) >= cfg.target_coverage:
            return True
        return False

    def run_round(self) -> RoundRecord:
        self.start()
        cfg = self.config
        t = self.round + 1
        idx = select_fuzzer(cfg.scheduler, self.bandit, t)
        fuzzer = self.fuzzers[idx]
        if fuzzer.status == FuzzerStatus.CRASHED:
            try:
                fuzzer.watchdog_restart()
            except FuzzschedError as e:
                return self._abort_round(t, idx, f"restart failed: {e}")

        if cfg.sync_enabled:
            snapshot = self.pool.snapshot_hashes()
            try:
                fuzzer.import_seeds(self.pool.diff(fuzzer.local_hashes))
            except SyncError as e:
                return self._abort_round(t, idx, str(e))
            if cfg.check_invariants and not snapshot <= fuzzer.local_hashes:
                raise InvariantError(f"round {t}: fuzzer {idx} misses global seeds after sync")

        stats = self.stats[idx]
        # the naive-reward variant runs without auto-cycle: one cycle per evaluation
        cycles = 1 if cfg.reward_mode == "naive" else stats.cycles
        result = fuzzer.run_cycles(cycles, cfg.timeout_ms, round_no=t)
        try:
            fuzzer.settle()
        except FuzzschedError as e:
            log.warning("fuzzer %d could not be restarted: %s", idx, e)

        accepted = self.pool.merge(result.new_seeds, idx, t)
        raw = evaluate_seeds(t, [r.coverage for r in accepted], self.log)
        if cfg.reward_mode == "naive":
            r_hat = 1 if accepted else 0
            reward = float(r_hat)
        else:
            reward = normalize(raw, self.norm)
            r_hat = ts.discretize(ts.clamp_unit(reward), self.bandit.rng)
        ts.update(self.bandit, idx, r_hat)
        self.updates_since_reset[idx] += 1
        arms_after = [(a.alpha, a.beta) for a in self.bandit.arms]

        update_auto_cycle(stats, result.duration, cfg.round_budget_ms)
        self.elapsed_ms += result.duration
        fired = False
        if cfg.reset_enabled:
            self.timer, fired = check_reset(self.timer, result.duration, cfg.reset_interval_ms, self.bandit)
            if fired:
                self.updates_since_reset = [0] * len(self.fuzzers)
        else:
            self.timer += result.duration

        rec = RoundRecord(
            round=t,
            fuzzer=idx,
            cycles=result.cycles_completed,
            duration_ms=result.duration,
            elapsed_ms=self.elapsed_ms,
            outcome=result.outcome.value,
            raw=raw,
            reward=reward,
            r_hat=r_hat,
            accepted=len(accepted),
            branches=len(self.pool.branch_union),
            reset=fired,
            arms=arms_after,
        )
        self._commit(rec)
        return rec

    def _abort_round(self, t: int, idx: int, why: str) -> RoundRecord:
        log.error("round %d aborted for fuzzer %d: %s", t, idx, why)
        fuzzer = self.fuzzers[idx]
        if fuzzer.status == FuzzerStatus.CRASHED:
            try:
                fuzzer.watchdog_restart()
            except FuzzschedError as e:
                log.warning("fuzzer %d could not be restarted: %s", idx, e)
        rec = RoundRecord(
            round=t,
            fuzzer=idx,
            cycles=0,
            duration_ms=0,
            elapsed_ms=self.elapsed_ms,
            outcome="aborted",
            raw=0,
            reward=0.0,
            r_hat=None,
            accepted=0,
            branches=len(self.pool.branch_union),
            reset=False,
            arms=[(a.alpha, a.beta) for a in self.bandit.arms],
        )
        self._commit(rec)
        return rec

    def _commit(self, rec: RoundRecord) -> None:
        if self.config.check_invariants:
            self._check_invariants(rec)
        self.round = rec.round
        self.records.append(rec)
        if self._trace is not None:
            self._trace.write(rec.to_line() + "\n")
            self._trace.flush()

    def _check_invariants(self, rec: RoundRecord) -> None:
        union = set()
        for r in self.pool.records.values():
            union.update(r.coverage.branches)
        if union != self.pool.branch_union:
            raise InvariantError(f"round {rec.round}: pool branch union out of sync")
        if self.log.known_branches != self.pool.branch_union:
            raise InvariantError(f"round {rec.round}: discovery log and pool disagree")
        for i, arm in enumerate(self.bandit.arms):
            if arm.updates != self.updates_since_reset[i]:
                raise InvariantError(f"round {rec.round}: arm {i} counts {arm.updates} updates, expected {self.updates_since_reset[i]}")
        if self.records and rec.branches < self.records[-1].branches:
            raise InvariantError(f"round {rec.round}: branch count decreased")
        if rec.round != self.round + 1:
            raise InvariantError(f"round {rec.round} does not follow {self.round}")

    def report(self, aborted: bool = False, error: str | None = None) -> CampaignReport:
        k = len(self.fuzzers)
        selections = [0] * k
        sums = [0.0] * k
        for r in self.records:
            selections[r.fuzzer] += 1
            sums[r.fuzzer] += r.reward
        return CampaignReport(
            config=self.config,
            records=list(self.records),
            initial_branches=self.initial_branches,
            final_branches=len(self.pool.branch_union),
            selections=selections,
            reward_sums=sums,
            aborted=aborted,
            error=error,
        )

    def run(self) -> CampaignReport:
        try:
            self.start()
            while not self.should_stop():
                self.run_round()
        except (OSError, FuzzschedError) as e:
            if isinstance(e, InvariantError):
                raise
            log.error("campaign aborted: %s", e)
            return self.report(aborted=True, error=str(e))
        return self.report()


def run_campaign(config: CampaignConfig, fuzzers: Sequence[Fuzzer] | None = None) -> CampaignReport:
    campaign = Campaign(config, fuzzers)
    try:
        return campaign.run()
    finally:
        campaign.close()
