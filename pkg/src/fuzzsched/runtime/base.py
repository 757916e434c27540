from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Iterable

from fuzzsched.coverage import SeedCoverage
from fuzzsched.errors import UsageError
from fuzzsched.seed_pool import SeedRecord


class FuzzerStatus(str, enum.Enum):
    IDLE = "idle"
    RUNNING = "running"
    CRASHED = "crashed"
    SKIPPED = "skipped"


class Outcome(str, enum.Enum):
    COMPLETED = "completed"
    SKIPPED = "skipped"
    CRASHED = "crashed"


@dataclass
class CycleResult:
    new_seeds: list[tuple[bytes, SeedCoverage]] = field(default_factory=list)
    duration: int = 1
    cycles_completed: int = 0
    outcome: Outcome = Outcome.COMPLETED

    def __post_init__(self):
        self.duration = max(1, int(self.duration))


class Watchdog:
    """One-shot timer that raises a flag the control loop polls."""

    def __init__(self, timeout_ms: float):
        self.fired = threading.Event()
        self._timer = threading.Timer(timeout_ms / 1000.0, self.fired.set)
        self._timer.daemon = True

    def __enter__(self) -> "Watchdog":
        self._timer.start()
        return self

    def __exit__(self, *exc) -> None:
        self._timer.cancel()


class Fuzzer:
    """A fuzzer the orchestrator can select, sync and run.

    Subclasses implement ``_run`` and ``_import``; this class owns the status
    state machine (idle -> running -> idle | skipped | crashed).
    """

    kind = "abstract"

    def __init__(self, index: int, name: str | None = None):
        self.index = index
        self.name = name or f"fuzzer{index}"
        self.status = FuzzerStatus.IDLE
        self.local_hashes: set[str] = set()

    def _expect(self, *allowed: FuzzerStatus) -> None:
        if self.status not in allowed:
            want = "/".join(s.value for s in allowed)
            raise UsageError(f"{self.name}: expected status {want}, is {self.status.value}")

    def run_cycles(self, n: int, timeout_ms: int, round_no: int = 0) -> CycleResult:
        self._expect(FuzzerStatus.IDLE)
        if n < 1:
            raise UsageError(f"cycle count must be >= 1, got {n}")
        self.status = FuzzerStatus.RUNNING
        result = self._run(n, timeout_ms, round_no)
        if self.status == FuzzerStatus.RUNNING:
            self.status = FuzzerStatus.IDLE
        result.outcome = {
            FuzzerStatus.SKIPPED: Outcome.SKIPPED,
            FuzzerStatus.CRASHED: Outcome.CRASHED,
        }.get(self.status, Outcome.COMPLETED)
        return result

    def import_seeds(self, records: Iterable[SeedRecord]) -> None:
        self._expect(FuzzerStatus.IDLE)
        fresh = [r for r in records if r.content_hash not in self.local_hashes]
        if not fresh:
            return
        self._import(fresh)
        self.local_hashes.update(r.content_hash for r in fresh)

    def watchdog_skip(self) -> None:
        self._expect(FuzzerStatus.RUNNING)
        self.status = FuzzerStatus.SKIPPED

    def resume(self) -> None:
        """Return a skipped fuzzer to idle once its partial result was collected."""
        self._expect(FuzzerStatus.SKIPPED)
        self.status = FuzzerStatus.IDLE

    def mark_crashed(self) -> None:
        self.status = FuzzerStatus.CRASHED

    def watchdog_restart(self) -> None:
        self._expect(FuzzerStatus.CRASHED)
        self._restart()
        self.status = FuzzerStatus.IDLE

    def settle(self) -> None:
        """Bring the fuzzer back to idle after a round, whatever happened."""
        if self.status == FuzzerStatus.SKIPPED:
            self.resume()
        elif self.status == FuzzerStatus.CRASHED:
            self.watchdog_restart()

    def start(self) -> None:
        pass

    def close(self) -> None:
        pass

    def _run(self, n: int, timeout_ms: int, round_no: int) -> CycleResult:
        raise NotImplementedError

    def _import(self, records: list[SeedRecord]) -> None:
        raise NotImplementedError

    def _restart(self) -> None:
        pass
