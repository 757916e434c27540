"""Fuzzer adapter running as a child process, driven over a line protocol.

orchestrator -> adapter::

    INIT <queue_dir>
    IMPORT <n>            followed by n absolute file paths
    RUN <cycles> <timeout_ms>
    SKIP                  ignored when no RUN is active
    SHUTDOWN

adapter -> orchestrator::

    READY                 answer to INIT and IMPORT
    PROGRESS <duration_ms> <cycles_completed>   optional, zero or more per RUN
    RESULT <duration_ms> <cycles_completed>     ends a RUN
    ERROR <message>

``PROGRESS`` and ``RESULT`` are each followed by a coverage report (see
``fuzzsched.coverage``) and a line ``END``. A report only lists seeds not yet
reported during the same RUN. Each ``seed_id`` names a file in the queue
directory holding the seed payload.

Seeds reported through ``PROGRESS`` survive a crash of the adapter, which is
how partial results of a crashed run reach the orchestrator.
"""

from __future__ import annotations

import logging
import queue
import shutil
import subprocess
import sys
import threading
import time
from pathlib import Path
from typing import Sequence

from fuzzsched.coverage import SeedCoverage, content_hash, parse_report_lines
from fuzzsched.errors import ProtocolError, ReportFormatError, SyncError
from fuzzsched.runtime.base import CycleResult, Fuzzer, Watchdog
from fuzzsched.seed_pool import SeedRecord

log = logging.getLogger(__name__)

_EOF = object()


class ExternalFuzzer(Fuzzer):
    kind = "external"

    def __init__(
        self,
        index: int,
        command: Sequence[str],
        queue_dir: str | Path,
        name: str | None = None,
        grace_ms: int = 2000,
        reply_timeout_s: float = 30.0,
    ):
        super().__init__(index, name)
        self.command = list(command)
        self.queue_dir = Path(queue_dir)
        self.grace_ms = grace_ms
        self.reply_timeout_s = reply_timeout_s
        self.proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self.restarts = 0

    # -- process plumbing ---------------------------------------------------

    def start(self) -> None:
        self.queue_dir.mkdir(parents=True, exist_ok=True)
        self._spawn()

    def _spawn(self) -> None:
        self._lines = queue.Queue()
        self.proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        threading.Thread(target=self._pump, args=(self.proc, self._lines), daemon=True).start()
        self._send(f"INIT {self.queue_dir.resolve()}")
        self._expect_ready()

    @staticmethod
    def _pump(proc: subprocess.Popen, lines: queue.Queue) -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            lines.put(line.rstrip("\n"))
        lines.put(_EOF)

    def _send(self, line: str) -> None:
        if self.proc is None or self.proc.stdin is None:
            raise ProtocolError(f"{self.name}: adapter not running")
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ProtocolError(f"{self.name}: write failed: {e}") from None

    def _recv(self, timeout: float):
        """Next line, ``None`` on timeout, ``_EOF`` when the adapter exited."""
        try:
            return self._lines.get(timeout=timeout)
        except queue.Empty:
            return None

    def _recv_required(self) -> str:
        line = self._recv(self.reply_timeout_s)
        if line is None:
            raise ProtocolError(f"{self.name}: no reply within {self.reply_timeout_s}s")
        if line is _EOF:
            raise ProtocolError(f"{self.name}: adapter exited")
        return line

    def _expect_ready(self) -> None:
        line = self._recv_required()
        if line.startswith("ERROR"):
            raise ProtocolError(f"{self.name}: {line}")
        if line != "READY":
            raise ProtocolError(f"{self.name}: expected READY, got {line!r}")

    def _kill(self) -> None:
        if self.proc is not None and self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()

    def close(self) -> None:
        if self.proc is None:
            return
        if self.proc.poll() is None:
            try:
                self._send("SHUTDOWN")
                self.proc.wait(timeout=5)
            except (ProtocolError, subprocess.TimeoutExpired):
                pass
        self._kill()
        for stream in (self.proc.stdin, self.proc.stdout):
            if stream is not None:
                try:
                    stream.close()
                except OSError:
                    pass
        self.proc = None

    # -- fuzzer contract ----------------------------------------------------

    def _import(self, records: list[SeedRecord]) -> None:
        paths = []
        try:
            for r in records:
                dest = self.queue_dir / r.file_name
                if not dest.exists():
                    if isinstance(r.payload_ref, Path):
                        shutil.copyfile(r.payload_ref, dest)
                    else:
                        dest.write_bytes(r.payload_ref)
                paths.append(dest.resolve())
        except OSError as e:
            self.mark_crashed()
            raise SyncError(f"{self.name}: copying seeds failed: {e}") from e
        try:
            self._send(f"IMPORT {len(paths)}")
            for p in paths:
                self._send(str(p))
            self._expect_ready()
        except ProtocolError as e:
            self.mark_crashed()
            raise SyncError(str(e)) from e

    def _read_report(self) -> list[tuple[bytes, SeedCoverage]]:
        lines = []
        while True:
            line = self._recv_required()
            if line == "END":
                break
            lines.append(line)
        try:
            reported = parse_report_lines(lines)
        except ReportFormatError as e:
            raise ProtocolError(f"{self.name}: {e}") from None
        seeds = []
        for rs in reported:
            path = self.queue_dir / rs.seed_id
            try:
                payload = path.read_bytes()
            except OSError:
                log.warning("%s: reported seed %s has no payload file", self.name, rs.seed_id)
                continue
            self.local_hashes.add(content_hash(payload))
            seeds.append((payload, rs.coverage))
        return seeds

    def _run(self, n: int, timeout_ms: int, round_no: int) -> CycleResult:
        result = CycleResult(duration=0)
        start = time.monotonic()
        grace_deadline = None
        try:
            self._send(f"RUN {n} {timeout_ms}")
            with Watchdog(timeout_ms) as wd:
                while True:
                    if wd.fired.is_set() and grace_deadline is None:
                        log.info("%s: round timeout, sending SKIP", self.name)
                        self.watchdog_skip()
                        self._send("SKIP")
                        grace_deadline = time.monotonic() + self.grace_ms / 1000.0
                    line = self._recv(0.02)
                    if line is None:
                        if grace_deadline is not None and time.monotonic() > grace_deadline:
                            log.warning("%s: no answer to SKIP, killing adapter", self.name)
                            self._kill()
                            self.mark_crashed()
                            break
                        continue
                    if line is _EOF:
                        raise ProtocolError(f"{self.name}: adapter exited mid-run")
                    head, _, rest = line.partition(" ")
                    if head in ("PROGRESS", "RESULT"):
                        try:
                            cycles = int(rest.split()[1])
                        except (IndexError, ValueError):
                            raise ProtocolError(f"{self.name}: malformed {line!r}") from None
                        result.new_seeds.extend(self._read_report())
                        result.cycles_completed = cycles
                        if head == "RESULT":
                            break
                    elif head == "ERROR":
                        raise ProtocolError(f"{self.name}: adapter error: {rest}")
                    else:
                        raise ProtocolError(f"{self.name}: unexpected line {line!r}")
        except ProtocolError as e:
            log.warning("%s", e)
            self._kill()
            self.mark_crashed()
        result.duration = max(1, int((time.monotonic() - start) * 1000))
        return result

    def _restart(self) -> None:
        self.restarts += 1
        self._kill()
        self._spawn()

    @property
    def alive(self) -> bool:
        return self.proc is not None and self.proc.poll() is None


def python_adapter_command(*args: str) -> list[str]:
    """Command line running the bundled scriptable adapter with this interpreter."""
    return [sys.executable, "-m", "fuzzsched.runtime.mock_adapter", *args]

