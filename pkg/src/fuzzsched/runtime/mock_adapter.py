"""Scriptable adapter process speaking the external line protocol.

It fuzzes a synthetic target with the simulated-fuzzer model, sleeping
``cycle_ms * time_scale`` of wall time per cycle. Faults can be injected to
exercise the orchestrator's watchdog::

    python -m fuzzsched.runtime.mock_adapter --target t.txt --index 0 \\
        --hang-on 2 --crash-on 3
"""

from __future__ import annotations

import argparse
import os
import queue
import random
import sys
import threading
import time
from pathlib import Path

from fuzzsched.coverage import Branch, ReportedSeed, content_hash, format_report
from fuzzsched.runtime.simulated import LocalCoverage, sim_one_cycle
from fuzzsched.runtime.target import load


def parse_payload(data: bytes) -> list[Branch]:
    out = []
    for line in data.decode(errors="replace").splitlines():
        p, sep, s = line.partition(">")
        if sep:
            try:
                out.append(Branch(int(p, 16), int(s, 16)))
            except ValueError:
                continue
    return out


class Adapter:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.target = load(args.target)
        self.local = LocalCoverage(self.target)
        self.rng = random.Random(args.seed)
        self.queue_dir: Path | None = None
        self.commands: queue.Queue = queue.Queue()
        self.runs = 0
        self.emitted = 0
        self.out = sys.stdout

    def send(self, text: str) -> None:
        self.out.write(text if text.endswith("\n") else text + "\n")
        self.out.flush()

    def read_stdin(self) -> None:
        for line in sys.stdin:
            self.commands.put(line.rstrip("\n"))
        self.commands.put(None)

    def skip_requested(self) -> bool:
        """Drain pending commands looking for SKIP; other commands are invalid mid-run."""
        while True:
            try:
                cmd = self.commands.get_nowait()
            except queue.Empty:
                return False
            if cmd is None:
                sys.exit(0)
            if cmd == "SKIP":
                return True

    def sleep(self, seconds: float, deaf: bool = False) -> bool:
        """Sleep; returns True if interrupted by SKIP."""
        deadline = time.monotonic() + seconds
        while time.monotonic() < deadline:
            if not deaf and self.skip_requested():
                return True
            time.sleep(min(0.01, max(0.0, deadline - time.monotonic())))
        return False

    def report(self, head: str, started: float, cycles: int, seeds: list[ReportedSeed]) -> None:
        ms = max(1, int((time.monotonic() - started) * 1000))
        self.send(f"{head} {ms} {cycles}")
        self.out.write(format_report(seeds))
        self.send("END")

    def run(self, n: int) -> None:
        # run count survives restarts so injected faults fire once
        assert self.queue_dir is not None
        counter = self.queue_dir / ".adapter_runs"
        self.runs = int(counter.read_text()) + 1 if counter.exists() else 1
        counter.write_text(str(self.runs))
        started = time.monotonic()
        done = 0
        for j in range(n):
            if j == min(1, n - 1):
                if self.runs in self.args.crash_on:
                    os._exit(3)
                if self.runs in self.args.hang_on:
                    while not self.sleep(0.05, deaf=self.args.deaf):
                        pass
                    break
            seeds = self.cycle()
            done += 1
            interrupted = self.sleep(self.target.cycle_time(self.args.index) * self.args.time_scale / 1000.0)
            if j < n - 1 and not interrupted:
                self.report("PROGRESS", started, done, seeds)
            else:
                self.report("RESULT", started, done, seeds)
                return
        self.report("RESULT", started, done, [])

    def cycle(self) -> list[ReportedSeed]:
        assert self.queue_dir is not None
        seeds, _ = sim_one_cycle(self.target, self.args.index, self.local, self.rng)
        out = []
        for payload, cov in seeds:
            self.local.add(cov.branches)
            name = f"own_{self.args.index}_{self.runs:04d}_{self.emitted:06d}"
            self.emitted += 1
            (self.queue_dir / name).write_bytes(payload)
            out.append(ReportedSeed(name, content_hash(payload), cov))
        return out

    def main(self) -> int:
        threading.Thread(target=self.read_stdin, daemon=True).start()
        while True:
            cmd = self.commands.get()
            if cmd is None or cmd == "SHUTDOWN":
                return 0
            head, _, rest = cmd.partition(" ")
            if head == "INIT":
                self.queue_dir = Path(rest)
                self.queue_dir.mkdir(parents=True, exist_ok=True)
                for f in sorted(self.queue_dir.iterdir()):
                    if f.name.startswith("."):
                        continue
                    self.local.add(parse_payload(f.read_bytes()))
                self.send("READY")
            elif head == "IMPORT":
                for _ in range(int(rest)):
                    path = self.commands.get()
                    if path is None:
                        return 0
                    self.local.add(parse_payload(Path(path).read_bytes()))
                self.send("READY")
            elif head == "RUN":
                self.run(int(rest.split()[0]))
            elif head == "SKIP":
                continue
            else:
                self.send(f"ERROR unknown command {head}")


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="mock_adapter")
    ap.add_argument("--target", required=True)
    ap.add_argument("--index", type=int, default=0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--time-scale", type=float, default=0.001)
    ap.add_argument("--hang-on", type=int, action="append", default=[])
    ap.add_argument("--crash-on", type=int, action="append", default=[])
    ap.add_argument("--deaf", action="store_true", help="ignore SKIP while hung")
    return Adapter(ap.parse_args(argv)).main()


if __name__ == "__main__":
    sys.exit(main())
