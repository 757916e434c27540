"""Campaign configuration files.

Flat ``key = value`` text with one ``[campaign]`` section and optional
``[fuzzer.N]`` sections::

    [campaign]
    name = ts-default
    targets = builtin:breakthrough-0, my_target.txt
    round_budget_s = 120        # T_I, seconds
    reset_interval_min = 120    # I_R, minutes
    duration_min = 360          # at least one stop condition is required
    max_rounds = 500
    target_coverage = 400
    seed = 0
    scheduler = ts              # ts | random | greedy | round_robin
    sync = true
    reward = interval           # interval | naive (naive runs one cycle per round)
    reset = true
    timeout_factor = 3
    check_invariants = false

    [fuzzer.0]
    kind = simulated            # simulated | external
    name = afl
    faults = 3:hang, 7:crash    # simulated only: selection number -> fault

    [fuzzer.1]
    kind = external
    command = {python} -m fuzzsched.runtime.mock_adapter --target t.txt --index 1

``target`` is accepted as a synonym of ``targets``. Target files are resolved
relative to the config file; ``builtin:<name>`` picks a bundled synthetic
target. ``{python}`` in a command expands to the running interpreter and
``{config_dir}`` to the config file's directory. Without ``[fuzzer.N]``
sections the roster is one simulated fuzzer per fuzzer profile in the first
target.
"""

from __future__ import annotations

import configparser
import dataclasses
import shlex
import sys
from dataclasses import dataclass, field
from pathlib import Path

from fuzzsched import suites
from fuzzsched.errors import ConfigError
from fuzzsched.orchestrator import MINUTE, SECOND, CampaignConfig, FuzzerSpec
from fuzzsched.runtime import target as target_io
from fuzzsched.runtime.target import SyntheticTarget

CAMPAIGN_KEYS = {
    "name",
    "target",
    "targets",
    "round_budget_s",
    "reset_interval_min",
    "max_rounds",
    "duration_min",
    "target_coverage",
    "seed",
    "scheduler",
    "sync",
    "reward",
    "reset",
    "timeout_factor",
    "check_invariants",
}
FUZZER_KEYS = {"kind", "name", "command", "faults"}
FAULT_KINDS = ("hang", "crash")


@dataclass
class LoadedConfig:
    """A parsed config: campaign knobs plus the targets they apply to."""

    path: Path | None
    base: CampaignConfig
    targets: list[SyntheticTarget | None] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.base.name

    def target_names(self) -> list[str]:
        return [t.name if t is not None else "external" for t in self.targets]

    def campaign(self, target_index: int = 0, **overrides) -> CampaignConfig:
        """A ready-to-run config for one target; ``overrides`` replace fields."""
        cfg = dataclasses.replace(self.base, target=self.targets[target_index], **overrides)
        cfg.validate()
        return cfg


def _bool(section: configparser.SectionProxy, key: str, default: bool) -> bool:
    try:
        return section.getboolean(key, fallback=default)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key}: expected true/false, got {section[key]!r}") from None


def _number(section: configparser.SectionProxy, key: str, kind=float):
    if key not in section:
        return None
    try:
        return kind(section[key])
    except ValueError:
        raise ConfigError(f"[{section.name}] {key}: expected a number, got {section[key]!r}") from None


def _parse_faults(text: str, where: str) -> dict[int, str]:
    faults = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        num, sep, kind = item.partition(":")
        if not sep or kind.strip() not in FAULT_KINDS:
            raise ConfigError(f"{where} faults: bad entry {item!r} (expected N:hang or N:crash)")
        try:
            faults[int(num)] = kind.strip()
        except ValueError:
            raise ConfigError(f"{where} faults: bad selection number {num!r}") from None
    return faults


def resolve_target(ref: str, base_dir: Path) -> SyntheticTarget:
    ref = ref.strip()
    if ref.startswith("builtin:"):
        try:
            return suites.builtin(ref[len("builtin:") :])
        except (KeyError, ValueError) as e:
            raise ConfigError(f"unknown builtin target {ref!r}") from e
    path = (base_dir / ref).resolve()
    if not path.is_file():
        raise ConfigError(f"target file not found: {path}")
    try:
        return target_io.load(path)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _fuzzer_specs(cp: configparser.ConfigParser, base_dir: Path) -> list[FuzzerSpec]:
    sections = {}
    for name in cp.sections():
        if not name.startswith("fuzzer."):
            continue
        try:
            sections[int(name.split(".", 1)[1])] = cp[name]
        except ValueError:
            raise ConfigError(f"bad section name [{name}] (expected [fuzzer.N])") from None
    if sorted(sections) != list(range(len(sections))):
        raise ConfigError(f"fuzzer sections must be numbered 0..n-1, got {sorted(sections)}")
    specs = []
    for i in range(len(sections)):
        sec = sections[i]
        unknown = set(sec) - FUZZER_KEYS
        if unknown:
            raise ConfigError(f"[fuzzer.{i}] unknown keys: {', '.join(sorted(unknown))}")
        command = sec.get("command", "")
        command = command.replace("{python}", shlex.quote(sys.executable))
        command = command.replace("{config_dir}", shlex.quote(str(base_dir)))
        specs.append(
            FuzzerSpec(
                kind=sec.get("kind", "simulated").strip(),
                name=sec.get("name"),
                command=shlex.split(command),
                faults=_parse_faults(sec.get("faults", ""), f"[fuzzer.{i}]"),
            )
        )
    return specs


def parse_config(text: str, base_dir: Path, path: Path | None = None) -> LoadedConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text, source=str(path or "<config>"))
    except configparser.Error as e:
        raise ConfigError(f"{path or 'config'}: {e}") from None
    if "campaign" not in cp:
        raise ConfigError(f"{path or 'config'}: missing [campaign] section")
    sec = cp["campaign"]
    unknown = set(sec) - CAMPAIGN_KEYS
    if unknown:
        raise ConfigError(f"[campaign] unknown keys: {', '.join(sorted(unknown))}")

    refs = sec.get("targets") or sec.get("target") or ""
    targets: list[SyntheticTarget | None] = [resolve_target(r, base_dir) for r in refs.split(",") if r.strip()]
    specs = _fuzzer_specs(cp, base_dir)
    if not specs:
        if not targets:
            raise ConfigError("no fuzzers and no target configured")
        specs = [FuzzerSpec() for _ in sorted(targets[0].solve_prob)]
    if not targets:
        targets = [None]

    budget = _number(sec, "round_budget_s")
    reset = _number(sec, "reset_interval_min")
    duration = _number(sec, "duration_min")
    timeout_factor = _number(sec, "timeout_factor")
    base = CampaignConfig(
        fuzzers=specs,
        round_budget_ms=int(budget * SECOND) if budget is not None else 120 * SECOND,
        reset_interval_ms=int(reset * MINUTE) if reset is not None else 120 * MINUTE,
        max_rounds=_number(sec, "max_rounds", int),
        duration_ms=int(duration * MINUTE) if duration is not None else None,
        target_coverage=_number(sec, "target_coverage", int),
        rng_seed=_number(sec, "seed", int) or 0,
        scheduler=sec.get("scheduler", "ts").strip(),
        sync_enabled=_bool(sec, "sync", True),
        reward_mode=sec.get("reward", "interval").strip(),
        reset_enabled=_bool(sec, "reset", True),
        timeout_factor=timeout_factor if timeout_factor is not None else 3.0,
        name=sec.get("name", path.stem if path else "campaign").strip(),
        check_invariants=_bool(sec, "check_invariants", False),
    )
    loaded = LoadedConfig(path, base, targets)
    for i in range(len(targets)):
        loaded.campaign(i)  # validates every target/roster combination up front
    return loaded


def load_config(path: str | Path) -> LoadedConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(text, path.resolve().parent, path)
