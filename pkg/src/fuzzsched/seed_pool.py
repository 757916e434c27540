"""Global seed pool shared by all fuzzers of a campaign."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from fuzzsched.coverage import Branch, SeedCoverage, content_hash

log = logging.getLogger(__name__)

INITIAL_CORPUS = -1


@dataclass(frozen=True)
class SeedRecord:
    seed_id: int
    content_hash: str
    payload_ref: Path | bytes
    coverage: SeedCoverage
    origin_fuzzer: int
    discovered_round: int

    def read_payload(self) -> bytes:
        if isinstance(self.payload_ref, Path):
            return self.payload_ref.read_bytes()
        return self.payload_ref

    @property
    def file_name(self) -> str:
        return seed_file_name(self.seed_id, self.content_hash)


def seed_file_name(seed_id: int, digest: str) -> str:
    return f"{seed_id:06d}_{digest[:16]}"


@dataclass
class SeedPool:
    """Content-deduplicated seeds plus the union of their branches.

    When ``storage_dir`` is set, payloads are written once to
    ``<storage_dir>/<seed_id>_<hash16>`` and records point at the file.
    """

    storage_dir: Path | None = None
    records: dict[str, SeedRecord] = field(default_factory=dict)
    branch_union: set[Branch] = field(default_factory=set)
    rejections: list[str] = field(default_factory=list)
    _next_id: int = 1

    def __post_init__(self):
        if self.storage_dir is not None:
            self.storage_dir = Path(self.storage_dir)
            self.storage_dir.mkdir(parents=True, exist_ok=True)

    def __len__(self) -> int:
        return len(self.records)

    def snapshot_hashes(self) -> frozenset[str]:
        return frozenset(self.records)

    def diff(self, local_hashes: Iterable[str]) -> list[SeedRecord]:
        """Records the holder of ``local_hashes`` is missing, by ascending seed id."""
        local = local_hashes if isinstance(local_hashes, (set, frozenset)) else set(local_hashes)
        missing = [r for h, r in self.records.items() if h not in local]
        missing.sort(key=lambda r: r.seed_id)
        return missing

    def merge(
        self,
        candidates: Sequence[tuple[bytes, SeedCoverage]],
        fuzzer: int,
        round_no: int,
    ) -> list[SeedRecord]:
        """Accept candidates that are byte-new and add at least one new branch."""
        accepted = []
        for payload, cov in candidates:
            if cov.has_duplicates():
                msg = f"fuzzer {fuzzer} round {round_no}: seed {cov.seed_id!r} reports duplicate branches"
                log.warning(msg)
                self.rejections.append(msg)
                continue
            digest = content_hash(payload)
            if digest in self.records:
                continue
            if self.branch_union.issuperset(cov.branches):
                continue
            seed_id = self._next_id
            self._next_id += 1
            ref: Path | bytes = payload
            if self.storage_dir is not None:
                ref = self.storage_dir / seed_file_name(seed_id, digest)
                ref.write_bytes(payload)
            rec = SeedRecord(
                seed_id=seed_id,
                content_hash=digest,
                payload_ref=ref,
                coverage=SeedCoverage(seed_id, cov.branches),
                origin_fuzzer=fuzzer,
                discovered_round=round_no,
            )
            self.records[digest] = rec
            self.branch_union.update(cov.branches)
            accepted.append(rec)
        return accepted
