"""The unlocking harness: sweep declared candidate attributes at a container.

For each candidate (up to an explicit limit, so runs always terminate) the
scanner derives a key and runs the container's key check; the first
accepted candidate is unsealed to the output sink and the sweep stops.
Candidate order is lexicographic by source id, so reports are identical
across runs over identical inputs. Nothing outside the declared root is
ever read, and no payload byte is written unless the key check and full
unseal both succeed.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .core import AttributeSample, EnvsealError, SampleKind, ValidationError
from .discriminators import Discriminator
from .sealer import SealedContainer, key_check, unseal

__all__ = ["SourceKind", "CandidateSource", "ScanReport", "scan", "iter_candidates"]


class SourceKind(enum.Enum):
    TEXT_LIST = "textlist"
    FILE_TREE = "filetree"
    IMAGE_DIR = "imagedir"


_SAMPLE_KIND = {
    SourceKind.TEXT_LIST: SampleKind.TEXT,
    SourceKind.FILE_TREE: SampleKind.FILE,
    SourceKind.IMAGE_DIR: SampleKind.IMAGE,
}


@dataclass(frozen=True)
class CandidateSource:
    """Where candidates come from: a text list file or a directory tree."""

    kind: SourceKind
    root: Path
    limit: int
    pattern: str = "*"

    def __post_init__(self) -> None:
        if self.limit <= 0:
            raise ValidationError("candidate limit must be positive")


@dataclass(frozen=True)
class ScanReport:
    attempted: int
    matched: tuple[str, str] | None  # (source_id, key hex)
    elapsed_s: float
    errors: dict[str, int] = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            "scan report",
            f"  attempted            {self.attempted}",
            f"  matched              {self.matched[0] if self.matched else '-'}",
            f"  key                  {self.matched[1] if self.matched else '-'}",
            f"  elapsed_s            {self.elapsed_s:.3f}",
        ]
        for name in sorted(self.errors):
            lines.append(f"  error[{name}]         {self.errors[name]}")
        return "\n".join(lines) + "\n"


def iter_candidates(source: CandidateSource) -> Iterator[AttributeSample]:
    """Candidates in deterministic (lexicographic by source id) order."""
    kind = _SAMPLE_KIND[source.kind]
    if source.kind is SourceKind.TEXT_LIST:
        lines = source.root.read_text(encoding="utf-8").splitlines()
        for lineno, line in enumerate(lines, start=1):
            if not line:
                continue
            yield AttributeSample(
                kind, line.encode("utf-8"), source_id=f"{source.root.name}:{lineno:06d}"
            )
        return
    root = source.root.resolve()
    paths = sorted(
        (p for p in source.root.rglob(source.pattern) if p.is_file()),
        key=lambda p: p.relative_to(source.root).as_posix(),
    )
    for p in paths:
        if not p.resolve().is_relative_to(root):
            continue  # symlink escaping the declared root: never followed
        yield AttributeSample(kind, p.read_bytes(), source_id=p.relative_to(source.root).as_posix())


def scan(
    container: SealedContainer,
    source: CandidateSource,
    discriminator: Discriminator,
    output_path: str | Path,
) -> ScanReport:
    """Sweep candidates at the container; unseal the first match.

    The container's discriminator id must match the supplied discriminator
    (checked before any candidate is read). Every attempted candidate gets
    exactly one derivation; every successful derivation gets exactly one
    key check. An unreadable source aborts the sweep with the report so
    far. A MAC failure after a passing key check means the container is
    corrupt and propagates.
    """
    if container.discriminator_id is not discriminator.id:
        raise ValidationError(
            f"container was sealed by {container.discriminator_id.name}, "
            f"scan supplied {discriminator.id.name}"
        )
    start = time.monotonic()
    attempted = 0
    matched = None
    errors: dict[str, int] = {}
    candidates = iter_candidates(source)
    while attempted < source.limit:
        try:
            sample = next(candidates)
        except StopIteration:
            break
        except OSError as exc:
            errors[type(exc).__name__] = errors.get(type(exc).__name__, 0) + 1
            break  # source unreadable: abort with the report so far
        attempted += 1
        try:
            key = discriminator.derive(sample)
        except EnvsealError as exc:
            errors[type(exc).__name__] = errors.get(type(exc).__name__, 0) + 1
            continue
        if key_check(container, key):
            payload = unseal(container, key)
            Path(output_path).write_bytes(payload)
            matched = (sample.source_id, key.to_hex())
            break
    return ScanReport(attempted, matched, time.monotonic() - start, errors)
