"""The judging machinery: P_in, P_out, P_sta, P_acc and the verdict.

All four probabilities are carried as exact rationals (arbitrary-precision
``fractions.Fraction``), never floats, so comparisons against thresholds
like 2**-128 are exact. Enumeration-space sizes may be passed as plain
integers of any magnitude; Python integers do not overflow.

A pass verdict means the discriminator meets the non-enumerability
constraints (P_in <= x, P_out <= y) and the definiteness constraints
(P_sta >= z, P_acc <= w).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .core import DiscriminatorId, KeyMaterial, ValidationError

__all__ = [
    "EvaThresholds",
    "KeyHistogram",
    "EvaReport",
    "EXACT_PROFILE",
    "LEARNED_PROFILE",
    "p_in_unique",
    "p_in_typed",
    "p_out",
    "p_sta",
    "p_acc",
    "judge",
]


@dataclass(frozen=True)
class EvaThresholds:
    """The constraint tetrad {x, y, z, w}."""

    x: Fraction
    y: Fraction
    z: Fraction
    w: Fraction

    def __post_init__(self) -> None:
        if not (0 < self.x <= 1 and 0 < self.y <= 1):
            raise ValidationError("thresholds x and y must lie in (0, 1]")
        if not (0 <= self.z <= 1 and 0 <= self.w <= 1):
            raise ValidationError("thresholds z and w must lie in [0, 1]")


#: One-to-one discriminators: stability must be perfect, accessibility zero.
EXACT_PROFILE = EvaThresholds(
    x=Fraction(1, 2**128), y=Fraction(1, 2**128), z=Fraction(1), w=Fraction(0)
)

#: Trained / typed discriminators: 95% stability, 0.5% accessibility.
LEARNED_PROFILE = EvaThresholds(
    x=Fraction(1, 2**128), y=Fraction(1, 2**128), z=Fraction(95, 100), w=Fraction(5, 1000)
)

THRESHOLD_PROFILES = {"exact": EXACT_PROFILE, "learned": LEARNED_PROFILE}


class KeyHistogram:
    """Counts of derived keys plus an out-of-band failed-derivation counter.

    The failure counter is the sentinel "non-key": it participates in every
    denominator but can never equal any real key, so failed samples always
    count against stability and never toward accessibility.
    """

    def __init__(self) -> None:
        self.counts: dict[KeyMaterial, int] = {}
        self.failed = 0

    def add(self, key: KeyMaterial, count: int = 1) -> None:
        self.counts[key] = self.counts.get(key, 0) + count

    def add_failure(self, count: int = 1) -> None:
        self.failed += count

    @property
    def total(self) -> int:
        return sum(self.counts.values()) + self.failed

    def merge(self, other: "KeyHistogram") -> None:
        for key, count in other.counts.items():
            self.add(key, count)
        self.failed += other.failed


def p_in_unique(total_samples: int) -> Fraction:
    """Enumeration probability of a unique target: 1 / total input samples."""
    if total_samples < 1:
        raise ValidationError("input space must hold at least one sample")
    return Fraction(1, total_samples)


def p_in_typed(target_class_complexity: int, total_class_complexity: int) -> Fraction:
    """Enumeration probability of a typed target: O(target) / O(total)."""
    if target_class_complexity < 1 or total_class_complexity < 1:
        raise ValidationError("class complexities must be at least 1")
    if target_class_complexity > total_class_complexity:
        raise ValidationError("target class cannot exceed the total class space")
    return Fraction(target_class_complexity, total_class_complexity)


def p_out(key_width_bits: int) -> Fraction:
    """Enumeration probability of the output space: 2**-width, exactly."""
    if key_width_bits not in (128, 256):
        raise ValidationError(f"unsupported key width {key_width_bits}")
    return Fraction(1, 2**key_width_bits)


def p_sta(positive_keys: KeyHistogram) -> tuple[Fraction, KeyMaterial | None]:
    """Key stability: modal key count over all positive samples.

    Ties between equally frequent keys break toward the lexicographically
    smallest key bits, so the chosen key is stable across runs. If every
    derivation failed there is no key and stability is zero.
    """
    total = positive_keys.total
    if total == 0:
        raise ValidationError("cannot judge stability of an empty histogram")
    if not positive_keys.counts:
        return Fraction(0), None
    best = max(positive_keys.counts.items(), key=lambda kv: (kv[1], _neg_bits(kv[0])))
    return Fraction(best[1], total), best[0]


def _neg_bits(key: KeyMaterial) -> bytes:
    # invert so that max() prefers the lexicographically smallest bits
    return bytes(0xFF - b for b in key.bits)


def p_acc(negative_keys: KeyHistogram, key: KeyMaterial | None) -> Fraction:
    """Key accessibility: fraction of negative samples mapping onto ``key``.

    Sample-key equality is full-width bitwise equality of the derived bits.
    """
    total = negative_keys.total
    if total == 0:
        raise ValidationError("cannot judge accessibility of an empty histogram")
    if key is None:
        return Fraction(0)
    hits = sum(
        count for cand, count in negative_keys.counts.items() if cand.bits == key.bits
    )
    return Fraction(hits, total)


@dataclass(frozen=True)
class EvaReport:
    """The four probabilities plus the judged verdict and run bookkeeping."""

    discriminator: DiscriminatorId | None
    p_in: Fraction
    p_out: Fraction
    p_sta: Fraction
    p_acc: Fraction
    chosen_key: KeyMaterial | None
    thresholds: EvaThresholds
    passed: bool
    positives: int = 0
    negatives: int = 0
    positive_failures: int = 0
    negative_failures: int = 0
    notes: tuple[str, ...] = field(default_factory=tuple)

    # Field order below is the documented plain-text / record layout.
    _FIELDS = (
        "discriminator",
        "positives",
        "negatives",
        "positive_failures",
        "negative_failures",
        "p_in",
        "p_out",
        "p_sta",
        "p_acc",
        "chosen_key",
        "threshold_x",
        "threshold_y",
        "threshold_z",
        "threshold_w",
        "pass",
    )

    def to_text(self) -> str:
        lines = ["eva report"]
        for name in self._FIELDS:
            lines.append(f"  {name:<20} {self._render(name)}")
        for note in self.notes:
            lines.append(f"  note                 {note}")
        return "\n".join(lines) + "\n"

    def to_record(self) -> dict:
        record = {name: self._record_value(name) for name in self._FIELDS}
        record["notes"] = list(self.notes)
        record["format"] = "envseal-eva-report/1"
        return record

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2) + "\n"

    @classmethod
    def from_record(cls, record: dict) -> "EvaReport":
        if record.get("format") != "envseal-eva-report/1":
            raise ValidationError("not an envseal eva report record")
        disc = record["discriminator"]
        disc_id = DiscriminatorId[disc] if disc else None
        chosen = record["chosen_key"]
        key = None
        if chosen:
            key = KeyMaterial.from_hex(chosen, disc_id or DiscriminatorId.TYPICAL_HASH)
        thresholds = EvaThresholds(
            x=Fraction(record["threshold_x"]),
            y=Fraction(record["threshold_y"]),
            z=Fraction(record["threshold_z"]),
            w=Fraction(record["threshold_w"]),
        )
        return cls(
            discriminator=disc_id,
            p_in=Fraction(record["p_in"]),
            p_out=Fraction(record["p_out"]),
            p_sta=Fraction(record["p_sta"]),
            p_acc=Fraction(record["p_acc"]),
            chosen_key=key,
            thresholds=thresholds,
            passed=bool(record["pass"]),
            positives=int(record["positives"]),
            negatives=int(record["negatives"]),
            positive_failures=int(record["positive_failures"]),
            negative_failures=int(record["negative_failures"]),
            notes=tuple(record.get("notes", ())),
        )

    def _render(self, name: str) -> str:
        value = self._record_value(name)
        if name.startswith("p_") or name.startswith("threshold_"):
            return f"{value} (~{float(Fraction(value)):.6g})"
        return str(value)

    def _record_value(self, name: str):
        if name == "discriminator":
            return self.discriminator.name if self.discriminator else None
        if name == "chosen_key":
            return self.chosen_key.to_hex() if self.chosen_key else None
        if name == "pass":
            return self.passed
        if name.startswith("threshold_"):
            return str(getattr(self.thresholds, name.removeprefix("threshold_")))
        if name.startswith("p_"):
            return str(getattr(self, name))
        return getattr(self, name)


def judge(
    p_in_value: Fraction,
    p_out_value: Fraction,
    p_sta_value: Fraction,
    p_acc_value: Fraction,
    thresholds: EvaThresholds,
    *,
    discriminator: DiscriminatorId | None = None,
    chosen_key: KeyMaterial | None = None,
    positives: int = 0,
    negatives: int = 0,
    positive_failures: int = 0,
    negative_failures: int = 0,
    notes: tuple[str, ...] = (),
) -> EvaReport:
    """Apply the constraint tetrad; pass requires all four to hold."""
    passed = (
        p_in_value <= thresholds.x
        and p_out_value <= thresholds.y
        and p_sta_value >= thresholds.z
        and p_acc_value <= thresholds.w
    )
    return EvaReport(
        discriminator=discriminator,
        p_in=p_in_value,
        p_out=p_out_value,
        p_sta=p_sta_value,
        p_acc=p_acc_value,
        chosen_key=chosen_key,
        thresholds=thresholds,
        passed=passed,
        positives=positives,
        negatives=negatives,
        positive_failures=positive_failures,
        negative_failures=negative_failures,
        notes=notes,
    )
