"""Shared domain types and bit-string utilities.

Bit ordering is fixed toolkit-wide: bit 0 of any key or bit string is the
most significant bit of the first octet (equivalently, of the first hex
digit). All types here are immutable values and safe to share across
threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

__all__ = [
    "EnvsealError",
    "ValidationError",
    "SampleKind",
    "Label",
    "DiscriminatorId",
    "AttributeSample",
    "KeyMaterial",
    "Bitmap",
    "leading_bits",
    "bits_to_bytes",
]

_HEX_DIGITS = frozenset("0123456789abcdef")

KEY_WIDTHS = (128, 256)


class EnvsealError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(EnvsealError):
    """An input violated a documented precondition or invariant."""


class SampleKind(enum.Enum):
    TEXT = "text"
    FILE = "file"
    IMAGE = "image"


class Label(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNLABELED = "unlabeled"


class DiscriminatorId(enum.Enum):
    """The four key-derivation algorithms; values double as wire ids."""

    VALUE_TRANSFER = 1
    TYPICAL_HASH = 2
    BDNN = 3
    PERCEPTUAL_HASH = 4


@dataclass(frozen=True)
class AttributeSample:
    """One candidate environment attribute (text, file bytes, or image).

    ``label`` is classification metadata only; no derivation may branch on
    it (the evaluator is the sole consumer).
    """

    kind: SampleKind
    data: bytes
    label: Label = Label.UNLABELED
    source_id: str = ""

    def __post_init__(self) -> None:
        if self.kind in (SampleKind.FILE, SampleKind.IMAGE) and not self.data:
            raise ValidationError(
                f"{self.kind.value} sample {self.source_id!r} has empty data"
            )

    @classmethod
    def from_text(
        cls, text: str, label: Label = Label.UNLABELED, source_id: str = ""
    ) -> "AttributeSample":
        return cls(SampleKind.TEXT, text.encode("utf-8"), label, source_id)

    def text(self) -> str:
        if self.kind is not SampleKind.TEXT:
            raise ValidationError(f"sample {self.source_id!r} is not a text sample")
        return self.data.decode("utf-8")


@dataclass(frozen=True)
class KeyMaterial:
    """A derived candidate key: ``width`` bits packed MSB-first into bytes.

    Hex rendering is lowercase and zero-padded to exactly width/4 digits.
    """

    bits: bytes
    width: int
    discriminator_id: DiscriminatorId

    def __post_init__(self) -> None:
        if self.width not in KEY_WIDTHS:
            raise ValidationError(f"unsupported key width {self.width}, expected one of {KEY_WIDTHS}")
        if len(self.bits) * 8 != self.width:
            raise ValidationError(
                f"key holds {len(self.bits) * 8} bits but declares width {self.width}"
            )

    def to_hex(self) -> str:
        return self.bits.hex()

    @classmethod
    def from_hex(cls, text: str, discriminator_id: DiscriminatorId) -> "KeyMaterial":
        """Inverse of :meth:`to_hex`. Accepts lowercase hex of 32 or 64 digits.

        Uppercase digits are rejected so that parse/render round-trips are
        exact identities in both directions.
        """
        for pos, ch in enumerate(text):
            if ch not in _HEX_DIGITS:
                raise ValidationError(f"bad hex character {ch!r} at offset {pos}")
        if len(text) not in (32, 64):
            raise ValidationError(f"key hex must be 32 or 64 digits, got {len(text)}")
        return cls(bytes.fromhex(text), len(text) * 4, discriminator_id)

    @classmethod
    def from_int(
        cls, value: int, width: int, discriminator_id: DiscriminatorId
    ) -> "KeyMaterial":
        if value < 0 or value >> width:
            raise ValidationError(f"value does not fit in {width} bits")
        return cls(value.to_bytes(width // 8, "big"), width, discriminator_id)


def leading_bits(data: bytes, nbits: int) -> int:
    """Value of the first ``nbits`` bits of ``data``, MSB-first."""
    if nbits < 0 or nbits > len(data) * 8:
        raise ValidationError(f"cannot take {nbits} bits from {len(data)} bytes")
    if nbits == 0:
        return 0
    nbytes = (nbits + 7) // 8
    value = int.from_bytes(data[:nbytes], "big")
    return value >> (nbytes * 8 - nbits)


def bits_to_bytes(value: int, nbits: int) -> bytes:
    """Pack ``nbits`` bits (MSB-first) into bytes; nbits must be octet-aligned."""
    if nbits % 8 != 0:
        raise ValidationError(f"bit count {nbits} is not octet-aligned")
    return value.to_bytes(nbits // 8, "big")


@dataclass(frozen=True)
class Bitmap:
    """Decoded raster image: 8 bits per channel, row-major, 1 or 3 channels."""

    width: int
    height: int
    channels: int
    pixels: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"bad bitmap dimensions {self.width}x{self.height}")
        if self.channels not in (1, 3):
            raise ValidationError(f"unsupported channel count {self.channels}")
        expected = self.width * self.height * self.channels
        if len(self.pixels) != expected:
            raise ValidationError(
                f"bitmap holds {len(self.pixels)} pixel bytes, expected {expected}"
            )
