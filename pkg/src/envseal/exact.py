"""The two one-to-one discriminators: value transfer and typical hash.

Value transfer splices the SSID's own bits into the front of a 128-bit key
and fills the remainder from an MD5 digest of the GUID; an SSID longer than
128 bits is collapsed to MD5(SSID) instead. The typical-hash discriminator
maps a designated file's exact bytes through a cryptographic digest.

Both are pure functions of their inputs: re-derivation is bit-identical and
any change to the attribute changes the key (up to digest collisions).
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

from .core import (
    DiscriminatorId,
    KeyMaterial,
    ValidationError,
    bits_to_bytes,
    leading_bits,
)

__all__ = [
    "HashAlgo",
    "NonConformingWidthError",
    "ValueTransferInput",
    "derive_key_value_transfer",
    "derive_key_hash",
    "digest",
]

MAX_SSID_BITS = 256
KEY_BITS = 128


class NonConformingWidthError(ValidationError):
    """Digest width cannot feed a sealable key (only 128/256 bits can)."""

    def __init__(self, algo: "HashAlgo", digest_hex: str) -> None:
        super().__init__(
            f"{algo.value} digest is {algo.digest_bits} bits; "
            f"only 128- or 256-bit keys can seal a payload"
        )
        self.algo = algo
        self.digest_hex = digest_hex


class HashAlgo(enum.Enum):
    MD5 = "md5"
    SHA1 = "sha1"
    SHA256 = "sha256"
    SHA512 = "sha512"

    @property
    def digest_bits(self) -> int:
        return _DIGEST_BITS[self]

    @property
    def conforming(self) -> bool:
        """True when the digest width is a sealable key width."""
        return self.digest_bits in (128, 256)


_DIGEST_BITS = {
    HashAlgo.MD5: 128,
    HashAlgo.SHA1: 160,
    HashAlgo.SHA256: 256,
    HashAlgo.SHA512: 512,
}


@dataclass(frozen=True)
class ValueTransferInput:
    """SSID and GUID texts; both are encoded as UTF-8 octets before use."""

    ssid: str
    guid: str

    def __post_init__(self) -> None:
        nbits = len(self.ssid.encode("utf-8")) * 8
        if nbits == 0:
            raise ValidationError("value transfer requires a non-empty SSID")
        if nbits > MAX_SSID_BITS:
            raise ValidationError(
                f"SSID is {nbits} bits; must be within (0, {MAX_SSID_BITS}]"
            )


def derive_key_value_transfer(inp: ValueTransferInput) -> KeyMaterial:
    """Derive the 128-bit value-transfer key from an SSID/GUID pair.

    SSID of n <= 128 bits: the key is the SSID bits followed by the first
    128-n bits of MD5(GUID). SSID longer than 128 bits: the key is
    MD5(SSID). An SSID of exactly 128 bits takes the first branch with a
    zero-width GUID part, so the key is the SSID verbatim.
    """
    ssid_bytes = inp.ssid.encode("utf-8")
    nbits = len(ssid_bytes) * 8
    if nbits > KEY_BITS:
        return KeyMaterial(
            hashlib.md5(ssid_bytes).digest(), KEY_BITS, DiscriminatorId.VALUE_TRANSFER
        )
    fill_bits = KEY_BITS - nbits
    guid_digest = hashlib.md5(inp.guid.encode("utf-8")).digest()
    value = (leading_bits(ssid_bytes, nbits) << fill_bits) | leading_bits(
        guid_digest, fill_bits
    )
    return KeyMaterial(
        bits_to_bytes(value, KEY_BITS), KEY_BITS, DiscriminatorId.VALUE_TRANSFER
    )


def digest(data: bytes, algo: HashAlgo) -> bytes:
    """Raw digest of the exact input octets (no normalization of any kind)."""
    if not data:
        raise ValidationError("refusing to hash empty input: a zero-length target is degenerate")
    return hashlib.new(algo.value, data).digest()


def derive_key_hash(file_bytes: bytes, algo: HashAlgo = HashAlgo.SHA256) -> KeyMaterial:
    """Derive a key as the digest of a designated file's bytes.

    SHA-1 and SHA-512 digests are computed but rejected as key material:
    their widths cannot feed the sealer (:class:`NonConformingWidthError`
    carries the computed digest for inspection).
    """
    d = digest(file_bytes, algo)
    if not algo.conforming:
        raise NonConformingWidthError(algo, d.hex())
    return KeyMaterial(d, algo.digest_bits, DiscriminatorId.TYPICAL_HASH)
