"""Sealing and unsealing payloads behind a derived key.

Container layout (all fields big-endian, offsets in octets):

    0   magic       "EKC1" (4)
    4   version     0x01 (1)
    5   suite       1 = AES-128-CBC/PKCS7, 2 = AES-256-CBC/PKCS7 (1)
    6   discr. id   wire value of the deriving discriminator (1)
    7   salt        16 random octets
    23  iv          16 random octets
    39  key_check   first 8 octets of SHA-256(salt || key_bits)
    47  hmac        HMAC-SHA-256 over octets [0, 47) || ciphertext,
                    mac key = SHA-256("mac" || key_bits) (32)
    79  ciphertext  positive multiple of 16 octets

Unsealing is gated: the key check runs first and a mismatch rejects the
candidate before a single AES block is touched (the block-operation counter
below makes that observable). The HMAC is a deliberate addition on top of
the plain CBC+PKCS7 suite: it detects container tampering before the padding
is ever inspected, so padding errors can only signal internal corruption,
never key wrongness.
"""

from __future__ import annotations

import enum
import hashlib
import hmac as hmac_mod
import secrets
from dataclasses import dataclass, field
from typing import Callable

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .core import DiscriminatorId, EnvsealError, KeyMaterial, ValidationError

__all__ = [
    "CipherSuite",
    "SealedContainer",
    "SealerError",
    "ContainerFormatError",
    "KeyMismatchError",
    "MacMismatchError",
    "PadCorruptError",
    "seal",
    "key_check",
    "unseal",
    "block_ops",
    "reset_block_ops",
]

MAGIC = b"EKC1"
VERSION = 1
HEADER_LEN = 79
BLOCK = 16


class SealerError(EnvsealError):
    pass


class ContainerFormatError(SealerError):
    """Container bytes are malformed (bad magic, version, or lengths)."""


class KeyMismatchError(SealerError):
    """Candidate key failed the key check; nothing was decrypted."""


class MacMismatchError(SealerError):
    """Container authentication failed: the container was tampered with."""


class PadCorruptError(SealerError):
    """Padding inconsistent after a passing key check and MAC: internal corruption."""


class CipherSuite(enum.Enum):
    AES128_CBC_PKCS7 = 1
    AES256_CBC_PKCS7 = 2

    @property
    def key_bits(self) -> int:
        return 128 if self is CipherSuite.AES128_CBC_PKCS7 else 256

    @classmethod
    def for_key(cls, key: KeyMaterial) -> "CipherSuite":
        for suite in cls:
            if suite.key_bits == key.width:
                return suite
        raise ValidationError(f"no cipher suite for {key.width}-bit keys")


# AES block-operation counters; incremented by the cipher helpers so tests
# can observe that rejected candidates trigger zero decryptions.
_block_ops = {"encrypt": 0, "decrypt": 0}


def block_ops() -> dict[str, int]:
    return dict(_block_ops)


def reset_block_ops() -> None:
    _block_ops["encrypt"] = 0
    _block_ops["decrypt"] = 0


def _aes_cbc_encrypt(key: bytes, iv: bytes, data: bytes) -> bytes:
    _block_ops["encrypt"] += len(data) // BLOCK
    enc = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return enc.update(data) + enc.finalize()


def _aes_cbc_decrypt(key: bytes, iv: bytes, data: bytes) -> bytes:
    _block_ops["decrypt"] += len(data) // BLOCK
    dec = Cipher(algorithms.AES(key), modes.CBC(iv)).decryptor()
    return dec.update(data) + dec.finalize()


def _pkcs7_pad(data: bytes) -> bytes:
    padlen = BLOCK - (len(data) % BLOCK)
    return data + bytes([padlen]) * padlen


def _pkcs7_strip(data: bytes) -> bytes:
    if not data or len(data) % BLOCK:
        raise PadCorruptError("ciphertext length is not a positive multiple of 16")
    padlen = data[-1]
    if not 1 <= padlen <= BLOCK or data[-padlen:] != bytes([padlen]) * padlen:
        raise PadCorruptError("inconsistent PKCS7 padding")
    return data[:-padlen]


def _key_check_value(salt: bytes, key_bits: bytes) -> bytes:
    return hashlib.sha256(salt + key_bits).digest()[:8]


def _mac_key(key_bits: bytes) -> bytes:
    return hashlib.sha256(b"mac" + key_bits).digest()


@dataclass(frozen=True)
class SealedContainer:
    """The cipher payload plus the header needed to judge a candidate key."""

    suite: CipherSuite
    discriminator_id: DiscriminatorId
    salt: bytes
    iv: bytes
    key_check: bytes
    hmac: bytes
    ciphertext: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.salt) != 16 or len(self.iv) != 16:
            raise ContainerFormatError("salt and iv must be 16 octets each")
        if len(self.key_check) != 8 or len(self.hmac) != 32:
            raise ContainerFormatError("key_check must be 8 octets, hmac 32")
        if not self.ciphertext or len(self.ciphertext) % BLOCK:
            raise ContainerFormatError(
                "ciphertext length must be a positive multiple of 16"
            )

    def to_bytes(self) -> bytes:
        return (
            MAGIC
            + bytes([VERSION, self.suite.value, self.discriminator_id.value])
            + self.salt
            + self.iv
            + self.key_check
            + self.hmac
            + self.ciphertext
        )

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SealedContainer":
        if blob[:4] != MAGIC:
            raise ContainerFormatError("bad magic; not a sealed container")
        if len(blob) < HEADER_LEN + BLOCK:
            raise ContainerFormatError("container truncated")
        if blob[4] != VERSION:
            raise ContainerFormatError(f"unsupported container version {blob[4]}")
        try:
            suite = CipherSuite(blob[5])
            discriminator = DiscriminatorId(blob[6])
        except ValueError as exc:
            raise ContainerFormatError(str(exc)) from exc
        return cls(
            suite=suite,
            discriminator_id=discriminator,
            salt=blob[7:23],
            iv=blob[23:39],
            key_check=blob[39:47],
            hmac=blob[47:79],
            ciphertext=blob[79:],
        )


def seal(
    plain_payload: bytes,
    key: KeyMaterial,
    suite: CipherSuite | None = None,
    *,
    rng: Callable[[int], bytes] = secrets.token_bytes,
) -> SealedContainer:
    """Encrypt a payload under ``key`` with fresh random salt and iv.

    ``rng`` must be a cryptographically secure generator; tests may inject a
    seeded one. The payload may be empty (sealing then yields one padding
    block).
    """
    suite = suite or CipherSuite.for_key(key)
    if key.width != suite.key_bits:
        raise ValidationError(
            f"{key.width}-bit key cannot drive {suite.name} ({suite.key_bits}-bit)"
        )
    salt, iv = rng(16), rng(16)
    ciphertext = _aes_cbc_encrypt(key.bits, iv, _pkcs7_pad(plain_payload))
    header = (
        MAGIC
        + bytes([VERSION, suite.value, key.discriminator_id.value])
        + salt
        + iv
        + _key_check_value(salt, key.bits)
    )
    mac = hmac_mod.new(_mac_key(key.bits), header + ciphertext, hashlib.sha256).digest()
    return SealedContainer(
        suite=suite,
        discriminator_id=key.discriminator_id,
        salt=salt,
        iv=iv,
        key_check=header[39:47],
        hmac=mac,
        ciphertext=ciphertext,
    )


def key_check(container: SealedContainer, candidate: KeyMaterial) -> bool:
    """True iff the candidate passes the container's truncated key check.

    A candidate of the wrong width is rejected without hashing. Comparison
    is constant-time.
    """
    if candidate.width != container.suite.key_bits:
        return False
    return hmac_mod.compare_digest(
        _key_check_value(container.salt, candidate.bits), container.key_check
    )


def unseal(container: SealedContainer, candidate: KeyMaterial) -> bytes:
    """Recover the plain payload, or reject without emitting a single octet.

    Gate order: key check first (KeyMismatchError, zero AES operations),
    then container authentication (MacMismatchError), then decryption and
    padding removal (PadCorruptError only on internal inconsistency).
    """
    if not key_check(container, candidate):
        raise KeyMismatchError("candidate key does not match this container")
    prefix = (
        MAGIC
        + bytes([VERSION, container.suite.value, container.discriminator_id.value])
        + container.salt
        + container.iv
        + container.key_check
    )
    expected = hmac_mod.new(
        _mac_key(candidate.bits), prefix + container.ciphertext, hashlib.sha256
    ).digest()
    if not hmac_mod.compare_digest(expected, container.hmac):
        raise MacMismatchError("container authentication failed")
    padded = _aes_cbc_decrypt(candidate.bits, container.iv, container.ciphertext)
    return _pkcs7_strip(padded)
