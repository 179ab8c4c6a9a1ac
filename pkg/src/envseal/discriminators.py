"""Uniform attribute-to-key adapters over the four derivation algorithms.

The corpus evaluator and the scanner treat a discriminator as: an id, a key
width, a declared input-space enumeration probability, and a pure
``derive(sample) -> KeyMaterial``. Input-space sizes are declared analytic
inputs (they are not measurable from a finite corpus); the default declares
the 2**-128 bound that all four constructions target, and callers may
override it.
"""

from __future__ import annotations

from fractions import Fraction

from .core import AttributeSample, DiscriminatorId, KeyMaterial, SampleKind, ValidationError
from .exact import HashAlgo, ValueTransferInput, derive_key_hash, derive_key_value_transfer
from .images import decode_image
from .phash import derive_key_phash

__all__ = [
    "Discriminator",
    "ValueTransferDiscriminator",
    "TypicalHashDiscriminator",
    "PerceptualHashDiscriminator",
    "BdnnDiscriminator",
    "build_discriminator",
]

DEFAULT_P_IN = Fraction(1, 2**128)


class Discriminator:
    """Base adapter; subclasses set id/width and implement ``derive``."""

    id: DiscriminatorId
    key_width_bits: int

    def __init__(self, declared_p_in: Fraction = DEFAULT_P_IN) -> None:
        self.declared_p_in = declared_p_in

    def derive(self, sample: AttributeSample) -> KeyMaterial:
        raise NotImplementedError


class ValueTransferDiscriminator(Discriminator):
    """Text samples are SSIDs; the GUID is fixed configuration."""

    id = DiscriminatorId.VALUE_TRANSFER
    key_width_bits = 128

    def __init__(self, guid: str, declared_p_in: Fraction = DEFAULT_P_IN) -> None:
        super().__init__(declared_p_in)
        self.guid = guid

    def derive(self, sample: AttributeSample) -> KeyMaterial:
        if sample.kind is not SampleKind.TEXT:
            raise ValidationError(f"value transfer needs text samples, got {sample.kind.value}")
        return derive_key_value_transfer(ValueTransferInput(sample.text(), self.guid))


class TypicalHashDiscriminator(Discriminator):
    """Hashes the sample's exact bytes; accepts any non-empty attribute."""

    key_width_bits: int
    id = DiscriminatorId.TYPICAL_HASH

    def __init__(self, algo: HashAlgo = HashAlgo.SHA256,
                 declared_p_in: Fraction = DEFAULT_P_IN) -> None:
        super().__init__(declared_p_in)
        self.algo = algo
        self.key_width_bits = algo.digest_bits

    def derive(self, sample: AttributeSample) -> KeyMaterial:
        return derive_key_hash(sample.data, self.algo)


class PerceptualHashDiscriminator(Discriminator):
    id = DiscriminatorId.PERCEPTUAL_HASH
    key_width_bits = 128

    def derive(self, sample: AttributeSample) -> KeyMaterial:
        if sample.kind is not SampleKind.IMAGE:
            raise ValidationError(f"perceptual hash needs image samples, got {sample.kind.value}")
        return derive_key_phash(decode_image(sample.data, sample.source_id))


class BdnnDiscriminator(Discriminator):
    id = DiscriminatorId.BDNN
    key_width_bits = 128

    def __init__(self, model, declared_p_in: Fraction = DEFAULT_P_IN) -> None:
        super().__init__(declared_p_in)
        self.model = model

    def derive(self, sample: AttributeSample) -> KeyMaterial:
        from .bdnn import derive_key_bdnn

        if sample.kind is not SampleKind.IMAGE:
            raise ValidationError(f"B-DNN needs image samples, got {sample.kind.value}")
        return derive_key_bdnn(self.model, decode_image(sample.data, sample.source_id))


def build_discriminator(
    method: str,
    *,
    guid: str | None = None,
    algo: str = "sha256",
    model_path: str | None = None,
    declared_p_in: Fraction = DEFAULT_P_IN,
) -> Discriminator:
    """Construct a discriminator from CLI-style arguments."""
    if method == "vt":
        if guid is None:
            raise ValidationError("value transfer needs --guid")
        return ValueTransferDiscriminator(guid, declared_p_in)
    if method == "hash":
        try:
            return TypicalHashDiscriminator(HashAlgo(algo), declared_p_in)
        except ValueError:
            raise ValidationError(f"unknown hash algorithm {algo!r}") from None
    if method == "phash":
        return PerceptualHashDiscriminator(declared_p_in)
    if method == "bdnn":
        if model_path is None:
            raise ValidationError("bdnn needs --model")
        from .bdnn import load_model

        return BdnnDiscriminator(load_model(model_path), declared_p_in)
    raise ValidationError(f"unknown method {method!r}")
