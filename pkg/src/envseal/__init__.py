"""envseal: environmental-keying research toolkit.

Derives encryption keys from designated environment attributes (texts,
files, images) through four discriminators, seals benign payloads behind
those keys, and judges each discriminator's non-enumerability and
definiteness (P_in, P_out, P_sta, P_acc) over labeled corpora.
"""

__version__ = "0.1.0"

from .core import (
    AttributeSample,
    Bitmap,
    DiscriminatorId,
    EnvsealError,
    KeyMaterial,
    Label,
    SampleKind,
    ValidationError,
)

__all__ = [
    "__version__",
    "AttributeSample",
    "Bitmap",
    "DiscriminatorId",
    "EnvsealError",
    "KeyMaterial",
    "Label",
    "SampleKind",
    "ValidationError",
]
