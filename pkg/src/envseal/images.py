"""Image ingestion: PGM (P5) and PNG decoding into :class:`Bitmap`.

PGM is the normative test format (trivial to author bit-exactly); PNG is
accepted for 8-bit grayscale and RGB. Decoding is strict: anything outside
those shapes is rejected rather than silently converted.
"""

from __future__ import annotations

import io

from .core import Bitmap, EnvsealError

__all__ = ["ImageDecodeError", "decode_image", "encode_pgm"]

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class ImageDecodeError(EnvsealError):
    """Raised when image bytes cannot be decoded; carries a byte offset."""

    def __init__(self, message: str, offset: int = 0) -> None:
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


def decode_image(data: bytes, source_id: str = "") -> Bitmap:
    """Decode PGM or PNG bytes; the format is sniffed from the magic."""
    if data[:2] == b"P5":
        return _decode_pgm(data)
    if data[:8] == _PNG_MAGIC:
        return _decode_png(data, source_id)
    raise ImageDecodeError(f"unrecognized image format in {source_id!r}", 0)


def encode_pgm(bitmap: Bitmap) -> bytes:
    """Serialize a grayscale bitmap as binary PGM (P5, maxval 255)."""
    if bitmap.channels != 1:
        raise ImageDecodeError("PGM encoding requires a single-channel bitmap")
    header = f"P5\n{bitmap.width} {bitmap.height}\n255\n".encode("ascii")
    return header + bitmap.pixels


def _decode_pgm(data: bytes) -> Bitmap:
    pos = 2  # past "P5"
    fields: list[int] = []
    while len(fields) < 3:
        # skip whitespace and '#' comments between header tokens
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos] == ord("#"):
            while pos < len(data) and data[pos] != ord("\n"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise ImageDecodeError("malformed PGM header", pos)
        fields.append(int(data[start:pos]))
    width, height, maxval = fields
    if maxval != 255:
        raise ImageDecodeError(f"unsupported PGM maxval {maxval}", pos)
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ImageDecodeError("missing whitespace after PGM header", pos)
    pos += 1
    pixels = data[pos : pos + width * height]
    if len(pixels) != width * height:
        raise ImageDecodeError(
            f"PGM truncated: expected {width * height} pixel bytes, got {len(pixels)}",
            pos + len(pixels),
        )
    return Bitmap(width, height, 1, pixels)


def _decode_png(data: bytes, source_id: str) -> Bitmap:
    from PIL import Image

    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ImageDecodeError(f"PNG decode failed for {source_id!r}: {exc}", 0) from exc
    if img.mode == "L":
        channels = 1
    elif img.mode == "RGB":
        channels = 3
    else:
        raise ImageDecodeError(
            f"unsupported PNG mode {img.mode!r} in {source_id!r}; need 8-bit gray or RGB", 0
        )
    return Bitmap(img.width, img.height, channels, img.tobytes())
