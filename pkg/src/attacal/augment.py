"""Image transforms for test-time augmentation and the eight augmentation policies.

Images are dense ``(H, W, C)`` float arrays with values in ``[0, max_value]``.
Random transforms draw from an explicit ``numpy.random.Generator``; policies
build a Philox (counter-based) generator from their seed.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import InvalidInputError

CROP_RATIO = 0.8
BRIGHTNESS_RANGE = (-0.5, 0.5)
CONTRAST_RANGE = (-0.2, 0.2)

TENSOR_MAGIC = b"ATIM"
TENSOR_VERSION = 1
_TENSOR_HEADER = struct.Struct("<4sHIIId")


@dataclass(frozen=True)
class Image:
    pixels: np.ndarray
    max_value: float = 1.0

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or min(px.shape) < 1:
            raise InvalidInputError(f"image must be H x W x C with positive sizes, got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise InvalidInputError("image contains non-finite pixels")
        if not self.max_value > 0:
            raise InvalidInputError("max_value must be positive")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "max_value", float(self.max_value))

    @property
    def shape(self):
        return self.pixels.shape

    def with_pixels(self, pixels) -> "Image":
        return Image(np.clip(pixels, 0.0, self.max_value), self.max_value)


def flip(img: Image) -> Image:
    """Mirror around the vertical axis (reverse the column order)."""
    return Image(img.pixels[:, ::-1, :], img.max_value)


def crop_shape(h: int, w: int) -> tuple[int, int]:
    # round half up
    return int(np.floor(CROP_RATIO * h + 0.5)), int(np.floor(CROP_RATIO * w + 0.5))


def crop(img: Image, rng: np.random.Generator) -> Image:
    """Random sub-block of about 80% of each side, without resizing."""
    h, w, _ = img.shape
    if h < 2 or w < 2:
        raise InvalidInputError("image too small to crop")
    ch, cw = crop_shape(h, w)
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    return Image(img.pixels[top:top + ch, left:left + cw, :], img.max_value)


def brightness(img: Image, rng: np.random.Generator | None = None, beta: float | None = None) -> Image:
    """Add ``beta`` times the image's own maximum pixel, ``beta ~ U[-0.5, 0.5]``."""
    if beta is None:
        beta = rng.uniform(*BRIGHTNESS_RANGE)
    return img.with_pixels(img.pixels + beta * img.pixels.max())


def contrast(img: Image, rng: np.random.Generator | None = None, alpha: float | None = None) -> Image:
    """Scale every pixel by ``1 + alpha``, ``alpha ~ U[-0.2, 0.2]``."""
    if alpha is None:
        alpha = rng.uniform(*CONTRAST_RANGE)
    return img.with_pixels(img.pixels * (1.0 + alpha))


TRANSFORMS = {
    "flip": lambda img, rng: flip(img),
    "crop": crop,
    "brightness": brightness,
    "contrast": contrast,
}


@dataclass(frozen=True)
class AugPolicy:
    """Ordered ``(transform, replicates)`` entries; each entry is one augmentation type."""

    entries: tuple
    seed: int = 0

    def __post_init__(self):
        entries = tuple((str(kind), int(n)) for kind, n in self.entries)
        if not entries:
            raise InvalidInputError("policy needs at least one entry")
        for kind, n in entries:
            if kind not in TRANSFORMS:
                raise InvalidInputError(f"unknown transform {kind!r}")
            if n < 1:
                raise InvalidInputError("replicate counts must be at least 1")
        object.__setattr__(self, "entries", entries)

    @property
    def n_types(self) -> int:
        return len(self.entries)

    @property
    def n_images(self) -> int:
        return sum(n for _, n in self.entries)


_F, _CR, _B, _CT = ("flip", 1), ("crop", 5), ("brightness", 5), ("contrast", 5)
POLICY_TABLE = {
    1: (_F, _CR),
    2: (_F, _B),
    3: (_CR, _B),
    4: (_F, _CR, _B),
    5: (_F, _CR, _CT),
    6: (_F, _B, _CT),
    7: (_CR, _B, _CT),
    8: (_F, _CR, _B, _CT),
}


def policy(number: int, seed: int = 0) -> AugPolicy:
    if number not in POLICY_TABLE:
        raise InvalidInputError(f"policy must be one of 1..8, got {number}")
    return AugPolicy(POLICY_TABLE[number], seed)


def apply_policy(img: Image, pol: AugPolicy) -> list[tuple[int, int, Image]]:
    """All augmented copies as ``(type index, replicate index, image)``."""
    rng = np.random.Generator(np.random.Philox(pol.seed))
    out = []
    for i, (kind, n) in enumerate(pol.entries):
        fn = TRANSFORMS[kind]
        for j in range(n):
            out.append((i, j, fn(img, rng)))
    return out


def write_tensor(path, img: Image) -> None:
    """Little-endian header (magic, version, H, W, C, max_value) then float64 pixels."""
    h, w, c = img.shape
    with open(path, "wb") as fh:
        fh.write(_TENSOR_HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION, h, w, c, img.max_value))
        fh.write(np.ascontiguousarray(img.pixels, dtype="<f8").tobytes())


def read_tensor(path) -> Image:
    data = Path(path).read_bytes()
    if len(data) < _TENSOR_HEADER.size:
        raise InvalidInputError(f"{path}: truncated tensor header")
    magic, version, h, w, c, max_value = _TENSOR_HEADER.unpack_from(data)
    if magic != TENSOR_MAGIC or version != TENSOR_VERSION:
        raise InvalidInputError(f"{path}: not a version {TENSOR_VERSION} tensor file")
    body = data[_TENSOR_HEADER.size:]
    if len(body) != h * w * c * 8:
        raise InvalidInputError(f"{path}: pixel payload has wrong size")
    return Image(np.frombuffer(body, dtype="<f8").reshape(h, w, c), max_value)


def _pnm_tokens(data: bytes, count: int):
    tokens, pos = [], 2
    while len(tokens) < count:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    return tokens, pos + 1


def read_pnm(path) -> Image:
    """Binary PGM (P5) or PPM (P6), 8 or 16 bit."""
    data = Path(path).read_bytes()
    kind = data[:2]
    if kind not in (b"P5", b"P6"):
        raise InvalidInputError(f"{path}: only binary P5/P6 files are supported")
    (w, h, maxval), offset = _pnm_tokens(data, 3)
    c = 1 if kind == b"P5" else 3
    dtype = ">u2" if maxval > 255 else "u1"
    px = np.frombuffer(data, dtype=dtype, count=h * w * c, offset=offset)
    return Image(px.reshape(h, w, c).astype(np.float64), float(maxval))


def write_pnm(path, img: Image) -> None:
    h, w, c = img.shape
    if c not in (1, 3):
        raise InvalidInputError("PNM output needs 1 or 3 channels")
    maxval = int(round(img.max_value))
    if not 1 <= maxval <= 65535:
        raise InvalidInputError("PNM max_value must be in [1, 65535]")
    dtype = ">u2" if maxval > 255 else "u1"
    px = np.clip(np.rint(img.pixels), 0, maxval).astype(dtype)
    with open(path, "wb") as fh:
        fh.write(b"P5\n" if c == 1 else b"P6\n")
        fh.write(f"{w} {h}\n{maxval}\n".encode())
        fh.write(px.tobytes())


def read_image(path) -> Image:
    suffix = Path(path).suffix.lower()
    if suffix in (".pgm", ".ppm", ".pnm"):
        return read_pnm(path)
    return read_tensor(path)
