"""Raster I/O: binary PGM/PPM (P5/P6) plus optional PNG through Pillow.

Images are carried as planar float64 channels in [0, 255].  Quantisation
happens only at write time, rounding half to even.  Parse failures report
the byte offset that broke the header or payload.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ImageFormatError


@dataclass(frozen=True)
class ImageStack:
    """Planar real-valued channels of one raster frame."""

    planes: tuple

    def __post_init__(self):
        planes = tuple(np.asarray(p, dtype=float) for p in self.planes)
        if not planes:
            raise ValueError("at least one plane is required")
        shape = planes[0].shape
        for p in planes:
            if p.ndim != 2 or p.shape != shape:
                raise ValueError("planes must be 2D and equally shaped")
        object.__setattr__(self, "planes", planes)

    @property
    def shape(self):
        return self.planes[0].shape

    @property
    def channels(self) -> int:
        return len(self.planes)

    def gray(self) -> np.ndarray:
        """Single plane; multi-channel stacks fall back to the channel mean."""
        if self.channels == 1:
            return self.planes[0]
        return np.mean(np.stack(self.planes), axis=0)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def fail(self, message: str):
        raise ImageFormatError(message, offset=self.pos)

    def token(self) -> bytes:
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = data[self.pos : self.pos + 1]
            if c == b"#":
                while self.pos < n and data[self.pos : self.pos + 1] not in (b"\n", b"\r"):
                    self.pos += 1
            elif c.isspace():
                self.pos += 1
            else:
                break
        if self.pos >= n:
            self.fail("truncated header: expected a token")
        start = self.pos
        while self.pos < n and not data[self.pos : self.pos + 1].isspace():
            self.pos += 1
        return data[start : self.pos]

    def integer(self, what: str) -> int:
        tok = self.token()
        try:
            value = int(tok)
        except ValueError:
            self.pos -= len(tok)
            self.fail(f"invalid {what} {tok!r}")
        if value <= 0:
            self.pos -= len(tok)
            self.fail(f"non-positive {what} {value}")
        return value


def read_image(path) -> ImageStack:
    """Read a PGM (P5), PPM (P6), or (optionally) PNG file."""
    if not os.path.exists(path):
        raise ImageFormatError(f"no such file: {path}")
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    rd = _Reader(data)
    magic = rd.token()
    if magic not in (b"P5", b"P6"):
        rd.pos = 0
        rd.fail(f"unsupported format magic {magic!r} (binary PGM/PPM expected)")
    width = rd.integer("width")
    height = rd.integer("height")
    maxval = rd.integer("maxval")
    if maxval > 255:
        rd.fail(f"unsupported maxval {maxval} (8-bit data expected)")
    if rd.pos >= len(data) or not data[rd.pos : rd.pos + 1].isspace():
        rd.fail("missing single whitespace after maxval")
    rd.pos += 1
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    payload = data[rd.pos : rd.pos + need]
    if len(payload) < need:
        rd.pos += len(payload)
        rd.fail(f"truncated pixel data: expected {need} bytes")
    raw = np.frombuffer(payload, dtype=np.uint8).astype(float)
    if channels == 1:
        return ImageStack((raw.reshape(height, width),))
    interleaved = raw.reshape(height, width, 3)
    return ImageStack(tuple(interleaved[:, :, c] for c in range(3)))


def _quantize(plane: np.ndarray) -> np.ndarray:
    # np.rint rounds half to even.
    return np.clip(np.rint(np.asarray(plane, dtype=float)), 0, 255).astype(np.uint8)


def write_image(path, stack: ImageStack):
    """Write a stack as binary PGM (1 plane) or PPM (3 planes), or PNG."""
    path = str(path)
    if path.lower().endswith(".png"):
        return _write_png(path, stack)
    h, w = stack.shape
    if stack.channels == 1:
        header = f"P5\n{w} {h}\n255\n".encode()
        body = _quantize(stack.planes[0]).tobytes()
    elif stack.channels == 3:
        header = f"P6\n{w} {h}\n255\n".encode()
        body = np.stack([_quantize(p) for p in stack.planes], axis=-1).tobytes()
    else:
        raise ImageFormatError(f"cannot write {stack.channels} channels as PGM/PPM")
    with open(path, "wb") as fh:
        fh.write(header + body)


def _read_png(path) -> ImageStack:
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - environment dependent
        raise ImageFormatError("PNG support needs the optional Pillow dependency") from exc
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim == 2:
        return ImageStack((arr.astype(float),))
    return ImageStack(tuple(arr[:, :, c].astype(float) for c in range(min(3, arr.shape[2]))))


def _write_png(path, stack: ImageStack):
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - environment dependent
        raise ImageFormatError("PNG support needs the optional Pillow dependency") from exc
    if stack.channels == 1:
        Image.fromarray(_quantize(stack.planes[0]), mode="L").save(path)
    else:
        rgb = np.stack([_quantize(p) for p in stack.planes[:3]], axis=-1)
        Image.fromarray(rgb, mode="RGB").save(path)


def draw_boxes(stack: ImageStack, boxes, intensity: float = 255.0) -> ImageStack:
    """Copy of the stack with one-pixel rectangle outlines drawn on it."""
    planes = [p.copy() for p in stack.planes]
    for box in boxes:
        x0, y0 = max(0, box.x0), max(0, box.y0)
        x1 = min(stack.shape[0] - 1, box.x1)
        y1 = min(stack.shape[1] - 1, box.y1)
        for p in planes:
            p[x0, y0 : y1 + 1] = intensity
            p[x1, y0 : y1 + 1] = intensity
            p[x0 : x1 + 1, y0] = intensity
            p[x0 : x1 + 1, y1] = intensity
    return ImageStack(tuple(planes))
