"""Binary PPM (P6) codec.

P6 is the interchange format for every image artifact the toolkit writes:
dependency-free, bit-exact, diffable. Images are numpy arrays of shape
(H, W, 3), dtype uint8.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "MalformedHeader",
    "UnsupportedMaxval",
    "TruncatedPayload",
    "decode_ppm",
    "encode_ppm",
    "validate_image",
]


class MalformedHeader(ValueError):
    pass


class UnsupportedMaxval(ValueError):
    pass


class TruncatedPayload(ValueError):
    pass


def validate_image(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) array, got {getattr(img, 'shape', type(img))}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {img.dtype}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image dimensions must be >= 1, got {img.shape[:2]}")
    return img


def _read_header_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MalformedHeader("unexpected end of header")
    return data[start:pos], pos


def decode_ppm(data: bytes) -> np.ndarray:
    """Parse P6 bytes into an (H, W, 3) uint8 array."""
    if data[:2] != b"P6":
        raise MalformedHeader(f"bad magic {data[:2]!r}, expected b'P6'")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_header_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise MalformedHeader(f"non-numeric header field {tok!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeader(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(f"only maxval 255 supported, got {maxval}")
    # exactly one whitespace byte separates header from payload
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise MalformedHeader("missing whitespace before payload")
    pos += 1
    need = height * width * 3
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise TruncatedPayload(f"payload has {len(payload)} bytes, need {need}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()


def encode_ppm(img: np.ndarray) -> bytes:
    """Canonical P6 bytes: single spaces, single newlines, maxval 255."""
    validate_image(img)
    h, w = img.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img).tobytes()
