"""Image transform kernels for the extended augmentation search space.

All kernels take and return (H, W, 3) uint8 arrays of the same size
(resize excepted). Channel arithmetic runs in float64; results are clamped
to [0, 255] and then rounded half away from zero, one rule everywhere, so
outputs are bit-exact and platform independent.
"""

from __future__ import annotations

import enum
import math

import numpy as np

__all__ = [
    "TransformKind",
    "blend",
    "invert",
    "solarize",
    "solarize_add",
    "posterize",
    "autocontrast",
    "equalize",
    "adjust",
    "hue_shift",
    "gaussian_blur",
    "color_drop",
    "affine_sample",
    "resize_bilinear",
]

AFFINE_FILL = 128  # midpoint gray for samples outside the source raster


class TransformKind(enum.Enum):
    """The 18 transforms the policy sampler draws from."""

    AutoContrast = "AutoContrast"
    Equalize = "Equalize"
    Invert = "Invert"
    Posterize = "Posterize"
    Solarize = "Solarize"
    Sharpness = "Sharpness"
    Color = "Color"
    SolarizeAdd = "SolarizeAdd"
    ShearX = "ShearX"
    ShearY = "ShearY"
    TranslateX = "TranslateX"
    TranslateY = "TranslateY"
    RandBrightness = "RandBrightness"
    RandContrast = "RandContrast"
    RandSaturation = "RandSaturation"
    RandHue = "RandHue"
    RandBlur = "RandBlur"
    ColorDrop = "ColorDrop"


def _finish(x: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255], round half away from zero, cast to uint8."""
    return np.floor(np.clip(x, 0.0, 255.0) + 0.5).astype(np.uint8)


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def blend(a: np.ndarray, b: np.ndarray, factor: float) -> np.ndarray:
    """Per-channel a + factor * (b - a). factor 0 is a, factor 1 is b."""
    _check_same_shape(a, b)
    if not 0.0 <= factor <= 2.0:
        raise ValueError(f"blend factor must be in [0, 2], got {factor}")
    return _finish(a.astype(np.float64) + factor * (b.astype(np.float64) - a.astype(np.float64)))


def invert(img: np.ndarray) -> np.ndarray:
    return (255 - img.astype(np.int16)).astype(np.uint8)


def solarize(img: np.ndarray, threshold: int) -> np.ndarray:
    """Invert channels at or above threshold; 256 is identity, 0 full invert."""
    if not 0 <= threshold <= 256:
        raise ValueError(f"solarize threshold must be in [0, 256], got {threshold}")
    return np.where(img >= threshold, 255 - img.astype(np.int16), img).astype(np.uint8)


def solarize_add(img: np.ndarray, add: int, threshold: int = 128) -> np.ndarray:
    """Brighten channels below threshold by `add`, leave the rest alone."""
    if not 0 <= add <= 110:
        raise ValueError(f"solarize_add amount must be in [0, 110], got {add}")
    bumped = np.clip(img.astype(np.int16) + add, 0, 255)
    return np.where(img < threshold, bumped, img).astype(np.uint8)


def posterize(img: np.ndarray, bits: int) -> np.ndarray:
    """Keep the top `bits` bits of each channel."""
    if not 1 <= bits <= 8:
        raise ValueError(f"posterize bits must be in [1, 8], got {bits}")
    mask = (0xFF << (8 - bits)) & 0xFF
    return (img & np.uint8(mask)).astype(np.uint8)


def autocontrast(img: np.ndarray) -> np.ndarray:
    """Stretch each channel's observed [min, max] to [0, 255]."""
    out = np.empty_like(img)
    for c in range(3):
        ch = img[:, :, c]
        m = int(ch.min())
        mx = int(ch.max())
        if m == mx:
            out[:, :, c] = ch
            continue
        lut = _finish((np.arange(256, dtype=np.float64) - m) * 255.0 / (mx - m))
        out[:, :, c] = lut[ch]
    return out


def equalize(img: np.ndarray) -> np.ndarray:
    """Histogram equalization with the classic integer LUT.

    Per channel: with histogram h and nonzero bins h[i1..ik], when k > 1 and
    step = (sum(h) - h[ik]) // 255 > 0, the LUT is built by the running
    recurrence n = step // 2; LUT[i] = min(255, n // step); n += h[i].
    Deliberately integer-only; not idempotent in general.
    """
    out = np.empty_like(img)
    for c in range(3):
        ch = img[:, :, c]
        h = np.bincount(ch.ravel(), minlength=256)
        nonzero = np.flatnonzero(h)
        if len(nonzero) <= 1:
            out[:, :, c] = ch
            continue
        step = (int(h.sum()) - int(h[nonzero[-1]])) // 255
        if step == 0:
            out[:, :, c] = ch
            continue
        # closed form of the recurrence: n = step//2; LUT[i] = min(255, n//step); n += h[i]
        prefix = np.concatenate(([0], np.cumsum(h[:-1])))
        lut = np.minimum(255, (step // 2 + prefix) // step).astype(np.uint8)
        out[:, :, c] = lut[ch]
    return out


def color_drop(img: np.ndarray) -> np.ndarray:
    """Replace all channels with the rounded Rec.601 luma."""
    f = img.astype(np.float64)
    luma = _finish(0.299 * f[:, :, 0] + 0.587 * f[:, :, 1] + 0.114 * f[:, :, 2])
    return np.repeat(luma[:, :, None], 3, axis=2)


def _smooth(img: np.ndarray) -> np.ndarray:
    # 3x3 kernel [[1,1,1],[1,5,1],[1,1,1]] / 13, border pixels copied unchanged
    out = img.copy()
    h, w = img.shape[:2]
    if h < 3 or w < 3:
        return out
    f = img.astype(np.float64)
    acc = 5.0 * f[1:-1, 1:-1]
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            acc = acc + f[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
    out[1:-1, 1:-1] = _finish(acc / 13.0)
    return out


VARIANT_SHARPNESS = "sharpness"
VARIANT_SATURATION = "saturation"
VARIANT_CONTRAST = "contrast"
VARIANT_BRIGHTNESS = "brightness"


def adjust(variant: str, img: np.ndarray, factor: float) -> np.ndarray:
    """Blend the image against a degenerate base; factor 1 is the identity.

    Bases: sharpness -> 3x3-smoothed copy; saturation -> grayscale copy;
    contrast -> constant image at the rounded mean gray level;
    brightness -> all black.
    """
    if not 0.0 <= factor <= 2.0:
        raise ValueError(f"adjust factor must be in [0, 2], got {factor}")
    if variant == VARIANT_SHARPNESS:
        base = _smooth(img)
    elif variant == VARIANT_SATURATION:
        base = color_drop(img)
    elif variant == VARIANT_CONTRAST:
        gray = color_drop(img)[:, :, 0].astype(np.float64)
        level = np.floor(gray.mean() + 0.5)
        base = np.full_like(img, np.uint8(level))
    elif variant == VARIANT_BRIGHTNESS:
        base = np.zeros_like(img)
    else:
        raise ValueError(f"unknown adjust variant {variant!r}")
    return blend(base, img, factor)


def hue_shift(img: np.ndarray, delta: float) -> np.ndarray:
    """Rotate hue by `delta` turns via the hexcone RGB<->HSV model.

    Channels scale to [0, 1]; H = fract(H + delta); conversion back uses the
    standard sector table with red/green/blue priority for ties. delta 0
    returns an exact copy.
    """
    if not -0.5 <= delta <= 0.5:
        raise ValueError(f"hue delta must be in [-0.5, 0.5], got {delta}")
    if delta == 0.0:
        return img.copy()
    f = img.astype(np.float64) / 255.0
    r, g, b = f[:, :, 0], f[:, :, 1], f[:, :, 2]
    maxc = np.max(f, axis=2)
    minc = np.min(f, axis=2)
    c = maxc - minc
    safe_c = np.where(c == 0.0, 1.0, c)
    h = np.where(
        c == 0.0,
        0.0,
        np.where(
            r == maxc,
            np.mod((g - b) / safe_c, 6.0),
            np.where(g == maxc, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
        ),
    ) / 6.0
    s = np.where(maxc == 0.0, 0.0, c / np.where(maxc == 0.0, 1.0, maxc))
    v = maxc

    h = np.mod(h + delta, 1.0)
    h6 = h * 6.0
    sector = np.floor(h6).astype(np.int64) % 6
    frac = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * frac)
    t = v * (1.0 - s * (1.0 - frac))
    # sector -> (r, g, b) selection
    rr = np.choose(sector, [v, q, p, p, t, v])
    gg = np.choose(sector, [t, v, v, q, p, p])
    bb = np.choose(sector, [p, p, t, v, v, q])
    return _finish(np.stack([rr, gg, bb], axis=2) * 255.0)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian, radius ceil(3*sigma), reflect padding at borders."""
    if sigma <= 0.0:
        raise ValueError(f"blur sigma must be > 0, got {sigma}")
    r = math.ceil(3.0 * sigma)
    offsets = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    w /= w.sum()
    f = img.astype(np.float64)
    for axis in (1, 0):
        pad = [(0, 0), (0, 0), (0, 0)]
        pad[axis] = (r, r)
        padded = np.pad(f, pad, mode="symmetric")
        acc = np.zeros_like(f)
        for k in range(2 * r + 1):
            sl = [slice(None)] * 3
            sl[axis] = slice(k, k + img.shape[axis])
            acc += w[k] * padded[tuple(sl)]
        f = acc
    return _finish(f)


_AFFINE_KINDS = ("ShearX", "ShearY", "TranslateX", "TranslateY")

_PIXEL_GRIDS: dict = {}


def _pixel_grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Memoized (xs, ys) pixel-center coordinate grids; treat as read-only."""
    key = (h, w)
    g = _PIXEL_GRIDS.get(key)
    if g is None:
        ys, xs = np.meshgrid(
            np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
        )
        if len(_PIXEL_GRIDS) >= 1024:
            _PIXEL_GRIDS.clear()
        g = _PIXEL_GRIDS[key] = (xs, ys)
    return g


def affine_sample(img: np.ndarray, kind: str, amount: float) -> np.ndarray:
    """Shear or translate by inverse mapping with bilinear sampling.

    Shears use `amount` as a dimensionless factor; translations as a
    fraction of width/height. Samples outside the raster read the constant
    gray fill.
    """
    if kind not in _AFFINE_KINDS:
        raise ValueError(f"unknown affine kind {kind!r}")
    if not -1.0 <= amount <= 1.0:
        raise ValueError(f"affine amount must be in [-1, 1], got {amount}")
    h, w = img.shape[:2]
    xs, ys = _pixel_grid(h, w)
    # Every kind moves along one axis only, so the other coordinate stays
    # integral and bilinear sampling degenerates to 1-D interpolation.
    if kind == "ShearX":
        return _finish(_linear_fill(img, xs + amount * ys, axis=1))
    if kind == "ShearY":
        return _finish(_linear_fill(img, ys + amount * xs, axis=0))
    if kind == "TranslateX":
        return _finish(_linear_fill(img, xs - amount * w, axis=1))
    return _finish(_linear_fill(img, ys - amount * h, axis=0))


def _linear_fill(img: np.ndarray, coord: np.ndarray, axis: int) -> np.ndarray:
    """Sample along one axis at fractional coordinates, gray fill outside.

    Matches _bilinear_fill when the other axis' coordinates are integral.
    """
    h, w = img.shape[:2]
    limit = w - 1 if axis == 1 else h - 1
    c0 = np.floor(coord)
    fc = (coord - c0)[:, :, None]
    f = img.reshape(-1, 3).astype(np.float64)
    shape = coord.shape + (3,)
    if axis == 1:
        base = np.arange(h, dtype=np.int64)[:, None] * w
        stride = 1
    else:
        base = np.arange(w, dtype=np.int64)[None, :]
        stride = w
    out = np.zeros(shape, dtype=np.float64)
    for dc, wgt in ((0, 1 - fc), (1, fc)):
        cc = c0 + dc
        inside = (cc >= 0) & (cc <= limit)
        idx = base + np.clip(cc, 0, limit).astype(np.int64) * stride
        vals = f.take(idx.ravel(), axis=0).reshape(shape)
        vals[~inside] = float(AFFINE_FILL)
        out += wgt * vals
    return out


def _bilinear_fill(img: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = (sx - x0)[:, :, None]
    fy = (sy - y0)[:, :, None]
    f = img.reshape(-1, 3).astype(np.float64)
    shape = sx.shape + (3,)
    out = np.zeros(shape, dtype=np.float64)
    for dy, dx, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (0, 1, fx * (1 - fy)),
        (1, 0, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        cx = x0 + dx
        cy = y0 + dy
        inside = (cx >= 0) & (cx <= w - 1) & (cy >= 0) & (cy <= h - 1)
        idx = np.clip(cy, 0, h - 1).astype(np.int64) * w + np.clip(cx, 0, w - 1).astype(np.int64)
        vals = f.take(idx.ravel(), axis=0).reshape(shape)
        vals[~inside] = float(AFFINE_FILL)
        out += wgt * vals
    return out


# Index/weight plans keyed by (in_h, in_w, out_h, out_w); crops are small and
# repeat sizes heavily, so this trades a bounded cache for per-call setup.
_RESIZE_PLANS: dict = {}


def _resize_plan(h: int, w: int, out_h: int, out_w: int):
    key = (h, w, out_h, out_w)
    plan = _RESIZE_PLANS.get(key)
    if plan is None:
        sx = np.clip((np.arange(out_w, dtype=np.float64) + 0.5) * w / out_w - 0.5, 0.0, w - 1.0)
        sy = np.clip((np.arange(out_h, dtype=np.float64) + 0.5) * h / out_h - 0.5, 0.0, h - 1.0)
        x0 = np.floor(sx).astype(np.int64)
        y0 = np.floor(sy).astype(np.int64)
        x1 = np.minimum(x0 + 1, w - 1)
        y1 = np.minimum(y0 + 1, h - 1)
        fx = (sx - x0)[None, :, None]
        fy = (sy - y0)[:, None, None]
        rows0 = y0[:, None] * w
        rows1 = y1[:, None] * w
        idx = tuple((r + c[None, :]).ravel() for r, c in ((rows0, x0), (rows0, x1), (rows1, x0), (rows1, x1)))
        if len(_RESIZE_PLANS) >= 1024:
            _RESIZE_PLANS.clear()
        plan = _RESIZE_PLANS[key] = (fx, fy, idx)
    return plan


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize with half-pixel centers; source coords clamp to the raster."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be >= 1, got {out_h}x{out_w}")
    h, w = img.shape[:2]
    fx, fy, (i00, i01, i10, i11) = _resize_plan(h, w, out_h, out_w)
    f = img.reshape(-1, 3).astype(np.float64)
    shape = (out_h, out_w, 3)
    top = (1 - fx) * f.take(i00, axis=0).reshape(shape) + fx * f.take(i01, axis=0).reshape(shape)
    bot = (1 - fx) * f.take(i10, axis=0).reshape(shape) + fx * f.take(i11, axis=0).reshape(shape)
    return _finish((1 - fy) * top + fy * bot)
