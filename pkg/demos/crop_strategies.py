"""Compare the two crop strategies numerically and visually.

The uniform strategy draws one linear scale from [0.5, 1] and preserves
aspect; the inception strategy draws an area fraction from [0.08, 1] and
a log-uniform aspect from [3/4, 4/3]. This script prints the sampled
scale distributions side by side and writes a sheet of example crops so
the geometric difference is visible at a glance.

Run from the repository root:

    python3 demos/crop_strategies.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from multiaug.cropping import crop_ratio_stats, resolve_strategy
from multiaug.datasets import generate_shapes
from multiaug.ppm import encode_ppm
from multiaug.rng import Rng
from multiaug.transforms import resize_bilinear

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "crop_out")
out_dir.mkdir(parents=True, exist_ok=True)

print("sampled scale statistics (100000 draws on a 64x64 frame)")
print(f"{'strategy':<10} {'reports':<14} {'min':>7} {'max':>7} {'mean':>7} {'std':>7}")
for strategy, reports in (("uniform", "linear ratio"), ("inception", "area fraction")):
    s = crop_ratio_stats(strategy, samples=100_000, height=64, width=64, seed=7)
    print(
        f"{strategy:<10} {reports:<14} "
        f"{s['min']:7.3f} {s['max']:7.3f} {s['mean']:7.3f} {s['std']:7.3f}"
    )

# Visual: one source image, eight crops per strategy, all resized back to
# the source side so the sheet rows align.
src = generate_shapes(seed=3, n_per_class=1, image_side=64).items[1][0]
rows = []
for strategy in ("uniform", "inception"):
    sampler = resolve_strategy(strategy)
    rng = Rng(99)
    row = [src]
    for _ in range(8):
        r = sampler(rng, 64, 64)
        crop = src[r.y0 : r.y0 + r.h, r.x0 : r.x0 + r.w]
        row.append(resize_bilinear(crop, 64, 64))
    rows.append(row)

pad = 2
h = w = 64
sheet = np.full((2 * (h + pad) + pad, 9 * (w + pad) + pad, 3), 255, dtype=np.uint8)
for i, row in enumerate(rows):
    for j, img in enumerate(row):
        sheet[pad + i * (h + pad) :][: h, pad + j * (w + pad) :][:, :w] = img
path = out_dir / "crops.ppm"
path.write_bytes(encode_ppm(sheet))
print(f"\nwrote {path}")
print("row 1: uniform (original leftmost); row 2: inception")
print("uniform crops keep the square aspect; inception crops stretch it")
