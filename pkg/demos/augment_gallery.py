"""Render a gallery of augmented views.

Generates a few synthetic shape images, pushes each through the sampled
augmentation policy at increasing magnitude, and writes one PPM contact
sheet per magnitude level plus the unaugmented originals. Every run of
this script produces byte-identical sheets: the pipeline is seeded.

Run from the repository root:

    python3 demos/augment_gallery.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from multiaug.cropping import make_two_views
from multiaug.datasets import generate_shapes
from multiaug.policy import RandAugmentConfig, RandAugmentSource
from multiaug.ppm import encode_ppm
from multiaug.rng import Rng, derive_seed

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "gallery_out")
out_dir.mkdir(parents=True, exist_ok=True)

# One image per shape class, rendered at 48px so crops stay legible.
ds = generate_shapes(seed=11, n_per_class=1, image_side=48)
images = [img for img, _ in ds.items]
names = [ds.class_names[lbl] for _, lbl in ds.items]
print("classes:", ", ".join(names))


def contact_sheet(rows, pad=2):
    """Stack rows of equally sized images into one array with white gutters."""
    h, w = rows[0][0].shape[:2]
    n_cols = max(len(r) for r in rows)
    sheet = np.full(
        (len(rows) * (h + pad) + pad, n_cols * (w + pad) + pad, 3), 255, dtype=np.uint8
    )
    for i, row in enumerate(rows):
        for j, img in enumerate(row):
            y = pad + i * (h + pad)
            x = pad + j * (w + pad)
            sheet[y : y + h, x : x + w] = img
    return sheet


(out_dir / "originals.ppm").write_bytes(encode_ppm(contact_sheet([images])))

# Same seed per row, so the only thing changing across sheets is magnitude.
for m in (0.0, 3.0, 6.0, 9.0):
    policy = RandAugmentSource(RandAugmentConfig(n_ops=2, magnitude=m))
    rows = []
    for idx, img in enumerate(images):
        rng = Rng(derive_seed(2024, idx))
        views = []
        for _ in range(3):
            a, b = make_two_views(img, "uniform", policy, out_side=48, rng=rng)
            views.extend([a, b])
        rows.append(views)
    path = out_dir / f"magnitude_{int(m):02d}.ppm"
    path.write_bytes(encode_ppm(contact_sheet(rows)))
    print(f"wrote {path} (6 views per input at m={m})")

print(f"done; open the .ppm files in {out_dir}/")
