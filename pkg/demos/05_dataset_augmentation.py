#!/usr/bin/env python3
"""Balance an uneven image collection by random crop + flip augmentation.

Every original is kept (rescaled and center-cropped); classes short of the
target are topped up with randomly cropped, sometimes-flipped variants of
their own originals. A counter-based generator keyed by (seed, class,
index) makes the output file-for-file reproducible.
"""

import shutil
import tempfile
from collections import Counter
from pathlib import Path

import numpy as np
from PIL import Image

from wastesight import ClassLabel, Origin, augment_dataset, split_manifest

work = Path(tempfile.mkdtemp(prefix="augment_demo_"))
src = work / "src"

# A deliberately lopsided source tree, 48x36 color-field images.
counts = {"paper": 40, "glass": 30, "plastic": 25, "metal": 20,
          "cardboard": 18, "trash": 6}
rng = np.random.default_rng(0)
for name, n in counts.items():
    (src / name).mkdir(parents=True)
    for i in range(n):
        arr = np.empty((36, 48, 3), dtype=np.uint8)
        arr[:] = rng.integers(0, 256, size=3, dtype=np.uint8)
        Image.fromarray(arr).save(src / name / f"{name}{i:03d}.png")

manifest = augment_dataset(src, work / "balanced", target_per_class=40,
                           out_w=34, out_h=26, seed=9)

print("per-class totals after augmentation:")
origins = Counter((e.label, e.origin) for e in manifest.entries)
for label in ClassLabel:
    originals = origins[(label, Origin.ORIGINAL)]
    augmented = origins[(label, Origin.AUGMENTED)]
    print(f"  {label.text:<9s} {originals:3d} originals + {augmented:3d} augmented "
          f"= {originals + augmented}")

train, val, test = split_manifest(manifest, (0.7, 0.15, 0.15), seed=1)
print(f"\nstratified split: train={len(train.entries)} "
      f"val={len(val.entries)} test={len(test.entries)}")

sizes = {Image.open(work / "balanced" / e.path).size for e in manifest.entries}
print(f"every output file decodes to: {sizes}")

shutil.rmtree(work)
print("\n(scratch directory removed)")
