#!/usr/bin/env python3
"""Walk a scene with overlapping windows and look at what comes back.

The tiler never synthesizes pixels: interior windows march at a fixed step
and the final window per axis is clamped to the image edge, so the union of
all windows covers every pixel exactly.
"""

from pathlib import Path

import numpy as np

from wastesight import RasterImage, extract_tiles, plan_grid
from wastesight.imaging import save_png

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

# A 500x380 gradient scene: deliberately NOT divisible by the step so the
# edge clamp kicks in.
ys, xs = np.mgrid[0:380, 0:500]
scene = RasterImage(np.stack([
    (xs * 255 / 499).astype(np.uint8),
    (ys * 255 / 379).astype(np.uint8),
    np.full_like(xs, 64, dtype=np.uint8),
], axis=2))

grid = plan_grid(scene.width, scene.height, 128, 128, overlap=0.5)
print(f"{scene.width}x{scene.height} scene, 128x128 windows, overlap 0.5")
print(f"step: ({grid.step_x}, {grid.step_y}), tiles: {len(grid)}")

xs_used = sorted({p.region.x for p in grid.placements})
ys_used = sorted({p.region.y for p in grid.placements})
print(f"x positions: {xs_used}   <- note the clamped 372")
print(f"y positions: {ys_used}   <- note the clamped 252")

# Each placement records where its tile came from, so downstream stages can
# map tile-level decisions back into scene coordinates.
filled = extract_tiles(scene, grid)
first = filled.placements[0]
print(f"first tile region: {first.region}, center: {first.center}")

# Lay the tiles out on a contact sheet with 2px gutters.
cols = len(xs_used)
rows = len(ys_used)
sheet = np.zeros((rows * 130, cols * 130, 3), dtype=np.uint8)
for idx, placement in enumerate(filled.placements):
    r, c = divmod(idx, cols)
    sheet[r * 130:r * 130 + 128, c * 130:c * 130 + 128] = placement.tile.pixels
save_png(RasterImage(sheet), OUT / "contact_sheet.png")
print(f"wrote {OUT / 'contact_sheet.png'}")
