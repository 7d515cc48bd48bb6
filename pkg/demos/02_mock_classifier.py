#!/usr/bin/env python3
"""Poke at the mock tile classifier and the tone-adjustment preprocessing.

The mock scores a tile by its mean color's distance to six reference
colors, squashed through a softmax. It exists so the whole pipeline can be
exercised without a trained network, but its scores behave like real
confidences: thresholdable, smooth, deterministic.
"""

import numpy as np

from wastesight import ClassLabel, DEFAULT_PALETTE, RasterImage, adjust_tone, mock_classify


def describe(name, tile):
    scores = mock_classify(tile)
    label, confidence = scores.top()
    row = "  ".join(f"{l.text[:5]}={p:.3f}" for l, p in zip(ClassLabel, scores.probs))
    print(f"{name:>18s}: top={label.text:<9s} conf={confidence:.3f}   [{row}]")


print("palette:")
for label, color in DEFAULT_PALETTE.items():
    print(f"  {label.text:<9s} {color}")

print("\nsolid tiles of each palette color classify as themselves:")
for label, color in DEFAULT_PALETTE.items():
    describe(label.text, RasterImage.filled(32, 32, color))

print("\na white tile is nobody's object; its best score stays below 0.5,")
print("which is what the background filter keys on:")
describe("white", RasterImage.filled(32, 32, (255, 255, 255)))

# Tone adjustment is the mitigation for glare-heavy scenes: contrast is
# rescaled about mid-gray, then brightness is scaled.
glare = RasterImage.filled(32, 32, (240, 240, 250))
for factors in [(1.0, 1.0), (0.8, 0.7), (0.5, 0.5)]:
    toned = adjust_tone(glare, *factors)
    print(f"\nglare tile after brightness={factors[0]}, contrast={factors[1]}: "
          f"mean={toned.pixels.mean():.1f}")
    describe("toned glare", toned)
