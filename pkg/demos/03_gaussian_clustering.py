#!/usr/bin/env python3
"""Fit a 2-D Gaussian mixture to scattered points and draw the result.

This is the post-classification stage in isolation: labeled tile centers
come in, expectation-maximization groups them, and each component's mean
and covariance become an object's position and size ellipse.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Ellipse

from wastesight import choose_k, em_fit, kmeans_seed
from wastesight.mixture import ellipse_from_cov

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(7)
true_centers = [(150, 150), (420, 180), (280, 420)]
points = np.concatenate([
    rng.normal(loc=c, scale=(28, 16), size=(120, 2)) for c in true_centers])

# The cluster count comes from image scale, not from the data: a density of
# "expected objects per megapixel" times the scene area.
k = choose_k(560, 560, clusters_per_megapixel=9.57, n_points=len(points))
print(f"area-derived component count: k={k}")

seeds = kmeans_seed(points, k, seed=1)
print("k-means seeds:")
for s in seeds:
    print(f"  ({s[0]:7.2f}, {s[1]:7.2f})")

mixture = em_fit(points, k, seed=1)
print(f"\nconverged after {mixture.n_iter} iterations, "
      f"log-likelihood {mixture.log_likelihood:.2f}")
for comp in mixture.components:
    ellipse = ellipse_from_cov(comp.cov)
    print(f"  weight={comp.weight:.3f}  mean=({comp.mean[0]:6.1f}, {comp.mean[1]:6.1f})  "
          f"2-sigma ellipse a={ellipse.a:5.1f} b={ellipse.b:5.1f} "
          f"theta={np.degrees(ellipse.theta):6.1f} deg")

fig, ax = plt.subplots(figsize=(6, 6))
ax.scatter(points[:, 0], points[:, 1], s=6, c="gray", alpha=0.6)
for comp in mixture.components:
    ellipse = ellipse_from_cov(comp.cov)
    ax.add_patch(Ellipse(comp.mean, 2 * ellipse.a, 2 * ellipse.b,
                         angle=np.degrees(ellipse.theta),
                         fill=False, color="tab:red", lw=2))
    ax.plot(*comp.mean, "x", color="tab:red", ms=10)
ax.set_aspect("equal")
ax.set_title("EM fit: component means and 2-sigma ellipses")
ax.invert_yaxis()  # pixel coordinates: y grows downward
fig.savefig(OUT / "gmm_fit.png", dpi=120)
print(f"\nwrote {OUT / 'gmm_fit.png'}")

# The fit trace is monotone: every EM step can only improve the likelihood.
deltas = np.diff(np.asarray(mixture.history))
print(f"log-likelihood deltas all >= 0: {bool((deltas >= -1e-9).all())}")
