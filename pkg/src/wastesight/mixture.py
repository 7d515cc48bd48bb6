"""Gaussian-mixture clustering of labeled 2-D points.

A single mixture is fit per scene over all foreground tile centers with
k-means-seeded expectation-maximization; class labels are applied to the
resulting clusters afterwards by confidence-weighted vote.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ClassLabel, DegenerateInput, LabeledPoint, NUM_CLASSES

#: Lower bound on covariance eigenvalues, in pixels^2. Sliding-window centers
#: sit on a lattice, so a component can collapse onto collinear points; the
#: floor keeps every component non-singular.
COV_FLOOR = 1.0

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: tuple[float, float]
    cov: tuple[tuple[float, float], tuple[float, float]]


@dataclass(frozen=True)
class GaussianMixture:
    """A fitted mixture plus its final log-likelihood and fit trace."""

    components: tuple[GaussianComponent, ...]
    log_likelihood: float
    n_iter: int = 0
    history: tuple[float, ...] = ()

    def __len__(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class SizeEllipse:
    """Object extent: semi-axes (a >= b) in pixels and orientation of the
    major axis in radians, normalized to [0, pi)."""

    a: float
    b: float
    theta: float


@dataclass(frozen=True)
class DetectedObject:
    label: ClassLabel
    center: tuple[float, float]
    ellipse: SizeEllipse
    support: int
    mean_confidence: float


def choose_k(image_w: int, image_h: int, clusters_per_megapixel: float,
             n_points: int) -> int:
    """Cluster count from image area: round(area_mpx * density), clamped to
    [1, n_points]."""
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    raw = round(image_w * image_h / 1e6 * clusters_per_megapixel)
    return int(min(max(raw, 1), n_points))


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (n, 2) points, got shape {arr.shape}")
    return arr


def _check_distinct(pts: np.ndarray, k: int) -> None:
    if len(np.unique(pts, axis=0)) < k:
        raise DegenerateInput(f"need at least {k} distinct points")


def kmeans_seed(points, k: int, seed: int) -> np.ndarray:
    """K-means++ initialization followed by Lloyd iterations.

    Runs until the assignment reaches a fixpoint or 50 iterations; empty
    clusters are reseeded to the point currently farthest from its centroid.
    Deterministic in (points, k, seed). Returns a (k, 2) array of means.
    """
    pts = _as_points(points)
    n = len(pts)
    if k < 1 or k > n:
        raise DegenerateInput(f"k={k} not in [1, {n}]")
    _check_distinct(pts, k)
    rng = np.random.default_rng(seed)

    # k-means++: D^2-weighted sampling of initial centers
    centers = np.empty((k, 2), dtype=np.float64)
    centers[0] = pts[rng.integers(n)]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            remaining = np.nonzero(d2 == d2.max())[0]
            idx = remaining[rng.integers(len(remaining))]
        else:
            idx = int(np.searchsorted(np.cumsum(d2 / total), rng.random(), side="right"))
            idx = min(idx, n - 1)
        centers[j] = pts[idx]
        d2 = np.minimum(d2, ((pts - centers[j]) ** 2).sum(axis=1))

    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(50):
        dists = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = dists.argmin(axis=1)
        for j in range(k):
            members = pts[new_assign == j]
            if len(members) == 0:
                farthest = int(dists[np.arange(n), new_assign].argmax())
                centers[j] = pts[farthest]
                new_assign[farthest] = j
                dists[farthest, :] = 0.0  # not a candidate for further reseeds
            else:
                centers[j] = members.mean(axis=0)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return centers


def _log_density(pts: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Log of the bivariate normal pdf at each point."""
    a, b, c = cov[0, 0], cov[0, 1], cov[1, 1]
    det = a * c - b * b
    dx = pts[:, 0] - mean[0]
    dy = pts[:, 1] - mean[1]
    quad = (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det
    return -_LOG_2PI - 0.5 * math.log(det) - 0.5 * quad


def _floor_cov(cov: np.ndarray) -> np.ndarray:
    """Symmetrize and raise both eigenvalues to at least COV_FLOOR."""
    sym = 0.5 * (cov + cov.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals[0] >= COV_FLOOR:
        return sym
    eigvals = np.maximum(eigvals, COV_FLOOR)
    floored = (eigvecs * eigvals) @ eigvecs.T
    return 0.5 * (floored + floored.T)


def _log_joint(pts: np.ndarray, weights: np.ndarray, means: np.ndarray,
               covs: np.ndarray) -> np.ndarray:
    """log(w_k * N(x_i; mu_k, cov_k)) for every point/component pair."""
    k = len(weights)
    out = np.empty((len(pts), k), dtype=np.float64)
    for j in range(k):
        out[:, j] = math.log(weights[j]) + _log_density(pts, means[j], covs[j])
    return out


def _logsumexp_rows(log_joint: np.ndarray) -> np.ndarray:
    peak = log_joint.max(axis=1)
    return peak + np.log(np.exp(log_joint - peak[:, None]).sum(axis=1))


def _init_params(pts: np.ndarray, k: int, seed: int):
    means = kmeans_seed(pts, k, seed)
    dists = ((pts[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    assign = dists.argmin(axis=1)
    covs = np.empty((k, 2, 2), dtype=np.float64)
    for j in range(k):
        members = pts[assign == j]
        if len(members) == 0:
            covs[j] = np.eye(2) * COV_FLOOR
            continue
        centered = members - members.mean(axis=0)
        covs[j] = _floor_cov(centered.T @ centered / len(members))
    weights = np.full(k, 1.0 / k, dtype=np.float64)
    return weights, means, covs


def em_fit(points, k: int, max_iters: int = 200, tol: float = 1e-6,
           seed: int = 0) -> GaussianMixture:
    """Fit a k-component 2-D Gaussian mixture by expectation-maximization.

    Initialization: k-means seeding with per-cluster scatter covariances
    (floored) and uniform weights. Each iteration computes responsibilities
    r(i, k) proportional to w_k * N(x_i; mu_k, cov_k) in the log domain,
    then the closed-form weight/mean/covariance updates, re-flooring the
    covariances. Stops when the log-likelihood changes by less than ``tol``
    or after ``max_iters`` iterations; the returned log_likelihood is
    evaluated at the returned parameters.
    """
    pts = _as_points(points)
    n = len(pts)
    if k < 1 or n < k:
        raise DegenerateInput(f"k={k} not in [1, {n}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_distinct(pts, k)

    weights, means, covs = _init_params(pts, k, seed)
    history: list[float] = []
    prev_ll = -math.inf
    n_iter = 0
    for _ in range(max_iters):
        log_joint = _log_joint(pts, weights, means, covs)
        row_lse = _logsumexp_rows(log_joint)
        ll = float(row_lse.sum())
        history.append(ll)
        if abs(ll - prev_ll) < tol:
            break
        prev_ll = ll
        n_iter += 1

        resp = np.exp(log_joint - row_lse[:, None])
        mass = resp.sum(axis=0)
        weights = mass / n
        means = (resp.T @ pts) / mass[:, None]
        for j in range(k):
            centered = pts - means[j]
            scatter = (resp[:, j][:, None] * centered).T @ centered / mass[j]
            covs[j] = _floor_cov(scatter)

    log_joint = _log_joint(pts, weights, means, covs)
    final_ll = float(_logsumexp_rows(log_joint).sum())
    history.append(final_ll)

    components = tuple(
        GaussianComponent(
            weight=float(weights[j]),
            mean=(float(means[j, 0]), float(means[j, 1])),
            cov=((float(covs[j, 0, 0]), float(covs[j, 0, 1])),
                 (float(covs[j, 1, 0]), float(covs[j, 1, 1]))),
        )
        for j in range(k)
    )
    return GaussianMixture(components=components, log_likelihood=final_ll,
                           n_iter=n_iter, history=tuple(history))


def responsibilities(mixture: GaussianMixture, points) -> np.ndarray:
    """Posterior component probabilities, one row per point (rows sum to 1)."""
    pts = _as_points(points)
    weights = np.asarray([c.weight for c in mixture.components])
    means = np.asarray([c.mean for c in mixture.components])
    covs = np.asarray([c.cov for c in mixture.components])
    log_joint = _log_joint(pts, weights, means, covs)
    return np.exp(log_joint - _logsumexp_rows(log_joint)[:, None])


def ellipse_from_cov(cov, n_sigma: float = 2.0) -> SizeEllipse:
    """Covariance eigendecomposition to an n-sigma extent ellipse."""
    arr = np.asarray(cov, dtype=np.float64)
    eigvals, eigvecs = np.linalg.eigh(0.5 * (arr + arr.T))
    major = eigvecs[:, 1]
    theta = math.atan2(major[1], major[0]) % math.pi
    a = n_sigma * math.sqrt(max(eigvals[1], 0.0))
    b = n_sigma * math.sqrt(max(eigvals[0], 0.0))
    return SizeEllipse(a=a, b=b, theta=theta)


def clusters_to_objects(mixture: GaussianMixture, points: Sequence[LabeledPoint],
                        min_support: int = 2) -> list[DetectedObject]:
    """Turn mixture components into labeled objects.

    Each point is hard-assigned to its max-responsibility component. A
    component with at least ``min_support`` members becomes an object whose
    label is the confidence-weighted majority vote of its members (ties to
    the lower class code) and whose extent is the 2-sigma ellipse of its
    covariance. Trash-labeled objects are kept; filtering them is a
    rendering concern.
    """
    if not points:
        return []
    positions = np.asarray([p.position for p in points], dtype=np.float64)
    assign = responsibilities(mixture, positions).argmax(axis=1)

    objects: list[DetectedObject] = []
    for j, comp in enumerate(mixture.components):
        member_idx = np.nonzero(assign == j)[0]
        if len(member_idx) < min_support:
            continue
        votes = np.zeros(NUM_CLASSES, dtype=np.float64)
        conf_sum = 0.0
        for i in member_idx:
            votes[points[i].label] += points[i].confidence
            conf_sum += points[i].confidence
        label = ClassLabel(int(votes.argmax()))
        objects.append(DetectedObject(
            label=label,
            center=comp.mean,
            ellipse=ellipse_from_cov(comp.cov),
            support=int(len(member_idx)),
            mean_confidence=conf_sum / len(member_idx),
        ))
    return objects
