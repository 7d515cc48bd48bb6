import math

import numpy as np
import pytest

from wastesight.core import ClassLabel, DegenerateInput, LabeledPoint
from wastesight.mixture import (
    COV_FLOOR,
    DetectedObject,
    choose_k,
    clusters_to_objects,
    ellipse_from_cov,
    em_fit,
    kmeans_seed,
    responsibilities,
)


# --------------------------------------------------------------------------
# Straight-line oracle: one full E+M step with plain python arithmetic
# --------------------------------------------------------------------------

def floor2x2(c):
    a, b, d = c[0][0], c[0][1], c[1][1]
    half_gap = math.sqrt((a - d) ** 2 / 4.0 + b * b)
    l1 = (a + d) / 2.0 + half_gap
    l2 = (a + d) / 2.0 - half_gap
    if l2 >= COV_FLOOR:
        return [[a, b], [b, d]]
    l1c, l2c = max(l1, COV_FLOOR), max(l2, COV_FLOOR)
    if b == 0.0:
        v1 = (1.0, 0.0) if a >= d else (0.0, 1.0)
    else:
        vx, vy = b, l1 - a
        norm = math.sqrt(vx * vx + vy * vy)
        v1 = (vx / norm, vy / norm)
    v2 = (-v1[1], v1[0])
    m00 = l1c * v1[0] * v1[0] + l2c * v2[0] * v2[0]
    m01 = l1c * v1[0] * v1[1] + l2c * v2[0] * v2[1]
    m11 = l1c * v1[1] * v1[1] + l2c * v2[1] * v2[1]
    return [[m00, m01], [m01, m11]]


def gauss_pdf(p, mean, cov):
    a, b, d = cov[0][0], cov[0][1], cov[1][1]
    det = a * d - b * b
    dx, dy = p[0] - mean[0], p[1] - mean[1]
    quad = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det
    return math.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))


def oracle_one_em_step(pts, seed_means):
    """Initialization from given means + exactly one E and one M step."""
    k = len(seed_means)
    n = len(pts)

    assign = []
    for p in pts:
        dists = [(p[0] - m[0]) ** 2 + (p[1] - m[1]) ** 2 for m in seed_means]
        assign.append(dists.index(min(dists)))

    weights = [1.0 / k] * k
    means = [list(m) for m in seed_means]
    covs = []
    for j in range(k):
        members = [p for p, a in zip(pts, assign) if a == j]
        mx = sum(p[0] for p in members) / len(members)
        my = sum(p[1] for p in members) / len(members)
        sxx = sum((p[0] - mx) ** 2 for p in members) / len(members)
        sxy = sum((p[0] - mx) * (p[1] - my) for p in members) / len(members)
        syy = sum((p[1] - my) ** 2 for p in members) / len(members)
        covs.append(floor2x2([[sxx, sxy], [sxy, syy]]))

    # E step
    resp = []
    for p in pts:
        joint = [weights[j] * gauss_pdf(p, means[j], covs[j]) for j in range(k)]
        total = sum(joint)
        resp.append([v / total for v in joint])

    # M step
    new_weights, new_means, new_covs = [], [], []
    for j in range(k):
        mass = sum(resp[i][j] for i in range(n))
        new_weights.append(mass / n)
        mx = sum(resp[i][j] * pts[i][0] for i in range(n)) / mass
        my = sum(resp[i][j] * pts[i][1] for i in range(n)) / mass
        new_means.append((mx, my))
        sxx = sum(resp[i][j] * (pts[i][0] - mx) ** 2 for i in range(n)) / mass
        sxy = sum(resp[i][j] * (pts[i][0] - mx) * (pts[i][1] - my) for i in range(n)) / mass
        syy = sum(resp[i][j] * (pts[i][1] - my) ** 2 for i in range(n)) / mass
        new_covs.append(floor2x2([[sxx, sxy], [sxy, syy]]))
    return new_weights, new_means, new_covs


def blobs(rng, centers, n_per, sigma=10.0):
    chunks = [rng.normal(loc=c, scale=sigma, size=(n_per, 2)) for c in centers]
    return np.concatenate(chunks, axis=0)


class TestChooseK:
    def test_unit_megapixel(self):
        assert choose_k(1000, 1000, 5.0, 100) == 5

    def test_single_point_clamps_to_one(self):
        assert choose_k(4000, 4000, 50.0, 1) == 1

    def test_paper_scale_image(self):
        assert choose_k(512, 384, 30.0, 200) == 6

    def test_lower_clamp(self):
        assert choose_k(10, 10, 1.0, 50) == 1

    def test_clamps_always(self, rng):
        for _ in range(200):
            w = int(rng.integers(1, 4000))
            h = int(rng.integers(1, 4000))
            density = float(rng.uniform(0.01, 200.0))
            n = int(rng.integers(1, 500))
            k = choose_k(w, h, density, n)
            assert 1 <= k <= n


class TestKmeansSeed:
    def test_k_equals_n_returns_the_points(self):
        pts = np.array([[0.0, 0.0], [5.0, 1.0], [2.0, 8.0], [9.0, 9.0]])
        means = kmeans_seed(pts, 4, seed=3)
        assert sorted(map(tuple, means)) == sorted(map(tuple, pts))

    def test_two_blobs_one_mean_each(self, rng):
        pts = blobs(rng, [(0.0, 0.0), (500.0, 500.0)], 100, sigma=10.0)
        means = kmeans_seed(pts, 2, seed=7)
        means = sorted(map(tuple, means))
        assert np.hypot(*means[0]) < 30
        assert np.hypot(means[1][0] - 500, means[1][1] - 500) < 30

    def test_k1_is_centroid(self, rng):
        pts = rng.uniform(0, 100, size=(40, 2))
        means = kmeans_seed(pts, 1, seed=0)
        assert np.allclose(means[0], pts.mean(axis=0), atol=1e-9)

    def test_degenerate_input(self):
        pts = np.array([[1.0, 1.0]] * 5 + [[2.0, 2.0]])
        with pytest.raises(DegenerateInput):
            kmeans_seed(pts, 3, seed=0)

    def test_deterministic_in_seed(self, rng):
        pts = rng.uniform(0, 300, size=(60, 2))
        a = kmeans_seed(pts, 4, seed=11)
        b = kmeans_seed(pts, 4, seed=11)
        assert a.tobytes() == b.tobytes()


class TestEmFit:
    def test_k1_closed_form_in_one_iteration(self, rng):
        pts = rng.uniform(0, 200, size=(50, 2))
        mix = em_fit(pts, 1, max_iters=100, tol=1e-9, seed=0)
        assert len(mix) == 1
        comp = mix.components[0]
        assert comp.weight == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(comp.mean, pts.mean(axis=0), atol=1e-9)
        centered = pts - pts.mean(axis=0)
        expected = floor2x2((centered.T @ centered / len(pts)).tolist())
        assert np.allclose(comp.cov, expected, atol=1e-9)
        assert mix.n_iter == 1

    def test_one_step_matches_oracle(self):
        pts = [(0.0, 0.0), (2.0, 1.0), (10.0, 10.0), (12.0, 9.0)]
        seed_means = kmeans_seed(np.asarray(pts), 2, seed=5)
        expected_w, expected_mu, expected_cov = oracle_one_em_step(
            pts, [tuple(m) for m in seed_means])
        mix = em_fit(pts, 2, max_iters=1, tol=1e-30, seed=5)
        for j, comp in enumerate(mix.components):
            assert comp.weight == pytest.approx(expected_w[j], abs=1e-12)
            assert np.allclose(comp.mean, expected_mu[j], atol=1e-12)
            assert np.allclose(comp.cov, expected_cov[j], atol=1e-12)

    def test_symmetric_blobs_get_equal_weights(self, rng):
        pts = blobs(rng, [(-200.0, 0.0), (200.0, 0.0)], 150, sigma=8.0)
        pts = np.concatenate([pts, -pts])  # exact symmetry about the origin
        mix = em_fit(pts, 2, seed=2)
        weights = sorted(c.weight for c in mix.components)
        assert weights[0] == pytest.approx(0.5, abs=1e-6)
        assert weights[1] == pytest.approx(0.5, abs=1e-6)

    def test_three_blob_recovery(self, rng):
        centers = [(100.0, 100.0), (400.0, 120.0), (250.0, 400.0)]
        pts = blobs(rng, centers, 200, sigma=10.0)
        mix = em_fit(pts, 3, seed=9)
        recovered = [c.mean for c in mix.components]
        taken = set()
        for center in centers:
            dists = [np.hypot(m[0] - center[0], m[1] - center[1]) for m in recovered]
            best = int(np.argmin(dists))
            assert dists[best] < 3.0
            assert best not in taken
            taken.add(best)

    def test_log_likelihood_monotone(self, rng):
        for trial in range(20):
            pts = rng.uniform(0, 400, size=(rng.integers(20, 120), 2))
            k = int(rng.integers(1, 6))
            mix = em_fit(pts, k, max_iters=150, tol=1e-12, seed=trial)
            history = np.asarray(mix.history)
            assert np.all(np.diff(history) >= -1e-9)

    def test_final_ll_is_of_returned_parameters(self, rng):
        pts = rng.uniform(0, 100, size=(30, 2))
        mix = em_fit(pts, 2, seed=4)
        weights = np.array([c.weight for c in mix.components])
        assert weights.sum() == pytest.approx(1.0, abs=1e-9)
        assert mix.log_likelihood == mix.history[-1]

    def test_responsibilities_rows_sum_to_one(self, rng):
        pts = rng.uniform(0, 300, size=(80, 2))
        mix = em_fit(pts, 4, seed=1)
        r = responsibilities(mix, pts)
        assert r.shape == (80, 4)
        assert np.all(r >= 0)
        assert np.allclose(r.sum(axis=1), 1.0, atol=1e-9)

    def test_translation_equivariance(self, rng):
        pts = blobs(rng, [(50.0, 60.0), (300.0, 280.0)], 80, sigma=12.0)
        shift = np.array([137.25, -41.5])
        base = em_fit(pts, 2, seed=6)
        moved = em_fit(pts + shift, 2, seed=6)
        for a, c in zip(base.components, moved.components):
            assert np.allclose(np.asarray(c.mean) - shift, a.mean, atol=1e-6)
            assert np.allclose(c.cov, a.cov, atol=1e-6)
            assert c.weight == pytest.approx(a.weight, abs=1e-6)

    def test_bitwise_determinism(self, rng):
        pts = rng.uniform(0, 500, size=(100, 2))
        a = em_fit(pts, 3, seed=42)
        b = em_fit(pts, 3, seed=42)
        assert a == b  # dataclass equality over pure-float fields is bitwise

    def test_degenerate_input(self):
        pts = [(5.0, 5.0)] * 10
        with pytest.raises(DegenerateInput):
            em_fit(pts, 2, seed=0)

    def test_collinear_points_fit_without_failure(self):
        # lattice-aligned centers collapse one covariance axis; the floor
        # must keep the fit finite
        pts = [(float(x), 64.0) for x in range(0, 640, 64)]
        mix = em_fit(pts, 2, seed=0)
        for comp in mix.components:
            cov = np.asarray(comp.cov)
            eigvals = np.linalg.eigvalsh(cov)
            assert eigvals.min() >= COV_FLOOR - 1e-9
        assert math.isfinite(mix.log_likelihood)


class TestEllipse:
    def test_isotropic_two_sigma(self):
        ellipse = ellipse_from_cov([[100.0, 0.0], [0.0, 100.0]])
        assert ellipse.a == pytest.approx(20.0)
        assert ellipse.b == pytest.approx(20.0)

    def test_axis_aligned_anisotropic(self):
        ellipse = ellipse_from_cov([[400.0, 0.0], [0.0, 100.0]])
        assert ellipse.a == pytest.approx(40.0)
        assert ellipse.b == pytest.approx(20.0)
        assert ellipse.theta == pytest.approx(0.0, abs=1e-12)

    def test_rotated_covariance_recovers_angle(self):
        angle = math.radians(30)
        rot = np.array([[math.cos(angle), -math.sin(angle)],
                        [math.sin(angle), math.cos(angle)]])
        cov = rot @ np.diag([400.0, 100.0]) @ rot.T
        ellipse = ellipse_from_cov(cov)
        assert ellipse.a == pytest.approx(40.0)
        assert ellipse.b == pytest.approx(20.0)
        assert ellipse.theta == pytest.approx(angle, abs=1e-9)


def lp(x, y, label, confidence=0.9):
    return LabeledPoint((x, y), label, confidence)


class TestClustersToObjects:
    def fit_two_groups(self):
        group_a = [lp(10.0 + i, 10.0 + j, ClassLabel.GLASS)
                   for i in range(3) for j in range(3)]
        group_b = [lp(300.0 + i, 300.0 + j, ClassLabel.PAPER)
                   for i in range(3) for j in range(3)]
        points = group_a + group_b
        mix = em_fit([p.position for p in points], 2, seed=0)
        return mix, points

    def test_unanimous_labels_survive(self):
        mix, points = self.fit_two_groups()
        objects = clusters_to_objects(mix, points, min_support=2)
        assert sorted(o.label for o in objects) == [ClassLabel.GLASS, ClassLabel.PAPER]
        assert all(o.support == 9 for o in objects)
        assert all(o.mean_confidence == pytest.approx(0.9) for o in objects)

    def test_min_support_filters_components(self):
        points = ([lp(10.0 + i, 10.0 + j, ClassLabel.GLASS) for i in range(3) for j in range(3)]
                  + [lp(500.0, 500.0, ClassLabel.METAL)])
        mix = em_fit([p.position for p in points], 2, seed=0)
        objects = clusters_to_objects(mix, points, min_support=2)
        assert [o.label for o in objects] == [ClassLabel.GLASS]

    def test_confidence_weighted_vote(self):
        # metal has more points but glass carries more confidence mass
        points = ([lp(10.0 + i, 10.0, ClassLabel.METAL, 0.30) for i in range(3)]
                  + [lp(10.0 + i, 11.0, ClassLabel.GLASS, 0.50) for i in range(2)])
        mix = em_fit([p.position for p in points], 1, seed=0)
        objects = clusters_to_objects(mix, points, min_support=1)
        assert objects[0].label is ClassLabel.GLASS  # 1.0 vs 0.9

    def test_vote_tie_breaks_to_lower_code(self):
        points = [lp(0.0, 0.0, ClassLabel.PLASTIC, 0.5),
                  lp(1.0, 0.0, ClassLabel.GLASS, 0.5)]
        mix = em_fit([p.position for p in points], 1, seed=0)
        objects = clusters_to_objects(mix, points, min_support=1)
        assert objects[0].label is ClassLabel.GLASS

    def test_trash_components_retained(self):
        points = [lp(10.0 + i, 10.0 + j, ClassLabel.TRASH) for i in range(2) for j in range(2)]
        mix = em_fit([p.position for p in points], 1, seed=0)
        objects = clusters_to_objects(mix, points, min_support=2)
        assert [o.label for o in objects] == [ClassLabel.TRASH]

    def test_empty_points(self, rng):
        mix = em_fit(rng.uniform(0, 10, size=(5, 2)), 1, seed=0)
        assert clusters_to_objects(mix, [], min_support=1) == []
