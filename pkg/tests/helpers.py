"""Shared builders and independent oracles for the test suite.

The oracles here deliberately avoid the library's own code paths: matching is
re-solved by exhaustive search, polygon membership by direct geometric tests,
the forward kernels by naive loops, and the evaluation curves by a from-scratch
sweep. Tests compare library outputs against these.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import ndimage

from pointedge import (
    BitMap,
    Dataset,
    GrayMap,
    ImageRecord,
    InstanceAnnotation,
    Keypoint,
)

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


# ---------------------------------------------------------------------------
# Geometry builders
# ---------------------------------------------------------------------------

def ring_of(*coords: tuple[float, float]) -> tuple[Keypoint, ...]:
    return tuple(Keypoint(float(x), float(y)) for x, y in coords)


def bbox_of(rings: tuple[tuple[Keypoint, ...], ...]) -> tuple[float, float, float, float]:
    xs = [kp.x for ring in rings for kp in ring]
    ys = [kp.y for ring in rings for kp in ring]
    return (
        min(xs),
        min(ys),
        max(max(xs) - min(xs), 1e-3),
        max(max(ys) - min(ys), 1e-3),
    )


def make_instance(
    *rings: tuple[tuple[float, float], ...],
    instance_id: int = 1,
    category_id: int = 0,
) -> InstanceAnnotation:
    built = tuple(ring_of(*ring) for ring in rings)
    return InstanceAnnotation(
        instance_id=instance_id,
        category_id=category_id,
        rings=built,
        bbox=bbox_of(built),
    )


def square_instance(
    x0: float, y0: float, side: float, instance_id: int = 1, category_id: int = 0
) -> InstanceAnnotation:
    return make_instance(
        ((x0, y0), (x0, y0 + side), (x0 + side, y0 + side), (x0 + side, y0)),
        instance_id=instance_id,
        category_id=category_id,
    )


def star_polygon(
    rng: np.random.Generator,
    cx: float,
    cy: float,
    r_lo: float,
    r_hi: float,
    n_points: int,
) -> tuple[tuple[float, float], ...]:
    """A random simple polygon around a center.

    Angles are evenly spaced with bounded jitter so that every angular gap
    stays below pi; each boundary chord then remains inside its angular
    wedge, which guarantees the ring cannot self-intersect.
    """
    spacing = 2.0 * math.pi / n_points
    angles = np.arange(n_points) * spacing + rng.uniform(
        -0.2 * spacing, 0.2 * spacing, size=n_points
    )
    radii = rng.uniform(r_lo, r_hi, size=n_points)
    return tuple(
        (cx + r * math.cos(a), cy + r * math.sin(a))
        for a, r in zip(angles, radii)
    )


def random_star_instance(
    rng: np.random.Generator,
    height: int,
    width: int,
    instance_id: int = 1,
    category_id: int = 0,
) -> InstanceAnnotation:
    cx = rng.uniform(width * 0.3, width * 0.7)
    cy = rng.uniform(height * 0.3, height * 0.7)
    r_hi = min(cx, cy, width - 1 - cx, height - 1 - cy)
    poly = star_polygon(rng, cx, cy, r_hi * 0.4, r_hi, int(rng.integers(3, 9)))
    return make_instance(poly, instance_id=instance_id, category_id=category_id)


def flat_ring_instance(
    x0: int, x1: int, y: int, instance_id: int, category_id: int = 0
) -> InstanceAnnotation:
    """A degenerate flat ring rasterizing to a single horizontal segment."""
    mid = (x0 + x1) / 2
    return make_instance(
        ((x0, y), (x1, y), (mid, y)),
        instance_id=instance_id,
        category_id=category_id,
    )


# ---------------------------------------------------------------------------
# Binary-map helpers
# ---------------------------------------------------------------------------

def bitmap_from_pixels(height: int, width: int, pixels) -> BitMap:
    bits = np.zeros((height, width), dtype=bool)
    for row, col in pixels:
        bits[row, col] = True
    return BitMap(bits)


def component_count(bits: np.ndarray) -> int:
    _, count = ndimage.label(bits, structure=EIGHT_CONNECTED)
    return count


def random_blob(rng: np.random.Generator, height: int = 24, width: int = 24) -> BitMap:
    """Union of a few random rectangles and discs, possibly empty."""
    bits = np.zeros((height, width), dtype=bool)
    for _ in range(int(rng.integers(1, 4))):
        if rng.random() < 0.5:
            y0 = int(rng.integers(0, height - 2))
            x0 = int(rng.integers(0, width - 2))
            y1 = int(rng.integers(y0 + 1, min(height, y0 + 10)))
            x1 = int(rng.integers(x0 + 1, min(width, x0 + 10)))
            bits[y0:y1, x0:x1] = True
        else:
            cy = rng.uniform(3, height - 3)
            cx = rng.uniform(3, width - 3)
            radius = rng.uniform(1.5, 5.0)
            yy, xx = np.mgrid[0:height, 0:width]
            bits |= (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
    return BitMap(bits)


# ---------------------------------------------------------------------------
# Matching oracle
# ---------------------------------------------------------------------------

def brute_force_match(gt_nodes, pred_nodes, max_dist: float) -> tuple[int, float]:
    """Exhaustively best assignment: max cardinality, then min total distance.

    Nodes are (row, col) pairs; candidate pairs require euclidean distance
    strictly below ``max_dist``. Feasible only for small node sets.
    """
    gt_nodes = [tuple(map(float, g)) for g in gt_nodes]
    pred_nodes = [tuple(map(float, p)) for p in pred_nodes]
    dist = [
        [math.dist(g, p) for p in pred_nodes]
        for g in gt_nodes
    ]

    @lru_cache(maxsize=None)
    def solve(i: int, used: int) -> tuple[int, float]:
        if i == len(gt_nodes):
            return (0, 0.0)
        count, cost = solve(i + 1, used)
        best = (count, -cost)
        for j in range(len(pred_nodes)):
            if used >> j & 1 or dist[i][j] >= max_dist:
                continue
            sub_count, sub_cost = solve(i + 1, used | 1 << j)
            cand = (sub_count + 1, -(sub_cost + dist[i][j]))
            if cand > best:
                best = cand
        return (best[0], -best[1])

    result = solve(0, 0)
    solve.cache_clear()
    return result


# ---------------------------------------------------------------------------
# Polygon membership oracle
# ---------------------------------------------------------------------------

def _on_any_segment(px: float, py: float, rings) -> bool:
    for ring in rings:
        n = len(ring)
        for i in range(n):
            ax, ay = ring[i].x, ring[i].y
            bx, by = ring[(i + 1) % n].x, ring[(i + 1) % n].y
            cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
            if cross != 0.0:
                continue
            if min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by):
                return True
    return False


def point_filled(px: float, py: float, rings) -> bool:
    """Even-odd membership of lattice point (px, py), boundary inclusive."""
    if _on_any_segment(px, py, rings):
        return True
    inside = False
    for ring in rings:
        n = len(ring)
        for i in range(n):
            ax, ay = ring[i].x, ring[i].y
            bx, by = ring[(i + 1) % n].x, ring[(i + 1) % n].y
            if (ay <= py) == (by <= py):
                continue
            t = (py - ay) / (by - ay)
            if px < ax + t * (bx - ax):
                inside = not inside
    return inside


def mask_oracle(inst: InstanceAnnotation, height: int, width: int) -> np.ndarray:
    out = np.zeros((height, width), dtype=bool)
    for y in range(height):
        for x in range(width):
            out[y, x] = point_filled(float(x), float(y), inst.rings)
    return out


# ---------------------------------------------------------------------------
# Kernel oracles
# ---------------------------------------------------------------------------

def attention_oracle(queries, keys, values):
    q = np.asarray(queries, dtype=np.float64)
    k = np.asarray(keys, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    n, d = q.shape
    m = k.shape[0]
    weights = np.zeros((n, m))
    for i in range(n):
        scores = [float(q[i] @ k[j]) / math.sqrt(d) for j in range(m)]
        top = max(scores)
        exps = [math.exp(s - top) for s in scores]
        total = sum(exps)
        for j in range(m):
            weights[i, j] = exps[j] / total
    output = np.zeros((n, v.shape[1]))
    for i in range(n):
        for j in range(m):
            output[i] += weights[i, j] * v[j]
    return output, weights


def dense_head_oracle(coef_rows, features):
    coef_rows = np.asarray(coef_rows, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    n = coef_rows.shape[0]
    _, h, w = features.shape
    out = np.zeros((n, h, w))
    for i in range(n):
        for y in range(h):
            for x in range(w):
                total = 0.0
                for c in range(coef_rows.shape[1]):
                    total += coef_rows[i, c] * features[c, y, x]
                out[i, y, x] = 1.0 / (1.0 + math.exp(-total))
    return out


# ---------------------------------------------------------------------------
# Evaluation sweep oracle
# ---------------------------------------------------------------------------

def eval_oracle(predictions, dataset: Dataset, thresholds, max_dist_fraction: float):
    """From-scratch ODS/OIS/curve; matching by exhaustive search.

    Reuses only rasterize_polyline and thin from the library (their contracts
    are tested separately); binarization, matching, accumulation, and the
    threshold sweep are all recomputed independently. Returns
    (ods, ois, curve) with curve rows (threshold, precision, recall, fscore).
    """
    from pointedge import rasterize_polyline, thin

    per_image_f: list[list[float]] = []
    per_image_p: list[list[float]] = []
    per_image_r: list[list[float]] = []
    for image in sorted(dataset.images, key=lambda im: im.image_id):
        d = math.hypot(image.height, image.width) * max_dist_fraction
        gt_nodes = {}
        for inst in image.instances:
            thin_gt = thin(rasterize_polyline(inst, image.height, image.width))
            gt_nodes[inst.instance_id] = [tuple(p) for p in np.argwhere(thin_gt.bits)]
        f_row, p_row, r_row = [], [], []
        for t in thresholds:
            matched = pred_total = gt_total = 0
            for inst in image.instances:
                graymap = predictions.get(image.image_id, {}).get(inst.instance_id)
                if graymap is None:
                    pred_nodes = []
                else:
                    bits = (graymap.values >= t) & (graymap.values > 0.0)
                    thin_pred = thin(BitMap(bits))
                    pred_nodes = [tuple(p) for p in np.argwhere(thin_pred.bits)]
                count, _ = brute_force_match(gt_nodes[inst.instance_id], pred_nodes, d)
                matched += count
                pred_total += len(pred_nodes)
                gt_total += len(gt_nodes[inst.instance_id])
            p = matched / pred_total if pred_total else 1.0
            r = matched / gt_total if gt_total else 1.0
            f = 2 * p * r / (p + r) if p + r else 0.0
            p_row.append(p)
            r_row.append(r)
            f_row.append(f)
        per_image_p.append(p_row)
        per_image_r.append(r_row)
        per_image_f.append(f_row)

    f_arr = np.array(per_image_f)
    mean_p = np.array(per_image_p).mean(axis=0)
    mean_r = np.array(per_image_r).mean(axis=0)
    ods = float(f_arr.mean(axis=0).max())
    ois = float(f_arr.max(axis=1).mean())
    curve = []
    for i, t in enumerate(thresholds):
        p, r = float(mean_p[i]), float(mean_r[i])
        curve.append((t, p, r, 2 * p * r / (p + r) if p + r else 0.0))
    return ods, ois, curve


# ---------------------------------------------------------------------------
# Dataset fixtures
# ---------------------------------------------------------------------------

def two_image_fixture() -> tuple[Dataset, dict[int, dict[int, GrayMap]]]:
    """Two images whose per-image optimal thresholds differ, forcing OIS > ODS.

    Each image holds one 6-pixel horizontal gt segment. Image 1's prediction
    marks the segment at 0.31 plus two decoy pixels at 0.26 (best at
    threshold 0.30); image 2 uses 0.81 and 0.76 (best at 0.80). No single
    shared threshold is optimal for both.
    """
    inst_a = flat_ring_instance(2, 7, 3, instance_id=1)
    inst_b = flat_ring_instance(2, 7, 3, instance_id=2)
    images = (
        ImageRecord(image_id=1, height=16, width=16, instances=(inst_a,)),
        ImageRecord(image_id=2, height=16, width=16, instances=(inst_b,)),
    )
    dataset = Dataset(images=images, categories={0: "thing"})

    def pred_map(edge_level: float, decoy_level: float) -> GrayMap:
        values = np.zeros((16, 16))
        values[3, 2:8] = edge_level
        values[10, 2:4] = decoy_level
        return GrayMap(values)

    predictions = {
        1: {1: pred_map(0.31, 0.26)},
        2: {2: pred_map(0.81, 0.76)},
    }
    return dataset, predictions


def random_dataset(
    rng: np.random.Generator, n_images: int = 3, size: int = 16
) -> tuple[Dataset, dict[int, dict[int, GrayMap]]]:
    """A random tiny dataset with noisy predictions derived from the gt."""
    from pointedge import rasterize_polyline

    images = []
    predictions: dict[int, dict[int, GrayMap]] = {}
    for image_id in range(1, n_images + 1):
        instances = []
        predictions[image_id] = {}
        for instance_id in range(1, int(rng.integers(1, 4)) + 1):
            inst = random_star_instance(
                rng, size, size, instance_id=instance_id
            )
            instances.append(inst)
            edges = rasterize_polyline(inst, size, size).bits
            values = np.where(edges, rng.uniform(0.3, 1.0, edges.shape), 0.0)
            # Sprinkle false positives at random levels.
            noise = rng.random(edges.shape) < 0.03
            values = np.where(noise & ~edges, rng.uniform(0.1, 0.9, edges.shape), values)
            if rng.random() < 0.2:
                values[:] = 0.0
            predictions[image_id][instance_id] = GrayMap(values)
        images.append(
            ImageRecord(
                image_id=image_id,
                height=size,
                width=size,
                instances=tuple(instances),
            )
        )
    return Dataset(images=tuple(images), categories={0: "thing"}), predictions
