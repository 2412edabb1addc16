"""Rasterization of keypoint annotations into pixel grids.

Produces binary edge maps (8-connected polyline rasters), penalty-reduced
"tunnel" training targets quantized to {0, 0.7, 1.0}, filled instance masks,
and mask-derived edges (inner boundary via a 4-neighborhood Laplacian).

Pixel (x, y) covers the unit square with center (x + 0.5, y + 0.5), and
annotation coordinates live on the pixel-center lattice: keypoint (2, 2)
refers to the center of pixel (2, 2). A pixel therefore belongs to a filled
mask exactly when the lattice point (x, y) lies inside or on the polygon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annotations import InstanceAnnotation, Keypoint

__all__ = [
    "BitMap",
    "GrayMap",
    "TunnelTarget",
    "TUNNEL_VALUE",
    "rasterize_polyline",
    "build_tunnel_target",
    "rasterize_mask",
    "mask_to_edge",
]

TUNNEL_VALUE = 0.7


@dataclass(frozen=True, eq=False)
class BitMap:
    """A 2-D binary grid. ``bits`` is a read-only boolean array."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError(f"BitMap needs a 2-D grid, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("BitMap values must be 0 or 1")
            arr = arr.astype(bool)
        else:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def count(self) -> int:
        """Number of set pixels."""
        return int(self.bits.sum())

    def to_graymap(self) -> "GrayMap":
        """Reinterpret set pixels as probability 1.0."""
        return GrayMap(self.bits.astype(np.float64))


@dataclass(frozen=True, eq=False)
class GrayMap:
    """A 2-D grid of values in [0, 1]. ``values`` is a read-only float array."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64).copy()
        if arr.ndim != 2:
            raise ValueError(f"GrayMap needs a 2-D grid, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("GrayMap values must be finite")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("GrayMap values must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class TunnelTarget:
    """A training target whose values are exactly {0, 0.7, 1.0}.

    ``keypoint_count`` is the number of distinct keypoint pixels (coincident
    keypoints deduplicate) and equals the number of 1.0-valued pixels; it is
    the normalizer of the penalty-reduced focal loss.
    """

    map: GrayMap
    keypoint_count: int

    def __post_init__(self) -> None:
        if self.keypoint_count < 1:
            raise ValueError("keypoint_count must be >= 1")
        values = np.unique(self.map.values)
        allowed = {0.0, TUNNEL_VALUE, 1.0}
        if not set(values.tolist()) <= allowed:
            raise ValueError(f"tunnel target values must be in {allowed}, got {values}")
        ones = int((self.map.values == 1.0).sum())
        if ones != self.keypoint_count:
            raise ValueError(
                f"{ones} pixels at 1.0 but keypoint_count={self.keypoint_count}"
            )


def _check_dims(height: int, width: int) -> None:
    if height < 1 or width < 1:
        raise ValueError(f"dimensions must be positive, got {height}x{width}")


def _to_pixel(kp: Keypoint, height: int, width: int) -> tuple[int, int]:
    # Round half up, then clip so boundary-touching coordinates stay inside.
    px = min(width - 1, max(0, int(np.floor(kp.x + 0.5))))
    py = min(height - 1, max(0, int(np.floor(kp.y + 0.5))))
    return px, py


def _draw_segment(bits: np.ndarray, x0: int, y0: int, x1: int, y1: int) -> None:
    """Set the pixels of an 8-connected Bresenham segment (inclusive ends)."""
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        bits[y, x] = True
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def rasterize_polyline(inst: InstanceAnnotation, height: int, width: int) -> BitMap:
    """Rasterize the closed boundary polylines of an instance.

    Consecutive keypoints of each ring (including the closing segment) are
    connected with 8-connected discrete lines between their rounded pixels.
    """
    _check_dims(height, width)
    bits = np.zeros((height, width), dtype=bool)
    for ring in inst.rings:
        pixels = [_to_pixel(kp, height, width) for kp in ring]
        for (x0, y0), (x1, y1) in zip(pixels, pixels[1:] + pixels[:1]):
            _draw_segment(bits, x0, y0, x1, y1)
    return BitMap(bits)


def _dilate3x3(bits: np.ndarray) -> np.ndarray:
    """Pixels whose 3x3 box neighborhood contains a set pixel."""
    h, w = bits.shape
    padded = np.pad(bits, 1)
    out = np.zeros_like(bits)
    for dy in range(3):
        for dx in range(3):
            out |= padded[dy:dy + h, dx:dx + w]
    return out


def build_tunnel_target(
    inst: InstanceAnnotation, height: int, width: int
) -> TunnelTarget:
    """Build the quantized soft target for point-supervised edge training.

    The rasterized boundary is blurred with a 3x3 box filter; every pixel with
    a positive response becomes 0.7 (the "tunnel" of plausible edge
    locations), and every pixel hosting a keypoint is overwritten with 1.0.
    """
    _check_dims(height, width)
    keypoints = {_to_pixel(kp, height, width) for kp in inst.all_keypoints()}
    if not keypoints:
        raise ValueError(
            f"instance {inst.instance_id} has no keypoints; cannot build a target"
        )
    edges = rasterize_polyline(inst, height, width).bits
    values = np.where(_dilate3x3(edges), TUNNEL_VALUE, 0.0)
    for px, py in keypoints:
        values[py, px] = 1.0
    return TunnelTarget(map=GrayMap(values), keypoint_count=len(keypoints))


def _orient(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_cross(p: Keypoint, q: Keypoint, r: Keypoint, s: Keypoint) -> bool:
    """True when pq and rs cross at a point interior to both segments.

    Shared endpoints and collinear overlaps do not count, so degenerate
    (zero-area) rings are not flagged.
    """
    d1 = _orient(r.x, r.y, s.x, s.y, p.x, p.y)
    d2 = _orient(r.x, r.y, s.x, s.y, q.x, q.y)
    d3 = _orient(p.x, p.y, q.x, q.y, r.x, r.y)
    d4 = _orient(p.x, p.y, q.x, q.y, s.x, s.y)
    return ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 and \
        ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0


def _check_simple(ring: tuple[Keypoint, ...], instance_id: int, ring_index: int) -> None:
    n = len(ring)
    segments = [(ring[i], ring[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent through the closing edge
            if _segments_cross(*segments[i], *segments[j]):
                raise ValueError(
                    f"instance {instance_id}: ring {ring_index} is self-intersecting"
                )


def _on_segment_rows(
    bits: np.ndarray, a: Keypoint, b: Keypoint, height: int, width: int
) -> None:
    """Mark lattice points lying exactly on segment ab."""
    if a.x == b.x and a.y == b.y:
        if a.x == int(a.x) and a.y == int(a.y):
            x, y = int(a.x), int(a.y)
            if 0 <= x < width and 0 <= y < height:
                bits[y, x] = True
        return
    x_lo, x_hi = sorted((a.x, b.x))
    y_lo, y_hi = sorted((a.y, b.y))
    for y in range(max(0, int(np.ceil(y_lo))), min(height - 1, int(np.floor(y_hi))) + 1):
        for x in range(max(0, int(np.ceil(x_lo))), min(width - 1, int(np.floor(x_hi))) + 1):
            if _orient(a.x, a.y, b.x, b.y, x, y) == 0:
                bits[y, x] = True


def rasterize_mask(inst: InstanceAnnotation, height: int, width: int) -> BitMap:
    """Fill the instance polygon(s) with an even-odd scanline rule.

    A pixel is filled when its center lies inside the polygon drawn through
    pixel centers (equivalently, lattice point (x, y) is inside or on the
    rings as annotated). Even-odd parity across all rings together lets inner
    rings cut holes while disjoint rings fill independently.

    Raises:
        ValueError: a ring properly self-intersects.
    """
    _check_dims(height, width)
    for i, ring in enumerate(inst.rings):
        _check_simple(ring, inst.instance_id, i)
    bits = np.zeros((height, width), dtype=bool)
    segments = [
        (ring[i], ring[(i + 1) % len(ring)])
        for ring in inst.rings
        for i in range(len(ring))
    ]
    for y in range(height):
        crossings: list[float] = []
        for a, b in segments:
            if a.y == b.y:
                continue
            y0, y1 = (a.y, b.y) if a.y < b.y else (b.y, a.y)
            if y0 <= y < y1:
                t = (y - a.y) / (b.y - a.y)
                crossings.append(a.x + t * (b.x - a.x))
        crossings.sort()
        for lo, hi in zip(crossings[::2], crossings[1::2]):
            x_start = max(0, int(np.ceil(lo)))
            x_stop = min(width, int(np.ceil(hi)))
            bits[y, x_start:x_stop] = True
    for a, b in segments:
        _on_segment_rows(bits, a, b, height, width)
    return BitMap(bits)


def mask_to_edge(mask: BitMap) -> BitMap:
    """Extract the inner boundary of a binary mask.

    A pixel is an edge pixel when it is set and its 4-neighborhood Laplacian
    (4 * center minus the sum of the 4 neighbors, zero-padded at borders) is
    nonzero. Border-touching masks therefore have edges at the image frame.
    """
    m = mask.bits.astype(np.int32)
    lap = 4 * m
    lap[1:, :] -= m[:-1, :]
    lap[:-1, :] -= m[1:, :]
    lap[:, 1:] -= m[:, :-1]
    lap[:, :-1] -= m[:, 1:]
    return BitMap(mask.bits & (lap != 0))
