"""k-nearest-neighbor depth interpolation over bathymetric contour vertices.

Contour vertices are indexed with a 2-D k-d tree and queried per grid cell.
Depth at a query point is the inverse-distance-weighted mean of the k nearest
vertex depths, except that a query landing on (or within ``exact_hit_eps`` of)
a vertex returns that vertex's depth directly.

Neighbor ordering is fully deterministic: candidates rank by squared distance
first and insertion index second, so tree queries reproduce a stable linear
scan exactly, duplicate coordinates included.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from twinhub.terrain.raster import ContourSet

DEFAULT_K = 4
DEFAULT_POWER = 2.0
DEFAULT_EXACT_HIT_EPS = 1e-9  # meters


class KdTree:
    """Static 2-D k-d tree, median-balanced, splitting on alternating x/y axes.

    Points keep their insertion index; equal distances resolve to the lower
    index. Duplicate coordinates are retained as distinct points.
    """

    __slots__ = ("n", "_xs", "_ys", "_root")

    def __init__(self, xs, ys):
        xs = [float(v) for v in xs]
        ys = [float(v) for v in ys]
        if len(xs) != len(ys):
            raise ValueError("coordinate arrays differ in length")
        if not xs:
            raise ValueError("cannot build a k-d tree over zero points")
        self.n = len(xs)
        self._xs = xs
        self._ys = ys
        self._root = self._build(list(range(self.n)), axis=0)

    def _build(self, idx, axis):
        if not idx:
            return None
        coords = self._xs if axis == 0 else self._ys
        # Sort by (coordinate, insertion index) and split at the positional
        # median: balance holds even when many points share a coordinate.
        idx.sort(key=lambda i: (coords[i], i))
        mid = len(idx) // 2
        next_axis = 1 - axis
        return (
            idx[mid],
            axis,
            self._build(idx[:mid], next_axis),
            self._build(idx[mid + 1 :], next_axis),
        )

    def query(self, x, y, k):
        """Return the k nearest points as (squared_distance, index) pairs.

        Results are sorted ascending by (distance, insertion index). k is
        clamped to the point count.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        k = min(k, self.n)
        x = float(x)
        y = float(y)
        xs, ys = self._xs, self._ys
        # Max-heap keyed on (-d2, -idx): heap[0] is the current worst keeper.
        heap = []

        def visit(node):
            if node is None:
                return
            i, axis, left, right = node
            dx = x - xs[i]
            dy = y - ys[i]
            d2 = dx * dx + dy * dy
            if len(heap) < k:
                heapq.heappush(heap, (-d2, -i))
            elif (d2, i) < (-heap[0][0], -heap[0][1]):
                heapq.heapreplace(heap, (-d2, -i))
            split = xs[i] if axis == 0 else ys[i]
            q = x if axis == 0 else y
            near, far = (left, right) if q < split else (right, left)
            visit(near)
            # <= keeps boundary ties reachable so index ordering stays exact.
            if len(heap) < k or (q - split) * (q - split) <= -heap[0][0]:
                visit(far)

        visit(self._root)
        return sorted((-d2, -i) for d2, i in heap)

    def query_radius(self, x, y, radius):
        """All points within radius as (squared_distance, index), sorted."""
        if radius < 0:
            raise ValueError("radius must be >= 0")
        x = float(x)
        y = float(y)
        r2 = float(radius) * float(radius)
        xs, ys = self._xs, self._ys
        out = []

        def visit(node):
            if node is None:
                return
            i, axis, left, right = node
            dx = x - xs[i]
            dy = y - ys[i]
            d2 = dx * dx + dy * dy
            if d2 <= r2:
                out.append((d2, i))
            split = xs[i] if axis == 0 else ys[i]
            q = x if axis == 0 else y
            near, far = (left, right) if q < split else (right, left)
            visit(near)
            if (q - split) * (q - split) <= r2:
                visit(far)

        visit(self._root)
        return sorted(out)


@dataclass(frozen=True)
class DepthIndex:
    """Queryable spatial index over a contour set.

    ``k`` is the neighbor count used for interpolation (clamped to the point
    count at build time) and ``power`` the inverse-distance exponent.
    """

    tree: KdTree
    xs: np.ndarray
    ys: np.ndarray
    depths: np.ndarray
    k: int
    power: float
    exact_hit_eps: float = DEFAULT_EXACT_HIT_EPS

    def __len__(self):
        return self.tree.n


def build_depth_index(
    contours: ContourSet,
    k: int = DEFAULT_K,
    power: float = DEFAULT_POWER,
    exact_hit_eps: float = DEFAULT_EXACT_HIT_EPS,
) -> DepthIndex:
    """Build the k-d tree index used by depth interpolation.

    Raises ValueError for an empty contour set or invalid parameters; k
    larger than the vertex count is clamped.
    """
    if len(contours) == 0:
        raise ValueError("cannot build a depth index from an empty contour set")
    if k < 1:
        raise ValueError("k must be >= 1")
    if power <= 0:
        raise ValueError("inverse-distance power must be > 0")
    xs = np.asarray(contours.xs, dtype=np.float64)
    ys = np.asarray(contours.ys, dtype=np.float64)
    depths = np.asarray(contours.depths, dtype=np.float64)
    return DepthIndex(
        tree=KdTree(xs, ys),
        xs=xs,
        ys=ys,
        depths=depths,
        k=min(k, len(contours)),
        power=float(power),
        exact_hit_eps=float(exact_hit_eps),
    )


def interpolate_depth(index: DepthIndex, x: float, y: float) -> float:
    """Inverse-distance-weighted depth at (x, y) from the k nearest vertices.

    If the nearest vertex lies within ``exact_hit_eps`` its depth is returned
    directly.
    """
    neighbors = index.tree.query(x, y, index.k)
    d2_near, i_near = neighbors[0]
    if math.sqrt(d2_near) < index.exact_hit_eps:
        return float(index.depths[i_near])
    half_power = index.power / 2.0
    wsum = 0.0
    acc = 0.0
    for d2, i in neighbors:
        w = d2 ** -half_power
        wsum += w
        acc += w * float(index.depths[i])
    return acc / wsum


def interpolate_depth_many(
    index: DepthIndex, xs, ys, chunk: int = 2048
) -> np.ndarray:
    """Vectorized ``interpolate_depth`` over many query points.

    Matches the scalar rule exactly in neighbor selection (ties by insertion
    index, exact-hit shortcut); values agree with the scalar path to floating
    round-off from summation order.
    """
    qx = np.ascontiguousarray(xs, dtype=np.float64).ravel()
    qy = np.ascontiguousarray(ys, dtype=np.float64).ravel()
    if qx.shape != qy.shape:
        raise ValueError("query coordinate arrays differ in shape")
    px = index.xs[None, :]
    py = index.ys[None, :]
    depths = index.depths
    n = depths.shape[0]
    k = min(index.k, n)
    half_power = index.power / 2.0
    eps2 = index.exact_hit_eps * index.exact_hit_eps
    out = np.empty(qx.shape[0], dtype=np.float64)

    for lo in range(0, qx.shape[0], chunk):
        sx = qx[lo : lo + chunk, None]
        sy = qy[lo : lo + chunk, None]
        # Explicit multiplies keep the metric bit-identical to the scalar
        # tree path (x**2 is not guaranteed to round like x*x).
        dx = sx - px
        dy = sy - py
        d2 = dx * dx + dy * dy
        if k == n:
            sel_d2 = d2
            sel_idx = np.broadcast_to(np.arange(n), d2.shape)
            ties = np.zeros(d2.shape[0], dtype=bool)
        else:
            kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
            sel_idx = np.argpartition(d2, k - 1, axis=1)[:, :k]
            sel_d2 = np.take_along_axis(d2, sel_idx, axis=1)
            # Boundary ties make argpartition's pick ambiguous; redo those
            # rows with the explicit (distance, index) rule.
            ties = np.count_nonzero(d2 <= kth[:, None], axis=1) > k
        with np.errstate(divide="ignore", invalid="ignore"):
            w = sel_d2 ** -half_power
            block = (w * depths[sel_idx]).sum(axis=1) / w.sum(axis=1)
        hits = sel_d2.min(axis=1) < eps2
        redo = np.nonzero(ties | hits)[0]
        for r in redo:
            block[r] = _interpolate_row(d2[r], depths, k, half_power, eps2)
        out[lo : lo + chunk] = block
    return out


def _interpolate_row(d2_row, depths, k, half_power, eps2):
    """Scalar-rule fallback for exact hits and distance ties."""
    nearest = int(np.argmin(d2_row))  # first occurrence = lowest index
    if d2_row[nearest] < eps2:
        return float(depths[nearest])
    order = np.lexsort((np.arange(d2_row.shape[0]), d2_row))[:k]
    w = d2_row[order] ** -half_power
    return float((w * depths[order]).sum() / w.sum())
