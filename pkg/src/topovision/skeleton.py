"""Beta-skeleton complexes over 2-D point clouds and their first Betti number.

A complex at radius ``beta`` connects two points when they are no farther
apart than ``2*beta`` and no third point lies strictly inside the lens
formed by the two radius-``beta`` discs.  Edges are rasterized onto the
pixel grid; bounded complement regions of that raster double as the
image-space "holes" used by the segmenter.

Cycle counting follows the graph-level convention: the first Betti
number is ``components - vertices + edges - filled_faces`` where filled
2-cells are never created, so ``filled_face_count`` is always zero and
the enclosed pixel regions are tracked separately.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .exceptions import MalformedComplexError

DEDUP_TOLERANCE = 1e-9


class _UnionFind:
    """Array-based disjoint sets with path compression and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1
        return True


@dataclass(frozen=True)
class PointSet:
    """Deduplicated 2-D points in continuous pixel coordinates.

    ``x`` runs along columns in [0, width), ``y`` along rows in
    [0, height).  Points closer than 1e-9 are collapsed to the first
    occurrence; order is otherwise preserved.
    """

    points: tuple
    width: int
    height: int

    def __init__(self, points, width, height):
        if not (isinstance(width, (int, np.integer)) and width > 0):
            raise ValueError(f"width must be a positive integer, got {width!r}")
        if not (isinstance(height, (int, np.integer)) and height > 0):
            raise ValueError(f"height must be a positive integer, got {height!r}")
        pts = [(float(x), float(y)) for x, y in points]
        for x, y in pts:
            if not (np.isfinite(x) and np.isfinite(y)):
                raise ValueError(f"point ({x}, {y}) is not finite")
            if not (0.0 <= x < width and 0.0 <= y < height):
                raise ValueError(
                    f"point ({x}, {y}) outside the {width}x{height} pixel frame"
                )
        pts = self._dedup(pts)
        object.__setattr__(self, "points", tuple(pts))
        object.__setattr__(self, "width", int(width))
        object.__setattr__(self, "height", int(height))

    @staticmethod
    def _dedup(pts):
        if len(pts) < 2:
            return pts
        tree = cKDTree(np.asarray(pts))
        drop = set()
        for i, j in sorted(tree.query_pairs(r=DEDUP_TOLERANCE)):
            if i not in drop:
                drop.add(j)
        return [p for k, p in enumerate(pts) if k not in drop]

    def __len__(self):
        return len(self.points)

    def as_array(self):
        """Points as an (n, 2) float64 array of (x, y) rows."""
        if not self.points:
            return np.empty((0, 2), dtype=np.float64)
        return np.asarray(self.points, dtype=np.float64)

    def pixel_indices(self):
        """(row, col) grid cell of each point."""
        out = []
        for x, y in self.points:
            out.append((min(int(y), self.height - 1), min(int(x), self.width - 1)))
        return out


def _bresenham(r0, c0, r1, c1):
    """Integer pixels on the line segment between two grid cells, inclusive."""
    pixels = []
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    step_r = 1 if r1 >= r0 else -1
    step_c = 1 if c1 >= c0 else -1
    r, c = r0, c0
    if dc >= dr:
        err = dc // 2
        while True:
            pixels.append((r, c))
            if c == c1:
                break
            err -= dr
            if err < 0:
                r += step_r
                err += dc
            c += step_c
    else:
        err = dr // 2
        while True:
            pixels.append((r, c))
            if r == r1:
                break
            err -= dc
            if err < 0:
                c += step_c
                err += dr
            r += step_r
    return pixels


@dataclass(frozen=True)
class SkeletonComplex:
    """A beta-skeleton with its raster and enclosed complement regions.

    ``face_label_mask`` labels every pixel of a bounded (border-free)
    4-connected complement region with an id >= 1; raster pixels and
    unenclosed background are 0.  ``filled_face_count`` is the face term
    of the cycle formula and is always 0 at graph level.
    """

    beta: float
    points: PointSet
    edges: tuple
    raster_mask: np.ndarray = field(repr=False)
    face_label_mask: np.ndarray = field(repr=False)
    component_count: int

    @property
    def vertex_count(self):
        return len(self.points)

    @property
    def edge_count(self):
        return len(self.edges)

    @property
    def filled_face_count(self):
        return 0

    @property
    def face_ids(self):
        """Ids of enclosed complement regions, ascending."""
        ids = np.unique(self.face_label_mask)
        return tuple(int(i) for i in ids if i != 0)

    def face_masks(self):
        """Map face id -> boolean pixel mask."""
        return {i: self.face_label_mask == i for i in self.face_ids}


def _edge_pairs(coords, beta):
    """Beta-skeleton edges: close enough, and an empty open lens."""
    if beta <= 0 or len(coords) < 2:
        return []
    tree = cKDTree(coords)
    candidates = sorted(tree.query_pairs(r=2.0 * beta))
    if not candidates:
        return []
    # candidate blockers must be within beta of both endpoints; the ball
    # query is inclusive, so re-check with strict inequalities
    balls = [set(b) for b in tree.query_ball_tree(tree, beta)]
    edges = []
    for i, j in candidates:
        blockers = (balls[i] & balls[j]) - {i, j}
        blocked = False
        for q in blockers:
            if (
                np.hypot(*(coords[q] - coords[i])) < beta
                and np.hypot(*(coords[q] - coords[j])) < beta
            ):
                blocked = True
                break
        if not blocked:
            edges.append((i, j))
    return edges


def build_beta_skeleton(points, beta):
    """Construct the complex at radius ``beta`` over ``points``.

    Includes edge construction, Bresenham rasterization of vertices and
    edges, enclosed-complement-face labeling, and the union-find
    component count.
    """
    if not np.isfinite(beta) or beta < 0:
        raise ValueError(f"beta must be a finite non-negative radius, got {beta!r}")
    coords = points.as_array()
    edges = _edge_pairs(coords, float(beta))

    h, w = points.height, points.width
    raster = np.zeros((h, w), dtype=bool)
    pixels = points.pixel_indices()
    for r, c in pixels:
        raster[r, c] = True
    for i, j in edges:
        for r, c in _bresenham(*pixels[i], *pixels[j]):
            raster[r, c] = True

    # bounded complement regions: 4-connected components of ~raster that
    # never touch the image border
    labels, n_labels = ndimage.label(~raster)
    border_ids = np.unique(
        np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])
    )
    face_labels = np.zeros((h, w), dtype=np.int32)
    next_id = 1
    for lab in range(1, n_labels + 1):
        if lab in border_ids:
            continue
        face_labels[labels == lab] = next_id
        next_id += 1

    uf = _UnionFind(len(points))
    for i, j in edges:
        uf.union(i, j)

    raster.setflags(write=False)
    face_labels.setflags(write=False)
    return SkeletonComplex(
        beta=float(beta),
        points=points,
        edges=tuple(edges),
        raster_mask=raster,
        face_label_mask=face_labels,
        component_count=uf.count,
    )


def betti_b1(complex_):
    """First Betti number: components - vertices + edges - filled faces."""
    b1 = (
        complex_.component_count
        - complex_.vertex_count
        + complex_.edge_count
        - complex_.filled_face_count
    )
    if b1 < 0:
        raise MalformedComplexError(
            f"negative first Betti number {b1}: complex counts are inconsistent "
            f"(O={complex_.component_count}, E={complex_.vertex_count}, "
            f"D={complex_.edge_count}, A={complex_.filled_face_count})"
        )
    return b1


def persistent_b1(points, beta, persistence):
    """Cycle count at ``beta`` discounted by holes newly born by ``beta + persistence``.

    Builds the complexes at both radii and returns
    ``betti_b1(base) - S`` where ``S`` counts enclosed faces of the
    wider complex that share no pixel with any enclosed face of the base
    complex.  With ``persistence == 0`` this is exactly ``betti_b1`` of
    the base complex.
    """
    if not np.isfinite(beta) or beta <= 0:
        raise ValueError(f"beta must be a positive radius, got {beta!r}")
    if not np.isfinite(persistence) or persistence < 0:
        raise ValueError(f"persistence must be non-negative, got {persistence!r}")
    base = build_beta_skeleton(points, beta)
    wide = build_beta_skeleton(points, beta + persistence)
    base_face_area = base.face_label_mask > 0
    s = sum(
        1
        for fid in wide.face_ids
        if not np.any((wide.face_label_mask == fid) & base_face_area)
    )
    result = betti_b1(base) - s
    if result < 0:
        raise MalformedComplexError(
            f"persistent first Betti number {result} is negative: "
            f"{s} newly born holes exceed the {betti_b1(base)} base cycles"
        )
    return result
