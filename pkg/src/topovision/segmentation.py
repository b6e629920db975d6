"""Topology-guided segmentation.

Edge points come from an undecimated single-level Haar detail modulus
with non-maximum suppression and hysteresis.  A beta-skeleton over those
points carves the image into enclosed faces plus one catch-all
background region; faces are classified by whether they survive as holes
when the radius grows by the persistence increment, and a split-merge
pass dissolves transient and skeleton regions into their most similar
neighbors while the count of persistent regions stays fixed.
"""

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_image
from .skeleton import PointSet, build_beta_skeleton


class RegionKind(enum.Enum):
    PERSISTENT = "Persistent"
    TRANSIENT = "Transient"
    SKELETON = "Skeleton"


@dataclass(frozen=True)
class SegmentationConfig:
    """Radii, merge tolerance, size floor, and edge-detector thresholds."""

    beta: float = 2.0
    persistence: float = 0.5
    merge_tau: float = 0.15
    hysteresis_low: float = 0.04
    hysteresis_high: float = 0.08
    min_region_size: int = 8

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise ValueError(f"beta must be a positive radius, got {self.beta!r}")
        if not np.isfinite(self.persistence) or self.persistence < 0:
            raise ValueError(f"persistence must be >= 0, got {self.persistence!r}")
        if not (0.0 <= self.merge_tau <= 1.0):
            raise ValueError(f"merge_tau must lie in [0, 1], got {self.merge_tau!r}")
        if not (0.0 < self.hysteresis_low <= self.hysteresis_high):
            raise ValueError(
                "hysteresis thresholds must satisfy 0 < low <= high, got "
                f"low={self.hysteresis_low!r} high={self.hysteresis_high!r}"
            )
        if not isinstance(self.min_region_size, int) or self.min_region_size < 1:
            raise ValueError(
                f"min_region_size must be a positive integer, got {self.min_region_size!r}"
            )


@dataclass
class RegionInfo:
    """Stats for one region of the partition."""

    id: int
    kind: RegionKind
    birth_beta: float
    death_beta: float
    pixel_count: int
    mean_intensity: float = float("nan")
    intensity_sum: float = float("nan")


@dataclass
class RegionPartition:
    """Every pixel carries exactly one region id from ``regions``."""

    label_mask: np.ndarray = field(repr=False)
    regions: dict

    @property
    def persistent_count(self):
        """Partition-level persistent hole count; split-merge keeps it fixed."""
        return sum(1 for r in self.regions.values() if r.kind is RegionKind.PERSISTENT)

    def region_ids(self):
        return sorted(self.regions)

    def copy(self):
        return RegionPartition(
            label_mask=self.label_mask.copy(),
            regions={i: replace(r) for i, r in self.regions.items()},
        )


def haar_detail_modulus(img):
    """Undecimated single-level Haar detail response.

    Slides a 2x2 window over every pixel pair; returns (H, V, modulus)
    arrays of shape (h-1, w-1) where H responds to change across columns
    and V to change across rows, each halved, and the modulus is their
    Euclidean norm.
    """
    a = img[:-1, :-1]
    b = img[:-1, 1:]
    c = img[1:, :-1]
    d = img[1:, 1:]
    h_detail = (a + c - b - d) / 2.0
    v_detail = (a + b - c - d) / 2.0
    return h_detail, v_detail, np.hypot(h_detail, v_detail)


def _non_maximum_suppression(modulus, h_detail, v_detail):
    """Zero out responses not maximal along their quantized gradient direction."""
    padded = np.pad(modulus, 1)
    east, west = padded[1:-1, 2:], padded[1:-1, :-2]
    north, south = padded[:-2, 1:-1], padded[2:, 1:-1]
    ne, sw = padded[:-2, 2:], padded[2:, :-2]
    nw, se = padded[:-2, :-2], padded[2:, 2:]

    angle = np.degrees(np.arctan2(v_detail, h_detail)) % 180.0
    bin_0 = (angle < 22.5) | (angle >= 157.5)
    bin_45 = (angle >= 22.5) & (angle < 67.5)
    bin_90 = (angle >= 67.5) & (angle < 112.5)
    bin_135 = (angle >= 112.5) & (angle < 157.5)

    keep = (
        (bin_0 & (modulus >= east) & (modulus >= west))
        | (bin_45 & (modulus >= ne) & (modulus >= sw))
        | (bin_90 & (modulus >= north) & (modulus >= south))
        | (bin_135 & (modulus >= nw) & (modulus >= se))
    )
    return np.where(keep, modulus, 0.0)


def _hysteresis(response, low, high):
    """Keep weak responses only when 8-connected to a strong one."""
    weak = response >= low
    strong = response >= high
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    kept = np.unique(labels[strong])
    return weak & np.isin(labels, kept[kept != 0])


def detect_edge_points(img, config=None):
    """Edge points as window centers that survive suppression and hysteresis."""
    img = check_image(img)
    cfg = config or SegmentationConfig()
    if img.shape[0] < 2 or img.shape[1] < 2:
        return PointSet([], width=img.shape[1], height=img.shape[0])
    h_detail, v_detail, modulus = haar_detail_modulus(img)
    response = _non_maximum_suppression(modulus, h_detail, v_detail)
    final = _hysteresis(response, cfg.hysteresis_low, cfg.hysteresis_high)
    rows, cols = np.nonzero(final)
    pts = [(float(j) + 0.5, float(i) + 0.5) for i, j in zip(rows, cols)]
    return PointSet(pts, width=img.shape[1], height=img.shape[0])


def _region_means(label_mask, img, region_ids):
    """Per-region intensity sums and means from the image."""
    flat = label_mask.ravel()
    minlength = max(region_ids) + 1
    counts = np.bincount(flat, minlength=minlength)
    sums = np.bincount(flat, weights=img.ravel(), minlength=minlength)
    return counts, sums


CATCH_ALL_ID = 0

PERSISTENT_OVERLAP = 0.5


def classify_regions(points, config, img=None):
    """Partition the frame into skeleton-complex faces plus a catch-all.

    A face is Persistent when a single face of the wider complex covers
    at least half of it, Skeleton when smaller than the size floor, and
    Transient otherwise.  Raster pixels and unenclosed background form
    the catch-all region (id 0, kind Skeleton).  Mean intensities are
    filled when ``img`` is given, else left NaN.
    """
    cfg = config
    base = build_beta_skeleton(points, cfg.beta)
    wide = build_beta_skeleton(points, cfg.beta + cfg.persistence)

    label_mask = np.asarray(base.face_label_mask, dtype=np.int32).copy()
    regions = {}
    for fid in base.face_ids:
        face = base.face_label_mask == fid
        pixel_count = int(face.sum())
        if pixel_count < cfg.min_region_size:
            kind = RegionKind.SKELETON
        else:
            overlap_ids = wide.face_label_mask[face]
            overlap_counts = np.bincount(overlap_ids[overlap_ids != 0])
            best = int(overlap_counts.max()) if overlap_counts.size else 0
            kind = (
                RegionKind.PERSISTENT
                if best >= PERSISTENT_OVERLAP * pixel_count
                else RegionKind.TRANSIENT
            )
        death = np.inf if kind is RegionKind.PERSISTENT else cfg.beta + cfg.persistence
        regions[fid] = RegionInfo(
            id=fid,
            kind=kind,
            birth_beta=cfg.beta,
            death_beta=death,
            pixel_count=pixel_count,
        )

    catch_all_pixels = int((label_mask == CATCH_ALL_ID).sum())
    if catch_all_pixels:
        regions[CATCH_ALL_ID] = RegionInfo(
            id=CATCH_ALL_ID,
            kind=RegionKind.SKELETON,
            birth_beta=0.0,
            death_beta=np.inf,
            pixel_count=catch_all_pixels,
        )

    part = RegionPartition(label_mask=label_mask, regions=regions)
    if img is not None:
        img = check_image(img)
        if img.shape != label_mask.shape:
            raise ValueError(
                f"image shape {img.shape} does not match point frame {label_mask.shape}"
            )
        counts, sums = _region_means(label_mask, img, part.region_ids())
        for rid, info in regions.items():
            info.intensity_sum = float(sums[rid])
            info.mean_intensity = float(sums[rid] / counts[rid])
    return part


_ADJACENCY_STRUCTURE = np.ones((5, 5), dtype=bool)  # Chebyshev distance <= 2


def _neighbor_ids(label_mask, region_id):
    """Region ids within Chebyshev distance 2 of the region's pixels."""
    mask = label_mask == region_id
    near = ndimage.binary_dilation(mask, structure=_ADJACENCY_STRUCTURE)
    ids = np.unique(label_mask[near & ~mask])
    return [int(i) for i in ids if i != region_id]


def split_merge_segment(img, partition, config):
    """Dissolve Transient and Skeleton regions into similar neighbors.

    Regions queue in order of increasing birth radius (ties by lowest
    id).  Each is merged into its minimum |mean-difference| neighbor
    when that difference is within ``merge_tau`` and the number of
    persistent regions would be unchanged; passes repeat until a full
    pass makes no merge.  Persistent regions never dissolve but may
    absorb.  Returns a new partition; inputs are not mutated.
    """
    img = check_image(img)
    cfg = config
    part = partition.copy()
    label_mask, regions = part.label_mask, part.regions
    if img.shape != label_mask.shape:
        raise ValueError(
            f"image shape {img.shape} does not match partition {label_mask.shape}"
        )

    # means always come from the image passed here, so stale or missing
    # stats in the input partition cannot skew the similarity test
    counts, sums = _region_means(label_mask, img, part.region_ids())
    for rid, info in regions.items():
        info.pixel_count = int(counts[rid])
        info.intensity_sum = float(sums[rid])
        info.mean_intensity = float(sums[rid] / counts[rid])

    persistent_before = part.persistent_count
    while True:
        queue = sorted(
            (r for r in regions.values() if r.kind is not RegionKind.PERSISTENT),
            key=lambda r: (r.birth_beta, r.id),
        )
        merged_any = False
        for region in queue:
            if region.id not in regions or len(regions) == 1:
                continue
            neighbors = _neighbor_ids(label_mask, region.id)
            if not neighbors:
                continue
            diff, target_id = min(
                (abs(region.mean_intensity - regions[n].mean_intensity), n)
                for n in neighbors
            )
            if diff > cfg.merge_tau:
                continue
            target = regions[target_id]
            # the dissolving region is never Persistent, so the persistent
            # count is invariant; verify rather than assume
            survivors = sum(
                1
                for r in regions.values()
                if r.kind is RegionKind.PERSISTENT and r.id != region.id
            )
            if survivors != persistent_before:
                continue
            label_mask[label_mask == region.id] = target_id
            target.pixel_count += region.pixel_count
            target.intensity_sum += region.intensity_sum
            target.mean_intensity = target.intensity_sum / target.pixel_count
            del regions[region.id]
            assert part.persistent_count == persistent_before, (
                "accepted merge changed the persistent region count"
            )
            merged_any = True
        if not merged_any:
            break
    return part


@dataclass(frozen=True)
class SegmentationResult:
    """Final partition, binary foreground mask, and diagnostics."""

    partition: RegionPartition
    foreground_mask: np.ndarray = field(repr=False)
    points: PointSet
    warning: str = None


FOREGROUND_DEVIATION_FRACTION = 0.5

_DILATE_STRUCTURE = np.ones((3, 3), dtype=bool)


def _foreground_mask(img, part):
    """Union of the persistent regions deviating most from the global mean.

    Selected regions grow by one pixel into adjacent skeleton-kind
    pixels so the mask covers the raster boundary line around each hole.
    """
    persistent = [r for r in part.regions.values() if r.kind is RegionKind.PERSISTENT]
    mask = np.zeros(img.shape, dtype=bool)
    if not persistent:
        return mask
    global_mean = float(img.mean())
    deviations = {r.id: abs(r.mean_intensity - global_mean) for r in persistent}
    cutoff = FOREGROUND_DEVIATION_FRACTION * max(deviations.values())
    skeleton_pixels = np.isin(
        part.label_mask,
        [r.id for r in part.regions.values() if r.kind is RegionKind.SKELETON],
    )
    for region in persistent:
        if deviations[region.id] < cutoff:
            continue
        region_mask = part.label_mask == region.id
        grown = ndimage.binary_dilation(region_mask, structure=_DILATE_STRUCTURE)
        mask |= region_mask | (grown & skeleton_pixels)
    return mask


def segment(img, config=None):
    """Full pipeline: edge points, classification, split-merge, mask.

    The caller is expected to pass an already denoised image.  An empty
    edge set yields a single-region partition with a warning instead of
    an error.
    """
    img = check_image(img)
    cfg = config or SegmentationConfig()
    points = detect_edge_points(img, cfg)
    h, w = img.shape
    if len(points) == 0:
        label_mask = np.zeros((h, w), dtype=np.int32)
        regions = {
            CATCH_ALL_ID: RegionInfo(
                id=CATCH_ALL_ID,
                kind=RegionKind.SKELETON,
                birth_beta=0.0,
                death_beta=np.inf,
                pixel_count=h * w,
                mean_intensity=float(img.mean()),
                intensity_sum=float(img.sum()),
            )
        }
        return SegmentationResult(
            partition=RegionPartition(label_mask=label_mask, regions=regions),
            foreground_mask=np.zeros((h, w), dtype=bool),
            points=points,
            warning="no edge points detected; returning a single-region partition",
        )
    part = classify_regions(points, cfg, img=img)
    part = split_merge_segment(img, part, cfg)
    mask = _foreground_mask(img, part)
    warning = None
    if not mask.any():
        warning = "no persistent regions found; foreground mask is empty"
    return SegmentationResult(
        partition=part, foreground_mask=mask, points=points, warning=warning
    )


class TopologicalSegmenter(BaseEstimator, TransformerMixin):
    """Transformer facade over :func:`segment` producing label masks."""

    def __init__(
        self,
        beta=2.0,
        persistence=0.5,
        merge_tau=0.15,
        hysteresis_low=0.04,
        hysteresis_high=0.08,
        min_region_size=8,
    ):
        self.beta = beta
        self.persistence = persistence
        self.merge_tau = merge_tau
        self.hysteresis_low = hysteresis_low
        self.hysteresis_high = hysteresis_high
        self.min_region_size = min_region_size

    def _config(self):
        return SegmentationConfig(
            beta=self.beta,
            persistence=self.persistence,
            merge_tau=self.merge_tau,
            hysteresis_low=self.hysteresis_low,
            hysteresis_high=self.hysteresis_high,
            min_region_size=self.min_region_size,
        )

    def fit(self, X=None, y=None):
        self._config()  # validates parameters
        return self

    def segment(self, img):
        """Full result (partition, mask, warning) for one image."""
        return segment(img, self._config())

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            return self.segment(X).partition.label_mask
        if X.ndim == 3:
            return np.stack([self.segment(img).partition.label_mask for img in X])
        raise ValueError(f"expected a 2-D image or (n, h, w) stack, got shape {X.shape}")
