"""Deterministic synthetic fixtures with machine-readable ground truth.

Desk-scale stand-ins for a medical dataset: geometric images whose true
masks and labels are constructed, not annotated.  Every generator is a
pure function of its arguments and seed.
"""

import csv
from pathlib import Path

import numpy as np

from ._validation import as_rng
from .exceptions import ConfigError
from .image_io import save_image

FIXTURE_KINDS = ("step-edge", "disc", "two-discs", "rings", "three-class-blobs")


def _index_grid(size):
    rows, cols = np.mgrid[0:size, 0:size]
    return rows.astype(np.float64), cols.astype(np.float64)


def step_edge(size=64, noise_sigma=0.05, seed=0):
    """Vertical 0|1 step at the image midline; returns (clean, noisy)."""
    clean = np.zeros((size, size), dtype=np.float64)
    clean[:, size // 2 :] = 1.0
    rng = as_rng(seed)
    noisy = np.clip(clean + rng.normal(0.0, noise_sigma, clean.shape), 0.0, 1.0)
    return clean, noisy


def disc(
    size=64,
    radius=10,
    center=None,
    foreground=1.0,
    background=0.0,
    noise_sigma=0.0,
    seed=0,
):
    """Filled disc on flat ground; returns (image, exact boolean mask)."""
    if center is None:
        center = ((size - 1) / 2.0, (size - 1) / 2.0)
    rows, cols = _index_grid(size)
    mask = (rows - center[0]) ** 2 + (cols - center[1]) ** 2 <= radius**2
    image = np.full((size, size), background, dtype=np.float64)
    image[mask] = foreground
    if noise_sigma > 0.0:
        rng = as_rng(seed)
        image = np.clip(image + rng.normal(0.0, noise_sigma, image.shape), 0.0, 1.0)
    return image, mask


def two_discs(
    size=64,
    radii=(4, 12),
    centers=None,
    means=(1.0, 1.0),
    background=0.0,
    noise_sigma=0.0,
    seed=0,
):
    """Two discs on flat ground; returns (image, mask_first, mask_second)."""
    if centers is None:
        centers = ((16.0, 16.0), (42.0, 42.0))
    rows, cols = _index_grid(size)
    image = np.full((size, size), background, dtype=np.float64)
    masks = []
    for (cy, cx), radius, value in zip(centers, radii, means):
        mask = (rows - cy) ** 2 + (cols - cx) ** 2 <= radius**2
        image[mask] = value
        masks.append(mask)
    if noise_sigma > 0.0:
        rng = as_rng(seed)
        image = np.clip(image + rng.normal(0.0, noise_sigma, image.shape), 0.0, 1.0)
    return image, masks[0], masks[1]


def rings(size=64, centers=None, radius=8.0, thickness=2.0, value=1.0):
    """Bright annuli on black ground; returns (image, interiors mask).

    The interiors mask marks the enclosed holes, which is what a
    topological segmenter should recover as persistent regions.
    """
    if centers is None:
        centers = ((20.0, 20.0), (44.0, 44.0))
    rows, cols = _index_grid(size)
    image = np.zeros((size, size), dtype=np.float64)
    interiors = np.zeros((size, size), dtype=bool)
    half = thickness / 2.0
    for cy, cx in centers:
        dist = np.sqrt((rows - cy) ** 2 + (cols - cx) ** 2)
        image[(dist >= radius - half) & (dist <= radius + half)] = value
        interiors |= dist < radius - half
    return image, interiors


def _gaussian_bump(rows, cols, cy, cx, sigma, amplitude):
    return amplitude * np.exp(
        -((rows - cy) ** 2 + (cols - cx) ** 2) / (2.0 * sigma**2)
    )


def three_class_blobs(n_per_class=20, size=14, seed=0, noise_sigma=0.02):
    """Toy 3-class image set: one blob, two corner blobs, or a bar.

    Returns (images, labels) with images of shape
    (3 * n_per_class, size, size) and integer labels 0/1/2, ordered by
    class.  Per-image jitter moves structures around; classes stay
    linearly separable at this scale.
    """
    rng = as_rng(seed)
    rows, cols = _index_grid(size)
    mid = (size - 1) / 2.0
    images, labels = [], []
    for _ in range(n_per_class):
        cy, cx = mid + rng.uniform(-1.5, 1.5, 2)
        img = _gaussian_bump(rows, cols, cy, cx, 2.0, rng.uniform(0.75, 1.0))
        images.append(img)
        labels.append(0)
    for _ in range(n_per_class):
        offset = size / 4.0
        amp = rng.uniform(0.75, 1.0)
        c1 = (offset + rng.uniform(-1.0, 1.0), offset + rng.uniform(-1.0, 1.0))
        c2 = (
            size - 1 - offset + rng.uniform(-1.0, 1.0),
            size - 1 - offset + rng.uniform(-1.0, 1.0),
        )
        img = _gaussian_bump(rows, cols, *c1, 1.5, amp)
        img = img + _gaussian_bump(rows, cols, *c2, 1.5, amp)
        images.append(img)
        labels.append(1)
    for _ in range(n_per_class):
        row = mid + rng.uniform(-1.0, 1.0)
        amp = rng.uniform(0.75, 1.0)
        img = amp * np.exp(-((rows - row) ** 2) / (2.0 * 1.2**2))
        images.append(img)
        labels.append(2)
    images = np.stack(images)
    if noise_sigma > 0.0:
        images = images + rng.normal(0.0, noise_sigma, images.shape)
    return np.clip(images, 0.0, 1.0), np.asarray(labels)


def _mask_image(mask):
    return mask.astype(np.float64)


def generate_fixtures(kind, seed, out_dir):
    """Write the named fixture's images and ground truth; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name, img):
        path = out / name
        save_image(img, path)
        written.append(path)

    if kind == "step-edge":
        clean, noisy = step_edge(seed=seed)
        emit("step_edge_clean.pgm", clean)
        emit("step_edge_noisy.pgm", noisy)
    elif kind == "disc":
        image, mask = disc(seed=seed)
        emit("disc.pgm", image)
        emit("disc_mask.pgm", _mask_image(mask))
    elif kind == "two-discs":
        image, mask_a, mask_b = two_discs(seed=seed)
        emit("two_discs.pgm", image)
        emit("two_discs_mask_a.pgm", _mask_image(mask_a))
        emit("two_discs_mask_b.pgm", _mask_image(mask_b))
    elif kind == "rings":
        image, interiors = rings()
        emit("rings.pgm", image)
        emit("rings_mask.pgm", _mask_image(interiors))
    elif kind == "three-class-blobs":
        images, labels = three_class_blobs(seed=seed)
        rows = []
        for index, (img, label) in enumerate(zip(images, labels)):
            name = f"blob_{index:03d}.pgm"
            emit(name, img)
            rows.append((name, int(label)))
        labels_path = out / "labels.csv"
        with open(labels_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["filename", "label"])
            writer.writerows(rows)
        written.append(labels_path)
    else:
        raise ConfigError(
            f"unknown fixture kind {kind!r}; expected one of {FIXTURE_KINDS}"
        )
    return written
