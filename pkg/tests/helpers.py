"""Shared helpers for the test suite (not fixtures, not oracles)."""

from topovision.fixtures import three_class_blobs
from topovision.image_io import save_image


def write_dataset(directory, n_per_class=3, size=12, seed=0):
    """Materialize a small labeled image directory for train stages."""
    directory.mkdir(parents=True, exist_ok=True)
    images, labels = three_class_blobs(n_per_class=n_per_class, size=size, seed=seed)
    rows = []
    for index, (img, label) in enumerate(zip(images, labels)):
        name = f"blob_{index:03d}.pgm"
        save_image(img, directory / name)
        rows.append(f"{name},{int(label)}")
    (directory / "labels.csv").write_text(
        "filename,label\n" + "\n".join(rows) + "\n", encoding="utf-8"
    )
    return images, labels
