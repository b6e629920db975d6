"""Four-direction pixel gradients with replicated borders."""

from typing import NamedTuple

import numpy as np

from ._validation import check_image


class DirectionalGradients(NamedTuple):
    """Signed intensity differences toward each 4-neighbor.

    Each plane has the shape of the source image.  Borders replicate the
    edge pixel, so the difference across the image border is exactly 0.
    """

    north: np.ndarray
    south: np.ndarray
    east: np.ndarray
    west: np.ndarray

    def magnitude(self):
        """Per-pixel gradient magnitude: mean of the four absolute differences."""
        return (
            np.abs(self.north) + np.abs(self.south) + np.abs(self.east) + np.abs(self.west)
        ) / 4.0


def gradients_4dir(img):
    """Compute north/south/east/west neighbor differences of ``img``.

    north(x, y) = I(x, y-1) - I(x, y), and so on; neighbors outside the
    image replicate the border pixel.
    """
    img = check_image(img)
    padded = np.pad(img, 1, mode="edge")
    return DirectionalGradients(
        north=padded[:-2, 1:-1] - img,
        south=padded[2:, 1:-1] - img,
        east=padded[1:-1, 2:] - img,
        west=padded[1:-1, :-2] - img,
    )
