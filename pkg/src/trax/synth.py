"""Self-contained synthetic sequences for tests and conformance runs.

Frames are binary PGM (P5) so no image library is needed; content is
deterministic noise (fixed seed 42) with a filled square moving from
(10, 10) by (2, 1) pixels per frame, side 20. Trackers treat frames as
opaque payloads, so the pixels only matter for reproducibility.
"""

from __future__ import annotations

import os

import numpy as np

from .harness import Sequence, load_sequence
from .model import Rectangle, format_region

SQUARE_SIDE = 20
SEED = 42


def generate_sequence(directory: str, n: int, size: tuple[int, int] = (320, 240)) -> Sequence:
    """Write n frames plus groundtruth.txt into directory and load it back.

    Same arguments produce byte-identical files on every call.
    """
    if n < 1:
        raise ValueError("need at least one frame")
    width, height = size
    os.makedirs(directory, exist_ok=True)
    rng = np.random.RandomState(SEED)
    regions = []
    for i in range(n):
        x, y = 10 + 2 * i, 10 + i
        pixels = rng.randint(0, 256, size=(height, width), dtype=np.uint8)
        pixels[y:y + SQUARE_SIDE, x:x + SQUARE_SIDE] = 255
        name = os.path.join(directory, f"{i + 1:08d}.pgm")
        with open(name, "wb") as fh:
            fh.write(b"P5\n%d %d\n255\n" % (width, height))
            fh.write(pixels.tobytes())
        regions.append(Rectangle(float(x), float(y), float(SQUARE_SIDE), float(SQUARE_SIDE)))
    with open(os.path.join(directory, "groundtruth.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        for region in regions:
            fh.write(format_region(region) + "\n")
    return load_sequence(directory)
