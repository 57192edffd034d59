"""Image I/O and small image helpers.

Images are handled as RGB ``uint8`` arrays throughout; OpenCV's BGR order is
confined to this module.
"""
from pathlib import Path
from typing import Union

import cv2
import numpy as np


def read_image(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise FileNotFoundError(f"Cannot read image: {path}")
    return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)


def write_image(path: Union[str, Path], image: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), cv2.cvtColor(image, cv2.COLOR_RGB2BGR)):
        raise OSError(f"Cannot write image: {path}")


def to_gray(image: np.ndarray) -> np.ndarray:
    """8-bit luma of an RGB image; grayscale input is returned as is."""
    if image.ndim == 2:
        return image
    return cv2.cvtColor(image, cv2.COLOR_RGB2GRAY)


def make_background(width: int, height: int, seed: int = 0, cell: int = 16) -> np.ndarray:
    """Smooth random blue/green texture, far from the warm object colors."""
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(0.0, 1.0, size=(height // cell + 2, width // cell + 2, 3)).astype(np.float32)
    smooth = cv2.resize(coarse, (width, height), interpolation=cv2.INTER_LINEAR)
    low = np.array([10.0, 70.0, 110.0])
    high = np.array([40.0, 160.0, 220.0])
    return np.rint(low + (high - low) * smooth).astype(np.uint8)
