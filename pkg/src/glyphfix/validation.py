"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np


def check_images(X, image_size: int) -> np.ndarray:
    """Coerce to a float (n, H, W) stack in [0, 1]; uint8 input is rescaled."""
    arr = np.asarray(X)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"expected (n, H, W) images, got shape {arr.shape}")
    if arr.shape[1] != image_size or arr.shape[2] != image_size:
        raise ValueError(f"images must be {image_size}x{image_size}, got "
                         f"{arr.shape[1]}x{arr.shape[2]}")
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    arr = arr.astype(np.float64)
    if arr.size and (arr.min() < -1e-9 or arr.max() > 1.0 + 1e-9):
        raise ValueError("float images must lie in [0, 1]")
    return np.clip(arr, 0.0, 1.0)


def check_targets(y, n_samples: int, n_symbols: int, n_classes: int):
    """Normalize fit targets to (token lists, class array).

    Accepts a list of (tokens, class_id) pairs or, when classes do not
    matter, bare token lists (classes then default to zero).
    """
    if len(y) != n_samples:
        raise ValueError(f"got {n_samples} images but {len(y)} targets")
    tokens: list[list[int]] = []
    classes = np.zeros(len(y), dtype=np.int64)
    for i, item in enumerate(y):
        if (isinstance(item, tuple) and len(item) == 2
                and not isinstance(item[1], (list, np.ndarray))):
            seq, cls = item
            classes[i] = int(cls)
        else:
            seq = item
        seq = [int(t) for t in seq]
        if not seq:
            raise ValueError(f"target {i} is an empty sequence")
        if min(seq) < 0 or max(seq) >= n_symbols:
            raise ValueError(f"target {i} has token ids outside [0, {n_symbols})")
        tokens.append(seq)
    if classes.size and (classes.min() < 0 or classes.max() >= n_classes):
        raise ValueError(f"class ids must lie in [0, {n_classes})")
    return tokens, classes
