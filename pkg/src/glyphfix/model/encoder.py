"""Small convolutional encoder producing the L x C feature map.

Three blocks of two 3x3 convolutions with relu, channels doubling per block,
2x max-pool between blocks and a 2x average-pool stem, so a 64x64 glyph maps
to an 8x8 grid of 128-channel features (L = 64).  The stem pool carries the
third halving up front, which keeps the heavy early convolutions cheap enough
for single-core training.
"""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from .config import ModelParams


def encode(images, mp: ModelParams) -> T.Tensor:
    """Map (B, H, W) images in [0, 1] to a (B, L, C) feature tensor."""
    cfg = mp.config
    if isinstance(images, T.Tensor):
        x = images
    else:
        arr = np.asarray(images, dtype=np.dtype(cfg.dtype))
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[1] != cfg.image_size or arr.shape[2] != cfg.image_size:
            raise ValueError(f"expected (B, {cfg.image_size}, {cfg.image_size}) images, "
                             f"got {arr.shape}")
        x = T.Tensor(arr[:, None, :, :])
    x = T.avg_pool2(x)
    for bi in range(len(cfg.enc_channels)):
        x = T.relu(T.conv2d(x, mp[f"enc.b{bi}.conv0.w"], mp[f"enc.b{bi}.conv0.b"], pad="same"))
        x = T.relu(T.conv2d(x, mp[f"enc.b{bi}.conv1.w"], mp[f"enc.b{bi}.conv1.b"], pad="same"))
        if bi < len(cfg.enc_channels) - 1:
            x = T.max_pool2(x)
    bsz = x.shape[0]
    flat = T.reshape(x, (bsz, cfg.feat_channels, cfg.feat_len))
    return T.transpose(flat, (0, 2, 1))
