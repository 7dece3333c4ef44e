"""Weakly-supervised radical counter.

Per symbol class n the model keeps a prototype; a sigmoid compatibility map
between the feature grid and the prototype yields an energy map whose maximum
is the existence probability and whose response, pushed through one grouped
(depthwise) convolution and global average pooling, is the predicted count.
Each class's count depends on its own energy map only, so the counter carries
no sequence context at all.
"""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from .config import ModelParams


def energy_maps(feat: T.Tensor, mp: ModelParams) -> tuple[T.Tensor, T.Tensor]:
    """Return (E, P): energies (B, L, N) in (0,1) and existence maxima (B, N)."""
    compat = T.matmul(feat, mp["counter.w_r"])            # (B, L, d)
    energies = T.sigmoid(T.matmul(compat, T.transpose(mp["counter.proto"], (1, 0))))
    existence = T.max_along(energies, axis=1)
    return energies, existence


def counts_from_energy(energies: T.Tensor, mp: ModelParams) -> T.Tensor:
    """Grouped-conv counting head: (B, L, N) energies -> (B, N) counts."""
    cfg = mp.config
    bsz = energies.shape[0]
    n = cfg.num_symbols
    grid = T.reshape(T.transpose(energies, (0, 2, 1)),
                     (bsz, n, cfg.feat_hw, cfg.feat_hw))
    # replicate padding keeps a constant energy map constant under the mean
    # filter, so border positions are not artificially down-weighted
    resp = T.conv2d(grid, mp["counter.q"], pad="same", groups=n, pad_mode="edge")
    return T.global_avg_pool(resp, axis=(2, 3))


def count_forward(feat: T.Tensor, mp: ModelParams):
    """Full counting pass: (existence P, counts C, energies E)."""
    energies, existence = energy_maps(feat, mp)
    counts = counts_from_energy(energies, mp)
    return existence, counts, energies


def counter_loss(existence: T.Tensor, counts: T.Tensor, target_counts: np.ndarray,
                 target_exist: np.ndarray, two_step: bool = True) -> T.Tensor:
    """Counting objective, averaged over the batch.

    Two-step: mean binary cross entropy on existence plus a smooth-L1
    regression on counts restricted to classes the model deems present
    (P > 0.5), normalized by how many there are; the regression term is zero
    when no class clears the threshold.  One-step drops the existence head
    and regresses every class directly.
    """
    bsz, n = counts.shape
    dt = counts.dtype
    target_counts = np.asarray(target_counts, dtype=dt)
    diff = T.add(counts, -target_counts)
    if not two_step:
        return T.mul(T.sum_(T.smooth_l1(diff)), 1.0 / (bsz * n))
    target_exist = np.asarray(target_exist, dtype=dt)
    cls_term = T.mul(T.sum_(T.bce(target_exist, existence)), 1.0 / (bsz * n))
    present = (existence.data > 0.5).astype(dt)
    n_present = present.sum(axis=1)
    weights = present / np.maximum(n_present, 1.0)[:, None]
    reg_term = T.mul(T.sum_(T.mul(T.smooth_l1(diff), weights)), 1.0 / bsz)
    return T.add(cls_term, reg_term)
