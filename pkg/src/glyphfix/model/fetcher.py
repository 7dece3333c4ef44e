"""Ideal-character fetcher: attention over radical features, gradient-blocked.

A global query from the feature map scores each decoded radical feature;
the softmax weights (with random drops during training) mix transformed
radical features into one character vector that a linear head maps to the
right-character classes.  Both the feature map and the radical features pass
through a stop-gradient barrier so the fetcher never shapes the upstream
network, which keeps those features from specializing to well-formed
characters only.
"""

from __future__ import annotations

import math

import numpy as np

from .. import tensor as T
from .config import ModelParams

NEG_MASK = -1e9


class InvalidTraceError(ValueError):
    """Raised when a decode trace has no steps to attend over."""


def fetch_forward(feat: T.Tensor, gs: list, lengths: np.ndarray, mp: ModelParams,
                  train_mode: bool = False,
                  rng: np.random.Generator | None = None) -> T.Tensor:
    """Class distribution (B, M) from a decode trace's radical features."""
    cfg = mp.config
    if not gs:
        raise InvalidTraceError("decode trace has no radical features")
    if train_mode and rng is None:
        raise ValueError("train mode needs an rng for the random drop")
    bsz = feat.shape[0]
    steps = len(gs)
    lengths = np.asarray(lengths, dtype=np.int64)

    feat_sg = T.stop_gradient(feat)
    g_stack = T.concat([T.reshape(T.stop_gradient(g), (bsz, 1, cfg.g_dim)) for g in gs], axis=1)

    query = T.matmul(T.global_avg_pool(feat_sg, axis=1), mp["fet.u_q"])     # (B, d_k)
    keys = T.matmul(g_stack, mp["fet.u_k"])                                 # (B, T, d_k)
    energy = T.mul(T.sum_(T.mul(keys, T.reshape(query, (bsz, 1, -1))), axis=2),
                   1.0 / math.sqrt(cfg.fetch_key_dim))                      # (B, T)
    pad = (np.arange(steps)[None, :] >= lengths[:, None]).astype(feat.dtype) * NEG_MASK
    beta = T.softmax(T.add(energy, pad), axis=1)
    if train_mode:
        keep = (rng.random((bsz, steps)) >= cfg.drop_prob).astype(feat.dtype)
        beta = T.mul(beta, keep)
    values = T.matmul(g_stack, mp["fet.u_v"])                               # (B, T, d_m)
    char_vec = T.sum_(T.mul(values, T.reshape(beta, (bsz, steps, 1))), axis=1)
    return T.softmax(T.matmul(char_vec, mp["fet.u_f"]), axis=-1)


def fetcher_loss(p_fet: T.Tensor, ideal: np.ndarray) -> T.Tensor:
    """Mean negative log-likelihood of the intended classes."""
    bsz, m = p_fet.shape
    onehot = np.zeros((bsz, m), dtype=p_fet.dtype)
    onehot[np.arange(bsz), np.asarray(ideal, dtype=np.int64)] = 1.0
    return T.mean(T.ce(onehot, p_fet, axis=-1))
