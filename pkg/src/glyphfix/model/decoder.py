"""Coverage-attention GRU decoder steered by a live counting vector.

Each step queries the feature grid with a two-layer GRU state, adds a
coverage term (a convolution over the accumulated attention) to the energies,
and predicts the next symbol from the radical feature plus a projection of
the remaining counts.  The counting vector then loses one unit at the emitted
symbol, clamped at zero, so repeated radicals are accounted for and exhausted
classes stop attracting probability.  At test time the re-weight rule rescales
the distribution by tanh(counts + delta) before the argmax.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from .config import ModelConfig, ModelParams


@dataclass
class DecoderState:
    s: T.Tensor                 # hidden state (B, d_s)
    y_prev: np.ndarray | None   # previous tokens (B,), None at sequence start
    alpha_sum: T.Tensor         # accumulated attention (B, L)
    counts: T.Tensor            # remaining counts (B, N+1)


@dataclass
class DecodeTrace:
    tokens: np.ndarray          # (B, T)
    lengths: np.ndarray         # (B,) valid steps per sample, end token included
    probs: list                 # T tensors (B, N+1), raw distributions
    alphas: list                # T tensors (B, L)
    gs: list                    # T tensors (B, d_g)
    counts: list                # T+1 tensors (B, N+1); counts[0] is the start vector
    overflow: np.ndarray        # (B,) decode hit max_len without an end token

    @property
    def steps(self) -> int:
        return len(self.probs)


def reweight(p: np.ndarray, counts: np.ndarray, delta: float = 0.7) -> np.ndarray:
    """Inference re-weighting p * tanh(counts + delta).

    The result is a score vector for the argmax, not a renormalized
    distribution; the additive delta keeps every factor strictly positive so
    exhausted classes are damped rather than erased.
    """
    return p * np.tanh(counts + delta)


def build_initial_counts(symbol_counts, config: ModelConfig, source: str) -> T.Tensor:
    """Extend per-symbol counts with the end-token entry.

    ``source="counter"`` clamps predictions at zero and pins the end entry to
    a large constant so termination is never suppressed; ``source="truth"``
    appends the exact end count of one, which makes teacher-forced decoding
    exhaust the vector to exactly zero.
    """
    if source == "counter":
        counts = symbol_counts if isinstance(symbol_counts, T.Tensor) else T.Tensor(symbol_counts)
        clamped = T.relu(counts)
        end_val = config.end_count
    elif source == "truth":
        arr = symbol_counts.data if isinstance(symbol_counts, T.Tensor) else symbol_counts
        clamped = T.Tensor(np.asarray(arr, dtype=np.dtype(config.dtype)))
        end_val = 1.0
    else:
        raise ValueError(f"unknown counts source {source!r}")
    bsz = clamped.shape[0]
    end_col = T.Tensor(np.full((bsz, 1), end_val, dtype=clamped.dtype))
    return T.concat([clamped, end_col], axis=1)


def init_state(feat: T.Tensor, counts0: T.Tensor, mp: ModelParams) -> DecoderState:
    s0 = T.tanh(T.matmul(T.global_avg_pool(feat, axis=1), mp["dec.w_init"]))
    bsz, length, _ = feat.shape
    alpha_sum = T.Tensor(np.zeros((bsz, length), dtype=feat.dtype))
    return DecoderState(s=s0, y_prev=None, alpha_sum=alpha_sum, counts=counts0)


def _attention(state_query: T.Tensor, feat: T.Tensor, uatt_f: T.Tensor,
               alpha_sum: T.Tensor, mp: ModelParams) -> T.Tensor:
    cfg = mp.config
    bsz = feat.shape[0]
    grid = T.reshape(alpha_sum, (bsz, 1, cfg.feat_hw, cfg.feat_hw))
    cov = T.conv2d(grid, mp["dec.cov.w"], mp["dec.cov.b"], pad="same")
    cov = T.transpose(T.reshape(cov, (bsz, cfg.coverage_channels, cfg.feat_len)), (0, 2, 1))
    query = T.reshape(T.matmul(state_query, mp["dec.w_att"]), (bsz, 1, cfg.attn_dim))
    mix = T.tanh(T.add(T.add(query, uatt_f), T.matmul(cov, mp["dec.w_h"])))
    energies = T.matmul(mix, mp["dec.w"])                  # (B, L)
    return T.softmax(energies, axis=1)


def decode_step(state: DecoderState, feat: T.Tensor, mp: ModelParams,
                mode: str = "greedy", target: np.ndarray | None = None,
                use_reweight: bool = False, reweight_delta: float = 0.7,
                use_count_vector: bool | None = None,
                uatt_f: T.Tensor | None = None):
    """One decode step; returns (probs, tokens, alpha, g, new_state)."""
    cfg = mp.config
    if use_count_vector is None:
        use_count_vector = cfg.use_count_vector
    if uatt_f is None:
        uatt_f = T.matmul(feat, mp["dec.u_att"])
    bsz = feat.shape[0]

    if state.y_prev is None:
        v_prev = T.reshape(mp["dec.start_embed"], (1, cfg.embed_dim))
        v_prev = T.add(v_prev, T.Tensor(np.zeros((bsz, cfg.embed_dim), dtype=feat.dtype)))
    else:
        v_prev = T.embedding_lookup(mp["dec.embed"], state.y_prev)

    s_hat = T.gru_cell(v_prev, state.s, mp["dec.gru1.wx"], mp["dec.gru1.wh"], mp["dec.gru1.b"])
    alpha = _attention(s_hat, feat, uatt_f, state.alpha_sum, mp)
    context = T.sum_(T.mul(T.reshape(alpha, (bsz, -1, 1)), feat), axis=1)
    s_new = T.gru_cell(context, s_hat, mp["dec.gru2.wx"], mp["dec.gru2.wh"], mp["dec.gru2.b"])
    g = T.add(T.add(T.matmul(v_prev, mp["dec.w_v"]), T.matmul(s_new, mp["dec.w_s"])),
              T.matmul(context, mp["dec.w_a"]))
    pre = g if not use_count_vector else T.add(g, T.matmul(state.counts, mp["dec.w_c"]))
    hidden = T.maxout(T.matmul(pre, mp["dec.w_widen"]))
    probs = T.softmax(T.matmul(hidden, mp["dec.w_p"]), axis=-1)

    if mode == "teacher":
        if target is None:
            raise ValueError("teacher mode needs target tokens")
        tokens = np.asarray(target, dtype=np.int64)
    elif mode == "greedy":
        scores = probs.data
        if use_reweight:
            scores = reweight(scores, state.counts.data, reweight_delta)
        tokens = np.argmax(scores, axis=-1)
    else:
        raise ValueError(f"unknown decode mode {mode!r}")

    onehot = np.zeros((bsz, cfg.num_outputs), dtype=feat.dtype)
    onehot[np.arange(bsz), tokens] = 1.0
    counts_new = T.relu(T.add(state.counts, -onehot))
    new_state = DecoderState(s=s_new, y_prev=tokens,
                             alpha_sum=T.add(state.alpha_sum, alpha),
                             counts=counts_new)
    return probs, tokens, alpha, g, new_state


def decode_sequence(feat: T.Tensor, counts0: T.Tensor, mp: ModelParams,
                    mode: str = "greedy", targets: np.ndarray | None = None,
                    lengths: np.ndarray | None = None, use_reweight: bool = False,
                    reweight_delta: float = 0.7, use_count_vector: bool | None = None,
                    max_len: int | None = None) -> DecodeTrace:
    """Run the decoder to the end token (or per-sample target length).

    Teacher mode consumes ``targets`` (B, T) padded with the end token and
    ``lengths`` counting the end token.  Greedy mode stops once every sample
    emitted the end token; samples hitting ``max_len`` first are flagged in
    ``trace.overflow`` and returned truncated.
    """
    cfg = mp.config
    if max_len is None:
        max_len = cfg.max_decode_len
    bsz = feat.shape[0]
    uatt_f = T.matmul(feat, mp["dec.u_att"])
    state = init_state(feat, counts0, mp)

    probs_l, alphas_l, gs_l, counts_l = [], [], [], [state.counts]
    tokens_l = []
    if mode == "teacher":
        if targets is None or lengths is None:
            raise ValueError("teacher mode needs targets and lengths")
        steps = targets.shape[1]
        for t in range(steps):
            probs, tokens, alpha, g, state = decode_step(
                state, feat, mp, mode="teacher", target=targets[:, t],
                use_count_vector=use_count_vector, uatt_f=uatt_f)
            probs_l.append(probs); alphas_l.append(alpha); gs_l.append(g)
            counts_l.append(state.counts); tokens_l.append(tokens)
        lengths_out = np.asarray(lengths, dtype=np.int64)
        overflow = np.zeros(bsz, dtype=bool)
    else:
        finished = np.zeros(bsz, dtype=bool)
        lengths_out = np.zeros(bsz, dtype=np.int64)
        for t in range(max_len):
            probs, tokens, alpha, g, state = decode_step(
                state, feat, mp, mode="greedy", use_reweight=use_reweight,
                reweight_delta=reweight_delta, use_count_vector=use_count_vector,
                uatt_f=uatt_f)
            tokens = np.where(finished, cfg.end_token, tokens)
            state.y_prev = tokens
            probs_l.append(probs); alphas_l.append(alpha); gs_l.append(g)
            counts_l.append(state.counts); tokens_l.append(tokens)
            newly_done = (~finished) & (tokens == cfg.end_token)
            lengths_out[newly_done] = t + 1
            finished |= newly_done
            if finished.all():
                break
        overflow = ~finished
        lengths_out[overflow] = len(tokens_l)
    tokens_arr = np.stack(tokens_l, axis=1) if tokens_l else np.zeros((bsz, 0), dtype=np.int64)
    return DecodeTrace(tokens=tokens_arr, lengths=lengths_out, probs=probs_l,
                       alphas=alphas_l, gs=gs_l, counts=counts_l, overflow=overflow)


def decoder_loss(trace: DecodeTrace, targets: np.ndarray, lengths: np.ndarray) -> T.Tensor:
    """Mean over samples of the per-step cross entropy, averaged per sequence.

    The end token is part of every sequence; steps past a sample's length are
    teacher-forcing padding and contribute nothing.
    """
    bsz, steps = targets.shape
    if trace.steps != steps:
        raise ValueError(f"trace has {trace.steps} steps, targets have {steps}")
    lengths = np.asarray(lengths, dtype=np.float64)
    dt = trace.probs[0].dtype
    total = T.Tensor(np.zeros((), dtype=dt))
    for t in range(steps):
        onehot = np.zeros((bsz, trace.probs[t].shape[1]), dtype=dt)
        onehot[np.arange(bsz), targets[:, t]] = 1.0
        step_ce = T.ce(onehot, trace.probs[t], axis=-1)
        weight = ((t < lengths) / lengths).astype(dt)
        total = T.add(total, T.sum_(T.mul(step_ce, weight)))
    return T.mul(total, 1.0 / bsz)
