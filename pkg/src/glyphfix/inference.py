"""End-to-end assessment and correction of single glyph images."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .grammar import IDSDictionary, MalformedSequenceError, SymbolVocabulary, validate
from .model import (
    ModelParams,
    build_initial_counts,
    count_forward,
    decode_sequence,
    encode,
    fetch_forward,
)
from .model.decoder import reweight  # re-exported: the test-time re-weight rule

__all__ = ["Verdict", "BatchOutput", "assess", "batched_decode", "rank_candidates",
           "reweight"]


@dataclass
class Verdict:
    """Assessment outcome for one image, plus correction candidates."""

    misspelled: bool
    char_class: int | None
    tokens: list[int]
    candidates: list = field(default_factory=list)  # (class, score), best first
    parse_failed: bool = False
    overflow: bool = False


@dataclass
class BatchOutput:
    tokens: list            # per-sample decoded symbol ids, end token stripped
    overflow: np.ndarray
    counts: np.ndarray      # raw counter predictions (B, N)
    existence: np.ndarray   # (B, N)
    fetch_probs: np.ndarray  # (B, M)


def batched_decode(mp: ModelParams, images: np.ndarray, batch_size: int = 64,
                   use_reweight: bool = True, use_count_vector: bool | None = None,
                   reweight_delta: float = 0.7, max_len: int | None = None) -> BatchOutput:
    """Greedy decoding plus counting and fetching for a stack of images."""
    cfg = mp.config
    tokens: list = []
    overflow = []
    counts_all = []
    exist_all = []
    fetch_all = []
    with T.no_grad():
        for start in range(0, len(images), batch_size):
            chunk = images[start:start + batch_size]
            feat = encode(chunk, mp)
            existence, counts, _ = count_forward(feat, mp)
            counts0 = build_initial_counts(counts, cfg, "counter")
            trace = decode_sequence(feat, counts0, mp, mode="greedy",
                                    use_reweight=use_reweight,
                                    use_count_vector=use_count_vector,
                                    reweight_delta=reweight_delta, max_len=max_len)
            p_fet = fetch_forward(feat, trace.gs, trace.lengths, mp, train_mode=False)
            for b in range(len(chunk)):
                n_steps = int(trace.lengths[b])
                seq = trace.tokens[b, :n_steps].tolist()
                if not trace.overflow[b]:
                    seq = seq[:-1]  # strip the end token
                tokens.append(seq)
            overflow.append(trace.overflow)
            counts_all.append(counts.data)
            exist_all.append(existence.data)
            fetch_all.append(p_fet.data)
    return BatchOutput(tokens=tokens, overflow=np.concatenate(overflow),
                       counts=np.concatenate(counts_all),
                       existence=np.concatenate(exist_all),
                       fetch_probs=np.concatenate(fetch_all))


def rank_candidates(fetch_probs: np.ndarray, k: int) -> list:
    """Top-k (class, probability), descending probability, ties by class id."""
    order = np.lexsort((np.arange(len(fetch_probs)), -fetch_probs))
    return [(int(c), float(fetch_probs[c])) for c in order[:k]]


def assess(image: np.ndarray, mp: ModelParams, dictionary: IDSDictionary,
           vocab: SymbolVocabulary, use_reweight: bool = True,
           use_count_vector: bool | None = None, topk: int = 5) -> Verdict:
    """Decompose one image, look the sequence up, and attach candidates.

    A dictionary hit returns a right-character verdict; otherwise (including
    unparseable decodes, which are flagged) the verdict is misspelled and the
    fetcher's top-k intended-character candidates are attached.
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("assess expects a single (H, W) image")
    out = batched_decode(mp, image[None], use_reweight=use_reweight,
                         use_count_vector=use_count_vector)
    tokens = out.tokens[0]
    parse_failed = False
    char_class = None
    try:
        char_class = validate(tokens, dictionary, vocab)
    except MalformedSequenceError:
        parse_failed = True
    if char_class is not None:
        return Verdict(misspelled=False, char_class=char_class, tokens=tokens,
                       overflow=bool(out.overflow[0]))
    return Verdict(misspelled=True, char_class=None, tokens=tokens,
                   candidates=rank_candidates(out.fetch_probs[0], topk),
                   parse_failed=parse_failed, overflow=bool(out.overflow[0]))
