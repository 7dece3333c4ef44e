"""Metric suite and corpus-level evaluation reports.

Misspelled samples are the positive class of the assessment task.  The
correction metrics (ideal-character accuracy, correction rate) are computed
over every misspelled sample regardless of whether its decomposition was
right; the correction rate demands both a correct decomposition and the
intended class among the top-k candidates, so it can never exceed either.
Counting errors are reported times one hundred.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import CorpusBundle, load_images
from .distances import baseline_candidates
from .grammar import MalformedSequenceError, derive_count_vector, validate
from .inference import batched_decode, rank_candidates
from .model import ModelParams
from .render import read_pgm, write_pgm

BASELINES = ("fetcher", "edit", "prob_embed")


@dataclass
class SampleEval:
    """Everything the metric suite needs to know about one evaluated sample."""

    misspelled_truth: bool
    misspelled_pred: bool
    decode_correct: bool
    error_type: str = "none"
    ideal_rank: int | None = None   # 1-based rank of the intended class
    count_abs_err: float = 0.0      # mean |pred - truth| over symbol classes
    count_sq_err: float = 0.0


def _prf(tp: int, fp: int, fn: int) -> dict:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def _mean(vals) -> float:
    vals = list(vals)
    return float(np.mean(vals)) if vals else 0.0


def aggregate(samples: list[SampleEval], topk: int = 5) -> dict:
    """Compute the full metric table from per-sample results."""
    mis = [s for s in samples if s.misspelled_truth]
    right = [s for s in samples if not s.misspelled_truth]

    mis_block: dict = {
        "count": len(mis),
        "dacc": _mean(s.decode_correct for s in mis),
        "iacc": {str(k): _mean(s.ideal_rank is not None and s.ideal_rank <= k for s in mis)
                 for k in range(1, topk + 1)},
        "cr": _mean(s.decode_correct and s.ideal_rank is not None and s.ideal_rank <= topk
                    for s in mis),
        "mae": 100.0 * _mean(s.count_abs_err for s in mis),
        "mse": 100.0 * _mean(s.count_sq_err for s in mis),
    }
    mis_block.update(_prf(
        tp=sum(s.misspelled_pred for s in mis),
        fp=sum(s.misspelled_pred for s in right),
        fn=sum(not s.misspelled_pred for s in mis)))
    by_type = {}
    for et in ("stroke", "radical", "structure"):
        sub = [s for s in mis if s.error_type == et]
        by_type[et] = {
            "count": len(sub),
            "dacc": _mean(s.decode_correct for s in sub),
            "cr": _mean(s.decode_correct and s.ideal_rank is not None and s.ideal_rank <= topk
                        for s in sub),
            f"iacc@{topk}": _mean(s.ideal_rank is not None and s.ideal_rank <= topk
                                  for s in sub),
        }
    mis_block["by_error_type"] = by_type

    right_block: dict = {
        "count": len(right),
        "dacc": _mean(s.decode_correct for s in right),
        "mae": 100.0 * _mean(s.count_abs_err for s in right),
        "mse": 100.0 * _mean(s.count_sq_err for s in right),
    }
    right_block.update(_prf(
        tp=sum(not s.misspelled_pred for s in right),
        fp=sum(not s.misspelled_pred for s in mis),
        fn=sum(s.misspelled_pred for s in right)))
    return {"misspelled": mis_block, "right": right_block, "n_samples": len(samples)}


@dataclass
class EvalReport:
    split: str
    baseline: str
    topk: int
    options: dict
    seed: object
    metrics: dict

    def to_json(self) -> str:
        payload = {"split": self.split, "baseline": self.baseline, "topk": self.topk,
                   "options": self.options, "seed": self.seed, "metrics": self.metrics}
        return json.dumps(payload, indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def _ideal_rank_fetcher(probs: np.ndarray, ideal: int) -> int:
    ranking = np.lexsort((np.arange(len(probs)), -probs))
    return int(np.where(ranking == ideal)[0][0]) + 1


def _ideal_rank_baseline(tokens, bundle: CorpusBundle, method: str, ideal: int) -> int:
    ranked = baseline_candidates(tokens, bundle.dictionary, bundle.vocab,
                                 k=len(bundle.dictionary), method=method)
    for pos, (cls, _score) in enumerate(ranked, start=1):
        if cls == ideal:
            return pos
    raise RuntimeError("ideal class missing from a full ranking")


def evaluate(mp: ModelParams, bundle: CorpusBundle, split: str = "test",
             baseline: str = "fetcher", topk: int = 5, use_reweight: bool = True,
             use_count_vector: bool | None = None, batch_size: int = 64) -> EvalReport:
    """Assess and correct every sample of a split and aggregate the metrics."""
    if baseline not in BASELINES:
        raise ValueError(f"unknown baseline {baseline!r}")
    records = bundle.split(split)
    if not records:
        raise ValueError(f"split {split!r} is empty")
    images = load_images(bundle, records).astype(np.dtype(mp.config.dtype)) / 255.0
    out = batched_decode(mp, images, batch_size=batch_size, use_reweight=use_reweight,
                         use_count_vector=use_count_vector)

    samples = []
    for i, rec in enumerate(records):
        truth_tokens = bundle.tokens_of(rec)
        decoded = out.tokens[i]
        try:
            hit = validate(decoded, bundle.dictionary, bundle.vocab)
        except MalformedSequenceError:
            hit = None
        is_mis_truth = rec.label == "MISSPELLED"
        truth_counts = derive_count_vector(truth_tokens, bundle.vocab)
        diff = out.counts[i] - truth_counts
        sample = SampleEval(
            misspelled_truth=is_mis_truth,
            misspelled_pred=hit is None,
            decode_correct=decoded == truth_tokens,
            error_type=rec.error_type,
            count_abs_err=float(np.mean(np.abs(diff))),
            count_sq_err=float(np.mean(diff * diff)),
        )
        if is_mis_truth:
            if baseline == "fetcher":
                sample.ideal_rank = _ideal_rank_fetcher(out.fetch_probs[i], rec.ideal)
            else:
                sample.ideal_rank = _ideal_rank_baseline(decoded, bundle, baseline, rec.ideal)
        samples.append(sample)

    options = {"use_reweight": use_reweight,
               "use_count_vector": (mp.config.use_count_vector
                                    if use_count_vector is None else use_count_vector),
               "model": mp.config.to_dict(), "corpus": bundle.config.get("corpus", {})}
    if baseline == "prob_embed":
        options["baseline_note"] = ("depth-discounted tree distance stand-in; "
                                    "falls back to edit distance on unparseable decodes")
    return EvalReport(split=split, baseline=baseline, topk=topk, options=options,
                      seed=bundle.config.get("seed"), metrics=aggregate(samples, topk))


def _to_pgm_scale(arr: np.ndarray) -> np.ndarray:
    lo, hi = float(arr.min()), float(arr.max())
    if hi - lo < 1e-12:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def export_attention(mp: ModelParams, image: np.ndarray, bundle: CorpusBundle,
                     out_dir: str | Path, use_reweight: bool = True) -> Path:
    """Write per-step decoder attention and per-class energy maps as PGM files.

    Decoder maps are upsampled to the input size by pixel repetition; every
    map is stretched to the full 8-bit range.  An index file lists what each
    file shows; re-export is bit-identical.
    """
    from . import tensor as T
    from .model import build_initial_counts, count_forward, decode_sequence, encode

    cfg = mp.config
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    factor = cfg.image_size // cfg.feat_hw
    lines = []
    with T.no_grad():
        feat = encode(np.asarray(image)[None], mp)
        _, counts, energies = count_forward(feat, mp)
        counts0 = build_initial_counts(counts, cfg, "counter")
        trace = decode_sequence(feat, counts0, mp, mode="greedy", use_reweight=use_reweight)
    for t in range(trace.steps):
        tok = int(trace.tokens[0, t])
        name = "end" if tok == cfg.end_token else bundle.vocab.name_of(tok)
        grid = trace.alphas[t].data[0].reshape(cfg.feat_hw, cfg.feat_hw)
        up = np.repeat(np.repeat(_to_pgm_scale(grid), factor, 0), factor, 1)
        fname = f"decode_{t:02d}_{name}.pgm"
        write_pgm(out_dir / fname, up)
        lines.append(f"{fname}\tdecoder attention step {t} -> {name}")
        if t + 1 == int(trace.lengths[0]):
            break
    for n in range(cfg.num_symbols):
        grid = energies.data[0, :, n].reshape(cfg.feat_hw, cfg.feat_hw)
        up = np.repeat(np.repeat(_to_pgm_scale(grid), factor, 0), factor, 1)
        fname = f"energy_{bundle.vocab.name_of(n)}.pgm"
        write_pgm(out_dir / fname, up)
        lines.append(f"{fname}\tcounter energy map for {bundle.vocab.name_of(n)}")
    index = out_dir / "index.txt"
    index.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return index
