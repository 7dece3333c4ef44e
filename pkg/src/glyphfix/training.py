"""Joint optimization of counter, decoder, fetcher and attention coupling.

The objective is a weighted sum of the four component losses; adadelta with
accumulator decay rho applies the updates.  The attention regularizer pulls
the decoder's per-class mean attention toward a sharpened softmax of the
counter's energy map for the same class, so both heads agree on where a
symbol lives in the image.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .corpus import CorpusBundle, load_images
from .grammar import derive_count_vector, derive_existence
from .model import (
    ModelParams,
    build_initial_counts,
    count_forward,
    counter_loss,
    decode_sequence,
    decoder_loss,
    encode,
    fetch_forward,
    fetcher_loss,
)

HISTORY_COLUMNS = ("epoch", "step", "L_c", "L_d", "L_f", "L_r", "O")


class NonFiniteLossError(RuntimeError):
    """A loss term became NaN/inf; the step is aborted, the term named."""


@dataclass
class TrainConfig:
    lambda_count: float = 1.0
    lambda_decode: float = 1.0
    lambda_fetch: float = 1.0
    lambda_reg: float = 0.5
    reg_temperature: float = 0.2
    rho: float = 0.95
    eps: float = 1e-6
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    val_every: int = 1
    val_reweight: bool = True
    use_attention_reg: bool = True
    count_source: str = "counter"   # counting vector fed to the decoder in training
    verbose: bool = False

    def validate(self) -> None:
        if min(self.lambda_count, self.lambda_decode, self.lambda_fetch, self.lambda_reg) < 0:
            raise ValueError("loss weights must be non-negative")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie strictly between 0 and 1")
        if self.count_source not in ("counter", "truth"):
            raise ValueError(f"unknown count source {self.count_source!r}")


@dataclass
class SequenceDataset:
    """Images with their token sequences and right-character classes."""

    images: np.ndarray            # uint8 (n, H, W)
    tokens: list                  # list of token-id lists (no end token)
    classes: np.ndarray           # (n,) int
    counts: np.ndarray            # (n, N) ground-truth symbol counts
    exists: np.ndarray            # (n, N) ground-truth existence

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def build(cls, images: np.ndarray, tokens: list, classes, n_symbols: int) -> "SequenceDataset":
        counts = np.zeros((len(tokens), n_symbols), dtype=np.float64)
        for i, seq in enumerate(tokens):
            for tok in seq:
                counts[i, tok] += 1
        return cls(images=images, tokens=[list(t) for t in tokens],
                   classes=np.asarray(classes, dtype=np.int64),
                   counts=counts, exists=(counts > 0).astype(np.float64))


def dataset_from_corpus(bundle: CorpusBundle, split: str) -> SequenceDataset:
    records = [r for r in bundle.split(split) if r.label != "MISSPELLED"]
    images = load_images(bundle, records)
    tokens = [bundle.tokens_of(r) for r in records]
    classes = [r.label for r in records]
    return SequenceDataset.build(images, tokens, classes, len(bundle.vocab))


def pad_targets(tokens: list, end_token: int):
    """Append the end token and pad to a rectangle; lengths include the end."""
    lengths = np.array([len(t) + 1 for t in tokens], dtype=np.int64)
    width = int(lengths.max())
    out = np.full((len(tokens), width), end_token, dtype=np.int64)
    for i, seq in enumerate(tokens):
        out[i, :len(seq)] = seq
    return out, lengths


def attention_regularization(alphas: list, energies: T.Tensor, targets: np.ndarray,
                             lengths: np.ndarray, temperature: float,
                             end_token: int) -> T.Tensor:
    """KL between per-class mean decode attention and sharpened count attention.

    For every distinct symbol class in a sample's sequence, the decode
    attention maps at that class's steps are averaged and compared against
    softmax(energy / temperature) for the same class; samples average over
    their class count, the batch over samples.  The end token has no energy
    map and is skipped.
    """
    bsz, steps = targets.shape
    length = alphas[0].shape[1]
    stacked = T.concat([T.reshape(a, (bsz, 1, length)) for a in alphas], axis=1)
    dt = stacked.dtype
    total = T.Tensor(np.zeros((), dtype=dt))
    for b in range(bsz):
        sel_rows = []
        classes = []
        seq = targets[b, :lengths[b]]
        for cls in dict.fromkeys(int(t) for t in seq):   # distinct, stable order
            if cls == end_token:
                continue
            hits = np.flatnonzero(seq == cls)
            row = np.zeros(steps, dtype=dt)
            row[hits] = 1.0 / len(hits)
            sel_rows.append(row)
            classes.append(cls)
        if not classes:
            continue
        sample_alpha = T.reshape(T.narrow(stacked, 0, b, 1), (steps, length))
        mean_alpha = T.matmul(T.Tensor(np.stack(sel_rows)), sample_alpha)
        sample_energy = T.reshape(T.narrow(energies, 0, b, 1), (length, energies.shape[2]))
        picked = T.index_select(T.transpose(sample_energy, (1, 0)), classes, axis=0)
        count_attn = T.softmax(picked, axis=1, temperature=temperature)
        divs = T.kl(mean_alpha, count_attn, axis=1)
        total = T.add(total, T.mul(T.sum_(divs), 1.0 / len(classes)))
    return T.mul(total, 1.0 / bsz)


def adadelta_step(params, rho: float, eps: float) -> None:
    """Accumulator-ratio update; parameters with no gradient are untouched."""
    for p in params:
        if p.grad is None:
            continue
        g = p.grad
        p.acc_grad_sq *= rho
        p.acc_grad_sq += (1.0 - rho) * g * g
        delta = -np.sqrt(p.acc_delta_sq + eps) / np.sqrt(p.acc_grad_sq + eps) * g
        p.data += delta
        p.acc_delta_sq *= rho
        p.acc_delta_sq += (1.0 - rho) * delta * delta


def train_step(batch: dict, mp: ModelParams, tcfg: TrainConfig,
               rng: np.random.Generator) -> dict:
    """One optimization step; returns the component losses as floats."""
    cfg = mp.config
    T.zero_grads(mp.parameters())
    feat = encode(batch["images"], mp)
    targets, lengths = batch["targets"], batch["lengths"]

    counter_on = tcfg.use_attention_reg or cfg.use_count_vector
    loss_count = None
    energies = None
    if counter_on and tcfg.lambda_count > 0:
        existence, pred_counts, energies = count_forward(feat, mp)
        loss_count = counter_loss(existence, pred_counts, batch["counts"],
                                  batch["exists"], two_step=cfg.two_step_counting)

    if cfg.use_count_vector and tcfg.count_source == "counter" and loss_count is not None:
        counts0 = build_initial_counts(pred_counts, cfg, "counter")
    else:
        counts0 = build_initial_counts(batch["counts"], cfg, "truth")
    trace = decode_sequence(feat, counts0, mp, mode="teacher",
                            targets=targets, lengths=lengths)
    loss_decode = decoder_loss(trace, targets, lengths)

    loss_fetch = None
    if tcfg.lambda_fetch > 0:
        p_fet = fetch_forward(feat, trace.gs, lengths, mp, train_mode=True, rng=rng)
        loss_fetch = fetcher_loss(p_fet, batch["classes"])

    loss_reg = None
    if tcfg.use_attention_reg and tcfg.lambda_reg > 0 and energies is not None:
        loss_reg = attention_regularization(trace.alphas, energies, targets, lengths,
                                            tcfg.reg_temperature, cfg.end_token)

    terms = {"L_c": loss_count, "L_d": loss_decode, "L_f": loss_fetch, "L_r": loss_reg}
    weights = {"L_c": tcfg.lambda_count, "L_d": tcfg.lambda_decode,
               "L_f": tcfg.lambda_fetch, "L_r": tcfg.lambda_reg}
    objective = None
    values = {}
    for name, term in terms.items():
        if term is None:
            values[name] = 0.0
            continue
        val = term.item()
        if not np.isfinite(val):
            raise NonFiniteLossError(f"loss term {name} is non-finite ({val})")
        values[name] = val
        weighted = T.mul(term, weights[name])
        objective = weighted if objective is None else T.add(objective, weighted)
    values["O"] = objective.item()
    if not np.isfinite(values["O"]):
        raise NonFiniteLossError("objective is non-finite")
    objective.backward()
    adadelta_step(mp.parameters(), tcfg.rho, tcfg.eps)
    return values


@dataclass
class FitResult:
    history: list = field(default_factory=list)       # per-step loss rows
    val_history: list = field(default_factory=list)   # (epoch, dacc) rows
    best_values: dict | None = None
    best_val_dacc: float = -1.0
    best_epoch: int = -1


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def sequence_dacc(predicted: list, truth: list) -> float:
    hits = sum(list(p) == list(t) for p, t in zip(predicted, truth))
    return hits / max(len(truth), 1)


def fit(mp: ModelParams, tcfg: TrainConfig, train: SequenceDataset,
        val: SequenceDataset | None = None, history_path: str | Path | None = None) -> FitResult:
    """Epoch loop with validation-driven selection of the best parameters.

    Selection uses exact-sequence accuracy on the validation split (greedy
    decode with the deployment settings); without a validation set the final
    parameters win.  The history file is one CSV row per optimization step.
    """
    from .inference import batched_decode  # local import to avoid a cycle

    tcfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence([tcfg.seed, 23]))
    result = FitResult()
    dtype = np.dtype(mp.config.dtype)
    end_token = mp.config.end_token

    for epoch in range(1, tcfg.epochs + 1):
        for step, idx in enumerate(_batches(len(train), tcfg.batch_size, rng), start=1):
            tokens = [train.tokens[i] for i in idx]
            targets, lengths = pad_targets(tokens, end_token)
            batch = {
                "images": train.images[idx].astype(dtype) / 255.0,
                "targets": targets,
                "lengths": lengths,
                "counts": train.counts[idx],
                "exists": train.exists[idx],
                "classes": train.classes[idx],
            }
            values = train_step(batch, mp, tcfg, rng)
            result.history.append({"epoch": epoch, "step": step, **values})
        if val is not None and epoch % tcfg.val_every == 0:
            decoded = batched_decode(mp, val.images.astype(dtype) / 255.0,
                                     use_reweight=tcfg.val_reweight)
            dacc = sequence_dacc(decoded.tokens, val.tokens)
            result.val_history.append({"epoch": epoch, "dacc": dacc})
            if tcfg.verbose:
                print(f"epoch {epoch}: val dacc {dacc:.4f}")
            if dacc > result.best_val_dacc:
                result.best_val_dacc = dacc
                result.best_epoch = epoch
                result.best_values = mp.copy_values()
    if result.best_values is None:
        result.best_values = mp.copy_values()
        result.best_epoch = tcfg.epochs
    if history_path is not None:
        write_history(history_path, result)
    return result


def write_history(path: str | Path, result: FitResult) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for row in result.history:
            writer.writerow([row[c] for c in HISTORY_COLUMNS])
    val_path = path.with_name("val_metrics.csv")
    with open(val_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("epoch", "dacc"))
        for row in result.val_history:
            writer.writerow([row["epoch"], row["dacc"]])
