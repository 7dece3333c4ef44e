"""Command-line entry point: corpus generation, training, evaluation, probes.

Usage errors exit with 1, runtime failures with 2, success with 0.  Every
subcommand accepts ``--config FILE`` plus ``--section.key=value`` overrides;
all randomness flows from the single master seed (``--run.seed`` or the
``--seed`` shorthand).
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .corpus import generate_corpus, load_corpus
from .estimator import GlyphCorrector
from .evaluation import evaluate, export_attention
from .inference import assess
from .model import load_model
from .render import read_pgm
from .runconfig import RunConfig
from .training import write_history

OVERRIDE_RE = re.compile(r"^--([a-z]+\.[a-z_]+)=(.*)$")


class UsageError(SystemExit):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"usage error: {message}", file=sys.stderr)
        raise UsageError(1)


def build_parser() -> Parser:
    parser = Parser(prog="glyphfix",
                    description="composite-glyph misspelling detection and correction")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file with [section] key=value pairs")
        p.add_argument("--seed", type=int, help="master seed (shorthand for --run.seed)")
        p.add_argument("--threads", type=int, help="worker processes (shorthand for --run.threads)")

    p = sub.add_parser("gen-corpus", help="generate the synthetic corpus")
    p.add_argument("out", help="output corpus directory")
    common(p)

    p = sub.add_parser("train", help="train a model on a generated corpus")
    p.add_argument("corpus", help="corpus directory from gen-corpus")
    p.add_argument("out", help="run directory for checkpoint and history")
    common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus split")
    p.add_argument("corpus")
    p.add_argument("checkpoint")
    p.add_argument("--split", default=None, help="train, val or test")
    p.add_argument("--topk", type=int, default=None)
    p.add_argument("--no-reweight", action="store_true",
                   help="disable test-time count re-weighting")
    p.add_argument("--no-countvec", action="store_true",
                   help="decode without the counting vector")
    p.add_argument("--baseline", choices=("fetcher", "edit", "prob_embed"), default=None)
    p.add_argument("--report", help="write the full JSON report here")
    common(p)

    for name, extra in (("decompose", ()), ("correct", ("--topk",)),
                        ("inspect-attention", ("--out",))):
        p = sub.add_parser(name, help=f"{name} a single PGM image")
        p.add_argument("image")
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--corpus", required=True,
                       help="corpus directory providing vocabulary and dictionary")
        if "--topk" in extra:
            p.add_argument("--topk", type=int, default=5)
        if "--out" in extra:
            p.add_argument("--out", required=True, help="directory for attention maps")
        p.add_argument("--no-reweight", action="store_true")
        common(p)
    return parser


def _merge_config(args, leftovers) -> RunConfig:
    overrides = []
    for item in leftovers:
        m = OVERRIDE_RE.match(item)
        if not m:
            print(f"usage error: unrecognized argument {item!r} "
                  "(overrides look like --section.key=value)", file=sys.stderr)
            raise UsageError(1)
        overrides.append(m.group(1) + "=" + m.group(2))
    rc = RunConfig.load(args.config, overrides)
    if getattr(args, "seed", None) is not None:
        rc.values["run"]["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        rc.values["run"]["threads"] = args.threads
    return rc


def _estimator(bundle, rc: RunConfig) -> GlyphCorrector:
    mk = rc.model_kwargs()
    tr = rc.values["train"]
    ev = rc.values["eval"]
    return GlyphCorrector(
        vocabulary=bundle.vocab, dictionary=bundle.dictionary,
        image_size=mk["image_size"], enc_channels=mk["enc_channels"],
        proto_dim=mk["proto_dim"], count_kernel=mk["count_kernel"],
        state_dim=mk["state_dim"], embed_dim=mk["embed_dim"],
        attn_dim=mk["attn_dim"], coverage_channels=mk["coverage_channels"],
        coverage_kernel=mk["coverage_kernel"], g_dim=mk["g_dim"],
        fetch_key_dim=mk["fetch_key_dim"], fetch_char_dim=mk["fetch_char_dim"],
        drop_prob=mk["drop_prob"], end_count=mk["end_count"],
        max_decode_len=mk["max_decode_len"],
        use_count_vector=mk["use_count_vector"],
        two_step_counting=mk["two_step_counting"], dtype=mk["dtype"],
        use_attention_reg=tr["use_attention_reg"],
        lambda_count=tr["lambda_count"], lambda_decode=tr["lambda_decode"],
        lambda_fetch=tr["lambda_fetch"], lambda_reg=tr["lambda_reg"],
        reg_temperature=tr["reg_temperature"], rho=tr["rho"], adadelta_eps=tr["eps"],
        count_source=tr["count_source"], batch_size=tr["batch_size"],
        epochs=tr["epochs"], val_every=tr["val_every"], seed=rc.seed,
        use_reweight=ev["reweight"], topk=ev["topk"], eval_batch=ev["batch"],
        verbose=True)


def cmd_gen_corpus(args, leftovers) -> int:
    rc = _merge_config(args, leftovers)
    records = generate_corpus(rc.corpus_config(), args.out, seed=rc.seed,
                              threads=rc.threads)
    splits = {s: sum(r.split == s for r in records) for s in ("train", "val", "test")}
    print(f"corpus written to {args.out}: "
          + ", ".join(f"{k}={v}" for k, v in splits.items()))
    return 0


def cmd_train(args, leftovers) -> int:
    rc = _merge_config(args, leftovers)
    bundle = load_corpus(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    est = _estimator(bundle, rc)

    from .training import dataset_from_corpus, fit
    from .model import build_params
    train = dataset_from_corpus(bundle, "train")
    val = dataset_from_corpus(bundle, "val")
    params = build_params(est._model_config(), seed=rc.seed)
    tcfg = est._train_config()
    result = fit(params, tcfg, train, val)
    params.load_values(result.best_values)
    est.params_ = params

    est.save(out / "checkpoint.gfc")
    write_history(out / "history.csv", result)
    (out / "config.json").write_text(rc.to_json() + "\n", encoding="utf-8")
    print(f"trained {tcfg.epochs} epochs; best val dacc "
          f"{result.best_val_dacc:.4f} at epoch {result.best_epoch}; "
          f"checkpoint at {out / 'checkpoint.gfc'}")
    return 0


def cmd_eval(args, leftovers) -> int:
    rc = _merge_config(args, leftovers)
    ev = rc.eval_options()
    if args.split:
        ev["split"] = args.split
    if args.topk:
        ev["topk"] = args.topk
    if args.baseline:
        ev["baseline"] = args.baseline
    if args.no_reweight:
        ev["reweight"] = False
    if args.no_countvec:
        ev["count_vector"] = False
    bundle = load_corpus(args.corpus)
    mp = load_model(args.checkpoint)
    report = evaluate(mp, bundle, split=ev["split"], baseline=ev["baseline"],
                      topk=ev["topk"], use_reweight=ev["reweight"],
                      use_count_vector=None if ev["count_vector"] else False,
                      batch_size=ev["batch"])
    mis, right = report.metrics["misspelled"], report.metrics["right"]
    print(f"split={report.split} baseline={report.baseline}")
    if mis["count"]:
        print(f"misspelled: dacc={mis['dacc']:.4f} cr={mis['cr']:.4f} "
              f"f1={mis['f1']:.4f} iacc@{ev['topk']}={mis['iacc'][str(ev['topk'])]:.4f} "
              f"mae={mis['mae']:.2f}")
    if right["count"]:
        print(f"right: dacc={right['dacc']:.4f} f1={right['f1']:.4f} "
              f"mae={right['mae']:.2f}")
    if args.report:
        report.save(args.report)
        print(f"report written to {args.report}")
    return 0


def _load_probe(args):
    bundle = load_corpus(args.corpus)
    mp = load_model(args.checkpoint)
    image = read_pgm(args.image)
    if image.shape != (mp.config.image_size, mp.config.image_size):
        raise ValueError(f"image {args.image} is {image.shape}, model expects "
                         f"{mp.config.image_size}x{mp.config.image_size}")
    return bundle, mp, image


def cmd_decompose(args, leftovers) -> int:
    _merge_config(args, leftovers)
    bundle, mp, image = _load_probe(args)
    verdict = assess(image, mp, bundle.dictionary, bundle.vocab,
                     use_reweight=not args.no_reweight)
    print("IDS:", " ".join(bundle.vocab.name_of(t) for t in verdict.tokens))
    if verdict.misspelled:
        flags = " (unparseable)" if verdict.parse_failed else ""
        print(f"MISSPELLED{flags}")
    else:
        print(f"RIGHT (class {verdict.char_class})")
    return 0


def cmd_correct(args, leftovers) -> int:
    _merge_config(args, leftovers)
    bundle, mp, image = _load_probe(args)
    verdict = assess(image, mp, bundle.dictionary, bundle.vocab,
                     use_reweight=not args.no_reweight, topk=args.topk)
    if not verdict.misspelled:
        print(f"RIGHT (class {verdict.char_class}); no correction needed")
        return 0
    print("MISSPELLED; intended-character candidates:")
    for rank, (cls, score) in enumerate(verdict.candidates, start=1):
        names = " ".join(bundle.vocab.name_of(t)
                         for t in bundle.dictionary.sequence_of(cls))
        print(f"{rank}. class {cls} score={score:.4f} [{names}]")
    return 0


def cmd_inspect_attention(args, leftovers) -> int:
    _merge_config(args, leftovers)
    bundle, mp, image = _load_probe(args)
    index = export_attention(mp, image, bundle, args.out,
                             use_reweight=not args.no_reweight)
    print(f"attention maps written; index at {index}")
    return 0


COMMANDS = {
    "gen-corpus": cmd_gen_corpus,
    "train": cmd_train,
    "eval": cmd_eval,
    "decompose": cmd_decompose,
    "correct": cmd_correct,
    "inspect-attention": cmd_inspect_attention,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, leftovers = parser.parse_known_args(argv)
    except UsageError as err:
        return err.code
    try:
        return COMMANDS[args.command](args, leftovers)
    except UsageError as err:
        return err.code
    except (ValueError, KeyError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
