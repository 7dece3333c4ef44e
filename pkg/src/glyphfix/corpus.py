"""Synthetic corpus generation: language build, rendering, manifest files.

The generated language mirrors a seen/unseen partition: the train split holds
only well-formed ("right") characters of the seen classes, the validation
split holds unseen right classes, and misspelled samples (mutants of seen
classes) appear only in the test split.  Regenerating with the same master
seed reproduces every byte of the manifest and the images.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .grammar import (
    IDSDictionary,
    IDSTree,
    Internal,
    Leaf,
    STRUCTURE_NAMES,
    SymbolVocabulary,
    parse_ids,
    serialize_tree,
)
from .mutate import MutationExhaustedError, mutate
from .primitives import PrimitiveSet, generate_primitives
from .render import GlyphStyle, render, write_pgm

SPLITS = ("train", "val", "test")

#: draw probabilities for the ten operators when sampling trees
OP_WEIGHTS = (0.30, 0.30, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05)


@dataclass
class CorpusConfig:
    n_radicals: int = 32
    right_classes: int = 200
    val_classes: int = 20
    misspelled_classes: int = 50
    train_per_class: int = 100
    test_right_per_class: int = 20
    misspelled_per_class: int = 20
    val_per_class: int = 20
    image_size: int = 64
    error_mix: tuple = (0.411, 0.561, 0.028)
    family_fraction: float = 0.55
    min_family: int = 4
    max_family: int = 6
    rotation_max: float = 0.10
    shear_max: float = 0.10
    scale_min: float = 0.88
    scale_max: float = 1.12
    thickness_min: float = 1.4
    thickness_max: float = 2.0
    noise_sigma: float = 0.05

    def validate(self) -> None:
        if self.n_radicals < 4 or self.n_radicals % 2:
            raise ValueError("n_radicals must be an even number >= 4")
        for name in ("right_classes", "val_classes", "misspelled_classes",
                     "train_per_class", "test_right_per_class",
                     "misspelled_per_class", "val_per_class"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if abs(sum(self.error_mix) - 1.0) > 1e-9 or any(p < 0 for p in self.error_mix):
            raise ValueError("error_mix must be a distribution over three types")
        if self.image_size < 16:
            raise ValueError("image_size must be at least 16")


@dataclass
class Record:
    id: str
    path: str
    label: object            # class id or "MISSPELLED"
    ids: list[str]           # symbol names of the ground-truth sequence
    ideal: object            # intended class for misspellings, else None
    error_type: str          # none | stroke | radical | structure
    split: str

    def to_json(self) -> str:
        payload = {"id": self.id, "path": self.path, "label": self.label,
                   "ids": self.ids, "ideal": self.ideal,
                   "error_type": self.error_type, "split": self.split}
        return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "Record":
        d = json.loads(line)
        return cls(**d)


@dataclass
class LanguageBundle:
    vocab: SymbolVocabulary
    prims: PrimitiveSet
    dictionary: IDSDictionary
    seen_classes: list[int]
    val_classes: list[int]
    mutants: list = field(default_factory=list)  # (tree, tokens, ideal_cls, error_type)


def _weighted_op(rng: np.random.Generator, structure_ids) -> int:
    return structure_ids[int(rng.choice(len(structure_ids), p=OP_WEIGHTS))]


def _random_tree(rng: np.random.Generator, vocab, radicals) -> IDSTree:
    ops = vocab.structure_ids
    rad = lambda: Leaf(radicals[int(rng.integers(len(radicals)))])
    shape = rng.random()
    if shape < 0.35:
        return Internal(_weighted_op(rng, ops), rad(), rad())
    if shape < 0.60:
        inner = Internal(_weighted_op(rng, ops), rad(), rad())
        return Internal(_weighted_op(rng, ops), inner, rad())
    if shape < 0.85:
        inner = Internal(_weighted_op(rng, ops), rad(), rad())
        return Internal(_weighted_op(rng, ops), rad(), inner)
    left = Internal(_weighted_op(rng, ops), rad(), rad())
    right = Internal(_weighted_op(rng, ops), rad(), rad())
    return Internal(_weighted_op(rng, ops), left, right)


def _variable_slots(tree: IDSTree, prefix=()) -> list[tuple]:
    if isinstance(tree, Leaf):
        return [prefix]
    return (_variable_slots(tree.left, prefix + ("L",))
            + _variable_slots(tree.right, prefix + ("R",)))


def _with_slot(tree: IDSTree, path, radical: int) -> IDSTree:
    if not path:
        return Leaf(radical)
    if path[0] == "L":
        return Internal(tree.op, _with_slot(tree.left, path[1:], radical), tree.right)
    return Internal(tree.op, tree.left, _with_slot(tree.right, path[1:], radical))


def largest_remainder(fractions, total: int) -> list[int]:
    """Apportion ``total`` into integer counts proportional to ``fractions``."""
    raw = [f * total for f in fractions]
    counts = [int(r) for r in raw]
    short = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: raw[i] - counts[i], reverse=True)
    for i in order[:short]:
        counts[i] += 1
    return counts


def build_language(config: CorpusConfig, rng: np.random.Generator) -> LanguageBundle:
    """Vocabulary, primitives, dictionary (seen + unseen-right) and mutants."""
    config.validate()
    vocab = SymbolVocabulary()
    for i in range(config.n_radicals):
        vocab.add(f"r{i:02d}", "radical")
    for name in STRUCTURE_NAMES:
        vocab.add(name, "structure")
    prims = generate_primitives(config.n_radicals, rng)
    radicals = list(range(config.n_radicals))
    ops = vocab.structure_ids

    dictionary = IDSDictionary()
    trees: list[IDSTree] = []

    def register(tree: IDSTree) -> bool:
        seq = serialize_tree(tree)
        if seq in dictionary:
            return False
        dictionary.add(seq)
        trees.append(tree)
        return True

    # coverage: every radical and every operator appears among seen classes
    for i in range(config.n_radicals // 2):
        op = ops[i % len(ops)]
        register(Internal(op, Leaf(radicals[2 * i]), Leaf(radicals[2 * i + 1])))
    for j in range(config.n_radicals // 2, len(ops)):
        while True:
            a, b = rng.choice(radicals, size=2, replace=False)
            if register(Internal(ops[j], Leaf(int(a)), Leaf(int(b)))):
                break

    if len(dictionary) > config.right_classes:
        raise ValueError(
            f"right_classes={config.right_classes} too small for coverage of "
            f"{config.n_radicals} radicals and {len(ops)} operators")

    # sibling families sharing all slots but one, then random fill
    family_budget = int(config.family_fraction * config.right_classes)
    guard = 0
    while len(dictionary) < config.right_classes:
        guard += 1
        if guard > 100 * config.right_classes:
            raise RuntimeError("dictionary generation stalled")
        remaining = config.right_classes - len(dictionary)
        if family_budget > 0 and remaining >= config.min_family:
            base = _random_tree(rng, vocab, radicals)
            slots = _variable_slots(base)
            slot = slots[int(rng.integers(len(slots)))]
            size = int(rng.integers(config.min_family, config.max_family + 1))
            size = min(size, remaining)
            fills = rng.choice(radicals, size=min(size, len(radicals)), replace=False)
            added = sum(register(_with_slot(base, slot, int(r))) for r in fills)
            family_budget -= added
        else:
            register(_random_tree(rng, vocab, radicals))

    seen_classes = list(range(config.right_classes))
    while len(dictionary) < config.right_classes + config.val_classes:
        register(_random_tree(rng, vocab, radicals))
    val_classes = list(range(config.right_classes, len(dictionary)))

    # misspelled classes: mutate seen classes only
    counts = largest_remainder(config.error_mix, config.misspelled_classes)
    mutants = []
    taken: set = set()
    for error_type, n_classes in zip(("stroke", "radical", "structure"), counts):
        for _ in range(n_classes):
            last_err = None
            for _ in range(50):
                src = int(rng.integers(config.right_classes))
                try:
                    mtree = mutate(trees[src], error_type, dictionary, vocab,
                                   prims, rng, forbidden=taken)
                except MutationExhaustedError as err:
                    last_err = err
                    continue
                tokens = serialize_tree(mtree)
                taken.add(tuple(tokens))
                mutants.append((mtree, tokens, src, error_type))
                break
            else:
                raise MutationExhaustedError(
                    f"cannot derive {n_classes} distinct {error_type} mutants "
                    f"from this dictionary") from last_err
    return LanguageBundle(vocab, prims, dictionary, seen_classes, val_classes, mutants)


def _style_for(config: CorpusConfig, seed: int, index: int) -> GlyphStyle:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1, index]))
    return GlyphStyle(
        rotation=float(rng.uniform(-config.rotation_max, config.rotation_max)),
        shear=float(rng.uniform(-config.shear_max, config.shear_max)),
        scale=float(rng.uniform(config.scale_min, config.scale_max)),
        thickness=float(rng.uniform(config.thickness_min, config.thickness_max)),
        noise_sigma=config.noise_sigma,
        seed=int(rng.integers(2 ** 62)),
    )


_WORKER_STATE: dict = {}


def _worker_init(vocab_lines, prim_programs, image_size):
    vocab = SymbolVocabulary()
    for name, kind in vocab_lines:
        vocab.add(name, kind)
    prims = PrimitiveSet()
    prims.programs = {int(k): v for k, v in prim_programs}
    _WORKER_STATE.update(vocab=vocab, prims=prims, image_size=image_size)


def _render_job(args) -> None:
    tokens, style, path = args
    tree = parse_ids(list(tokens), _WORKER_STATE["vocab"])
    img = render(tree, style, _WORKER_STATE["prims"], _WORKER_STATE["vocab"],
                 _WORKER_STATE["image_size"])
    write_pgm(path, img)


def generate_corpus(config: CorpusConfig, out_dir: str | Path, seed: int,
                    threads: int = 1) -> list[Record]:
    """Render the full corpus into ``out_dir`` and return the manifest records."""
    config.validate()
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    lang = build_language(config, np.random.default_rng(np.random.SeedSequence([seed, 0])))

    records: list[Record] = []
    jobs = []

    def plan(tree: IDSTree, label, ideal, error_type, split) -> None:
        index = len(records)
        sid = f"s{index:06d}"
        rel = f"images/{sid}.pgm"
        tokens = serialize_tree(tree)
        records.append(Record(id=sid, path=rel, label=label,
                              ids=lang.vocab.names(tokens), ideal=ideal,
                              error_type=error_type, split=split))
        jobs.append((tuple(tokens), _style_for(config, seed, index), str(out_dir / rel)))

    class_trees = [parse_ids(lang.dictionary.sequence_of(c), lang.vocab)
                   for c in lang.dictionary.classes()]
    for cls in lang.seen_classes:
        for _ in range(config.train_per_class):
            plan(class_trees[cls], cls, None, "none", "train")
    for cls in lang.seen_classes:
        for _ in range(config.test_right_per_class):
            plan(class_trees[cls], cls, None, "none", "test")
    for mtree, _tokens, ideal, error_type in lang.mutants:
        for _ in range(config.misspelled_per_class):
            plan(mtree, "MISSPELLED", ideal, error_type, "test")
    for cls in lang.val_classes:
        for _ in range(config.val_per_class):
            plan(class_trees[cls], cls, None, "none", "val")

    vocab_lines = [(lang.vocab.name_of(i), lang.vocab.kind_of(i)) for i in range(len(lang.vocab))]
    prim_programs = sorted(lang.prims.programs.items())
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads, initializer=_worker_init,
                                 initargs=(vocab_lines, prim_programs, config.image_size)) as pool:
            list(pool.map(_render_job, jobs, chunksize=64))
    else:
        _worker_init(vocab_lines, prim_programs, config.image_size)
        for job in jobs:
            _render_job(job)

    lang.vocab.save(out_dir / "vocab.tsv")
    lang.dictionary.save(out_dir / "dict.tsv", lang.vocab)
    with open(out_dir / "manifest.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    echo = {"seed": seed, "corpus": asdict(config)}
    echo["corpus"]["error_mix"] = list(config.error_mix)
    (out_dir / "config.json").write_text(
        json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return records


@dataclass
class CorpusBundle:
    root: Path
    vocab: SymbolVocabulary
    dictionary: IDSDictionary
    records: list[Record]
    config: dict

    def split(self, name: str) -> list[Record]:
        return [r for r in self.records if r.split == name]

    def tokens_of(self, record: Record) -> list[int]:
        return self.vocab.ids(record.ids)


def load_corpus(root: str | Path) -> CorpusBundle:
    root = Path(root)
    try:
        vocab = SymbolVocabulary.load(root / "vocab.tsv")
        dictionary = IDSDictionary.load(root / "dict.tsv", vocab)
        records = [Record.from_json(line)
                   for line in (root / "manifest.jsonl").read_text(encoding="utf-8").splitlines()
                   if line.strip()]
        config = json.loads((root / "config.json").read_text(encoding="utf-8"))
    except FileNotFoundError as err:
        raise FileNotFoundError(f"{root} is not a corpus directory: {err}") from None
    return CorpusBundle(root, vocab, dictionary, records, config)


def load_images(bundle: CorpusBundle, records: list[Record]) -> np.ndarray:
    """Stack the records' images into a uint8 (n, H, W) array."""
    from .render import read_pgm
    size = bundle.config["corpus"]["image_size"]
    out = np.empty((len(records), size, size), dtype=np.uint8)
    for i, rec in enumerate(records):
        img = read_pgm(bundle.root / rec.path)
        out[i] = np.rint(img * 255.0).astype(np.uint8)
    return out
