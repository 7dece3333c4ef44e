"""Symbol vocabulary and the prefix grammar for composite-glyph descriptions.

A composite character is described by a binary tree whose internal nodes are
one of ten layout operators and whose leaves are radicals.  The flat token
form is the depth-first prefix serialization of that tree.  A dictionary maps
the token form of every known-good character to a dense class id; any
sequence absent from the dictionary is a misspelling candidate.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

RADICAL = "radical"
STRUCTURE = "structure"

#: The ten binary layout operators, in canonical order.
STRUCTURE_NAMES = (
    "lr",       # left-right
    "ab",       # above-below
    "sur_b",    # surround from below (opening at the top)
    "sur_t",    # surround from above (opening at the bottom)
    "sur_tl",   # surround from top-left
    "sur_tr",   # surround from top-right
    "sur_bl",   # surround from bottom-left
    "sur_full", # full surround
    "sur_l",    # surround from the left (opening at the right)
    "ovl",      # overlaid
)


class MalformedSequenceError(ValueError):
    """Raised when a token sequence is not a valid prefix serialization."""


class SymbolVocabulary:
    """Dense id space of radicals and structure operators.

    Ids are assigned in insertion order and are stable for the lifetime of
    the vocabulary; names must be unique.  A corpus-grade vocabulary carries
    exactly the ten structure operators (checked by :meth:`check_standard`),
    while tests may build smaller toy vocabularies.
    """

    def __init__(self) -> None:
        self._names: list[str] = []
        self._kinds: list[str] = []
        self._by_name: dict[str, int] = {}

    def add(self, name: str, kind: str) -> int:
        if kind not in (RADICAL, STRUCTURE):
            raise ValueError(f"unknown symbol kind {kind!r}")
        if name in self._by_name:
            raise ValueError(f"duplicate symbol name {name!r}")
        sid = len(self._names)
        self._names.append(name)
        self._kinds.append(kind)
        self._by_name[name] = sid
        return sid

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def id_of(self, name: str) -> int:
        return self._by_name[name]

    def name_of(self, sid: int) -> str:
        return self._names[sid]

    def kind_of(self, sid: int) -> str:
        return self._kinds[sid]

    def is_structure(self, sid: int) -> bool:
        return self._kinds[sid] == STRUCTURE

    @property
    def radical_ids(self) -> list[int]:
        return [i for i, k in enumerate(self._kinds) if k == RADICAL]

    @property
    def structure_ids(self) -> list[int]:
        return [i for i, k in enumerate(self._kinds) if k == STRUCTURE]

    def check_standard(self) -> None:
        """Validate the corpus invariants: dense ids and ten operators."""
        n_struct = len(self.structure_ids)
        if n_struct != 10:
            raise ValueError(f"expected 10 structure symbols, found {n_struct}")

    def names(self, token_ids) -> list[str]:
        return [self._names[t] for t in token_ids]

    def ids(self, names) -> list[int]:
        return [self._by_name[n] for n in names]

    def save(self, path: str | Path) -> None:
        lines = [f"{i}\t{n}\t{k}" for i, (n, k) in enumerate(zip(self._names, self._kinds))]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SymbolVocabulary":
        vocab = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            sid, name, kind = line.split("\t")
            if int(sid) != len(vocab):
                raise ValueError(f"non-dense symbol id {sid} in {path}")
            vocab.add(name, kind)
        return vocab


@dataclass(frozen=True)
class Leaf:
    radical: int


@dataclass(frozen=True)
class Internal:
    op: int
    left: "IDSTree"
    right: "IDSTree"


IDSTree = Leaf | Internal


def parse_ids(tokens: list[int], vocab: SymbolVocabulary) -> IDSTree:
    """Parse a prefix token sequence into its unique tree.

    Raises :class:`MalformedSequenceError` when the sequence is empty, uses
    ids outside the vocabulary, truncates an operator's operands, or carries
    trailing tokens.
    """
    if not tokens:
        raise MalformedSequenceError("empty sequence")
    n = len(vocab)

    def take(pos: int) -> tuple[IDSTree, int]:
        if pos >= len(tokens):
            raise MalformedSequenceError("operator missing operands")
        tok = tokens[pos]
        if not 0 <= tok < n:
            raise MalformedSequenceError(f"token id {tok} outside vocabulary")
        if vocab.is_structure(tok):
            left, pos = take(pos + 1)
            right, pos = take(pos)
            return Internal(tok, left, right), pos
        return Leaf(tok), pos + 1

    tree, end = take(0)
    if end != len(tokens):
        raise MalformedSequenceError(f"{len(tokens) - end} trailing tokens")
    return tree


def serialize_tree(tree: IDSTree) -> list[int]:
    """Depth-first prefix serialization; inverse of :func:`parse_ids`."""
    out: list[int] = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            out.append(node.radical)
        else:
            out.append(node.op)
            stack.append(node.right)
            stack.append(node.left)
    return out


def tree_leaves(tree: IDSTree) -> list[int]:
    """Radical ids at the leaves, left to right."""
    if isinstance(tree, Leaf):
        return [tree.radical]
    return tree_leaves(tree.left) + tree_leaves(tree.right)


def tree_depth(tree: IDSTree) -> int:
    if isinstance(tree, Leaf):
        return 0
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


class IDSDictionary:
    """Bijective map between well-formed sequences and character classes."""

    def __init__(self) -> None:
        self._by_seq: dict[tuple[int, ...], int] = {}
        self._by_class: list[tuple[int, ...]] = []

    def add(self, tokens: list[int]) -> int:
        key = tuple(tokens)
        if key in self._by_seq:
            raise ValueError("sequence already registered")
        cls = len(self._by_class)
        self._by_seq[key] = cls
        self._by_class.append(key)
        return cls

    def __len__(self) -> int:
        return len(self._by_class)

    def __contains__(self, tokens) -> bool:
        return tuple(tokens) in self._by_seq

    def lookup(self, tokens) -> int | None:
        return self._by_seq.get(tuple(tokens))

    def sequence_of(self, cls: int) -> list[int]:
        return list(self._by_class[cls])

    def classes(self) -> range:
        return range(len(self._by_class))

    def save(self, path: str | Path, vocab: SymbolVocabulary) -> None:
        lines = []
        for cls, seq in enumerate(self._by_class):
            lines.append(f"{cls}\t" + " ".join(vocab.name_of(t) for t in seq))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, vocab: SymbolVocabulary) -> "IDSDictionary":
        out = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            cid, names = line.split("\t")
            if int(cid) != len(out):
                raise ValueError(f"non-dense class id {cid} in {path}")
            out.add(vocab.ids(names.split(" ")))
        return out


def validate(tokens: list[int], dictionary: IDSDictionary,
             vocab: SymbolVocabulary) -> int | None:
    """Exact dictionary lookup of a well-formed sequence.

    Returns the character class for a known-good sequence and ``None`` for a
    misspelling candidate.  Raises :class:`MalformedSequenceError` when the
    sequence does not parse (the caller decides how to score that; the
    evaluation pipeline counts it as misspelled).
    """
    parse_ids(tokens, vocab)
    return dictionary.lookup(tokens)


def derive_count_vector(tokens: list[int], vocab: SymbolVocabulary) -> np.ndarray:
    """Per-symbol multiplicities of a sequence, as a length-N integer vector."""
    counts = np.zeros(len(vocab), dtype=np.int64)
    for tok in tokens:
        if not 0 <= tok < len(vocab):
            raise MalformedSequenceError(f"token id {tok} outside vocabulary")
        counts[tok] += 1
    return counts


def derive_existence(counts: np.ndarray) -> np.ndarray:
    """Binary presence vector: 1 wherever the count is positive."""
    return (np.asarray(counts) > 0).astype(np.int64)
