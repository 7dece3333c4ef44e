"""Synthesis of misspelled variants from well-formed description trees."""

from __future__ import annotations

import numpy as np

from .grammar import IDSDictionary, IDSTree, Internal, Leaf, SymbolVocabulary, serialize_tree
from .primitives import PrimitiveSet

ERROR_TYPES = ("stroke", "radical", "structure")

MAX_ATTEMPTS = 100


class MutationExhaustedError(RuntimeError):
    """No dictionary-free mutant found within the attempt budget."""


def _paths(tree: IDSTree, prefix=()) -> list[tuple]:
    out = [prefix]
    if isinstance(tree, Internal):
        out += _paths(tree.left, prefix + ("L",))
        out += _paths(tree.right, prefix + ("R",))
    return out


def _get(tree: IDSTree, path) -> IDSTree:
    for step in path:
        tree = tree.left if step == "L" else tree.right
    return tree


def _replace(tree: IDSTree, path, new: IDSTree) -> IDSTree:
    if not path:
        return new
    if path[0] == "L":
        return Internal(tree.op, _replace(tree.left, path[1:], new), tree.right)
    return Internal(tree.op, tree.left, _replace(tree.right, path[1:], new))


def _leaf_paths(tree: IDSTree):
    return [p for p in _paths(tree) if isinstance(_get(tree, p), Leaf)]


def _internal_paths(tree: IDSTree):
    return [p for p in _paths(tree) if isinstance(_get(tree, p), Internal)]


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(len(items)))]


def _mutate_stroke(tree, vocab, prims, rng):
    path = _pick(rng, _leaf_paths(tree))
    leaf = _get(tree, path)
    base = prims.base_of.get(leaf.radical, leaf.radical)
    variant = prims.ensure_variant_symbol(vocab, base, rng)
    if variant == leaf.radical:
        return None
    return _replace(tree, path, Leaf(variant))


def _mutate_radical(tree, vocab, prims, rng, base_radicals):
    kind = rng.random()
    if kind < 0.7:  # substitute, preferring the confusable partner
        path = _pick(rng, _leaf_paths(tree))
        leaf = _get(tree, path)
        partner = prims.partner_of(leaf.radical)
        if partner is not None and rng.random() < 0.5:
            new = partner
        else:
            choices = [r for r in base_radicals if r != leaf.radical]
            new = _pick(rng, choices)
        if new == leaf.radical:
            return None
        return _replace(tree, path, Leaf(new))
    if kind < 0.85:  # insert a radical under a fresh structure node
        path = _pick(rng, _leaf_paths(tree))
        leaf = _get(tree, path)
        op = _pick(rng, vocab.structure_ids)
        extra = Leaf(_pick(rng, base_radicals))
        node = Internal(op, leaf, extra) if rng.random() < 0.5 else Internal(op, extra, leaf)
        return _replace(tree, path, node)
    # delete one radical: collapse an internal node onto its other child
    candidates = []
    for path in _internal_paths(tree):
        node = _get(tree, path)
        if isinstance(node.left, Leaf):
            candidates.append((path, node.right))
        if isinstance(node.right, Leaf):
            candidates.append((path, node.left))
    if not candidates:
        return None
    path, keep = _pick(rng, candidates)
    return _replace(tree, path, keep)


def _mutate_structure(tree, vocab, rng):
    internals = _internal_paths(tree)
    if not internals:
        return None
    path = _pick(rng, internals)
    node = _get(tree, path)
    if rng.random() < 0.5:
        ops = [o for o in vocab.structure_ids if o != node.op]
        new = Internal(_pick(rng, ops), node.left, node.right)
    else:
        new = Internal(node.op, node.right, node.left)
    return _replace(tree, path, new)


def mutate(tree: IDSTree, error_type: str, dictionary: IDSDictionary,
           vocab: SymbolVocabulary, prims: PrimitiveSet,
           rng: np.random.Generator, forbidden=()) -> IDSTree:
    """Produce a misspelled tree of the requested error type.

    Rejection-samples until the mutant's serialization is outside the
    dictionary (and outside ``forbidden``, used to keep mutant classes
    distinct); raises :class:`MutationExhaustedError` after 100 attempts.
    The ideal class of the result is the source tree's class.
    """
    if error_type not in ERROR_TYPES:
        raise ValueError(f"unknown error type {error_type!r}")
    base_radicals = [r for r in vocab.radical_ids if not prims.is_variant(r)]
    original = tuple(serialize_tree(tree))
    forbidden = set(map(tuple, forbidden))
    for _ in range(MAX_ATTEMPTS):
        if error_type == "stroke":
            cand = _mutate_stroke(tree, vocab, prims, rng)
        elif error_type == "radical":
            cand = _mutate_radical(tree, vocab, prims, rng, base_radicals)
        else:
            cand = _mutate_structure(tree, vocab, rng)
        if cand is None:
            continue
        seq = tuple(serialize_tree(cand))
        if seq != original and seq not in dictionary and seq not in forbidden:
            return cand
    raise MutationExhaustedError(
        f"no fresh {error_type} mutant after {MAX_ATTEMPTS} attempts")
