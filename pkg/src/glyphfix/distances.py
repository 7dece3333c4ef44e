"""Sequence and tree distances used by the dictionary-matching baselines."""

from __future__ import annotations

from .grammar import (
    IDSDictionary,
    IDSTree,
    Internal,
    Leaf,
    MalformedSequenceError,
    SymbolVocabulary,
    parse_ids,
)


def edit_distance(seq_a, seq_b) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    a, b = list(seq_a), list(seq_b)
    if len(a) > len(b):
        a, b = b, a
    prev = list(range(len(a) + 1))
    for i, tb in enumerate(b, start=1):
        cur = [i] + [0] * len(a)
        for j, ta in enumerate(a, start=1):
            sub = prev[j - 1] + (ta != tb)
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, sub)
        prev = cur
    return prev[len(a)]


def _subtree_weight(tree: IDSTree, depth: int, gamma: float) -> float:
    w = gamma ** depth
    if isinstance(tree, Internal):
        w += _subtree_weight(tree.left, depth + 1, gamma)
        w += _subtree_weight(tree.right, depth + 1, gamma)
    return w


def prob_embedding_score(tree_a: IDSTree, tree_b: IDSTree, gamma: float = 0.5) -> float:
    """Depth-discounted tree edit distance; lower means more similar.

    Editing a node at depth d costs gamma**d (root depth 0), so differences
    deep in the composition matter less than differences near the root.
    Replacing a leaf by a whole subtree pays the node substitution plus the
    full weight of the inserted children.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie strictly between 0 and 1")

    def dist(a: IDSTree, b: IDSTree, depth: int) -> float:
        if isinstance(a, Leaf) and isinstance(b, Leaf):
            return 0.0 if a.radical == b.radical else gamma ** depth
        if isinstance(a, Internal) and isinstance(b, Internal):
            cost = 0.0 if a.op == b.op else gamma ** depth
            return cost + dist(a.left, b.left, depth + 1) + dist(a.right, b.right, depth + 1)
        # leaf vs internal: substitute the node, insert the internal's children
        internal = a if isinstance(a, Internal) else b
        return (gamma ** depth
                + _subtree_weight(internal.left, depth + 1, gamma)
                + _subtree_weight(internal.right, depth + 1, gamma))

    return dist(tree_a, tree_b, 0)


def baseline_candidates(tokens, dictionary: IDSDictionary, vocab: SymbolVocabulary,
                        k: int, method: str = "edit",
                        gamma: float = 0.5) -> list[tuple[int, float]]:
    """Rank dictionary classes by distance to a decomposed sequence.

    Returns the k (class, distance) pairs with the smallest distance, ties
    broken by ascending class id; k larger than the dictionary is truncated.
    ``prob_embed`` scores parsed trees and falls back to plain edit distance
    when the query sequence does not parse.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if method not in ("edit", "prob_embed"):
        raise ValueError(f"unknown method {method!r}")
    tokens = list(tokens)
    query_tree = None
    if method == "prob_embed":
        try:
            query_tree = parse_ids(tokens, vocab)
        except MalformedSequenceError:
            query_tree = None

    scored: list[tuple[float, int]] = []
    for cls in dictionary.classes():
        ref = dictionary.sequence_of(cls)
        if query_tree is not None:
            score = prob_embedding_score(query_tree, parse_ids(ref, vocab), gamma)
        else:
            score = float(edit_distance(tokens, ref))
        scored.append((score, cls))
    scored.sort()
    return [(cls, score) for score, cls in scored[: min(k, len(dictionary))]]
