"""Procedural stroke programs for radicals.

Every radical is a small set of line/arc segments in a unit box, drawn from a
shared lattice pool so that radicals overlap visually.  Radicals come in
confusable pairs (the partner differs in exactly one swapped segment), and
each base radical owns one or two sibling variants that differ by exactly one
added or removed segment.  Variants stand in for stroke-level slips: they are
never part of the dictionary vocabulary until a mutation registers them.
"""

from __future__ import annotations

import numpy as np

from .grammar import RADICAL, SymbolVocabulary

Segment = tuple  # ("line", x0, y0, x1, y1) or ("arc", x0, y0, cx, cy, x1, y1)

LO, MID, HI = 0.12, 0.5, 0.88


def segment_pool() -> list[Segment]:
    pool: list[Segment] = []
    for y in (LO, MID, HI):
        pool.append(("line", LO, y, HI, y))
        pool.append(("line", LO, y, MID, y))
        pool.append(("line", MID, y, HI, y))
    for x in (LO, MID, HI):
        pool.append(("line", x, LO, x, HI))
        pool.append(("line", x, LO, x, MID))
        pool.append(("line", x, MID, x, HI))
    pool.append(("line", LO, LO, HI, HI))
    pool.append(("line", HI, LO, LO, HI))
    for cx, cy in ((LO, LO), (HI, LO), (LO, HI), (HI, HI)):
        pool.append(("line", cx, cy, MID, MID))
    pool.append(("arc", LO, LO, HI, MID, LO, HI))      # right-bulging bow
    pool.append(("arc", HI, LO, LO, MID, HI, HI))      # left-bulging bow
    pool.append(("arc", LO, LO, MID, HI, HI, LO))      # downward bow
    pool.append(("arc", LO, HI, MID, LO, HI, HI))      # upward bow
    return pool


class PrimitiveSet:
    """Stroke programs per symbol id, with partner and variant bookkeeping."""

    def __init__(self) -> None:
        self.programs: dict[int, frozenset] = {}
        self.partner: dict[int, int] = {}
        self.variant_programs: dict[int, list[frozenset]] = {}
        self.variant_ids: dict[int, list[int]] = {}
        self.base_of: dict[int, int] = {}

    def program_of(self, sid: int) -> frozenset:
        return self.programs[sid]

    def partner_of(self, sid: int) -> int | None:
        return self.partner.get(sid)

    def is_variant(self, sid: int) -> bool:
        return sid in self.base_of

    def ensure_variant_symbol(self, vocab: SymbolVocabulary, base: int,
                              rng: np.random.Generator) -> int:
        """Pick one of the base's variant programs, registering its symbol lazily.

        Registered variants become new radical symbols in the vocabulary; the
        same program is never registered twice.
        """
        progs = self.variant_programs.get(base)
        if not progs:
            raise ValueError(f"radical {base} has no stroke variants")
        pick = int(rng.integers(len(progs)))
        ids = self.variant_ids.setdefault(base, [None] * len(progs))
        if ids[pick] is None:
            name = f"{vocab.name_of(base)}v{pick}"
            sid = vocab.add(name, RADICAL)
            ids[pick] = sid
            self.programs[sid] = progs[pick]
            self.base_of[sid] = base
        return ids[pick]


def _sample_program(rng: np.random.Generator, pool: list[Segment], n_segments: int,
                    taken: set[frozenset]) -> frozenset:
    for _ in range(200):
        idx = rng.choice(len(pool), size=n_segments, replace=False)
        prog = frozenset(pool[i] for i in idx)
        if prog not in taken:
            return prog
    raise RuntimeError("segment pool exhausted while sampling radicals")


def _swap_one(rng: np.random.Generator, pool: list[Segment], prog: frozenset,
              taken: set[frozenset]) -> frozenset:
    segs = sorted(prog)
    unused = [s for s in pool if s not in prog]
    for _ in range(200):
        drop = segs[int(rng.integers(len(segs)))]
        gain = unused[int(rng.integers(len(unused)))]
        cand = frozenset(s for s in prog if s != drop) | {gain}
        if cand not in taken:
            return cand
    raise RuntimeError("segment pool exhausted while pairing radicals")


def generate_primitives(n_radicals: int, rng: np.random.Generator,
                        segments_per_radical: int = 4) -> PrimitiveSet:
    """Build the programs for ``n_radicals`` base radicals plus their variants.

    Odd-indexed radicals are the confusable partners of their predecessors.
    Each base gets two variants (one segment removed, one added), all distinct
    from every base program and from each other.
    """
    pool = segment_pool()
    prims = PrimitiveSet()
    taken: set[frozenset] = set()
    for sid in range(n_radicals):
        if sid % 2 == 1:
            prog = _swap_one(rng, pool, prims.programs[sid - 1], taken)
            prims.partner[sid] = sid - 1
            prims.partner[sid - 1] = sid
        else:
            prog = _sample_program(rng, pool, segments_per_radical, taken)
        prims.programs[sid] = prog
        taken.add(prog)

    for sid in range(n_radicals):
        base = prims.programs[sid]
        variants: list[frozenset] = []
        segs = sorted(base)
        drop_order = rng.permutation(len(segs))
        for di in drop_order:
            cand = frozenset(s for i, s in enumerate(segs) if i != di)
            if cand not in taken:
                variants.append(cand)
                taken.add(cand)
                break
        unused = [s for s in pool if s not in base]
        add_order = rng.permutation(len(unused))
        for ai in add_order:
            cand = base | {unused[ai]}
            if cand not in taken:
                variants.append(cand)
                taken.add(cand)
                break
        if not variants:
            raise RuntimeError(f"no distinct variant available for radical {sid}")
        prims.variant_programs[sid] = variants
    return prims
