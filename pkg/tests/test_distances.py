import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glyphfix.distances import baseline_candidates, edit_distance, prob_embedding_score
from glyphfix.grammar import IDSDictionary, Internal, Leaf, serialize_tree

from .test_grammar import VOCAB, R0, R1, R2, R3, S0, S1

seq_strategy = st.lists(st.integers(0, 5), min_size=0, max_size=8)


class TestEditDistance:
    def test_identical(self):
        assert edit_distance([S0, R0, R1], [S0, R0, R1]) == 0

    def test_one_substitution(self):
        assert edit_distance([S0, R0, R1], [S0, R2, R1]) == 1

    def test_length_mismatch(self):
        # independent dynamic-programming oracle value: align the single 'a',
        # insert the operator and the second radical
        assert edit_distance([R0], [S0, R0, R1]) == 2

    @given(seq_strategy, seq_strategy)
    @settings(max_examples=200)
    def test_symmetry_and_identity(self, a, b):
        assert edit_distance(a, b) == edit_distance(b, a)
        assert (edit_distance(a, b) == 0) == (a == b)

    @given(seq_strategy, seq_strategy, seq_strategy)
    @settings(max_examples=200)
    def test_triangle_inequality(self, a, b, c):
        assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


class TestProbEmbedding:
    def test_identical_trees(self):
        tree = Internal(S0, Leaf(R0), Leaf(R1))
        assert prob_embedding_score(tree, tree, 0.5) == 0.0

    def test_root_level_leaf_difference(self):
        a = Internal(S0, Leaf(R0), Leaf(R1))
        b = Internal(S0, Leaf(R0), Leaf(R2))
        # the differing leaf sits at depth 1, so cost = 0.5**1
        assert prob_embedding_score(a, b, 0.5) == pytest.approx(0.5)

    def test_deeper_difference_scores_lower(self):
        shallow_a = Internal(S0, Leaf(R0), Internal(S1, Leaf(R1), Leaf(R2)))
        shallow_b = Internal(S0, Leaf(R3), Internal(S1, Leaf(R1), Leaf(R2)))
        deep_b = Internal(S0, Leaf(R0), Internal(S1, Leaf(R1), Leaf(R3)))
        d_shallow = prob_embedding_score(shallow_a, shallow_b, 0.5)
        d_deep = prob_embedding_score(shallow_a, deep_b, 0.5)
        assert d_deep < d_shallow

    def test_symmetry_leaf_vs_internal(self):
        a = Leaf(R0)
        b = Internal(S0, Leaf(R0), Leaf(R1))
        assert prob_embedding_score(a, b) == prob_embedding_score(b, a)
        # node substitution at depth 0 plus two inserted leaves at depth 1
        assert prob_embedding_score(a, b, 0.5) == pytest.approx(1.0 + 0.5 + 0.5)

    def test_gamma_bounds(self):
        with pytest.raises(ValueError):
            prob_embedding_score(Leaf(R0), Leaf(R0), gamma=1.0)


def family_dictionary():
    d = IDSDictionary()
    # classes 0..3: [s0, r_i, r1]; class 4: [r2]
    for rad in (R0, R1, R2, R3):
        d.add([S0, rad, R1])
    d.add([R2])
    return d


class TestBaselineCandidates:
    def test_exact_match_first(self):
        d = family_dictionary()
        top = baseline_candidates([S0, R2, R1], d, VOCAB, k=3, method="edit")
        assert top[0] == (2, 0.0)

    def test_single_substitution_top1_by_scan(self):
        d = IDSDictionary()
        d.add([S0, R0, R1])
        d.add([S1, R2, R3])
        mutant = [S0, R0, R2]
        # exhaustive oracle over the dictionary
        dists = [(edit_distance(mutant, d.sequence_of(c)), c) for c in d.classes()]
        oracle = min(dists)[1]
        top = baseline_candidates(mutant, d, VOCAB, k=1, method="edit")
        assert top[0][0] == oracle == 0

    def test_full_ranking_is_permutation(self):
        d = family_dictionary()
        top = baseline_candidates([S0, R0, R1], d, VOCAB, k=len(d), method="edit")
        assert sorted(cls for cls, _ in top) == list(range(len(d)))

    def test_k_truncated_to_m(self):
        d = family_dictionary()
        top = baseline_candidates([R2], d, VOCAB, k=100, method="edit")
        assert len(top) == len(d)

    def test_tie_break_ascending_class(self):
        d = family_dictionary()
        # classes 1, 2, 3 are all one substitution away; ties resolve by id
        top = baseline_candidates([S0, R0, R1], d, VOCAB, k=3, method="edit")
        assert [cls for cls, _ in top] == [0, 1, 2]

    def test_deterministic(self):
        d = family_dictionary()
        for method in ("edit", "prob_embed"):
            runs = [baseline_candidates([S0, R0, R2], d, VOCAB, k=3, method=method)
                    for _ in range(3)]
            assert runs[0] == runs[1] == runs[2]

    def test_prob_embed_prefers_shallow_match(self):
        d = IDSDictionary()
        deep = Internal(S0, Leaf(R0), Internal(S1, Leaf(R1), Leaf(R2)))
        d.add(serialize_tree(deep))
        shallow_variant = Internal(S0, Leaf(R3), Internal(S1, Leaf(R1), Leaf(R2)))
        deep_variant = Internal(S0, Leaf(R0), Internal(S1, Leaf(R1), Leaf(R3)))
        d.add(serialize_tree(shallow_variant))
        d.add(serialize_tree(deep_variant))
        top = baseline_candidates(serialize_tree(deep), d, VOCAB, k=3, method="prob_embed")
        assert top[0][0] == 0
        # the deep variant is a closer neighbour than the shallow one
        assert [cls for cls, _ in top] == [0, 2, 1]

    def test_prob_embed_falls_back_on_unparseable(self):
        d = family_dictionary()
        got = baseline_candidates([S0, R0], d, VOCAB, k=2, method="prob_embed")
        want = baseline_candidates([S0, R0], d, VOCAB, k=2, method="edit")
        assert got == want

    def test_bad_args(self):
        d = family_dictionary()
        with pytest.raises(ValueError):
            baseline_candidates([R0], d, VOCAB, k=0)
        with pytest.raises(ValueError):
            baseline_candidates([R0], d, VOCAB, k=1, method="nope")
