import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glyphfix.grammar import (
    IDSDictionary,
    Internal,
    Leaf,
    MalformedSequenceError,
    SymbolVocabulary,
    derive_count_vector,
    derive_existence,
    parse_ids,
    serialize_tree,
    tree_depth,
    tree_leaves,
    validate,
)


def toy_vocab(n_radicals=4, n_structures=2) -> SymbolVocabulary:
    vocab = SymbolVocabulary()
    for i in range(n_radicals):
        vocab.add(f"r{i:02d}", "radical")
    for i in range(n_structures):
        vocab.add(f"s{i}", "structure")
    return vocab


VOCAB = toy_vocab()
R0, R1, R2, R3, S0, S1 = range(6)


def random_tree(draw, max_depth=3):
    if max_depth == 0 or draw(st.booleans()):
        return Leaf(draw(st.integers(0, 3)))
    op = draw(st.integers(4, 5))
    return Internal(op, random_tree(draw, max_depth - 1), random_tree(draw, max_depth - 1))


tree_strategy = st.composite(lambda draw: random_tree(draw))()


class TestParse:
    def test_single_radical(self):
        assert parse_ids([R0], VOCAB) == Leaf(R0)

    def test_binary_prefix(self):
        assert parse_ids([S0, R0, R1], VOCAB) == Internal(S0, Leaf(R0), Leaf(R1))

    def test_missing_operand(self):
        with pytest.raises(MalformedSequenceError):
            parse_ids([S0, R0], VOCAB)

    def test_empty(self):
        with pytest.raises(MalformedSequenceError):
            parse_ids([], VOCAB)

    def test_trailing_tokens(self):
        with pytest.raises(MalformedSequenceError):
            parse_ids([S0, R0, R1, R2], VOCAB)

    def test_out_of_range_id(self):
        with pytest.raises(MalformedSequenceError):
            parse_ids([99], VOCAB)


class TestSerialize:
    def test_leaf(self):
        assert serialize_tree(Leaf(R0)) == [R0]

    def test_depth_first_order(self):
        tree = Internal(S1, Leaf(R0), Internal(S0, Leaf(R1), Leaf(R2)))
        assert serialize_tree(tree) == [S1, R0, S0, R1, R2]

    @given(tree_strategy)
    @settings(max_examples=200)
    def test_round_trip_tree(self, tree):
        assert parse_ids(serialize_tree(tree), VOCAB) == tree

    @given(tree_strategy)
    @settings(max_examples=200)
    def test_round_trip_sequence(self, tree):
        seq = serialize_tree(tree)
        assert serialize_tree(parse_ids(seq, VOCAB)) == seq

    def test_helpers(self):
        tree = Internal(S1, Leaf(R0), Internal(S0, Leaf(R1), Leaf(R2)))
        assert tree_leaves(tree) == [R0, R1, R2]
        assert tree_depth(tree) == 2


class TestDictionary:
    def make_dict(self):
        d = IDSDictionary()
        d.add([S0, R0, R1])
        d.add([R2])
        return d

    def test_lookup_right(self):
        d = self.make_dict()
        assert validate([S0, R0, R1], d, VOCAB) == 0
        assert validate([R2], d, VOCAB) == 1

    def test_substituted_radical_is_candidate(self):
        d = self.make_dict()
        assert validate([S0, R3, R1], d, VOCAB) is None

    def test_empty_dictionary(self):
        assert validate([R0], IDSDictionary(), VOCAB) is None

    def test_unparseable_raises(self):
        d = self.make_dict()
        with pytest.raises(MalformedSequenceError):
            validate([S0, R0], d, VOCAB)

    def test_duplicate_rejected(self):
        d = self.make_dict()
        with pytest.raises(ValueError):
            d.add([S0, R0, R1])

    def test_save_load_round_trip(self, tmp_path):
        d = self.make_dict()
        d.save(tmp_path / "dict.tsv", VOCAB)
        back = IDSDictionary.load(tmp_path / "dict.tsv", VOCAB)
        assert len(back) == len(d)
        for cls in d.classes():
            assert back.sequence_of(cls) == d.sequence_of(cls)


class TestCounts:
    def test_multiset_count(self):
        counts = derive_count_vector([S0, R0, R0], VOCAB)
        expected = np.zeros(6, dtype=np.int64)
        expected[S0] = 1
        expected[R0] = 2
        assert (counts == expected).all()

    @given(tree_strategy)
    @settings(max_examples=200)
    def test_counts_equal_onehot_sum(self, tree):
        seq = serialize_tree(tree)
        onehots = np.zeros((len(seq), len(VOCAB)), dtype=np.int64)
        onehots[np.arange(len(seq)), seq] = 1
        assert (derive_count_vector(seq, VOCAB) == onehots.sum(axis=0)).all()

    def test_existence_one_hot(self):
        ex = derive_existence(derive_count_vector([R0], VOCAB))
        assert ex.tolist() == [1, 0, 0, 0, 0, 0]


class TestVocabulary:
    def test_unique_names(self):
        vocab = toy_vocab()
        with pytest.raises(ValueError):
            vocab.add("r00", "radical")

    def test_standard_check(self):
        vocab = toy_vocab(n_radicals=3, n_structures=10)
        vocab.check_standard()
        with pytest.raises(ValueError):
            toy_vocab().check_standard()

    def test_save_load(self, tmp_path):
        vocab = toy_vocab()
        vocab.save(tmp_path / "vocab.tsv")
        back = SymbolVocabulary.load(tmp_path / "vocab.tsv")
        assert len(back) == len(vocab)
        assert back.name_of(4) == "s0"
        assert back.kind_of(4) == "structure"
        assert back.radical_ids == [0, 1, 2, 3]
