import numpy as np
import pytest

from services.decode_service.src.drafter import DraftTree, Origin, tree_mask
from services.decode_service.src.exceptions import (
    InvalidSequence,
    ModelSpecError,
    NonNormalized,
    UntrainedModel,
)
from services.decode_service.src.models import NGramLM, TableModel, greedy_decode, ngram_prob
from services.decode_service.src.schemas import Distribution, TokenSeq

A, B = 0, 1


def test_bigram_add_one_example():
    lm = NGramLM(order=2, vocab_size=2, k=1.0, eos_token_id=None).train([A, B, A, B, A])
    assert lm.count([A]) == 2
    assert ngram_prob(lm, [A], B) == pytest.approx(0.75)
    d = lm.next_distribution([B, A])
    assert d.probs.tolist() == pytest.approx([0.25, 0.75])
    assert float(d.probs.sum()) == pytest.approx(1.0, abs=1e-12)


def test_unseen_context_is_uniform():
    lm = NGramLM(order=2, vocab_size=4, k=1.0).train([0, 1, 0, 1])
    assert ngram_prob(lm, [3], 2) == pytest.approx(0.25)
    assert lm.next_distribution([3]) == Distribution.uniform(4)


def test_zero_k_is_maximum_likelihood():
    lm = NGramLM(order=2, vocab_size=3, k=0.0).train([0, 1, 0, 2, 0, 1])
    assert ngram_prob(lm, [0], 1) == pytest.approx(2 / 3)
    assert ngram_prob(lm, [0], 0) == 0.0


def test_short_context_backs_off_to_lower_order():
    lm = NGramLM(order=3, vocab_size=3, k=0.0).train([0, 1, 2, 0, 1, 1])
    # unigram totals at the sequence start
    assert lm.next_distribution([]).probs.tolist() == pytest.approx([2 / 6, 3 / 6, 1 / 6])
    assert ngram_prob(lm, [0], 1) == pytest.approx(1.0)
    assert ngram_prob(lm, [0, 1], 2) == pytest.approx(0.5)


def test_untrained_model_raises():
    with pytest.raises(UntrainedModel):
        NGramLM(order=2, vocab_size=3).next_distribution([0])


def test_training_rejects_out_of_vocab():
    with pytest.raises(InvalidSequence):
        NGramLM(order=2, vocab_size=3).train([0, 5])


def test_table_model_rows_are_validated():
    with pytest.raises(NonNormalized):
        TableModel(2, 1, {(0,): Distribution.full([0.7, 0.4])})
    with pytest.raises(ModelSpecError):
        TableModel(2, 1, {(0, 1): Distribution.full([0.5, 0.5])})
    with pytest.raises(ModelSpecError):
        TableModel(3, 1, {(0,): Distribution.full([0.5, 0.5])})


def test_table_model_spec_round_trip():
    model = TableModel(3, 1, {(0,): Distribution.full([0.2, 0.3, 0.5])}, eos_token_id=1)
    back = TableModel.from_spec(model.to_spec())
    assert back.eos_token_id == 1
    assert back.next_distribution([2, 0]) == model.next_distribution([0])
    assert back.next_distribution([1]) == Distribution.uniform(3)
    with pytest.raises(ModelSpecError):
        TableModel.from_spec({"rows": []})


def test_greedy_constant_model(constant_model):
    out = greedy_decode(constant_model, TokenSeq.from_prompt([1, 2]), 4, eos_token_id=None)
    assert out.generated == (7, 7, 7, 7)


def test_greedy_zero_budget(constant_model):
    s = TokenSeq.from_prompt([1, 2])
    assert greedy_decode(constant_model, s, 0) == s


def test_greedy_stops_at_eos():
    model = TableModel(4, 0, {(): Distribution.one_hot(3, 4)})
    out = greedy_decode(model, TokenSeq.from_prompt([0]), 10)
    assert out.generated == (3,)


def test_greedy_follows_hand_trace_on_repetitive_corpus():
    lm = NGramLM(order=2, vocab_size=5, k=0.5).train([0, 1, 2, 3] * 10)
    out = greedy_decode(lm, TokenSeq.from_prompt([2]), 6)
    assert out.generated == (3, 0, 1, 2, 3, 0)


def test_forward_tree_chain_matches_prefill():
    rng = np.random.default_rng(5)
    lm = NGramLM(order=3, vocab_size=6, k=0.2).train(rng.integers(0, 6, size=300).tolist())
    prefix = [1, 2, 3]
    chain = [4, 0, 5, 1]
    tree = DraftTree.rooted(prefix[-1])
    parent = 0
    for t in chain:
        parent = tree.add(parent, t, Origin.INPUT_CONTEXT)
    dists = lm.forward_tree(prefix, tree.tokens, tree_mask(tree))
    expected = lm.prefill(prefix + chain)[len(prefix) - 1:]
    assert all(a == b for a, b in zip(dists, expected))
    assert len(dists) == len(expected)


def test_forward_tree_isolates_siblings():
    rng = np.random.default_rng(6)
    lm = NGramLM(order=3, vocab_size=6, k=0.2).train(rng.integers(0, 6, size=300).tolist())
    prefix = [0, 1]

    def build(order):
        tree = DraftTree.rooted(1)
        ids = {}
        for branch in order:
            parent = 0
            for t in branch:
                parent = tree.add(parent, t, Origin.INPUT_CONTEXT)
            ids[branch] = parent
        return tree, ids

    branches = [(2, 3), (4, 5), (3,)]
    t1, ids1 = build(branches)
    t2, ids2 = build(branches[::-1])
    d1 = lm.forward_tree(prefix, t1.tokens, tree_mask(t1))
    d2 = lm.forward_tree(prefix, t2.tokens, tree_mask(t2))
    for branch in branches:
        assert d1[ids1[branch]] == d2[ids2[branch]]


def test_forward_tree_requires_root_is_last_token():
    model = TableModel(3, 1, {})
    tree = DraftTree.rooted(2)
    with pytest.raises(InvalidSequence):
        model.forward_tree([0, 1], tree.tokens, tree_mask(tree))
