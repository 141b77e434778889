import numpy as np

from services.decode_service.src.draft_pool import PoolMatch, build_pool, lookup_longest
from services.decode_service.src.drafter import (
    AlignmentCache,
    Candidate,
    DraftTree,
    Expansion,
    Origin,
    align_expand,
    build_tree,
    collect_candidates,
    draft,
    tree_mask,
)
from services.decode_service.src.schemas import Distribution, TokenSeq, validate_distribution

IS, A, GREAT, WAS, MADE = 10, 11, 12, 13, 14


def cache_with(pos, probs, topk=8):
    cache = AlignmentCache(topk)
    cache.put(pos, Distribution.full(probs))
    return cache


def test_collect_candidates_slices_after_position(seq):
    [cand] = collect_candidates(seq, PoolMatch(1, [2]), 3)
    assert cand.tokens == (7, 5, 6)
    assert cand.source_pos == (2, 3, 4)


def test_collect_candidates_truncates_at_end(seq):
    [cand] = collect_candidates(seq, PoolMatch(1, [4]), 6)
    assert cand.tokens == (6,)


def test_collect_candidates_most_recent_first(seq):
    cands = collect_candidates(seq, PoolMatch(1, [1, 3]), 2)
    assert [c.source_pos[0] for c in cands] == [3, 1]


def test_collect_candidates_without_match(seq):
    assert collect_candidates(seq, None, 6) == []


def test_cache_entries_are_valid_truncations():
    cache = cache_with(3, [0.05, 0.5, 0.2, 0.25], topk=2)
    d = cache.get(3)
    validate_distribution(d)
    assert d.kind == "truncated"
    assert d.support.tolist() == [1, 3]
    assert 3 in cache and 2 not in cache
    assert cache.positions() == [3]


def test_align_expand_rank_three_emits_top_two():
    cache = cache_with(1, [0.1, 0.5, 0.3, 0.1])
    out = align_expand(Candidate((0,), (1,)), cache, 2)
    # token 0 ties token 3 at 0.1 and wins the tie: rank 3
    assert out == [Expansion(0, (1, 2))]


def test_align_expand_rank_one_is_unchanged():
    cache = cache_with(1, [0.1, 0.5, 0.3, 0.1])
    assert align_expand(Candidate((1,), (1,)), cache, 2) == []


def test_align_expand_rank_two_emits_only_top_one():
    cache = cache_with(1, [0.1, 0.5, 0.3, 0.1])
    assert align_expand(Candidate((2,), (1,)), cache, 2) == [Expansion(0, (1,))]


def test_align_expand_absent_token_emits_cap():
    cache = cache_with(1, [0.05, 0.5, 0.3, 0.15], topk=2)
    assert align_expand(Candidate((0,), (1,)), cache, 2) == [Expansion(0, (1, 2))]


def test_align_expand_skips_uncached_positions_and_zero_cap():
    cache = cache_with(1, [0.1, 0.5, 0.3, 0.1])
    cand = Candidate((0, 0), (1, 2))
    assert align_expand(cand, cache, 2) == [Expansion(0, (1, 2))]
    assert align_expand(cand, cache, 0) == []


def test_align_expand_width_follows_every_rank():
    probs = np.array([0.3, 0.25, 0.2, 0.15, 0.1])
    cache = cache_with(1, probs)
    for max_expansion in range(4):
        for token in range(5):
            rank = token + 1
            out = align_expand(Candidate((token,), (1,)), cache, max_expansion)
            width = min(rank - 1, max_expansion)
            if width == 0:
                assert out == []
            else:
                assert out == [Expansion(0, tuple(range(width)))]


def test_single_candidate_chain():
    tree = build_tree(0, [Candidate((1, 2, 3), (1, 2, 3))])
    assert tree.parents == [-1, 0, 1, 2]
    assert tree.depth == 3


def test_candidates_merge_as_trie():
    tree = build_tree(0, [Candidate((1, 2), (1, 2)), Candidate((1, 3), (4, 5))])
    assert tree.tokens == [0, 1, 2, 3]
    assert tree.parents == [-1, 0, 1, 1]
    assert tree.layer_counts() == [1, 2]


def test_expansions_hang_as_leaf_siblings():
    cand = Candidate((IS, A, GREAT), (1, 2, 3))
    tree = build_tree(99, [cand], [[Expansion(0, (WAS, MADE))]])
    root_children = sorted(tree.nodes[i].token for i in tree.children[0].values())
    assert root_children == sorted([IS, WAS, MADE])
    is_id = tree.children[0][IS]
    a_id = tree.children[is_id][A]
    assert tree.nodes[tree.children[a_id][GREAT]].parent == a_id
    sampled = [n for n in tree.nodes if n.origin is Origin.ALIGNMENT_SAMPLED]
    assert {n.token for n in sampled} == {WAS, MADE}
    assert all(not tree.children[i] for i, n in enumerate(tree.nodes) if n.origin is Origin.ALIGNMENT_SAMPLED)

    mask = tree_mask(tree)
    was_id = tree.children[0][WAS]
    made_id = tree.children[0][MADE]
    assert mask[a_id, 0] and mask[a_id, is_id]
    assert not mask[a_id, was_id] and not mask[a_id, made_id]


def test_origin_follows_prompt_boundary():
    tree = build_tree(0, [Candidate((1, 2), (2, 3))], prompt_len=3)
    assert [n.origin for n in tree.nodes[1:]] == [Origin.INPUT_CONTEXT, Origin.GENERATED_CONTEXT]


def test_aligned_flag_uses_cached_argmax():
    cache = AlignmentCache(4)
    cache.put(1, Distribution.full([0.1, 0.7, 0.2]))
    cache.put(2, Distribution.full([0.6, 0.3, 0.1]))
    tree = build_tree(0, [Candidate((1, 2), (1, 2))], prompt_len=5, cache=cache)
    assert [n.aligned for n in tree.nodes[1:]] == [True, False]


def test_mask_two_siblings():
    tree = DraftTree.rooted(0)
    tree.add(0, 1, Origin.INPUT_CONTEXT)
    tree.add(0, 2, Origin.INPUT_CONTEXT)
    assert tree_mask(tree).astype(int).tolist() == [[1, 0, 0], [1, 1, 0], [1, 0, 1]]


def test_mask_chain_is_lower_triangular():
    tree = build_tree(0, [Candidate((1, 2), (1, 2))])
    assert np.array_equal(tree_mask(tree), np.tril(np.ones((3, 3), dtype=bool)))


def random_tree(rng, size):
    tree = DraftTree.rooted(int(rng.integers(0, 6)))
    while len(tree) < size:
        parent = int(rng.integers(0, len(tree)))
        tree.add(parent, int(rng.integers(0, 6)), Origin.INPUT_CONTEXT)
    return tree


def ancestors(tree, i):
    out = {i}
    while tree.nodes[i].parent >= 0:
        i = tree.nodes[i].parent
        out.add(i)
    return out


def test_mask_equals_ancestor_walk():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        tree = random_tree(rng, int(rng.integers(1, 65)))
        mask = tree_mask(tree)
        for i in range(len(tree)):
            assert set(np.flatnonzero(mask[i]).tolist()) == ancestors(tree, i)


def test_draft_from_pool_and_cache():
    s = TokenSeq.from_prompt([5, 6, 7, 5, 6])
    cache = AlignmentCache(8)
    # cache[2] predicts tokens[2] == 7; make 7 rank 3
    cache.put(2, Distribution.full([0.0] * 5 + [0.5, 0.0, 0.2, 0.3, 0.0]))
    match = lookup_longest(build_pool(s, 2), s)
    tree = draft(s, match, cache, ngram_len=3, max_expansion=2)
    assert tree.root_token == 6
    first = sorted(tree.nodes[i].token for i in tree.children[0].values())
    assert first == [5, 7, 8]
    no_as = draft(s, match, cache, ngram_len=3, max_expansion=2, alignment_sampling=False)
    assert no_as.tokens == [6, 7, 5, 6]
