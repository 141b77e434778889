import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from services.decode_service.src.exceptions import (
    BadConfig,
    DuplicateSupport,
    InvalidSequence,
    NegativeProb,
    NonNormalized,
    UnsortedTruncation,
)
from services.decode_service.src.schemas import (
    Distribution,
    EngineConfig,
    TokenSeq,
    VerificationMode,
    validate_distribution,
)


def test_validate_distribution_accepts_symmetric_pair():
    assert validate_distribution(Distribution([0, 1], [0.5, 0.5])) is None


def test_validate_distribution_rejects_overweight():
    with pytest.raises(NonNormalized):
        validate_distribution(Distribution.full([0.7, 0.4]))


def test_validate_distribution_rejects_negative():
    with pytest.raises(NegativeProb):
        validate_distribution(Distribution.full([-0.1, 1.1]))


def test_validate_distribution_rejects_duplicate_support():
    with pytest.raises(DuplicateSupport):
        validate_distribution(Distribution([3, 3], [0.5, 0.5]))


def test_truncated_must_be_sorted_and_may_sum_below_one():
    validate_distribution(Distribution([4, 1], [0.5, 0.25], "truncated"))
    with pytest.raises(UnsortedTruncation):
        validate_distribution(Distribution([4, 1], [0.25, 0.5], "truncated"))


def test_ties_break_by_lowest_id():
    d = Distribution.full([0.1, 0.3, 0.3, 0.3])
    assert d.argmax() == 1
    assert d.top(3) == [1, 2, 3]
    assert d.rank(3) == 3
    assert d.rank(0) == 4
    t = d.truncate(2)
    assert t.support.tolist() == [1, 2]
    assert t.argmax() == 1
    assert t.rank(3) is None


@given(
    st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=1, max_size=40),
    st.integers(min_value=1, max_value=50),
)
def test_truncation_of_valid_full_always_validates(weights, k):
    w = np.asarray(weights, dtype=np.float64)
    if w.sum() == 0:
        w = np.ones_like(w)
    d = Distribution.full(w / w.sum())
    if abs(d.probs.sum() - 1.0) > 1e-9:
        return
    validate_distribution(d.truncate(k))


def test_distribution_record_survives_json():
    d = Distribution.full([0.1, 0.2, 0.7]).truncate(2)
    back = Distribution.from_record(json.loads(json.dumps(d.to_record())))
    assert back == d
    assert back.kind == "truncated"


def test_token_seq_bounds_and_generated():
    s = TokenSeq((1, 2, 3, 4), 2)
    assert s.generated == (3, 4)
    assert s.extend([9]).tokens == (1, 2, 3, 4, 9)
    assert TokenSeq.from_record(s.to_record()) == s
    with pytest.raises(InvalidSequence):
        TokenSeq((1, 2), 3)
    with pytest.raises(InvalidSequence):
        s.check_vocab(4)


@pytest.mark.parametrize(
    "text,kind,extra",
    [
        ("strict", "strict", {}),
        ("adaptive", "adaptive", {}),
        ("fixed:0.001", "fixed", {"threshold": 0.001}),
        ("topk:5", "topk", {"k": 5}),
    ],
)
def test_verification_mode_parse(text, kind, extra):
    mode = VerificationMode.parse(text)
    assert mode.kind == kind
    for field, value in extra.items():
        assert getattr(mode, field) == value
    assert VerificationMode.parse(str(mode)) == mode


@pytest.mark.parametrize("text", ["greedy", "fixed:abc", "topk:0", "strict:1", "fixed:2.0"])
def test_verification_mode_rejects_garbage(text):
    with pytest.raises(BadConfig):
        VerificationMode.parse(text)


def test_engine_config_defaults():
    cfg = EngineConfig()
    assert (cfg.ngram_len, cfg.max_key_len, cfg.max_expansion) == (6, 6, 2)
    assert (cfg.alpha, cfg.beta) == (0.1, 0.1)
    assert cfg.verification_mode.kind == "adaptive"


def test_engine_config_wraps_validation_errors():
    with pytest.raises(BadConfig):
        EngineConfig.build(beta=1.5)
    with pytest.raises(BadConfig):
        EngineConfig.build(min_key_len=4, max_key_len=2)
    with pytest.raises(BadConfig):
        EngineConfig.build(verification_mode="nope")


def test_engine_config_with_keeps_other_fields():
    cfg = EngineConfig.build(alpha=0.2, verification_mode="topk:3")
    other = cfg.with_(alignment_sampling=False)
    assert other.alpha == 0.2
    assert other.verification_mode == VerificationMode(kind="topk", k=3)
    assert other.alignment_sampling is False
