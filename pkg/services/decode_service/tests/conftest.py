import os

import hypothesis
import numpy as np
import pytest

from services.decode_service.src.models import TableModel
from services.decode_service.src.schemas import Distribution, EngineConfig, TokenSeq

np.seterr(all="warn")

hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "ci"))

@pytest.fixture
def seq():
    return TokenSeq.from_prompt([5, 6, 7, 5, 6])

@pytest.fixture
def strict_config():
    return EngineConfig.build(verification_mode="strict")

@pytest.fixture
def constant_model():
    """Every context maps to one-hot(7)."""
    return TableModel(10, 0, {(): Distribution.one_hot(7, 10)})
