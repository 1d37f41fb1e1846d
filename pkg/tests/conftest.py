import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sampled_softmax.params import INPUT, TARGET, EmbedTable  # noqa: E402
from sampled_softmax.sampled_loss import BatchIndices  # noqa: E402
from sampled_softmax.sampler import CandidateSet  # noqa: E402


@pytest.fixture
def micro():
    """d=1 worked example: u=[1], v=[[1],[0]], label 0, sample 1, priors 0.5."""
    inp = EmbedTable(np.array([[1.0]]), INPUT)
    tgt = EmbedTable(np.array([[1.0], [0.0]]), TARGET)
    batch = BatchIndices([0], [0])
    lp = np.log(0.5)
    cand = CandidateSet(np.array([1]), np.array([lp]), np.array([lp]))
    return inp, tgt, batch, cand
