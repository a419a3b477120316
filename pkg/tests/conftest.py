import numpy as np
import pytest

from ttpinn.network import MlpSpec, TTHidden, init
from ttpinn.ttlinear import tt_init


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_tt_layer(rng, d=None, max_factor=4, max_rank=8):
    """A random valid TT layer with small factors, for oracle sweeps."""
    d = d if d is not None else int(rng.integers(1, 5))
    row = tuple(int(rng.integers(2, max_factor + 1)) for _ in range(d))
    col = tuple(int(rng.integers(2, max_factor + 1)) for _ in range(d))
    ranks = (1,) + tuple(int(rng.integers(1, max_rank + 1)) for _ in range(2 * d - 1)) + (1,)
    return tt_init(row, col, ranks, int(rng.integers(0, 2**32)))


def small_dense_net(width=8, layers=2, seed=3):
    return init(MlpSpec(hidden_width=width, hidden_layers=layers, hidden_kind="dense"), seed)


def small_tt_net(seed=4, layers=1, rank=2):
    spec = MlpSpec(
        hidden_width=16,
        hidden_layers=layers,
        hidden_kind="tt",
        tt=TTHidden((4, 4), (4, 4), (1, rank, rank, rank, 1)),
    )
    return init(spec, seed)


def rel_err(a, b, floor=1.0):
    """|a - b| relative to max(floor, |a|, |b|), elementwise max over arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom))
