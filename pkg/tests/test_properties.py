"""Property-based checks over randomly generated inputs."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperagg import autodiff as ad
from hyperagg import lorentz
from hyperagg.autodiff import GradientTape
from hyperagg.config import ExperimentConfig

finite = st.floats(min_value=-5.0, max_value=5.0,
                   allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=2, max_size=6),
       st.lists(finite, min_size=2, max_size=6),
       st.sampled_from([0.05, 0.1, 0.5, 1.0]))
def test_distance_symmetric_and_nonnegative(za, zb, curvature):
    n = min(len(za), len(zb))
    a = lorentz.exp_map_origin(np.array(za[:n]), curvature)
    b = lorentz.exp_map_origin(np.array(zb[:n]), curvature)
    dab = lorentz.lorentz_distance(a, b)
    assert dab == lorentz.lorentz_distance(b, a)
    assert dab >= 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=4),
       st.integers(min_value=1, max_value=4),
       st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_softmax_rows_stochastic(rows, cols, seed):
    logits = np.random.default_rng(seed).normal(scale=50.0, size=(rows, cols))
    out = ad.softmax_rows(ad.Tensor(logits)).data
    assert np.all(out >= 0.0)
    assert np.allclose(out.sum(axis=-1), 1.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=2, max_value=5),
       st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_sum_gradient_is_ones(n, seed):
    tape = GradientTape()
    x = tape.tensor(np.random.default_rng(seed).normal(size=(n, n)))
    tape.backward(x.sum())
    assert np.array_equal(tape.grad(x), np.ones((n, n)))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=100),
       st.floats(min_value=1e-3, max_value=10.0,
                 allow_nan=False, allow_infinity=False),
       st.booleans())
def test_config_round_trip_random_values(epochs, tau, normalize):
    cfg = ExperimentConfig({
        "train": {"epochs": epochs},
        "loss": {"tau": tau},
        "model": {"normalize_hyperedges": normalize},
    })
    again = ExperimentConfig.from_string(cfg.to_string())
    assert again.sections == cfg.sections
