"""Property checks on randomly generated datasets."""

import numpy as np
from hypothesis import given, settings, strategies as st

from olsweights import Dataset, estimate_impute, estimate_interact, estimate_reg, unit_weights
from olsweights.simulation import builtin_dgp, draw_sample


@st.composite
def datasets(draw):
    n = draw(st.integers(12, 80))
    p = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p)) * draw(st.sampled_from([1e-2, 1.0, 1e3]))
    d = (rng.random(n) < 0.5).astype(float)
    d[: p + 3] = 1.0
    d[p + 3: 2 * p + 6] = 0.0
    y = rng.normal(size=n) + X.sum(axis=1)
    return Dataset(y, d, X)


@settings(max_examples=60, deadline=None)
@given(datasets())
def test_implied_weights_reproduce_ols(data):
    iw = unit_weights(data)
    b = estimate_reg(data).estimate
    assert abs(iw.w @ data.outcome - b) <= 1e-8 * max(1.0, abs(b))
    assert abs(iw.w_tilde[data.treated].sum() - 1) < 1e-8


@settings(max_examples=60, deadline=None)
@given(datasets())
def test_impute_interact_agree(data):
    a, b = estimate_impute(data).estimate, estimate_interact(data).estimate
    assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


@settings(max_examples=40, deadline=None)
@given(datasets(), st.floats(-50, 50), st.floats(0.1, 10))
def test_estimates_shift_and_scale(data, shift, scale):
    moved = Dataset(scale * data.outcome + shift, data.treatment, data.covariates)
    for f in (estimate_reg, estimate_impute):
        b0, b1 = f(data).estimate, f(moved).estimate
        assert abs(b1 - scale * b0) <= 1e-7 * max(1.0, abs(scale * b0))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**40))
def test_noise_free_block_draws(seed):
    data, truth = draw_sample(builtin_dgp("block_fig3"), None, seed)
    assert np.array_equal(data.outcome, truth.systematic)
