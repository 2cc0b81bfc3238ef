import math

import numpy as np
import pytest

from olsweights import (Dataset, estimate_impute, estimate_interact, estimate_match, estimate_reg,
                        estimate_stratify)
from olsweights.errors import DegenerateStrataError
from oracles import TOY8_ATE, TOY8_REG
from conftest import random_dataset


def test_toy8_point_estimates(toy8):
    assert estimate_reg(toy8).estimate == pytest.approx(float(TOY8_REG), abs=1e-10)
    for f in (estimate_interact, estimate_impute, estimate_match):
        assert f(toy8).estimate == pytest.approx(float(TOY8_ATE), abs=1e-10)
    with pytest.warns(UserWarning, match="singleton"):
        r = estimate_stratify(toy8)
    assert r.estimate == pytest.approx(3.0, abs=1e-10)
    assert r.std_error is None


def test_leverage_one_degrades_to_missing_se(toy8):
    r = estimate_interact(toy8)
    assert r.std_error is None and "se_unavailable" in r.metadata


@pytest.mark.parametrize("seed", range(4))
def test_impute_equals_interact_including_se(seed):
    data = random_dataset(np.random.default_rng(seed), 120, 3)
    a, b = estimate_impute(data), estimate_interact(data)
    assert a.estimate == pytest.approx(b.estimate, rel=1e-10)
    assert a.std_error > 0 and b.std_error > 0


def test_stratify_neyman_by_hand():
    x = np.repeat([0.0, 1.0], 6)
    d = np.tile([1.0, 1, 0, 0, 0, 1], 2)
    y = np.arange(12.0) ** 1.5
    r = estimate_stratify(Dataset(y, d, x[:, None]))
    est = var = 0.0
    for s in (slice(0, 6), slice(6, 12)):
        y1, y0 = y[s][d[s] == 1], y[s][d[s] == 0]
        est += 0.5 * (y1.mean() - y0.mean())
        var += 0.25 * (y1.var(ddof=1) / 3 + y0.var(ddof=1) / 3)
    assert r.estimate == pytest.approx(est)
    assert r.std_error == pytest.approx(math.sqrt(var))


def test_stratify_degenerate():
    x = np.array([0.0, 0, 0, 1, 1])
    data = Dataset([1.0, 2, 3, 4, 5], [1, 0, 1, 1, 1], x[:, None])
    with pytest.raises(DegenerateStrataError):
        estimate_stratify(data)
    with pytest.warns(UserWarning):
        r = estimate_stratify(data, drop_degenerate=True)
    assert r.n_used == 3


def test_match_without_ties_by_hand():
    # distinct x values, so every match is unique
    x = np.array([0.0, 1.1, 2.3, 0.4, 1.6, 2.9])
    d = np.array([1.0, 1, 1, 0, 0, 0])
    y = np.array([3.0, 5.0, 4.0, 1.0, 2.0, 0.5])
    r = estimate_match(Dataset(y, d, x[:, None]), standardize=False)
    # treated 0->0.4, 1.1->1.6, 2.3->2.9 ; control 0.4->0, 1.6->1.1, 2.9->2.3
    tau = np.array([3 - 1, 5 - 2, 4 - 0.5, 3 - 1, 5 - 2, 4 - 0.5])
    assert r.estimate == pytest.approx(tau.mean())
    K = np.ones(6)
    # within-arm nearest: treated 0<->1.1, 1.1->0, 2.3->1.1 ; control 0.4->1.6, 1.6->0.4, 2.9->1.6
    s2 = 0.5 * np.array([(3 - 5) ** 2, (5 - 3) ** 2, (4 - 5) ** 2, (1 - 2) ** 2, (2 - 1) ** 2, (0.5 - 2) ** 2])
    var = (np.sum((tau - tau.mean()) ** 2) + np.sum((K**2 + K) * s2)) / 36
    assert r.std_error == pytest.approx(math.sqrt(var))


def test_match_average_ties_equal_stratify():
    rng = np.random.default_rng(5)
    x = rng.integers(0, 3, 60).astype(float)
    d = np.tile([1.0, 0.0], 30)
    data = Dataset(rng.normal(size=60) + x, d, x[:, None])
    assert estimate_match(data).estimate == pytest.approx(estimate_stratify(data).estimate, abs=1e-12)


def test_match_random_ties_reproducible():
    rng = np.random.default_rng(6)
    x = rng.integers(0, 3, 40).astype(float)
    data = Dataset(rng.normal(size=40), np.tile([1.0, 0.0], 20), x[:, None])
    a = estimate_match(data, ties="random", seed=11)
    b = estimate_match(data, ties="random", seed=11)
    assert a.estimate == b.estimate and a.std_error == b.std_error
    with pytest.raises(ValueError):
        estimate_match(data, ties="nearest-ish")


def test_report_rejects_nan():
    from olsweights import EstimateReport
    with pytest.raises(ValueError):
        EstimateReport("x", float("nan"), 1.0, 3)
