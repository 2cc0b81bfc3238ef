from fractions import Fraction

import numpy as np
import pytest

from olsweights import Dataset, effective_sample_profile, sloczynski_delta, strata_weights, unit_weights
from olsweights.errors import DegenerateStrataError, ValidationError
from olsweights.weights import population_reconstructions
from oracles import DGP2_REG_LIMIT, TOY8_ATE, TOY8_REG, TOY8_RESID_SS


def test_toy8_unit_weights(toy8):
    iw = unit_weights(toy8)
    assert iw.denominator == pytest.approx(float(TOY8_RESID_SS), abs=1e-12)
    assert iw.w @ toy8.outcome == pytest.approx(float(TOY8_REG), abs=1e-12)
    assert iw.n_negative == 0
    t = toy8.treated
    assert iw.w_tilde[t].sum() == pytest.approx(1.0)
    assert iw.w_tilde[~t].sum() == pytest.approx(1.0)


def test_toy8_strata(toy8):
    sd = strata_weights(toy8)
    assert sd.angrist_reconstruction == pytest.approx(float(TOY8_REG), abs=1e-12)
    assert sd.general_reconstruction == pytest.approx(float(TOY8_REG), abs=1e-12)
    assert sd.natural_estimate == pytest.approx(float(TOY8_ATE), abs=1e-12)
    # a binary covariate makes the linear fit saturated
    assert sd.max_abs_a < 1e-12


def test_general_reconstruction_with_misfit():
    # three strata with pi not linear in x, so a_x != 0
    x = np.repeat([0.0, 1.0, 2.0], [10, 10, 10])
    d = np.r_[np.r_[np.ones(1), np.zeros(9)], np.r_[np.ones(8), np.zeros(2)], np.r_[np.ones(3), np.zeros(7)]]
    y = x**2 + 2 * d * x + np.sin(np.arange(30))
    data = Dataset(y, d, x[:, None], ("x",))
    sd = strata_weights(data)
    assert sd.max_abs_a > 0.1
    assert sd.general_reconstruction == pytest.approx(sd.ols_coefficient, rel=1e-10)
    assert abs(sd.angrist_reconstruction - sd.ols_coefficient) > 1e-3


def test_degenerate_strata_flagged():
    x = np.array([0.0, 0, 1, 1, 2, 2])
    data = Dataset([1.0, 2, 3, 4, 5, 6], [1, 0, 1, 0, 1, 1], x[:, None])
    with pytest.raises(DegenerateStrataError) as ei:
        strata_weights(data)
    assert ei.value.strata == [(2.0,)]
    with pytest.warns(UserWarning):
        sd = strata_weights(data, drop_degenerate=True)
    assert len(sd.strata) == 2


def test_population_dgp2_closed_form():
    sup = np.arange(-3, 4)
    pop = population_reconstructions(sup, np.full(7, 1 / 7), (sup + 4) / 10, 3 * sup, 5 * sup)
    assert pop["angrist"] == pytest.approx(float(DGP2_REG_LIMIT), abs=1e-12)
    assert pop["general"] == pytest.approx(float(DGP2_REG_LIMIT), abs=1e-12)
    assert max(abs(a) for a in pop["a"]) < 1e-12


def test_negative_weight_at_extreme_treated_unit():
    # step-shaped treatment on x = 0..9: the linear fit exceeds 1 at x = 9
    x = np.arange(10.0)
    d = (x >= 5).astype(float)
    data = Dataset(np.arange(10.0), d, x[:, None])
    iw = unit_weights(data)
    assert iw.d_hat[9] > 1
    assert iw.negative_flags[9] and iw.n_negative >= 1


def test_no_residual_variation():
    x = np.array([0.0, 0, 1, 1])
    data = Dataset([1.0, 2, 3, 4], [0, 0, 1, 1], x[:, None])
    with pytest.raises(ValidationError, match="no residual variation"):
        unit_weights(data)


def test_profile_hits_overall_mean(toy8):
    prof = effective_sample_profile(toy8)
    # implied weights balance X on the implied reference mean, which is 4/7 here
    assert prof.treated_mean[0] == pytest.approx(4 / 7)
    assert prof.control_mean[0] == pytest.approx(4 / 7)
    assert not prof.leaves_hull


def test_delta_predicts_toy8_gap(toy8):
    r = sloczynski_delta(toy8)
    # with a saturated fit the predicted bias is the exact gap reg - ATE
    assert r.predicted_bias == pytest.approx(float(TOY8_REG - TOY8_ATE), abs=1e-12)


def test_delta_zero_without_variation():
    rng = np.random.default_rng(1)
    x = np.repeat([0.0, 1.0], 20)
    d = np.tile([1.0, 0.0], 20)
    r = sloczynski_delta(Dataset(rng.normal(size=40), d, x[:, None]))
    assert r.delta == 0.0 and "no treatment-probability variation" in r.note
