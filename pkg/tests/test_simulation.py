import math

import numpy as np
import pytest

from olsweights.errors import ValidationError
from olsweights.simulation import (BUILTIN_DGPS, MonteCarloAbort, builtin_dgp, draw_sample, load_dgp_table,
                                   run_monte_carlo, summary_csv, write_outputs)
from oracles import BLOCK_ATE, DGP3_ATE


@pytest.mark.parametrize("name,ate", [("dgp1", 0.0), ("dgp2", 0.0), ("dgp3", float(DGP3_ATE)),
                                      ("cont_logistic", 0.0), ("cont_nonlinear", 3.0),
                                      ("block_fig3", float(BLOCK_ATE))])
def test_builtin_ates(name, ate):
    assert builtin_dgp(name).ate == pytest.approx(ate, abs=1e-12)


def test_unknown_dgp():
    with pytest.raises(ValidationError, match="unknown DGP"):
        builtin_dgp("dgp9")


@pytest.mark.parametrize("name", BUILTIN_DGPS)
def test_draw_is_deterministic(name):
    a, ta = draw_sample(builtin_dgp(name), None, 42)
    b, tb = draw_sample(builtin_dgp(name), None, 42)
    np.testing.assert_array_equal(a.outcome, b.outcome)
    np.testing.assert_array_equal(a.treatment, b.treatment)
    np.testing.assert_array_equal(ta.tau, tb.tau)


def test_block_draw_complete_randomization():
    data, truth = draw_sample(builtin_dgp("block_fig3"), None, 3)
    assert data.n == 1200
    for lab, k in zip("123456", (50, 50, 100, 50, 50, 100)):
        assert data.treatment[data.blocks == lab].sum() == k
    np.testing.assert_array_equal(data.outcome, truth.systematic)


def test_truth_mean_tracks_ate():
    spec = builtin_dgp("dgp3")
    means = [draw_sample(spec, 1000, s)[1].sample_ate for s in range(30)]
    sd = np.std(spec.tau) / math.sqrt(1000)
    assert abs(np.mean(means) - spec.ate) < 4 * sd


def test_single_iteration_has_no_empirical_se():
    r = run_monte_carlo(builtin_dgp("dgp1"), n=300, iterations=1, base_seed=5, methods=["reg"])
    s = r.summaries["reg"]
    assert s.empirical_se is None
    assert s.bias == pytest.approx(r.estimates[0, 0] - r.true_ate)


def test_rmse_bias_relation_and_spot_check():
    r = run_monte_carlo(builtin_dgp("dgp2"), n=300, iterations=12, base_seed=1, methods=["reg", "impute"])
    for s in r.summary_rows():
        assert s.rmse**2 >= s.bias**2 - 1e-12
    assert r.spot_checks and all(c["ok"] for c in r.spot_checks)


def test_threads_do_not_change_results():
    spec = builtin_dgp("dgp1")
    a = run_monte_carlo(spec, n=200, iterations=6, base_seed=9, methods=["reg", "match"], threads=1)
    b = run_monte_carlo(spec, n=200, iterations=6, base_seed=9, methods=["reg", "match"], threads=2)
    assert summary_csv(a) == summary_csv(b)


def test_failures_abort(tmp_path):
    # n = 6 leaves many draws without a treated unit in some stratum
    with pytest.raises(MonteCarloAbort):
        run_monte_carlo(builtin_dgp("dgp1"), n=8, iterations=20, base_seed=0, methods=["stratify"])


def test_stratify_not_offered_for_continuous():
    with pytest.raises(ValidationError):
        run_monte_carlo(builtin_dgp("cont_linear"), n=100, iterations=2, methods=["stratify"])


def test_user_table(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("x,p_d,tau\n0,0.2,1\n1,0.6,3\n")
    spec = load_dgp_table(p)
    assert spec.ate == pytest.approx(2.0)
    assert spec.mu0 == (0.0, 5.0)
    bad = tmp_path / "bad.csv"
    bad.write_text("x,p_d,tau\n0,1.2,1\n1,0.6,3\n")
    with pytest.raises(ValidationError):
        load_dgp_table(bad)


def test_outputs_written(tmp_path):
    r = run_monte_carlo(builtin_dgp("dgp2"), n=200, iterations=3, base_seed=0, methods=["reg", "stratify"])
    files = write_outputs(r, tmp_path, {"dgp": "dgp2"})
    assert set(files) == {"summary.csv", "summary.json", "plotdata/reference_lines.csv",
                          "plotdata/estimates.csv", "config.resolved.json"}
    ref = (tmp_path / "plotdata/reference_lines.csv").read_text()
    for line in ("true_ate", "angrist_replicate_mean", "general_population"):
        assert line in ref
