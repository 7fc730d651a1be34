import math

import numpy as np
import pytest

from multidiscrete import _kernels, streams
from multidiscrete.eval_harness import (
    Scenario,
    ci_for_estimate,
    fisher_interval,
    parameter_labels,
    preset,
    preset_scenarios,
    run_replication,
    summarize,
)
from multidiscrete.exceptions import EstimationError
from multidiscrete.marginals import MarginalSpec

from conftest import preset_table


def test_presets_transcribed():
    scen = {s.name: s for s in preset_scenarios()}
    assert sorted(scen) == sorted(f"{b}-{s}" for b in ("gp", "nb", "binomial", "mixed")
                                  for s in ("small", "large"))
    gp = scen["gp-large"]
    assert [s.theta for s in gp.specs] == [5.14, 10.67, 30.38, 50.02, 2]
    assert [s.lam for s in gp.specs] == [0.6445, 0.1420, -0.1378, -0.0499, 0.365]
    assert gp.n == 2000 and scen["gp-small"].n == 200 and gp.replications == 200
    assert gp.sigma_star[0, 4] == 0.2619 and gp.sigma_star[1, 4] == -0.0122
    assert [s.r for s in scen["nb-small"].specs] == [3, 8, 15, 20, 43]
    assert [s.p for s in scen["nb-small"].specs] == [0.33, 0.45, 0.24, 0.61, 0.58]
    assert list(scen["binomial-large"].sigma_star[0]) == [1, 0.45, 0.40, 0.35, 0.30]
    mixed = scen["mixed-large"]
    assert [s.lam for s in mixed.specs[:2]] == [-0.023, 0.1203]
    assert [s.family.value for s in mixed.specs] == ["gp", "gp", "nb", "nb", "binomial", "binomial"]
    assert mixed.sigma_star[2, 5] == 0.26


def test_labels_layout():
    s = preset("gp-small")
    labels = parameter_labels(s)
    assert labels[:2] == ["theta_1", "lambda_1"] and labels[10] == "rho_12" and len(labels) == 20


def test_fisher_interval_zero():
    lo, hi = fisher_interval(0.0, 2000)
    half = math.tanh(1.959963984540054 / math.sqrt(1997))
    assert hi == pytest.approx(half, abs=1e-12) and lo == pytest.approx(-half, abs=1e-12)
    assert hi == pytest.approx(0.0438, abs=5e-5)


def test_correlation_ci_from_sample():
    g = np.random.default_rng(1)
    x = g.integers(0, 10, size=(500, 2))
    lo, hi = ci_for_estimate(x, "correlation")
    r = np.corrcoef(x.T)[0, 1]
    assert lo < r < hi


def test_bootstrap_shift_equivariance():
    # resampled means of x + c are the resampled means of x shifted by c
    g = np.random.default_rng(2)
    x = g.integers(0, 20, size=300)
    idx = g.integers(0, 300, size=(500, 300))
    s1, _ = _kernels.bootstrap_sums(x, idx)
    t1, _ = _kernels.bootstrap_sums(x + 7, idx)
    np.testing.assert_array_equal(np.asarray(t1) - np.asarray(s1), 7 * 300)


def test_param_ci_covers_estimate_and_errors():
    g = np.random.default_rng(3)
    x = g.negative_binomial(8, 0.45, size=1000)
    (rlo, rhi), (plo, phi) = ci_for_estimate(x, "marginal_param", family="nb", stream=streams.derive(1, 6, 0))
    m, v = x.mean(), x.var(ddof=1)
    assert rlo < m * m / (v - m) < rhi and plo < m / v < phi
    with pytest.raises(ValueError):
        ci_for_estimate(x[:10], "marginal_param", family="nb", stream=streams.derive(1, 6, 0))
    with pytest.raises(EstimationError):
        ci_for_estimate(np.full(100, 3), "marginal_param", family="gp", stream=streams.derive(1, 6, 0))


def test_summarize_arithmetic():
    est = np.array([1.0, 1.2, np.nan, 0.9])
    row = summarize("x", 1.0, est, [1, 0, np.nan, 1])
    e = est[~np.isnan(est)]
    assert row.ae == pytest.approx(e.mean())
    assert row.sd == pytest.approx(e.std(ddof=1))
    assert row.rb == pytest.approx(abs(e.mean() - 1) * 100)
    assert row.rmse == pytest.approx(np.sqrt(np.mean((e - 1) ** 2)))
    assert row.cr == pytest.approx(200 / 3)
    assert row.excluded == 1 and row.used == 3
    with pytest.raises(EstimationError):
        summarize("y", 1.0, [np.nan, np.nan], [np.nan, np.nan])


def test_single_margin_unbiased_and_r1():
    scen = Scenario("one", (MarginalSpec.nb(8, 0.45),), np.eye(1), 500, 40)
    tab = run_replication(scen, 5)
    for row in tab.rows:
        assert abs(row.ae - row.tv) <= 2 * row.sd / math.sqrt(40) + 0.1 * row.sd
    one = run_replication(Scenario("one", (MarginalSpec.nb(8, 0.45),), np.eye(1), 500, 1), 5)
    assert math.isnan(one.rows[0].sd) and "undefined" in one.format()


def test_table_internal_consistency_and_determinism():
    scen = preset("nb-small", 12)
    a = run_replication(scen, 9)
    b = run_replication(scen, 9)
    assert a.to_csv() == b.to_csv()
    for k, row in enumerate(a.rows):
        e = a.estimates[:, k]
        e = e[np.isfinite(e)]
        assert row.ae == pytest.approx(e.mean(), abs=1e-12)
        assert row.rmse == pytest.approx(np.sqrt(np.mean((e - row.tv) ** 2)), abs=1e-12)
        assert row.rb == pytest.approx(abs(e.mean() - row.tv) / abs(row.tv) * 100, abs=1e-12)
        assert row.sb == pytest.approx(abs(e.mean() - row.tv) / e.std(ddof=1) * 100, abs=1e-12)
    assert a.to_csv().startswith("parameter,TV,AE,SD,RB,SB,RMSE,CR")


@pytest.mark.parametrize("base", ["gp", "nb", "binomial", "mixed"])
def test_monotone_precision(base):
    small = preset_table(f"{base}-small")
    large = preset_table(f"{base}-large")
    for s, l in zip(small.rows, large.rows):
        assert l.sd < s.sd, s.label
        assert l.rmse < s.rmse, s.label


def test_nb_large_p1_coverage():
    cr = preset_table("nb-large").row("p_1").cr
    assert 92.5 <= cr <= 97.5, f"p_1 coverage {cr}"


def test_mixed_large_correlation_aes():
    tab = preset_table("mixed-large")
    for row in tab.correlation_rows():
        assert abs(row.ae - row.tv) <= 0.01
