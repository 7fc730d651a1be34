import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from multidiscrete.exceptions import EstimationError, SpecError
from multidiscrete.marginals import (
    Family,
    MarginalSpec,
    TruncatedPmf,
    gp_support_limit,
    logpmf,
    mom_estimate,
    mom_from_moments,
    moments,
    pmf,
    quantile,
    truncate_support,
    validate_spec,
)

# parameter sets of the four simulation scenarios
GP_SETS = [(5.14, 0.6445), (10.67, 0.1420), (30.38, -0.1378), (50.02, -0.0499), (2, 0.365),
           (9.39, -0.023), (18.6, 0.1203)]
NB_SETS = [(3, 0.33), (8, 0.45), (15, 0.24), (20, 0.61), (43, 0.58), (6, 0.54), (15, 0.47)]
BIN_SETS = [(5, 0.68), (12, 0.36), (25, 0.45), (30, 0.51), (40, 0.57), (20, 0.62), (40, 0.58)]
ALL_SPECS = ([MarginalSpec.gp(*a) for a in GP_SETS] + [MarginalSpec.nb(*a) for a in NB_SETS]
             + [MarginalSpec.binomial(*a) for a in BIN_SETS])


def gp_pmf_direct(theta, lam, k):
    # textbook form, evaluated term by term
    if theta + lam * k <= 0:
        return 0.0
    return math.exp(math.log(theta) + (k - 1) * math.log(theta + lam * k) - theta - lam * k
                    - math.lgamma(k + 1))


@pytest.mark.parametrize("theta,lam", GP_SETS)
def test_gp_pmf_matches_direct_formula(theta, lam):
    spec = MarginalSpec.gp(theta, lam)
    ks = np.arange(0, 120)
    ours = pmf(spec, ks)
    ref = np.array([gp_pmf_direct(theta, lam, int(k)) for k in ks])
    np.testing.assert_allclose(ours, ref, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("r,p", NB_SETS)
def test_nb_pmf_matches_scipy(r, p):
    ks = np.arange(0, 200)
    np.testing.assert_allclose(pmf(MarginalSpec.nb(r, p), ks), stats.nbinom.pmf(ks, r, p), rtol=1e-11)


@pytest.mark.parametrize("n,p", BIN_SETS)
def test_binomial_pmf_matches_scipy(n, p):
    ks = np.arange(0, n + 3)
    np.testing.assert_allclose(pmf(MarginalSpec.binomial(n, p), ks), stats.binom.pmf(ks, n, p),
                               rtol=1e-11, atol=1e-300)


def test_pmf_zero_outside_support():
    assert pmf(MarginalSpec.binomial(5, 0.3), 6) == 0.0
    assert pmf(MarginalSpec.nb(2, 0.3), -1) == 0.0
    assert logpmf(MarginalSpec.gp(3.0, -0.5), 6) == -np.inf


def test_gp_lambda_zero_is_poisson():
    ks = np.arange(40)
    np.testing.assert_allclose(pmf(MarginalSpec.gp(4.2, 0.0), ks), stats.poisson.pmf(ks, 4.2), rtol=1e-12)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=str)
def test_truncated_moments_close_to_closed_form(spec):
    t = truncate_support(spec)
    mean, var = moments(spec)
    assert t.mean == pytest.approx(mean, rel=1e-6)
    assert t.variance == pytest.approx(var, rel=1e-5)


def test_nb_geometric_upper_limit():
    # pmf(k) = 0.5**(k+1): 0.5**33 > 1e-10 >= 0.5**34
    t = truncate_support(MarginalSpec.nb(1, 0.5))
    assert t.support_max == 32


def test_upper_limit_definition_holds():
    for spec in ALL_SPECS[:14]:
        t = truncate_support(spec)
        K = t.support_max
        tail = pmf(spec, np.arange(K + 1, K + 400))
        assert np.all(tail <= 1e-10)
        assert pmf(spec, K) > 1e-10 or (spec.family is Family.GP and spec.lam < 0)


def test_binomial_support_is_full():
    t = truncate_support(MarginalSpec.binomial(12, 0.36))
    assert t.support_max == 12
    assert t.raw_mass == pytest.approx(1.0, abs=1e-14)


def test_gp_negative_lambda_support_limit():
    # theta + m*lam > 0 by brute force
    theta, lam = 3.0, -0.5
    m = max(k for k in range(100) if theta + k * lam > 0)
    assert gp_support_limit(theta, lam) == m == 5
    assert gp_support_limit(4.0, -0.5) == 7  # 4 - 8*0.5 = 0 excluded
    t = truncate_support(MarginalSpec.gp(theta, lam))
    assert t.support_max <= m


@pytest.mark.parametrize("spec", ALL_SPECS, ids=str)
def test_normalized_and_deficit_small(spec):
    t = truncate_support(spec)
    assert abs(t.probs.sum() - 1.0) <= 1e-12
    assert 0 <= t.deficit <= 1e-8


def test_validation_messages():
    assert validate_spec(MarginalSpec.gp(3, 0.2)).ok
    rep = validate_spec(MarginalSpec.gp(3, 1.0))
    assert not rep.ok and "λ < 1" in rep.messages()[0]
    assert not validate_spec(MarginalSpec.gp(-1, 0.2)).ok
    assert not validate_spec(MarginalSpec.gp(1.0, -0.3)).ok  # m = 3 < 4
    assert not validate_spec(MarginalSpec.nb(2.5, 0.3)).ok
    assert not validate_spec(MarginalSpec.nb(2, 1.0)).ok
    assert not validate_spec(MarginalSpec.binomial(0, 0.3)).ok
    with pytest.raises(SpecError):
        truncate_support(MarginalSpec.binomial(3, 1.5))


def test_spec_dict_roundtrip_and_rejection():
    s = MarginalSpec.gp(5.14, 0.6445)
    assert MarginalSpec.from_dict(s.to_dict()) == s
    with pytest.raises(SpecError):
        MarginalSpec.from_dict({"family": "nb", "r": 3})
    with pytest.raises(SpecError):
        MarginalSpec.from_dict({"family": "nb", "r": 3, "p": 0.2, "n": 4})


def test_quantile_examples():
    t = truncate_support(MarginalSpec.binomial(5, 0.68))
    assert quantile(t, 0.5) == 3
    assert quantile(t, 0.0) == 0
    with pytest.raises(ValueError):
        quantile(t, 1.0)


@given(st.floats(0, 1, exclude_max=True))
@settings(max_examples=200, deadline=None)
def test_quantile_matches_linear_scan(u):
    t = truncate_support(MarginalSpec.nb(3, 0.33))
    ref = next((k for k, c in enumerate(t.cdf) if c > u), t.support_max)
    assert quantile(t, u) == ref


def test_truncated_pmf_offset_properties():
    t = TruncatedPmf(np.array([0.25, 0.5, 0.25]), offset=4)
    assert t.mean == pytest.approx(5.0)
    assert t.variance == pytest.approx(0.5)
    assert list(t.support) == [4, 5, 6]
    assert quantile(t, 0.3) == 5


@pytest.mark.parametrize("spec", ALL_SPECS, ids=str)
def test_mom_recovers_parameters_from_exact_moments(spec):
    mean, var = moments(spec)
    a, b = mom_from_moments(mean, var, spec.family)
    for got, want in zip((a, b), spec.params()):
        assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


@given(
    theta=st.floats(0.5, 60),
    lam=st.floats(-0.2, 0.8),
)
@settings(max_examples=200, deadline=None)
def test_gp_mom_inversion_property(theta, lam):
    mean, var = theta / (1 - lam), theta / (1 - lam) ** 3
    a, b = mom_from_moments(mean, var, "gp")
    assert a == pytest.approx(theta, rel=1e-9)
    assert b == pytest.approx(lam, abs=1e-9)


def test_mom_estimate_sample_and_failures():
    x = np.array([0, 1, 1, 2, 5, 3, 2, 8, 0, 1])
    est = mom_estimate(x, "nb")
    m, v = x.mean(), x.var(ddof=1)
    assert est.r == pytest.approx(m * m / (v - m))
    assert est.p == pytest.approx(m / v)
    assert est.rounded().r == math.ceil(est.r)
    with pytest.raises(EstimationError):
        mom_estimate(np.array([3, 3, 3, 3]), "gp")
    with pytest.raises(EstimationError):
        mom_estimate(x, "binomial")  # over-dispersed
