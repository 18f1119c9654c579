import math

import numpy as np
import pytest
from scipy.integrate import quad

from turinglines.fluctuations import (
    BASE_COMPONENT_VARIANCE,
    TestError as StatsTestError,
)
from turinglines.fluctuations import (
    _wilson_interval,
    clt_oracle,
    compensator_variance_check,
    pattern_test,
    prediction,
    run_escape_ensemble,
    run_fluctuation_ensemble,
    schedule,
    spawn_seeds,
    synthetic_pushforward,
    variance_integrand,
    variance_limit,
)
from turinglines.stability import DomainError, growth_rate, mode_matrix


def test_schedule_formulas(canonical):
    mu = growth_rate(canonical)
    sched = schedule(canonical, 1.0 / 1024, thetas=[0.5, 1.0], deltas=[0.1])
    assert sched.t_critical == pytest.approx(math.log(1024) / (2 * mu), rel=1e-12)
    assert sched.t_theta[0.5] == pytest.approx(0.5 * sched.t_critical, rel=1e-12)
    assert sched.t_theta[1.0] == pytest.approx(sched.t_critical, rel=1e-12)
    assert sched.t_delta[0.1] == pytest.approx(math.log(10.0) / (2 * mu), rel=1e-12)


def test_schedule_domain_errors(canonical):
    with pytest.raises(DomainError):
        schedule(canonical, 2.0)
    with pytest.raises(DomainError):
        schedule(canonical, 0.5, thetas=[1.5])
    with pytest.raises(DomainError):
        schedule(canonical, 0.5, deltas=[0.0])


def test_prediction_variance_formulas(canonical):
    pred = prediction(canonical)
    mu = pred.mu
    t1 = math.tanh(canonical.beta1 * canonical.lam)
    t2 = math.tanh(canonical.beta2 * canonical.lam)
    v = BASE_COMPONENT_VARIANCE
    corr = (t1 - t2) * v / (2 * mu * mu + 2 * mu)
    assert pred.var_u == v
    assert pred.var_v1 == pytest.approx(v / mu - t1 * corr, rel=1e-12)
    assert pred.var_v2 == pytest.approx(v / mu + t2 * corr, rel=1e-12)


def test_prediction_projector_is_oblique(canonical):
    pred = prediction(canonical)
    p = pred.projection
    m = mode_matrix(canonical, 1).entries
    assert np.abs(p @ p - p).max() < 1e-12  # idempotent
    assert np.abs(p @ m - m @ p).max() < 1e-12  # commutes with the generator
    assert np.trace(p) == pytest.approx(1.0, abs=1e-12)  # rank one


def test_pushforward_oracle_matches_closed_form(canonical):
    pred = prediction(canonical)
    emp = synthetic_pushforward(pred, 400_000, seed=17)
    diag = np.diag(pred.predicted_covariance)
    assert np.abs(np.diag(emp) / diag - 1.0).max() < 0.01
    # imaginary and real blocks decouple
    assert abs(emp[0, 1]) < 0.05 * math.sqrt(diag[0] * diag[1])


def test_variance_integrand_closed_form_matches_quadrature(canonical):
    mu = growth_rate(canonical)
    for coeffs in ((1.0, 0.0, 0.0, 0.0), (0.3, 0.4, 0.5, -0.2)):
        for t in (0.3, 2.0, 15.0):
            _, big_h = variance_integrand(canonical, t, *coeffs, mu=mu)
            num, _ = quad(
                lambda s: math.exp(-2 * mu * s)
                * variance_integrand(canonical, s, *coeffs, mu=mu)[0],
                0.0,
                t,
            )
            assert big_h == pytest.approx(num, rel=1e-9)
        limit = variance_limit(canonical, *coeffs, mu=mu)
        _, h_inf = variance_integrand(canonical, 2000.0, *coeffs, mu=mu)
        assert h_inf == pytest.approx(limit, rel=1e-10)
    with pytest.raises(DomainError):
        variance_integrand(canonical, -1.0)


def test_variance_limit_reproduces_limit_law(canonical):
    pred = prediction(canonical)
    assert variance_limit(canonical, a1re=1.0) == pytest.approx(pred.var_v1, rel=1e-12)
    assert variance_limit(canonical, a2im=1.0) == pytest.approx(pred.var_v2, rel=1e-12)


def test_pattern_test_null_calibration():
    rng = np.random.default_rng(21)
    var = 1.7
    z = rng.normal(scale=math.sqrt(var), size=4000) + 1j * rng.normal(
        scale=math.sqrt(var), size=4000
    )
    res = pattern_test(z, component_variance=var)
    assert res.phase_ks_pvalue > 0.01
    assert res.amplitude_ks_pvalue > 0.01
    with pytest.raises(StatsTestError):
        pattern_test(z[:50])


def test_pattern_test_detects_anisotropy():
    rng = np.random.default_rng(22)
    z = rng.normal(size=4000) + 1j * 0.05 * rng.normal(size=4000)
    res = pattern_test(z)
    assert res.phase_ks_pvalue < 1e-6


def test_clt_oracle_constant_function():
    res = clt_oracle("const", n_sites=2000, n_samples=3000, seed=8)
    assert res.target_variance == pytest.approx(1.0, rel=1e-10)
    assert abs(res.empirical_variance - 1.0) < 0.1
    assert res.ks_pvalue > 0.01


def test_clt_oracle_custom_function():
    res = clt_oracle(lambda r: np.cos(4 * np.pi * r), n_sites=2000, n_samples=2000, seed=9)
    assert res.target_variance == pytest.approx(0.5, abs=1e-8)


def test_wilson_interval_sanity():
    lo, hi = _wilson_interval(80, 100)
    assert lo < 0.8 < hi
    assert 0.0 <= lo and hi <= 1.0
    lo0, hi0 = _wilson_interval(0, 50)
    assert lo0 < 1e-12 and hi0 > 0.0


def test_spawn_seeds_reproducible():
    a = [s.generate_state(4).tolist() for s in spawn_seeds(123, 5)]
    b = [s.generate_state(4).tolist() for s in spawn_seeds(123, 5)]
    c = [s.generate_state(4).tolist() for s in spawn_seeds(124, 5)]
    assert a == b
    assert a != c


def test_fluctuation_ensemble_small_run(canonical):
    stats = run_fluctuation_ensemble(
        canonical, 1.0 / 128, 0.3, n_replicas=8, master_seed=1, k_set=(0, 1, 2), n_jobs=2
    )
    assert stats.projected.shape == (8, 4)
    assert stats.covariance.shape == (4, 4)
    assert set(stats.offmode_median) == {0, 2}
    assert np.all(np.isfinite(stats.variance_ratios))
    with pytest.raises(DomainError):
        run_fluctuation_ensemble(canonical, 1.0 / 128, 0.3, 1, 0)
    with pytest.raises(DomainError):
        run_fluctuation_ensemble(canonical, 1.0 / 128, 0.3, 4, 0, k_set=(0, 2))


def test_escape_ensemble_small_run(canonical):
    est = run_escape_ensemble(canonical, 1.0 / 128, 0.4, n_replicas=12, master_seed=2, n_jobs=2)
    assert est.n_replicas == 12
    assert 0.0 <= est.ci_low <= est.p_hat <= est.ci_high <= 1.0
    with pytest.raises(DomainError):
        # delta so small that T_delta exceeds t_c
        run_escape_ensemble(canonical, 1.0 / 4, 0.1, 4, 0)


def test_compensator_unbiased_small_scale(canonical):
    res = compensator_variance_check(
        canonical, 1.0 / 128, 0.5, n_replicas=60, master_seed=3, n_jobs=2
    )
    # the compensated integral is a martingale: mean near zero at ensemble scale
    assert abs(res.empirical_mean) < 3.0 * math.sqrt(res.h_target / 60)
    assert res.ratio == pytest.approx(1.0, abs=0.5)
