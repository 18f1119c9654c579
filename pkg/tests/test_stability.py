import math

import numpy as np
import pytest
from scipy.linalg import expm

from turinglines.params import ModelParams
from turinglines.stability import (
    DomainError,
    classify_turing,
    condition_witnesses,
    construct_unimodular,
    exp_bound_check,
    growth_rate,
    lambda_critical_alpha1,
    lambda_star,
    matrix_exponential,
    mode_matrix,
    mode_spectrum,
    necessity_check,
    tail_bound,
)

GENERIC = ModelParams(beta1=1.2, beta2=0.9, tau1=0.005, tau2=0.05, lam=0.3)


def test_mode_matrix_entries():
    m = mode_matrix(GENERIC, 2)
    g1 = math.exp(-2.0 * math.pi**2 * GENERIC.tau1 * 4)
    g2 = math.exp(-2.0 * math.pi**2 * GENERIC.tau2 * 4)
    assert m.entries[0, 0] == pytest.approx(-1.0 + GENERIC.alpha1 * g1, rel=1e-14)
    assert m.entries[1, 1] == pytest.approx(-1.0 + GENERIC.alpha2 * g2, rel=1e-14)
    assert m.entries[0, 1] == pytest.approx(math.tanh(1.2 * 0.3), rel=1e-14)
    assert m.entries[1, 0] == pytest.approx(-math.tanh(0.9 * 0.3), rel=1e-14)


def test_spectrum_matches_numpy_eig():
    for k in range(6):
        m = mode_matrix(GENERIC, k)
        s = mode_spectrum(m)
        ev = sorted(np.linalg.eigvals(m.entries), key=lambda z: z.real, reverse=True)
        assert s.mu1 == pytest.approx(ev[0], abs=1e-12)
        assert s.mu2 == pytest.approx(ev[1], abs=1e-12)
        assert s.mu1.real >= s.mu2.real
        if s.v1 is not None:
            residual = m.entries @ s.v1 - s.mu1 * s.v1
            assert np.abs(residual).max() < 1e-12


def test_spectrum_complex_pair():
    # strong coupling with equal diagonals gives a conjugate pair
    p = ModelParams(beta1=1.0, beta2=1.0, tau1=0.02, tau2=0.02, lam=1.0)
    s = mode_spectrum(mode_matrix(p, 1))
    assert s.mu1.imag > 0
    assert s.mu2 == s.mu1.conjugate()


def test_matrix_exponential_against_scipy():
    for k in (0, 1, 3):
        m = mode_matrix(GENERIC, k)
        for t in (0.0, 0.4, 2.7):
            ours = np.asarray(matrix_exponential(m, t), dtype=complex)
            ref = expm(t * m.entries)
            assert np.abs(ours - ref).max() < 1e-12


def test_tail_bound_closes_the_scan(canonical):
    kstar = tail_bound(canonical)
    for k in range(kstar, kstar + 20):
        assert mode_spectrum(mode_matrix(canonical, k)).stability_class == "Stable"


def test_condition_witnesses_consistency(canonical):
    for k in range(5):
        w = condition_witnesses(canonical, k)
        m = mode_matrix(canonical, k)
        # cond1 is trace < 0, cond3 is det < 0
        assert w["cond1"] == (m.trace < 0)
        assert w["cond3"] == (m.determinant < 0)
        assert not (w["cond2"] and w["cond3"])


def test_classify_canonical_unimodular(canonical):
    report = classify_turing(canonical)
    assert report.is_turing
    assert report.is_unimodular
    assert report.unstable_modes == (-1, 1)
    assert report.tail_verified
    assert not report.inconclusive
    assert report.k_checked[1] == report.k_tail_bound


def test_classify_truncated_scan_not_tail_verified(canonical):
    report = classify_turing(canonical, k_max=1)
    assert not report.tail_verified
    assert report.k_checked == (0, 1)


def test_marginal_parameters_are_inconclusive():
    # exactly at the balance coupling the k=0 determinant vanishes, so the
    # classifier must refuse to certify rather than guess a side
    p, report = construct_unimodular(1.3, 0.8, lambda_margin=0.0)
    w = condition_witnesses(p, 0)
    assert abs(w["det_lhs"] - w["det_rhs"]) < 1e-12
    assert mode_spectrum(mode_matrix(p, 0)).stability_class == "Marginal"
    assert report.inconclusive
    assert not report.is_turing


def test_lambda_critical_and_star():
    lam0 = lambda_critical_alpha1(1.3)
    assert 1.3 / math.cosh(lam0 * 1.3) ** 2 == pytest.approx(1.0, abs=1e-12)
    lam_s = lambda_star(1.3, 0.8)
    assert 0 < lam_s < lam0
    with pytest.raises(DomainError):
        lambda_star(0.9, 0.8)
    with pytest.raises(DomainError):
        lambda_critical_alpha1(0.5)


def test_construct_recipe_invariants(canonical):
    lam_s = lambda_star(1.3, 0.8)
    assert canonical.lam == pytest.approx(lam_s * 1.02, rel=1e-12)
    a1_star = 1.3 / math.cosh(lam_s * 1.3) ** 2
    a2_star = 0.8 / math.cosh(lam_s * 0.8) ** 2
    tt1 = 2.0 * math.pi**2 * canonical.tau1
    tt2 = 2.0 * math.pi**2 * canonical.tau2
    assert tt1 == pytest.approx(math.log(a1_star) / 3.0, rel=1e-12)
    assert math.exp(tt2) * (1.0 - tt2) == pytest.approx(a2_star, abs=1e-12)


def test_growth_rate_requires_certification(canonical):
    mu = growth_rate(canonical)
    assert mu > 0
    assert mu == pytest.approx(mode_spectrum(mode_matrix(canonical, 1)).mu1.real)
    with pytest.raises(DomainError):
        growth_rate(GENERIC)


def test_necessity_check_on_canonical(canonical):
    assert necessity_check(canonical)
    assert canonical.tau1 < canonical.tau2
    swapped = canonical.swapped()
    assert necessity_check(swapped)
    assert classify_turing(swapped).is_unimodular


def test_exp_bound_check_rejects_negative_times(canonical):
    with pytest.raises(DomainError):
        exp_bound_check(canonical, 1, [-1.0], 10.0)
    assert exp_bound_check(canonical, 1, np.arange(0.0, 5.0, 0.5), 10.0)
