import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from latgibbs.analysis import (CovarianceSeries, InsufficientSamples, NoSignal, OutsideUniqueness,
                               UnboundedSeminorm, check_decay_bound, check_moment_bounds,
                               custom_observable, delta_k, displacement_ball, estimate_covariances,
                               fit_decay_rate, moment_quadrature, observable, run_battery,
                               verify_brascamp_lieb_1d, verify_contraction, verify_kkk_chain,
                               verify_lsi_1d)
from latgibbs.lattice import Semimetric, build_lattice, gaussian_covariance_oracle, oracle_series
from latgibbs.potentials import build_gaussian, build_model1
from latgibbs.sampler import run_chain

NN = {(1,): 1.0}
# 30-digit mpmath quadrature under exp(-((1+x^2)^3 - 1)), F'' = 6(1+x^2)^2 + 24x^2(1+x^2)
M1_VAR_X = 0.103197517966778444790946806799
M1_BL_X = 0.11653366324527794401665365379
M1_VAR_TANH = 0.0884594017533249545619808226155
M1_BL_TANH = 0.104519096831356952931619500232
M1_ENT_1P_TANH = 0.170057177752023139164907480139
M1_LSI_BOUND_TANH = 0.280135429082944637044294654502
# sup over x1 of |d/dx1 mu_0(tanh x0 tanh x1)| / sqrt(F''(x1)) at lambda = 0.02, by mpmath
# numerical differentiation of the conditional expectation and root-finding for the peak
M1_CONTRACTION_LHS = 0.0033316598239462517443


@pytest.fixture(scope="module")
def m1():
    return build_model1(1, NN, 0.02)


@pytest.fixture(scope="module")
def m1_free():
    return build_model1(1, NN, 0.0)


def test_delta_identity_gaussian():
    F = build_gaussian(4.0, NN, 0.1).F
    assert delta_k(observable("x"), F) == pytest.approx(0.5, rel=1e-12)


def test_delta_tanh_model1(m1):
    assert delta_k(observable("tanh"), m1.F) == pytest.approx(1 / math.sqrt(6), rel=1e-12)


def test_delta_constant_and_off_site(m1):
    assert delta_k(observable("one"), m1.F) == 0.0
    assert delta_k(observable("tanh", base_site=3), m1.F, site=2) == 0.0


def test_delta_unbounded():
    F = build_gaussian(1.0, NN, 0.1).F
    with pytest.raises(UnboundedSeminorm):
        delta_k(custom_observable(lambda u: u * u, lambda u: 2 * u), F)


@given(st.floats(-50, 50).filter(lambda c: c != 0))
def test_delta_scaling_exact(c):
    F = build_model1(1, NN, 0.0).F
    t = observable("tanh")
    assert delta_k(t.scaled(c), F) == abs(c) * delta_k(t, F)


def test_displacement_ball():
    b = displacement_ball(2, 2)
    assert len(b) == 13 and b[0] == (0, 0)
    assert set(b) == {tuple(-a for a in k) for k in b}


@pytest.fixture(scope="module")
def gauss_run():
    m = build_gaussian(1.0, NN, 0.1)
    lat = build_lattice(1, [16], "torus")
    res = run_chain(m, lat, 8000, burnin=500, seed=42)
    return m, lat, res.fields


def test_insufficient_samples(gauss_run):
    m, lat, fields = gauss_run
    x = observable("x")
    with pytest.raises(InsufficientSamples):
        estimate_covariances(fields[:99], lat, x, x, [(0,)])


def test_gaussian_covariances_match_oracle(gauss_run):
    m, lat, fields = gauss_run
    x = observable("x")
    disps = displacement_ball(1, 4)
    s = estimate_covariances(fields, lat, x, x, disps)
    exact = oracle_series(gaussian_covariance_oracle(m, lat), lat, disps)
    assert np.all(np.abs(s.cov - exact) <= 3 * s.stderr)
    assert s.cov[0] > 0 and np.all(s.stderr > 0)


def test_swap_symmetry_on_torus(gauss_run):
    m, lat, fields = gauss_run
    x, t = observable("x"), observable("tanh")
    disps = displacement_ball(1, 3)
    a = estimate_covariances(fields, lat, x, t, disps)
    b = estimate_covariances(fields, lat, t, x, [tuple(-v for v in k) for k in disps])
    np.testing.assert_allclose(a.cov, b.cov, rtol=1e-10, atol=1e-15)
    np.testing.assert_allclose(a.stderr, b.stderr, rtol=1e-10)


def test_free_boundary_uses_base_site(gauss_run):
    m, lat, fields = gauss_run
    free = build_lattice(1, [16], "free")
    x = observable("x", base_site=5)
    s = estimate_covariances(fields, free, x, x, [(0,), (2,)])
    v = fields[:, 5]
    assert s.cov[0] == pytest.approx(v.var(), rel=1e-12)
    with pytest.raises(ValueError):
        estimate_covariances(fields, free, x, x, [(11,)])


def test_product_measure_covariances_vanish():
    m = build_model1(1, NN, 0.0)
    lat = build_lattice(1, [16], "torus")
    fields = run_chain(m, lat, 3000, burnin=100, seed=2).fields
    t = observable("tanh")
    s = estimate_covariances(fields, lat, t, t, [(k,) for k in (-4, -3, -2, -1, 1, 2, 3, 4)])
    assert np.all(np.abs(s.cov) <= 3 * s.stderr)
    with pytest.raises(NoSignal):
        fit_decay_rate(s)


def test_fit_synthetic_rate(rng):
    disps = displacement_ball(1, 8)
    norms = np.array([abs(k[0]) for k in disps])
    cov = np.exp(-0.7 * norms) * (1 + 1e-4 * rng.standard_normal(norms.size))
    s = CovarianceSeries(disps, cov, 1e-4 * np.exp(-0.7 * norms), 1000)
    fit = fit_decay_rate(s)
    assert fit.rate == pytest.approx(0.7, abs=0.01)
    assert fit.r_squared > 0.999


def test_fit_excludes_noise():
    disps = [(k,) for k in range(6)]
    cov = np.array([1.0, 0.5, 0.25, 0.125, 1e-4, -1e-4])
    s = CovarianceSeries(disps, cov, np.full(6, 1e-3), 1000)
    fit = fit_decay_rate(s)
    assert fit.excluded == [(4,), (5,)]
    assert fit.rate == pytest.approx(math.log(2), rel=1e-10)


def test_oracle_self_fit():
    m = build_gaussian(1.0, NN, 0.1)
    lat = build_lattice(1, [32], "torus")
    disps = displacement_ball(1, 8)
    s = CovarianceSeries.exact(disps, oracle_series(gaussian_covariance_oracle(m, lat), lat, disps))
    full = fit_decay_rate(s)
    short = fit_decay_rate(s, max_norm=5)
    assert full.rate == pytest.approx(short.rate, rel=0.05)


def test_decay_bound_zero_coupling(m1_free):
    t = observable("tanh")
    var = moment_quadrature(m1_free.F)["tanh2"]
    s = CovarianceSeries.exact([(0,)], [var])
    rep = check_decay_bound(s, m1_free, Semimetric(0.5), t, t)
    assert rep.rhs == pytest.approx(1 / 6, rel=1e-10)
    assert rep.lhs == pytest.approx(M1_VAR_TANH, rel=1e-10)
    assert rep.passed and rep.details["lhs_kind"].startswith("partial sum")


def test_decay_bound_gaussian_oracle():
    m = build_gaussian(1.0, NN, 0.1)
    lat = build_lattice(1, [16], "torus")
    disps = displacement_ball(1, 7)
    s = CovarianceSeries.exact(disps, oracle_series(gaussian_covariance_oracle(m, lat), lat, disps))
    x = observable("x")
    rep = check_decay_bound(s, m, Semimetric(0.0), x, x)
    assert rep.rhs == pytest.approx(1 / 0.6, rel=1e-6)
    assert rep.passed


def test_decay_bound_outside_uniqueness():
    m = build_model1(1, NN, 1.0)
    s = CovarianceSeries.exact([(0,)], [0.1])
    t = observable("tanh")
    with pytest.raises(OutsideUniqueness):
        check_decay_bound(s, m, Semimetric(0.0), t, t)


def test_decay_bound_monotone_in_alpha(m1):
    disps = displacement_ball(1, 4)
    s = CovarianceSeries(disps, np.array([0.09, 0.01, 0.01, 1e-3, 1e-3, 1e-4, 1e-4, 0, 0]),
                         np.full(9, 1e-4), 1000)
    t = observable("tanh")
    reps = [check_decay_bound(s, m1, Semimetric(a), t, t) for a in (0.0, 0.25, 0.5)]
    assert reps[0].lhs <= reps[1].lhs <= reps[2].lhs
    assert reps[0].rhs <= reps[1].rhs <= reps[2].rhs


def test_moment_bounds_a_range():
    with pytest.raises(ValueError):
        check_moment_bounds(np.zeros((10, 2)), 1.0, 0.5)


def test_moment_bounds_a_zero(rng):
    reps = check_moment_bounds(rng.standard_normal((500, 3)), 1.0, 0.0)
    assert reps[1].lhs == 1.0 and reps[1].rhs == 1.0 and reps[1].passed


def test_moment_bounds_gaussian_tight(rng):
    x = rng.standard_normal((20_000, 4))
    F = build_gaussian(1.0, NN, 0.0).F
    second, expo, mmu = check_moment_bounds(x, 1.0, 0.2, F)
    assert second.rhs == 1.0 and second.passed
    assert abs(second.lhs - 1.0) < 4 * second.stat_error
    assert expo.rhs == pytest.approx(math.exp(0.2 / 0.6)) and expo.passed
    assert mmu.lhs == pytest.approx(second.lhs, rel=1e-12) and mmu.passed


def test_moment_quadrature_model1(m1_free):
    q = moment_quadrature(m1_free.F, 1.0)
    assert q["x2"] <= 1 / 6
    assert q["exp_ax2"] <= math.exp(0.25)


def test_brascamp_lieb_gaussian_equality():
    bl, pc = verify_brascamp_lieb_1d(build_gaussian(1.0, NN, 0.0).F, observable("x"))
    assert bl.lhs == pytest.approx(1.0, rel=1e-10) and bl.rhs == pytest.approx(1.0, rel=1e-12)
    assert pc.rhs == pytest.approx(1.0, rel=1e-12)
    assert bl.passed and pc.passed and bl.details["equality"] and pc.details["equality"]


def test_brascamp_lieb_model1(m1_free):
    bl, pc = verify_brascamp_lieb_1d(m1_free.F, observable("x"))
    assert bl.lhs == pytest.approx(M1_VAR_X, rel=1e-10)
    assert bl.rhs == pytest.approx(M1_BL_X, rel=1e-10)
    assert pc.rhs == pytest.approx(1 / 6, rel=1e-12)
    assert bl.slack > 0 and pc.slack > 0


def test_kkk_chain_tanh(m1_free):
    bl, kkk = verify_kkk_chain(m1_free.F, observable("tanh"))
    assert bl.lhs == pytest.approx(M1_VAR_TANH, rel=1e-10)
    assert bl.rhs == pytest.approx(M1_BL_TANH, rel=1e-10)
    assert kkk.rhs == pytest.approx(1 / 6, rel=1e-10)
    assert bl.passed and kkk.passed


def test_lsi_constant_is_zero(m1_free):
    rep = verify_lsi_1d(m1_free.F, observable("one"))
    assert abs(rep.lhs) < 1e-14 and rep.rhs == 0.0 and rep.passed


def test_lsi_gaussian_exponential():
    rep = verify_lsi_1d(build_gaussian(1.0, NN, 0.0).F, observable("exp_half"))
    # equality case of the Gaussian inequality: both sides are sqrt(e)/2 on the whole line;
    # exp(x) weights the cut-off tail, so the truncated integrals sit ~1e-10 low
    assert rep.rhs == pytest.approx(math.exp(0.5) / 2, rel=1e-8)
    assert rep.lhs == pytest.approx(math.exp(0.5) / 2, rel=1e-8)
    assert rep.passed


def test_lsi_model1(m1_free):
    rep = verify_lsi_1d(m1_free.F, observable("1+tanh"))
    assert rep.lhs == pytest.approx(M1_ENT_1P_TANH, rel=1e-9)
    assert rep.rhs == pytest.approx(M1_LSI_BOUND_TANH, rel=1e-10)
    assert rep.slack > 0 and rep.passed


def test_contraction_model1(m1):
    t = observable("tanh")
    rep = verify_contraction(m1, t, t.at(1))
    assert rep.lhs == pytest.approx(M1_CONTRACTION_LHS, rel=1e-6)
    assert rep.rhs == pytest.approx((1 + 0.02 * 0.894427191) / math.sqrt(6), rel=1e-6)
    assert rep.passed and rep.slack > 0
    assert rep.details["fd_max_abs_diff"] < 1e-6


def test_contraction_zero_coupling_identity(m1_free):
    # without interaction d/dx1 mu_0(f) = mu_0(phi0) phi1'(x1): LHS = |mu_0(phi0)| delta(phi1)
    t = observable("tanh")
    one = verify_contraction(m1_free, observable("one"), t.at(1))
    assert one.lhs == pytest.approx(one.details["delta_1"], abs=1e-12)
    shifted = verify_contraction(m1_free, observable("1+tanh"), t.at(1))
    assert shifted.lhs == pytest.approx(1 / math.sqrt(6), abs=1e-12)
    assert shifted.details["delta_1"] == pytest.approx(2 / math.sqrt(6), abs=1e-12)


def test_contraction_gaussian():
    t = observable("tanh")
    assert verify_contraction(build_gaussian(1.0, NN, 0.1), t, t.at(1)).passed


def test_battery_deterministic(m1):
    a = [r.to_json() for r in run_battery(m1)]
    b = [r.to_json() for r in run_battery(m1)]
    assert a == b
    assert all(r["pass"] for r in a)


def test_bound_report_json_nulls():
    from latgibbs.analysis import BoundReport
    r = BoundReport("m_mu", 1.0, math.inf)
    js = r.to_json()
    assert js["rhs"] is None and js["slack"] is None and js["pass"] is True
