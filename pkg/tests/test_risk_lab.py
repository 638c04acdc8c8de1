import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptquad.estimators import q_adaptive, q_kstar, unbiased_baseline
from adaptquad.param_spaces import BallSpec, a_theta, single_spike
from adaptquad.risk_lab import (
    DegenerateFit,
    Estimator,
    RiskEstimate,
    bias_variance_ratio,
    fit_slope,
    lemma1_suite,
    lemma2_dominance,
    mc_risk,
    mse_from_moments,
    rate_slope,
    risk_grid,
    run_mc,
    sup_risk,
)
from adaptquad.seq_model import ModelConfig, ThetaVector, excess_mean, simulate

DENSE = BallSpec("Lp", 2.0, 0.125)
EFF = BallSpec("Lp", 2.0, 0.5)


# ---------------------------------------------------------------- RiskEstimate

@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=200))
def test_moment_identity(errors):
    r = RiskEstimate.from_errors(np.array(errors), "t", "e")
    assert r.mse == mse_from_moments(r.mean_error, r.variance, r.reps)
    direct = float(np.mean(np.square(errors)))
    assert r.mse == pytest.approx(direct, rel=1e-9, abs=1e-9)


def test_risk_estimate_fields():
    e = np.array([1.0, 2.0, 3.0, 6.0])
    r = RiskEstimate.from_errors(e, "t", "e")
    assert r.mean_error == 3.0
    assert r.variance == pytest.approx(14 / 3)
    assert r.bias_sq == 9.0
    assert r.se_mse == pytest.approx(np.std(e**2, ddof=1) / 2)
    with pytest.raises(ValueError):
        RiskEstimate.from_errors(np.array([1.0]), "t", "e")


def test_bias_variance_ratio_se_against_bootstrap():
    rng = np.random.default_rng(1)
    e = 0.7 + rng.gamma(2.0, 1.0, size=4000)
    r = RiskEstimate.from_errors(e, "t", "e")
    ratio, se = bias_variance_ratio(r)
    assert ratio == pytest.approx(r.mean_error**2 / r.variance)
    boot = []
    for _ in range(400):
        s = rng.choice(e, e.size)
        boot.append(s.mean() ** 2 / s.var(ddof=1))
    assert se == pytest.approx(np.std(boot), rel=0.2)


# ---------------------------------------------------------------- run_mc wiring

def test_errors_match_direct_estimator_calls():
    n, reps = 128, 5
    fam = [ThetaVector.zero(), ThetaVector([0.3, 0.0, 0.1], label="b")]
    ests = [Estimator("q_kstar", DENSE), "q_adaptive", Estimator("unbiased_baseline", upto=50), "oracle"]
    res = run_mc(ests, fam, ModelConfig(n, seed=4), reps)
    for rep in range(reps):
        for j, th in enumerate(fam):
            obs = simulate(th, ModelConfig(n, seed=4), rep=rep)
            q = float(np.sum(th.coeffs**2))
            q50 = float(np.sum(th.coeffs[:50] ** 2))
            assert res.errors[rep, 0, j] == q_kstar(obs, DENSE).q_hat - q
            assert res.errors[rep, 1, j] == q_adaptive(obs).q_hat - q
            assert res.errors[rep, 2, j] == pytest.approx(unbiased_baseline(obs, 50) - q50, abs=1e-15)
            assert res.errors[rep, 3, j] == 0.0


@pytest.mark.parametrize("chunk", [1000, 7777, 1 << 18])
def test_chunk_size_and_threads_do_not_change_bits(chunk):
    fam = [ThetaVector.zero(), single_spike(DENSE)]
    cfg = ModelConfig(256, seed=10)
    ref = run_mc(["q_adaptive", Estimator("q_kstar", DENSE)], fam, cfg, 40)
    got = run_mc(["q_adaptive", Estimator("q_kstar", DENSE)], fam, cfg, 40, threads=3, chunk=chunk)
    assert got.errors.tobytes() == ref.errors.tobytes()


def test_reproducible_from_recorded_keys():
    cfg = ModelConfig(256, seed=77)
    th = single_spike(DENSE)
    a = mc_risk(Estimator("q_kstar", DENSE), th, cfg, 100)
    b = run_mc([Estimator("q_kstar", DENSE)], [ThetaVector.zero(), th], cfg, 100).risk(a.estimator_id, a.theta_id)
    assert a == b


def test_component_errors_sum_to_total():
    fam = [ThetaVector(np.linspace(0.2, 0.0, 300), label="ramp")]
    ests = ["xi0", Estimator("xi_kstar", DENSE), "xi_tail", Estimator("q_kstar", DENSE)]
    r = run_mc(ests, fam, ModelConfig(512, seed=3), 20)
    e = r.errors[:, :, 0]
    assert np.allclose(e[:, 0] + e[:, 1] + e[:, 2], e[:, 3], rtol=0, atol=1e-14)


def test_mc_risk_and_sup_validation():
    with pytest.raises(ValueError):
        mc_risk("q_adaptive", ThetaVector.zero(), ModelConfig(64), 99)
    with pytest.raises(ValueError):
        run_mc(["q_adaptive"], [ThetaVector.zero(), ThetaVector.zero()], ModelConfig(64), 10)
    with pytest.raises(ValueError):
        Estimator("q_kstar")
    r, tid = sup_risk("q_adaptive", [ThetaVector.zero(), ThetaVector([0.5], label="s")], ModelConfig(64), 100)
    assert tid in ("zero", "s") and r.theta_id == tid


# ---------------------------------------------------------------- slopes

def test_fit_slope_recovers_power_law():
    ns = [2**k for k in range(8, 13)]
    fit = fit_slope(ns, [3.0 * n**-0.75 for n in ns])
    assert fit.slope == pytest.approx(-0.75, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    with pytest.raises(DegenerateFit):
        fit_slope(ns, [1.0, 0.0, 1.0, 1.0, 1.0])


def test_grid_validation():
    with pytest.raises(ValueError):
        risk_grid(["q_adaptive"], lambda b, n: [ThetaVector.zero()], DENSE, [64, 128, 256], 10)
    with pytest.raises(ValueError):
        risk_grid(["q_adaptive"], lambda b, n: [ThetaVector.zero()], DENSE, [64, 128, 256, 1024], 10)


def test_rate_slope_reuses_grid_and_annotates_target():
    ns = [64, 128, 256, 512]
    fam = lambda ball, n: [ThetaVector.zero(), single_spike(ball)]
    est = Estimator("q_kstar", DENSE)
    grid = risk_grid([est, "q_adaptive"], fam, DENSE, ns, 30, seed=1)
    a = rate_slope(est.id, fam, DENSE, ns, 30, seed=1, grid=grid)
    b = rate_slope(est, fam, DENSE, ns, 30, seed=1)
    assert a == b
    assert a.target_slope == pytest.approx(-2 / 3)
    assert len(a.sup_theta) == 4


# ---------------------------------------------------------------- efficiency regime components

def test_component_mse_in_efficient_regime():
    n, reps = 2**13, 600
    ests = ["xi0", Estimator("xi_kstar", EFF), "xi_tail"]
    res = run_mc(ests, [ThetaVector([1.0], label="e1")], ModelConfig(n, seed=0), reps)
    m0 = res.risk("xi0", "e1").mse
    target = 4 * a_theta(EFF) / n
    assert m0 == pytest.approx(target, rel=0.15)
    assert res.risk(ests[1], "e1").mse < 0.1 * m0
    assert res.risk("xi_tail", "e1").mse < 0.1 * m0


# ---------------------------------------------------------------- positive-part moments

def test_lemma1_default_grid_passes():
    rep = lemma1_suite(reps=20_000)
    assert rep.passed, rep.failures
    assert {r["check"] for r in rep.rows} >= {"mean_vs_quadrature", "mean_bound", "variance_bound",
                                             "mc_variance_bound"}


def test_lemma1_pinpoints_wrong_mean():
    bad = lambda t: excess_mean(t) * (1.01 if t == 8 else 1.0)
    rep = lemma1_suite(reps=2_000, mu_fn=bad)
    assert not rep.passed
    assert {r["tau"] for r in rep.failures} == {8}


# ---------------------------------------------------------------- dominance

def test_dominance_spike_vs_itself_is_trivial():
    rep = lemma2_dominance(reps=100_000, alternatives=[(1.0, 0.0)])
    assert rep.passed
    assert all(r["diff"] == 0.0 for r in rep.rows)


def test_dominance_lambda_zero_gives_equal_distributions():
    rep = lemma2_dominance(lam=0.0, reps=100_000)
    assert rep.passed


def test_dominance_m3():
    rep = lemma2_dominance(m=3, reps=100_000)
    assert rep.passed, rep.failures
    assert len({tuple(r["allocation"]) for r in rep.rows}) >= 3


def test_dominance_rejects_small_reps():
    with pytest.raises(ValueError):
        lemma2_dominance(reps=1000)
