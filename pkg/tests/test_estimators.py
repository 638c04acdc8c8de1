import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from adaptquad.estimators import (
    EstimateReport,
    block_stats,
    k_star,
    q_adaptive,
    q_kstar,
    read_fixture,
    report_adaptive,
    unbiased_baseline,
    write_fixture,
    xi0_hat,
    xi_k_hat,
    xi_tail_hat,
)
from adaptquad.param_spaces import BallSpec
from adaptquad.risk_lab import Estimator, run_mc
from adaptquad.seq_model import (
    ModelConfig,
    Observation,
    ThetaVector,
    block_scheme,
    gamma,
    lambda_k,
    mu_ki,
    observation_length,
    omega_k,
    replication_rng,
    simulate,
    tau,
)

from conftest import straight_line_adaptive, straight_line_stats

DENSE = BallSpec("Lp", 2.0, 0.125)
SPARSE = BallSpec("Lp", 1.5, 0.3)


def zeros(n, extra_blocks=2):
    s = block_scheme(n)
    return Observation(np.zeros(observation_length(s, 0, extra_blocks)), n)


def random_obs(n, seed, rep=0, theta=None):
    theta = theta if theta is not None else ThetaVector(np.linspace(0.25, 0.01, 30))
    return simulate(theta, ModelConfig(n, seed=seed), rep=rep)


# ---------------------------------------------------------------- xi0

def test_xi0_examples():
    n = 1024
    m0 = block_scheme(n).m0
    assert xi0_hat(zeros(n)) == pytest.approx(-m0 / n, rel=1e-14)
    y = np.zeros(observation_length(block_scheme(n), 0, 2))
    y[:m0] = 1 / math.sqrt(n)
    assert abs(xi0_hat(Observation(y, n))) < 1e-15


def test_xi0_null_moments():
    n, reps = 1024, 100_000
    m0 = block_scheme(n).m0
    z = np.random.default_rng(7).standard_normal((reps, m0)) / math.sqrt(n)
    vals = np.array([xi0_hat(Observation(row, n)) for row in z])
    se = vals.std(ddof=1) / math.sqrt(reps)
    assert abs(vals.mean()) < 4 * se
    assert vals.var(ddof=1) == pytest.approx(2 * m0 / n**2, rel=0.05)


def test_short_observation_rejected():
    n = 1024
    with pytest.raises(ValueError):
        xi0_hat(Observation(np.zeros(5), n))
    with pytest.raises(ValueError):
        xi_k_hat(Observation(np.zeros(100), n), 1)


# ---------------------------------------------------------------- xi_k

def test_xi_k_on_zero_observation():
    n = 1024
    s = block_scheme(n)
    obs = zeros(n)
    for k in range(1, s.J):
        expect = 0.0
        for i in range(s.block_end(k) + 1, s.mJ + 1):
            expect -= mu_ki(k, i, s)
        assert xi_k_hat(obs, k) == pytest.approx(expect, rel=1e-12)
        assert xi_k_hat(obs, k) < 0
    assert xi_k_hat(obs, s.J) == 0.0


def test_xi_k_single_active_term():
    n = 1024
    s = block_scheme(n)
    k = 3
    i0 = s.block_end(k) + 5
    t = 0.4
    y = np.zeros(observation_length(s, 0, 2))
    y[i0 - 1] = t
    expect = (t * t - tau(k, i0, s) / n) - sum(mu_ki(k, i, s) for i in range(s.block_end(k) + 1, s.mJ + 1))
    assert xi_k_hat(Observation(y, n), k) == pytest.approx(expect, rel=1e-12)


def test_xi_k_rejects_out_of_range():
    obs = zeros(256)
    with pytest.raises(ValueError):
        xi_k_hat(obs, 0)
    with pytest.raises(ValueError):
        xi_k_hat(obs, block_scheme(256).J + 1)


@pytest.mark.parametrize("n", [20, 64, 256, 1000])
def test_all_components_match_straight_line_oracle(n):
    for rep in range(3):
        obs = random_obs(n, seed=3, rep=rep)
        st_ = block_stats(obs)
        ref = straight_line_stats(obs.y, n)
        assert st_.xi0 == ref["xi0"]
        assert st_.tail == ref["tail"]
        for k in range(1, st_.scheme.J + 1):
            assert st_.xi_k(k) == ref["xi"][k]


def test_kstar_mid_term_is_bit_identical_to_explicit_formula():
    # second implementation of the oracle-tuned mid term, term by term
    n = 512
    s = block_scheme(n)
    k = k_star(DENSE, s)
    for rep in range(100):
        obs = random_obs(n, seed=41, rep=rep)
        y = [float(v) for v in obs.y]
        block = 0.0
        for i in range(s.m0 + 1, s.block_end(k) + 1):
            block += y[i - 1] * y[i - 1]
        mid = max(block - lambda_k(k, s), 0.0)
        extra = 0.0
        for i in range(s.block_end(k) + 1, s.mJ + 1):
            extra += max(y[i - 1] * y[i - 1] - tau(k, i, s) / n, 0.0) - mu_ki(k, i, s)
        mid = mid + (extra if k < s.J else 0.0)
        rep_ = q_kstar(obs, DENSE)
        assert rep_.xi_mid == mid
        assert rep_.xi_mid_kind == "xi_mid_oracle"


# ---------------------------------------------------------------- tail

def test_tail_examples():
    n = 1024
    s = block_scheme(n)
    assert xi_tail_hat(zeros(n)) == 0.0
    y = np.zeros(observation_length(s, 0, 2))
    i0 = s.mJ + 100
    y[i0 - 1] = 0.3
    assert xi_tail_hat(Observation(y, n)) == pytest.approx(0.09 - gamma(i0, s) * math.log(n) / n, rel=1e-12)


def test_tail_null_mean_below_bound():
    # 2000 replications; each tail coordinate exceeds its threshold with probability ~1e-7
    n = 1024
    s = block_scheme(n)
    length = observation_length(s, 0, 2)
    bound = 0.0
    for i in (s.mJ + 1, 2 * s.mJ + 1):
        g = gamma(i, s)
        width = i - 1
        bound += width * 4 / (math.sqrt(2 * math.pi * g * math.log(n)) * n ** (1 + g / 2))
    vals = []
    for rep in range(2000):
        z = replication_rng(99, rep).standard_normal(length - s.mJ) / math.sqrt(n)
        y = np.concatenate([np.zeros(s.mJ), z])
        vals.append(xi_tail_hat(Observation(y, n)))
    vals = np.array(vals)
    assert vals.min() >= 0
    assert vals.mean() <= bound + 3 * vals.std(ddof=1) / math.sqrt(vals.size)


# ---------------------------------------------------------------- k*

def test_k_star_examples():
    s = block_scheme(1024)
    assert k_star(BallSpec("Lp", 2, 0.125), s) == 7
    assert k_star(BallSpec("Lp", 2, 1.0), s) == 1
    assert k_star(BallSpec("Lp", 2, 0.125, M=2), s) == 7
    # second term of the bound for p=2, alpha=1/8 is 2839.11, bracketed by m_7 and m_8
    bound = 1024 ** (4 / 3) * math.log(1024) ** (-2 / 3)
    assert bound == pytest.approx(2839.1149, abs=1e-3)
    assert s.block_end(7) <= bound < s.block_end(8)


@given(st.sampled_from([64, 512, 1024, 4096, 2**14, 2**17]),
       st.sampled_from([(2, 0.125), (1.5, 0.3), (2, 1.0), (3, 0.25), (1.2, 0.6)]),
       st.floats(0.1, 10))
def test_k_star_is_largest_feasible_and_M_free(n, pa, M):
    s = block_scheme(n)
    ball = BallSpec("Lp", *pa, M=M)
    k = k_star(ball, s)
    e = 1 + 2 * ball.p_star * ball.s_star
    bound = max(2 * s.m0, n ** (ball.p_star / e) * math.log(n) ** (-1 / e))
    assert 1 <= k <= s.J
    assert s.block_end(k) <= bound
    if k < s.J:
        assert s.block_end(k + 1) > bound
    assert k == k_star(BallSpec("Lp", *pa), s)


# ---------------------------------------------------------------- q_kstar / q_adaptive

def test_q_kstar_zero_bias_closed_form():
    n = 1024
    s = block_scheme(n)
    k = k_star(DENSE, s)
    expect = -s.m0 / n - sum(mu_ki(k, i, s) for i in range(s.block_end(k) + 1, s.mJ + 1))
    r = q_kstar(zeros(n), DENSE)
    assert r.q_hat == pytest.approx(expect, rel=1e-12)
    assert r.k_star == k


def test_q_adaptive_matches_independent_script():
    n = 1024
    obs = simulate(ThetaVector.zero(), ModelConfig(n, seed=2024))
    q, k, per_k = straight_line_adaptive(obs.y, n)
    r = q_adaptive(obs)
    assert r.q_hat == q
    assert r.argmax_k == k
    assert r.per_k_penalized == per_k


@pytest.mark.parametrize("n", [64, 1024])
def test_adaptive_two_forms_bit_identical(n):
    s = block_scheme(n)
    for rep in range(100):
        obs = random_obs(n, seed=77, rep=rep)
        st_ = block_stats(obs)
        r = report_adaptive(st_)
        mid = max(st_.xi_k(k) - omega_k(k, s) for k in range(1, s.J + 1))
        assert r.q_hat == (st_.xi0 + mid) + st_.tail
        assert r.xi_mid == mid
        assert len(r.per_k_penalized) == s.J
        assert r.q_hat == max(r.per_k_penalized)


@given(st.integers(0, 10_000), st.sampled_from([32, 100, 512]), st.floats(0, 2))
def test_decomposition_and_dominance(rep, n, scale):
    theta = ThetaVector(scale * np.linspace(1, 0, 20) / math.sqrt(n) * 3)
    obs = simulate(theta, ModelConfig(n, seed=1), rep=rep)
    s = block_scheme(n)
    ra = q_adaptive(obs)
    rk = q_kstar(obs, SPARSE)
    for r in (ra, rk):
        assert r.q_hat == (r.xi0 + r.xi_mid) + r.xi_tail
    for k in range(1, s.J + 1):
        assert ra.q_hat >= (ra.xi0 + xi_k_hat(obs, k)) + ra.xi_tail - omega_k(k, s) - 1e-15
    assert ra.xi_tail >= 0


def test_tie_goes_to_smallest_k():
    obs = zeros(1024)
    r = q_adaptive(obs, penalty_const=0.0)
    J = block_scheme(1024).J
    # all y = 0: xi_J = 0 exceeds every xi_k < 0 for k < J
    assert r.argmax_k == J
    st_ = block_stats(obs)
    flat = st_.__class__(st_.scheme, st_.length, st_.xi0, np.zeros_like(st_.prefix),
                         np.zeros_like(st_.thr_acc), st_.tail)
    assert report_adaptive(flat, penalty_const=0.0).argmax_k == 1


def test_clip_keeps_raw_value():
    obs = zeros(1024)
    r = q_adaptive(obs, clip=True)
    assert r.q_raw < 0 and r.q_hat == 0.0 and r.clipped
    r2 = q_kstar(obs, DENSE, clip=True)
    assert r2.q_hat == 0.0 and r2.q_raw < 0


def test_scheme_mismatch_rejected():
    with pytest.raises(ValueError):
        q_adaptive(zeros(1024), scheme=block_scheme(512))


def test_null_distribution_depends_only_on_the_stream():
    n = 64
    reps = 10_000
    a = run_mc(["q_adaptive"], [ThetaVector.zero()], ModelConfig(n, seed=1), reps).errors[:, 0, 0]
    b = run_mc(["q_adaptive"], [ThetaVector.zero()], ModelConfig(n, seed=2), reps).errors[:, 0, 0]
    res = stats.ks_2samp(a, b)
    crit = 1.628 * math.sqrt(2 / reps)
    assert res.statistic < crit


# ---------------------------------------------------------------- baseline

def test_unbiased_baseline_examples():
    n = 1024
    obs = zeros(n)
    assert unbiased_baseline(obs, 500) == pytest.approx(-500 / n, rel=1e-12)
    o = random_obs(n, 5)
    assert unbiased_baseline(o, block_scheme(n).m0) == xi0_hat(o)
    with pytest.raises(ValueError):
        unbiased_baseline(obs, 0)


def test_unbiased_baseline_null_variance():
    n, upto, reps = 1024, 40, 100_000
    z = np.random.default_rng(3).standard_normal((reps, upto)) / math.sqrt(n)
    vals = np.array([unbiased_baseline(Observation(row, n), upto) for row in z])
    assert vals.var(ddof=1) == pytest.approx(2 * upto / n**2, rel=0.05)


# ---------------------------------------------------------------- serialization

def test_report_json_roundtrip():
    r = q_adaptive(random_obs(256, 4))
    back = EstimateReport.from_json(r.to_json())
    assert back == r
    assert set(json.loads(r.to_json())) >= {"q_hat", "xi0", "xi_mid", "xi_tail", "per_k_penalized", "argmax_k"}


def test_fixture_regression(tmp_path):
    obs = simulate(ThetaVector.zero(), ModelConfig(128, seed=8))
    r = q_adaptive(obs)
    path = tmp_path / "fx.json"
    write_fixture(path, obs, r, penalty_const=6)
    obs2, r2, params = read_fixture(path)
    assert np.array_equal(obs2.y, obs.y)
    assert q_adaptive(obs2) == r2
    assert params == {"penalty_const": 6}


def test_efficient_single_spike_mse():
    n = 4096
    ball = BallSpec("Lp", 2.0, 0.5)
    res = run_mc([Estimator("q_kstar", ball)], [ThetaVector([1.0], label="e1")], ModelConfig(n, seed=12), 400)
    nmse = n * res.risk(Estimator("q_kstar", ball), "e1").mse
    assert 2.5 < nmse < 6.0
