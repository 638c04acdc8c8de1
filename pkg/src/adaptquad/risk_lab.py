"""Monte Carlo risk of the estimators and numerical checks of the tail lemmas.

Replication ``r`` under master seed ``s`` always draws its noise from the
substream ``(s, r)``, so results do not depend on how replications are
scheduled across threads.  Within a replication every member of a
parameter family sees the same noise vector (common random numbers), and
noise is generated and consumed in chunks so that million-coordinate
observations never have to be held in memory at once.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, stats

from .accumulate import make_accumulator
from .estimators import k_star, report_adaptive, stats_from_result
from .param_spaces import BallSpec
from .rates import minimax_rate
from .seq_model import (
    PENALTY_CONST,
    ModelConfig,
    ThetaVector,
    block_scheme,
    excess_mean,
    excess_variance,
    observation_length,
    replication_rng,
)

__all__ = [
    "Estimator",
    "RiskEstimate",
    "MCResult",
    "SlopeFit",
    "CheckReport",
    "DegenerateFit",
    "NumericError",
    "ESTIMATOR_NAMES",
    "run_mc",
    "mc_risk",
    "sup_risk",
    "risk_grid",
    "fit_slope",
    "rate_slope",
    "bias_variance_ratio",
    "lemma1_suite",
    "lemma2_dominance",
    "excess_mean_quad",
    "excess_variance_quad",
    "DEFAULT_CHUNK",
]

DEFAULT_CHUNK = 1 << 18

ESTIMATOR_NAMES = ("q_kstar", "q_adaptive", "unbiased_baseline", "xi0", "xi_kstar", "xi_tail", "oracle")
_NEEDS_STATS = {"q_kstar", "q_adaptive", "xi0", "xi_kstar", "xi_tail"}
_NEEDS_BALL = {"q_kstar", "xi_kstar"}


class DegenerateFit(ValueError):
    """A log-log fit was requested on non-positive risks."""


class NumericError(ArithmeticError):
    """An estimator produced a non-finite value."""


@dataclass(frozen=True)
class Estimator:
    """An estimator name with the knobs it needs.

    ``q_kstar`` and ``xi_kstar`` need ``ball``; ``unbiased_baseline`` sums up
    to ``upto`` (the sample size when None).  ``xi0``, ``xi_kstar`` and
    ``xi_tail`` are the three components of ``q_kstar``, each scored
    against its own part of ``Q(theta)``.  ``oracle`` returns ``Q(theta)``
    itself.
    """

    name: str
    ball: BallSpec | None = None
    penalty_const: float = PENALTY_CONST
    clip: bool = False
    upto: int | None = None

    def __post_init__(self):
        if self.name not in ESTIMATOR_NAMES:
            raise ValueError(f"unknown estimator {self.name!r}; expected one of {ESTIMATOR_NAMES}")
        if self.name in _NEEDS_BALL and self.ball is None:
            raise ValueError(f"{self.name} needs a ball")

    @property
    def id(self) -> str:
        extra = []
        if self.name in _NEEDS_BALL:
            extra.append(self.ball.describe())
        if self.name == "q_adaptive" and self.penalty_const != PENALTY_CONST:
            extra.append(f"c={self.penalty_const:g}")
        if self.name == "unbiased_baseline" and self.upto is not None:
            extra.append(f"upto={self.upto}")
        if self.clip:
            extra.append("clip")
        return self.name + (f"[{';'.join(extra)}]" if extra else "")


def _as_estimator(e) -> Estimator:
    return e if isinstance(e, Estimator) else Estimator(str(e))


def _est_id(e) -> str:
    # strings are taken as ids, so qualified ids such as "q_kstar[...]" work too
    return e.id if isinstance(e, Estimator) else str(e)


@dataclass(frozen=True)
class RiskEstimate:
    """Moments of the error ``Q_hat - Q(theta)`` over replications.

    ``variance`` uses the ``reps - 1`` denominator and
    ``mse = mean_error**2 + variance * (reps - 1) / reps`` exactly, which is
    the sample mean of the squared errors up to rounding.  ``se_mse`` is the
    standard error of that mean, from the sample variance of the squared
    errors.  ``m3`` and ``m4`` are the central third and fourth moments.
    """

    mean_error: float
    variance: float
    mse: float
    se_mse: float
    reps: int
    theta_id: str
    estimator_id: str
    m3: float = 0.0
    m4: float = 0.0
    n: int | None = None
    seed: int | None = None

    @classmethod
    def from_errors(cls, e: np.ndarray, theta_id: str, estimator_id: str, n=None, seed=None) -> "RiskEstimate":
        e = np.asarray(e, dtype=np.float64)
        R = e.size
        if R < 2:
            raise ValueError("need at least two replications")
        mean = float(np.mean(e))
        d = e - mean
        var = float(np.dot(d, d) / (R - 1))
        mse = mse_from_moments(mean, var, R)
        e2 = e * e
        se = float(np.std(e2, ddof=1) / math.sqrt(R))
        return cls(mean, var, mse, se, R, theta_id, estimator_id,
                   float(np.mean(d**3)), float(np.mean(d**4)), n, seed)

    @property
    def bias_sq(self) -> float:
        return self.mean_error**2

    def to_dict(self) -> dict:
        return asdict(self)


def mse_from_moments(mean: float, variance: float, reps: int) -> float:
    return mean * mean + variance * ((reps - 1) / reps)


def bias_variance_ratio(r: RiskEstimate) -> tuple[float, float]:
    """Squared bias over variance with a delta-method standard error."""
    b, v, R = r.mean_error, r.variance, r.reps
    if v <= 0:
        raise ValueError("variance is zero; ratio undefined")
    ratio = b * b / v
    db, dv = 2 * b / v, -b * b / (v * v)
    var = (db * db * v + dv * dv * (r.m4 - v * v) + 2 * db * dv * r.m3) / R
    return ratio, math.sqrt(max(var, 0.0))


class _PrefixSum:
    # left-to-right sum of y_i**2 - 1/n over i <= upto, fed in chunks
    def __init__(self, upto, inv_n):
        self.upto, self.inv_n, self.acc, self.pos = int(upto), inv_n, 0.0, 0

    def feed(self, y):
        take = min(y.size, self.upto - self.pos)
        if take > 0:
            seg = y[:take]
            buf = np.empty(take + 1)
            buf[0] = self.acc
            buf[1:] = seg * seg - self.inv_n
            self.acc = float(np.cumsum(buf)[-1])
        self.pos += y.size


@dataclass
class _Member:
    theta: ThetaVector
    length: int
    targets: dict


def _targets(theta: ThetaVector, scheme, uptos) -> dict:
    sq = theta.coeffs * theta.coeffs
    m0, mJ = scheme.m0, scheme.mJ
    out = {"full": math.fsum(sq), "xi0": math.fsum(sq[:m0]),
           "mid": math.fsum(sq[m0:mJ]), "tail": math.fsum(sq[mJ:])}
    out.update({u: math.fsum(sq[:u]) for u in uptos})
    return out


@dataclass
class MCResult:
    """Per-replication errors for every (estimator, family member) pair."""

    estimator_ids: list
    theta_ids: list
    n: int
    seed: int
    reps: int
    errors: np.ndarray  # shape (reps, n_estimators, n_members)
    meta: dict = field(default_factory=dict)

    def _idx(self, estimator, theta_id):
        return self.estimator_ids.index(_est_id(estimator)), self.theta_ids.index(theta_id)

    def risk(self, estimator, theta_id: str) -> RiskEstimate:
        i, j = self._idx(estimator, theta_id)
        return RiskEstimate.from_errors(self.errors[:, i, j], theta_id, self.estimator_ids[i], self.n, self.seed)

    def risks(self, estimator) -> list[RiskEstimate]:
        return [self.risk(estimator, t) for t in self.theta_ids]

    def sup(self, estimator) -> tuple[RiskEstimate, str]:
        """Largest MSE over the family; equal values resolve to the smallest theta id."""
        best = None
        for r in sorted(self.risks(estimator), key=lambda r: r.theta_id):
            if best is None or r.mse > best.mse:
                best = r
        return best, best.theta_id


def _unique_ids(family):
    ids = [t.label for t in family]
    if len(set(ids)) != len(ids):
        raise ValueError(f"family labels must be unique, got {ids}")
    return ids


def run_mc(estimators: Sequence, family: Sequence[ThetaVector], cfg: ModelConfig, reps: int,
           threads: int = 1, chunk: int = DEFAULT_CHUNK, backend: str | None = None) -> MCResult:
    """Simulate ``reps`` replications and score every estimator on every member.

    Parameters
    ----------
    estimators : sequence of Estimator or str
    family : sequence of ThetaVector
        Labels identify the members and must be unique.
    cfg : ModelConfig
        Sample size, master seed and simulated tail length.
    threads : int
        Worker threads; the result is identical for every value.
    """
    ests = [_as_estimator(e) for e in estimators]
    if not ests:
        raise ValueError("no estimators given")
    if not family:
        raise ValueError("family is empty")
    if reps < 2:
        raise ValueError("reps must be at least 2")
    theta_ids = _unique_ids(family)
    n = cfg.n
    scheme = block_scheme(n)
    uptos = {e.id: (e.upto or n) for e in ests if e.name == "unbiased_baseline"}
    upto = max(uptos.values(), default=0)
    need_stats = any(e.name in _NEEDS_STATS for e in ests)
    kstars = {e.id: k_star(e.ball, scheme) for e in ests if e.name in _NEEDS_BALL}

    members = []
    for th in family:
        length = observation_length(scheme, th.support_len, cfg.tail_blocks) if need_stats else 0
        members.append(_Member(th, max(length, upto), _targets(th, scheme, set(uptos.values()))))
    total = max(m.length for m in members)
    sqrt_n = math.sqrt(n)
    inv_n = 1.0 / n
    errors = np.empty((reps, len(ests), len(members)))

    def one_rep(rep):
        rng = replication_rng(cfg.seed, rep)
        accs = [make_accumulator(scheme, m.length, backend=backend) if need_stats else None for m in members]
        bases = {u: [_PrefixSum(u, inv_n) for _ in members] for u in set(uptos.values())}
        lo = 0
        while lo < total:
            hi = min(lo + chunk, total)
            yn = rng.standard_normal(hi - lo)
            yn /= sqrt_n
            for j, m in enumerate(members):
                if lo >= m.length:
                    continue
                mh = min(hi, m.length)
                s = m.theta.support_len
                if lo < s:
                    y = yn[: mh - lo].copy()
                    top = min(s, mh)
                    y[: top - lo] += m.theta.coeffs[lo:top]
                else:
                    y = yn[: mh - lo]
                if accs[j] is not None:
                    accs[j].feed(y)
                for lst in bases.values():
                    lst[j].feed(y)
            lo = hi
        for j, m in enumerate(members):
            st = stats_from_result(scheme, accs[j].result()) if need_stats else None
            t = m.targets
            for i, e in enumerate(ests):
                if e.name == "q_kstar":
                    k = kstars[e.id]
                    v = (st.xi0 + st.xi_k(k)) + st.tail
                    if e.clip:
                        v = max(v, 0.0)
                    err = v - t["full"]
                elif e.name == "q_adaptive":
                    r = report_adaptive(st, e.penalty_const, e.clip)
                    err = r.q_hat - t["full"]
                elif e.name == "xi0":
                    err = st.xi0 - t["xi0"]
                elif e.name == "xi_kstar":
                    err = st.xi_k(kstars[e.id]) - t["mid"]
                elif e.name == "xi_tail":
                    err = st.tail - t["tail"]
                elif e.name == "unbiased_baseline":
                    u = uptos[e.id]
                    err = bases[u][j].acc - t[u]
                else:
                    err = 0.0
                if not math.isfinite(err):
                    raise NumericError(f"{e.id} returned a non-finite value at rep {rep} for {m.theta.label}")
                errors[rep, i, j] = err

    def run_range(rng_):
        for rep in rng_:
            one_rep(rep)

    threads = max(1, int(threads))
    if threads == 1:
        run_range(range(reps))
    else:
        step = math.ceil(reps / threads)
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(run_range, [range(a, min(a + step, reps)) for a in range(0, reps, step)]))
    return MCResult([e.id for e in ests], theta_ids, n, cfg.seed, reps, errors,
                    meta={"kstar": kstars, "length": total, "tail_blocks": cfg.tail_blocks})


def mc_risk(estimator, theta: ThetaVector, cfg: ModelConfig, reps: int, threads: int = 1) -> RiskEstimate:
    """MSE of one estimator at one parameter."""
    if reps < 100:
        raise ValueError("mc_risk needs reps >= 100")
    est = _as_estimator(estimator)
    return run_mc([est], [theta], cfg, reps, threads).risk(est.id, theta.label)


def sup_risk(estimator, family: Sequence[ThetaVector], cfg: ModelConfig, reps: int,
             threads: int = 1) -> tuple[RiskEstimate, str]:
    """Largest MSE over a finite family and the member attaining it."""
    est = _as_estimator(estimator)
    return run_mc([est], list(family), cfg, reps, threads).sup(est.id)


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through ``(ln n, ln mse)``."""

    n_grid: tuple
    log_mse: tuple
    slope: float
    intercept: float
    r_squared: float
    estimator_id: str = ""
    target_slope: float | None = None
    sup_theta: tuple = ()

    def to_dict(self) -> dict:
        return asdict(self)


def _check_grid(n_grid):
    ns = [int(v) for v in n_grid]
    if len(ns) < 4:
        raise ValueError("n_grid needs at least 4 points")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_grid must be increasing")
    ratios = [b / a for a, b in zip(ns, ns[1:])]
    if max(ratios) / min(ratios) > 1.0 + 1e-9:
        raise ValueError("n_grid must be geometrically spaced")
    return ns


def fit_slope(n_grid, mses, estimator_id: str = "", target_slope=None, sup_theta=()) -> SlopeFit:
    mses = np.asarray(mses, dtype=np.float64)
    if np.any(~np.isfinite(mses)) or np.any(mses <= 0.0):
        raise DegenerateFit("every mse must be positive and finite for a log-log fit")
    x = np.log(np.asarray(n_grid, dtype=np.float64))
    y = np.log(mses)
    lr = stats.linregress(x, y)
    return SlopeFit(tuple(int(v) for v in n_grid), tuple(float(v) for v in y), float(lr.slope),
                    float(lr.intercept), float(lr.rvalue**2), estimator_id, target_slope, tuple(sup_theta))


def risk_grid(estimators: Sequence, family_builder: Callable[[BallSpec, int], list], ball: BallSpec,
              n_grid, reps: int, seed: int = 0, threads: int = 1, tail_blocks: int = 2) -> dict:
    """``run_mc`` at every ``n`` of a geometric grid; returns ``{n: MCResult}``."""
    ns = _check_grid(n_grid)
    return {n: run_mc(estimators, family_builder(ball, n), ModelConfig(n, seed, tail_blocks), reps, threads)
            for n in ns}


def rate_slope(estimator, family_builder, ball: BallSpec, n_grid, reps: int, seed: int = 0,
               threads: int = 1, tail_blocks: int = 2, grid: dict | None = None) -> SlopeFit:
    """Fitted exponent of the sup-risk against ``n``, with ``-r`` as the target.

    ``grid`` reuses an earlier :func:`risk_grid` result instead of simulating.
    """
    eid = _est_id(estimator)
    if grid is None:
        grid = risk_grid([_as_estimator(estimator)], family_builder, ball, n_grid, reps, seed, threads, tail_blocks)
    ns = _check_grid(n_grid)
    sups = [grid[n].sup(eid) for n in ns]
    return fit_slope(ns, [r.mse for r, _ in sups], eid, -minimax_rate(ball).r, [t for _, t in sups])


# ---------------------------------------------------------------------------
# numerical checks of the positive-part moment bounds and the dominance lemma


@dataclass
class CheckReport:
    """Outcome of a numerical check suite; ``rows`` hold one entry per check."""

    name: str
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.rows)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r["passed"]]

    def add(self, **row):
        row["passed"] = bool(row["passed"])
        self.rows.append(row)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "rows": self.rows}


def _phi(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def excess_mean_quad(t: float) -> float:
    """``E (Z**2 - t)_+`` by adaptive quadrature, substituting ``z = sqrt(t) + u``."""
    a = math.sqrt(t)
    f = lambda u: ((a + u) ** 2 - t) * math.exp(-0.5 * (a + u) ** 2)
    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return 2.0 * val / math.sqrt(2.0 * math.pi)


def excess_variance_quad(t: float) -> float:
    a = math.sqrt(t)
    f = lambda u: ((a + u) ** 2 - t) ** 2 * math.exp(-0.5 * (a + u) ** 2)
    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return 2.0 * val / math.sqrt(2.0 * math.pi) - excess_mean_quad(t) ** 2


def _excess_mean_shifted_quad(t: float, a: float) -> float:
    """``E ((a + Z)**2 - t)_+`` by quadrature over the two tails ``|a + z| > sqrt(t)``."""
    r = math.sqrt(t)
    f = lambda z: ((a + z) ** 2 - t) * _phi(z)
    hi, _ = integrate.quad(f, r - a, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    lo, _ = integrate.quad(f, -np.inf, -r - a, epsabs=0.0, epsrel=1e-12, limit=200)
    return hi + lo


def lemma1_suite(tau_grid=(1, 2, 4, 8, 16, 32), reps: int = 100_000, seed: int = 0, n: float = 100.0,
                 theta_grid=(0.0, 0.5, 1.0, 2.0, 4.0), mu_fn: Callable[[float], float] = excess_mean,
                 quad_rtol: float = 1e-10, n_se: float = 3.0) -> CheckReport:
    """Positive-part moment checks for ``X ~ N(theta, 1/n)`` at each threshold ``tau``.

    * ``mu_fn(tau)`` against quadrature, relative tolerance ``quad_rtol``;
    * ``0 < mu_fn(tau)/n <= 4 / (sqrt(2 pi) n sqrt(tau) exp(tau/2))``;
    * the exact ``Var (Z**2 - tau)_+`` under
      ``(16 tau**-0.5 - 9 tau**-1.5 + 9 tau**-2.5) phi(sqrt(tau))``;
    * the Monte Carlo variance of ``(X**2 - tau/n)_+`` at each
      ``theta = theta_grid[j] / sqrt(n)`` under
      ``6 theta**2/n + (4 sqrt(tau) + 18) / (n**2 exp(tau/2))`` within
      ``n_se`` standard errors;
    * the bias of the centred term, by quadrature, under
      ``min(2 tau/n, theta**2)``.

    ``mu_fn`` is a hook: a wrong formula must make the suite fail at the
    offending ``tau``.
    """
    rep = CheckReport("positive-part moments")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(0x1E1,)))
    z = rng.standard_normal(int(reps))
    for tau in tau_grid:
        tau = float(tau)
        if not 1.0 <= tau <= 40.0:
            raise ValueError(f"tau must lie in [1, 40], got {tau}")
        g, gq = mu_fn(tau), excess_mean_quad(tau)
        rel = abs(g - gq) / gq
        rep.add(check="mean_vs_quadrature", tau=tau, value=g, bound=gq, rel_err=rel, passed=rel <= quad_rtol)
        bound = 4.0 / (math.sqrt(2.0 * math.pi) * math.sqrt(tau) * math.exp(tau / 2.0))
        rep.add(check="mean_bound", tau=tau, value=g, bound=bound, passed=0.0 < g <= bound)
        v = excess_variance(tau)
        vq = excess_variance_quad(tau)
        vb = (16 * tau**-0.5 - 9 * tau**-1.5 + 9 * tau**-2.5) * _phi(math.sqrt(tau))
        rep.add(check="variance_vs_quadrature", tau=tau, value=v, bound=vq,
                rel_err=abs(v - vq) / vq, passed=abs(v - vq) <= quad_rtol * vq)
        rep.add(check="variance_bound", tau=tau, value=v, bound=vb, passed=v <= vb)
        mu = mu_fn(tau) / n
        for th_unit in theta_grid:
            th = th_unit / math.sqrt(n)
            x = th + z / math.sqrt(n)
            xi = np.maximum(x * x - tau / n, 0.0) - mu
            R = xi.size
            m = float(np.mean(xi))
            d = xi - m
            var = float(np.dot(d, d) / (R - 1))
            se_var = math.sqrt(max(float(np.mean(d**4)) - var * var, 0.0) / R)
            vbound = 6 * th * th / n + (4 * math.sqrt(tau) + 18) / (n * n * math.exp(tau / 2))
            rep.add(check="mc_variance_bound", tau=tau, theta=th, value=var, bound=vbound, se=se_var,
                    passed=var <= vbound + n_se * se_var)
            bias = _excess_mean_shifted_quad(tau, th_unit) / n - mu - th * th
            bbound = min(2 * tau / n, th * th)
            rep.add(check="bias_bound", tau=tau, theta=th, value=bias, bound=bbound,
                    passed=abs(bias) <= bbound + 1e-9 * (mu + th * th))
    return rep


def _default_allocations(m: int):
    allocs = [np.full(m, 1.0 / math.sqrt(m))]
    if m > 2:
        allocs.append(np.r_[np.full(2, 1.0 / math.sqrt(2.0)), np.zeros(m - 2)])
    w = np.r_[0.8, np.full(m - 1, 0.2 / (m - 1))]
    allocs.append(np.sqrt(w))
    w = np.r_[0.95, np.full(m - 1, 0.05 / (m - 1))]
    allocs.append(np.sqrt(w))
    w = np.r_[0.6, np.full(m - 1, 0.4 / (m - 1))]
    allocs.append(np.sqrt(w))
    return allocs


def lemma2_dominance(xi: float = 1.0, lam: float = 0.5, m: int = 2, reps: int = 1_000_000,
                     sigma: float = 1.0, x_grid=None, alternatives=None, seed: int = 0,
                     n_se: float = 3.0, chunk: int = 1 << 17) -> CheckReport:
    """Empirical check that a single spike maximises ``sum (X_i**2 - lam)_+`` stochastically.

    Every allocation has ``sum theta_i**2 = xi``.  Alternatives are given as
    direction vectors and rescaled to that total.  The spike and each
    alternative share the noise draw, and a point passes when the survival
    difference is at least ``-n_se`` paired standard errors.
    """
    if m not in (2, 3, 4):
        raise ValueError("m must be 2, 3 or 4")
    if not xi > 0 or lam < 0:
        raise ValueError("need xi > 0 and lam >= 0")
    if reps < 100_000:
        raise ValueError("reps must be at least 1e5")
    x_grid = np.arange(0.5, 4.0 + 1e-12, 0.5) if x_grid is None else np.asarray(x_grid, dtype=np.float64)
    spike = np.zeros(m)
    spike[0] = 1.0
    raw = _default_allocations(m) if alternatives is None else [np.asarray(a, dtype=np.float64) for a in alternatives]
    if len(raw) < 1:
        raise ValueError("need at least one alternative")
    allocs = []
    for a in raw:
        if a.shape != (m,) or not np.any(a):
            raise ValueError(f"alternative {a} must be a nonzero vector of length {m}")
        allocs.append(a * math.sqrt(xi) / np.linalg.norm(a))
    theta_spike = spike * math.sqrt(xi)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(0x1E2,)))
    k = len(allocs)
    count_s = np.zeros(x_grid.size)
    diff_sum = np.zeros((k, x_grid.size))
    diff_sq = np.zeros((k, x_grid.size))
    done = 0
    while done < reps:
        b = min(chunk, reps - done)
        z = sigma * rng.standard_normal((b, m))
        s_spike = np.maximum((z + theta_spike) ** 2 - lam, 0.0).sum(axis=1)
        ind_s = (s_spike[:, None] >= x_grid[None, :]).astype(np.float64)
        count_s += ind_s.sum(axis=0)
        for j, a in enumerate(allocs):
            s_alt = np.maximum((z + a) ** 2 - lam, 0.0).sum(axis=1)
            dif = ind_s - (s_alt[:, None] >= x_grid[None, :])
            diff_sum[j] += dif.sum(axis=0)
            diff_sq[j] += (dif * dif).sum(axis=0)
        done += b
    rep = CheckReport("spike dominance")
    surv_s = count_s / reps
    for j, a in enumerate(allocs):
        mean = diff_sum[j] / reps
        var = np.maximum(diff_sq[j] / reps - mean * mean, 0.0) * reps / (reps - 1)
        se = np.sqrt(var / reps)
        for xi_, d_, se_, s_ in zip(x_grid, mean, se, surv_s):
            rep.add(check="survival_dominance", allocation=[float(v) for v in a], x=float(xi_),
                    spike_survival=float(s_), alt_survival=float(s_ - d_), diff=float(d_), se=float(se_),
                    passed=d_ >= -n_se * se_)
    return rep
