"""Estimators of the quadratic functional ``Q(theta) = sum theta_i**2``.

Every estimator is assembled from one pass of the block accumulator over
the observation:

* ``xi0``: unbiased sum over the initial segment ``1 .. m0``;
* ``xi_k``: block-thresholded prefix ``m0+1 .. m_k`` plus centred,
  term-by-term thresholded coordinates ``m_k+1 .. m_J``;
* ``xi_tail``: term-by-term thresholded coordinates past ``m_J``.

``q_kstar`` fixes ``k`` from the smoothness class; ``q_adaptive`` picks the
penalised maximum over all ``k`` and needs no class information.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .accumulate import make_accumulator
from .param_spaces import BallSpec
from .seq_model import (
    PENALTY_CONST,
    BlockScheme,
    Observation,
    block_scheme,
    lambda_k,
    omega_k,
    tail_truncation_bound,
)

__all__ = [
    "BlockStats",
    "EstimateReport",
    "block_stats",
    "xi0_hat",
    "xi_k_hat",
    "xi_tail_hat",
    "k_star",
    "q_kstar",
    "q_adaptive",
    "report_kstar",
    "report_adaptive",
    "unbiased_baseline",
    "write_fixture",
    "read_fixture",
]


@dataclass(frozen=True)
class BlockStats:
    """Sufficient statistics of one observation for every estimator.

    Attributes
    ----------
    scheme : BlockScheme
    length : int
        Number of coordinates that were fed.
    xi0 : float or None
        ``sum_{i <= m0} (y_i**2 - 1/n)``; None if the observation is shorter.
    prefix : ndarray, shape (J+1,)
        ``prefix[k] = sum_{m0 < i <= m_k} y_i**2``.
    thr_acc : ndarray, shape (J,)
        ``thr_acc[k]`` is the centred thresholded sum over ``m_k < i <= m_J``
        (entry 0 is unused).
    tail : float
        Thresholded tail sum over ``m_J < i <= length``.
    baseline : float or None
        ``sum_{i <= upto} (y_i**2 - 1/n)`` when requested.
    """

    scheme: BlockScheme
    length: int
    xi0: float | None
    prefix: np.ndarray
    thr_acc: np.ndarray
    tail: float
    baseline: float | None = None

    @property
    def covers_mJ(self) -> bool:
        return self.length >= self.scheme.mJ

    def _need_mJ(self):
        if not self.covers_mJ:
            raise ValueError(f"observation of length {self.length} does not reach m_J = {self.scheme.mJ}")

    def xi_k(self, k: int) -> float:
        """Mid-range estimator for block cut ``k`` (``1 <= k <= J``).

        At ``k = J`` the term-by-term part ranges over an empty set.
        """
        J = self.scheme.J
        if not 1 <= int(k) <= J:
            raise ValueError(f"k must satisfy 1 <= k <= J = {J}, got {k}")
        self._need_mJ()
        k = int(k)
        block = float(self.prefix[k]) - lambda_k(k, self.scheme)
        if block < 0.0:
            block = 0.0
        return block + (float(self.thr_acc[k]) if k < J else 0.0)

    def xi_all(self) -> np.ndarray:
        """``xi_k`` for ``k = 1 .. J`` (entry ``k-1``)."""
        return np.array([self.xi_k(k) for k in range(1, self.scheme.J + 1)])


def block_stats(obs: Observation, scheme: BlockScheme | None = None, upto: int = 0,
                backend: str | None = None) -> BlockStats:
    """Run the accumulator over ``obs`` and collect the statistics."""
    scheme = scheme or block_scheme(obs.n)
    if scheme.n != obs.n:
        raise ValueError(f"scheme is for n={scheme.n} but the observation has n={obs.n}")
    if upto > len(obs):
        raise ValueError(f"upto={upto} exceeds the observation length {len(obs)}")
    acc = make_accumulator(scheme, len(obs), upto=upto, backend=backend)
    acc.feed(obs.y)
    return stats_from_result(scheme, acc.result())


def stats_from_result(scheme: BlockScheme, res: dict) -> BlockStats:
    return BlockStats(scheme=scheme, length=int(res["pos"]), xi0=res["xi0"],
                      prefix=np.asarray(res["prefix"]), thr_acc=np.asarray(res["thr_acc"]),
                      tail=float(res["tail"]), baseline=res["baseline"])


def _stats(obs, scheme):
    return block_stats(obs, scheme)


def xi0_hat(obs: Observation, scheme: BlockScheme | None = None) -> float:
    """``sum_{i <= m0} (y_i**2 - 1/n)``."""
    st = _stats(obs, scheme)
    if st.xi0 is None:
        raise ValueError(f"observation of length {st.length} does not reach m0 = {st.scheme.m0}")
    return st.xi0


def xi_k_hat(obs: Observation, k: int, scheme: BlockScheme | None = None) -> float:
    return _stats(obs, scheme).xi_k(k)


def xi_tail_hat(obs: Observation, scheme: BlockScheme | None = None) -> float:
    """Thresholded tail sum ``sum_{i > m_J} (y_i**2 - gamma_i ln n / n)_+`` over the observed range."""
    return _stats(obs, scheme).tail


def k_star(ball: BallSpec, scheme: BlockScheme) -> int:
    """Block cut tuned to the class.

    The largest ``k >= 1`` (at most ``J``) with
    ``m0 * 2**k <= max(2 m0, n**(p*/(1+2 p* s*)) (ln n)**(-1/(1+2 p* s*)))``.
    """
    e = 1.0 + 2.0 * ball.p_star * ball.s_star
    bound = max(2.0 * scheme.m0, scheme.n ** (ball.p_star / e) * scheme.log_n ** (-1.0 / e))
    k = 1
    while k < scheme.J and scheme.block_end(k + 1) <= bound:
        k += 1
    return k


@dataclass
class EstimateReport:
    """Value of an estimator together with its components.

    ``q_raw == xi0 + xi_mid + xi_tail`` holds exactly, evaluated left to
    right.  ``q_hat`` equals ``q_raw`` unless clipping at zero was
    requested.
    """

    estimator: str
    q_hat: float
    xi0: float
    xi_mid: float
    xi_tail: float
    xi_mid_kind: str
    n: int
    length: int
    q_raw: float | None = None
    clipped: bool = False
    k_star: int | None = None
    argmax_k: int | None = None
    per_k_penalized: list | None = None
    penalty_const: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.q_raw is None:
            self.q_raw = self.q_hat

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateReport":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "EstimateReport":
        return cls.from_dict(json.loads(text))


def _clip(q: float, clip: bool) -> float:
    return max(q, 0.0) if clip else q


def _diagnostics(st: BlockStats) -> dict:
    return {"m0": st.scheme.m0, "J": st.scheme.J, "mJ": st.scheme.mJ,
            "tail_truncation_bound": tail_truncation_bound(st.scheme, st.length)}


def report_kstar(st: BlockStats, k: int, clip: bool = False) -> EstimateReport:
    """Oracle-tuned report from precomputed statistics at block cut ``k``."""
    mid = st.xi_k(k)
    q = (st.xi0 + mid) + st.tail
    return EstimateReport("q_kstar", _clip(q, clip), st.xi0, mid, st.tail, "xi_mid_oracle",
                          st.scheme.n, st.length, q_raw=q, clipped=bool(clip), k_star=int(k),
                          diagnostics=_diagnostics(st))


def report_adaptive(st: BlockStats, penalty_const: float = PENALTY_CONST,
                    clip: bool = False) -> EstimateReport:
    """Penalised maximum over all block cuts; ties go to the smallest ``k``."""
    J = st.scheme.J
    mids = [st.xi_k(k) - omega_k(k, st.scheme, penalty_const) for k in range(1, J + 1)]
    per_k = [(st.xi0 + m) + st.tail for m in mids]
    best = 0
    for j in range(1, J):
        if per_k[j] > per_k[best]:
            best = j
    q = per_k[best]
    return EstimateReport("q_adaptive", _clip(q, clip), st.xi0, mids[best], st.tail, "xi_mid_adaptive",
                          st.scheme.n, st.length, q_raw=q, clipped=bool(clip), argmax_k=best + 1,
                          per_k_penalized=per_k, penalty_const=float(penalty_const),
                          diagnostics=_diagnostics(st))


def q_kstar(obs: Observation, ball: BallSpec, scheme: BlockScheme | None = None,
            clip: bool = False) -> EstimateReport:
    """Estimator tuned to ``ball`` through :func:`k_star`."""
    st = _stats(obs, scheme)
    return report_kstar(st, k_star(ball, st.scheme), clip)


def q_adaptive(obs: Observation, scheme: BlockScheme | None = None,
               penalty_const: float = PENALTY_CONST, clip: bool = False) -> EstimateReport:
    """Ball-free estimator ``max_k {xi0 + xi_k + xi_tail - omega_k}``.

    Parameters
    ----------
    obs : Observation
        Must reach ``m_J``; coordinates past ``m_J`` feed the tail term.
    penalty_const : float
        Multiplier of ``sqrt(m_k ln n) / n`` in the penalty.
    clip : bool
        Report ``max(q, 0)``; the raw value stays in ``q_raw``.
    """
    return report_adaptive(_stats(obs, scheme), penalty_const, clip)


def unbiased_baseline(obs: Observation, upto: int) -> float:
    """``sum_{i <= upto} (y_i**2 - 1/n)``, summed left to right."""
    upto = int(upto)
    if not 1 <= upto <= len(obs):
        raise ValueError(f"upto must be in 1..{len(obs)}, got {upto}")
    y = obs.y[:upto]
    return float(np.cumsum(y * y - 1.0 / obs.n)[-1])


def write_fixture(path, obs: Observation, report: EstimateReport, **params) -> None:
    """Store an observation with its expected report for regression checks."""
    doc = {"observation": {"n": obs.n, "seed": obs.seed, "rep": obs.rep, "y": obs.y.tolist()},
           "params": params, "report": report.to_dict()}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def read_fixture(path) -> tuple[Observation, EstimateReport, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    o = doc["observation"]
    obs = Observation(np.asarray(o["y"], dtype=np.float64), int(o["n"]), o.get("seed"), o.get("rep"))
    return obs, EstimateReport.from_dict(doc["report"]), doc.get("params", {})
