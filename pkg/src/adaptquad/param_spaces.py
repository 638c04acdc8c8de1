"""Lp and Besov balls in sequence space and the extremal parameter families.

Besov coefficients ``theta_{j,k}`` (level ``j >= 0``, ``0 <= k < 2**j``) sit
at the flat index ``i = 2**j + k``, so level ``j`` occupies indices
``2**j .. 2**(j+1) - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import zeta

from .seq_model import ThetaVector

__all__ = [
    "BallSpec",
    "Membership",
    "MembershipViolation",
    "AdversarialConfig",
    "membership",
    "ball_norm",
    "a_theta",
    "sparse_hypercube",
    "dense_modulus",
    "single_spike",
    "q_of_theta",
    "MEMBER_RTOL",
]

MEMBER_RTOL = 1e-9


class MembershipViolation(ValueError):
    """A generated configuration falls outside the ball it was built for."""


@dataclass(frozen=True)
class BallSpec:
    """An Lp ball ``L_p(alpha, M)`` or a Besov ball ``B^alpha_{p,q}(M)``.

    ``q`` only matters for Besov balls; ``math.inf`` is accepted there and
    aggregates the levels by their supremum.
    """

    kind: str
    p: float
    alpha: float
    M: float = 1.0
    q: float = 2.0

    def __post_init__(self):
        kind = {"lp": "Lp", "besov": "Besov"}.get(str(self.kind).lower())
        if kind is None:
            raise ValueError(f"ball kind must be 'Lp' or 'Besov', got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        for name in ("p", "alpha", "M", "q"):
            v = float(getattr(self, name))
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
            object.__setattr__(self, name, v)
        if math.isinf(self.p) or math.isinf(self.alpha) or math.isinf(self.M):
            raise ValueError("p, alpha and M must be finite")
        if not self.s > 0:
            raise ValueError(f"s = alpha + 1/2 - 1/p must be positive, got {self.s}")

    @property
    def s(self) -> float:
        return self.alpha + 0.5 - 1.0 / self.p

    @property
    def p_star(self) -> float:
        return min(self.p, 2.0)

    @property
    def s_star(self) -> float:
        return self.alpha + 0.5 - 1.0 / self.p_star

    def scaled(self, M: float) -> "BallSpec":
        return BallSpec(self.kind, self.p, self.alpha, M, self.q)

    def describe(self) -> str:
        q = f",q={self.q:g}" if self.kind == "Besov" else ""
        return f"{self.kind}(p={self.p:g},alpha={self.alpha:g},M={self.M:g}{q})"


class Membership(NamedTuple):
    member: bool
    norm: float


def _lp_norm(c: np.ndarray, ball: BallSpec) -> float:
    if c.size == 0:
        return 0.0
    i = np.arange(1, c.size + 1, dtype=np.float64)
    a = np.abs(c)
    scale = a.max()
    if scale == 0.0:
        return 0.0
    # factor out the largest coefficient so |theta|**p cannot underflow
    terms = i ** (ball.p * ball.s) * (a / scale) ** ball.p
    return scale * math.fsum(terms) ** (1.0 / ball.p)


def _besov_norm(c: np.ndarray, ball: BallSpec) -> float:
    if c.size == 0:
        return 0.0
    levels = []
    j = 0
    while (1 << j) <= c.size:
        lvl = np.abs(c[(1 << j) - 1:min((1 << (j + 1)) - 1, c.size)])
        top = lvl.max()
        if top > 0.0:
            lp = top * math.fsum((lvl / top) ** ball.p) ** (1.0 / ball.p)
            levels.append(2.0 ** (j * ball.s) * lp)
        j += 1
    if not levels:
        return 0.0
    levels = np.asarray(levels)
    if math.isinf(ball.q):
        return float(levels.max())
    top = levels.max()
    return top * math.fsum((levels / top) ** ball.q) ** (1.0 / ball.q)


def ball_norm(theta: ThetaVector, ball: BallSpec) -> float:
    """Weighted norm whose sublevel set ``{norm <= M}`` is the ball."""
    if ball.kind == "Lp":
        return _lp_norm(theta.coeffs, ball)
    return _besov_norm(theta.coeffs, ball)


def membership(theta: ThetaVector, ball: BallSpec) -> Membership:
    """Ball norm of ``theta`` and whether it lies in ``ball`` (relative slack 1e-9)."""
    norm = ball_norm(theta, ball)
    return Membership(bool(norm <= ball.M * (1.0 + MEMBER_RTOL)), float(norm))


def a_theta(ball: BallSpec) -> float:
    """``sup sum theta_i**2`` over the ball.

    Equal to ``M**2`` for Lp balls with ``p <= 2`` and for Besov balls with
    ``q <= 2``.  Otherwise Hoelder's inequality is tight on a spread-out
    configuration and the supremum picks up a zeta-function or geometric
    factor.
    """
    M2 = ball.M**2
    if ball.kind == "Lp":
        if ball.p <= 2.0:
            return M2
        x = 2.0 * ball.p * ball.s / (ball.p - 2.0)
        return M2 * float(zeta(x, 1)) ** ((ball.p - 2.0) / ball.p)
    if ball.q <= 2.0:
        return M2
    # level weight 2**(-2 j rate) for the largest sum of squares per unit level norm
    rate = ball.s if ball.p <= 2.0 else ball.alpha
    if math.isinf(ball.q):
        r = 2.0 ** (-2.0 * rate)
        return M2 / (1.0 - r)
    e = ball.q / (ball.q - 2.0)
    r = 2.0 ** (-2.0 * rate * e)
    return M2 * (1.0 / (1.0 - r)) ** (1.0 / e)


def q_of_theta(theta: ThetaVector) -> float:
    """``sum theta_i**2`` over the support."""
    return math.fsum(theta.coeffs * theta.coeffs)


def _sparse_geometry(ball: BallSpec, n: int, b: float) -> tuple[int, int]:
    e = 1.0 + 2.0 * ball.p * ball.s
    m = math.ceil(n ** (ball.p / e) * math.log(n) ** (-1.0 / e))
    k = math.ceil(math.sqrt(b * m * math.log(m))) if m > 1 else 1
    return m, k


def sparse_hypercube(ball: BallSpec, n: int, b: float = 0.05) -> ThetaVector:
    """Vertex of the sparse hypercube: ``k`` spikes of height ``1/sqrt(n)``.

    ``m = ceil(n**(p/(1+2ps)) (ln n)**(-1/(1+2ps)))`` and
    ``k = ceil(sqrt(b m ln m))``.  The spikes occupy indices
    ``m-k+1 .. m``, where the weights are largest, so membership of this
    vertex implies membership of every vertex with the same ``(k, m)``.

    Raises
    ------
    MembershipViolation
        If the vertex leaves the ball; shrink ``b``.
    """
    if not ball.p < 2.0:
        raise ValueError("sparse_hypercube needs p < 2")
    if ball.alpha > 1.0 / (2.0 * ball.p) + 1e-12:
        raise ValueError("sparse_hypercube needs alpha <= 1/(2p)")
    if not b > 0:
        raise ValueError("b must be positive")
    m, k = _sparse_geometry(ball, n, b)
    if k > m:
        raise MembershipViolation(f"k={k} spikes do not fit in the first m={m} coordinates; shrink b")
    c = np.zeros(m)
    c[m - k:] = 1.0 / math.sqrt(n)
    theta = ThetaVector(c, label=f"sparse_hypercube(b={b:g},m={m},k={k})",
                        meta={"family": "SparseHypercube", "b": b, "m": m, "k": k, "n": n})
    mem = membership(theta, ball)
    if not mem.member:
        raise MembershipViolation(
            f"sparse hypercube with b={b:g}, n={n} has norm {mem.norm:.6g} > M={ball.M:g}; shrink b")
    return theta


def dense_modulus(ball: BallSpec, n: int, d: float = 1.0) -> ThetaVector:
    """Flat configuration attaining the modulus lower bound at ``delta = d sqrt(ln n)/n``.

    ``N = ceil(delta**(-2/(4 alpha+1)))`` coordinates of height
    ``c delta**((2 alpha+1)/(4 alpha+1))``; ``c`` is the largest value that
    keeps the configuration inside the ball.
    """
    if not ball.p >= 2.0:
        raise ValueError("dense_modulus needs p >= 2")
    if not d > 0:
        raise ValueError("d must be positive")
    delta = d * math.sqrt(math.log(n)) / n
    a = ball.alpha
    N = math.ceil(delta ** (-2.0 / (4.0 * a + 1.0)))
    unit = delta ** ((2.0 * a + 1.0) / (4.0 * a + 1.0))
    # the norm is 1-homogeneous in c, so the boundary value is explicit
    c = ball.M / ball_norm(ThetaVector(np.full(N, unit)), ball)
    while not membership(ThetaVector(np.full(N, c * unit)), ball).member:
        c = math.nextafter(c, 0.0)
    theta = ThetaVector(np.full(N, c * unit), label=f"dense_modulus(d={d:g},N={N},c={c:.6g})",
                        meta={"family": "DenseModulus", "d": d, "delta": delta, "N": N, "c": c, "n": n})
    norm = ball_norm(theta, ball)
    if not ball.M * (1.0 - 1e-6) <= norm <= ball.M * (1.0 + MEMBER_RTOL):
        raise MembershipViolation(f"calibration missed the boundary: norm {norm} for M={ball.M}")
    return theta


def single_spike(ball: BallSpec, height: float | None = None, index: int = 1) -> ThetaVector:
    """One coefficient at ``index``; by default the largest height in the ball."""
    if index < 1:
        raise ValueError("index is 1-based")
    c = np.zeros(index)
    c[-1] = 1.0
    unit_norm = ball_norm(ThetaVector(c), ball)
    h = ball.M / unit_norm if height is None else float(height)
    c[-1] = h
    theta = ThetaVector(c, label=f"single_spike(i={index},h={h:g})",
                        meta={"family": "SingleSpike", "height": h, "index": index})
    mem = membership(theta, ball)
    if not mem.member:
        raise MembershipViolation(f"spike of height {h:g} at i={index} has norm {mem.norm:.6g} > M={ball.M:g}")
    return theta


_FAMILIES = {
    "SparseHypercube": lambda ball, n, p: sparse_hypercube(ball, n, **p),
    "DenseModulus": lambda ball, n, p: dense_modulus(ball, n, **p),
    "SingleSpike": lambda ball, n, p: single_spike(ball, **p),
}


@dataclass(frozen=True)
class AdversarialConfig:
    """A named extremal family with its knobs (``b``; ``d``; ``height``/``index``)."""

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {sorted(_FAMILIES)}")

    def generate(self, ball: BallSpec, n: int) -> ThetaVector:
        return _FAMILIES[self.family](ball, n, dict(self.params))
