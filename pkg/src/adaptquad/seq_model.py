"""Gaussian sequence model, dyadic block geometry and threshold constants.

Observations follow ``y_i = theta_i + z_i / sqrt(n)`` with i.i.d. standard
normal ``z_i``.  Indices are 1-based in every public function, matching the
usual way the sequence is written; arrays store index ``i`` at position
``i - 1``.

All logarithms without an explicit base are natural logarithms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcx

__all__ = [
    "ModelConfig",
    "BlockScheme",
    "ThetaVector",
    "Observation",
    "block_scheme",
    "observation_length",
    "replication_rng",
    "simulate",
    "gamma",
    "tau",
    "lambda_k",
    "mu_ki",
    "omega_k",
    "excess_mean",
    "excess_variance",
    "tail_truncation_bound",
    "PENALTY_CONST",
    "MIN_N",
]

PENALTY_CONST = 6.0
MIN_N = 20

_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class ModelConfig:
    """Sample size, seed and how far past ``m_J`` the tail is simulated."""

    n: int
    seed: int = 0
    tail_blocks: int = 2

    def __post_init__(self):
        if int(self.n) != self.n or self.n < MIN_N:
            raise ValueError(f"n must be an integer >= {MIN_N}, got {self.n!r}")
        if int(self.tail_blocks) != self.tail_blocks or self.tail_blocks < 0:
            raise ValueError(f"tail_blocks must be a non-negative integer, got {self.tail_blocks!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed!r}")


@dataclass(frozen=True)
class BlockScheme:
    """Dyadic index geometry ``m_k = 2**k * m0`` for a sample size ``n``.

    Block ``k >= 1`` covers indices ``m_{k-1}+1 .. m_k``; ``1 .. m0`` is the
    initial segment.  ``block_end`` accepts ``k > J`` for the tail blocks.
    """

    n: int
    m0: int
    J: int

    def block_end(self, k: int) -> int:
        if k < 0:
            raise ValueError(f"block index must be >= 0, got {k}")
        return self.m0 << k

    @property
    def mJ(self) -> int:
        return self.block_end(self.J)

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "m0": self.m0, "J": self.J})

    @classmethod
    def from_json(cls, text: str) -> "BlockScheme":
        d = json.loads(text)
        return block_scheme(d["n"]) if set(d) == {"n"} else cls(int(d["n"]), int(d["m0"]), int(d["J"]))


def block_scheme(n: int) -> BlockScheme:
    """Block geometry for sample size ``n``.

    ``m0 = max(1, round(n / (ln n)**2))`` and ``J`` is the largest integer
    with ``2**J <= n``.
    """
    if int(n) != n or n < MIN_N:
        raise ValueError(f"block_scheme needs an integer n >= {MIN_N}, got {n!r}")
    n = int(n)
    m0 = max(1, round(n / math.log(n) ** 2))
    J = n.bit_length() - 1
    return BlockScheme(n=n, m0=m0, J=J)


@dataclass(frozen=True)
class ThetaVector:
    """Finitely supported coefficient sequence, ``coeffs[i-1] == theta_i``.

    Trailing zeros are stripped on construction, so ``support_len`` is the
    index of the last nonzero coefficient (0 for the zero vector).
    """

    coeffs: np.ndarray
    label: str = "theta"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64).ravel()
        if not np.all(np.isfinite(c)):
            raise ValueError("theta coefficients must be finite")
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1].copy() if nz.size else np.zeros(0)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def support_len(self) -> int:
        return int(self.coeffs.size)

    @classmethod
    def zero(cls) -> "ThetaVector":
        return cls(np.zeros(0), label="zero")

    def to_json(self) -> str:
        return json.dumps({"label": self.label, "support_len": self.support_len,
                           "coeffs": self.coeffs.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ThetaVector":
        d = json.loads(text)
        if isinstance(d, list):
            return cls(np.asarray(d, dtype=np.float64))
        coeffs = np.asarray(d["coeffs"], dtype=np.float64)
        if "support_len" in d and int(d["support_len"]) != np.flatnonzero(coeffs).max(initial=-1) + 1:
            raise ValueError("support_len does not match the last nonzero coefficient")
        return cls(coeffs, label=d.get("label", "theta"))

    def __eq__(self, other):
        return isinstance(other, ThetaVector) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())


@dataclass(frozen=True)
class Observation:
    """Simulated or user-supplied ``y`` with the sample size that produced it."""

    y: np.ndarray
    n: int
    seed: int | None = None
    rep: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if y.ndim != 1:
            raise ValueError("observation must be one-dimensional")
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.y.size


def observation_length(scheme: BlockScheme, support_len: int = 0, tail_blocks: int = 2) -> int:
    """Number of coordinates to simulate.

    The range is the first ``m_{J+t}`` covering ``max(m_J, support_len)``,
    extended by ``tail_blocks`` further dyadic blocks.
    """
    t = 0
    while scheme.block_end(scheme.J + t) < support_len:
        t += 1
    return scheme.block_end(scheme.J + t + tail_blocks)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent generator for replication ``rep`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(rep),)))


def simulate(theta: ThetaVector, cfg: ModelConfig, rep: int = 0, length: int | None = None) -> Observation:
    """Draw ``y = theta + z / sqrt(n)`` from the ``(cfg.seed, rep)`` substream.

    ``length`` defaults to :func:`observation_length`; a shorter ``length``
    returns an exact prefix of the default draw.
    """
    scheme = block_scheme(cfg.n)
    if length is None:
        length = observation_length(scheme, theta.support_len, cfg.tail_blocks)
    rng = replication_rng(cfg.seed, rep)
    y = rng.standard_normal(length)
    y /= math.sqrt(cfg.n)
    s = min(theta.support_len, length)
    y[:s] += theta.coeffs[:s]
    return Observation(y=y, n=cfg.n, seed=cfg.seed, rep=rep,
                       meta={"tail_blocks": cfg.tail_blocks, "theta": theta.label})


def _ceil_log2_ratio(i: int, m: int) -> int:
    # smallest j >= 0 with i <= m * 2**j, in exact integer arithmetic
    return ((i - 1) // m).bit_length()


def gamma(i: int, scheme: BlockScheme) -> int:
    """Tail threshold multiplier ``2 * (ceil(log2(i / m_J)) + 1)`` for ``i > m_J``."""
    if i <= scheme.mJ:
        raise ValueError(f"gamma is defined for i > m_J = {scheme.mJ}, got {i}")
    return 2 * (_ceil_log2_ratio(i, scheme.mJ) + 1)


def tau(k: int, i: int, scheme: BlockScheme) -> int:
    """Term-by-term threshold multiplier ``2 * ceil(log2(i / m_k))``."""
    if not 1 <= k <= scheme.J - 1:
        raise ValueError(f"tau needs 1 <= k <= J-1 = {scheme.J - 1}, got k={k}")
    mk = scheme.block_end(k)
    if not mk < i <= scheme.mJ:
        raise ValueError(f"tau needs m_k < i <= m_J ({mk} < i <= {scheme.mJ}), got i={i}")
    return 2 * _ceil_log2_ratio(i, mk)


def lambda_k(k: int, scheme: BlockScheme) -> float:
    """Block threshold ``((m_k - m0) + 2 sqrt((m_k - m0) ln(m_k - m0))) / n``."""
    if not 1 <= k <= scheme.J:
        raise ValueError(f"lambda_k needs 1 <= k <= J = {scheme.J}, got {k}")
    m = scheme.block_end(k) - scheme.m0
    if m < 1:
        raise ValueError("lambda_k needs m_k - m0 >= 1")
    return (m + 2.0 * math.sqrt(m * math.log(m))) / scheme.n


def excess_mean(t: float) -> float:
    """``E (Z**2 - t)_+`` for standard normal ``Z``.

    Closed form ``2 [sqrt(t) phi(sqrt(t)) + (1 - t) Phi_bar(sqrt(t))]``,
    evaluated through the scaled complementary error function so that the
    large-``t`` cancellation keeps full relative precision.
    """
    if t < 0:
        raise ValueError("threshold must be non-negative")
    a = math.sqrt(t)
    phi = math.exp(-0.5 * t) / math.sqrt(2.0 * math.pi)
    mills = _SQRT_HALF_PI * float(erfcx(a / math.sqrt(2.0)))
    return 2.0 * phi * (a + (1.0 - t) * mills)


def excess_variance(t: float) -> float:
    """``Var (Z**2 - t)_+`` for standard normal ``Z``."""
    a = math.sqrt(t)
    phi = math.exp(-0.5 * t) / math.sqrt(2.0 * math.pi)
    mills = _SQRT_HALF_PI * float(erfcx(a / math.sqrt(2.0)))
    second = 2.0 * phi * ((3.0 * a - a**3) + (3.0 - 2.0 * t + t * t) * mills)
    return second - excess_mean(t) ** 2


def mu_ki(k: int, i: int, scheme: BlockScheme) -> float:
    """Centering ``E_0 (Y_i**2 - tau_{k,i}/n)_+ = excess_mean(tau_{k,i}) / n``."""
    return excess_mean(tau(k, i, scheme)) / scheme.n


def omega_k(k: int, scheme: BlockScheme, const: float = PENALTY_CONST) -> float:
    """Penalty ``const * sqrt(m_k ln n) / n`` used by the adaptive estimator."""
    if not 1 <= k <= scheme.J:
        raise ValueError(f"omega_k needs 1 <= k <= J = {scheme.J}, got {k}")
    return const * math.sqrt(scheme.block_end(k) * scheme.log_n) / scheme.n


def tail_truncation_bound(scheme: BlockScheme, length: int, max_blocks: int = 64) -> float:
    """Expected zero-signal tail mass dropped by stopping the tail at ``length``.

    Sums ``m_j * excess_mean(gamma_j ln n) / n`` over whole tail blocks past
    ``length`` (``length`` is assumed block-aligned) until the terms vanish.
    """
    total = 0.0
    j = scheme.J
    while scheme.block_end(j) < length:
        j += 1
    for _ in range(max_blocks):
        size = scheme.block_end(j + 1) - scheme.block_end(j)
        g = 2 * (j - scheme.J + 2)
        term = size * excess_mean(g * scheme.log_n) / scheme.n
        total += term
        if term < 1e-300 or term < total * 1e-17:
            break
        j += 1
    return total
