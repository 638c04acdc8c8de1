import math
import os

import numpy as np
import pytest
import sympy as sp
from hypothesis import settings

from adaptquad.rates import ALPHA, P
from adaptquad.seq_model import excess_mean

settings.register_profile("default", deadline=None, max_examples=60)
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def straight_line_stats(y, n):
    """Independent element-by-element evaluation of every estimator component.

    Geometry is recomputed from scratch; only the scalar ``excess_mean`` is
    shared with the package (it has its own quadrature oracle).  All sums
    run left to right in plain Python floats.
    """
    ln = math.log(n)
    m0 = max(1, round(n / ln**2))
    J = 0
    while 2 ** (J + 1) <= n:
        J += 1
    mJ = m0 * 2**J
    y = [float(v) for v in y]

    xi0 = 0.0
    for i in range(1, m0 + 1):
        xi0 += y[i - 1] * y[i - 1] - 1 / n

    xi = {}
    for k in range(1, J + 1):
        mk = m0 * 2**k
        block = 0.0
        for i in range(m0 + 1, mk + 1):
            block += y[i - 1] * y[i - 1]
        m = mk - m0
        lam = (m + 2.0 * math.sqrt(m * math.log(m))) / n
        first = max(block - lam, 0.0)
        second = 0.0
        for i in range(mk + 1, mJ + 1):
            j = 0
            while mk * 2**j < i:
                j += 1
            tau = 2 * j
            second += max(y[i - 1] * y[i - 1] - tau / n, 0.0) - excess_mean(tau) / n
        xi[k] = first + second

    tail = 0.0
    for i in range(mJ + 1, len(y) + 1):
        j = 0
        while mJ * 2**j < i:
            j += 1
        g = 2 * (j + 1)
        d = y[i - 1] * y[i - 1] - g * ln / n
        if d > 0:
            tail += d
    return {"m0": m0, "J": J, "mJ": mJ, "xi0": xi0, "xi": xi, "tail": tail}


def straight_line_adaptive(y, n, const=6.0):
    s = straight_line_stats(y, n)
    ln = math.log(n)
    per_k = []
    for k in range(1, s["J"] + 1):
        omega = const * math.sqrt(s["m0"] * 2**k * ln) / n
        per_k.append((s["xi0"] + (s["xi"][k] - omega)) + s["tail"])
    best = max(range(len(per_k)), key=lambda j: (per_k[j], -j))
    return per_k[best], best + 1, per_k


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# hand transcription of the published comparison table, one (competitor, ours)
# pair of (n exponent, log exponent) per cell, in table order
_s = ALPHA + sp.Rational(1, 2) - 1 / P
ONE = (sp.Integer(1), sp.Integer(0))
TERM = (4 * ALPHA / (1 + 2 * ALPHA), 4 * ALPHA / (1 + 2 * ALPHA))
BLOCK = (8 * _s / (1 + 4 * _s), 4 * _s / (1 + 4 * _s))
SPARSE = (2 - P / (1 + 2 * P * _s), 2 * P * _s / (1 + 2 * P * _s))
TABLE_TRANSCRIPTION = [
    (ONE, ONE),
    (TERM, SPARSE),
    (TERM, ONE),
    (ONE, ONE),
    (TERM, SPARSE),
    (BLOCK, SPARSE),
    (BLOCK, ONE),
    (ONE, ONE),
]


def same_expr(a, b):
    a = sp.sympify(a, locals={"p": P, "alpha": ALPHA}) if isinstance(a, str) else a
    return sp.simplify(a - b) == 0


# one summary line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
