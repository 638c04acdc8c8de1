"""Backend selection for the block-statistics kernel.

The compiled ``_accum`` extension is used when it imports; otherwise the
numpy implementation in ``_accum_py`` takes over.  Set
``ADAPTQUAD_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import _accum_py
from .seq_model import BlockScheme, excess_mean

_compiled = None
if os.environ.get("ADAPTQUAD_BACKEND", "").lower() != "python":
    try:
        from . import _accum as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
BACKENDS = {"python": _accum_py.BlockAccumulator}
if _compiled is not None:
    BACKENDS["cython"] = _compiled.BlockAccumulator


def tail_blocks_for(scheme: BlockScheme, length: int) -> int:
    t = 0
    while scheme.block_end(scheme.J + t) < length:
        t += 1
    return t


def make_accumulator(scheme: BlockScheme, length: int, upto: int = 0, backend: str | None = None):
    """Fresh accumulator sized for an observation of ``length`` coordinates."""
    cls = BACKENDS[backend or BACKEND]
    n, J = scheme.n, scheme.J
    mid_thr = np.zeros(J)
    mid_mu = np.zeros(J)
    for t in range(1, J):
        mid_thr[t] = (2 * t) / n
        mid_mu[t] = excess_mean(2 * t) / n
    nt = tail_blocks_for(scheme, length)
    log_n = math.log(n)
    tail_thr = np.array([2 * (b + 2) * log_n / n for b in range(nt)])
    return cls(scheme.m0, J, nt, 1.0 / n, mid_thr, mid_mu, tail_thr, upto)
