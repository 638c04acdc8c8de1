"""Pure numpy block statistics, the fallback for the compiled ``_accum``.

Running sums use ``np.cumsum`` seeded with the carried value, which adds
left to right exactly as the compiled loop does.
"""

from __future__ import annotations

import numpy as np

MAXJ = 64


def _run(acc: float, terms: np.ndarray) -> float:
    if terms.size == 0:
        return acc
    buf = np.empty(terms.size + 1)
    buf[0] = acc
    buf[1:] = terms
    return float(np.cumsum(buf)[-1])


class BlockAccumulator:
    def __init__(self, m0, J, n_tail_blocks, inv_n, mid_thr, mid_mu, tail_thr, upto=0):
        if J < 1 or n_tail_blocks < 0 or J + n_tail_blocks > MAXJ - 2:
            raise ValueError("block count out of range")
        if m0 < 1 or (m0 << (J + n_tail_blocks)) > (1 << 62):
            raise ValueError("block layout too large")
        self.m0 = int(m0)
        self.J = int(J)
        self.n_blocks = self.J + int(n_tail_blocks)
        self.inv_n = float(inv_n)
        self.upto = int(upto)
        self.base_end = max(self.m0, self.upto)
        self.ends = [self.m0 << j for j in range(self.n_blocks + 1)]
        self.capacity = self.ends[-1]
        self.mid_thr = np.asarray(mid_thr, dtype=np.float64)
        self.mid_mu = np.asarray(mid_mu, dtype=np.float64)
        self.tail_thr = np.asarray(tail_thr, dtype=np.float64)
        self.thr_acc = np.zeros(self.J)
        self.prefix = np.zeros(self.J + 1)
        self.base_acc = 0.0
        self.mid_acc = 0.0
        self.tail_acc = 0.0
        self.xi0 = None
        self.baseline = 0.0 if self.upto == 0 else None
        self.pos = 0
        self._blk = 0

    def feed(self, y):
        y = np.ascontiguousarray(y, dtype=np.float64)
        start = self.pos
        stop = start + y.size
        if stop > self.capacity:
            raise ValueError(f"observation longer than the block layout ({stop} > {self.capacity})")
        y2 = y * y
        self._feed_base(y2, start, stop)
        self._feed_blocks(y2, start, stop)
        self.pos = stop

    def _feed_base(self, y2, start, stop):
        lo = start
        while lo < stop and lo < self.base_end:
            b = self.base_end
            if lo < self.m0:
                b = min(b, self.m0)
            if lo < self.upto:
                b = min(b, self.upto)
            hi = min(b, stop)
            self.base_acc = _run(self.base_acc, y2[lo - start:hi - start] - self.inv_n)
            if hi == self.m0:
                self.xi0 = self.base_acc
            if hi == self.upto:
                self.baseline = self.base_acc
            lo = hi

    def _feed_blocks(self, y2, start, stop):
        lo = max(start, self.m0)
        while lo < stop:
            while lo >= self.ends[self._blk + 1]:
                self._blk += 1
            j = self._blk
            hi = min(self.ends[j + 1], stop)
            seg = y2[lo - start:hi - start]
            if j < self.J:
                self.mid_acc = _run(self.mid_acc, seg)
                for k in range(1, j + 1):
                    t = j + 1 - k
                    terms = np.maximum(seg - self.mid_thr[t], 0.0) - self.mid_mu[t]
                    self.thr_acc[k] = _run(self.thr_acc[k], terms)
                if hi == self.ends[j + 1]:
                    self.prefix[j + 1] = self.mid_acc
            else:
                d = seg - self.tail_thr[j - self.J]
                self.tail_acc = _run(self.tail_acc, d[d > 0.0])
            lo = hi

    def result(self):
        return {
            "pos": self.pos,
            "xi0": self.xi0,
            "baseline": self.baseline,
            "prefix": self.prefix.copy(),
            "thr_acc": self.thr_acc.copy(),
            "tail": self.tail_acc,
        }
