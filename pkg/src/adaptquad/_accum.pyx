# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled single-pass block statistics over a stream of observations.

Mirrors ``_accum_py.BlockAccumulator`` operation for operation; every sum is
a left-to-right running sum so both backends agree to the last bit.
"""

import numpy as np

cdef enum:
    MAXJ = 64


cdef class BlockAccumulator:
    cdef readonly long long m0, upto, base_end, pos, capacity
    cdef readonly int J, n_blocks
    cdef double inv_n
    cdef long long ends[MAXJ + 1]
    cdef double mid_thr[MAXJ]
    cdef double mid_mu[MAXJ]
    cdef double tail_thr[MAXJ]
    cdef double thr_acc[MAXJ]
    cdef double prefix[MAXJ + 1]
    cdef double base_acc, xi0, baseline, mid_acc, tail_acc
    cdef bint have_xi0, have_baseline
    cdef int blk

    def __init__(self, long long m0, int J, int n_tail_blocks, double inv_n,
                 mid_thr, mid_mu, tail_thr, long long upto=0):
        cdef int j
        if J < 1 or n_tail_blocks < 0 or J + n_tail_blocks > MAXJ - 2:
            raise ValueError("block count out of range")
        if m0 < 1 or (m0 << (J + n_tail_blocks)) >> (J + n_tail_blocks) != m0 or (m0 << (J + n_tail_blocks)) > (1 << 62):
            raise ValueError("block layout too large")
        self.m0 = m0
        self.J = J
        self.n_blocks = J + n_tail_blocks
        self.inv_n = inv_n
        self.upto = upto
        self.base_end = m0 if m0 > upto else upto
        for j in range(self.n_blocks + 1):
            self.ends[j] = m0 << j
        self.capacity = self.ends[self.n_blocks]
        for j in range(MAXJ):
            self.mid_thr[j] = 0.0
            self.mid_mu[j] = 0.0
            self.tail_thr[j] = 0.0
            self.thr_acc[j] = 0.0
        for j in range(1, J):
            self.mid_thr[j] = mid_thr[j]
            self.mid_mu[j] = mid_mu[j]
        for j in range(n_tail_blocks):
            self.tail_thr[j] = tail_thr[j]
        for j in range(MAXJ + 1):
            self.prefix[j] = 0.0
        self.base_acc = 0.0
        self.mid_acc = 0.0
        self.tail_acc = 0.0
        self.xi0 = 0.0
        self.baseline = 0.0
        self.have_xi0 = m0 == 0
        self.have_baseline = upto == 0
        self.pos = 0
        self.blk = 0

    def feed(self, const double[::1] y):
        cdef long long start = self.pos
        cdef long long stop = start + y.shape[0]
        if stop > self.capacity:
            raise ValueError(f"observation longer than the block layout ({stop} > {self.capacity})")
        with nogil:
            self._feed_base(y, start, stop)
            self._feed_blocks(y, start, stop)
        self.pos = stop

    cdef void _feed_base(self, const double[::1] y, long long start, long long stop) noexcept nogil:
        cdef long long lo = start, hi, b
        cdef Py_ssize_t i
        cdef double acc, v
        while lo < stop and lo < self.base_end:
            b = self.base_end
            if lo < self.m0 and self.m0 < b:
                b = self.m0
            if lo < self.upto and self.upto < b:
                b = self.upto
            hi = b if b < stop else stop
            acc = self.base_acc
            for i in range(lo - start, hi - start):
                v = y[i]
                acc += v * v - self.inv_n
            self.base_acc = acc
            if hi == self.m0:
                self.xi0 = acc
                self.have_xi0 = True
            if hi == self.upto:
                self.baseline = acc
                self.have_baseline = True
            lo = hi

    cdef void _feed_blocks(self, const double[::1] y, long long start, long long stop) noexcept nogil:
        cdef long long lo = start if start > self.m0 else self.m0
        cdef long long hi
        cdef int j, t
        cdef Py_ssize_t i
        cdef double v, v2, d, acc, thr
        cdef double accs[MAXJ]
        cdef double thrs[MAXJ]
        cdef double mus[MAXJ]
        while lo < stop:
            while lo >= self.ends[self.blk + 1]:
                self.blk += 1
            j = self.blk
            hi = self.ends[j + 1]
            if hi > stop:
                hi = stop
            if j < self.J:
                # thresholded sums for k = 1..j use t = j + 1 - k
                for t in range(1, j + 1):
                    accs[t] = self.thr_acc[j + 1 - t]
                    thrs[t] = self.mid_thr[t]
                    mus[t] = self.mid_mu[t]
                acc = self.mid_acc
                for i in range(lo - start, hi - start):
                    v = y[i]
                    v2 = v * v
                    acc += v2
                    for t in range(1, j + 1):
                        d = v2 - thrs[t]
                        if d < 0.0:
                            d = 0.0
                        accs[t] += d - mus[t]
                self.mid_acc = acc
                for t in range(1, j + 1):
                    self.thr_acc[j + 1 - t] = accs[t]
                if hi == self.ends[j + 1]:
                    self.prefix[j + 1] = acc
            else:
                thr = self.tail_thr[j - self.J]
                acc = self.tail_acc
                for i in range(lo - start, hi - start):
                    v = y[i]
                    d = v * v - thr
                    if d > 0.0:
                        acc += d
                self.tail_acc = acc
            lo = hi

    def result(self):
        """Snapshot of the accumulated statistics as plain Python objects."""
        cdef int k
        return {
            "pos": self.pos,
            "xi0": self.xi0 if self.have_xi0 else None,
            "baseline": self.baseline if self.have_baseline else None,
            "prefix": np.array([self.prefix[k] for k in range(self.J + 1)]),
            "thr_acc": np.array([self.thr_acc[k] for k in range(self.J)]),
            "tail": self.tail_acc,
        }
