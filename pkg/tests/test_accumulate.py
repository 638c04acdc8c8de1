import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptquad import accumulate
from adaptquad.accumulate import BACKENDS, make_accumulator, tail_blocks_for
from adaptquad.seq_model import ModelConfig, ThetaVector, block_scheme, simulate

from conftest import straight_line_stats

needs_compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernel not built")


def run(scheme, y, backend, cuts=(), upto=0):
    acc = make_accumulator(scheme, y.size, upto=upto, backend=backend)
    lo = 0
    for c in list(cuts) + [y.size]:
        acc.feed(y[lo:c])
        lo = c
    return acc.result()


def same(a, b):
    return (a["pos"] == b["pos"] and a["xi0"] == b["xi0"] and a["tail"] == b["tail"]
            and a["baseline"] == b["baseline"]
            and np.array_equal(a["prefix"], b["prefix"]) and np.array_equal(a["thr_acc"], b["thr_acc"]))


def test_backend_selection_is_reported():
    assert accumulate.BACKEND in BACKENDS
    assert "python" in BACKENDS


@needs_compiled
@pytest.mark.parametrize("n", [20, 100, 1024, 4096])
def test_backends_bit_identical(n):
    y = simulate(ThetaVector([0.2] * 30), ModelConfig(n, seed=n)).y
    s = block_scheme(n)
    assert same(run(s, y, "cython", upto=n), run(s, y, "python", upto=n))


@given(st.lists(st.integers(0, 3000), max_size=6), st.sampled_from(sorted(BACKENDS)))
def test_chunking_does_not_change_bits(cuts, backend):
    n = 128
    s = block_scheme(n)
    y = simulate(ThetaVector.zero(), ModelConfig(n, seed=5)).y
    cuts = sorted(c for c in cuts if c <= y.size)
    assert same(run(s, y, backend, cuts, upto=300), run(s, y, backend, upto=300))


@pytest.mark.parametrize("backend", sorted(BACKENDS))
def test_matches_straight_line_components(backend):
    n = 256
    s = block_scheme(n)
    y = simulate(ThetaVector(np.linspace(0.3, 0.0, 40)), ModelConfig(n, seed=9)).y
    res = run(s, y, backend)
    ref = straight_line_stats(y, n)
    assert res["xi0"] == ref["xi0"]
    assert res["tail"] == ref["tail"]


def test_overfeeding_is_rejected():
    # capacity is the end of the last block the declared length touches
    s = block_scheme(64)
    acc = make_accumulator(s, s.mJ)
    with pytest.raises(ValueError):
        acc.feed(np.zeros(s.mJ + 1))


def test_short_observation_leaves_xi0_unset():
    s = block_scheme(1024)
    acc = make_accumulator(s, s.m0 - 1)
    acc.feed(np.zeros(s.m0 - 1))
    assert acc.result()["xi0"] is None


def test_tail_block_count():
    s = block_scheme(1024)
    assert tail_blocks_for(s, s.mJ) == 0
    assert tail_blocks_for(s, s.mJ + 1) == 1
    assert tail_blocks_for(s, 4 * s.mJ) == 2
