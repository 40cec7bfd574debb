import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from dgramsey.rng import STREAM_COUNT, STREAM_SET, chunk_sizes, substream


@given(st.integers(0, 2**64 - 1), st.integers(0, 1000))
def test_substream_reproducible(seed, chunk):
    a = substream(seed, STREAM_COUNT, chunk).random(4)
    b = substream(seed, STREAM_COUNT, chunk).random(4)
    assert np.array_equal(a, b)


def test_streams_distinct():
    a = substream(1, STREAM_COUNT, 0).random(8)
    assert not np.array_equal(a, substream(1, STREAM_COUNT, 1).random(8))
    assert not np.array_equal(a, substream(1, STREAM_SET, 0).random(8))
    assert not np.array_equal(a, substream(2, STREAM_COUNT, 0).random(8))


@given(st.integers(0, 10**6), st.integers(1, 5000))
def test_chunks_cover(samples, chunk):
    sizes = chunk_sizes(samples, chunk)
    assert sum(sizes) == samples and all(0 < s <= chunk for s in sizes)
