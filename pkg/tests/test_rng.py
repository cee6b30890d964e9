import numpy as np
from hypothesis import given, strategies as st

from sphere8.rng import make_rng


@given(st.integers(0, 2**63 - 1), st.integers(0, 10**6), st.text(max_size=8))
def test_streams_reproducible(seed, index, tag):
    a = make_rng(seed, index, tag).random(4)
    b = make_rng(seed, index, tag).random(4)
    assert np.array_equal(a, b)


def test_streams_independent_of_order():
    first = [make_rng(3, i, "scene").random() for i in range(10)]
    second = [make_rng(3, i, "scene").random() for i in reversed(range(10))][::-1]
    assert first == second


def test_distinct_paths_differ():
    draws = {make_rng(0, i, tag).integers(2**62) for i in range(50) for tag in ("pose", "scene", "ransac")}
    assert len(draws) == 150


def test_bit_generator_is_philox():
    assert type(make_rng(0).bit_generator).__name__ == "Philox"
