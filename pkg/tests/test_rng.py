"""The generators must match their published reference sequences exactly;
everything downstream (arrivals, group sizes) inherits reproducibility from
these checks."""

import numpy as np
import pytest

from dinersim.rng import (MASK64, Rng, STREAM_ARRIVAL, STREAM_GROUP_SIZE,
                          splitmix64)

# Reference outputs of the splitmix64 sequence seeded at 0. The generator
# adds the golden-ratio increment before mixing, so the n-th output equals
# splitmix64 applied to (n-1) increments.
GAMMA = 0x9E3779B97F4A7C15
SPLITMIX_SEED0_OUTPUTS = (
    0xE220A8397B1DCDAF,
    0x6E789E6AA1B965F4,
    0x06C45D188009454F,
)


def test_splitmix64_reference_sequence():
    for n, expected in enumerate(SPLITMIX_SEED0_OUTPUTS):
        assert splitmix64((n * GAMMA) & MASK64) == expected


def test_splitmix64_range_and_determinism():
    for x in (0, 1, 2**63, MASK64):
        v = splitmix64(x)
        assert 0 <= v <= MASK64
        assert splitmix64(x) == v


def test_next_u64_frozen_values():
    # first two outputs for (seed=42, stream=1), frozen at first computation
    r = Rng(42, 1)
    assert r.next_u64() == 0x01AB600393F7B1D1
    assert r.next_u64() == 0x152CFDA17CE1AD52


def test_streams_are_independent():
    a = Rng(9, STREAM_ARRIVAL)
    b = Rng(9, STREAM_GROUP_SIZE)
    b_alone = Rng(9, STREAM_GROUP_SIZE)
    # draining the arrival stream must not perturb the size stream
    for _ in range(100):
        a.next_u64()
    assert [b.next_u64() for _ in range(10)] == \
        [b_alone.next_u64() for _ in range(10)]


def test_same_seed_same_stream_identical():
    xs = [Rng(3, 2).next_u64() for _ in range(1)]
    ys = [Rng(3, 2).next_u64() for _ in range(1)]
    assert xs == ys
    assert Rng(3, 2).next_u64() != Rng(4, 2).next_u64()
    assert Rng(3, 2).next_u64() != Rng(3, 3).next_u64()


def test_random_unit_interval():
    r = Rng(0)
    vals = [r.random() for _ in range(2000)]
    assert all(0.0 <= v < 1.0 for v in vals)
    # 53-bit mantissa: every value is a multiple of 2**-53
    assert all(v * (1 << 53) == int(v * (1 << 53)) for v in vals)
    # loose uniformity: mean of n uniforms is 0.5 +- 3*sigma
    sigma = 1.0 / np.sqrt(12 * len(vals))
    assert abs(np.mean(vals) - 0.5) < 3 * sigma


def test_randrange_bounds_and_error():
    r = Rng(1)
    draws = [r.randrange(6) for _ in range(600)]
    assert min(draws) == 0 and max(draws) == 5
    with pytest.raises(ValueError):
        r.randrange(0)


def test_randint_inclusive():
    r = Rng(5)
    draws = [r.randint(1, 6) for _ in range(600)]
    assert set(draws) == {1, 2, 3, 4, 5, 6}


def test_clone_and_state_roundtrip():
    r = Rng(11, 1)
    r.next_u64()
    c = r.clone()
    assert [r.next_u64() for _ in range(5)] == [c.next_u64() for _ in range(5)]
    s = r.getstate()
    a = r.next_u64()
    r.setstate(s)
    assert r.next_u64() == a


def test_zero_state_guard():
    # the xorshift state must never start at the absorbing zero
    for seed in range(50):
        for stream in range(4):
            assert Rng(seed, stream).state != 0
