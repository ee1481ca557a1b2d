import numpy as np
import pytest
from scipy import stats

from afu.replay import ReplayBuffer, Transition


def _t(i, sd=1, ad=1, terminal=False):
    return Transition(np.full(sd, float(i)), np.zeros(ad), float(i), np.full(sd, i + 1.0), terminal)


class TestInsert:
    def test_single_insert(self):
        buf = ReplayBuffer(1, 1, capacity=10)
        buf.insert(_t(0))
        assert len(buf) == 1

    def test_ring_drops_oldest(self):
        buf = ReplayBuffer(1, 1, capacity=2)
        for i in range(3):
            buf.insert(_t(i))
        assert len(buf) == 2
        assert buf.oldest().r == 1.0
        assert 0.0 not in buf.r

    def test_dimension_mismatch(self):
        buf = ReplayBuffer(2, 1, capacity=4)
        with pytest.raises(ValueError):
            buf.insert(_t(0, sd=3))

    def test_action_out_of_range(self):
        buf = ReplayBuffer(1, 1)
        with pytest.raises(ValueError):
            buf.insert(Transition(np.zeros(1), np.array([1.5]), 0.0, np.zeros(1), False))

    def test_fields_round_trip(self):
        buf = ReplayBuffer(2, 1, capacity=3)
        buf.insert(Transition(np.array([1.0, 2.0]), np.array([-0.5]), 3.0, np.array([4.0, 5.0]), True))
        t = buf.oldest()
        np.testing.assert_array_equal(t.s, [1.0, 2.0])
        assert t.a[0] == -0.5 and t.r == 3.0 and t.terminal is True

    def test_capacity_validated(self):
        with pytest.raises(ValueError):
            ReplayBuffer(1, 1, capacity=0)


class TestSample:
    def test_empty_buffer(self):
        with pytest.raises(ValueError):
            ReplayBuffer(1, 1).sample(4, np.random.default_rng(0))

    def test_with_replacement(self):
        buf = ReplayBuffer(1, 1)
        buf.insert(_t(7))
        batch = buf.sample(256, np.random.default_rng(0))
        assert len(batch) == 256 and np.all(batch.r == 7.0)

    def test_fixed_seed_replays(self):
        buf = ReplayBuffer(1, 1)
        for i in range(20):
            buf.insert(_t(i))
        a = buf.sample(32, np.random.default_rng(5))
        b = buf.sample(32, np.random.default_rng(5))
        np.testing.assert_array_equal(a.r, b.r)

    def test_uniform_over_contents(self):
        """Chi-square goodness of fit of sample counts against the uniform law."""
        buf = ReplayBuffer(1, 1, capacity=40)
        for i in range(60):  # wraps, so contents are transitions 20..59
            buf.insert(_t(i))
        r = buf.sample(40_000, np.random.default_rng(2024)).r
        counts = np.bincount(r.astype(int) - 20, minlength=40)
        assert counts.size == 40 and counts.min() > 0
        assert stats.chisquare(counts).pvalue > 0.01

    def test_rows_stay_aligned(self):
        buf = ReplayBuffer(1, 1)
        for i in range(30):
            buf.insert(_t(i))
        b = buf.sample(100, np.random.default_rng(1))
        np.testing.assert_array_equal(b.s[:, 0], b.r)
        np.testing.assert_array_equal(b.s_next[:, 0], b.r + 1)
