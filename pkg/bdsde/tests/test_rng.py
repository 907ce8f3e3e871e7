# -*- coding: utf-8 -*-
"""Test counter-based random substreams."""

import unittest

import numpy as np

from bdsde import rng


class TestSubstream(unittest.TestCase):
    """Test key derivation and stability of substreams."""

    def test_same_key_same_numbers(self):
        """A key always yields the same draws."""
        a = rng.substream(7, rng.BACKWARD, 3, 1).standard_normal(50)
        b = rng.substream(7, rng.BACKWARD, 3, 1).standard_normal(50)
        np.testing.assert_array_equal(a, b)

    def test_prefix_stable(self):
        """Drawing more numbers does not change the ones drawn first."""
        short = rng.substream(1, rng.FORWARD, 0).standard_normal(100)
        long = rng.substream(1, rng.FORWARD, 0).standard_normal(200)
        np.testing.assert_array_equal(short, long[:100])

    def test_streams_differ(self):
        """Different stream ids, keys or seeds give different numbers."""
        base = rng.substream(0, rng.FORWARD, 0).standard_normal(10)
        for other in (rng.substream(0, rng.BACKWARD, 0), rng.substream(0, rng.FORWARD, 1),
                      rng.substream(1, rng.FORWARD, 0)):
            self.assertFalse(np.array_equal(base, other.standard_normal(10)))

    def test_order_independent(self):
        """Interleaving draws from other keys has no effect."""
        first = rng.substream(3, rng.CLOUD, 1).random(5)
        rng.substream(3, rng.PROBE, 0).random(1000)
        again = rng.substream(3, rng.CLOUD, 1).random(5)
        np.testing.assert_array_equal(first, again)

    def test_bad_keys(self):
        """None seeds and negative keys are rejected."""
        self.assertRaises(ValueError, rng.substream, None, rng.FORWARD)
        self.assertRaises(ValueError, rng.substream, 0, rng.FORWARD, -1)

    def test_normal_block_scale(self):
        """normal_block scales the unit normals of the same substream."""
        unit = rng.normal_block(5, rng.BACKWARD, (0, 0, 0), 20)
        scaled = rng.normal_block(5, rng.BACKWARD, (0, 0, 0), 20, scale=0.1)
        np.testing.assert_allclose(scaled, 0.1 * unit)


if __name__ == '__main__':
    unittest.main()
