"""Sounding and demodulation pilot sequences and their grid placement."""

import numpy as np
import pytest

from ulmimo.errors import ConfigError
from ulmimo.pilots import DMRS_SYMBOL, SRS_SYMBOL, gen_dmrs, gen_srs


class TestSrs:
    def test_unit_modulus(self):
        srs = gen_srs(user=0, occasion=0)
        assert srs.sequence.shape == (240,)
        assert np.allclose(np.abs(srs.sequence), 1.0)

    def test_wideband_positions(self):
        srs = gen_srs(user=0, occasion=0)
        assert np.array_equal(srs.subcarriers(), np.arange(240))
        assert srs.symbol == SRS_SYMBOL == 13
        assert np.all(srs.positions()[:, 1] == 13)
        assert len(srs.positions()) == 240

    def test_determinism(self):
        a = gen_srs(user=1, occasion=5)
        b = gen_srs(user=1, occasion=5)
        assert np.array_equal(a.sequence, b.sequence)

    def test_occasion_sensitivity(self):
        a = gen_srs(user=0, occasion=0)
        b = gen_srs(user=0, occasion=1)
        assert not np.array_equal(a.sequence, b.sequence)

    def test_user_sensitivity(self):
        a = gen_srs(user=0, occasion=0)
        b = gen_srs(user=1, occasion=0)
        assert not np.array_equal(a.sequence, b.sequence)

    def test_low_cross_correlation(self):
        """Random QPSK sequences decorrelate: |<a,b>| well below sequence length."""
        a = gen_srs(user=0, occasion=0)
        b = gen_srs(user=1, occasion=0)
        assert np.abs(np.vdot(a.sequence, b.sequence)) < 0.2 * 240

    def test_qpsk_alphabet(self):
        srs = gen_srs(user=0, occasion=3)
        phases = np.angle(srs.sequence)
        quarters = np.round((phases - np.pi / 4) / (np.pi / 2))
        assert np.allclose(phases, quarters * np.pi / 2 + np.pi / 4, atol=1e-12)


class TestDmrs:
    def test_full_band_count(self):
        dmrs = gen_dmrs(user=0, frame_idx=0, slot_idx=0, prb_start=0, n_prb=20)
        assert len(dmrs.sequence) == 120
        assert dmrs.symbol == DMRS_SYMBOL == 2
        assert np.allclose(np.abs(dmrs.sequence), 1.0)

    def test_single_prb_count(self):
        dmrs = gen_dmrs(user=0, frame_idx=0, slot_idx=0, prb_start=4, n_prb=1)
        assert len(dmrs.sequence) == 6
        assert np.array_equal(dmrs.subcarriers(), 48 + np.arange(0, 12, 2))

    def test_stride_inside_allocation(self):
        dmrs = gen_dmrs(user=1, frame_idx=0, slot_idx=3, prb_start=10, n_prb=10)
        sc = dmrs.subcarriers()
        assert sc[0] == 120
        assert np.all(np.diff(sc) == 2)
        assert sc[-1] == 238

    def test_determinism_and_slot_sensitivity(self):
        a = gen_dmrs(user=0, frame_idx=2, slot_idx=7, prb_start=0, n_prb=20)
        b = gen_dmrs(user=0, frame_idx=2, slot_idx=7, prb_start=0, n_prb=20)
        c = gen_dmrs(user=0, frame_idx=2, slot_idx=8, prb_start=0, n_prb=20)
        assert np.array_equal(a.sequence, b.sequence)
        assert not np.array_equal(a.sequence, c.sequence)

    def test_user_sensitivity(self):
        a = gen_dmrs(user=0, frame_idx=0, slot_idx=0, prb_start=0, n_prb=20)
        b = gen_dmrs(user=1, frame_idx=0, slot_idx=0, prb_start=0, n_prb=20)
        assert not np.array_equal(a.sequence, b.sequence)

    @pytest.mark.parametrize("n_prb", [0, -1])
    def test_empty_allocation_rejected(self, n_prb):
        with pytest.raises(ConfigError):
            gen_dmrs(user=0, frame_idx=0, slot_idx=0, prb_start=0, n_prb=n_prb)
