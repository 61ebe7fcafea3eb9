"""Channel draws, CFO phase ramp, and the MIMO propagation operator."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ulmimo.channel import (
    NoiseModel,
    UeProfile,
    correlated_columns,
    draw_channel,
    phase_rotation,
    propagate,
)
from ulmimo.errors import ConfigError
from ulmimo.grid import WaveformConfig, build_grid, map_symbols

WF = WaveformConfig()
N_SC = WF.n_sc

PROFILES = (UeProfile(user=0, cfo_hz=0.0), UeProfile(user=1, cfo_hz=0.0))
NO_NOISE = NoiseModel(variance=0.0, rng_seed=0)


def _tx_pair(rng):
    grids = []
    for _ in range(2):
        g = build_grid(WF, 0, 0)
        g.symbols[:] = rng.standard_normal(g.symbols.shape) + 1j * rng.standard_normal(g.symbols.shape)
        grids.append(g)
    return grids


def _identity_channel():
    return draw_channel("fixed_los_like", N_SC)


class TestProfilesAndModels:
    def test_profile_fields(self):
        p = UeProfile(user=1, cfo_hz=-150.0, tx_power_db=3.0)
        assert p.user == 1 and p.cfo_hz == -150.0 and p.tx_power_db == 3.0

    def test_negative_delay_rejected(self):
        with pytest.raises(ConfigError):
            UeProfile(user=0, cfo_hz=0.0, srs_data_delay_s=-1e-3)

    def test_negative_variance_rejected(self):
        with pytest.raises(ConfigError):
            NoiseModel(variance=-0.1, rng_seed=0)

    @pytest.mark.parametrize("rho", [0.0, 0.3, 0.5, 0.9])
    def test_correlated_columns(self, rho):
        m = correlated_columns(rho)
        assert np.allclose(np.abs(np.vdot(m[:, 0], m[:, 1])), rho)
        assert np.allclose(np.linalg.norm(m, axis=0), 1.0)

    def test_correlated_columns_range(self):
        with pytest.raises(ConfigError):
            correlated_columns(1.0)


class TestDrawChannel:
    def test_fixed_identity_default(self):
        chan = _identity_channel()
        assert chan.h.shape == (N_SC, 2, 2)
        assert np.allclose(chan.h, np.eye(2))

    def test_fixed_flat_across_band(self):
        m = correlated_columns(0.5)
        chan = draw_channel("fixed_los_like", N_SC, fixed_matrix=m)
        assert np.allclose(chan.h[0], m)
        assert np.allclose(chan.h, chan.h[0])

    def test_iid_determinism(self):
        a = draw_channel("iid_rayleigh", N_SC, seed=3)
        b = draw_channel("iid_rayleigh", N_SC, seed=3)
        assert np.array_equal(a.h, b.h)

    def test_iid_seed_sensitivity(self):
        a = draw_channel("iid_rayleigh", N_SC, seed=3)
        b = draw_channel("iid_rayleigh", N_SC, seed=4)
        assert not np.array_equal(a.h, b.h)

    def test_iid_draw_index_sensitivity(self):
        a = draw_channel("iid_rayleigh", N_SC, seed=3, draw_index=0)
        b = draw_channel("iid_rayleigh", N_SC, seed=3, draw_index=1)
        assert not np.array_equal(a.h, b.h)

    def test_iid_unit_variance(self):
        """Entries are CN(0,1): empirical variance within 5% over 1e5 draws."""
        chan = draw_channel("iid_rayleigh", 25000, seed=9)
        var = np.var(chan.h)
        assert abs(var - 1.0) < 0.05

    def test_iid_varies_per_subcarrier(self):
        chan = draw_channel("iid_rayleigh", N_SC, seed=1)
        assert not np.allclose(chan.h[0], chan.h[1])

    def test_unknown_model(self):
        with pytest.raises(ConfigError):
            draw_channel("two_ray", N_SC)


class TestPhaseRotation:
    def test_zero_cases(self):
        assert phase_rotation(0.0, 1.0) == 0.0
        assert phase_rotation(123.0, 0.0) == 0.0

    def test_half_cycle_exact(self):
        """100 Hz over 5 ms is half a cycle: wrapped angle is exactly pi."""
        assert phase_rotation(100.0, 0.005) == np.pi

    def test_quarter_ms_200hz(self):
        assert phase_rotation(200.0, 0.0025) == np.pi

    def test_sign(self):
        assert phase_rotation(-100.0, 0.0025) == pytest.approx(-np.pi / 2)

    def test_full_cycle_wraps_to_zero(self):
        assert abs(phase_rotation(200.0, 0.005)) < 1e-12

    @given(st.floats(-500.0, 500.0), st.floats(0.0, 0.1))
    @settings(max_examples=200, deadline=None)
    def test_wrap_range(self, cfo, elapsed):
        theta = phase_rotation(cfo, elapsed)
        assert -np.pi < theta <= np.pi


class TestPropagate:
    def test_identity_passthrough(self):
        rng = np.random.default_rng(0)
        tx = _tx_pair(rng)
        rx = propagate(tx, _identity_channel(), PROFILES, NO_NOISE, elapsed_s=0.0)
        assert len(rx) == 2
        assert np.allclose(rx[0].symbols, tx[0].symbols)
        assert np.allclose(rx[1].symbols, tx[1].symbols)

    def test_single_user_phase(self):
        """One active user: rx equals h * e^{j theta} * x on every RE."""
        rng = np.random.default_rng(1)
        tx = _tx_pair(rng)
        tx[1].symbols[:] = 0
        profiles = (UeProfile(user=0, cfo_hz=100.0), UeProfile(user=1, cfo_hz=0.0))
        rx = propagate(tx, _identity_channel(), profiles, NO_NOISE, elapsed_s=0.0025)
        theta = phase_rotation(100.0, 0.0025)
        assert np.allclose(rx[0].symbols, np.exp(1j * theta) * tx[0].symbols)

    def test_theta_pi_negates(self):
        rng = np.random.default_rng(2)
        tx = _tx_pair(rng)
        tx[1].symbols[:] = 0
        profiles = (UeProfile(user=0, cfo_hz=100.0), UeProfile(user=1, cfo_hz=0.0))
        rx = propagate(tx, _identity_channel(), profiles, NO_NOISE, elapsed_s=0.005)
        assert np.allclose(rx[0].symbols, -tx[0].symbols, atol=1e-12)

    def test_per_user_elapsed(self):
        """Same CFO, different elapsed time: only user 0 is negated."""
        rng = np.random.default_rng(3)
        tx = _tx_pair(rng)
        profiles = (UeProfile(user=0, cfo_hz=100.0), UeProfile(user=1, cfo_hz=100.0))
        rx = propagate(tx, _identity_channel(), profiles, NO_NOISE, elapsed_s=[0.005, 0.0])
        assert np.allclose(rx[0].symbols, -tx[0].symbols, atol=1e-12)
        assert np.allclose(rx[1].symbols, tx[1].symbols, atol=1e-12)

    def test_cfo_preserves_modulus(self):
        rng = np.random.default_rng(4)
        tx = _tx_pair(rng)
        profiles = (UeProfile(user=0, cfo_hz=377.0), UeProfile(user=1, cfo_hz=-123.0))
        rx = propagate(tx, _identity_channel(), profiles, NO_NOISE, elapsed_s=0.004)
        merged = np.abs(tx[0].symbols) ** 2 + np.abs(tx[1].symbols) ** 2
        # identity channel keeps per-user streams on separate antennas
        assert np.allclose(np.abs(rx[0].symbols) ** 2 + np.abs(rx[1].symbols) ** 2, merged)

    def test_linearity_in_tx_power(self):
        rng = np.random.default_rng(5)
        tx = _tx_pair(rng)
        tx[1].symbols[:] = 0
        hot = (UeProfile(user=0, cfo_hz=0.0, tx_power_db=6.0), UeProfile(user=1, cfo_hz=0.0))
        rx_hot = propagate(tx, _identity_channel(), hot, NO_NOISE, elapsed_s=0.0)
        rx_ref = propagate(tx, _identity_channel(), PROFILES, NO_NOISE, elapsed_s=0.0)
        assert np.allclose(rx_hot[0].symbols, 10 ** (6.0 / 20.0) * rx_ref[0].symbols)

    def test_general_matrix_mixing(self):
        rng = np.random.default_rng(6)
        tx = _tx_pair(rng)
        m = np.array([[1.0, 0.5], [0.25, 1.0]], dtype=complex)
        chan = draw_channel("fixed_los_like", N_SC, fixed_matrix=m)
        rx = propagate(tx, chan, PROFILES, NO_NOISE, elapsed_s=0.0)
        x = np.stack([tx[0].symbols, tx[1].symbols])
        assert np.allclose(rx[0].symbols, m[0, 0] * x[0] + m[0, 1] * x[1])
        assert np.allclose(rx[1].symbols, m[1, 0] * x[0] + m[1, 1] * x[1])

    def test_noise_variance(self):
        tx = [build_grid(WF, 0, 0), build_grid(WF, 0, 0)]
        noise = NoiseModel(variance=0.04, rng_seed=8)
        rx = propagate(tx, _identity_channel(), PROFILES, noise, elapsed_s=0.0)
        samples = np.concatenate([rx[0].symbols.ravel(), rx[1].symbols.ravel()])
        assert abs(np.var(samples) - 0.04) / 0.04 < 0.1
        assert abs(np.mean(samples)) < 0.01

    def test_noise_determinism(self):
        tx = [build_grid(WF, 0, 0), build_grid(WF, 0, 0)]
        noise = NoiseModel(variance=0.04, rng_seed=8)
        rng_a = np.random.default_rng(77)
        rng_b = np.random.default_rng(77)
        rx_a = propagate(tx, _identity_channel(), PROFILES, noise, elapsed_s=0.0, rng=rng_a)
        rx_b = propagate(tx, _identity_channel(), PROFILES, noise, elapsed_s=0.0, rng=rng_b)
        assert np.array_equal(rx_a[0].symbols, rx_b[0].symbols)

    def test_user_count_mismatch(self):
        rng = np.random.default_rng(9)
        tx = _tx_pair(rng)
        with pytest.raises(ConfigError):
            propagate(tx[:1], _identity_channel(), PROFILES, NO_NOISE, elapsed_s=0.0)
