"""CRC, convolutional code, scrambling, and QPSK soft metrics."""

import numpy as np
import pytest

from ulmimo.coding import (
    bits_from_bytes,
    bytes_from_bits,
    conv_encode,
    crc16,
    descramble_llrs,
    qpsk_llrs,
    qpsk_modulate,
    scramble_bits,
    scrambling_sequence,
    viterbi_decode,
)


class TestCrc16:
    def test_check_value(self):
        """Standard check input '123456789' produces 0x29B1."""
        assert crc16(b"123456789") == 0x29B1

    def test_empty_is_init(self):
        assert crc16(b"") == 0xFFFF

    def test_zero_payload_nonzero(self):
        assert crc16(bytes(10)) != 0

    def test_single_bit_sensitivity(self):
        a = crc16(bytes([0x00, 0x01]))
        b = crc16(bytes([0x00, 0x03]))
        assert a != b


class TestBitPacking:
    def test_round_trip(self):
        payload = bytes(range(256))
        assert bytes_from_bits(bits_from_bytes(payload)) == payload

    def test_msb_first(self):
        assert np.array_equal(bits_from_bytes(b"\x80"), [1, 0, 0, 0, 0, 0, 0, 0])


class TestConvEncode:
    def test_impulse_response(self):
        """A single 1 input reads out both generator taps."""
        coded = conv_encode(np.array([1], dtype=np.uint8))
        c0 = coded[0::2]
        c1 = coded[1::2]
        assert np.array_equal(c0, [1, 0, 1, 1, 0, 1, 1])  # 0o133
        assert np.array_equal(c1, [1, 1, 1, 1, 0, 0, 1])  # 0o171

    def test_zero_message(self):
        coded = conv_encode(np.zeros(20, dtype=np.uint8))
        assert np.all(coded == 0)

    def test_output_length(self):
        for n in (1, 7, 100):
            coded = conv_encode(np.zeros(n, dtype=np.uint8))
            assert len(coded) == 2 * (n + 6)

    def test_linearity(self):
        rng = np.random.default_rng(0)
        a = rng.integers(0, 2, 40).astype(np.uint8)
        b = rng.integers(0, 2, 40).astype(np.uint8)
        assert np.array_equal(conv_encode(a ^ b), conv_encode(a) ^ conv_encode(b))


class TestViterbi:
    def test_noiseless_loopback(self):
        rng = np.random.default_rng(1)
        msg = rng.integers(0, 2, 200).astype(np.uint8)
        coded = conv_encode(msg)
        llrs = (1.0 - 2.0 * coded) * 8.0  # positive LLR means bit 0
        assert np.array_equal(viterbi_decode(llrs, len(msg)), msg)

    def test_corrects_sporadic_flips(self):
        rng = np.random.default_rng(2)
        msg = rng.integers(0, 2, 200).astype(np.uint8)
        coded = conv_encode(msg)
        llrs = (1.0 - 2.0 * coded) * 8.0
        llrs[::40] *= -1.0
        assert np.array_equal(viterbi_decode(llrs, len(msg)), msg)

    def test_llr_count_validation(self):
        with pytest.raises(ValueError):
            viterbi_decode(np.zeros(100), 50)

    @pytest.mark.slow
    def test_awgn_block_error_rate(self):
        """Rate-1/2 K=7 at 4 dB Eb/N0: block error rate below 10% on 100-byte blocks."""
        rng = np.random.default_rng(3)
        ebn0 = 10 ** (4.0 / 10.0)
        # rate 1/2, unit-energy BPSK per coded bit
        noise_var = 1.0 / (2 * 0.5 * ebn0)
        errors = 0
        n_blocks = 1000
        for _ in range(n_blocks):
            msg = rng.integers(0, 2, 800).astype(np.uint8)
            coded = conv_encode(msg)
            tx = 1.0 - 2.0 * coded.astype(float)
            rx = tx + rng.normal(scale=np.sqrt(noise_var), size=tx.shape)
            llrs = 2.0 * rx / noise_var
            if not np.array_equal(viterbi_decode(llrs, len(msg)), msg):
                errors += 1
        assert errors / n_blocks < 0.10, f"BLER {errors / n_blocks:.3f}"


class TestScrambling:
    def test_determinism(self):
        a = scrambling_sequence(100, 0, 1, 2)
        b = scrambling_sequence(100, 0, 1, 2)
        assert np.array_equal(a, b)

    def test_user_and_slot_sensitivity(self):
        base = scrambling_sequence(100, 0, 1, 2)
        assert not np.array_equal(base, scrambling_sequence(100, 1, 1, 2))
        assert not np.array_equal(base, scrambling_sequence(100, 0, 1, 3))

    def test_involution(self):
        rng = np.random.default_rng(4)
        bits = rng.integers(0, 2, 100).astype(np.uint8)
        twice = scramble_bits(scramble_bits(bits, 0, 0, 0), 0, 0, 0)
        assert np.array_equal(twice, bits)

    def test_llr_descramble_consistency(self):
        """Descrambling LLRs of scrambled bits equals LLRs of the plain bits."""
        rng = np.random.default_rng(5)
        bits = rng.integers(0, 2, 100).astype(np.uint8)
        scrambled = scramble_bits(bits, 0, 0, 0)
        llrs = 1.0 - 2.0 * scrambled.astype(float)
        assert np.array_equal(descramble_llrs(llrs, 0, 0, 0), 1.0 - 2.0 * bits.astype(float))


class TestQpsk:
    def test_mapping_corners(self):
        sym = qpsk_modulate(np.array([0, 0, 1, 1], dtype=np.uint8))
        s = 1 / np.sqrt(2)
        assert sym[0] == pytest.approx(s + 1j * s)
        assert sym[1] == pytest.approx(-s - 1j * s)

    def test_unit_energy(self):
        rng = np.random.default_rng(6)
        bits = rng.integers(0, 2, 2000).astype(np.uint8)
        sym = qpsk_modulate(bits)
        assert np.allclose(np.abs(sym), 1.0)

    def test_odd_length_rejected(self):
        with pytest.raises(ValueError):
            qpsk_modulate(np.array([1], dtype=np.uint8))

    def test_llr_signs(self):
        s = 1 / np.sqrt(2)
        llrs = qpsk_llrs(np.array([s + 1j * s, -s - 1j * s]), noise_var=0.1)
        assert llrs[0] > 0 and llrs[1] > 0
        assert llrs[2] < 0 and llrs[3] < 0

    def test_llr_scale(self):
        """Max-log metric: LLR = 2*sqrt(2)*component/noise_var."""
        sym = np.array([0.5 - 0.25j])
        llrs = qpsk_llrs(sym, noise_var=0.1)
        assert llrs[0] == pytest.approx(2 * np.sqrt(2) * 0.5 / 0.1)
        assert llrs[1] == pytest.approx(2 * np.sqrt(2) * -0.25 / 0.1)

    def test_llr_array_noise(self):
        sym = np.array([0.5 + 0.5j, 0.5 + 0.5j])
        llrs = qpsk_llrs(sym, noise_var=np.array([0.1, 0.2]))
        assert llrs[0] == pytest.approx(2 * llrs[2])

    def test_loopback_through_llrs(self):
        rng = np.random.default_rng(7)
        bits = rng.integers(0, 2, 400).astype(np.uint8)
        llrs = qpsk_llrs(qpsk_modulate(bits), noise_var=0.01)
        assert np.array_equal((llrs < 0).astype(np.uint8), bits)
