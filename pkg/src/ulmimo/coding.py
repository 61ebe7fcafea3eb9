"""Bit-level transport processing: CRC, convolutional FEC, scrambling, QPSK.

The FEC is the classic K=7 rate-1/2 code (generators 133/171 octal) with a
6-bit zero tail, decoded by a soft-input Viterbi. LLR convention is
positive-means-zero, so scrambling acts on LLRs as sign flips.
"""

from __future__ import annotations

import numpy as np
from numba import njit

CRC_BITS = 16
CONSTRAINT = 7
TAIL = CONSTRAINT - 1
G0 = 0o133
G1 = 0o171

_QPSK_SCALE = 1.0 / np.sqrt(2.0)


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection."""
    reg = 0xFFFF
    for byte in data:
        reg ^= byte << 8
        for _ in range(8):
            if reg & 0x8000:
                reg = ((reg << 1) ^ 0x1021) & 0xFFFF
            else:
                reg = (reg << 1) & 0xFFFF
    return reg


def bits_from_bytes(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bytes_from_bits(bits: np.ndarray) -> bytes:
    return np.packbits(bits.astype(np.uint8)).tobytes()


def _gen_taps(gen: int) -> np.ndarray:
    return np.array([(gen >> (CONSTRAINT - 1 - i)) & 1 for i in range(CONSTRAINT)], dtype=np.uint8)


def conv_encode(msg_bits: np.ndarray) -> np.ndarray:
    """Rate-1/2 terminated encoding; output interleaves the two generators.

    Output length is 2 * (len(msg_bits) + 6) thanks to the zero tail.
    """
    m = np.asarray(msg_bits, dtype=np.uint8)
    c0 = np.convolve(m, _gen_taps(G0)) % 2
    c1 = np.convolve(m, _gen_taps(G1)) % 2
    out = np.empty(2 * c0.size, dtype=np.uint8)
    out[0::2] = c0
    out[1::2] = c1
    return out


def _branch_tables():
    """(out0, out1, next_state) for each (state, input) pair; 64 states."""
    n_states = 1 << TAIL
    out0 = np.zeros((n_states, 2), dtype=np.uint8)
    out1 = np.zeros((n_states, 2), dtype=np.uint8)
    nxt = np.zeros((n_states, 2), dtype=np.uint8)
    for s in range(n_states):
        for b in range(2):
            reg = (b << TAIL) | s  # bit 6 = current input, bit 0 = oldest
            out0[s, b] = bin(reg & G0).count("1") & 1
            out1[s, b] = bin(reg & G1).count("1") & 1
            nxt[s, b] = (b << (TAIL - 1)) | (s >> 1)
    return out0, out1, nxt

_OUT0, _OUT1, _NEXT = _branch_tables()


@njit(cache=True)
def _viterbi_core(llrs, n_msg, out0, out1, nxt):
    n_states = out0.shape[0]
    n_steps = n_msg + TAIL
    neg = -1e30
    pm = np.full(n_states, neg)
    pm[0] = 0.0
    surv_bit = np.zeros((n_steps, n_states), dtype=np.uint8)
    surv_from = np.zeros((n_steps, n_states), dtype=np.uint8)
    for k in range(n_steps):
        l0 = llrs[2 * k]
        l1 = llrs[2 * k + 1]
        new_pm = np.full(n_states, neg)
        b_max = 1 if k < n_msg else 0  # tail steps only shift in zeros
        for s in range(n_states):
            if pm[s] <= neg * 0.5:
                continue
            for b in range(b_max + 1):
                metric = pm[s]
                metric += l0 * (1.0 - 2.0 * out0[s, b])
                metric += l1 * (1.0 - 2.0 * out1[s, b])
                ns = nxt[s, b]
                if metric > new_pm[ns]:
                    new_pm[ns] = metric
                    surv_bit[k, ns] = b
                    surv_from[k, ns] = s
        pm = new_pm
    bits = np.zeros(n_msg, dtype=np.uint8)
    s = 0  # termination forces the zero state
    for k in range(n_steps - 1, -1, -1):
        if k < n_msg:
            bits[k] = surv_bit[k, s]
        s = surv_from[k, s]
    return bits


def viterbi_decode(llrs: np.ndarray, n_msg: int) -> np.ndarray:
    """Soft-decision decode of a terminated rate-1/2 block.

    `llrs` must hold exactly 2 * (n_msg + 6) values, positive meaning a
    zero coded bit is more likely.
    """
    llrs = np.ascontiguousarray(llrs, dtype=np.float64)
    if llrs.size != 2 * (n_msg + TAIL):
        raise ValueError(f"expected {2 * (n_msg + TAIL)} LLRs, got {llrs.size}")
    return _viterbi_core(llrs, n_msg, _OUT0, _OUT1, _NEXT)


def scrambling_sequence(length: int, user: int, frame_idx: int, slot_idx: int) -> np.ndarray:
    """Per-(user, slot) pseudorandom bit sequence shared by both link ends."""
    rng = np.random.default_rng(np.random.SeedSequence([0x5C2, user, frame_idx, slot_idx]))
    return rng.integers(0, 2, size=length).astype(np.uint8)


def scramble_bits(bits: np.ndarray, user: int, frame_idx: int, slot_idx: int) -> np.ndarray:
    seq = scrambling_sequence(bits.size, user, frame_idx, slot_idx)
    return bits.astype(np.uint8) ^ seq


def descramble_llrs(llrs: np.ndarray, user: int, frame_idx: int, slot_idx: int) -> np.ndarray:
    """Undo scrambling in the LLR domain: a flipped bit flips the LLR sign."""
    seq = scrambling_sequence(llrs.size, user, frame_idx, slot_idx)
    return llrs * (1.0 - 2.0 * seq.astype(np.float64))


def qpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped QPSK, unit average energy; bit pairs are (I, Q)."""
    b = np.asarray(bits, dtype=np.uint8)
    if b.size % 2:
        raise ValueError("QPSK needs an even number of bits")
    i = 1.0 - 2.0 * b[0::2]
    q = 1.0 - 2.0 * b[1::2]
    return (i + 1j * q) * _QPSK_SCALE


def qpsk_llrs(symbols: np.ndarray, noise_var) -> np.ndarray:
    """Max-log LLRs for Gray QPSK under complex AWGN of variance `noise_var`.

    `noise_var` may be a scalar or a per-symbol array.
    """
    nv = np.maximum(np.asarray(noise_var, dtype=np.float64), 1e-12)
    scale = 2.0 * np.sqrt(2.0) / nv
    out = np.empty(2 * symbols.size, dtype=np.float64)
    out[0::2] = scale * symbols.real
    out[1::2] = scale * symbols.imag
    return out
