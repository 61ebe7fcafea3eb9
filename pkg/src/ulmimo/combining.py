"""Linear receive combining: MRC and RZF, in float and in fixed point.

Weights are stored as W with shape (n_sc, n_layers, n_rx) so that the layer
estimates at one RE are x_hat = W[s] @ y. MRC uses W = H^H; RZF uses
W = (H^H H + sigma*I)^(-1) H^H with a closed-form 2x2 inverse.

The fixed-point path mirrors a hardware datapath: weights and inputs in
two's-complement Q(word_bits, frac_bits), int64 accumulation, one rounding
shift back to the I/O format, saturation counted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SingularChannelError, StaleCsiError
from .estimation import ChannelState

_SINGULAR_REL_TOL = 1e-12


@dataclass
class Combiner:
    """Per-subcarrier linear combining weights."""

    weights: np.ndarray  # complex, shape (n_sc, n_layers, n_rx)
    kind: str = "rzf"
    sigma: float = 0.0
    source_slot: np.ndarray = None  # per-user slot index of the CSI used

    @property
    def n_sc(self) -> int:
        return self.weights.shape[0]

    @property
    def n_layers(self) -> int:
        return self.weights.shape[1]


@dataclass
class FixedCombiner:
    """Quantized combining weights plus the shared block scale."""

    weights_int: np.ndarray  # int32, same shape as Combiner.weights, complex split
    scale_exponent: int
    word_bits: int = 16
    frac_bits: int = 12
    kind: str = "rzf"

    @property
    def max_int(self) -> int:
        return (1 << (self.word_bits - 1)) - 1

    @property
    def min_int(self) -> int:
        return -(1 << (self.word_bits - 1))

    def dequantize(self) -> np.ndarray:
        scale = 2.0 ** (self.frac_bits + self.scale_exponent)
        return (self.weights_int[..., 0] + 1j * self.weights_int[..., 1]) / scale


def compute_mrc(state: ChannelState) -> Combiner:
    """Matched-filter weights W = H^H from the current channel estimate."""
    for u in range(state.h_est.shape[2]):
        state.require_valid(u)
    w = np.conj(np.transpose(state.h_est, (0, 2, 1)))
    return Combiner(
        weights=np.ascontiguousarray(w),
        kind="mrc",
        sigma=0.0,
        source_slot=state.last_update_slot.copy(),
    )


def compute_rzf(state: ChannelState, sigma: float) -> Combiner:
    """Regularized zero-forcing weights W = (H^H H + sigma*I)^(-1) H^H.

    The 2x2 Gram inverse is closed form. With sigma = 0 this is plain ZF and
    a (near-)singular Gram matrix raises instead of emitting garbage weights.
    """
    if sigma < 0:
        raise ConfigError("sigma must be nonnegative")
    for u in range(state.h_est.shape[2]):
        state.require_valid(u)
    h = state.h_est
    if h.shape[2] != 2:
        raise ConfigError("closed-form inverse implemented for 2 layers")
    hh = np.conj(np.transpose(h, (0, 2, 1)))  # (n_sc, K, M)
    gram = np.einsum("skm,sml->skl", hh, h)  # (n_sc, 2, 2)
    a = gram[:, 0, 0] + sigma
    b = gram[:, 0, 1]
    c = gram[:, 1, 0]
    d = gram[:, 1, 1] + sigma
    det = a * d - b * c
    if sigma == 0.0:
        tr_half = np.real(a + d) / 2.0
        bad = np.abs(det) <= _SINGULAR_REL_TOL * tr_half * tr_half
        if np.any(bad):
            s = int(np.argmax(bad))
            raise SingularChannelError(s, float(np.abs(det[s])))
    inv = np.empty_like(gram)
    inv[:, 0, 0] = d
    inv[:, 0, 1] = -b
    inv[:, 1, 0] = -c
    inv[:, 1, 1] = a
    inv /= det[:, None, None]
    w = np.einsum("skl,slm->skm", inv, hh)
    return Combiner(
        weights=np.ascontiguousarray(w),
        kind="rzf",
        sigma=sigma,
        source_slot=state.last_update_slot.copy(),
    )


def apply_combiner(combiner: Combiner, rx_res: np.ndarray, subcarriers) -> np.ndarray:
    """Combine per-RE antenna observations into layer estimates.

    `rx_res` has shape (n_re, n_rx) and `subcarriers` selects the weight row
    used for each RE. Returns (n_re, n_layers).
    """
    sc = np.asarray(subcarriers, dtype=int)
    if sc.size and (sc.min() < 0 or sc.max() >= combiner.n_sc):
        raise StaleCsiError("no combiner weights for a requested subcarrier")
    w = combiner.weights[sc]
    return np.einsum("rlm,rm->rl", w, rx_res)


def quantize_combiner(
    combiner: Combiner, word_bits: int = 16, frac_bits: int = 12
) -> FixedCombiner:
    """Quantize weights to Q(word_bits, frac_bits) with a shared block scale.

    The scale exponent only ever downscales (it is <= 0): weights already
    representable in the format keep scale 0, oversized weight sets are
    scaled down in powers of two until the largest component fits.
    """
    if word_bits < 2 or not 0 <= frac_bits < word_bits:
        raise ConfigError("invalid fixed-point format")
    max_int = (1 << (word_bits - 1)) - 1
    max_abs = float(
        max(np.max(np.abs(combiner.weights.real)), np.max(np.abs(combiner.weights.imag)))
    )
    exponent = 0
    if max_abs > 0:
        while max_abs * 2.0 ** (frac_bits + exponent) > max_int:
            exponent -= 1
    scale = 2.0 ** (frac_bits + exponent)
    w_int = np.empty(combiner.weights.shape + (2,), dtype=np.int32)
    w_int[..., 0] = np.clip(np.rint(combiner.weights.real * scale), -max_int - 1, max_int)
    w_int[..., 1] = np.clip(np.rint(combiner.weights.imag * scale), -max_int - 1, max_int)
    return FixedCombiner(
        weights_int=w_int,
        scale_exponent=exponent,
        word_bits=word_bits,
        frac_bits=frac_bits,
        kind=combiner.kind,
    )


def _saturate(values: np.ndarray, lo: int, hi: int):
    clipped = np.clip(values, lo, hi)
    return clipped, int(np.count_nonzero(values != clipped))


def apply_combiner_fixed(
    fixed: FixedCombiner, rx_res: np.ndarray, subcarriers
) -> tuple[np.ndarray, int]:
    """Integer matrix-vector combining.

    Inputs are quantized to the same Q format as the weights, products are
    accumulated in int64, and a single round-half-up shift returns the result
    to Q(word_bits, frac_bits). Returns (layer estimates as complex floats,
    total saturation count across input and output quantization).
    """
    sc = np.asarray(subcarriers, dtype=int)
    if sc.size and (sc.min() < 0 or sc.max() >= fixed.weights_int.shape[0]):
        raise StaleCsiError("no combiner weights for a requested subcarrier")
    in_scale = 1 << fixed.frac_bits
    lo, hi = fixed.min_int, fixed.max_int

    y_re, sat_re = _saturate(np.rint(rx_res.real * in_scale).astype(np.int64), lo, hi)
    y_im, sat_im = _saturate(np.rint(rx_res.imag * in_scale).astype(np.int64), lo, hi)
    saturations = sat_re + sat_im

    w = fixed.weights_int[sc].astype(np.int64)  # (n_re, L, M, 2)
    w_re, w_im = w[..., 0], w[..., 1]
    acc_re = np.einsum("rlm,rm->rl", w_re, y_re) - np.einsum("rlm,rm->rl", w_im, y_im)
    acc_im = np.einsum("rlm,rm->rl", w_re, y_im) + np.einsum("rlm,rm->rl", w_im, y_re)

    # accumulator scale is 2^(2*frac + exponent); one shift back to 2^frac
    shift = fixed.frac_bits + fixed.scale_exponent
    if shift > 0:
        half = np.int64(1) << (shift - 1)
        out_re = (acc_re + half) >> shift
        out_im = (acc_im + half) >> shift
    else:
        out_re = acc_re << (-shift)
        out_im = acc_im << (-shift)
    out_re, sat_re = _saturate(out_re, lo, hi)
    out_im, sat_im = _saturate(out_im, lo, hi)
    saturations += sat_re + sat_im

    out = (out_re + 1j * out_im) / float(in_scale)
    return out, saturations
