"""OFDM resource grid and CP-OFDM modulation at the 10 MHz / 30 kHz numerology.

Frequency-domain convention: the active band is centered on DC, the DC bin
itself carries data, and both transforms are unitary (1/sqrt(N) scaling) so a
grid <-> time round trip preserves energy on the FFT bodies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CollisionError, ConfigError


@dataclass(frozen=True)
class WaveformConfig:
    """Numerology and grid dimensions of the uplink waveform."""

    n_prb: int = 24
    n_sc: int = 288
    fft_size: int = 512
    scs_hz: float = 30_000.0
    fs_sps: float = 15_360_000.0
    fc_hz: float = 3_319_680_000.0  # bookkeeping only, never used in DSP
    symbols_per_slot: int = 14
    slots_per_frame: int = 20
    slot_duration_s: float = 0.0005

    def __post_init__(self):
        if self.n_sc != 12 * self.n_prb:
            raise ConfigError(f"n_sc must be 12*n_prb, got {self.n_sc}")
        if self.fs_sps != self.fft_size * self.scs_hz:
            raise ConfigError("fs_sps must equal fft_size * scs_hz")
        if self.fft_size < self.n_sc:
            raise ConfigError("fft_size must cover the active subcarriers")
        if abs(self.slots_per_frame * self.slot_duration_s - 0.010) > 1e-12:
            raise ConfigError("slots_per_frame * slot_duration_s must be 10 ms")

    @property
    def samples_per_slot(self) -> int:
        return round(self.fs_sps * self.slot_duration_s)

    def cp_lengths(self) -> np.ndarray:
        """Per-symbol CP lengths; symbol 0 absorbs the slot's CP remainder."""
        total_cp = self.samples_per_slot - self.symbols_per_slot * self.fft_size
        if total_cp < 0:
            raise ConfigError("sample budget smaller than the FFT bodies")
        base = total_cp // self.symbols_per_slot
        cps = np.full(self.symbols_per_slot, base, dtype=int)
        cps[0] = total_cp - base * (self.symbols_per_slot - 1)
        return cps

    def subcarrier_bins(self) -> np.ndarray:
        """FFT bin index of each active subcarrier (band centered on DC)."""
        offsets = np.arange(self.n_sc) - self.n_sc // 2
        return np.mod(offsets, self.fft_size)


@dataclass
class ResourceGrid:
    """One slot worth of frequency-domain resource elements."""

    symbols: np.ndarray  # complex, shape (n_sc, symbols_per_slot)
    slot_idx: int = 0
    frame_idx: int = 0

    @property
    def n_sc(self) -> int:
        return self.symbols.shape[0]

    @property
    def n_sym(self) -> int:
        return self.symbols.shape[1]

    def copy(self) -> "ResourceGrid":
        return ResourceGrid(self.symbols.copy(), self.slot_idx, self.frame_idx)


@dataclass
class TimeSignal:
    """Baseband sample stream for one slot."""

    samples: np.ndarray  # complex 1-D
    slot_idx: int = 0
    frame_idx: int = 0

    @property
    def length(self) -> int:
        return self.samples.shape[0]


def build_grid(config: WaveformConfig, frame_idx: int, slot_idx: int) -> ResourceGrid:
    """Allocate an all-zero grid for the given slot."""
    if not 0 <= slot_idx < config.slots_per_frame:
        raise IndexError(f"slot_idx {slot_idx} outside frame of {config.slots_per_frame} slots")
    symbols = np.zeros((config.n_sc, config.symbols_per_slot), dtype=np.complex128)
    return ResourceGrid(symbols, slot_idx=slot_idx, frame_idx=frame_idx)


def map_symbols(grid: ResourceGrid, positions, values) -> ResourceGrid:
    """Write `values` at (subcarrier, symbol) `positions`; other REs untouched.

    Duplicate positions within one call are rejected rather than silently
    overwritten.
    """
    pos = np.asarray(positions, dtype=int)
    vals = np.asarray(values, dtype=np.complex128)
    if pos.size == 0:
        return grid
    pos = pos.reshape(-1, 2)
    if pos.shape[0] != vals.reshape(-1).shape[0]:
        raise ValueError("positions and values length mismatch")
    sc, sym = pos[:, 0], pos[:, 1]
    if sc.min() < 0 or sc.max() >= grid.n_sc or sym.min() < 0 or sym.max() >= grid.n_sym:
        raise IndexError("position outside grid bounds")
    flat = sc * grid.n_sym + sym
    if np.unique(flat).size != flat.size:
        raise CollisionError("duplicate resource-element position in one call")
    grid.symbols[sc, sym] = vals.reshape(-1)
    return grid


def extract_symbols(grid: ResourceGrid, positions) -> np.ndarray:
    """Read grid values at (subcarrier, symbol) positions."""
    pos = np.asarray(positions, dtype=int).reshape(-1, 2)
    return grid.symbols[pos[:, 0], pos[:, 1]]


def ofdm_modulate(grid: ResourceGrid, config: WaveformConfig) -> TimeSignal:
    """CP-OFDM modulate one slot: unitary IFFT per symbol plus cyclic prefix."""
    if grid.symbols.shape != (config.n_sc, config.symbols_per_slot):
        raise ConfigError(
            f"grid shape {grid.symbols.shape} does not match config "
            f"({config.n_sc}, {config.symbols_per_slot})"
        )
    bins = config.subcarrier_bins()
    spectrum = np.zeros((config.fft_size, config.symbols_per_slot), dtype=np.complex128)
    spectrum[bins, :] = grid.symbols
    bodies = np.fft.ifft(spectrum, axis=0, norm="ortho")

    cps = config.cp_lengths()
    out = np.empty(config.samples_per_slot, dtype=np.complex128)
    pos = 0
    for i in range(config.symbols_per_slot):
        cp = cps[i]
        body = bodies[:, i]
        out[pos : pos + cp] = body[-cp:]
        out[pos + cp : pos + cp + config.fft_size] = body
        pos += cp + config.fft_size
    return TimeSignal(out, slot_idx=grid.slot_idx, frame_idx=grid.frame_idx)


def ofdm_demodulate(signal: TimeSignal, config: WaveformConfig) -> ResourceGrid:
    """Inverse of :func:`ofdm_modulate`: strip CPs, unitary FFT, pick active bins."""
    if signal.length != config.samples_per_slot:
        raise ValueError(
            f"signal length {signal.length} != {config.samples_per_slot} samples per slot"
        )
    cps = config.cp_lengths()
    bodies = np.empty((config.fft_size, config.symbols_per_slot), dtype=np.complex128)
    pos = 0
    for i in range(config.symbols_per_slot):
        pos += cps[i]
        bodies[:, i] = signal.samples[pos : pos + config.fft_size]
        pos += config.fft_size
    spectrum = np.fft.fft(bodies, axis=0, norm="ortho")
    grid = ResourceGrid(
        np.ascontiguousarray(spectrum[config.subcarrier_bins(), :]),
        slot_idx=signal.slot_idx,
        frame_idx=signal.frame_idx,
    )
    return grid
