"""Reference-signal patterns.

Two pilot families, both unit-modulus QPSK so LS estimation reduces to a
conjugate multiply:

* wideband sounding pilots (one OFDM symbol, 20 PRB, TDM across users),
* in-allocation demodulation pilots (one symbol, every other subcarrier).

Sequences are pseudorandom, fixed per (user, occasion) via seeded generators,
and shared verbatim between transmitter and receiver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

SRS_SYMBOL = 13
SRS_N_PRB = 20
DMRS_SYMBOL = 2
DMRS_STRIDE = 2

_QPSK_POINTS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


def _qpsk_sequence(length: int, seed_key) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))
    return _QPSK_POINTS[rng.integers(0, 4, size=length)]


@dataclass(frozen=True)
class SrsPattern:
    """Wideband sounding pilot for one user in one sounding slot."""

    user: int
    n_prb: int = SRS_N_PRB
    symbol: int = SRS_SYMBOL
    sequence: np.ndarray = field(default=None, repr=False)

    @property
    def n_sc(self) -> int:
        return 12 * self.n_prb

    def subcarriers(self) -> np.ndarray:
        return np.arange(self.n_sc)

    def positions(self) -> np.ndarray:
        """(subcarrier, symbol) pairs in grid mapping order."""
        sc = self.subcarriers()
        return np.stack([sc, np.full_like(sc, self.symbol)], axis=1)


@dataclass(frozen=True)
class DmrsPattern:
    """Per-layer demodulation pilot inside a PUSCH allocation."""

    user: int
    prb_start: int
    n_prb: int
    symbol: int = DMRS_SYMBOL
    sequence: np.ndarray = field(default=None, repr=False)

    def subcarriers(self) -> np.ndarray:
        base = 12 * self.prb_start
        return base + np.arange(0, 12 * self.n_prb, DMRS_STRIDE)

    def positions(self) -> np.ndarray:
        sc = self.subcarriers()
        return np.stack([sc, np.full_like(sc, self.symbol)], axis=1)


def gen_srs(user: int, occasion: int, n_prb: int = SRS_N_PRB) -> SrsPattern:
    """Sounding pilot for `user` at sounding occasion index `occasion`.

    The sequence depends on both arguments, so repeated occasions stay
    distinguishable while remaining reproducible.
    """
    if n_prb <= 0:
        raise ConfigError("n_prb must be positive")
    seq = _qpsk_sequence(12 * n_prb, [0x5B5, user, occasion])
    return SrsPattern(user=user, n_prb=n_prb, sequence=seq)


def gen_dmrs(user: int, frame_idx: int, slot_idx: int, prb_start: int, n_prb: int) -> DmrsPattern:
    """Demodulation pilot for one user's allocation in one slot.

    Both layers use the same RE positions for a given allocation; only the
    sequences differ, which is what the per-layer phase estimator relies on.
    """
    if n_prb <= 0:
        raise ConfigError("n_prb must be positive")
    if prb_start < 0:
        raise ConfigError("prb_start must be nonnegative")
    n_pilot = (12 * n_prb) // DMRS_STRIDE
    seq = _qpsk_sequence(n_pilot, [0xD35, user, frame_idx, slot_idx, prb_start, n_prb])
    return DmrsPattern(user=user, prb_start=prb_start, n_prb=n_prb, sequence=seq)
