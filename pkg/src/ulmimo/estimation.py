"""Channel, noise, and residual-phase estimation from the two pilot families.

Sounding pilots give a per-antenna, per-user wideband LS channel estimate and
a noise-variance estimate; demodulation pilots give a single post-combining
phase per layer per slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StaleCsiError
from .pilots import DmrsPattern, SrsPattern

PRB_SC = 12


@dataclass
class ChannelState:
    """Receiver-side channel knowledge, refreshed at sounding occasions."""

    h_est: np.ndarray  # complex, shape (n_sc, n_rx, n_users)
    noise_var: float = 0.0
    last_update_slot: np.ndarray = None  # absolute slot per user, -1 = never
    valid_prbs: set = field(default_factory=set)  # PRBs covered by sounding

    def __post_init__(self):
        if self.last_update_slot is None:
            self.last_update_slot = np.full(self.h_est.shape[2], -1, dtype=int)

    @property
    def n_sc(self) -> int:
        return self.h_est.shape[0]

    def valid(self, user: int) -> bool:
        return self.last_update_slot[user] >= 0

    def require_valid(self, user: int):
        if not self.valid(user):
            raise StaleCsiError(f"no channel estimate for user {user}")


def new_channel_state(n_sc: int, n_rx: int = 2, n_users: int = 2) -> ChannelState:
    return ChannelState(h_est=np.zeros((n_sc, n_rx, n_users), dtype=np.complex128))


def estimate_srs_channel(
    rx_grids, pattern: SrsPattern, state: ChannelState, abs_slot: int, smooth: bool = False
) -> ChannelState:
    """LS channel estimate from one user's sounding symbol.

    The pilot is unit modulus, so the LS solution per subcarrier is just
    y * conj(p). Updates `state` in place for the sounding user's column.
    `smooth` averages the raw estimate over each PRB (12 subcarriers),
    cutting estimation noise when the channel is flat within a PRB; it
    defaults off.
    """
    sc = pattern.subcarriers()
    if sc[-1] >= state.n_sc:
        raise ConfigError("sounding band exceeds channel-state width")
    p_conj = np.conj(pattern.sequence)
    n_blocks = sc.size // PRB_SC
    for m, grid in enumerate(rx_grids):
        h_raw = grid.symbols[sc, pattern.symbol] * p_conj
        if smooth:
            blocks = h_raw.reshape(n_blocks, PRB_SC).mean(axis=1, keepdims=True)
            h_raw = np.repeat(blocks, PRB_SC, axis=1).ravel()
        state.h_est[sc, m, pattern.user] = h_raw
    state.last_update_slot[pattern.user] = abs_slot
    state.valid_prbs.update(range(pattern.n_prb))
    return state


def estimate_noise(rx_grids, pattern: SrsPattern, chan_est: ChannelState) -> float:
    """Noise variance from sounding residuals y - h_ref * p.

    The per-subcarrier LS fit has zero residual by construction, so the
    reference h_ref is the stored estimate averaged over each PRB (12
    subcarriers). The mean removes one noise DOF per block; the L/(L-1)
    factor makes the residual power unbiased when the channel is flat
    within a PRB.
    """
    sc = pattern.subcarriers()
    chan_est.require_valid(pattern.user)
    n_blocks = sc.size // PRB_SC
    total = 0.0
    count = 0
    for m, grid in enumerate(rx_grids):
        y = grid.symbols[sc, pattern.symbol].reshape(n_blocks, PRB_SC)
        h_col = chan_est.h_est[sc, m, pattern.user].reshape(n_blocks, PRB_SC)
        h_ref = h_col.mean(axis=1, keepdims=True)
        p = pattern.sequence.reshape(n_blocks, PRB_SC)
        resid = y - h_ref * p
        total += float(np.sum(np.abs(resid) ** 2)) * PRB_SC / (PRB_SC - 1)
        count += y.size
    return total / count


def estimate_phase(combined_pilots: np.ndarray, pattern: DmrsPattern) -> float:
    """Residual phase of one combined layer from its demodulation pilots.

    Correlates the received (post-combining) pilot REs against the known
    sequence and takes the angle of the sum, i.e. the ML estimate of a common
    rotation under white noise. Returned in (-pi, pi].
    """
    if combined_pilots.size == 0:
        raise ConfigError("no pilot observations")
    if combined_pilots.shape != pattern.sequence.shape:
        raise ConfigError("pilot observation/sequence length mismatch")
    corr = np.sum(combined_pilots * np.conj(pattern.sequence))
    theta = float(np.angle(corr))
    return np.pi if theta == -np.pi else theta
