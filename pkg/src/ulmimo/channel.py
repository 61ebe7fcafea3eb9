"""Frequency-domain 2x2 uplink channel with residual CFO and AWGN.

Per resource element the receive model is y = H * Theta * x + n, with
Theta = diag(exp(j*theta_u)) collecting each user's residual-CFO phase since
the last sounding occasion. The channel itself is block-constant over a slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import ResourceGrid

CHANNEL_MODELS = ("iid_rayleigh", "fixed_los_like")


@dataclass(frozen=True)
class UeProfile:
    """Transmit-side impairment profile of one user."""

    user: int
    cfo_hz: float = 0.0
    tx_power_db: float = 0.0
    channel_seed: int = 0
    srs_data_delay_s: float = 0.0  # default pilot-to-data gap when not tracked

    def __post_init__(self):
        if self.srs_data_delay_s < 0:
            raise ConfigError("srs_data_delay_s must be nonnegative")


@dataclass
class ChannelRealization:
    """One realization of the M x K channel, per subcarrier."""

    h: np.ndarray  # complex, shape (n_sc, M, K)
    model: str = "fixed_los_like"
    coherent: bool = True  # False lets the runner redraw between soundings

    @property
    def n_sc(self) -> int:
        return self.h.shape[0]

    @property
    def n_rx(self) -> int:
        return self.h.shape[1]

    @property
    def n_users(self) -> int:
        return self.h.shape[2]


@dataclass(frozen=True)
class NoiseModel:
    """Complex AWGN with total per-RE variance `variance` on each antenna."""

    variance: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise ConfigError("noise variance must be nonnegative")


def correlated_columns(rho: float) -> np.ndarray:
    """Unit-norm 2x2 matrix whose columns have inner product `rho`."""
    if not 0 <= rho < 1:
        raise ConfigError("rho must be in [0, 1)")
    return np.array(
        [[1.0, rho], [0.0, np.sqrt(1.0 - rho * rho)]], dtype=np.complex128
    )


def draw_channel(
    model: str,
    n_sc: int,
    n_rx: int = 2,
    n_users: int = 2,
    seed: int = 0,
    fixed_matrix: np.ndarray = None,
    draw_index: int = 0,
) -> ChannelRealization:
    """Draw one channel realization.

    `iid_rayleigh` draws CN(0, 1) entries independently per subcarrier;
    `fixed_los_like` repeats `fixed_matrix` (identity by default) across the
    band, which keeps the per-subcarrier response flat and deterministic.
    `draw_index` distinguishes successive redraws under one seed.
    """
    if model == "iid_rayleigh":
        rng = np.random.default_rng(np.random.SeedSequence([0xC4A, seed, draw_index]))
        h = (
            rng.standard_normal((n_sc, n_rx, n_users))
            + 1j * rng.standard_normal((n_sc, n_rx, n_users))
        ) / np.sqrt(2.0)
    elif model == "fixed_los_like":
        if fixed_matrix is None:
            fixed_matrix = np.eye(n_rx, n_users, dtype=np.complex128)
        fixed_matrix = np.asarray(fixed_matrix, dtype=np.complex128)
        if fixed_matrix.shape != (n_rx, n_users):
            raise ConfigError(f"fixed_matrix must be {(n_rx, n_users)}")
        h = np.broadcast_to(fixed_matrix, (n_sc, n_rx, n_users)).copy()
    else:
        raise ConfigError(f"unknown channel model {model!r}")
    return ChannelRealization(h=h, model=model)


def phase_rotation(cfo_hz: float, elapsed_s: float) -> float:
    """Accumulated residual-CFO phase, wrapped to (-pi, pi]."""
    theta = 2.0 * np.pi * cfo_hz * elapsed_s
    return np.pi - (np.pi - theta) % (2.0 * np.pi)


def propagate(
    tx_grids,
    channel: ChannelRealization,
    profiles,
    noise: NoiseModel,
    elapsed_s=None,
    rng: np.random.Generator = None,
):
    """Mix user grids through the channel onto receive-antenna grids.

    `tx_grids` is one ResourceGrid per user (zeros where a user is silent).
    Each user's grid is scaled by its linear Tx amplitude, rotated by its
    accumulated CFO phase theta_u = phase_rotation(cfo_u, elapsed_u), mixed
    through H, and AWGN is added per antenna. `elapsed_s` is a scalar or one
    value per user; omitted, each profile's srs_data_delay_s is used.
    Returns a list of n_rx ResourceGrids.
    """
    if len(tx_grids) != channel.n_users or len(profiles) != channel.n_users:
        raise ConfigError("one grid and one profile per user required")
    n_sc, n_sym = tx_grids[0].symbols.shape
    if n_sc != channel.n_sc:
        raise ConfigError("grid and channel subcarrier counts differ")
    if elapsed_s is None:
        elapsed = [p.srs_data_delay_s for p in profiles]
    else:
        elapsed = np.broadcast_to(np.asarray(elapsed_s, dtype=float), (len(profiles),))

    x = np.stack([g.symbols for g in tx_grids], axis=0)  # (K, n_sc, n_sym)
    for u, prof in enumerate(profiles):
        amp = 10.0 ** (prof.tx_power_db / 20.0)
        theta = phase_rotation(prof.cfo_hz, elapsed[u])
        x[u] *= amp * np.exp(1j * theta)

    # y_m = sum_u H[m, u] * x_u, vectorized over the whole grid
    y = np.einsum("smu,usn->msn", channel.h, x)

    if noise.variance > 0:
        if rng is None:
            rng = np.random.default_rng(noise.rng_seed)
        scale = np.sqrt(noise.variance / 2.0)
        y = y + scale * (
            rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        )

    ref = tx_grids[0]
    return [
        ResourceGrid(np.ascontiguousarray(y[m]), ref.slot_idx, ref.frame_idx)
        for m in range(channel.n_rx)
    ]
