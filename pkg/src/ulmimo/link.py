"""Per-slot transmit and receive processing for the two-user uplink.

Transmit side builds one grid per user from its grant: demodulation pilots on
the shared pilot symbol, coded QPSK on the remaining REs; a user scheduled to
sound sends only its sounding symbol that slot.

Receive side follows the per-slot task order of the base station pipeline:
control first (stub), then sounding (channel + noise estimate, both combiners
recomputed), then data. Data decoding runs on the mode-appropriate combiner
(RZF with spatial reuse on, MRC otherwise), but both combined streams are
evaluated for EVM so the constellation artifacts always carry the
received / MRC / RZF triple.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import coding
from .combining import (
    Combiner,
    FixedCombiner,
    apply_combiner,
    apply_combiner_fixed,
    compute_mrc,
    compute_rzf,
    quantize_combiner,
)
from .errors import CapacityError, ConfigError
from .estimation import (
    ChannelState,
    estimate_noise,
    estimate_phase,
    estimate_srs_channel,
    new_channel_state,
)
from .grid import ResourceGrid, WaveformConfig, build_grid, extract_symbols, map_symbols
from .mac import PuschAlloc, SlotSchedule
from .pilots import DMRS_SYMBOL, gen_dmrs, gen_srs

_QPSK_POINTS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


@dataclass
class TransportBlock:
    """One MAC payload bound for one slot."""

    user: int
    payload: bytes
    frame_idx: int
    slot_idx: int
    crc_bits: int = coding.CRC_BITS
    mcs: int = 4  # fixed QPSK rate 1/2; bookkeeping only

    @property
    def coded_bits(self) -> int:
        return 2 * (8 * len(self.payload) + self.crc_bits + coding.TAIL)


@dataclass
class RxReport:
    """Receiver outcome for one user in one slot."""

    user: int
    frame_idx: int
    slot_idx: int
    tb_bytes: int = 0
    crc_ok: bool = False
    stale_csi: bool = False
    payload: bytes = b""
    evm_rx: float = float("nan")
    evm_mrc: float = float("nan")
    evm_rzf: float = float("nan")
    theta_hat: float = 0.0
    post_combining_sinr_db: float = float("nan")
    combiner_kind: str = ""
    saturations: int = 0
    rx_symbols: np.ndarray = None  # raw antenna-0 data REs
    mrc_symbols: np.ndarray = None  # equalized layer, MRC path
    rzf_symbols: np.ndarray = None  # equalized layer, RZF path

    @property
    def delivered_bits(self) -> int:
        return 8 * self.tb_bytes if self.crc_ok else 0


def data_positions(alloc: PuschAlloc) -> np.ndarray:
    """(subcarrier, symbol) pairs of the grant's data REs, symbol-major.

    The whole pilot symbol is excluded from data, also on the subcarriers
    between pilot tones, so both link ends enumerate identically.
    """
    syms = np.array(
        [s for s in range(alloc.sym_start, alloc.sym_stop) if s != DMRS_SYMBOL]
    )
    sc = alloc.sc_start + np.arange(alloc.n_sc)
    sym_grid, sc_grid = np.meshgrid(syms, sc, indexing="ij")
    return np.stack([sc_grid.ravel(), sym_grid.ravel()], axis=1)


def encode_transport_block(tb: TransportBlock, alloc: PuschAlloc = None) -> np.ndarray:
    """Payload -> CRC -> rate-1/2 FEC -> scramble -> QPSK symbols.

    With an allocation given, the coded stream is zero-padded up to the
    grant's data capacity before scrambling, so every data RE carries a
    pseudorandom symbol; without one, exactly the codeword symbols are
    returned.
    """
    if not tb.payload:
        raise CapacityError("empty payload")
    crc = coding.crc16(tb.payload)
    crc_bits = np.array([(crc >> (15 - i)) & 1 for i in range(16)], dtype=np.uint8)
    msg = np.concatenate([coding.bits_from_bytes(tb.payload), crc_bits])
    coded = coding.conv_encode(msg)
    n_bits = coded.size
    if alloc is not None:
        n_bits = 2 * alloc.n_data_re
        if coded.size > n_bits:
            raise CapacityError(
                f"{coded.size} coded bits exceed the grant's {n_bits} bit capacity"
            )
    padded = np.zeros(n_bits, dtype=np.uint8)
    padded[: coded.size] = coded
    scrambled = coding.scramble_bits(padded, tb.user, tb.frame_idx, tb.slot_idx)
    return coding.qpsk_modulate(scrambled)


def decode_transport_block(
    llrs: np.ndarray, tb_bytes: int, user: int, frame_idx: int, slot_idx: int
):
    """Inverse of :func:`encode_transport_block` from soft bits.

    Accepts the padded-capacity LLR stream; trailing pad LLRs are ignored.
    Returns (payload, crc_ok).
    """
    n_msg = 8 * tb_bytes + coding.CRC_BITS
    llrs = coding.descramble_llrs(llrs, user, frame_idx, slot_idx)
    bits = coding.viterbi_decode(llrs[: 2 * (n_msg + coding.TAIL)], n_msg)
    payload = coding.bytes_from_bits(bits[: 8 * tb_bytes])
    crc_field = 0
    for b in bits[8 * tb_bytes :]:
        crc_field = (crc_field << 1) | int(b)
    return payload, coding.crc16(payload) == crc_field


def ue_tx_slot(
    config: WaveformConfig, sched: SlotSchedule, user: int, payload: bytes
) -> ResourceGrid:
    """Build one user's transmit grid for one slot.

    Output depends only on this user's own grant, never on the other user's
    schedule. An empty payload leaves the data allocation silent.
    """
    grid = build_grid(config, sched.frame_idx, sched.slot_idx)
    if sched.srs_user == user:
        srs = gen_srs(user, sched.srs_occasion)
        map_symbols(grid, srs.positions(), srs.sequence)
        return grid
    alloc = sched.allocations.get(user)
    if alloc is not None and payload:
        dmrs = gen_dmrs(user, sched.frame_idx, sched.slot_idx, alloc.prb_start, alloc.n_prb)
        map_symbols(grid, dmrs.positions(), dmrs.sequence)
        tb = TransportBlock(user, payload, sched.frame_idx, sched.slot_idx)
        map_symbols(grid, data_positions(alloc), encode_transport_block(tb, alloc))
    return grid


@dataclass
class GnbState:
    """Receiver state carried across slots."""

    config: WaveformConfig
    channel_state: ChannelState = None
    mrc: Combiner = None
    rzf: Combiner = None
    fixed_mrc: FixedCombiner = None
    fixed_rzf: FixedCombiner = None
    use_fixed_point: bool = False
    word_bits: int = 16
    frac_bits: int = 12
    srs_smoothing: bool = False
    n_users: int = 2
    n_rx: int = 2
    srs_band_sc: int = 240

    def __post_init__(self):
        if self.channel_state is None:
            self.channel_state = new_channel_state(self.srs_band_sc, self.n_rx, self.n_users)

    def csi_ready(self) -> bool:
        return all(self.channel_state.valid(u) for u in range(self.n_users))


def _process_srs(state: GnbState, rx_grids, sched: SlotSchedule):
    pattern = gen_srs(sched.srs_user, sched.srs_occasion)
    abs_slot = sched.frame_idx * state.config.slots_per_frame + sched.slot_idx
    estimate_srs_channel(
        rx_grids, pattern, state.channel_state, abs_slot, smooth=state.srs_smoothing
    )
    state.channel_state.noise_var = estimate_noise(rx_grids, pattern, state.channel_state)
    if state.csi_ready():
        sigma = state.channel_state.noise_var
        state.mrc = compute_mrc(state.channel_state)
        state.rzf = compute_rzf(state.channel_state, sigma)
        if state.use_fixed_point:
            state.fixed_mrc = quantize_combiner(state.mrc, state.word_bits, state.frac_bits)
            state.fixed_rzf = quantize_combiner(state.rzf, state.word_bits, state.frac_bits)


def _decision_evm(symbols: np.ndarray) -> float:
    """RMS error to the nearest constellation point, after RMS normalization."""
    if symbols.size == 0:
        return float("nan")
    rms = np.sqrt(np.mean(np.abs(symbols) ** 2))
    if rms == 0:
        return 1.0
    x = symbols / rms
    d = _QPSK_POINTS[np.argmin(np.abs(x[:, None] - _QPSK_POINTS[None, :]), axis=1)]
    return float(np.sqrt(np.mean(np.abs(x - d) ** 2)))


def _combine_path(state, kind, user, dmrs, y_pilot, y_data, pilot_sc, data_sc):
    """Combine, phase-correct, and normalize one layer through one combiner.

    Returns (equalized data symbols, theta_hat, per-RE noise variance,
    saturation count).
    """
    combiner = state.mrc if kind == "mrc" else state.rzf
    fixed = state.fixed_mrc if kind == "mrc" else state.fixed_rzf
    if state.use_fixed_point and fixed is not None:
        z_pilot, sat_p = apply_combiner_fixed(fixed, y_pilot, pilot_sc)
        z_data, sat_d = apply_combiner_fixed(fixed, y_data, data_sc)
        saturations = sat_p + sat_d
    else:
        z_pilot = apply_combiner(combiner, y_pilot, pilot_sc)
        z_data = apply_combiner(combiner, y_data, data_sc)
        saturations = 0

    theta = estimate_phase(z_pilot[:, user], dmrs)

    h = state.channel_state.h_est
    w = combiner.weights
    gain = np.einsum("sm,sm->s", w[:, user, :], h[:, :, user])
    w_norm2 = np.sum(np.abs(w[:, user, :]) ** 2, axis=1)
    sigma2 = max(state.channel_state.noise_var, 1e-12)

    gmag = np.maximum(np.abs(gain[data_sc]), 1e-12)
    equalized = z_data[:, user] * np.exp(-1j * theta) / gmag
    noise_re = sigma2 * w_norm2[data_sc] / (gmag * gmag)
    return equalized, theta, noise_re, saturations


def _decode_user(state: GnbState, rx_grids, sched: SlotSchedule, user: int) -> RxReport:
    alloc = sched.allocations[user]
    report = RxReport(
        user=user,
        frame_idx=sched.frame_idx,
        slot_idx=sched.slot_idx,
        tb_bytes=alloc.tb_bytes,
    )
    if state.mrc is None or state.rzf is None or not state.csi_ready():
        report.stale_csi = True
        return report
    report.combiner_kind = "rzf" if sched.mu_mimo_active else "mrc"

    dmrs = gen_dmrs(user, sched.frame_idx, sched.slot_idx, alloc.prb_start, alloc.n_prb)
    pilot_pos = dmrs.positions()
    data_pos = data_positions(alloc)
    y_pilot = np.stack([extract_symbols(g, pilot_pos) for g in rx_grids], axis=1)
    y_data = np.stack([extract_symbols(g, data_pos) for g in rx_grids], axis=1)
    pilot_sc, data_sc = pilot_pos[:, 0], data_pos[:, 0]

    paths = {}
    for kind in ("mrc", "rzf"):
        paths[kind] = _combine_path(
            state, kind, user, dmrs, y_pilot, y_data, pilot_sc, data_sc
        )

    report.evm_rx = _decision_evm(y_data[:, 0])
    report.evm_mrc = _decision_evm(paths["mrc"][0])
    report.evm_rzf = _decision_evm(paths["rzf"][0])
    report.rx_symbols = y_data[:, 0]
    report.mrc_symbols = paths["mrc"][0]
    report.rzf_symbols = paths["rzf"][0]

    equalized, theta, noise_re, saturations = paths[report.combiner_kind]
    report.theta_hat = theta
    report.saturations = saturations
    evm_active = report.evm_rzf if report.combiner_kind == "rzf" else report.evm_mrc
    if evm_active > 0:
        report.post_combining_sinr_db = float(-20.0 * np.log10(evm_active))

    llrs = coding.qpsk_llrs(equalized, noise_re)
    payload, crc_ok = decode_transport_block(
        llrs, alloc.tb_bytes, user, sched.frame_idx, sched.slot_idx
    )
    report.payload = payload
    report.crc_ok = crc_ok
    return report


def gnb_rx_slot(state: GnbState, rx_grids, sched: SlotSchedule) -> list:
    """Process one received slot; returns one RxReport per scheduled user.

    Task order within the slot matches the live pipeline: control (stub),
    then sounding, then data, so a sounding slot's data already uses the
    fresh combiner. Stale or missing CSI is recorded per user rather than
    raised; such users deliver no bits.
    """
    if len(rx_grids) != state.n_rx:
        raise ConfigError("one grid per receive antenna required")
    # PUCCH would be processed here; control is out of scope
    if sched.has_srs:
        _process_srs(state, rx_grids, sched)
    reports = []
    for user in sorted(sched.allocations):
        reports.append(_decode_user(state, rx_grids, sched, user))
    return reports
