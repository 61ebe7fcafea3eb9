"""Uplink MAC: sounding calendar, data grants, and the spatial-reuse toggle.

Sounding uses the wideband 20-PRB pilot, so only PRBs 0..19 ever carry data;
the 4 edge PRBs the pilot cannot cover are left unscheduled to keep channel
knowledge complete over every granted PRB. Each user sounds twice per 10 ms
frame, in adjacent slots per occasion window.

Grants: with spatial reuse off, simultaneous users split the usable band
(10 + 10 PRB); with it on, every active user gets all 20 PRB on its own
layer. In sounding slots the data span shrinks by one symbol so the last
symbol stays clear for the pilot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coding import CRC_BITS, TAIL
from .errors import ConfigError
from .pilots import SRS_N_PRB, SRS_SYMBOL

USABLE_PRBS = SRS_N_PRB  # data PRBs 0..19; PRBs 20..23 are never granted
SRS_BASE_SLOT = 8
FULL_BUFFER = -1


@dataclass(frozen=True)
class PuschAlloc:
    """One user's data grant in one slot."""

    user: int
    prb_start: int
    n_prb: int
    sym_start: int = 0
    sym_stop: int = 14

    def __post_init__(self):
        if self.n_prb <= 0 or self.prb_start < 0:
            raise ConfigError("empty or negative allocation")
        if self.prb_start + self.n_prb > USABLE_PRBS:
            raise ConfigError(
                f"allocation PRBs [{self.prb_start}, {self.prb_start + self.n_prb}) "
                f"exceed the usable band of {USABLE_PRBS} PRBs"
            )

    @property
    def n_sc(self) -> int:
        return 12 * self.n_prb

    @property
    def sc_start(self) -> int:
        return 12 * self.prb_start

    @property
    def n_sym(self) -> int:
        return self.sym_stop - self.sym_start

    @property
    def n_data_re(self) -> int:
        # one symbol of the span is the demodulation-pilot symbol
        return self.n_sc * (self.n_sym - 1)

    @property
    def tb_bytes(self) -> int:
        """Payload bytes fitting the grant at QPSK rate 1/2 with CRC + tail."""
        msg_max = self.n_data_re - TAIL
        return (msg_max - CRC_BITS) // 8


@dataclass
class SlotSchedule:
    """Everything the PHY needs to build or receive one slot."""

    frame_idx: int
    slot_idx: int
    srs_user: int = None
    srs_occasion: int = None
    allocations: dict = field(default_factory=dict)  # user -> PuschAlloc
    mu_mimo_active: bool = False

    @property
    def has_srs(self) -> bool:
        return self.srs_user is not None


@dataclass
class MacState:
    """Scheduler state carried across slots."""

    n_users: int = 2
    mu_mimo_active: bool = False
    srs_base_slot: int = SRS_BASE_SLOT
    backlog: np.ndarray = None  # bytes per user, FULL_BUFFER = infinite
    toggle_events: list = field(default_factory=list)  # (frame_idx, bool)

    def __post_init__(self):
        if self.backlog is None:
            self.backlog = np.full(self.n_users, FULL_BUFFER, dtype=np.int64)
        if not 0 <= self.srs_base_slot <= 8:
            raise ConfigError("sounding window must fit inside both half-frames")


def set_mu_mimo(state: MacState, active: bool, effective_frame: int) -> MacState:
    """Queue a spatial-reuse toggle taking effect at a frame boundary."""
    state.toggle_events.append((int(effective_frame), bool(active)))
    state.toggle_events.sort(key=lambda ev: ev[0])
    return state


def _apply_toggles(state: MacState, frame_idx: int):
    while state.toggle_events and state.toggle_events[0][0] <= frame_idx:
        _, active = state.toggle_events.pop(0)
        state.mu_mimo_active = active


def schedule_srs(state: MacState, frame_idx: int) -> list:
    """Sounding slots of one frame as (slot_idx, user) pairs.

    Two occasions per frame, half a frame apart; within an occasion the two
    users sound in adjacent slots.
    """
    s0 = state.srs_base_slot
    half = 10
    return [
        (s0, 0),
        (s0 + 1, 1),
        (s0 + half, 0),
        (s0 + half + 1, 1),
    ]


def srs_user_for_slot(state: MacState, slot_idx: int):
    """(user, occasion-within-frame) sounding in this slot, or (None, None)."""
    for occ, (slot, user) in enumerate(schedule_srs(state, 0)):
        if slot == slot_idx:
            return user, occ // 2
    return None, None


def schedule_pusch(state: MacState, frame_idx: int, slot_idx: int) -> SlotSchedule:
    """Build the slot schedule and charge served bytes against the backlog."""
    if slot_idx == 0:
        _apply_toggles(state, frame_idx)
    srs_user, occ = srs_user_for_slot(state, slot_idx)
    sym_stop = SRS_SYMBOL if srs_user is not None else 14

    sched = SlotSchedule(
        frame_idx=frame_idx,
        slot_idx=slot_idx,
        srs_user=srs_user,
        srs_occasion=None if occ is None else 2 * frame_idx + occ,
        mu_mimo_active=state.mu_mimo_active,
    )

    active = [u for u in range(state.n_users) if state.backlog[u] != 0]
    if not active:
        return sched

    if state.mu_mimo_active or len(active) == 1:
        for u in active:
            sched.allocations[u] = PuschAlloc(u, 0, USABLE_PRBS, 0, sym_stop)
    else:
        share = USABLE_PRBS // len(active)
        for i, u in enumerate(active):
            sched.allocations[u] = PuschAlloc(u, i * share, share, 0, sym_stop)

    # the sounding user spends its slot on the pilot symbol only; its share
    # of the band simply goes unused rather than being rebalanced
    if srs_user in sched.allocations:
        del sched.allocations[srs_user]

    for u, alloc in sched.allocations.items():
        if state.backlog[u] != FULL_BUFFER:
            state.backlog[u] = max(0, state.backlog[u] - alloc.tb_bytes)
    return sched
