"""Deterministic link-level simulator of a 2x2 uplink MU-MIMO receive pipeline."""

__version__ = "0.1.0"

from .channel import NoiseModel, UeProfile, draw_channel, phase_rotation, propagate
from .combining import (
    Combiner,
    FixedCombiner,
    apply_combiner,
    apply_combiner_fixed,
    compute_mrc,
    compute_rzf,
    quantize_combiner,
)
from .errors import (
    CapacityError,
    CollisionError,
    ConfigError,
    ScenarioError,
    SingularChannelError,
    StaleCsiError,
)
from .estimation import (
    ChannelState,
    estimate_noise,
    estimate_phase,
    estimate_srs_channel,
    new_channel_state,
)
from .grid import (
    ResourceGrid,
    TimeSignal,
    WaveformConfig,
    build_grid,
    map_symbols,
    ofdm_demodulate,
    ofdm_modulate,
)
from .link import (
    GnbState,
    RxReport,
    TransportBlock,
    decode_transport_block,
    encode_transport_block,
    gnb_rx_slot,
    ue_tx_slot,
)
from .mac import MacState, PuschAlloc, SlotSchedule, schedule_pusch, schedule_srs, set_mu_mimo
from .pilots import DmrsPattern, SrsPattern, gen_dmrs, gen_srs
from .simrun import (
    MetricsSeries,
    ScenarioConfig,
    emit_artifacts,
    parse_config,
    run_scenario,
    serialize_config,
)
