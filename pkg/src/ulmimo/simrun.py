"""Scenario configuration, deterministic execution, and artifact emission.

A scenario is described by a flat key=value document; every run is fully
determined by the seeds in the config, so equal configs give byte-identical
artifacts. The runner walks frames and slots, builds the per-user transmit
grids, passes them through the channel (optionally via the time-domain
waveform), and feeds the receive pipeline, collecting per-frame metrics plus
figure-equivalent CSV/JSON artifacts.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import (
    ChannelRealization,
    NoiseModel,
    UeProfile,
    correlated_columns,
    draw_channel,
    propagate,
)
from .errors import ConfigError, ScenarioError
from .grid import WaveformConfig, ofdm_demodulate, ofdm_modulate
from .link import GnbState, gnb_rx_slot, ue_tx_slot
from .mac import FULL_BUFFER, MacState, schedule_pusch, set_mu_mimo

_FLOAT_FMT = "%.12g"


@dataclass
class ScenarioConfig:
    """Validated inputs of one simulation run."""

    waveform: WaveformConfig = field(default_factory=WaveformConfig)
    users: tuple = ()
    duration_frames: int = 10
    seed: int = 1
    snr_db: tuple = (25.0, 25.0)
    channel_model: str = "fixed_los_like"
    channel_rho: float = 0.5
    channel_seed: int = 0
    channel_coherent: bool = True
    mu_mimo: bool = False
    mu_mimo_events: tuple = ()  # ((frame, active), ...)
    backlog: str = "full_buffer"  # full_buffer | none | bytes:N0,N1
    fixed_point: bool = False
    word_bits: int = 16
    frac_bits: int = 12
    srs_smoothing: bool = False
    srs_base_slot: int = 8
    time_domain: bool = True
    constellation_frames: tuple = ()
    constellation_symbols: int = 512
    out_dir: str = "artifacts"

    def __post_init__(self):
        if not self.users:
            self.users = (
                UeProfile(0, cfo_hz=200.0),
                UeProfile(1, cfo_hz=-150.0),
            )
        if self.duration_frames < 1:
            raise ConfigError("duration_frames: must be >= 1")
        if len(self.users) != 2 or len(self.snr_db) != 2:
            raise ConfigError("users: exactly 2 users are modeled")
        for frame, _ in self.mu_mimo_events:
            if not 0 <= frame < self.duration_frames:
                raise ConfigError(
                    f"mu_mimo_events: frame {frame} outside 0..{self.duration_frames - 1}"
                )
        for f in self.constellation_frames:
            if not 0 <= f < self.duration_frames:
                raise ConfigError(f"constellation_frames: frame {f} out of range")
        if not 0 <= self.channel_rho < 1:
            raise ConfigError("channel_rho: must be in [0, 1)")
        if self.seed < 0 or self.channel_seed < 0:
            raise ConfigError("seed: must be nonnegative")
        if self.backlog not in ("full_buffer", "none") and not self.backlog.startswith("bytes:"):
            raise ConfigError("backlog: expected full_buffer, none, or bytes:N0,N1")
        if self.constellation_symbols < 1:
            raise ConfigError("constellation_symbols: must be >= 1")

    def noise_variance(self) -> float:
        return 10.0 ** (-self.snr_db[0] / 10.0)

    def effective_profiles(self) -> list:
        """Per-user profiles with SNR differences folded into Tx power.

        The noise level is anchored to user 0's SNR; a user with x dB more
        SNR transmits x dB more power.
        """
        out = []
        for u, prof in enumerate(self.users):
            delta = self.snr_db[u] - self.snr_db[0]
            out.append(replace(prof, tx_power_db=prof.tx_power_db + delta))
        return out

    def initial_backlog(self) -> np.ndarray:
        if self.backlog == "full_buffer":
            return np.full(2, FULL_BUFFER, dtype=np.int64)
        if self.backlog == "none":
            return np.zeros(2, dtype=np.int64)
        parts = self.backlog[len("bytes:") :].split(",")
        if len(parts) != 2:
            raise ConfigError("backlog: bytes form needs two comma-separated counts")
        vals = [int(p) for p in parts]
        if min(vals) < 0:
            raise ConfigError("backlog: byte counts must be nonnegative")
        return np.array(vals, dtype=np.int64)


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "on", "yes"):
        return True
    if lowered in ("0", "false", "off", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_pair(key: str, value: str) -> tuple:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected one value or a pair")
    return tuple(float(p) for p in parts)


def _parse_events(value: str) -> tuple:
    events = []
    if value.strip():
        for item in value.split(","):
            frame_s, _, state_s = item.strip().partition(":")
            if not state_s:
                raise ConfigError(f"mu_mimo_events: expected frame:on|off, got {item!r}")
            events.append((int(frame_s), _parse_bool("mu_mimo_events", state_s)))
    return tuple(events)


def _parse_int_list(key: str, value: str) -> tuple:
    if not value.strip():
        return ()
    return tuple(int(p) for p in value.split(","))


def parse_config(text: str) -> ScenarioConfig:
    """Parse a flat key=value document; unknown keys are rejected by name."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        values[key.strip()] = value.strip()

    kwargs = {}
    cfo = (200.0, -150.0)
    tx_power = (0.0, 0.0)
    for key, value in values.items():
        if key == "duration_frames":
            kwargs["duration_frames"] = int(value)
        elif key == "seed":
            kwargs["seed"] = int(value)
        elif key == "snr_db":
            kwargs["snr_db"] = _parse_pair(key, value)
        elif key == "cfo_hz":
            cfo = _parse_pair(key, value)
        elif key == "tx_power_db":
            tx_power = _parse_pair(key, value)
        elif key == "channel_model":
            kwargs["channel_model"] = value
        elif key == "channel_rho":
            kwargs["channel_rho"] = float(value)
        elif key == "channel_seed":
            kwargs["channel_seed"] = int(value)
        elif key == "channel_coherent":
            kwargs["channel_coherent"] = _parse_bool(key, value)
        elif key == "mu_mimo":
            kwargs["mu_mimo"] = _parse_bool(key, value)
        elif key == "mu_mimo_events":
            kwargs["mu_mimo_events"] = _parse_events(value)
        elif key == "backlog":
            kwargs["backlog"] = value
        elif key == "fixed_point":
            kwargs["fixed_point"] = _parse_bool(key, value)
        elif key == "word_bits":
            kwargs["word_bits"] = int(value)
        elif key == "frac_bits":
            kwargs["frac_bits"] = int(value)
        elif key == "srs_smoothing":
            kwargs["srs_smoothing"] = _parse_bool(key, value)
        elif key == "srs_base_slot":
            kwargs["srs_base_slot"] = int(value)
        elif key == "time_domain":
            kwargs["time_domain"] = _parse_bool(key, value)
        elif key == "constellation_frames":
            kwargs["constellation_frames"] = _parse_int_list(key, value)
        elif key == "constellation_symbols":
            kwargs["constellation_symbols"] = int(value)
        elif key == "out_dir":
            kwargs["out_dir"] = value
        else:
            raise ConfigError(f"unknown config key: {key}")

    kwargs["users"] = (
        UeProfile(0, cfo_hz=cfo[0], tx_power_db=tx_power[0]),
        UeProfile(1, cfo_hz=cfo[1], tx_power_db=tx_power[1]),
    )
    return ScenarioConfig(**kwargs)


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical document form; parse_config(serialize_config(c)) == c."""
    events = ",".join(
        f"{frame}:{'on' if active else 'off'}" for frame, active in cfg.mu_mimo_events
    )
    lines = [
        f"duration_frames = {cfg.duration_frames}",
        f"seed = {cfg.seed}",
        "snr_db = " + ",".join(_FLOAT_FMT % s for s in cfg.snr_db),
        "cfo_hz = " + ",".join(_FLOAT_FMT % u.cfo_hz for u in cfg.users),
        "tx_power_db = " + ",".join(_FLOAT_FMT % u.tx_power_db for u in cfg.users),
        f"channel_model = {cfg.channel_model}",
        "channel_rho = " + _FLOAT_FMT % cfg.channel_rho,
        f"channel_seed = {cfg.channel_seed}",
        f"channel_coherent = {'true' if cfg.channel_coherent else 'false'}",
        f"mu_mimo = {'on' if cfg.mu_mimo else 'off'}",
        f"mu_mimo_events = {events}",
        f"backlog = {cfg.backlog}",
        f"fixed_point = {'true' if cfg.fixed_point else 'false'}",
        f"word_bits = {cfg.word_bits}",
        f"frac_bits = {cfg.frac_bits}",
        f"srs_smoothing = {'true' if cfg.srs_smoothing else 'false'}",
        f"srs_base_slot = {cfg.srs_base_slot}",
        f"time_domain = {'true' if cfg.time_domain else 'false'}",
        "constellation_frames = " + ",".join(str(f) for f in cfg.constellation_frames),
        f"constellation_symbols = {cfg.constellation_symbols}",
        f"out_dir = {cfg.out_dir}",
    ]
    return "\n".join(lines) + "\n"


@dataclass
class MetricsSeries:
    """Everything a run measured, in artifact-ready form."""

    config_text: str = ""
    frame_rows: list = field(default_factory=list)  # per (frame, user) dicts
    channel_rows: list = field(default_factory=list)  # per SRS occasion
    constellation: dict = field(default_factory=lambda: {"rx": [], "mrc": [], "rzf": []})
    slot_rows: list = field(default_factory=list)  # compact per-slot summaries
    schedule_rows: list = field(default_factory=list)  # one line per grant
    regimes: list = field(default_factory=list)


def _payload_bytes(seed: int, frame: int, slot: int, user: int, n: int) -> bytes:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7, frame, slot, user]))
    return rng.integers(0, 256, size=n, dtype=np.uint8).tobytes()


def _regime_bounds(cfg: ScenarioConfig) -> list:
    """(start_frame, stop_frame, active) segments covering the run."""
    bounds = [0, cfg.duration_frames]
    bounds[1:1] = [f for f, _ in cfg.mu_mimo_events]
    bounds = sorted(set(bounds))
    state = cfg.mu_mimo
    events = dict(cfg.mu_mimo_events)
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if a in events:
            state = events[a]
        out.append((a, b, state))
    return out


def run_scenario(cfg: ScenarioConfig) -> MetricsSeries:
    """Execute the configured frames and collect metrics.

    Module errors are re-raised with the offending frame and slot named.
    """
    wf = cfg.waveform
    metrics = MetricsSeries(config_text=serialize_config(cfg))
    profiles = cfg.effective_profiles()
    noise = NoiseModel(variance=cfg.noise_variance(), rng_seed=cfg.seed)

    fixed_matrix = None
    if cfg.channel_model == "fixed_los_like":
        fixed_matrix = correlated_columns(cfg.channel_rho)
    chan = draw_channel(
        cfg.channel_model, wf.n_sc, 2, 2, cfg.channel_seed, fixed_matrix, draw_index=0
    )
    chan.coherent = cfg.channel_coherent

    mac = MacState(srs_base_slot=cfg.srs_base_slot, backlog=cfg.initial_backlog())
    mac.mu_mimo_active = cfg.mu_mimo
    for frame, active in cfg.mu_mimo_events:
        set_mu_mimo(mac, active, frame)
    gnb = GnbState(
        config=wf,
        use_fixed_point=cfg.fixed_point,
        word_bits=cfg.word_bits,
        frac_bits=cfg.frac_bits,
        srs_smoothing=cfg.srs_smoothing,
    )

    last_srs_slot = np.zeros(2, dtype=np.int64)

    for frame in range(cfg.duration_frames):
        if not cfg.channel_coherent and frame > 0:
            chan = draw_channel(
                cfg.channel_model, wf.n_sc, 2, 2, cfg.channel_seed, fixed_matrix, draw_index=frame
            )
        frame_acc = [_new_frame_acc(u) for u in range(2)]
        for slot in range(wf.slots_per_frame):
            try:
                _run_slot(
                    cfg, wf, metrics, profiles, noise, chan, mac, gnb,
                    last_srs_slot, frame_acc, frame, slot,
                )
            except Exception as exc:
                raise ScenarioError(
                    f"frame {frame} slot {slot}: {type(exc).__name__}: {exc}"
                ) from exc
        for user in range(2):
            metrics.frame_rows.append(_finish_frame_acc(frame_acc[user], frame, user))

    metrics.regimes = _summarize_regimes(cfg, metrics)
    return metrics


def _new_frame_acc(user: int) -> dict:
    return {
        "user": user,
        "bits": 0,
        "crc_fail": 0,
        "evm_rx": [],
        "evm_mrc": [],
        "evm_rzf": [],
        "theta": [],
    }


def _finish_frame_acc(acc: dict, frame: int, user: int) -> dict:
    def mean(vals):
        return float(np.mean(vals)) if vals else float("nan")

    theta = float("nan")
    if acc["theta"]:
        theta = float(np.angle(np.mean(np.exp(1j * np.array(acc["theta"])))))
    return {
        "frame": frame,
        "user": user,
        "delivered_bits": acc["bits"],
        "crc_failures": acc["crc_fail"],
        "evm_rx": mean(acc["evm_rx"]),
        "evm_mrc": mean(acc["evm_mrc"]),
        "evm_rzf": mean(acc["evm_rzf"]),
        "theta_hat": theta,
    }


def _run_slot(
    cfg, wf, metrics, profiles, noise, chan, mac, gnb,
    last_srs_slot, frame_acc, frame, slot,
):
    sched = schedule_pusch(mac, frame, slot)
    abs_slot = frame * wf.slots_per_frame + slot
    if sched.has_srs:
        last_srs_slot[sched.srs_user] = abs_slot
    srs_col = sched.srs_user if sched.has_srs else ""
    for user in sorted(sched.allocations):
        alloc = sched.allocations[user]
        metrics.schedule_rows.append(
            (
                frame, slot, user, alloc.prb_start, alloc.n_prb,
                alloc.sym_start, alloc.sym_stop,
                int(sched.mu_mimo_active), srs_col,
            )
        )

    tx_grids = []
    for user in range(2):
        payload = b""
        alloc = sched.allocations.get(user)
        if alloc is not None:
            payload = _payload_bytes(cfg.seed, frame, slot, user, alloc.tb_bytes)
        tx_grids.append(ue_tx_slot(wf, sched, user, payload))

    elapsed = (abs_slot - last_srs_slot) * wf.slot_duration_s
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, frame, slot]))
    rx_grids = propagate(tx_grids, chan, profiles, noise, elapsed, rng)
    if cfg.time_domain:
        rx_grids = [ofdm_demodulate(ofdm_modulate(g, wf), wf) for g in rx_grids]

    reports = gnb_rx_slot(gnb, rx_grids, sched)

    if sched.has_srs and gnb.channel_state.valid(sched.srs_user):
        occ = sched.srs_occasion
        h = gnb.channel_state.h_est
        for ant in range(h.shape[1]):
            mags = np.abs(h[:, ant, sched.srs_user])
            for sc in range(h.shape[0]):
                metrics.channel_rows.append(
                    (occ, ant, sched.srs_user, sc, float(mags[sc]))
                )

    sample_frame = frame in cfg.constellation_frames
    for rep in reports:
        acc = frame_acc[rep.user]
        acc["bits"] += rep.delivered_bits
        if not rep.crc_ok:
            acc["crc_fail"] += 1
        for key, val in (
            ("evm_rx", rep.evm_rx),
            ("evm_mrc", rep.evm_mrc),
            ("evm_rzf", rep.evm_rzf),
        ):
            if not np.isnan(val):
                acc[key].append(val)
        if not rep.stale_csi:
            acc["theta"].append(rep.theta_hat)
        metrics.slot_rows.append(
            {
                "frame": frame,
                "slot": slot,
                "user": rep.user,
                "crc_ok": rep.crc_ok,
                "stale_csi": rep.stale_csi,
                "evm_rx": rep.evm_rx,
                "evm_mrc": rep.evm_mrc,
                "evm_rzf": rep.evm_rzf,
                "theta_hat": rep.theta_hat,
                "sinr_db": rep.post_combining_sinr_db,
                "saturations": rep.saturations,
            }
        )
        if sample_frame and not rep.stale_csi:
            cap = cfg.constellation_symbols
            streams = (
                ("rx", rep.rx_symbols),
                ("mrc", rep.mrc_symbols),
                ("rzf", rep.rzf_symbols),
            )
            for name, syms in streams:
                have = sum(
                    1 for r in metrics.constellation[name]
                    if r[0] == frame and r[1] == rep.user
                )
                take = syms[: max(0, cap - have)]
                for v in take:
                    metrics.constellation[name].append(
                        (frame, rep.user, float(v.real), float(v.imag))
                    )


def _summarize_regimes(cfg: ScenarioConfig, metrics: MetricsSeries) -> list:
    by_frame_user = {(r["frame"], r["user"]): r for r in metrics.frame_rows}
    out = []
    for a, b, active in _regime_bounds(cfg):
        entry = {
            "start_frame": a,
            "stop_frame": b,
            "mu_mimo": bool(active),
            "mean_throughput_bits_per_frame": {},
        }
        for user in range(2):
            vals = [by_frame_user[(f, user)]["delivered_bits"] for f in range(a, b)]
            entry["mean_throughput_bits_per_frame"][str(user)] = float(np.mean(vals))
        out.append(entry)
    return out


def _write_csv(path: str, header: str, rows, fmt_row) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(fmt_row(row) + "\n")


def emit_artifacts(metrics: MetricsSeries, out_dir: str) -> list:
    """Write throughput/channel/constellation CSVs plus report.json.

    Returns the written paths. All numeric formatting is deterministic so
    equal-seed runs emit byte-identical files.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    path = os.path.join(out_dir, "throughput.csv")
    _write_csv(
        path,
        "frame,user,bits",
        metrics.frame_rows,
        lambda r: f"{r['frame']},{r['user']},{r['delivered_bits']}",
    )
    paths.append(path)

    path = os.path.join(out_dir, "schedule.csv")
    _write_csv(
        path,
        "frame,slot,user,prb_start,n_prb,sym_start,sym_stop,mu_mimo,srs_user",
        metrics.schedule_rows,
        lambda r: ",".join(str(v) for v in r),
    )
    paths.append(path)

    path = os.path.join(out_dir, "channel_mag.csv")
    _write_csv(
        path,
        "occasion,antenna,user,subcarrier,magnitude",
        metrics.channel_rows,
        lambda r: f"{r[0]},{r[1]},{r[2]},{r[3]}," + _FLOAT_FMT % r[4],
    )
    paths.append(path)

    for name in ("rx", "mrc", "rzf"):
        path = os.path.join(out_dir, f"constellation_{name}.csv")
        _write_csv(
            path,
            "frame,user,i,q",
            metrics.constellation[name],
            lambda r: f"{r[0]},{r[1]}," + _FLOAT_FMT % r[2] + "," + _FLOAT_FMT % r[3],
        )
        paths.append(path)

    totals = {"delivered_bits": {}, "crc_failures": {}}
    evm_stats = {}
    for user in range(2):
        rows = [r for r in metrics.frame_rows if r["user"] == user]
        totals["delivered_bits"][str(user)] = int(sum(r["delivered_bits"] for r in rows))
        totals["crc_failures"][str(user)] = int(sum(r["crc_failures"] for r in rows))
        stats = {}
        for key in ("evm_rx", "evm_mrc", "evm_rzf"):
            vals = [r[key] for r in rows if not np.isnan(r[key])]
            stats[key] = {
                "mean": float(np.mean(vals)) if vals else None,
                "max": float(np.max(vals)) if vals else None,
            }
        evm_stats[str(user)] = stats

    report = {
        "config": metrics.config_text,
        "frames": len({r["frame"] for r in metrics.frame_rows}),
        "totals": totals,
        "evm": evm_stats,
        "regimes": metrics.regimes,
    }
    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(path)
    return paths
