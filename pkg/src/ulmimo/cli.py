"""Command-line front end: run scenarios and a built-in invariant selftest."""

from __future__ import annotations

import argparse
import sys
import tempfile

import numpy as np

from . import __version__
from .errors import ConfigError
from .simrun import ScenarioConfig, emit_artifacts, parse_config, run_scenario


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    from dataclasses import replace

    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.frames is not None:
        cfg = replace(cfg, duration_frames=args.frames)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if args.fixed_point:
        cfg = replace(cfg, fixed_point=True)
    if args.mu_mimo is not None:
        if args.mu_mimo == "on":
            cfg = replace(cfg, mu_mimo=True, mu_mimo_events=())
        elif args.mu_mimo == "off":
            cfg = replace(cfg, mu_mimo=False, mu_mimo_events=())
        elif args.mu_mimo.startswith("toggle:"):
            frame = int(args.mu_mimo.split(":", 1)[1])
            cfg = replace(cfg, mu_mimo=False, mu_mimo_events=((frame, True),))
        else:
            raise ConfigError("--mu-mimo: expected on, off, or toggle:<frame>")
    return cfg


def _cmd_run(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = parse_config(fh.read())
    cfg = _apply_overrides(cfg, args)
    metrics = run_scenario(cfg)
    paths = emit_artifacts(metrics, cfg.out_dir)
    total = sum(r["delivered_bits"] for r in metrics.frame_rows)
    print(
        f"ok frames={cfg.duration_frames} delivered_bits={total} "
        f"artifacts={len(paths)} out_dir={cfg.out_dir}"
    )
    return 0


def _selftest_checks():
    """Cheap end-to-end invariant checks; raises AssertionError on failure."""
    from .grid import WaveformConfig, build_grid, ofdm_demodulate, ofdm_modulate
    from .estimation import new_channel_state
    from .combining import compute_rzf

    wf = WaveformConfig()
    rng = np.random.default_rng(0)
    grid = build_grid(wf, 0, 0)
    grid.symbols[:] = (
        rng.choice([-1, 1], grid.symbols.shape) + 1j * rng.choice([-1, 1], grid.symbols.shape)
    ) / np.sqrt(2)
    sig = ofdm_modulate(grid, wf)
    assert sig.length == 7680, "slot must be 7680 samples"
    back = ofdm_demodulate(sig, wf)
    err = np.max(np.abs(back.symbols - grid.symbols)) / np.max(np.abs(grid.symbols))
    assert err < 1e-9, f"OFDM round trip error {err:.2e}"
    yield "ofdm round trip"

    state = new_channel_state(64)
    state.h_est[:] = (
        rng.standard_normal(state.h_est.shape) + 1j * rng.standard_normal(state.h_est.shape)
    )
    state.last_update_slot[:] = 0
    comb = compute_rzf(state, 0.0)
    prod = np.einsum("skm,smu->sku", comb.weights, state.h_est)
    off = max(np.max(np.abs(prod[:, 0, 1])), np.max(np.abs(prod[:, 1, 0])))
    assert off < 1e-9, f"ZF off-diagonal leakage {off:.2e}"
    yield "zero-forcing identity"

    base = (
        "duration_frames = 2\n"
        "backlog = full_buffer\n"
        "constellation_frames = 1\n"
    )
    cfg = parse_config(base)
    m1 = run_scenario(cfg)
    m2 = run_scenario(parse_config(base))
    with tempfile.TemporaryDirectory() as td1, tempfile.TemporaryDirectory() as td2:
        p1 = emit_artifacts(m1, td1)
        p2 = emit_artifacts(m2, td2)
        for a, b in zip(p1, p2):
            with open(a, "rb") as fa, open(b, "rb") as fb:
                assert fa.read() == fb.read(), f"artifact mismatch: {a}"
    yield "determinism"

    for row in m1.frame_rows:
        assert row["delivered_bits"] >= 0
    yield "metrics sanity"

    with_toggle = parse_config(base + "mu_mimo_events = 1:on\n")
    m3 = run_scenario(with_toggle)
    pre_a = [r for r in m1.frame_rows if r["frame"] == 0]
    pre_b = [r for r in m3.frame_rows if r["frame"] == 0]
    assert pre_a == pre_b, "toggle changed metrics before its effective frame"
    yield "toggle causality"


def _cmd_selftest(_args) -> int:
    for name in _selftest_checks():
        print(f"selftest: {name}: ok")
    print("selftest: all checks passed")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ulmimo",
        description="Deterministic 2x2 uplink MU-MIMO link simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config and emit artifacts")
    p_run.add_argument("config", help="path to a key=value scenario document")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None, help="artifact directory")
    p_run.add_argument("--frames", type=int, default=None)
    p_run.add_argument("--mu-mimo", default=None, metavar="on|off|toggle:<frame>")
    p_run.add_argument("--fixed-point", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_self = sub.add_parser("selftest", help="run built-in invariant checks")
    p_self.set_defaults(func=_cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # one-line machine-parsable failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
