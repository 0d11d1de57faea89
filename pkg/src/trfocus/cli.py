"""Command-line front end: run, reproduce, presets.

Exit codes: 0 success, 2 invalid configuration or unknown figure id,
3 output I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .channel import RxGrid
from .errors import TrfocusError
from .experiment import (
    FIGURE_IDS,
    PRESETS,
    ScenarioConfig,
    _grid_positions,
    config_from_preset,
    reproduce,
    run_experiment,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trfocus",
        description="Time-reversal spatiotemporal focusing experiments at desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a seeded Monte-Carlo campaign")
    run_p.add_argument("--config", help="JSON config file; flags override its values")
    run_p.add_argument("--preset", help=f"one of {sorted(PRESETS)}")
    run_p.add_argument("--bandwidth", type=float, help="bandwidth B in Hz")
    run_p.add_argument("--nt", type=int, help="number of Tx antennas")
    run_p.add_argument("--trials", type=int, help="number of Monte-Carlo trials")
    run_p.add_argument("--seed", type=int, help="root seed")
    run_p.add_argument("--grid-start", type=float, help="first grid position (m)")
    run_p.add_argument("--grid-stop", type=float, help="last grid position (m)")
    run_p.add_argument("--grid-step", type=float, help="grid step (m)")
    run_p.add_argument("--target", type=float, help="focusing target position (m)")
    run_p.add_argument(
        "--users",
        type=float,
        nargs="+",
        help="TRDMA user target positions (m), at least two",
    )
    run_p.add_argument("--csi", choices=("perfect", "sounded"), help="CSI mode")
    run_p.add_argument("--chirp-duration", type=float, help="sounding chirp length (s)")
    run_p.add_argument(
        "--sounding-snr-db",
        type=float,
        help="sounding SNR in dB; omit for the preset default of 30",
    )
    run_p.add_argument(
        "--sounding-noiseless",
        action="store_true",
        help="noise-free sounding (overrides --sounding-snr-db)",
    )
    run_p.add_argument("--outdir", help="output directory (default trfocus_out)")

    rep_p = sub.add_parser("reproduce", help="re-run a published-figure preset")
    rep_p.add_argument("figure", choices=FIGURE_IDS)
    rep_p.add_argument("--outdir", default="trfocus_figs", help="output directory")
    rep_p.add_argument("--seed", type=int, default=0)
    rep_p.add_argument("--trials", type=int, help="override the figure's trial count")

    pre_p = sub.add_parser("presets", help="list the built-in presets")
    pre_p.add_argument("--json", action="store_true", help="emit JSON")

    return parser


_CONFIG_KEYS = {
    "preset",
    "bandwidth_hz",
    "n_tx",
    "n_trials",
    "seed",
    "grid",
    "target_m",
    "users_m",
    "csi_mode",
    "chirp_duration_s",
    "sounding_snr_db",
    "tx_energy",
    "symbol_period_samples",
    "outdir",
}


def _config_from_args(args) -> ScenarioConfig:
    file_cfg: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - _CONFIG_KEYS
        if unknown:
            raise TrfocusError(f"unknown config keys: {sorted(unknown)}")

    preset = args.preset or file_cfg.get("preset")
    if preset is None:
        raise TrfocusError("a preset is required (--preset or config 'preset')")

    overrides: dict = {}
    for key in (
        "bandwidth_hz",
        "n_tx",
        "n_trials",
        "seed",
        "target_m",
        "users_m",
        "csi_mode",
        "chirp_duration_s",
        "sounding_snr_db",
        "tx_energy",
        "symbol_period_samples",
        "outdir",
    ):
        if key in file_cfg:
            overrides[key] = file_cfg[key]

    grid_cfg = file_cfg.get("grid")
    grid_parts = [args.grid_start, args.grid_stop, args.grid_step]
    if any(v is not None for v in grid_parts):
        if any(v is None for v in grid_parts):
            raise TrfocusError("--grid-start/--grid-stop/--grid-step go together")
        grid_cfg = {
            "start_m": args.grid_start,
            "stop_m": args.grid_stop,
            "step_m": args.grid_step,
        }
    if grid_cfg is not None:
        overrides["grid"] = RxGrid(
            _grid_positions(grid_cfg["start_m"], grid_cfg["stop_m"], grid_cfg["step_m"])
        )

    if args.bandwidth is not None:
        overrides["bandwidth_hz"] = args.bandwidth
    if args.nt is not None:
        overrides["n_tx"] = args.nt
    if args.trials is not None:
        overrides["n_trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.target is not None:
        overrides["target_m"] = args.target
    if args.users is not None:
        overrides["users_m"] = tuple(args.users)
    if args.csi is not None:
        overrides["csi_mode"] = args.csi
    if args.chirp_duration is not None:
        overrides["chirp_duration_s"] = args.chirp_duration
    if args.sounding_snr_db is not None:
        overrides["sounding_snr_db"] = args.sounding_snr_db
    if args.sounding_noiseless:
        overrides["sounding_snr_db"] = None
    if args.outdir is not None:
        overrides["outdir"] = args.outdir

    return config_from_preset(preset, **overrides)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = _config_from_args(args)
            summary = run_experiment(config)
            json.dump(summary, sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
        elif args.command == "reproduce":
            manifest = reproduce(args.figure, args.outdir, seed=args.seed, trials=args.trials)
            json.dump(manifest, sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
        else:  # presets
            rows = {
                name: {
                    "carrier_hz": p.carrier_hz,
                    "bandwidth_hz": p.bandwidth_hz,
                    "n_tx": p.n_tx,
                    "aperture_half_angle_deg": round(
                        math.degrees(p.aperture_half_angle_rad), 3
                    ),
                    "oversample": p.oversample,
                    "n_paths": p.n_paths,
                    "grid_m": [p.grid_start_m, p.grid_stop_m, p.grid_step_m],
                    "target_m": p.target_m,
                }
                for name, p in PRESETS.items()
            }
            if args.json:
                json.dump(rows, sys.stdout, indent=2, sort_keys=True)
                sys.stdout.write("\n")
            else:
                for name, row in rows.items():
                    print(f"{name}:")
                    for key, val in row.items():
                        print(f"  {key}: {val}")
        return 0
    except TrfocusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
