"""Experiment driver: presets, seeded Monte-Carlo campaigns, file output.

Three presets mirror the bench setups: ``sub6ghz`` (2.5 GHz, full-sphere
diffuse field), ``mmwave`` (36 GHz, 2 GHz bandwidth, 40 deg arrival cone)
and ``subthz`` (273.6 GHz, 3 GHz bandwidth, 35 deg cone calibrated so the
spatial focus width is about one wavelength).  Decay and delay spans are
sized for >= 64 resolvable in-band taps; all randomness is derived from
one root seed so runs are byte-reproducible at any thread count.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.signal

from .channel import (
    CavityParams,
    ChannelEnsemble,
    RxGrid,
    build_ensemble,
)
from .errors import ConfigError, EdgePeakError, DegenerateBackgroundError
from .link import focus_field, trdma_link
from .metrics import (
    FocusingReport,
    focusing_gain,
    isi_ratio,
    sir,
    spatial_profile,
    temporal_fwhm,
)
from .precoding import TrFilterBank, tr_filters
from .signalops import Cir, Waveform, convolve, gen_chirp, wiener_deconvolve

THREADS_ENV_VAR = "TRFOCUS_THREADS"

# Delay-window and decay sizing shared by all presets, in units of 1/B:
# the window holds 72 resolvable taps and the power decay constant 64.
_SPAN_TAPS = 72
_DECAY_TAPS = 64


@dataclass(frozen=True)
class Preset:
    name: str
    carrier_hz: float
    bandwidth_hz: float
    n_tx: int
    aperture_half_angle_rad: float
    grid_start_m: float
    grid_stop_m: float
    grid_step_m: float
    target_m: float
    n_paths: int = 2000
    oversample: int = 4

    def cavity(self, bandwidth_hz: float | None = None) -> CavityParams:
        b = bandwidth_hz if bandwidth_hz is not None else self.bandwidth_hz
        return CavityParams(
            carrier_hz=self.carrier_hz,
            bandwidth_hz=b,
            decay_time_s=_DECAY_TAPS / b,
            max_delay_s=_SPAN_TAPS / b,
            aperture_half_angle_rad=self.aperture_half_angle_rad,
            n_paths=self.n_paths,
            oversample=self.oversample,
        )

    def grid(self) -> RxGrid:
        return RxGrid(_grid_positions(self.grid_start_m, self.grid_stop_m, self.grid_step_m))


PRESETS: dict[str, Preset] = {
    "sub6ghz": Preset(
        name="sub6ghz",
        carrier_hz=2.5e9,
        bandwidth_hz=100e6,
        n_tx=8,
        aperture_half_angle_rad=math.pi,
        grid_start_m=0.0,
        grid_stop_m=0.30,
        grid_step_m=0.01,
        target_m=0.10,
    ),
    "mmwave": Preset(
        name="mmwave",
        carrier_hz=36e9,
        bandwidth_hz=2e9,
        n_tx=1,
        aperture_half_angle_rad=math.radians(40.0),
        grid_start_m=-0.02,
        grid_stop_m=0.02,
        grid_step_m=0.0025,
        target_m=0.0,
    ),
    "subthz": Preset(
        name="subthz",
        carrier_hz=273.6e9,
        bandwidth_hz=3e9,
        n_tx=1,
        aperture_half_angle_rad=math.radians(35.0),
        grid_start_m=-0.003,
        grid_stop_m=0.003,
        grid_step_m=0.0003,
        target_m=0.0,
    ),
}


def _grid_positions(start_m: float, stop_m: float, step_m: float) -> np.ndarray:
    if step_m <= 0:
        raise ConfigError("grid step must be positive")
    if stop_m < start_m:
        raise ConfigError("grid stop must not precede start")
    n = int(math.floor((stop_m - start_m) / step_m + 0.5)) + 1
    return np.round(start_m + step_m * np.arange(n), 12)


def thread_count() -> int:
    """Worker count for trial-level parallelism, capped by TRFOCUS_THREADS."""
    cap = os.environ.get(THREADS_ENV_VAR)
    if cap is not None:
        try:
            return max(1, int(cap))
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV_VAR} must be an integer") from exc
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one seeded campaign needs."""

    cavity: CavityParams
    grid: RxGrid
    n_tx: int
    target_m: float
    n_trials: int
    seed: int
    users_m: tuple[float, ...] | None = None
    csi_mode: str = "perfect"  # "perfect" | "sounded"
    chirp_duration_s: float = 1e-6
    sounding_snr_db: float | None = 30.0
    tx_energy: float = 1.0
    symbol_period_samples: int | None = None
    preset: str | None = None
    outdir: str = "trfocus_out"

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.n_tx < 1:
            raise ConfigError("n_tx must be >= 1")
        if self.csi_mode not in ("perfect", "sounded"):
            raise ConfigError("csi mode must be 'perfect' or 'sounded'")
        if self.csi_mode == "sounded" and self.chirp_duration_s <= 0:
            raise ConfigError("chirp_duration_s must be positive")
        if self.tx_energy <= 0:
            raise ConfigError("tx_energy must be positive")
        self.target_index  # validates target on grid
        if self.users_m is not None:
            idx = self.user_indices
            if len(set(idx)) != len(idx):
                raise ConfigError("user positions must be distinct grid points")

    def _position_index(self, position_m: float) -> int:
        diffs = np.abs(self.grid.positions_m - position_m)
        idx = int(np.argmin(diffs))
        if diffs[idx] > 1e-9:
            raise ConfigError(f"position {position_m} m does not lie on the grid")
        return idx

    @property
    def target_index(self) -> int:
        return self._position_index(self.target_m)

    @property
    def user_indices(self) -> list[int]:
        if self.users_m is None:
            return []
        return [self._position_index(u) for u in self.users_m]

    @property
    def symbol_period(self) -> int:
        if self.symbol_period_samples is not None:
            return self.symbol_period_samples
        return max(1, self.cavity.cir_length // 4)


def config_from_preset(preset_name: str, **overrides) -> ScenarioConfig:
    """ScenarioConfig for a named preset; overrides replace preset fields.

    Recognized overrides: bandwidth_hz, n_tx, target_m, users_m, n_trials,
    seed, csi_mode, chirp_duration_s, sounding_snr_db, tx_energy,
    symbol_period_samples, outdir, grid (an RxGrid replacing the preset's).
    """
    if preset_name not in PRESETS:
        raise ConfigError(
            f"unknown preset {preset_name!r}; choose from {sorted(PRESETS)}"
        )
    preset = PRESETS[preset_name]
    bandwidth = overrides.pop("bandwidth_hz", None)
    grid = overrides.pop("grid", None)
    users = overrides.pop("users_m", None)
    if users is not None:
        users = tuple(float(u) for u in users)
    cfg = dict(
        cavity=preset.cavity(bandwidth),
        grid=grid if grid is not None else preset.grid(),
        n_tx=preset.n_tx,
        target_m=preset.target_m,
        users_m=users,
        n_trials=1,
        seed=0,
        preset=preset_name,
    )
    cfg.update(overrides)
    return ScenarioConfig(**cfg)


def sound_cirs(
    ensemble: ChannelEnsemble,
    rx_index: int,
    chirp_duration_s: float,
    sounding_snr_db: float | None,
    rng,
) -> list[Cir]:
    """Estimate the per-antenna CIRs at one grid position by chirp sounding.

    Each antenna's channel is probed with a linear chirp spanning the
    cavity bandwidth; the record (plus AWGN at the sounding SNR, if any)
    is deconvolved against the probe.  The regularizer is the per-bin
    noise power, or the noiseless default when sounding_snr_db is None.
    """
    params = ensemble.params
    probe = gen_chirp(
        params.bandwidth_hz,
        chirp_duration_s,
        params.sample_rate_hz,
        params.carrier_hz,
    )
    gen = np.random.default_rng(rng)
    estimates = []
    for a in range(ensemble.n_tx):
        cir = ensemble.cir(a, rx_index)
        rx = convolve(probe, Waveform(cir.taps, cir.sample_rate_hz, cir.carrier_hz))
        epsilon = None
        if sounding_snr_db is not None and math.isfinite(sounding_snr_db):
            power = float(np.mean(np.abs(rx.samples) ** 2))
            sigma2 = power * 10.0 ** (-sounding_snr_db / 10.0)
            noise = gen.standard_normal(len(rx)) + 1j * gen.standard_normal(len(rx))
            rx = Waveform(
                rx.samples + np.sqrt(sigma2 / 2.0) * noise,
                rx.sample_rate_hz,
                rx.carrier_hz,
            )
            epsilon = sigma2 * len(rx)
        estimates.append(
            wiener_deconvolve(rx, probe, epsilon, cir_length=ensemble.cir_length)
        )
    return estimates


def _bank_for_target(
    config: ScenarioConfig,
    ensemble: ChannelEnsemble,
    rx_index: int,
    noise_rng,
    tx_energy: float | None = None,
) -> TrFilterBank:
    energy = tx_energy if tx_energy is not None else config.tx_energy
    if config.csi_mode == "sounded":
        cirs = sound_cirs(
            ensemble, rx_index, config.chirp_duration_s, config.sounding_snr_db, noise_rng
        )
    else:
        cirs = ensemble.cirs_at(rx_index)
    return tr_filters(cirs, energy)


@dataclass
class TrialOutput:
    report: FocusingReport
    spatial_power: np.ndarray | None  # linear power per grid position
    temporal_power: np.ndarray  # linear power per time sample, target row
    peak_time_s: float


def run_trial(config: ScenarioConfig, trial: int, seed_seq: np.random.SeedSequence) -> TrialOutput:
    """One seeded realization: channel, (optional) sounding, TR, metrics."""
    channel_seq, sounding_seq = seed_seq.spawn(2)
    ensemble = build_ensemble(
        config.cavity, config.grid, config.n_tx, np.random.default_rng(channel_seq)
    )
    sounding_rng = np.random.default_rng(sounding_seq)
    target = config.target_index
    bank = _bank_for_target(config, ensemble, target, sounding_rng)
    fld = focus_field(bank, ensemble)

    row = fld.field[target]
    power_row = np.abs(row) ** 2
    peak_n = int(np.argmax(power_row))
    peak_power_db = 10.0 * math.log10(float(power_row[peak_n]))

    try:
        t_fwhm = temporal_fwhm(row, fld.sample_rate_hz)
    except EdgePeakError:
        t_fwhm = None

    s_fwhm = None
    spatial_power = None
    if fld.n_positions >= 2:
        spatial_power = np.abs(fld.field[:, peak_n]) ** 2
        try:
            s_fwhm = spatial_profile(fld, peak_n).fwhm_m
        except EdgePeakError:
            s_fwhm = None

    gain_db = None
    if fld.n_positions >= 2:
        try:
            gain_db = focusing_gain(fld, target)
        except DegenerateBackgroundError:
            gain_db = None

    sir_db = None
    isi_db = None
    if config.users_m is not None and len(config.users_m) >= 2:
        user_idx = config.user_indices
        banks = [
            _bank_for_target(config, ensemble, u, sounding_rng) for u in user_idx
        ]
        result = trdma_link(banks, ensemble, user_idx, config.symbol_period)
        sir_db = [float(v) for v in sir(result)]
        isi_vals = isi_ratio(result)
        isi_db = float(np.mean(isi_vals))

    report = FocusingReport(
        peak_power_db=peak_power_db,
        temporal_fwhm_s=t_fwhm,
        spatial_fwhm_m=s_fwhm,
        focusing_gain_db=gain_db,
        isi_ratio_db=isi_db,
        sir_db=sir_db,
        carrier_hz=config.cavity.carrier_hz,
        bandwidth_hz=config.cavity.bandwidth_hz,
        n_tx=config.n_tx,
        seed=config.seed,
        trial=trial,
    )
    return TrialOutput(
        report=report,
        spatial_power=spatial_power,
        temporal_power=power_row,
        peak_time_s=peak_n / fld.sample_rate_hz,
    )


def run_trials(config: ScenarioConfig) -> list[TrialOutput]:
    """All trials of a campaign, trial-parallel, deterministic ordering."""
    children = np.random.SeedSequence(config.seed).spawn(config.n_trials)
    workers = thread_count()
    if workers == 1 or config.n_trials == 1:
        return [run_trial(config, t, children[t]) for t in range(config.n_trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(lambda t: run_trial(config, t, children[t]), range(config.n_trials))
        )


# ---------------------------------------------------------------------------
# File emission


def _fmt(x: float) -> str:
    return repr(float(x))


def _mean_or_none(values) -> float | None:
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    return float(np.mean(vals))


def _db_profile(mean_linear: np.ndarray) -> np.ndarray:
    ref = float(mean_linear.max())
    return 10.0 * np.log10(np.maximum(mean_linear, 1e-300) / max(ref, 1e-300))


def write_outputs(config: ScenarioConfig, outputs: list[TrialOutput], outdir) -> dict:
    """Write per-trial CSV rows, mean profiles, reports and the summary.

    Files: spatial_trials.csv (trial,position_m,power_db,peak_time_s),
    temporal_trials.csv (trial,time_s,power_db), spatial_mean.csv
    (position_m,power_db; normalized to its peak), temporal_mean.csv
    (time_s,power_db), trials.json, summary.json.  Returns the summary.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    positions = config.grid.positions_m
    fs = config.cavity.sample_rate_hz

    with open(out / "temporal_trials.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("trial,time_s,power_db\n")
        for o in outputs:
            power_db = 10.0 * np.log10(np.maximum(o.temporal_power, 1e-300))
            for n, p in enumerate(power_db):
                fh.write(f"{o.report.trial},{_fmt(n / fs)},{_fmt(p)}\n")

    mean_temporal = np.mean([o.temporal_power for o in outputs], axis=0)
    with open(out / "temporal_mean.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("time_s,power_db\n")
        for n, p in enumerate(_db_profile(mean_temporal)):
            fh.write(f"{_fmt(n / fs)},{_fmt(p)}\n")

    have_spatial = outputs[0].spatial_power is not None
    if have_spatial:
        with open(out / "spatial_trials.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write("trial,position_m,power_db,peak_time_s\n")
            for o in outputs:
                power_db = 10.0 * np.log10(np.maximum(o.spatial_power, 1e-300))
                for x, p in zip(positions, power_db):
                    fh.write(
                        f"{o.report.trial},{_fmt(x)},{_fmt(p)},{_fmt(o.peak_time_s)}\n"
                    )
        mean_spatial = np.mean([o.spatial_power for o in outputs], axis=0)
        with open(out / "spatial_mean.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write("position_m,power_db\n")
            for x, p in zip(positions, _db_profile(mean_spatial)):
                fh.write(f"{_fmt(x)},{_fmt(p)}\n")

    with open(out / "trials.json", "w", encoding="utf-8") as fh:
        json.dump([o.report.to_dict() for o in outputs], fh, indent=2, sort_keys=True)
        fh.write("\n")

    sir_means = []
    for o in outputs:
        if o.report.sir_db is not None:
            sir_means.append(float(np.mean(o.report.sir_db)))
    summary = {
        "fc_hz": config.cavity.carrier_hz,
        "b_hz": config.cavity.bandwidth_hz,
        "nt": config.n_tx,
        "trials": config.n_trials,
        "seed": config.seed,
        "mean_temporal_fwhm_s": _mean_or_none(o.report.temporal_fwhm_s for o in outputs),
        "mean_spatial_fwhm_m": _mean_or_none(o.report.spatial_fwhm_m for o in outputs),
        "mean_focusing_gain_db": _mean_or_none(o.report.focusing_gain_db for o in outputs),
        "mean_sir_db": _mean_or_none(sir_means),
    }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def run_experiment(config: ScenarioConfig) -> dict:
    """Run the campaign described by the config and write its outputs."""
    outputs = run_trials(config)
    return write_outputs(config, outputs, config.outdir)


# ---------------------------------------------------------------------------
# Figure reproduction

FIGURE_IDS = ("fig2a", "fig2b", "fig3", "fig4")


def _dual_target_mean_profile(config: ScenarioConfig, targets_m: Sequence[float]) -> np.ndarray:
    """Mean spatial power profile when two TR streams are superposed."""
    indices = [config._position_index(t) for t in targets_m]
    children = np.random.SeedSequence(config.seed).spawn(config.n_trials)
    length = config.cavity.cir_length
    acc = np.zeros(len(config.grid.positions_m))
    for t in range(config.n_trials):
        ensemble = build_ensemble(
            config.cavity, config.grid, config.n_tx, np.random.default_rng(children[t])
        )
        total = None
        for idx in indices:
            bank = tr_filters(ensemble.cirs_at(idx), config.tx_energy / len(indices))
            fld = focus_field(bank, ensemble)
            total = fld.field if total is None else total + fld.field
        acc += np.abs(total[:, length - 1]) ** 2
    return acc / config.n_trials


def _no_tr_mean_profile(config: ScenarioConfig) -> np.ndarray:
    """Mean received-strength profile when the emitted filter is the raw,
    unreversed sounding chirp: no focusing instant exists, so the strength
    at each position is the time-averaged received power."""
    params = config.cavity
    probe = gen_chirp(
        params.bandwidth_hz,
        config.chirp_duration_s,
        params.sample_rate_hz,
        params.carrier_hz,
    )
    filt = probe.samples * math.sqrt(config.tx_energy / probe.energy)
    children = np.random.SeedSequence(config.seed).spawn(config.n_trials)
    acc = np.zeros(len(config.grid.positions_m))
    for t in range(config.n_trials):
        ensemble = build_ensemble(
            config.cavity, config.grid, config.n_tx, np.random.default_rng(children[t])
        )
        rows = scipy.signal.fftconvolve(ensemble.cirs[0], filt[None, :], axes=1)
        for a in range(1, config.n_tx):
            rows += scipy.signal.fftconvolve(ensemble.cirs[a], filt[None, :], axes=1)
        acc += np.mean(np.abs(rows) ** 2, axis=1)
    return acc / config.n_trials


def _write_profile_csv(path, positions, power_db) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("position_m,power_db\n")
        for x, p in zip(positions, power_db):
            fh.write(f"{_fmt(x)},{_fmt(p)}\n")


def reproduce(figure_id: str, outdir, seed: int = 0, trials: int | None = None) -> dict:
    """Re-run the preset matching one of the published figures.

    fig2a: dual-target sub-6 GHz profile (targets 7.5 cm and 20 cm,
    B = 100 MHz, 8 antennas).  fig2b: single target at 10 cm, B = 400 MHz,
    temporal profile.  fig3: mmWave two-user TRDMA at +/-1 cm.  fig4:
    subTHz focusing at +/-0.9 mm (the grid points nearest 1 mm) plus the
    no-TR baseline profile.  Returns a manifest of the files written.
    """
    if figure_id not in FIGURE_IDS:
        raise ConfigError(f"unknown figure id {figure_id!r}; choose from {FIGURE_IDS}")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"figure": figure_id, "seed": seed, "files": []}

    if figure_id == "fig2a":
        n_trials = trials if trials is not None else 20
        grid = RxGrid(_grid_positions(0.0, 0.30, 0.005))
        config = config_from_preset(
            "sub6ghz",
            bandwidth_hz=100e6,
            grid=grid,
            target_m=0.075,
            n_trials=n_trials,
            seed=seed,
            outdir=str(out),
        )
        profile = _dual_target_mean_profile(config, (0.075, 0.20))
        path = out / "fig2a_spatial.csv"
        _write_profile_csv(path, grid.positions_m, _db_profile(profile))
        manifest["files"].append(str(path))
        manifest["targets_m"] = [0.075, 0.20]

    elif figure_id == "fig2b":
        n_trials = trials if trials is not None else 20
        config = config_from_preset(
            "sub6ghz",
            bandwidth_hz=400e6,
            target_m=0.10,
            n_trials=n_trials,
            seed=seed,
            outdir=str(out / "fig2b_run"),
        )
        run_experiment(config)
        for name in ("temporal_mean.csv", "spatial_mean.csv", "summary.json"):
            manifest["files"].append(str(Path(config.outdir) / name))

    elif figure_id == "fig3":
        n_trials = trials if trials is not None else 20
        config = config_from_preset(
            "mmwave",
            users_m=(-0.01, 0.01),
            target_m=-0.01,
            n_trials=n_trials,
            seed=seed,
            outdir=str(out / "fig3_run"),
        )
        run_experiment(config)
        for name in ("trials.json", "summary.json", "temporal_mean.csv"):
            manifest["files"].append(str(Path(config.outdir) / name))
        manifest["users_m"] = [-0.01, 0.01]

    else:  # fig4
        n_trials = trials if trials is not None else 50
        for label, target in (("neg", -0.0009), ("pos", 0.0009)):
            config = config_from_preset(
                "subthz",
                target_m=target,
                n_trials=n_trials,
                seed=seed,
                outdir=str(out / f"fig4_tr_{label}"),
            )
            run_experiment(config)
            manifest["files"].append(str(Path(config.outdir) / "spatial_mean.csv"))
        baseline_cfg = config_from_preset(
            "subthz", target_m=0.0, n_trials=n_trials, seed=seed, outdir=str(out)
        )
        baseline = _no_tr_mean_profile(baseline_cfg)
        path = out / "fig4_no_tr_spatial.csv"
        _write_profile_csv(path, baseline_cfg.grid.positions_m, _db_profile(baseline))
        manifest["files"].append(str(path))

    with open(out / f"{figure_id}_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
