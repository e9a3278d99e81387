"""Command-line pipeline: spectra, cluster, forecast, evaluate, synth.

One JSON configuration drives every subcommand; flags override individual
fields. Each run writes a complete artifact directory (committed from a
staging directory, so failures leave nothing behind) with a manifest
recording the effective config and the content hash of every file.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver error.
"""

from __future__ import annotations

import argparse
import csv
import shutil
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import artifacts as art
from .data import (
    LoadPanel,
    SplitSpec,
    load_csv,
    minmax_normalize,
    split_normalized,
    write_csv,
)
from .errors import (
    AlignmentError,
    ConfigError,
    DataError,
    FileError,
    KooploadError,
    SolverError,
)
from .forecast import (
    block_diagonality,
    fit_forecast_model,
    forecast as roll_forecast,
    noise_split,
    rmse,
)
from .modes import mode_power_spectrum, project_modes
from .phate import phate_cluster
from .pipeline import SpectralParams, fit_spectral
from .synth import family_panel, mixed_tone_panel

_DEFAULTS = {
    "input": None,
    "schema": None,
    "q_delays": 168,
    "knn": 50,
    "l": 100,
    "lprime": 50,
    "theta": 1e-9,
    "bandwidth": {"alpha": 0.5, "mode": "variable", "scale": 1.0},
    "normalization": "per-station",
    "horizon": 168,
    "evolution": "regression",
    "clusters": None,
    "split": None,
    "phate": {"m": 3, "k": 10, "t_max": 100, "knn": 5},
    "seeds": {"mds": 0, "kmeans": 0, "synth": 0},
    "synth": {"kind": "tones", "n_samples": 1344, "n_stations": 10,
              "periods": [24, 168], "noise_std": 0.0, "tau_s": 3600.0,
              "families": None, "stations_per_family": 10, "holidays": []},
}


@dataclass
class PipelineConfig:
    """Validated, fully-resolved configuration for one run."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def validate(self):
        v = self.values
        if v["lprime"] > v["l"]:
            raise ConfigError(f"l'={v['lprime']} exceeds l={v['l']}")
        for key in ("q_delays", "knn", "l", "lprime", "horizon"):
            if int(v[key]) < 1:
                raise ConfigError(f"{key} must be a positive integer")
        if v["theta"] < 0:
            raise ConfigError("theta must be >= 0")
        if v["bandwidth"]["mode"] not in ("fixed", "variable"):
            raise ConfigError(f"unknown bandwidth mode {v['bandwidth']['mode']!r}")
        if not v["bandwidth"]["scale"] > 0:
            raise ConfigError("bandwidth scale must be positive")
        if v["evolution"] not in ("regression", "phase"):
            raise ConfigError(f"unknown evolution mode {v['evolution']!r}")
        seeds = v.get("seeds") or {}
        for name in ("mds", "kmeans", "synth"):
            if name not in seeds:
                raise ConfigError(f"missing seed {name!r}: every run must pin its seeds")
        if v["split"] is not None:
            for part in ("train", "test"):
                rng = v["split"].get(part)
                if not (isinstance(rng, (list, tuple)) and len(rng) == 2):
                    raise ConfigError(f"split.{part} must be [start, stop]")

    def spectral_params(self) -> SpectralParams:
        v = self.values
        bw = v["bandwidth"]
        return SpectralParams(int(v["q_delays"]), int(v["knn"]), int(v["l"]),
                              int(v["lprime"]), float(v["theta"]),
                              float(bw["alpha"]), bw["mode"], float(bw["scale"]))


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path: str | None, overrides: dict) -> PipelineConfig:
    values = dict(_DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise FileError(f"config file not found: {p}")
        values = _merge(values, art.read_json(p))
    values = _merge(values, overrides)
    cfg = PipelineConfig(values)
    cfg.validate()
    return cfg


@contextmanager
def staged_output(out_dir: Path):
    """Write into a staging directory, swap it in only on success."""
    out_dir = Path(out_dir)
    staging = out_dir.parent / f".{out_dir.name}.staging"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    if out_dir.exists():
        shutil.rmtree(out_dir)
    staging.rename(out_dir)


def _write_manifest(staging: Path, command: str, config: dict, warnings=()):
    files = sorted(p.name for p in staging.iterdir() if p.is_file())
    manifest = {
        "command": command,
        "config": config,
        "artifacts": {name: art.sha256_file(staging / name) for name in files},
        "warnings": list(warnings),
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    art.write_json(manifest, staging / "manifest.json")


def _load_input(cfg: PipelineConfig) -> LoadPanel:
    path = cfg["input"]
    if not path:
        raise ConfigError("no input panel configured (set 'input' or --input)")
    return load_csv(path, cfg["schema"])


def cmd_spectra(cfg: PipelineConfig, out_dir: Path) -> int:
    panel = _load_input(cfg)
    panel_norm, stats = minmax_normalize(panel, cfg["normalization"])
    params = cfg.spectral_params()
    model = fit_spectral(panel_norm, params, stats)
    projection = project_modes(panel_norm, model.basis, params.q_delays)

    with staged_output(out_dir) as staging:
        art.save_graph(model.graph, params.delay_config(), params.q_delays,
                       staging / "graph")
        art.save_markov(model.markov, params.delay_config(), params.q_delays,
                        model.graph.eps0, staging / "markov")
        art.save_basis(model.basis, {
            "Q": params.q_delays, "l": params.l, "lprime": params.lprime,
            "theta": params.theta}, staging / "basis")
        art.save_modes_table(model.basis, projection, staging / "modes.csv")
        for k in range(model.basis.n_modes):
            art.save_temporal(model.basis, k, staging / f"temporal_{k}.csv")
            freq, power = mode_power_spectrum(model.basis, k)
            art.save_spectrum(freq, power, staging / f"spectrum_{k}.csv")
        _write_manifest(staging, "spectra", cfg.values)
    return 0


def cmd_cluster(cfg: PipelineConfig, out_dir: Path) -> int:
    panel = _load_input(cfg)
    ph = cfg["phate"]
    embedding = phate_cluster(
        panel, knn=int(ph["knn"]), m=int(ph["m"]), k=int(ph["k"]),
        t_max=int(ph["t_max"]), mds_seed=int(cfg["seeds"]["mds"]),
        kmeans_seed=int(cfg["seeds"]["kmeans"]),
        alpha=float(cfg["bandwidth"]["alpha"]),
        bandwidth_mode=cfg["bandwidth"]["mode"],
        epsilon_scale=float(cfg["bandwidth"]["scale"]))
    with staged_output(out_dir) as staging:
        art.save_phate(embedding, panel.station_ids, staging / "phate.csv",
                       staging / "phate_meta.json",
                       int(cfg["seeds"]["mds"]), int(cfg["seeds"]["kmeans"]))
        _write_manifest(staging, "cluster", cfg.values)
    return 0


def _read_cluster_labels(path: Path, station_ids) -> dict:
    if not path.is_file():
        raise FileError(f"cluster artifact not found: {path}")
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            labels[row["station_id"]] = int(row["cluster"])
    missing = [s for s in station_ids if s not in labels]
    if missing:
        raise AlignmentError(f"cluster artifact lacks stations: {missing}")
    return labels


def _split_spec(cfg: PipelineConfig, panel: LoadPanel) -> SplitSpec:
    spl = cfg["split"]
    if spl is None:
        n = panel.n_samples
        horizon = int(cfg["horizon"])
        if horizon >= n:
            raise ConfigError("horizon leaves no training data")
        return SplitSpec((0, n - horizon), (n - horizon, n))
    return SplitSpec(tuple(spl["train"]), tuple(spl["test"]))


def cmd_forecast(cfg: PipelineConfig, out_dir: Path) -> int:
    panel = _load_input(cfg)
    spec = _split_spec(cfg, panel)
    horizon = int(cfg["horizon"])
    test_len = spec.test_range[1] - spec.test_range[0]
    if horizon > test_len:
        raise ConfigError(f"horizon {horizon} exceeds test window {test_len}")

    if cfg["clusters"]:
        label_map = _read_cluster_labels(Path(cfg["clusters"]), panel.station_ids)
        labels = np.array([label_map[s] for s in panel.station_ids])
    else:
        labels = np.zeros(panel.n_stations, dtype=int)

    params = cfg.spectral_params()
    warnings = []
    fits = []
    predicted = np.empty((horizon, panel.n_stations))
    actual_norm = np.empty((horizon, panel.n_stations))
    stats_blob = {}
    first_noise = None
    first_kpsi = None

    declared = (range(int(labels.max()) + 1) if cfg["clusters"]
                else sorted(set(int(c) for c in labels)))
    for cluster in declared:
        members = np.nonzero(labels == cluster)[0]
        if members.size < 1:
            warnings.append(f"cluster {cluster} empty; skipped")
            continue
        sub = LoadPanel(panel.values[:, members], panel.sample_interval_s,
                        [panel.station_ids[j] for j in members],
                        panel.start_timestamp)
        train_n, test_n, stats = split_normalized(sub, spec, cfg["normalization"])
        model = fit_spectral(train_n, params, stats)
        fmodel = fit_forecast_model(train_n, model.basis, params.q_delays,
                                    cfg["evolution"], stats)
        pred = roll_forecast(fmodel, None, horizon)
        predicted[:, members] = pred
        actual_norm[:, members] = test_n.values[:horizon]
        stats_blob[str(cluster)] = {
            "stations": [panel.station_ids[j] for j in members],
            "col_min": [float(v) for v in stats.col_min],
            "col_max": [float(v) for v in stats.col_max],
        }
        resid = test_n.values[:horizon] - pred
        ns = noise_split(resid, fmodel.decoder)
        frac, _ = block_diagonality(fmodel.k_psi, fmodel.blocks)
        fits.append({
            "cluster": cluster,
            "stations": int(members.size),
            "mean_rmse": float(np.mean([rmse(test_n.values[:horizon, j], pred[:, j])
                                        for j in range(members.size)])),
            "offblock_fraction": frac,
        })
        if first_noise is None:
            first_noise = ns
            first_kpsi = (fmodel.k_psi, frac)
            first_ids = [panel.station_ids[j] for j in members]

    test_start = panel.start_timestamp + panel.sample_interval_s * spec.test_range[0]
    timestamps = test_start + panel.sample_interval_s * np.arange(horizon)
    station_rmse = [rmse(actual_norm[:, j], predicted[:, j])
                    for j in range(panel.n_stations)]

    with staged_output(out_dir) as staging:
        art.save_forecast(timestamps, panel.station_ids, predicted, actual_norm,
                          staging / "forecast.csv")
        art.save_station_table(panel.station_ids, station_rmse, "rmse",
                               staging / "rmse.csv")
        art.save_matrix_csv(first_noise.modal, first_ids,
                            staging / "noise_modal.csv")
        art.save_matrix_csv(first_noise.innovation, first_ids,
                            staging / "noise_innovation.csv")
        art.write_json({
            "k_psi": [[float(v) for v in row] for row in first_kpsi[0]],
            "offblock_fraction": first_kpsi[1],
        }, staging / "kpsi.json")
        art.write_json({"clusters": fits, "stats": stats_blob},
                       staging / "clusters.json")
        _write_manifest(staging, "forecast", cfg.values, warnings)
    return 0


def cmd_evaluate(cfg: PipelineConfig, forecast_dir: Path, out_dir: Path) -> int:
    forecast_dir = Path(forecast_dir)
    fc_path = forecast_dir / "forecast.csv"
    if not fc_path.is_file():
        raise FileError(f"forecast artifact not found: {fc_path}")
    truth = _load_input(cfg)

    with open(fc_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    stations = []
    for row in rows:
        if row["station"] not in stations:
            stations.append(row["station"])
    times = sorted({float(row["timestamp"]) for row in rows})
    if list(truth.station_ids) != stations:
        raise AlignmentError(
            f"station order mismatch: truth {list(truth.station_ids)} vs "
            f"forecast {stations}")
    truth_times = truth.timestamps()
    idx = {}
    for t in times:
        hits = np.nonzero(np.abs(truth_times - t) < 0.5)[0]
        if hits.size != 1:
            raise AlignmentError(f"timestamp {t} not found in truth panel")
        idx[t] = int(hits[0])

    pred = np.empty((len(times), len(stations)))
    counts = {s: 0 for s in stations}
    tpos = {t: i for i, t in enumerate(times)}
    spos = {s: j for j, s in enumerate(stations)}
    for row in rows:
        pred[tpos[float(row["timestamp"])], spos[row["station"]]] = float(row["predicted"])
        counts[row["station"]] += 1
    if len(set(counts.values())) != 1:
        raise AlignmentError(f"ragged forecast rows per station: {counts}")

    clusters_meta = {}
    cl_path = forecast_dir / "clusters.json"
    if cl_path.is_file():
        clusters_meta = art.read_json(cl_path).get("stats", {})
    truth_norm = np.empty_like(pred)
    if clusters_meta:
        for blob in clusters_meta.values():
            cols = [spos[s] for s in blob["stations"]]
            lo = np.asarray(blob["col_min"])
            hi = np.asarray(blob["col_max"])
            span = np.where(hi > lo, hi - lo, 1.0)
            raw = truth.values[[idx[t] for t in times]][:, cols]
            truth_norm[:, cols] = (raw - lo) / span
    else:
        truth_norm = minmax_normalize(truth, cfg["normalization"])[0] \
            .values[[idx[t] for t in times]]

    per_station = [rmse(truth_norm[:, j], pred[:, j]) for j in range(len(stations))]
    per_cluster = {}
    for cluster, blob in clusters_meta.items():
        cols = [spos[s] for s in blob["stations"]]
        per_cluster[cluster] = float(np.mean([per_station[c] for c in cols]))
    overall = float(np.sqrt(np.mean((truth_norm - pred) ** 2)))

    with staged_output(out_dir) as staging:
        art.save_station_table(stations, per_station, "rmse", staging / "rmse.csv")
        art.write_json({"overall_rmse": overall, "per_cluster": per_cluster},
                       staging / "rmse.json")
        _write_manifest(staging, "evaluate", cfg.values)
    return 0


def cmd_synth(cfg: PipelineConfig, out_dir: Path) -> int:
    sy = cfg["synth"]
    seed = int(cfg["seeds"]["synth"])
    labels = None
    holidays = [tuple(h) for h in (sy.get("holidays") or [])]
    if sy.get("families"):
        panel, labels = family_panel(
            int(sy["n_samples"]), sy["families"],
            int(sy["stations_per_family"]), tau_s=float(sy["tau_s"]),
            noise_std=float(sy["noise_std"]), seed=seed)
    else:
        panel = mixed_tone_panel(
            int(sy["n_samples"]), int(sy["n_stations"]),
            sy["periods"], tau_s=float(sy["tau_s"]),
            noise_std=float(sy["noise_std"]), seed=seed, holidays=holidays)
    with staged_output(out_dir) as staging:
        write_csv(panel, staging / "panel.csv")
        if labels is not None:
            art.write_json({"family_labels": [int(v) for v in labels]},
                           staging / "labels.json")
        _write_manifest(staging, "synth", cfg.values)
    return 0


def _add_common(parser):
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--out", required=True, help="artifact directory")
    parser.add_argument("--input", help="input panel CSV (overrides config)")
    parser.add_argument("--q", type=int, dest="q_delays")
    parser.add_argument("--knn", type=int)
    parser.add_argument("--l", type=int)
    parser.add_argument("--lprime", type=int)
    parser.add_argument("--theta", type=float)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--evolution", choices=["regression", "phase"])
    parser.add_argument("--clusters", help="phate.csv with cluster labels")


def _overrides(args) -> dict:
    out = {}
    for key in ("input", "q_delays", "knn", "l", "lprime", "theta",
                "horizon", "evolution", "clusters"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="koopload",
        description="Koopman spectral analysis and forecasting of load panels")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spectra", "cluster", "forecast", "synth"):
        p = sub.add_parser(name)
        _add_common(p)
    p_eval = sub.add_parser("evaluate")
    _add_common(p_eval)
    p_eval.add_argument("--forecast-dir", required=True,
                        help="artifact directory of a forecast run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        out_dir = Path(args.out)
        if args.command == "spectra":
            return cmd_spectra(cfg, out_dir)
        if args.command == "cluster":
            return cmd_cluster(cfg, out_dir)
        if args.command == "forecast":
            return cmd_forecast(cfg, out_dir)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, Path(args.forecast_dir), out_dir)
        if args.command == "synth":
            return cmd_synth(cfg, out_dir)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"solver error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 4
    except KooploadError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
