"""Synthetic load panels: tones, noise, and holiday-style level shifts.

Acceptance checks and demos run against panels with known frequency
content, so the generators here are deterministic for a fixed seed and
keep every parameter explicit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LoadPanel
from .errors import ConfigError

HOUR_S = 3600.0


@dataclass(frozen=True)
class Tone:
    """One sinusoidal component: period in samples, amplitude, phase."""

    period_samples: float
    amplitude: float
    phase: float = 0.0


def tone_panel(n_samples: int, station_tones, tau_s: float = HOUR_S,
               base_level: float = 10.0, noise_std: float = 0.0,
               seed: int = 0, holidays=(), start_timestamp: float = 0.0,
               station_ids=None) -> LoadPanel:
    """Panel whose station s sums the tones in ``station_tones[s]``.

    Parameters
    ----------
    station_tones : sequence of sequences of Tone
        One tone list per station.
    holidays : sequence of (start, stop, delta)
        Additive level shifts applied to all stations on the half-open
        sample ranges, mimicking holiday demand drops.
    """
    d = len(station_tones)
    if d < 1:
        raise ConfigError("need at least one station")
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples)
    values = np.full((n_samples, d), float(base_level))
    for s, tones in enumerate(station_tones):
        for tone in tones:
            values[:, s] += tone.amplitude * np.sin(
                2.0 * np.pi * t / tone.period_samples + tone.phase)
    for start, stop, delta in holidays:
        values[int(start):int(stop)] += float(delta)
    if noise_std > 0:
        values += rng.normal(0.0, noise_std, size=values.shape)
    ids = station_ids or [f"s{j:03d}" for j in range(d)]
    return LoadPanel(values, tau_s, tuple(ids), start_timestamp)


def mixed_tone_panel(n_samples: int, n_stations: int, periods,
                     tau_s: float = HOUR_S, base_level: float = 10.0,
                     amp_range=(0.5, 1.5), noise_std: float = 0.0,
                     seed: int = 0, holidays=(),
                     start_timestamp: float = 0.0) -> LoadPanel:
    """Panel where every station carries the same periods with its own
    deterministic amplitude and phase per tone."""
    rng = np.random.default_rng(seed)
    lo, hi = amp_range
    specs = []
    for _ in range(n_stations):
        specs.append([Tone(p, rng.uniform(lo, hi), rng.uniform(0, 2 * np.pi))
                      for p in periods])
    return tone_panel(n_samples, specs, tau_s, base_level, noise_std,
                      seed + 1, holidays, start_timestamp)


def family_panel(n_samples: int, family_periods, stations_per_family: int,
                 tau_s: float = HOUR_S, base_level: float = 10.0,
                 noise_std: float = 0.05, seed: int = 0,
                 start_timestamp: float = 0.0):
    """Stations drawn from waveform families, for clustering checks.

    Stations of one family share the same tones (same phases), so they are
    synchronized up to their independent noise.

    Returns
    -------
    (LoadPanel, ndarray)
        The panel and the ground-truth family label per station.
    """
    rng = np.random.default_rng(seed)
    specs, labels = [], []
    for fam, periods in enumerate(family_periods):
        tones = [Tone(p, rng.uniform(0.8, 1.2), rng.uniform(0, 2 * np.pi))
                 for p in periods]
        for _ in range(stations_per_family):
            specs.append(tones)
            labels.append(fam)
    panel = tone_panel(n_samples, specs, tau_s, base_level, noise_std, seed + 1,
                       start_timestamp=start_timestamp)
    return panel, np.asarray(labels, dtype=int)
