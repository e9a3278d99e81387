"""Diffusion-potential embedding and clustering of stations.

Stations are treated as points in time-series space: a variable-bandwidth
kernel over the normalized per-station series gives a small Markov matrix,
its power at an entropy-selected diffusion time yields log-potential
distances, metric MDS embeds those in a few dimensions, and k-means labels
the embedded stations. Synchronized stations collapse to nearby points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from .data import LoadPanel, minmax_normalize
from .errors import ConfigError, InsufficientData
from .kernel import (
    DelayConfig,
    MarkovMatrix,
    build_graph,
    kernel_matrix,
    markov_normalize,
    pairwise_delay_distances,
)

_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class StationGraph:
    """Markov similarity structure over stations."""

    markov: MarkovMatrix
    station_ids: tuple
    config: DelayConfig


@dataclass(frozen=True)
class DiffusionTime:
    """Entropy-selected diffusion time and the curve behind it."""

    t_prime: int
    entropies: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class MdsResult:
    """Embedded coordinates with the per-iteration stress trace."""

    coords: np.ndarray
    stress_trace: np.ndarray

    @property
    def stress(self) -> float:
        return float(self.stress_trace[-1])


@dataclass(frozen=True)
class PhateEmbedding:
    """Final embedding: coordinates, diffusion time, stress, and labels."""

    coords: np.ndarray
    t_prime: int
    stress: float
    labels: np.ndarray
    k: int
    empty_clusters: tuple = ()


def station_graph(panel: LoadPanel, knn: int, alpha: float = 0.5,
                  bandwidth_mode: str = "variable",
                  epsilon_scale: float = 1.0) -> StationGraph:
    """Markov matrix over stations from their normalized time series.

    Each station is min-max normalized over time, pairwise squared
    Euclidean distances are taken in R^N (no delay embedding between
    spatial points), and the same k-NN / variable-bandwidth / Markov
    machinery as the time-point kernel is applied to the transposed
    problem.
    """
    if panel.n_stations < 2:
        raise InsufficientData("station clustering needs at least 2 stations")
    normalized, _ = minmax_normalize(panel, mode="per-station")
    points = normalized.values.T  # stations as rows
    # tiny panels clamp the neighbor count; with d stations at most d-1
    # neighbors exist
    knn = min(knn, panel.n_stations - 1)
    config = DelayConfig(1, knn, bandwidth_mode, alpha, epsilon_scale)
    distances = pairwise_delay_distances(points, 1)
    graph = build_graph(distances, config)
    markov = markov_normalize(kernel_matrix(graph, config))
    return StationGraph(markov, panel.station_ids, config)


def select_diffusion_time(markov: MarkovMatrix, t_max: int = 100,
                          knee_fraction: float = 0.05) -> DiffusionTime:
    """Diffusion time from the knee of the von Neumann entropy curve.

    H(t) is the entropy of the positive spectrum of the symmetric
    conjugate, normalized at each power t. The selected time is the first
    t whose entropy drop falls below ``knee_fraction`` of the initial drop;
    flat curves give t = 1.
    """
    if t_max < 1:
        raise ConfigError("t_max must be >= 1")
    lam = np.linalg.eigvalsh(markov.symmetric_conjugate().toarray())
    lam = np.sort(lam[lam > 0.0])[::-1]
    degenerate = lam.size < 2 or np.all(lam[1:] < 1e-12)

    entropies = np.empty(t_max)
    for t in range(1, t_max + 1):
        p = lam ** t
        p = p / p.sum()
        nz = p[p > 0]
        entropies[t - 1] = float(-(nz * np.log(nz)).sum())

    if degenerate or t_max == 1:
        return DiffusionTime(1, entropies, degenerate)
    first_drop = entropies[0] - entropies[1]
    if first_drop <= 1e-15:
        return DiffusionTime(1, entropies, False)
    threshold = knee_fraction * first_drop
    for t in range(2, t_max + 1):
        if entropies[t - 2] - entropies[t - 1] < threshold:
            return DiffusionTime(t, entropies, False)
    return DiffusionTime(t_max, entropies, False)


def potential_distances(markov: MarkovMatrix, t_prime: int) -> np.ndarray:
    """Pairwise distances between log-potential rows of the powered operator.

    The Markov matrix is raised to ``t_prime`` densely, entries are floored
    before the elementwise -log, and Euclidean distances between rows are
    returned as a symmetric zero-diagonal table.
    """
    if t_prime < 1:
        raise ConfigError("t_prime must be >= 1")
    powered = np.linalg.matrix_power(markov.P.toarray(), t_prime)
    potential = -np.log(np.maximum(powered, _LOG_FLOOR))
    sq = np.sum(potential ** 2, axis=1)
    gram = potential @ potential.T
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0)
    dist = np.sqrt(d2)
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    return dist


def _classical_mds(gamma: np.ndarray, m: int) -> np.ndarray:
    n = gamma.shape[0]
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ (gamma ** 2) @ j
    w, v = np.linalg.eigh(0.5 * (b + b.T))
    order = np.argsort(w)[::-1][:m]
    scale = np.sqrt(np.maximum(w[order], 0.0))
    coords = v[:, order] * scale[None, :]
    if coords.shape[1] < m:
        coords = np.pad(coords, ((0, 0), (0, m - coords.shape[1])))
    return coords


def _stress(gamma: np.ndarray, coords: np.ndarray, denom: float) -> float:
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt(np.maximum((diff ** 2).sum(axis=2), 0.0))
    return float(np.sqrt(np.sum((gamma - dist) ** 2) / denom))


def metric_mds(gamma: np.ndarray, m: int = 3, seed: int = 0,
               max_iter: int = 500, rel_tol: float = 1e-8) -> MdsResult:
    """Metric MDS by stress majorization from a classical-MDS start.

    The stress is the scale-normalized form
    sqrt(sum (Gamma_ij - |z_i - z_j|)^2 / sum Gamma_ij^2); each Guttman
    update cannot increase it, and iteration stops once the relative
    improvement falls under ``rel_tol`` or after ``max_iter`` rounds.
    Deterministic for a fixed seed.
    """
    gamma = np.asarray(gamma, float)
    n = gamma.shape[0]
    if gamma.shape != (n, n):
        raise ConfigError("distance table must be square")
    if m < 1:
        raise ConfigError("embedding dimension must be >= 1")
    if np.abs(gamma - gamma.T).max() > 1e-10 * max(gamma.max(), 1.0):
        raise ConfigError("distance table must be symmetric")
    denom = float(np.sum(gamma ** 2))
    if denom == 0.0:
        return MdsResult(np.zeros((n, m)), np.zeros(1))

    rng = np.random.default_rng(seed)
    coords = _classical_mds(gamma, m)
    if not np.any(np.abs(coords) > 0):  # degenerate start despite nonzero gamma
        coords = rng.standard_normal((n, m)) * gamma.max() * 1e-3

    trace = [_stress(gamma, coords, denom)]
    for _ in range(max_iter):
        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.sqrt(np.maximum((diff ** 2).sum(axis=2), 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, gamma / np.where(dist == 0, 1.0, dist), 0.0)
        b = -ratio
        b[np.arange(n), np.arange(n)] = ratio.sum(axis=1) - np.diag(ratio)
        coords = b @ coords / n
        trace.append(_stress(gamma, coords, denom))
        if trace[-2] - trace[-1] < rel_tol * max(trace[-2], 1e-300):
            break
    return MdsResult(coords, np.asarray(trace))


def kmeans(coords: np.ndarray, k: int, seed: int = 0) -> np.ndarray:
    """Cluster embedded stations with k-means (best of 10 seeded restarts)."""
    coords = np.asarray(coords, float)
    if k > coords.shape[0]:
        raise ConfigError(f"k={k} exceeds the number of points {coords.shape[0]}")
    if k < 1:
        raise ConfigError("k must be >= 1")
    model = KMeans(n_clusters=k, init="k-means++", n_init=10, max_iter=300,
                   random_state=seed)
    return model.fit_predict(coords)


def phate_cluster(panel: LoadPanel, knn: int, m: int = 3, k: int = 10,
                  t_max: int = 100, mds_seed: int = 0,
                  kmeans_seed: int = 0, alpha: float = 0.5,
                  bandwidth_mode: str = "variable",
                  epsilon_scale: float = 1.0) -> PhateEmbedding:
    """Full station pipeline: kernel, diffusion time, potentials, MDS, k-means."""
    graph = station_graph(panel, knn, alpha, bandwidth_mode, epsilon_scale)
    t_sel = select_diffusion_time(graph.markov, t_max)
    gamma = potential_distances(graph.markov, t_sel.t_prime)
    mds = metric_mds(gamma, m=m, seed=mds_seed)
    labels = kmeans(mds.coords, k, seed=kmeans_seed)
    counts = np.bincount(labels, minlength=k)
    empty = tuple(int(c) for c in np.nonzero(counts == 0)[0])
    return PhateEmbedding(mds.coords, t_sel.t_prime, mds.stress, labels, k, empty)
