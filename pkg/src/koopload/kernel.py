"""Delay-coordinate embedding, k-NN graph, and Markov-normalized kernel.

The pipeline here is: embed each sample together with its Q-1 predecessors,
measure pairwise delay distances, keep a symmetrized k-nearest-neighbor
relation, evaluate a (variable-bandwidth) Gaussian kernel on the retained
pairs, and normalize the kernel to a row-stochastic Markov matrix whose
spectrum is real.

Distances are accumulated in a fixed deterministic order (per station, then
per lag) so results do not depend on how the work is chunked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .data import LoadPanel
from .errors import BandwidthError, ConfigError, IsolatedPointError

# Log-spaced bandwidth sweep used by the auto-tuner: eps = 2**e.
_TUNE_EXPONENTS = np.arange(-30.0, 10.0 + 1e-9, 0.25)


@dataclass(frozen=True)
class DelayConfig:
    """Parameters of the embedding graph and kernel.

    Attributes
    ----------
    delays_q : int
        Number of delays Q (Q = 1 means no embedding).
    knn : int
        Nearest neighbors retained per point, excluding the point itself.
    bandwidth_mode : str
        ``'variable'`` adapts the bandwidth to local sampling density,
        ``'fixed'`` uses the auto-tuned global value everywhere.
    alpha : float
        Density exponent of the variable bandwidth.
    epsilon_scale : float
        Multiplier applied to the auto-tuned global bandwidth.
    """

    delays_q: int
    knn: int
    bandwidth_mode: str = "variable"
    alpha: float = 0.5
    epsilon_scale: float = 1.0

    def __post_init__(self):
        if self.delays_q < 1:
            raise ConfigError("delays_q must be >= 1")
        if self.knn < 1:
            raise ConfigError("knn must be >= 1")
        if self.bandwidth_mode not in ("fixed", "variable"):
            raise ConfigError(f"unknown bandwidth_mode {self.bandwidth_mode!r}")
        if not self.epsilon_scale > 0:
            raise BandwidthError("epsilon_scale must be positive")


@dataclass(frozen=True)
class DelayGraph:
    """Symmetrized k-NN relation over embedded points.

    Pairs are stored as COO triplets (``row``, ``col``, ``d2``) that include
    both orientations of every retained pair and the zero-distance
    self-pairs. ``rho`` is the per-point density estimate and ``eps0`` the
    auto-tuned global bandwidth (before ``epsilon_scale``).
    """

    n_points: int
    row: np.ndarray
    col: np.ndarray
    d2: np.ndarray
    rho: np.ndarray
    eps0: float
    knn: int

    def neighbors(self, i: int) -> np.ndarray:
        """Indices retained for point i (including i itself)."""
        return np.sort(self.col[self.row == i])


@dataclass(frozen=True)
class MarkovMatrix:
    """Row-stochastic normalized kernel and its normalization vectors.

    ``q`` is the kernel row-sum vector and ``sigma`` the row sums of the
    density-corrected kernel; ``sigma / sigma.sum()`` is the stationary
    distribution of ``P``.
    """

    P: sp.csr_matrix
    q: np.ndarray
    sigma: np.ndarray

    @property
    def n_points(self) -> int:
        return self.P.shape[0]

    def symmetric_conjugate(self) -> sp.csr_matrix:
        """S = Sigma^{1/2} P Sigma^{-1/2}, symmetric with the same spectrum."""
        s = np.sqrt(self.sigma)
        S = sp.diags(s) @ self.P @ sp.diags(1.0 / s)
        return ((S + S.T) * 0.5).tocsr()


def delay_embed(panel, Q: int) -> np.ndarray:
    """Delay-coordinate embedding of a panel.

    Point m (m = 0 .. N-Q) corresponds to original time index m + Q - 1 and
    is the concatenation (x_{m+Q-1}, x_{m+Q-2}, ..., x_m) in R^{Qd}; indices
    with incomplete history are dropped.

    Parameters
    ----------
    panel : LoadPanel or ndarray, shape (N, d)
    Q : int

    Returns
    -------
    ndarray, shape (N - Q + 1, Q * d)
    """
    values = panel.values if isinstance(panel, LoadPanel) else np.asarray(panel, float)
    n = values.shape[0]
    if Q >= n + 1 or Q < 1:
        raise ConfigError(f"need 1 <= Q <= N, got Q={Q}, N={n}")
    if Q == 1:
        return values.copy()
    win = np.lib.stride_tricks.sliding_window_view(values, Q, axis=0)
    # win[m, c, k] = values[m + k, c]; lag q of point m is values[m + Q-1 - q]
    return win[:, :, ::-1].transpose(0, 2, 1).reshape(n - Q + 1, -1)


def pairwise_delay_distances(panel, Q: int) -> np.ndarray:
    """Full table of squared delay distances.

    d2[i, j] = (1/Q) * sum over lags of the squared Euclidean distance of
    the lagged samples, which equals 1/Q times the squared distance of the
    embedded vectors.

    Returns
    -------
    ndarray, shape (N_e, N_e), symmetric with zero diagonal.
    """
    values = panel.values if isinstance(panel, LoadPanel) else np.asarray(panel, float)
    n, d = values.shape
    if Q >= n + 1 or Q < 1:
        raise ConfigError(f"need 1 <= Q <= N, got Q={Q}, N={n}")
    ne = n - Q + 1

    inst = np.zeros((n, n))
    for c in range(d):
        diff = values[:, c, None] - values[None, :, c]
        inst += diff * diff

    if Q == 1:
        d2 = inst
    else:
        d2 = np.zeros((ne, ne))
        for k in range(Q):
            d2 += inst[Q - 1 - k:n - k, Q - 1 - k:n - k]
        d2 /= Q
    d2 = np.maximum(d2, 0.0)
    np.fill_diagonal(d2, 0.0)
    return d2


def _density(distances: np.ndarray, knn: int) -> np.ndarray:
    """Density proxy: reciprocal mean of the knn smallest non-self d2."""
    ne = distances.shape[0]
    offdiag = distances + np.where(np.eye(ne, dtype=bool), np.inf, 0.0)
    smallest = np.partition(offdiag, knn - 1, axis=1)[:, :knn]
    mean = smallest.mean(axis=1)
    positive = mean[mean > 0]
    floor = positive.min() if positive.size else 1.0
    return 1.0 / np.maximum(mean, floor * 1e-12)


def _tune_eps0(scaled_d2: np.ndarray) -> float:
    """Pick the bandwidth maximizing d log S / d log eps on a 2**e grid."""
    eps_grid = 2.0 ** _TUNE_EXPONENTS
    # S(eps) = sum exp(-t/eps); computed stably in chunks over the grid
    log_s = np.empty(eps_grid.size)
    for i, eps in enumerate(eps_grid):
        log_s[i] = np.log(np.exp(-scaled_d2 / eps).sum())
    slope = np.gradient(log_s, np.log(eps_grid))
    if not np.any(slope > 1e-12):  # flat sweep: degenerate (all-zero) distances
        return 1.0
    return float(eps_grid[int(np.argmax(slope))])


def build_graph(distances: np.ndarray, config: DelayConfig) -> DelayGraph:
    """Retain the knn smallest distances per point and symmetrize by union.

    Ties at the knn-th smallest distance are all retained, so the result
    does not depend on the ordering of equal distances. Self-pairs are
    stored with distance zero. The per-point density estimate and the
    auto-tuned global bandwidth are computed here so that the kernel step
    is a pure evaluation.
    """
    distances = np.asarray(distances, float)
    ne = distances.shape[0]
    if distances.shape != (ne, ne):
        raise ConfigError("distance table must be square")
    if not 1 <= config.knn < ne:
        raise ConfigError(f"need 1 <= knn < N_e, got knn={config.knn}, N_e={ne}")

    offdiag = distances + np.where(np.eye(ne, dtype=bool), np.inf, 0.0)
    kth = np.partition(offdiag, config.knn - 1, axis=1)[:, config.knn - 1]
    keep = offdiag <= kth[:, None]
    keep |= keep.T  # union symmetrization
    np.fill_diagonal(keep, True)

    row, col = np.nonzero(keep)
    d2 = distances[row, col]
    rho = _density(distances, config.knn)

    if config.bandwidth_mode == "variable":
        scaled = d2 * (rho[row] ** config.alpha) * (rho[col] ** config.alpha)
    else:
        scaled = d2
    eps0 = _tune_eps0(scaled)

    return DelayGraph(ne, row, col, d2, rho, eps0, config.knn)


def kernel_matrix(graph: DelayGraph, config: DelayConfig) -> sp.csr_matrix:
    """Gaussian kernel on the retained pairs, zero elsewhere.

    In variable mode the pair bandwidth is
    ``eps0 * epsilon_scale / (rho_i**alpha * rho_j**alpha)``; in fixed mode
    it is ``eps0 * epsilon_scale`` for every pair.
    """
    eps_global = graph.eps0 * config.epsilon_scale
    if not eps_global > 0 or not np.isfinite(eps_global):
        raise BandwidthError(f"global bandwidth {eps_global} is not positive")
    if config.bandwidth_mode == "variable":
        if np.any(~np.isfinite(graph.rho)) or np.any(graph.rho <= 0):
            raise BandwidthError("density estimates must be finite and positive")
        expo = graph.d2 * (graph.rho[graph.row] ** config.alpha) \
            * (graph.rho[graph.col] ** config.alpha) / eps_global
    else:
        expo = graph.d2 / eps_global
    vals = np.exp(-expo)
    K = sp.coo_matrix((vals, (graph.row, graph.col)),
                      shape=(graph.n_points, graph.n_points)).tocsr()
    return K


def markov_normalize(K: sp.spmatrix) -> MarkovMatrix:
    """Normalize a symmetric nonnegative kernel to a Markov matrix.

    With q the row sums of K, the normalized matrix is

        P_ij = K_ij / ((sum_k K_ik q_k^{-1/2}) * q_j^{1/2})

    which equals row-normalizing the density-corrected kernel
    Q^{-1/2} K Q^{-1/2}. P is row stochastic, its largest eigenvalue is 1
    with constant eigenvector, and it is diagonally similar to a symmetric
    matrix, so the whole spectrum is real.
    """
    K = sp.csr_matrix(K, dtype=float)
    if K.shape[0] != K.shape[1]:
        raise ConfigError("kernel must be square")
    asym = abs(K - K.T)
    if asym.nnz and asym.max() > 1e-12 * max(K.max(), 1.0):
        raise ConfigError("kernel must be symmetric")
    if K.nnz and K.data.min() < 0:
        raise ConfigError("kernel must be nonnegative")

    q = np.asarray(K.sum(axis=1)).ravel()
    zero = np.nonzero(q <= 0)[0]
    if zero.size:
        raise IsolatedPointError(int(zero[0]))

    inv_sqrt_q = sp.diags(1.0 / np.sqrt(q))
    Kt = inv_sqrt_q @ K @ inv_sqrt_q
    sigma = np.asarray(Kt.sum(axis=1)).ravel()
    P = sp.diags(1.0 / sigma) @ Kt
    return MarkovMatrix(P.tocsr(), q, sigma)


def point_delay_distances(landmarks: np.ndarray, q_divisor: float,
                          x_new: np.ndarray) -> np.ndarray:
    """Squared delay distances from one embedded point to all landmarks."""
    diff = landmarks - np.asarray(x_new, float)[None, :]
    return np.maximum((diff * diff).sum(axis=1) / q_divisor, 0.0)
