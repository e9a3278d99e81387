"""Spatiotemporal decomposition of a panel in the Koopman eigenbasis.

Each mode contributes a spatial pattern (its projection amplitude per
station) and a temporal pattern (its sampled eigenfunction). Lag-resolved
projection coefficients let a conjugation-closed subset of modes
reconstruct the panel; summing a mode with its conjugate makes every
reconstruction real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LoadPanel
from .errors import AlignmentError, ConfigError, PairingError
from .spectral import KoopmanBasis

_REALNESS_TOL = 1e-8


@dataclass(frozen=True)
class ModeProjection:
    """Lag-resolved projections of the observable onto each mode.

    ``lag_coeffs[k, q]`` is the complex d-vector pairing mode k with the
    panel lagged q samples; ``lag_coeffs[k, 0]`` is the mode's spatial
    pattern (take its modulus per station). Panel metadata is carried so
    reconstructions come back as panels.
    """

    lag_coeffs: np.ndarray          # (n_modes, Q, d) complex
    n_samples: int
    sample_interval_s: float
    station_ids: tuple
    start_timestamp: float

    @property
    def n_modes(self) -> int:
        return self.lag_coeffs.shape[0]

    @property
    def q_delays(self) -> int:
        return self.lag_coeffs.shape[1]

    def spatial_pattern(self, k: int) -> np.ndarray:
        """Per-station modulus of the zero-lag coefficient of mode k."""
        return np.abs(self.lag_coeffs[k, 0])


def project_modes(panel: LoadPanel, basis: KoopmanBasis, Q: int) -> ModeProjection:
    """Project a (normalized) panel onto the Koopman eigenfunctions.

    For mode k and lag q the coefficient is the empirical average of
    ``conj(psi_k)`` against the panel lagged by q samples, where
    eigenfunction sample m is aligned with panel row m + Q - 1. Every lag
    0 .. Q-1 stays inside the panel, so no terms are dropped.
    """
    ne = basis.psi.shape[0]
    if panel.n_samples != ne + Q - 1:
        raise AlignmentError(
            f"panel has {panel.n_samples} rows; basis with Q={Q} needs {ne + Q - 1}")
    x = panel.values
    coeffs = np.empty((basis.n_modes, Q, panel.n_stations), dtype=complex)
    psi_h = basis.psi.conj().T
    for q in range(Q):
        coeffs[:, q, :] = psi_h @ x[Q - 1 - q:Q - 1 - q + ne] / ne
    return ModeProjection(coeffs, panel.n_samples, panel.sample_interval_s,
                          panel.station_ids, panel.start_timestamp)


def conjugation_closed_prefix(basis: KoopmanBasis, n: int) -> list:
    """Largest set of at most n lowest-energy modes closed under conjugation.

    Walks modes in energy order and admits whole conjugate groups while
    they fit, so the result is always a valid reconstruction mode set.
    """
    take: list = []
    for k in range(basis.n_modes):
        if k in take:
            continue
        group = sorted({k, int(basis.pair[k])})
        if len(take) + len(group) > n:
            continue
        take.extend(group)
        if len(take) == n:
            break
    return sorted(take)


def _check_conjugation_closed(basis: KoopmanBasis, mode_set) -> np.ndarray:
    modes = np.asarray(sorted(set(int(k) for k in mode_set)), dtype=int)
    if modes.size and (modes.min() < 0 or modes.max() >= basis.n_modes):
        raise ConfigError(f"mode indices out of range [0, {basis.n_modes})")
    missing = [int(k) for k in modes if int(basis.pair[k]) not in modes]
    if missing:
        raise PairingError(f"mode set not closed under conjugation: {missing}")
    return modes


def reconstruct(projection: ModeProjection, basis: KoopmanBasis,
                mode_set) -> LoadPanel:
    """Superpose the selected modes into a real panel.

    Row n sums ``lag_coeffs[k, q] * psi[n + q]`` over lags q below
    Q' = min(Q, N - 1 - n), skipping lags whose eigenfunction sample falls
    before the embeddable range and renormalizing by the number of terms
    kept. The final row, where the literal lag bound is empty, falls back
    to the single zero-lag term. The mode set must be conjugation closed;
    the imaginary residue is checked rather than discarded.
    """
    modes = _check_conjugation_closed(basis, mode_set)
    n = projection.n_samples
    q_delays = projection.q_delays
    ne = basis.psi.shape[0]
    d = len(projection.station_ids)
    acc = np.zeros((n, d), dtype=complex)

    if modes.size:
        a = projection.lag_coeffs[modes]          # (m, Q, d)
        psi = basis.psi[:, modes]                 # (ne, m)
        for row in range(n):
            qmax = max(min(q_delays, n - 1 - row), 1)
            q = np.arange(qmax)
            m = row + q - (q_delays - 1)
            valid = (m >= 0) & (m < ne)
            if not np.any(valid):
                continue
            q, m = q[valid], m[valid]
            # sum over modes and kept lags of A_k(q) psi_k(m), mean over lags
            acc[row] = np.einsum("kqd,qk->d", a[:, q, :], psi[m, :]) / q.size

    residue = np.abs(acc.imag).max()
    scale = max(np.abs(acc).max(), 1.0)
    if residue > _REALNESS_TOL * scale:
        raise PairingError(
            f"imaginary residue {residue:g} exceeds {_REALNESS_TOL:g} of scale {scale:g}")
    values = acc.real
    if not modes.size:
        values = np.zeros((n, d))
    return LoadPanel(values, projection.sample_interval_s, projection.station_ids,
                     projection.start_timestamp)


def mode_power_spectrum(basis: KoopmanBasis, k: int):
    """Discrete Fourier power of one eigenfunction time series.

    Returns
    -------
    (freq_hz, power) : ndarray pair
        Frequencies in Hz (negative to positive) and power normalized to
        unit total.
    """
    ne = basis.psi.shape[0]
    if ne < 8:
        raise ConfigError("need at least 8 samples for a spectrum")
    if not 0 <= k < basis.n_modes:
        raise ConfigError(f"mode index {k} out of range")
    coeff = np.fft.fft(basis.psi[:, k])
    power = np.abs(coeff) ** 2
    total = power.sum()
    if total > 0:
        power = power / total
    freq = np.fft.fftfreq(ne, d=basis.tau)
    order = np.argsort(freq)
    return freq[order], power[order]
