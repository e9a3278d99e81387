"""Linear forecasting in the Koopman eigenfunction coordinates.

Each conjugate eigenfunction pair is replaced by its real and imaginary
parts (times sqrt(2)), so the evolution matrix, the decoder, and every
forecast are real. In this basis an ideal quasiperiodic system evolves by
independent 2x2 rotation blocks; the block-diagonality diagnostic measures
how far a fitted evolution matrix strays from that structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import NormStats
from .errors import (
    AlignmentError,
    ConfigError,
    DivergenceError,
    FitError,
    SolverError,
)
from .spectral import KoopmanBasis

_RIDGE_COND = 1e12
_RIDGE_SCALE = 1e-10


@dataclass(frozen=True)
class RealifiedBasis:
    """Real coordinates built from conjugate eigenfunction pairs.

    ``values`` holds one realified function per row, sampled over time.
    ``blocks`` lists (start, size) index ranges: size 1 for real modes,
    size 2 for the (sqrt(2) Re, sqrt(2) Im) rows of a pair. ``omegas`` is
    the nonnegative eigenfrequency of each block in rad/s.
    """

    values: np.ndarray        # (r, N_e)
    blocks: tuple             # ((start, size), ...)
    omegas: np.ndarray        # (n_blocks,)
    mode_indices: tuple       # complex-mode index behind each block

    @property
    def n_functions(self) -> int:
        return self.values.shape[0]


def realify(basis: KoopmanBasis) -> RealifiedBasis:
    """Realified coordinates of a Koopman basis.

    Real (self-conjugate) modes contribute their real part unchanged; each
    conjugate pair contributes sqrt(2) times the real and imaginary parts
    of its positive-frequency member.
    """
    rows, blocks, omegas, idx = [], [], [], []
    seen = set()
    for k in range(basis.n_modes):
        if k in seen:
            continue
        j = int(basis.pair[k])
        start = len(rows)
        if j == k:
            col = basis.psi[:, k]
            if np.abs(col.imag).max() > 1e-6 * max(np.abs(col).max(), 1.0):
                raise SolverError(f"self-conjugate mode {k} is not real")
            rows.append(col.real)
            blocks.append((start, 1))
            omegas.append(0.0)
            idx.append(k)
            seen.add(k)
        else:
            lead = k if basis.omega[k] > 0 else j
            col = basis.psi[:, lead]
            rows.append(np.sqrt(2.0) * col.real)
            rows.append(np.sqrt(2.0) * col.imag)
            blocks.append((start, 2))
            omegas.append(abs(float(basis.omega[lead])))
            idx.append(lead)
            seen.update((k, j))
    return RealifiedBasis(np.asarray(rows), tuple(blocks),
                          np.asarray(omegas), tuple(idx))


def realified_state(basis: KoopmanBasis, psi_values: np.ndarray) -> np.ndarray:
    """Realified coordinate vector from complex eigenfunction values.

    ``psi_values`` holds one value per mode of ``basis`` (for example from
    an out-of-sample extension); the result lines up with the rows of
    :func:`realify` and can seed :func:`forecast` at a new origin.
    """
    psi_values = np.asarray(psi_values)
    if psi_values.shape != (basis.n_modes,):
        raise AlignmentError(
            f"expected {basis.n_modes} eigenfunction values, "
            f"got shape {psi_values.shape}")
    real = realify(basis)
    out = np.empty(real.n_functions)
    for (start, size), k in zip(real.blocks, real.mode_indices):
        if size == 1:
            out[start] = psi_values[k].real
        else:
            out[start] = np.sqrt(2.0) * psi_values[k].real
            out[start + 1] = np.sqrt(2.0) * psi_values[k].imag
    return out


@dataclass(frozen=True)
class NoiseSplit:
    """Residual split into its in-span and out-of-span components."""

    modal: np.ndarray
    innovation: np.ndarray


@dataclass(frozen=True)
class ForecastModel:
    """Fitted eigenfunction evolution and linear decoder.

    ``evolution='regression'`` rolls the state with the least-squares
    matrix ``k_psi``; ``evolution='phase'`` rotates each pair block by its
    own eigenfrequency, which has spectral radius exactly 1.
    """

    k_psi: np.ndarray
    decoder: np.ndarray
    evolution: str
    blocks: tuple
    omegas: np.ndarray
    tau: float
    psi_last: np.ndarray
    stats: NormStats | None = field(default=None, repr=False)

    def phase_step(self) -> np.ndarray:
        """One-step evolution matrix of the phase mode (block rotations)."""
        r = self.k_psi.shape[0]
        step = np.zeros((r, r))
        for (start, size), omega in zip(self.blocks, self.omegas):
            if size == 1:
                step[start, start] = 1.0
            else:
                c, s = np.cos(omega * self.tau), np.sin(omega * self.tau)
                step[start:start + 2, start:start + 2] = [[c, s], [-s, c]]
        return step


def _normal_equations(target: np.ndarray, regressors: np.ndarray) -> np.ndarray:
    """Least squares target ~= M @ regressors via normal equations.

    A Tikhonov term proportional to the mean Gram eigenvalue is added when
    the Gram matrix condition exceeds 1e12; a fit that stays unusable
    raises FitError.
    """
    gram = regressors @ regressors.T
    rhs = target @ regressors.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > _RIDGE_COND:
        delta = _RIDGE_SCALE * np.trace(gram) / gram.shape[0]
        if not delta > 0:
            raise FitError("regressor Gram matrix is identically zero")
        gram = gram + delta * np.eye(gram.shape[0])
    try:
        solution = np.linalg.solve(gram, rhs.T).T
    except np.linalg.LinAlgError as exc:
        raise FitError(f"normal equations unsolvable: {exc}") from exc
    if not np.all(np.isfinite(solution)):
        raise FitError("normal equations produced non-finite coefficients")
    return solution


def fit_evolution(psi: np.ndarray) -> np.ndarray:
    """One-step evolution matrix from sampled eigenfunctions.

    ``psi`` holds one realified eigenfunction per row over time; the fit
    minimizes the mismatch between the samples shifted by one step and
    the evolved samples.
    """
    psi = np.asarray(psi, float)
    if psi.shape[1] < psi.shape[0] + 1:
        raise ConfigError(
            f"need at least r+1 = {psi.shape[0] + 1} samples, got {psi.shape[1]}")
    return _normal_equations(psi[:, 1:], psi[:, :-1])


def fit_decoder(x: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Linear map from eigenfunction coordinates back to station values.

    ``x`` is d x N (stations by time), aligned column-for-column with
    ``psi``.
    """
    x = np.asarray(x, float)
    psi = np.asarray(psi, float)
    if x.shape[1] != psi.shape[1]:
        raise AlignmentError(
            f"x has {x.shape[1]} columns, eigenfunctions have {psi.shape[1]}")
    return _normal_equations(x, psi)


def fit_forecast_model(panel_norm, basis: KoopmanBasis, q_delays: int,
                       evolution: str = "regression",
                       stats: NormStats | None = None) -> ForecastModel:
    """Fit evolution and decoder on a normalized training panel.

    The panel must be the one the basis was computed from; rows from
    ``q_delays - 1`` on are aligned with the eigenfunction samples.
    """
    if evolution not in ("regression", "phase"):
        raise ConfigError(f"unknown evolution mode {evolution!r}")
    real = realify(basis)
    ne = real.values.shape[1]
    if panel_norm.n_samples != ne + q_delays - 1:
        raise AlignmentError(
            f"panel has {panel_norm.n_samples} rows; basis with Q={q_delays} "
            f"needs {ne + q_delays - 1}")
    x = panel_norm.values[q_delays - 1:].T
    decoder = fit_decoder(x, real.values)
    if evolution == "regression":
        k_psi = fit_evolution(real.values)
    else:
        shell = ForecastModel(np.eye(real.n_functions), decoder, evolution,
                              real.blocks, real.omegas, basis.tau,
                              real.values[:, -1].copy(), stats)
        k_psi = shell.phase_step()
    return ForecastModel(k_psi, decoder, evolution, real.blocks, real.omegas,
                         basis.tau, real.values[:, -1].copy(), stats)


def forecast(model: ForecastModel, psi0: np.ndarray | None, horizon: int,
             denormalize: bool = False) -> np.ndarray:
    """Roll the eigenfunction state forward and decode station values.

    Parameters
    ----------
    psi0 : ndarray or None
        State at the forecast origin; defaults to the last training state.
    horizon : int
        Number of steps ahead; row t of the output is the decode t+1 steps
        past the origin.
    denormalize : bool
        Map the decoded values back to physical units with the stored
        normalization statistics.
    """
    if horizon <= 0:
        raise ConfigError(f"horizon must be positive, got {horizon}")
    state = np.asarray(model.psi_last if psi0 is None else psi0, float).copy()
    if state.shape != (model.k_psi.shape[0],):
        raise AlignmentError(
            f"state has shape {state.shape}, expected ({model.k_psi.shape[0]},)")
    step = model.k_psi
    out = np.empty((horizon, model.decoder.shape[0]))
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(horizon):
            state = step @ state
            if not np.all(np.isfinite(state)):
                raise DivergenceError(t + 1)
            out[t] = model.decoder @ state
    if denormalize:
        if model.stats is None:
            raise ConfigError("model carries no normalization statistics")
        out = model.stats.invert(out)
    return out


def rmse(x: np.ndarray, x_f: np.ndarray) -> float:
    """Root mean squared error between a vector and its forecast."""
    x = np.asarray(x, float).ravel()
    x_f = np.asarray(x_f, float).ravel()
    if x.size != x_f.size:
        raise AlignmentError(f"length mismatch: {x.size} vs {x_f.size}")
    if x.size < 1:
        raise AlignmentError("rmse needs at least one sample")
    return float(np.sqrt(np.mean((x - x_f) ** 2)))


def noise_split(residual: np.ndarray, decoder: np.ndarray) -> NoiseSplit:
    """Split residuals into modal (in-span) and innovation (out-of-span) noise.

    The modal part is the orthogonal projection of each residual row onto
    the decoder's column space; the innovation part is the exact remainder,
    so the two always sum back to the input.
    """
    residual = np.asarray(residual, float)
    decoder = np.asarray(decoder, float)
    if residual.ndim != 2 or residual.shape[1] != decoder.shape[0]:
        raise AlignmentError(
            f"residual shape {residual.shape} does not match decoder rows "
            f"{decoder.shape[0]}")
    projector = decoder @ np.linalg.pinv(decoder)
    modal = residual @ projector.T
    return NoiseSplit(modal, residual - modal)


def block_diagonality(k_psi: np.ndarray, blocks) -> tuple:
    """Energy fraction of an evolution matrix outside its pair blocks.

    Returns the Frobenius-norm fraction of ``k_psi`` lying outside the 1x1
    and 2x2 diagonal blocks, plus one skew-symmetry deviation per block
    (how far the off-diagonal part of a 2x2 block is from c = -b, relative
    to the block norm; zero for 1x1 blocks).
    """
    k_psi = np.asarray(k_psi, float)
    total = float(np.sum(k_psi ** 2))
    in_block = 0.0
    devs = []
    for start, size in blocks:
        sub = k_psi[start:start + size, start:start + size]
        in_block += float(np.sum(sub ** 2))
        if size == 2:
            norm = np.sqrt(np.sum(sub ** 2))
            devs.append(float(abs(sub[0, 1] + sub[1, 0]) / norm) if norm > 0 else 0.0)
        else:
            devs.append(0.0)
    fraction = 0.0 if total == 0 else (total - in_block) / total
    return float(fraction), np.asarray(devs)
