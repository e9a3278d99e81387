#!/usr/bin/env python3
"""Week-ahead forecasting with a linear model in eigenfunction coordinates.

Trains on three weeks of a synthetic panel, forecasts the fourth week by
rolling the fitted evolution matrix, and splits the test residual into
modal noise (inside the decoded mode span) and innovation noise (outside
it). With added measurement noise the innovation component tracks the
injected noise level.
"""

import numpy as np

from koopload import (
    SpectralParams,
    SplitSpec,
    block_diagonality,
    fit_forecast_model,
    fit_spectral,
    forecast,
    mixed_tone_panel,
    noise_split,
    realify,
    rmse,
    split_normalized,
)

print("=== Week-ahead forecast of a periodic panel ===\n")

panel = mixed_tone_panel(672, 8, [24, 168], seed=17)
spec = SplitSpec(train_range=(0, 504), test_range=(504, 672))
train, test, stats = split_normalized(panel, spec)
print("train: 3 weeks, test: 1 week, 8 stations, hourly sampling")

params = SpectralParams(q_delays=168, knn=40, l=60, lprime=30, theta=1e-9)
model = fit_spectral(train, params, stats)
fmodel = fit_forecast_model(train, model.basis, params.q_delays,
                            evolution="regression", stats=stats)

pred = forecast(fmodel, None, horizon=168)
errs = [rmse(test.values[:168, j], pred[:, j]) for j in range(8)]
print(f"normalized RMSE per station: {min(errs):.4f} .. {max(errs):.4f}")

frac, devs = block_diagonality(fmodel.k_psi, fmodel.blocks)
print(f"evolution matrix off-block energy fraction: {frac:.2e}")
print(f"worst pair-block skew deviation: {devs.max():.2e}")

print("\n--- same experiment with 5% measurement noise ---")
rng = np.random.default_rng(3)
clean = mixed_tone_panel(672, 20, [24, 168], seed=17)
noise = rng.normal(0.0, 0.05 * clean.values.std(), clean.values.shape)
noisy = clean.with_values(clean.values + noise)
train_n, test_n, stats_n = split_normalized(noisy, spec)
model_n = fit_spectral(train_n, SpectralParams(168, 40, 60, 9), stats_n)
fmodel_n = fit_forecast_model(train_n, model_n.basis, 168, "regression", stats_n)
pred_n = forecast(fmodel_n, None, 168)
errs_n = [rmse(test_n.values[:168, j], pred_n[:, j]) for j in range(20)]
print(f"normalized RMSE per station: {min(errs_n):.4f} .. {max(errs_n):.4f}")

split_parts = noise_split(test_n.values[:168] - pred_n, fmodel_n.decoder)
injected = noise[504:672] / (stats_n.col_max - stats_n.col_min)[None, :]
print(f"innovation-noise norm: {np.linalg.norm(split_parts.innovation):.3f}")
print(f"injected-noise norm:   {np.linalg.norm(injected):.3f}")
print(f"modal-noise norm:      {np.linalg.norm(split_parts.modal):.3f}")

print("\n--- phase-mode rollout (pure eigenfrequency rotation) ---")
fmodel_p = fit_forecast_model(train, model.basis, 168, "phase", stats)
pred_p = forecast(fmodel_p, None, 168)
errs_p = [rmse(test.values[:168, j], pred_p[:, j]) for j in range(8)]
radius = np.abs(np.linalg.eigvals(fmodel_p.k_psi)).max()
print(f"spectral radius of the phase evolution: {radius:.12f}")
print(f"normalized RMSE per station: {min(errs_p):.4f} .. {max(errs_p):.4f}")
print("(phase mode rotates at the recovered eigenfrequencies, so it "
      "accumulates their finite-difference bias over the week; the "
      "regression evolution refits the one-step map and does not)")
