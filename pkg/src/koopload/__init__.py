"""Koopman-operator spectral analysis of multivariate load time series.

The library decomposes a panel of load measurements into coherent
spatiotemporal patterns (Koopman eigenfunctions of the underlying
dynamics), forecasts by evolving those patterns linearly, and groups
stations with synchronized dynamics through a heat-diffusion potential
embedding.
"""

from .data import (
    LoadPanel,
    NormStats,
    SplitSpec,
    load_csv,
    minmax_normalize,
    split,
    split_normalized,
    write_csv,
)
from .forecast import (
    ForecastModel,
    NoiseSplit,
    RealifiedBasis,
    block_diagonality,
    fit_decoder,
    fit_evolution,
    fit_forecast_model,
    forecast,
    noise_split,
    realified_state,
    realify,
    rmse,
)
from .kernel import (
    DelayConfig,
    DelayGraph,
    MarkovMatrix,
    build_graph,
    delay_embed,
    kernel_matrix,
    markov_normalize,
    pairwise_delay_distances,
)
from .modes import (
    ModeProjection,
    conjugation_closed_prefix,
    mode_power_spectrum,
    project_modes,
    reconstruct,
)
from .phate import (
    PhateEmbedding,
    StationGraph,
    kmeans,
    metric_mds,
    phate_cluster,
    potential_distances,
    select_diffusion_time,
    station_graph,
)
from .pipeline import SpectralModel, SpectralParams, fit_spectral
from .spectral import (
    KernelEigenbasis,
    KoopmanBasis,
    NystromContext,
    coherence_diagnostic,
    empirical_inner,
    galerkin_matrices,
    galerkin_solve,
    generator_action,
    kernel_eigs,
    nystrom_extend,
)
from .synth import Tone, family_panel, mixed_tone_panel, tone_panel

__version__ = "0.1.0"
