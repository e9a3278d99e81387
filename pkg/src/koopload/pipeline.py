"""End-to-end orchestration of the spectral pipeline on one panel."""

from __future__ import annotations

from dataclasses import dataclass

from .data import LoadPanel, NormStats
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
from .spectral import (
    KernelEigenbasis,
    KoopmanBasis,
    NystromContext,
    galerkin_matrices,
    galerkin_solve,
    generator_action,
    kernel_eigs,
)


@dataclass(frozen=True)
class SpectralParams:
    """Tunables of the embedding, kernel, and Galerkin steps."""

    q_delays: int
    knn: int
    l: int
    lprime: int
    theta: float = 1e-9
    alpha: float = 0.5
    bandwidth_mode: str = "variable"
    epsilon_scale: float = 1.0

    def delay_config(self) -> DelayConfig:
        return DelayConfig(self.q_delays, self.knn, self.bandwidth_mode,
                           self.alpha, self.epsilon_scale)


@dataclass(frozen=True)
class SpectralModel:
    """Everything the pipeline fitted on one normalized panel."""

    panel: LoadPanel
    stats: NormStats | None
    params: SpectralParams
    graph: DelayGraph
    markov: MarkovMatrix
    kernel_basis: KernelEigenbasis
    basis: KoopmanBasis
    nystrom: NystromContext


def fit_spectral(panel_norm: LoadPanel, params: SpectralParams,
                 stats: NormStats | None = None) -> SpectralModel:
    """Run embedding, kernel, Markov, and Galerkin steps on one panel.

    The panel is expected to be normalized already; pass the stats used so
    downstream forecasts can restore physical units.
    """
    config = params.delay_config()
    distances = pairwise_delay_distances(panel_norm, params.q_delays)
    graph = build_graph(distances, config)
    markov = markov_normalize(kernel_matrix(graph, config))
    eps_eff = graph.eps0 * config.epsilon_scale
    kernel_basis = kernel_eigs(markov, params.l, eps_eff)
    tau = panel_norm.sample_interval_s
    vphi = generator_action(kernel_basis.phi, tau)
    a, b = galerkin_matrices(kernel_basis, vphi, params.theta)
    basis = galerkin_solve(a, b, kernel_basis, params.lprime, tau)
    context = NystromContext(delay_embed(panel_norm, params.q_delays),
                             params.q_delays, graph, config, markov)
    return SpectralModel(panel_norm, stats, params, graph, markov,
                         kernel_basis, basis, context)
