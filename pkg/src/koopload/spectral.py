"""Koopman eigenfunctions via a Galerkin projection on kernel eigenfunctions.

The route is the classical one for ergodic time series: eigenfunctions of
the Markov-normalized kernel supply a smooth data-driven basis; the
generator (time derivative along the trajectory) is discretized by finite
differences; projecting the regularized generator onto the basis yields a
small generalized eigenvalue problem whose complex eigenvalues carry the
oscillation frequencies and whose eigenvectors combine the basis into
Koopman eigenfunctions. Modes are ranked by Dirichlet energy: the smoothest
(lowest-energy) eigenfunctions are the most robust, most predictable ones.

Eigenvalue problems on the Markov matrix are solved through its symmetric
diagonal conjugate, which guarantees a real spectrum; eigenvectors are
mapped back, making the first eigenfunction exactly constant. The basis
columns are exactly orthonormal under the kernel's stationary weights and
approach plain orthonormality as the sampling density evens out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .errors import (
    ConfigError,
    DegenerateSpectrum,
    HistoryError,
    IllConditioned,
    SolverError,
    TruncationError,
)
from .kernel import DelayConfig, DelayGraph, MarkovMatrix, point_delay_distances

_UNIT_EIG_TOL = 1e-8
_DEGENERATE_TOL = 1e-10
_MIN_EXTEND_EIG = 1e-10


def empirical_inner(f: np.ndarray, g: np.ndarray) -> complex:
    """Ergodic-average inner product (1/N) sum conj(f) g."""
    return np.vdot(f, g) / f.shape[0]


def empirical_norm(f: np.ndarray) -> float:
    return float(np.sqrt(np.real(empirical_inner(f, f))))


@dataclass(frozen=True)
class KernelEigenbasis:
    """Leading eigenpairs of the Markov kernel matrix.

    Attributes
    ----------
    lambdas : ndarray, shape (l,)
        Eigenvalues in descending order; the first equals 1.
    phi : ndarray, shape (N_e, l)
        Sampled eigenfunctions, unit empirical norm per column, first
        column exactly constant. Columns are exactly orthogonal under
        ``weights`` and near-orthogonal under uniform weights.
    eta : ndarray, shape (l,)
        Laplace-Beltrami proxies (1/eps) (1/lambda - 1); eta[0] == 0.
    eps : float
        Effective global bandwidth used in eta.
    weights : ndarray, shape (N_e,)
        Stationary distribution of the Markov matrix.
    degenerate : bool
        True when the unit eigenvalue is repeated (flat spectrum); the
        Galerkin step refuses such a basis.
    """

    lambdas: np.ndarray
    phi: np.ndarray
    eta: np.ndarray
    eps: float
    weights: np.ndarray
    degenerate: bool = False

    @property
    def n_points(self) -> int:
        return self.phi.shape[0]

    @property
    def n_functions(self) -> int:
        return self.phi.shape[1]


@dataclass(frozen=True)
class KoopmanBasis:
    """Koopman eigenvalues, eigenfrequencies, and sampled eigenfunctions.

    Entries are sorted by nondecreasing Dirichlet energy; the trivial
    (constant, zero-frequency) mode is first. Nontrivial modes appear in
    conjugate pairs with matching energies; ``pair[k]`` is the index of the
    partner of mode k (``pair[k] == k`` for real modes).
    """

    gamma: np.ndarray          # complex eigenvalues of the regularized generator
    omega: np.ndarray          # Im(gamma), rad/s
    psi: np.ndarray            # (N_e, l') complex eigenfunction samples
    energies: np.ndarray       # Dirichlet energies, nondecreasing
    coeffs: np.ndarray         # (l, l') expansion in the kernel basis
    pair: np.ndarray           # conjugate-pair index map
    kernel_basis: KernelEigenbasis
    tau: float                 # sampling interval, seconds

    @property
    def n_modes(self) -> int:
        return self.psi.shape[1]

    @property
    def omega_hz(self) -> np.ndarray:
        """Signed eigenfrequencies in Hz."""
        return self.omega / (2.0 * np.pi)

    def is_trivial(self, k: int) -> bool:
        return self.pair[k] == k and abs(self.omega[k]) == 0.0 and self.energies[k] <= _UNIT_EIG_TOL


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs[None, :]


def kernel_eigs(markov: MarkovMatrix, l: int, eps: float) -> KernelEigenbasis:
    """Top-l eigenpairs of the Markov matrix by eigenvalue.

    Solved on the symmetric conjugate (deterministic start vector) and
    mapped back, which makes the returned vectors exact eigenvectors of P
    and the first one exactly constant. Columns are scaled to unit
    empirical norm and sign-fixed.
    """
    ne = markov.n_points
    if not 1 <= l <= ne:
        raise ConfigError(f"need 1 <= l <= N_e, got l={l}, N_e={ne}")
    S = markov.symmetric_conjugate()
    if l >= ne - 1 or ne <= 32:
        w, v = np.linalg.eigh(S.toarray())
        w, v = w[::-1][:l], v[:, ::-1][:, :l]
    else:
        v0 = np.full(ne, 1.0 / np.sqrt(ne))
        try:
            w, v = spla.eigsh(S, k=l, which="LA", v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"kernel eigensolver did not converge: {exc}") from exc
        order = np.argsort(w)[::-1]
        w, v = w[order], v[:, order]

    if abs(w[0] - 1.0) > _UNIT_EIG_TOL:
        raise SolverError(f"top Markov eigenvalue {w[0]!r} is not 1")
    degenerate = l > 1 and w[1] >= 1.0 - _DEGENERATE_TOL

    phi = v / np.sqrt(markov.sigma)[:, None]
    norms = np.sqrt((phi * phi).mean(axis=0))
    phi = _fix_signs(phi / norms[None, :])

    # The unit eigenpair is known analytically; snap it after validating.
    # A repeated unit eigenvalue leaves the eigenspace basis arbitrary, so
    # the constant-vector check only applies to a simple top eigenvalue.
    if not degenerate:
        const_resid = np.max(np.abs(phi[:, 0] - 1.0))
        if const_resid > 1e-6:
            raise SolverError(
                f"top eigenvector deviates from constant by {const_resid:g}")
        phi[:, 0] = 1.0

    lambdas = w.copy()
    lambdas[0] = 1.0
    if not eps > 0:
        raise ConfigError("eps must be positive")
    with np.errstate(divide="ignore"):
        eta = (1.0 / lambdas - 1.0) / eps
    eta[0] = 0.0

    weights = markov.sigma / markov.sigma.sum()
    return KernelEigenbasis(lambdas, phi, eta, float(eps), weights, degenerate)


def generator_action(phi: np.ndarray, tau: float) -> np.ndarray:
    """Time derivative of sampled functions along the trajectory.

    Second-order central differences inside, second-order one-sided
    differences at both ends; exact on affine sequences.
    """
    if phi.shape[0] < 3:
        raise ConfigError("need at least 3 samples for second-order differences")
    return np.gradient(phi, tau, axis=0, edge_order=2)


def galerkin_matrices(basis: KernelEigenbasis, vaction: np.ndarray, theta: float):
    """Galerkin matrices of the regularized generator on the nontrivial block.

    With phi2_j = phi_j / eta_j and the diagonal diffusion proxy
    Delta phi_j = eta_j phi_j,

        A_ij = <phi_i, V phi2_j> - theta <phi_i, phi_j>
        B_ij = <phi_i, phi_j> / eta_j

    evaluated with empirical inner products for i, j >= 2. The constant
    mode has eta_1 = 0, so it is excluded here and re-inserted after the
    eigensolve as the exact pair (gamma=0, constant eigenfunction).
    """
    if theta < 0:
        raise ConfigError("theta must be >= 0")
    if basis.n_functions < 2:
        raise ConfigError("need at least 2 kernel eigenfunctions")
    eta = basis.eta[1:]
    if np.any(eta <= 0):
        j = int(np.argmax(eta <= 0)) + 2
        raise DegenerateSpectrum(
            f"eta_{j} <= 0 (lambda_{j} = {basis.lambdas[j - 1]!r}); "
            "reduce l or widen the kernel bandwidth")
    ne = basis.n_points
    phi = basis.phi[:, 1:]
    dphi = vaction[:, 1:]
    gram = phi.T @ phi / ne
    A = (phi.T @ dphi / ne) / eta[None, :] - theta * gram
    B = gram / eta[None, :]
    return A, B


def _pair_map(gamma: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Match conjugate eigenvalues; raises if a complex one is unpaired.

    Real pencils put exactly-zero imaginary parts on real eigenvalues and
    exactly conjugate values on complex pairs, so the real test is exact
    and the matching tolerance only guards degraded inputs.
    """
    n = gamma.size
    pair = np.full(n, -1, dtype=int)
    for k in range(n):
        if pair[k] >= 0:
            continue
        if gamma[k].imag == 0.0:
            pair[k] = k
            continue
        target = np.conj(gamma[k])
        free = np.array([j for j in range(n) if pair[j] < 0 and j != k])
        if free.size == 0:
            raise SolverError(f"unpaired complex eigenvalue {gamma[k]!r}")
        j = free[np.argmin(np.abs(gamma[free] - target))]
        if abs(gamma[j] - target) > tol * max(1.0, abs(target)):
            raise SolverError(
                f"conjugate of {gamma[k]!r} missing (closest {gamma[j]!r})")
        pair[k], pair[j] = j, k
    return pair


def galerkin_solve(A: np.ndarray, B: np.ndarray, basis: KernelEigenbasis,
                   lprime: int, tau: float) -> KoopmanBasis:
    """Solve the generalized eigenproblem and assemble the Koopman basis.

    Eigenfunctions are normalized to unit empirical norm, phase-fixed so
    their largest-modulus entry is real positive, sorted by nondecreasing
    Dirichlet energy, and truncated to the largest conjugation-closed set
    of at most ``lprime`` modes (the trivial constant mode included).
    """
    l = basis.n_functions
    if not 1 <= lprime <= l:
        raise ConfigError(f"need 1 <= l' <= l, got l'={lprime}, l={l}")
    if basis.degenerate:
        raise DegenerateSpectrum("repeated unit eigenvalue in the kernel basis")

    try:
        gamma, chat = scipy.linalg.eig(A, B)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"generalized eigensolver failed: {exc}") from exc
    finite = np.isfinite(gamma)
    if np.count_nonzero(finite) < min(lprime - 1, gamma.size):
        raise TruncationError(
            f"only {np.count_nonzero(finite)} finite eigenvalues for l'={lprime}")
    gamma, chat = gamma[finite], chat[:, finite]

    ne = basis.n_points
    phi_nt = basis.phi[:, 1:]
    eta_nt = basis.eta[1:]
    # The pencil's trial functions are phi_j / eta_j, so the eigenvector
    # chat expands the eigenfunction in that weighted basis; divide by eta
    # to express it in the kernel eigenfunctions themselves.
    coeff = chat / eta_nt[:, None]
    psi = phi_nt @ coeff
    dpsi = phi_nt @ (eta_nt[:, None] * coeff)
    norm2 = np.real(np.einsum("nk,nk->k", np.conj(psi), psi)) / ne
    tiny = norm2 <= 1e-300
    if np.any(tiny):
        gamma, coeff = gamma[~tiny], coeff[:, ~tiny]
        psi, dpsi = psi[:, ~tiny], dpsi[:, ~tiny]
        norm2 = norm2[~tiny]
    energies = np.real(np.einsum("nk,nk->k", np.conj(psi), dpsi)) / ne / norm2
    # quadrature on a finite sample can push a near-zero energy slightly
    # negative; the true quantity is nonnegative, so floor noise-level dips
    noise_floor = 1e-7 * (1.0 + float(eta_nt.max()))
    if np.any(energies < -noise_floor):
        worst = float(energies.min())
        raise SolverError(f"Dirichlet energy {worst:g} is negative beyond "
                          f"quadrature noise {noise_floor:g}")
    energies = np.maximum(energies, 0.0)

    # normalize, then phase-fix deterministically
    psi = psi / np.sqrt(norm2)[None, :]
    coeff = coeff / np.sqrt(norm2)[None, :]
    idx = np.argmax(np.abs(psi), axis=0)
    lead = psi[idx, np.arange(psi.shape[1])]
    phase = np.where(np.abs(lead) > 0, lead / np.abs(np.where(lead == 0, 1, lead)), 1.0)
    psi = psi / phase[None, :]
    coeff = coeff / phase[None, :]

    pair = _pair_map(gamma)

    # sort whole conjugate groups by energy; positive frequency first
    groups = []
    seen = np.zeros(gamma.size, dtype=bool)
    for k in range(gamma.size):
        if seen[k]:
            continue
        j = pair[k]
        members = [k] if j == k else sorted((k, j), key=lambda m: -gamma[m].imag)
        seen[list(members)] = True
        groups.append((float(np.mean(energies[members])),
                       float(np.abs(gamma[members[0]].imag)), members))
    groups.sort(key=lambda g: (g[0], g[1]))

    order = []
    budget = lprime - 1  # slot 0 is the re-inserted trivial mode
    for _, _, members in groups:
        if len(members) > budget:
            continue
        order.extend(members)
        budget -= len(members)
        if budget == 0:
            break
    order = np.asarray(order, dtype=int)

    n_out = order.size + 1
    gamma_out = np.concatenate(([0.0 + 0.0j], gamma[order]))
    psi_out = np.concatenate(
        [basis.phi[:, :1].astype(complex), psi[:, order]], axis=1)
    energies_out = np.concatenate(([0.0], energies[order]))
    coeffs = np.zeros((l, n_out), dtype=complex)
    coeffs[0, 0] = 1.0
    coeffs[1:, 1:] = coeff[:, order]

    remap = {int(old): new + 1 for new, old in enumerate(order)}
    pair_out = np.zeros(n_out, dtype=int)
    for new, old in enumerate(order):
        pair_out[new + 1] = remap[int(pair[old])]

    omega = np.imag(gamma_out).copy()
    omega[0] = 0.0
    result = KoopmanBasis(gamma_out, omega, psi_out, energies_out, coeffs,
                          pair_out, basis, float(tau))
    _validate_basis(result)
    return result


def _validate_basis(basis: KoopmanBasis):
    """Cheap invariants checked on every solve."""
    e = basis.energies
    if e[0] > _UNIT_EIG_TOL or abs(basis.omega[0]) > 0:
        raise SolverError("trivial mode must have zero energy and frequency")
    if np.any(np.diff(e) < -1e-9 * max(1.0, np.abs(e).max())):
        raise SolverError("Dirichlet energies are not nondecreasing")
    for k in range(basis.n_modes):
        j = basis.pair[k]
        if j != k:
            if abs(basis.gamma[j] - np.conj(basis.gamma[k])) > 1e-6 * max(1.0, abs(basis.gamma[k])):
                raise SolverError(f"modes {k},{j} are not conjugate")
            if abs(e[j] - e[k]) > 1e-6 * max(1.0, abs(e[k])):
                raise SolverError(f"paired modes {k},{j} have unequal energies")


@dataclass(frozen=True)
class NystromContext:
    """Everything needed to evaluate eigenfunctions off-sample."""

    landmarks: np.ndarray      # (N_e, Q*d) embedded training points
    q_delays: int
    graph: DelayGraph
    config: DelayConfig
    markov: MarkovMatrix

    def kernel_row(self, x_new: np.ndarray) -> np.ndarray:
        """Markov-normalized kernel row of a new embedded point.

        The new point's density comes from its knn nearest landmarks; a
        single exact-zero distance (the point sits on a landmark) plays
        the self-pair role and is excluded from the density mean, which
        reproduces the in-sample convention at landmarks.
        """
        x_new = np.asarray(x_new, float).ravel()
        if x_new.size != self.landmarks.shape[1]:
            raise HistoryError(
                f"embedded point has length {x_new.size}, "
                f"expected Q*d = {self.landmarks.shape[1]}")
        d2 = point_delay_distances(self.landmarks, self.q_delays, x_new)

        knn = self.config.knn
        d2_sorted = np.sort(d2)
        density_pool = d2_sorted[1:] if d2_sorted[0] == 0.0 else d2_sorted
        if density_pool.size < knn:
            raise HistoryError("not enough landmarks for the density estimate")
        mean = density_pool[:knn].mean()
        positive = self.graph.rho[self.graph.rho > 0]
        rho_new = 1.0 / max(mean, (1.0 / positive.max()) * 1e-12 if positive.size else 1e-12)

        kth = d2_sorted[min(knn, d2.size - 1)] if d2_sorted[0] == 0.0 else d2_sorted[knn - 1]
        retained = d2 <= kth
        eps_global = self.graph.eps0 * self.config.epsilon_scale
        if self.config.bandwidth_mode == "variable":
            expo = d2 * (rho_new ** self.config.alpha) \
                * (self.graph.rho ** self.config.alpha) / eps_global
        else:
            expo = d2 / eps_global
        kvals = np.where(retained, np.exp(-expo), 0.0)
        weighted = kvals / np.sqrt(self.markov.q)
        total = weighted.sum()
        if not total > 0 or not np.isfinite(total):
            raise IllConditioned(-1, "kernel row underflowed at the new point")
        return weighted / total


def nystrom_extend(basis, context: NystromContext, x_new: np.ndarray) -> np.ndarray:
    """Evaluate eigenfunctions at a point outside the training sample.

    For a :class:`KernelEigenbasis` this applies the integral-equation
    extension ``phi_i(x) = (1/lambda_i) sum_j p(x, x_j) phi_i(x_j)``; for a
    :class:`KoopmanBasis` the extended kernel eigenfunctions are combined
    with the stored expansion coefficients.
    """
    if isinstance(basis, KoopmanBasis):
        kb = basis.kernel_basis
        phi_new = nystrom_extend(kb, context, x_new)
        return basis.coeffs.T @ phi_new.astype(complex)
    kb: KernelEigenbasis = basis
    small = np.abs(kb.lambdas) <= _MIN_EXTEND_EIG
    if np.any(small):
        raise IllConditioned(int(np.argmax(small)))
    row = context.kernel_row(x_new)
    return (row @ kb.phi) / kb.lambdas


def coherence_diagnostic(psi: np.ndarray, omega: float, tau: float,
                         horizon: int) -> float:
    """Worst relative deviation of a mode from pure phase evolution.

    For t = 1..horizon, compares the time-shifted samples with the phase
    prediction ``exp(i omega t tau) psi`` over the overlapping window and
    returns the largest relative residual. Exact eigenfunctions of the
    shift give zero.
    """
    psi = np.asarray(psi)
    ne = psi.shape[0]
    if not 1 <= horizon < ne:
        raise ConfigError(f"need 1 <= horizon < N_e, got {horizon}")
    worst = 0.0
    for t in range(1, horizon + 1):
        lead, lag = psi[t:], psi[:-t]
        num = np.sqrt(np.mean(np.abs(lead - np.exp(1j * omega * t * tau) * lag) ** 2))
        den = np.sqrt(np.mean(np.abs(lag) ** 2))
        if den > 0:
            worst = max(worst, float(num / den))
    return worst
