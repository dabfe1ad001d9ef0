"""
Random-matrix estimates of (τ, τ′): GUE samples plus deterministic
finite-rank diagonals, and normalized traces of test functions of them.

τ_N(P) = E[(1/N)·Tr P(X_N)] is estimated by a Monte Carlo mean over trials.
τ′ is estimated as N·(τ_N − τ), given the limit τ.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Callable, Iterator, Sequence, Union

import numpy as np

from .errors import MissingReferenceError, SizeCapError, ValidationError
from .measures import InfLaw
from .subord import free_convolve_G


__all__ = [
    'MAX_ENSEMBLE_SIZE', 'EnsembleSpec', 'TauEstimate', 'sample', 'iter_samples', 'eigenvalues',
    'power_test', 'resolvent_test', 'estimate_tau', 'estimate_inf_tau', 'estimate_inf_taus',
    'spike_law', 'limit_laws', 'predict', 'null_bias_constant', 'null_bias_constants',
    'convergence_slope',
]

log = logging.getLogger(__name__)

MAX_ENSEMBLE_SIZE = 4096

Test = Callable[[np.ndarray], complex]


@dataclasses.dataclass(frozen=True)
class EnsembleSpec:
    """
    X = G + D with G from the GUE normalized so that E[(1/N)Tr G²] = variance
    (omitted for kind 'deterministic') and D = diag(diagonal, 0, …, 0).
    """
    N: int
    kind: str = 'gue'
    variance: float = 1.0
    diagonal: tuple[float, ...] = ()
    seed: int = 0
    trials: int = 1

    def __post_init__(self):
        if not 1 <= self.N <= MAX_ENSEMBLE_SIZE:
            raise SizeCapError(f'matrix size must be in 1..{MAX_ENSEMBLE_SIZE} ({self.N})')
        if self.kind not in ('gue', 'deterministic'):
            raise ValidationError(f'unknown ensemble kind {self.kind!r}')
        if self.trials < 1:
            raise ValidationError(f'trial count must be positive ({self.trials})')
        if self.variance < 0:
            raise ValidationError(f'variance must be non-negative ({self.variance})')
        if len(self.diagonal) > self.N:
            raise ValidationError(f'{len(self.diagonal)} diagonal entries do not fit in size {self.N}')
        object.__setattr__(self, 'diagonal', tuple(float(v) for v in self.diagonal))

    def resized(self, N: int) -> EnsembleSpec:
        return dataclasses.replace(self, N=N)

    def rng(self, trial: int) -> np.random.Generator:
        # one stream per (seed, trial) so any subset of trials reproduces
        return np.random.default_rng([self.seed, trial])

    def matrix(self, trial: int = 0) -> np.ndarray:
        N = self.N
        if self.kind == 'gue':
            rng = self.rng(trial)
            H = np.empty((N, N), dtype=complex)
            H.real = rng.standard_normal((N, N))
            H.imag = rng.standard_normal((N, N))
            H = (H + H.conj().T) * (np.sqrt(self.variance / N) / 2)
        else:
            H = np.zeros((N, N), dtype=complex)
        H[np.arange(len(self.diagonal)), np.arange(len(self.diagonal))] += self.diagonal
        return H


@dataclasses.dataclass(frozen=True)
class TauEstimate:
    value: complex
    std_error: float
    N: int
    trials: int

    def sigma_distance(self, target: complex) -> float:
        """|value − target| in standard errors."""
        gap = abs(self.value - target)
        if self.std_error == 0:
            return 0.0 if gap == 0 else float('inf')
        return gap / self.std_error


def iter_samples(spec: EnsembleSpec) -> Iterator[np.ndarray]:
    for trial in range(spec.trials):
        yield spec.matrix(trial)


def sample(spec: EnsembleSpec) -> list[np.ndarray]:
    return list(iter_samples(spec))


def eigenvalues(spec: EnsembleSpec) -> np.ndarray:
    """Eigenvalues of every trial, one row per trial."""
    return np.array([np.linalg.eigvalsh(m) for m in iter_samples(spec)])


def power_test(k: int) -> Test:
    """(1/N)Tr Xᵏ."""
    return lambda eigs: complex(np.mean(eigs ** k))


def resolvent_test(z: complex) -> Test:
    """(1/N)Tr (z − X)⁻¹."""
    if z.imag == 0:
        raise ValidationError(f'resolvent needs a non-real point ({z})')
    return lambda eigs: complex(np.mean(1 / (z - eigs)))


def _estimate(spec: EnsembleSpec, values: Sequence[complex]) -> TauEstimate:
    values = np.asarray(values, dtype=complex)
    if len(values) > 1:
        spread = np.sqrt(np.var(values.real, ddof=1) + np.var(values.imag, ddof=1))
        std_error = float(spread / np.sqrt(len(values)))
    else:
        std_error = 0.0
    return TauEstimate(complex(values.mean()), std_error, spec.N, spec.trials)


def _trial_values(spec: EnsembleSpec, test: Test) -> list[complex]:
    values = []
    for trial, matrix in enumerate(iter_samples(spec)):
        values.append(test(np.linalg.eigvalsh(matrix)))
        log.debug('trial %d/%d of N = %d done', trial + 1, spec.trials, spec.N)
    return values


def estimate_tau(spec: EnsembleSpec, test: Union[Test, int], z: complex = None) -> TauEstimate:
    """
    Monte Carlo mean of (1/N)Tr(test). An integer test k means Xᵏ; with @z the
    resolvent at z is used instead of @test.
    """
    if z is not None:
        test = resolvent_test(z)
    elif isinstance(test, int):
        test = power_test(test)
    estimate = _estimate(spec, _trial_values(spec, test))
    log.info('τ_N estimate at N = %d over %d trials: %s ± %.3g', spec.N, spec.trials, estimate.value, estimate.std_error)
    return estimate


def estimate_inf_taus(spec: EnsembleSpec, points: Sequence[complex],
                      reference_G: Union[complex, Callable[[complex], complex], Sequence[complex]] = None) -> list[TauEstimate]:
    """
    ĝ(z) = N·(τ̂_N((z − X)⁻¹) − G(z)) at every point, where G is the limit
    Cauchy transform. Each trial is diagonalized once for all points.
    """
    if reference_G is None:
        raise MissingReferenceError('ĝ needs the limiting Cauchy transform as a reference')
    points = [complex(z) for z in points]
    if callable(reference_G):
        references = [reference_G(z) for z in points]
    else:
        references = list(np.broadcast_to(np.asarray(reference_G, dtype=complex), (len(points),)))
    tests = [resolvent_test(z) for z in points]
    values = [[] for _ in points]
    for trial, matrix in enumerate(iter_samples(spec)):
        eigs = np.linalg.eigvalsh(matrix)
        for row, test, G in zip(values, tests, references):
            row.append(spec.N * (test(eigs) - G))
        log.debug('trial %d/%d of N = %d done', trial + 1, spec.trials, spec.N)
    estimates = [_estimate(spec, row) for row in values]
    for z, estimate in zip(points, estimates):
        log.info('ĝ(%s) at N = %d over %d trials: %s ± %.3g', z, spec.N, spec.trials, estimate.value, estimate.std_error)
    return estimates


def estimate_inf_tau(spec: EnsembleSpec, z: complex, reference_G: Union[complex, Callable[[complex], complex]] = None) -> TauEstimate:
    """ĝ(z) = N·(τ̂_N((z − X)⁻¹) − G(z)), where G is the limit Cauchy transform."""
    return estimate_inf_taus(spec, [z], reference_G)[0]


def spike_law(diagonal: Sequence[float]) -> InfLaw:
    """
    The limit (μ, μ′) of diag(θ₁, …, θ_r, 0, …, 0): μ = δ₀ and
    μ′ = ∑ᵢ δ_θᵢ − r·δ₀.
    """
    weights: dict[float, float] = {0.0: 0.0}
    for theta in diagonal:
        weights[float(theta)] = weights.get(float(theta), 0.0) + 1
        weights[0.0] -= 1
    return InfLaw.atomic([(x, 1.0 if x == 0 else 0.0, w) for x, w in sorted(weights.items())])


def limit_laws(spec: EnsembleSpec) -> tuple[InfLaw, InfLaw]:
    """The two infinitesimally free summands of the ensemble."""
    noise = InfLaw.semicircle(0.0, spec.variance if spec.kind == 'gue' else 0.0)
    return noise, spike_law(spec.diagonal)


def predict(spec: EnsembleSpec, z: complex) -> tuple[complex, complex]:
    """(G, g) of the limit at z, by subordination."""
    noise, spike = limit_laws(spec)
    point = free_convolve_G(noise, spike, z, infinitesimal=True)
    return point.G, point.g


def null_bias_constants(points: Sequence[complex], sizes: Sequence[int], trials: int, variance: float = 1.0,
                        seed: int = 0) -> list[float]:
    """
    C per point such that |ĝ| ≤ C/N on the pure GUE, whose τ′ vanishes.
    Calibrated as the largest N·|ĝ_N| over @sizes.
    """
    law = InfLaw.semicircle(0.0, variance)
    worst = [0.0] * len(points)
    for N in sizes:
        spec = EnsembleSpec(N, 'gue', variance, seed=seed, trials=trials)
        estimates = estimate_inf_taus(spec, points, lambda z: law.cauchy(z).std)
        worst = [max(w, N * abs(e.value)) for w, e in zip(worst, estimates)]
    return worst


def null_bias_constant(z: complex, sizes: Sequence[int], trials: int, variance: float = 1.0, seed: int = 0) -> float:
    return null_bias_constants([z], sizes, trials, variance, seed)[0]


def convergence_slope(sizes: Sequence[int], residuals: Sequence[float]) -> float:
    """Least-squares slope of log|residual| against log N."""
    if len(sizes) != len(residuals) or len(sizes) < 2:
        raise ValidationError(f'need at least two (N, residual) pairs ({len(sizes)}, {len(residuals)})')
    slope, _ = np.polyfit(np.log(np.asarray(sizes, dtype=float)), np.log(np.abs(np.asarray(residuals))), 1)
    return float(slope)
