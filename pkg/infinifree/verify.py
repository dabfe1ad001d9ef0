"""
The acceptance suite behind `infinifree verify-all`. Each check computes one
quantity two independent ways and reports the largest disagreement against a
threshold.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import time
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .cumulants import (
    FreeProductOracle, FunctionOracle, ScalarCumulants, cumulants_from_moments, free_cumulant,
    freeness_check, joint_from_free_cumulants, moments_from_cumulants, tilde_cumulant,
    tilde_cumulant_blockwise,
)
from .dual import Dual, DualScalar, TildeExpectation
from .errors import InfinifreeError
from .measures import InfLaw, laurent_coefficients
from .ncpart import enumerate_nc, mobius_to_one, one
from .ovspace import lift_law, lift_scalar_matrix
from .rmt import EnsembleSpec, estimate_inf_taus, null_bias_constants, predict
from .subord import (
    embedded_inf_convolve, free_convolve_G, ov_inf_convolve, path_derivative_convolution,
    path_from_inf_law, scalar_inf_convolve, solve_subordination,
)


__all__ = ['CheckResult', 'CHECKS', 'run_all', 'format_table']

log = logging.getLogger(__name__)


@dataclasses.dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    seconds: float
    error: str = ''

    @property
    def passed(self) -> bool:
        return not self.error and bool(self.value <= self.threshold)


CHECKS: list[tuple[str, float, Callable[[bool], float]]] = []


def check(name: str, threshold: float):
    def register(fn):
        CHECKS.append((name, threshold, fn))
        return fn
    return register


@functools.lru_cache(maxsize=None)
def _mobius_recursive(p) -> int:
    # μ(1,1) = 1 and μ(π,1) = −∑_{π<σ≤1} μ(σ,1)
    top = one(p.n)
    if p == top:
        return 1
    return -sum(_mobius_recursive(q) for q in enumerate_nc(p.n) if p.refines(q) and q != p)


def _spike_family(theta: float, label: str, order: int) -> ScalarCumulants:
    # (δ₀, δ_θ − δ₀): κₙ = 0, κ′ₙ = θⁿ
    return ScalarCumulants.single(label, [0] * order, [theta ** n for n in range(1, order + 1)])


def _semicircle_family(label: str, order: int, variance: float = 1.0) -> ScalarCumulants:
    return ScalarCumulants.single(label, [0, variance] + [0] * (order - 2))


@check('mobius product formula vs chain recursion, n <= 7 (8 with --full)', 0)
def mobius(full: bool) -> float:
    worst = 0
    for n in range(1, 9 if full else 8):
        for p in enumerate_nc(n):
            worst = max(worst, abs(mobius_to_one(p) - _mobius_recursive(p)))
    return worst


@check('moment/cumulant round trip, order <= 8', 1e-10)
def round_trip(full: bool) -> float:
    rng = np.random.default_rng(11)
    atoms = [(x, w, v) for x, w, v in zip(rng.uniform(-1, 1, 3), rng.dirichlet(np.ones(3)), rng.normal(size=3))]
    atoms = [(x, w, v - np.mean([a[2] for a in atoms])) for x, w, v in atoms]
    law = InfLaw.atomic(atoms, 8)
    table = cumulants_from_moments(law.oracle('x'), 'x', 8)
    worst = 0.0
    for n in range(1, 9):
        m, mp = moments_from_cumulants(table, 'x' * n)
        worst = max(worst, abs(m[0, 0] - law.std_moments[n]), abs(mp[0, 0] - law.inf_moments[n]))
    return worst


def _free_pair(order: int):
    return joint_from_free_cumulants([_semicircle_family('s', order), _spike_family(1.5, 'p', order)])


@check('infinitesimal freeness of cumulant-built pair, n <= 6', 1e-10)
def embedded_freeness(full: bool) -> float:
    report = freeness_check(_free_pair(8), {'s': 0, 'p': 1}, n_max=6, mixed_order=6 if full else 4)
    return report.max_violation


@check('planted defect eps=1e-3 detected in [1e-4, 1e-2]', 0)
def planted_defect(full: bool) -> float:
    base = _free_pair(8)
    eps = 1e-3

    def std(word, coeffs):
        value = base.expect(word, coeffs)
        if sorted(word) == ['p', 's']:
            value = value + eps * np.prod([c[0, 0] for c in coeffs])
        return value

    def inf(word, coeffs):
        return base.inf_expect(word, coeffs)

    report = freeness_check(FunctionOracle(1, std, inf), {'s': 0, 'p': 1}, n_max=4, mixed_order=3)
    ok = 1e-4 <= report.definitional_violation <= 1e-2 and 1e-4 <= report.embedded_violation <= 1e-2
    return 0 if ok else 1


@check('embedded cumulant vs block formula, n <= 4 (5 with --full)', 1e-11)
def block_formula(full: bool) -> float:
    o = _free_pair(8)
    te = TildeExpectation.from_oracle(o)
    rng = np.random.default_rng(3)
    worst = 0.0
    for n in range(1, 6 if full else 5):
        A = []
        for _ in range(n):
            a = rng.normal() * o.letter('s') + rng.normal() * o.letter('p') @ o.letter('s')
            A.append(Dual(a, rng.normal() * o.letter('p')))
        lhs = tilde_cumulant(te, A)
        rhs = tilde_cumulant_blockwise(o, A)
        worst = max(worst, np.abs(lhs.std - rhs.std).max(), np.abs(lhs.inf - rhs.inf).max())
    return worst


@check('definitional freeness implies vanishing mixed cumulants, order <= 5', 1e-9)
def free_product_cumulants(full: bool) -> float:
    sc = InfLaw.semicircle(0.3, 1.0, 12)
    spike = InfLaw.atomic([(0, 0.5, -0.2), (1, 0.5, 0.2)], 12)
    o = FreeProductOracle({'a': (sc.std_moments, sc.inf_moments), 'b': (spike.std_moments, spike.inf_moments)})
    report = freeness_check(o, {'a': 0, 'b': 1}, n_max=6, mixed_order=6 if full else 5)
    return report.max_violation


@check('lifted matrix cumulants equal summed scalar cumulants, N <= 3, n <= 4', 1e-9)
def lift_cumulants(full: bool) -> float:
    scalar = _free_pair(8)
    worst = 0.0
    for N in (2, 3):
        entries = {'A': [['s' if (i + j) % 2 == 0 else 'p' for j in range(N)] for i in range(N)]}
        law = lift_scalar_matrix(scalar, entries, N)
        for n in range(1, 5):
            k, dk = free_cumulant(law.oracle, ['A'] * n)
            for i in range(N):
                for j in range(N):
                    expected = np.zeros(2, dtype=complex)
                    for path in np.ndindex(*(N,) * (n - 1)):
                        idx = (i,) + path + (j,)
                        word = [entries['A'][idx[m]][idx[m + 1]] for m in range(n)]
                        std, inf = free_cumulant(scalar, word)
                        expected += (std[0, 0], inf[0, 0])
                    worst = max(worst, abs(k[i, j] - expected[0]), abs(dk[i, j] - expected[1]))
    return worst


@check('subordination residuals on Im z in [0.5, 5]', 1e-11)
def subordination_residuals(full: bool) -> float:
    pairs = [
        (InfLaw.semicircle(), InfLaw.semicircle()),
        (InfLaw.semicircle(), InfLaw.atomic([(-1, 0.5, 0), (1, 0.5, 0)])),
        (InfLaw.atomic([(0, 0.3, 0), (2, 0.7, 0)]), InfLaw.atomic([(-1, 0.6, 0), (1, 0.4, 0)])),
    ]
    worst = 0.0
    for x, y in pairs:
        for im in np.linspace(0.5, 5, 20):
            result = solve_subordination(x, y, complex(0.3, im))
            worst = max(worst, result.residual_F, result.residual_G)
    return worst


@check('semicircle + semicircle equals variance-2 semicircle', 1e-10)
def semicircle_sum(full: bool) -> float:
    x = InfLaw.semicircle()
    target = InfLaw.semicircle(0, 2)
    return max(abs(free_convolve_G(x, x, z).G - target.cauchy(z).std) for z in (2j, 1 + 1j, -0.5 + 0.7j))


def _stieltjes(density: Callable[[float], float], a: float, b: float, z: complex) -> complex:
    re = quad(lambda x: (density(x) / (z - x)).real, a, b, epsabs=1e-13, limit=200)[0]
    im = quad(lambda x: (density(x) / (z - x)).imag, a, b, epsabs=1e-13, limit=200)[0]
    return complex(re, im)


@check('semicircle closed form and continued fraction vs Stieltjes quadrature', 1e-9)
def stieltjes_quadrature(full: bool) -> float:
    mean, variance = 0.5, 2.0
    r = 2 * np.sqrt(variance)
    law = InfLaw.semicircle(mean, variance, 12)
    table = InfLaw.from_moments(law.std_moments)

    def density(x):
        return np.sqrt(max(r * r - (x - mean) ** 2, 0.0)) / (2 * np.pi * variance)

    worst = 0.0
    points = np.linspace(-3, 4, 15 if full else 5) + 0.5j
    for z in points:
        reference = _stieltjes(density, mean - r, mean + r, z)
        worst = max(worst, abs(law.cauchy(z).std - reference), abs(table.cauchy(z).std - reference))
    return worst


@check('Laurent coefficients of g match added infinitesimal cumulants, k <= 6', 1e-6)
def cumulant_additivity(full: bool) -> float:
    x = InfLaw.semicircle(0, 1)
    y = InfLaw.atomic([(0, 1, -1), (2, 0, 1)])
    family = _semicircle_family('x', 7) + _spike_family(2, 'x', 7)
    coefficients = laurent_coefficients(lambda z: scalar_inf_convolve(x, y, z), 8.0, 6)
    return max(abs(coefficients[k] - moments_from_cumulants(family, 'x' * k)[1][0, 0]) for k in range(1, 7))


@check('operator-valued formula: d=1 reduction, lifted diagonal, embedded route', 1e-8)
def ov_routes(full: bool) -> float:
    x = InfLaw.semicircle(0, 1)
    y = InfLaw.atomic([(0, 1, -1), (2, 0, 1)])
    z = 3j
    scalar = scalar_inf_convolve(x, y, z)
    d1 = ov_inf_convolve(lift_law(x, 1), lift_law(y, 1), z * np.eye(1))[0, 0]
    d2 = ov_inf_convolve(lift_law(x, 2), lift_law(y, 2), z * np.eye(2))
    embedded = embedded_inf_convolve(x, y, z)
    return max(abs(d1 - scalar), np.abs(d2 - scalar * np.eye(2)).max(), abs(embedded - scalar))


@check('path derivative at t=0 vs operator-valued formula and finite differences', 1e-6)
def path_routes(full: bool) -> float:
    mu = path_from_inf_law(InfLaw.semicircle(0, 1), 1)
    # weights stay positive on [-h, h]
    nu = path_from_inf_law(InfLaw.atomic([(0, 0.5, -1), (2, 0.5, 1)]), 1)
    b = 2j * np.eye(1)
    route = path_derivative_convolution(mu, nu, 0.0, b)
    direct = ov_inf_convolve(mu.law(0.0), nu.law(0.0), b)
    h = 1e-4
    plus = free_convolve_G(mu.law(h), nu.law(h), b).G
    minus = free_convolve_G(mu.law(-h), nu.law(-h), b).G
    fd = (plus - minus) / (2 * h)
    return max(np.abs(route - direct).max(), np.abs(route - fd).max())


@check('dual-carried G′ and ω′ vs central differences', 1e-7)
def derivative_honesty(full: bool) -> float:
    rng = np.random.default_rng(5)
    x = InfLaw.semicircle(0, 1)
    y = InfLaw.atomic([(-1, 0.5, 0), (1, 0.5, 0)])
    worst = 0.0
    h = 1e-5
    for _ in range(50 if full else 10):
        z = complex(rng.uniform(-2, 2), rng.uniform(1, 3))
        dG = x.cauchy(DualScalar(z, 1)).inf
        fd = (x.cauchy(z + h).std - x.cauchy(z - h).std) / (2 * h)
        omega = solve_subordination(x, y, DualScalar(z, 1)).omega1.inf
        fd_omega = (solve_subordination(x, y, z + h).omega1.std - solve_subordination(x, y, z - h).omega1.std) / (2 * h)
        worst = max(worst, abs(dG - fd), abs(omega - fd_omega))
    return worst


@check('GUE + spike matches the predicted g within 3 std errors + C/N at z = 2i, 3i, 1+2i', 0)
def rmt_spike(full: bool) -> float:
    N, trials = (1024, 200) if full else (128, 40)
    points = [2j, 3j, 1 + 2j]
    spiked = EnsembleSpec(N, 'gue', 1.0, (2.0,), seed=7, trials=trials)
    predictions = [predict(spiked, z) for z in points]
    estimates = estimate_inf_taus(spiked, points, [G for G, _ in predictions])
    constants = null_bias_constants(points, [N], trials, seed=8)
    excess = 0.0
    for (_, g), estimate, C in zip(predictions, estimates, constants):
        excess = max(excess, abs(estimate.value - g) - (3 * estimate.std_error + C / N))
    return excess


def run_all(full: bool = False) -> list[CheckResult]:
    results = []
    for name, threshold, fn in CHECKS:
        start = time.perf_counter()
        try:
            value, error = float(fn(full)), ''
        except InfinifreeError as e:
            value, error = float('inf'), f'{type(e).__name__}: {e}'
            log.warning('%s failed: %s', name, error)
        results.append(CheckResult(name, value, threshold, time.perf_counter() - start, error))
        log.info('%s: %.3g (threshold %.3g)', name, value, threshold)
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f'{"check":<{width}}  result  value       threshold  seconds']
    for r in results:
        lines.append(f'{r.name:<{width}}  {"PASS" if r.passed else "FAIL":<6}  {r.value:<10.3g}  {r.threshold:<9.3g}  {r.seconds:.2f}')
        if r.error:
            lines.append(f'  {r.error}')
    return '\n'.join(lines)
