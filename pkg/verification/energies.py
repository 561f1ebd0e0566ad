"""
Energy integrands, quadrature over closed catalog surfaces, coefficient
reduction, Q-curvature and the Gauss-Bonnet check.

Every preset is a linear combination of :class:`~verification.shape.InvariantVector`
fields, so one pass over the grid can integrate any number of presets.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .catalog import chart_sample_plan, mobius_apply
from .exceptions import ConfigError, InsufficientOrder
from .jets import batch_size, jet_einsum
from .shape import curvature_at, invariants_at, shape_at
from .tensors import divergence_upper

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 2048
DEFAULT_GRID = 32
SPHERE_VOLUME = 8.0 * math.pi ** 2 / 3.0
GAUSS_BONNET_FACTOR = 8.0 * math.pi ** 2

COEFFICIENT_FIELDS = ('grad_h_sq', 'grad_H_sq', 'tr_h4', 'h_4', 'H_tr_h3', 'H2_h2', 'H4')
REDUCED_FIELDS = ('grad_H_sq', 'h0_4', 'tr_h04', 'det_h', 'H2_h2', 'H4')


@dataclass(frozen=True)
class CoefficientVector:
    """a1..a7 for |grad h|^2, |grad H|^2, Tr h^4, |h|^4, H Tr h^3, H^2|h|^2, H^4."""

    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0
    a5: float = 0.0
    a6: float = 0.0
    a7: float = 0.0

    @classmethod
    def from_sequence(cls, values):
        values = [float(v) for v in values]
        if len(values) != 7:
            raise ConfigError(f"Expected 7 coefficients, got {len(values)}")
        return cls(*values)

    def as_array(self):
        return np.array([self.a1, self.a2, self.a3, self.a4, self.a5, self.a6, self.a7])

    def weights(self):
        return {name: value for name, value in zip(COEFFICIENT_FIELDS, self.as_array()) if value != 0.0}


@dataclass(frozen=True)
class ReducedCoefficients:
    alpha: float = 0.0
    mu: float = 0.0
    lam: float = 0.0
    sigma: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0

    def as_array(self):
        return np.array([self.alpha, self.mu, self.lam, self.sigma, self.beta, self.gamma])

    def weights(self):
        return {name: value for name, value in zip(REDUCED_FIELDS, self.as_array()) if value != 0.0}

    def is_conformal(self, tolerance=1e-12):
        """(alpha, beta, gamma) proportional to (1, -1, 7), with any real factor."""
        k = self.alpha
        return (abs(self.beta + k) <= tolerance * max(1.0, abs(k))
                and abs(self.gamma - 7.0 * k) <= tolerance * max(1.0, abs(k)))


# Rows: alpha, mu, lambda, sigma, beta, gamma.  Columns: a1..a7.
# Tr h^4, |h|^4 and H Tr h^3 are rewritten exactly in terms of h0 and H;
# |grad h|^2 uses the integrated identity  |grad h|^2 = 16|grad H|^2 + |h|^4 - 4 H Tr h^3.
REDUCTION_MATRIX = np.array([
    [16.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.5, 0.0, -1.5, 1.0, -0.375, 0.0, 0.0],
    [-3.0, 0.0, 4.0, 0.0, 0.75, 0.0, 0.0],
    [-12.0, 0.0, 12.0, 0.0, 3.0, 0.0, 0.0],
    [-10.0, 0.0, 12.0, 8.0, 4.5, 1.0, 0.0],
    [52.0, 0.0, -56.0, -16.0, -17.0, 0.0, 1.0],
])


def reduce_coefficients(a):
    """Rewrite a seven-term integrand as alpha|grad H|^2 + E_{mu,lambda,sigma} + beta H^2|h|^2 + gamma H^4."""
    return ReducedCoefficients(*(REDUCTION_MATRIX @ a.as_array()))


@dataclass(frozen=True)
class EnergyPreset:
    """A named linear combination of pointwise invariants."""

    name: str
    weights: dict = field(default_factory=dict)

    @property
    def order(self):
        return 4 if 'Q' in self.weights else 3

    def density(self, invariants):
        total = 0.0
        for key, weight in self.weights.items():
            total = total + weight * invariants[key]
        return np.asarray(total, dtype=float) * np.ones_like(invariants.H4)

    def __add__(self, other):
        weights = dict(self.weights)
        for key, value in other.weights.items():
            weights[key] = weights.get(key, 0.0) + value
        return EnergyPreset(f"{self.name}+{other.name}", weights)

    def scaled(self, factor):
        return EnergyPreset(f"{factor:g}*{self.name}", {k: factor * v for k, v in self.weights.items()})

    def reduced(self):
        """Reduced coefficients; |W|^2 is folded in through 7/3|h0|^4 - 4 Tr h0^4."""
        if 'Q' in self.weights or 'ric2' in self.weights or 'R' in self.weights:
            raise ValueError(f"{self.name} has no reduced form")
        a = CoefficientVector(*(self.weights.get(name, 0.0) for name in COEFFICIENT_FIELDS))
        reduced = reduce_coefficients(a)
        w2 = self.weights.get('W2', 0.0)
        return ReducedCoefficients(
            alpha=reduced.alpha,
            mu=reduced.mu + self.weights.get('h0_4', 0.0) + 7.0 / 3.0 * w2,
            lam=reduced.lam + self.weights.get('tr_h04', 0.0) - 4.0 * w2,
            sigma=reduced.sigma + self.weights.get('det_h', 0.0),
            beta=reduced.beta,
            gamma=reduced.gamma,
        )


def e_mu_lambda_sigma(mu, lam, sigma):
    return EnergyPreset(f"E3:{mu:g},{lam:g},{sigma:g}", {'h0_4': mu, 'tr_h04': lam, 'det_h': sigma})


def generic(a):
    a = a if isinstance(a, CoefficientVector) else CoefficientVector.from_sequence(a)
    return EnergyPreset('generic:' + ','.join(f"{x:g}" for x in a.as_array()), a.weights())


EA = EnergyPreset('EA', {'grad_H_sq': 1.0, 'H2_h2': -1.0, 'H4': -7.0})
EA_RECONCILED = EnergyPreset('EA_reconciled', {'grad_H_sq': 1.0, 'H2_h2': -1.0, 'H4': 7.0})
EC = EnergyPreset('EC', {'grad_h_sq': 1.0, 'H2_h2': -6.0, 'H4': 60.0})
EB = EnergyPreset('EB', {'W2': 0.5})
EB_PRINTED = EnergyPreset('EB_printed', {
    'grad_h_sq': 1.0 / 3.0, 'grad_H_sq': -16.0 / 3.0, 'H2_h2': 10.0 / 3.0, 'H4': -52.0 / 3.0,
    'h0_4': -1.5, 'det_h': 1.0,
})
EB_RECONCILED = EnergyPreset('EB_reconciled', {
    'grad_h_sq': 1.0 / 3.0, 'grad_H_sq': -16.0 / 3.0, 'H2_h2': 10.0 / 3.0, 'H4': -52.0 / 3.0,
    'h0_4': 1.0 / 3.0, 'tr_h04': -1.0, 'det_h': 4.0,
})
W2 = EnergyPreset('W2', {'W2': 1.0})
Q_TOTAL = EnergyPreset('Q', {'Q': 1.0})
EWM = EnergyPreset('EWm', (EA_RECONCILED.scaled(6.0) + e_mu_lambda_sigma(11.0 / 6.0, -2.5, -18.0)).weights)

PRESETS = {p.name: p for p in (EA, EA_RECONCILED, EB, EB_PRINTED, EB_RECONCILED, EC, W2, Q_TOTAL, EWM)}


def get_preset(name):
    """Resolve a CLI preset identifier such as ``EC``, ``E3:1,0,0`` or ``generic:1,0,0,0,0,0,0``."""
    if name in PRESETS:
        return PRESETS[name]
    head, _, tail = name.partition(':')
    try:
        numbers = [float(x) for x in tail.split(',')] if tail else []
    except ValueError:
        raise ConfigError(f"Malformed coefficients in preset {name!r}")
    if head == 'E3':
        if len(numbers) != 3:
            raise ConfigError(f"E3 needs mu,lambda,sigma, got {tail!r}")
        return e_mu_lambda_sigma(*numbers)
    if head == 'generic':
        return generic(numbers)
    raise ConfigError(f"Unknown energy preset {name!r}; choose one of {sorted(PRESETS)}, E3:..., generic:...")


# quadrature


class IntegralResult(NamedTuple):
    value: float
    error: float
    grid: int
    coarse: float

    @property
    def relative_error(self):
        return self.error / max(1.0, abs(self.value))


def pairwise_sum(parts):
    """Tree reduction over a list of equally shaped arrays in a fixed order."""
    parts = list(parts)
    if not parts:
        return 0.0
    while len(parts) > 1:
        merged = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def integrate_fields(spec, n, evaluate, order=3, chunk_size=DEFAULT_CHUNK_SIZE, flip=False):
    """Integrate the (..., k) array ``evaluate(shape_tensors)`` against the area element."""
    spec.require_closed()
    plan = chart_sample_plan(spec, n)
    centroid = spec.centroid()
    size = batch_size(chunk_size, order)
    partials = []
    for points, weights in plan.chunks(size):
        s = shape_at(spec.evaluate(points, order), centroid, flip)
        density = np.asarray(evaluate(s))
        area = weights * s.frame.sqrt_det_g.value
        partials.append(np.einsum('m,m...->...', area, density))
    logger.debug(f"Integrated {spec.label} on {n}^4 nodes in {len(partials)} batches of {size}")
    return pairwise_sum(partials)


def integrate_presets(spec, presets, n=DEFAULT_GRID, chunk_size=DEFAULT_CHUNK_SIZE):
    """IntegralResult per preset, with the error estimated from the n/2 grid."""
    order = max(p.order for p in presets)

    def evaluate(s):
        inv = invariants_at(s)
        return np.stack([p.density(inv) for p in presets], axis=-1)

    fine = integrate_fields(spec, n, evaluate, order, chunk_size)
    coarse = integrate_fields(spec, max(4, n // 2), evaluate, order, chunk_size)
    return [
        IntegralResult(float(f), float(abs(f - c)), n, float(c))
        for f, c in zip(np.atleast_1d(fine), np.atleast_1d(coarse))
    ]


def integrate(spec, preset, n=DEFAULT_GRID, chunk_size=DEFAULT_CHUNK_SIZE):
    if isinstance(preset, str):
        preset = get_preset(preset)
    result = integrate_presets(spec, [preset], n, chunk_size)[0]
    logger.info(f"{preset.name} on {spec.label} at n={n}: {result.value:.9g} (+/- {result.error:.2e})")
    return result


# Q-curvature


@dataclass(frozen=True)
class QCurvature:
    intrinsic: np.ndarray
    printed: np.ndarray
    reconciled: np.ndarray


def double_divergence_term(s):
    """nabla_ij (h^{ij} H - 4 H^2 g^{ij})."""
    if s.order < 4:
        raise InsufficientOrder(4, s.order)
    h_upper = jet_einsum('...ia,...ab,...bj->...ij', s.g_inv, s.h, s.g_inv)
    field = h_upper * s.H.expand(2) - 4.0 * s.g_inv * (s.H * s.H).expand(2)
    first = divergence_upper(field, s.gamma, 'uu')
    return divergence_upper(first, s.gamma, 'u').value


def q_curvature_at(s):
    """Q from its intrinsic definition and from the hypersurface expansion of Delta R / 6."""
    inv = invariants_at(s, curvature_at(s, order=0))
    divergence = double_divergence_term(s)
    printed_lap = -EB_PRINTED.density(inv) + 0.5 * inv.W2 - 4.0 / 3.0 * divergence
    reconciled_lap = -EB_RECONCILED.density(inv) + 0.5 * inv.W2 - 4.0 / 3.0 * divergence
    base = 6.0 * inv.det_h - 0.25 * inv.W2
    return QCurvature(intrinsic=inv.Q, printed=base - printed_lap, reconciled=base - reconciled_lap)


# Gauss-Bonnet and conformal invariance


class GaussBonnetResult(NamedTuple):
    value: float
    expected: float
    residual: float
    error: float

    @property
    def relative(self):
        return self.residual / max(1.0, abs(self.expected))


def gauss_bonnet_check(spec, n=DEFAULT_GRID, chunk_size=DEFAULT_CHUNK_SIZE):
    """|6 int det_g h - 8 pi^2 chi|."""
    spec.require_closed()
    result = integrate(spec, e_mu_lambda_sigma(0.0, 0.0, 6.0), n, chunk_size)
    expected = GAUSS_BONNET_FACTOR * spec.euler_char
    residual = abs(result.value - expected)
    logger.info(f"Gauss-Bonnet on {spec.label}: 6 int det = {result.value:.9g}, 8 pi^2 chi = {expected:.9g}")
    return GaussBonnetResult(result.value, expected, residual, result.error)


class InvarianceResult(NamedTuple):
    original: IntegralResult
    transformed: IntegralResult
    deviation: float

    @property
    def error(self):
        return (self.original.error + self.transformed.error) / max(1.0, abs(self.original.value))


def conformal_invariance_test(spec, preset, transform, n=DEFAULT_GRID, chunk_size=DEFAULT_CHUNK_SIZE):
    if isinstance(preset, str):
        preset = get_preset(preset)
    image = mobius_apply(transform, spec)
    original = integrate(spec, preset, n, chunk_size)
    transformed = integrate(image, preset, n, chunk_size)
    deviation = abs(transformed.value - original.value) / max(1.0, abs(original.value))
    logger.info(f"{preset.name} under {transform} on {spec.label}: deviation {deviation:.3e}")
    return InvarianceResult(original, transformed, deviation)


def pointwise_density_ratio(spec, transform, points, names=('h0_4', 'tr_h04', 'W2')):
    """Pulled-back densities (value times area element) of the image over those of ``spec``."""
    image = mobius_apply(transform, spec)
    densities = []
    for surface in (spec, image):
        s = shape_at(surface.evaluate(points, 3), surface.centroid())
        inv = invariants_at(s)
        densities.append({name: inv[name] * s.frame.sqrt_det_g.value for name in names})
    return {name: (densities[0][name], densities[1][name]) for name in names}


def sphere_closed_form(preset, radius=1.0):
    """Preset value on a round sphere from h = -g / radius (radius-independent for scale-invariant presets)."""
    h = -1.0 / radius
    values = {
        'grad_h_sq': 0.0, 'grad_H_sq': 0.0, 'tr_h4': 4 * h ** 4, 'h_4': 16 * h ** 4,
        'H_tr_h3': 4 * h ** 4, 'H2_h2': 4 * h ** 4, 'H4': h ** 4, 'det_h': h ** 4,
        'h0_4': 0.0, 'tr_h04': 0.0, 'W2': 0.0, 'ric2': 36 * h ** 4, 'R': 12 * h ** 2, 'Q': 6 * h ** 4,
    }
    volume = SPHERE_VOLUME * radius ** 4
    return volume * sum(weight * values[key] for key, weight in preset.weights.items())

