"""
Translation Noether currents of Lagrangians F(g, h, nabla h).

The partial derivatives of every Lagrangian atom are closed forms built with
:func:`~verification.jets.jet_einsum`, so the same code runs on plain arrays
(for the finite-difference oracle in the tests) and on jets (for the
covariant derivatives the process needs).

Algebraic atoms are spectral functions phi(S) of the shape operator
S = g^{-1} h.  With M = phi'(S):

    dF/dh_ab = (M g^{-1})^{ab}        dF/dg_ab = -(S M g^{-1})^{ab}
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .catalog import ChartBox, SurfaceSpec, box_sample_plan
from .energies import pairwise_sum
from .exceptions import BumpSupportError, ConfigError, InsufficientOrder
from .jets import Jet, batch_size, jet_einsum
from .shape import flux_field_divergence, shape_at
from .tensors import ambient_divergence, divergence_upper, laplacian

logger = logging.getLogger(__name__)

EYE = np.eye(4)

GRADIENT_ATOMS = ('grad_h_sq', 'grad_H_sq')
ALGEBRAIC_ATOMS = ('tr_h4', 'h_4', 'H_tr_h3', 'H2_h2', 'H4', 'det_h', 'h0_4', 'tr_h04')
ATOMS = GRADIENT_ATOMS + ALGEBRAIC_ATOMS
GENERIC_ATOMS = ('grad_h_sq', 'grad_H_sq', 'tr_h4', 'h_4', 'H_tr_h3', 'H2_h2', 'H4')


@dataclass(frozen=True)
class LagrangianSpec:
    """A named linear combination of Lagrangian atoms."""

    name: str
    weights: dict = field(default_factory=dict)
    parameters: tuple = ()

    @property
    def family(self):
        return self.name.partition(':')[0]

    def part(self, atoms):
        return LagrangianSpec(f"{self.name}|part", {k: v for k, v in self.weights.items() if k in atoms})

    def algebraic_part(self):
        return self.part(ALGEBRAIC_ATOMS)

    @property
    def has_gradient(self):
        return any(self.weights.get(a, 0.0) for a in GRADIENT_ATOMS)


def e_alpha_beta(alpha, beta):
    """|grad h|^2 + alpha H^2|h|^2 + beta H^4."""
    return LagrangianSpec(f"E_alpha_beta:{alpha:g},{beta:g}",
                          {'grad_h_sq': 1.0, 'H2_h2': alpha, 'H4': beta}, (alpha, beta))


def e_family(alpha, beta, gamma, mu, lam):
    """alpha E_A + beta H^2|h|^2 + gamma H^4 + mu |h0|^4 + lambda Tr h0^4, with the printed E_A."""
    weights = {
        'grad_H_sq': alpha, 'H2_h2': beta - alpha, 'H4': gamma - 7.0 * alpha,
        'h0_4': mu, 'tr_h04': lam,
    }
    return LagrangianSpec(f"E_family:{alpha:g},{beta:g},{gamma:g},{mu:g},{lam:g}",
                          weights, (alpha, beta, gamma, mu, lam))


def generic_lagrangian(a):
    a = [float(x) for x in a]
    if len(a) != 7:
        raise ConfigError(f"generic Lagrangian needs 7 coefficients, got {len(a)}")
    return LagrangianSpec('generic:' + ','.join(f"{x:g}" for x in a),
                          dict(zip(GENERIC_ATOMS, a)), tuple(a))


def get_lagrangian(name):
    if name in ATOMS:
        return LagrangianSpec(name, {name: 1.0})
    head, _, tail = name.partition(':')
    try:
        numbers = [float(x) for x in tail.split(',')] if tail else []
    except ValueError:
        raise ConfigError(f"Malformed coefficients in Lagrangian {name!r}")
    if head == 'E_alpha_beta' and len(numbers) == 2:
        return e_alpha_beta(*numbers)
    if head == 'E_family' and len(numbers) == 5:
        return e_family(*numbers)
    if head == 'generic':
        return generic_lagrangian(numbers)
    raise ConfigError(f"Unknown Lagrangian {name!r}; choose one of {list(ATOMS)}, "
                      "E_alpha_beta:a,b, E_family:a,b,c,m,l, generic:a1..a7")


# closed-form partial derivatives


@dataclass(frozen=True)
class Partials:
    """F, dF/dg_ab, dF/dh_ab and K^{cab} = dF/d(nabla_c h_ab), all with upper indices."""

    value: object
    d_g: object
    d_h: object
    K: Optional[object] = None

    def __add__(self, other):
        if self.K is None:
            K = other.K
        elif other.K is None:
            K = self.K
        else:
            K = self.K + other.K
        return Partials(self.value + other.value, self.d_g + other.d_g, self.d_h + other.d_h, K)

    def scaled(self, c):
        return Partials(c * self.value, c * self.d_g, c * self.d_h, None if self.K is None else c * self.K)


def _mat(a, b):
    return jet_einsum('...ij,...jk->...ik', a, b)


def _trace(a):
    return jet_einsum('...ii->...', a)


def _scalar_times(x, tensor):
    letters = 'abcd'[:tensor.ndim - _batch_ndim(x)]
    return jet_einsum(f'...,...{letters}->...{letters}', x, tensor)


def _batch_ndim(x):
    return x.ndim if isinstance(x, Jet) else np.ndim(x)


def _times_identity(x):
    return jet_einsum('...,ij->...ij', x, EYE)


def spectral_derivative(atom, S):
    """(phi(S), phi'(S)) for an algebraic atom; phi' is a mixed (1,1) tensor."""
    S2 = _mat(S, S)
    S3 = _mat(S2, S)
    p1, p2, p3 = _trace(S), _trace(S2), _trace(S3)
    H = 0.25 * p1
    if atom == 'tr_h4':
        return _trace(_mat(S3, S)), 4.0 * S3
    if atom == 'h_4':
        return p2 * p2, 4.0 * _scalar_times(p2, S)
    if atom == 'H_tr_h3':
        return H * p3, _times_identity(0.25 * p3) + 3.0 * _scalar_times(H, S2)
    if atom == 'H2_h2':
        return H * H * p2, _times_identity(0.5 * H * p2) + 2.0 * _scalar_times(H * H, S)
    if atom == 'H4':
        return H * H * H * H, _times_identity(H * H * H)
    if atom in ('tr_h04', 'h0_4'):
        S0 = S - _times_identity(H)
        S0_2 = _mat(S0, S0)
        if atom == 'h0_4':
            q = _trace(S0_2)
            return q * q, 4.0 * _scalar_times(q, S0)
        S0_3 = _mat(S0_2, S0)
        return _trace(_mat(S0_3, S0)), 4.0 * S0_3 - _times_identity(_trace(S0_3))
    if atom == 'det_h':
        e2 = 0.5 * (p1 * p1 - p2)
        e3 = (p1 * p1 * p1 - 3.0 * p1 * p2 + 2.0 * p3) * (1.0 / 6.0)
        e4 = 0.25 * (p1 * e3 - p2 * e2 + p3 * p1 - _trace(_mat(S3, S)))
        adjugate = -S3 + _scalar_times(p1, S2) - _scalar_times(e2, S) + _times_identity(e3)
        return e4, adjugate
    raise ConfigError(f"{atom} is not an algebraic atom")


def _symmetric(t):
    return 0.5 * (t + jet_einsum('...ab->...ba', t))


def atom_partials(atom, g, g_inv, h, grad_h):
    """Closed-form partials of one atom; ``grad_h`` holds nabla_c h_ab on axes (c, a, b)."""
    if atom in ALGEBRAIC_ATOMS:
        S = _mat(g_inv, h)
        value, M = spectral_derivative(atom, S)
        d_h = _symmetric(_mat(M, g_inv))
        d_g = -_symmetric(_mat(_mat(S, M), g_inv))
        return Partials(value, d_g, d_h)

    zero = 0.0 * _mat(g_inv, h)
    up = jet_einsum('...br,...pqr->...pqb', g_inv, grad_h)
    up = jet_einsum('...aq,...pqb->...pab', g_inv, up)
    up = jet_einsum('...cp,...pab->...cab', g_inv, up)
    if atom == 'grad_H_sq':
        dH = 0.25 * jet_einsum('...ab,...cab->...c', g_inv, grad_h)
        dH_up = jet_einsum('...cd,...d->...c', g_inv, dH)
        value = jet_einsum('...c,...c->...', dH, dH_up)
        K = 0.5 * jet_einsum('...ab,...c->...cab', g_inv, dH_up)
        d_g = -jet_einsum('...a,...b->...ab', dH_up, dH_up) - 0.5 * jet_einsum('...c,...cab->...ab', dH, up)
        return Partials(value, _symmetric(d_g), zero, K)
    if atom == 'grad_h_sq':
        value = jet_einsum('...cab,...cab->...', grad_h, up)
        first_up = jet_einsum('...bq,...qef->...bef', g_inv, grad_h)
        mixed = jet_einsum('...ap,...cpe->...cae', g_inv, grad_h)
        d_g = (-jet_einsum('...aef,...bef->...ab', up, first_up)
               - 2.0 * jet_einsum('...cae,...cbe->...ab', mixed, up))
        return Partials(value, _symmetric(d_g), zero, 2.0 * up)
    raise ConfigError(f"Unknown Lagrangian atom {atom!r}")


def lagrangian_partials(L, g, g_inv, h, grad_h):
    total = None
    for atom, weight in L.weights.items():
        if not weight:
            continue
        term = atom_partials(atom, g, g_inv, h, grad_h).scaled(weight)
        total = term if total is None else total + term
    if total is None:
        zero = 0.0 * _mat(g_inv, h)
        total = Partials(_trace(zero), zero, zero)
    return total


def lagrangian_value(L, g, h, grad_h):
    """Pointwise Lagrangian from plain arrays."""
    g_inv = np.linalg.inv(g)
    return lagrangian_partials(L, g, g_inv, h, grad_h).value


# the process


@dataclass(frozen=True)
class MullerFields:
    K: Optional[Jet]
    F: Jet
    G: Optional[Jet]
    T: Jet
    V: Optional[Jet] = None
    divergence: Optional[Jet] = None

    def values(self):
        out = {'F': self.F.value, 'T': self.T.value}
        for name in ('K', 'G', 'V', 'divergence'):
            item = getattr(self, name)
            if item is not None:
                out[name] = item.value
        return out

    @property
    def T_antisymmetric(self):
        T = self.T.value
        return 0.5 * (T - np.swapaxes(T, -1, -2))


def muller_fields(L, s):
    """K, F, G, T and, when the jet order allows, the current V and its divergence.

    Order 4 gives T and F, order 5 the current, order 6 its divergence.
    """
    if s.order < 4:
        raise InsufficientOrder(4, s.order)
    g_inv, gamma, S = s.g_inv, s.gamma, s.shape_operator
    p = lagrangian_partials(L, s.g, g_inv, s.h, s.grad_h)

    F = p.d_h
    G = None
    T = -_scalar_times(p.value, g_inv) - 2.0 * p.d_g
    if p.K is not None:
        F = F - divergence_upper(p.K, gamma, 'uuu')
        G = (jet_einsum('...abd,...cd->...cab', p.K, S)
             - jet_einsum('...acd,...bd->...cab', p.K, S)
             - jet_einsum('...cad,...bd->...cab', p.K, S))
        T = T + 2.0 * divergence_upper(G, gamma, 'uuu')
    T = T - jet_einsum('...ac,...bc->...ab', F, S)

    V = divergence = None
    if s.order >= 5:
        div_F = divergence_upper(jet_einsum('...ab->...ba', F), gamma, 'uu')
        V = (jet_einsum('...ab,...bA->...aA', T, s.frame.d_phi)
             - jet_einsum('...a,...A->...aA', div_F, s.n))
    if s.order >= 6:
        divergence = ambient_divergence(V, gamma)
    return MullerFields(K=p.K, F=F, G=G, T=T, V=V, divergence=divergence)


def current_divergence(L, s):
    """nabla_a V^a as an ambient vector; needs order-6 jets."""
    if s.order < 6:
        raise InsufficientOrder(6, s.order)
    return muller_fields(L, s).divergence.value


# trace formulas


def _double_divergence_hH(s):
    h_upper = jet_einsum('...ia,...ab,...bj->...ij', s.g_inv, s.h, s.g_inv)
    first = divergence_upper(h_upper * s.H.expand(2), s.gamma, 'uu')
    return divergence_upper(first, s.gamma, 'u').value


def _metric_trace(s, tensor):
    return jet_einsum('...ab,...ab->...', s.g, tensor).value


def algebraic_trace_F(weights, s):
    """Closed-form g_ab F^{ab} for the algebraic atoms."""
    S = s.shape_operator.value
    H = s.H.value
    S2 = S @ S
    p2 = np.einsum('...ii->...', S2)
    p3 = np.einsum('...ij,...ji->...', S2, S)
    p1 = 4.0 * H
    S_adj_trace = (p1 ** 3 - 3.0 * p1 * p2 + 2.0 * p3) / 6.0
    closed = {
        'tr_h4': 4.0 * p3,
        'h_4': 16.0 * H * p2,
        'H_tr_h3': p3 + 3.0 * H * p2,
        'H2_h2': 2.0 * H * p2 + 8.0 * H ** 3,
        'H4': 4.0 * H ** 3,
        'det_h': S_adj_trace,
        'h0_4': 0.0 * H,
        'tr_h04': 0.0 * H,
    }
    return sum(weight * closed[atom] for atom, weight in weights.items() if atom in closed) + 0.0 * H


@dataclass(frozen=True)
class TraceCheck:
    name: str
    location: str
    computed: np.ndarray
    expected: np.ndarray

    @property
    def residual(self):
        scale = np.maximum(1.0, np.abs(self.expected))
        return float(np.max(np.abs(self.computed - self.expected) / scale))


def trace_checks(L, s):
    """Traces of T and F against their closed forms, per part of the Lagrangian."""
    if s.order < 4:
        raise InsufficientOrder(4, s.order)
    checks = []
    algebraic = L.algebraic_part()
    if algebraic.weights:
        fields = muller_fields(algebraic, s)
        location = "traces of the algebraic stress and F"
        checks.append(TraceCheck('trace_T_algebraic', location, _metric_trace(s, fields.T), 0.0 * s.H.value))
        checks.append(TraceCheck('trace_F_algebraic', location, _metric_trace(s, fields.F),
                                 algebraic_trace_F(algebraic.weights, s)))

    lap_H = s.lap_H.value
    h_sq = np.einsum('...ij,...ji->...', s.shape_operator.value, s.shape_operator.value)
    w1 = L.weights.get('grad_h_sq', 0.0)
    if w1:
        fields = muller_fields(L.part(('grad_h_sq',)), s)
        target_jet = 32.0 * s.H * s.H + 3.0 * jet_einsum('...ij,...ji->...', s.shape_operator, s.shape_operator)
        expected = 16.0 * _double_divergence_hH(s) - laplacian(target_jet, s.gamma, s.g_inv).value
        checks.append(TraceCheck('trace_T_grad_h', "trace of the |grad h|^2 stress", _metric_trace(s, fields.T), w1 * expected))

    w2 = L.weights.get('grad_H_sq', 0.0)
    if w2:
        fields = muller_fields(L.part(('grad_H_sq',)), s)
        lap_H2 = laplacian(s.H * s.H, s.gamma, s.g_inv).value
        checks.append(TraceCheck('trace_T_grad_H', "trace of the |grad H|^2 stress", _metric_trace(s, fields.T), -w2 * lap_H2))
        checks.append(TraceCheck('trace_F_grad_H', "trace of the |grad H|^2 F", _metric_trace(s, fields.F), -2.0 * w2 * lap_H))

    if L.family == 'E_family':
        alpha, beta, gamma, _, _ = L.parameters
        H = s.H.value
        fields = muller_fields(L, s)
        expected_F = (-2.0 * alpha * lap_H + alpha * (-2.0 * H * h_sq - 36.0 * H ** 3)
                      + beta * (2.0 * H * h_sq + 8.0 * H ** 3) + 4.0 * gamma * H ** 3)
        lap_H2 = laplacian(s.H * s.H, s.gamma, s.g_inv).value
        checks.append(TraceCheck('trace_T_total', "traces for the conformal family", _metric_trace(s, fields.T), -alpha * lap_H2))
        checks.append(TraceCheck('trace_F_total', "traces for the conformal family", _metric_trace(s, fields.F), expected_F))
    return checks


# closed-form table of stresses and F


def noether_table(atom, s):
    """(T^{ab}, F^{ab}) from the closed-form table for an atom, as arrays."""
    g_inv = s.g_inv.value
    S = s.shape_operator.value
    H = s.H.value
    h_up = S @ g_inv
    h2_up = S @ S @ g_inv
    h_sq = np.einsum('...ij,...ji->...', S, S)
    S0 = S - H[..., None, None] * EYE
    h0_up = S0 @ g_inv
    h0_sq = np.einsum('...ij,...ji->...', S0, S0)
    scalar = lambda x: x[..., None, None]
    if atom == 'grad_H_sq':
        dH_up = np.einsum('...ab,...b->...a', g_inv, s.grad_H.value)
        dH_sq = np.einsum('...a,...a->...', s.grad_H.value, dH_up)
        lap_H = s.lap_H.value
        T = -scalar(dH_sq) * g_inv + 2.0 * np.einsum('...a,...b->...ab', dH_up, dH_up) - 0.5 * scalar(lap_H) * h_up
        F = -0.5 * scalar(lap_H) * g_inv
        return T, F
    if atom == 'H2_h2':
        T = -scalar(H ** 2 * h_sq) * g_inv + 2.0 * scalar(H ** 2) * h2_up + 0.5 * scalar(h_sq * H) * h_up
        F = 2.0 * scalar(H ** 2) * h_up + 0.5 * scalar(h_sq * H) * g_inv
        return T, F
    if atom == 'H4':
        return scalar(H ** 3) * h0_up, scalar(H ** 3) * g_inv
    if atom == 'tr_h04':
        S0_3 = S0 @ S0 @ S0
        tr3 = np.einsum('...ii->...', S0_3)
        tr4 = np.einsum('...ij,...ji->...', S0_3, S0)
        T = (-scalar(tr4) * g_inv + 4.0 * (S0_3 @ S0 @ g_inv) + 4.0 * scalar(H) * (S0_3 @ g_inv)
             - h_up * scalar(tr3))
        F = 4.0 * (S0_3 @ g_inv) - scalar(tr3) * g_inv
        return T, F
    if atom == 'h0_4':
        T = -scalar(h0_sq ** 2) * g_inv + 4.0 * scalar(h0_sq) * (S0 @ S0 @ g_inv) + 4.0 * scalar(h0_sq * H) * h0_up
        F = 4.0 * scalar(h0_sq) * h0_up
        return T, F
    raise ConfigError(f"No table row for {atom!r}")


TABLE_ATOMS = ('grad_H_sq', 'H2_h2', 'H4', 'tr_h04', 'h0_4')


def flux_field_check(s):
    """Residual of nabla_j X^j - (Delta H + |h|^2 H - 8 H^3) n and its local scale."""
    divergence, expected = flux_field_divergence(s)
    scale = np.maximum(1.0, np.abs(expected).max(axis=-1))
    return np.abs(divergence - expected).max(axis=-1) / scale


# variational consistency


def bump_profile(s):
    """(1 - s^2)^8 on |s| < 1, zero outside; ``s`` is a scalar jet."""
    inside = np.abs(s.value) < 1.0
    one_minus = 1.0 - s * s
    value = one_minus ** 8
    return Jet(value.coeffs * inside[..., None], value.order, value.nvars)


@dataclass(frozen=True)
class Bump:
    center: tuple
    radius: tuple
    amplitude: float = 1.0

    def box(self):
        lower = tuple(c - r for c, r in zip(self.center, self.radius))
        upper = tuple(c + r for c, r in zip(self.center, self.radius))
        return ChartBox(lower, upper, (False,) * 4)

    def check(self, chart):
        for k in range(4):
            lo, hi = self.center[k] - self.radius[k], self.center[k] + self.radius[k]
            if chart.periodic[k]:
                if hi - lo >= chart.upper[k] - chart.lower[k]:
                    raise BumpSupportError(f"Bump wraps around periodic axis {k}")
            elif lo <= chart.lower[k] or hi >= chart.upper[k]:
                raise BumpSupportError(
                    f"Bump support [{lo:.4g}, {hi:.4g}] leaves chart axis {k} "
                    f"({chart.lower[k]:.4g}, {chart.upper[k]:.4g})"
                )

    def evaluate(self, points, order):
        coords = Jet.coordinates(points, order)
        result = None
        for k, x in enumerate(coords):
            factor = bump_profile((x - self.center[k]) * (1.0 / self.radius[k]))
            result = factor if result is None else result * factor
        return result * self.amplitude

    @classmethod
    def centered(cls, chart, fraction=0.25, amplitude=1.0):
        center = tuple(0.5 * (lo + hi) for lo, hi in zip(chart.lower, chart.upper))
        radius = tuple(fraction * (hi - lo) for lo, hi in zip(chart.lower, chart.upper))
        return cls(center, radius, amplitude)


@dataclass(frozen=True, eq=True)
class PerturbedSurface(SurfaceSpec):
    """Phi + t phi e for a bump phi and an ambient direction e."""

    inner: SurfaceSpec = None
    bump: Bump = None
    direction: tuple = (0.0, 0.0, 0.0, 0.0, 1.0)
    t: float = 0.0

    family = 'perturbed'

    @property
    def chart(self):
        return self.inner.chart

    @property
    def euler_char(self):
        return self.inner.euler_char

    @property
    def label(self):
        return f"{self.inner.label}+{self.t:g}bump"

    def evaluate(self, points, order):
        base = self.inner.evaluate(points, order)
        if self.t == 0.0:
            return base
        phi = self.bump.evaluate(points, order)
        return base + jet_einsum('...,A->...A', phi, np.asarray(self.direction, dtype=float) * self.t)

    def centroid(self):
        return self.inner.centroid()


@dataclass(frozen=True)
class VariationResult:
    direction: tuple
    finite_difference: float
    current_integral: float
    scale: float

    @property
    def deviation(self):
        if self.scale == 0.0:
            return 0.0
        return abs(self.finite_difference - self.current_integral) / self.scale


def _energy_on_plan(spec, L, plan, centroid, chunk_size):
    partials = []
    for points, weights in plan.chunks(batch_size(chunk_size, 3)):
        s = shape_at(spec.evaluate(points, 3), centroid)
        p = lagrangian_partials(L, s.g.value, s.g_inv.value, s.h.value, s.grad_h.value)
        partials.append(np.sum(weights * s.frame.sqrt_det_g.value * p.value))
    return float(pairwise_sum(partials))


def _finite_difference(spec, L, bump, direction, steps, plan, centroid, chunk_size):
    """Richardson-extrapolated central difference of the energy on ``plan``."""

    def derivative(t):
        plus = PerturbedSurface(spec, bump, direction, t)
        minus = PerturbedSurface(spec, bump, direction, -t)
        return (_energy_on_plan(plus, L, plan, centroid, chunk_size)
                - _energy_on_plan(minus, L, plan, centroid, chunk_size)) / (2.0 * t)

    coarse, fine = (derivative(t) for t in steps)
    ratio = (steps[0] / steps[1]) ** 2
    return (ratio * fine - coarse) / (ratio - 1.0)


def _current_moments(spec, L, bump, plan, centroid, chunk_size):
    """int phi nabla_a V^a as an ambient vector, and the matching absolute scale."""
    parts, magnitudes = [], []
    for points, weights in plan.chunks(batch_size(chunk_size, 6)):
        s = shape_at(spec.evaluate(points, 6), centroid)
        divergence = muller_fields(L, s).divergence.value
        phi = bump.evaluate(points, 0).value
        density = weights * s.frame.sqrt_det_g.value * phi
        parts.append(np.einsum('m,mA->A', density, divergence))
        magnitudes.append(np.sum(np.abs(density) * np.linalg.norm(divergence, axis=-1)))
    return pairwise_sum(parts), float(pairwise_sum(magnitudes))


def variational_sweep(spec, L, directions, bump=None, steps=(1e-3, 5e-4), n=12, chunk_size=2048):
    """Finite-difference first variation against the integrated current divergence, per direction.

    Both sides are quadratures on the same Gauss-Legendre grid over the bump box;
    outside the box the integrand does not depend on t.  The current is
    computed once and projected on every direction.
    """
    spec.require_closed()
    bump = bump or Bump.centered(spec.chart)
    bump.check(spec.chart)
    plan = box_sample_plan(bump.box(), n)
    centroid = spec.centroid()
    moments, magnitude = _current_moments(spec, L, bump, plan, centroid, chunk_size)

    results = []
    for direction in directions:
        direction = tuple(float(x) for x in direction)
        e = np.asarray(direction)
        fd = _finite_difference(spec, L, bump, direction, steps, plan, centroid, chunk_size)
        result = VariationResult(direction, float(fd), float(moments @ e), magnitude * float(np.linalg.norm(e)))
        logger.info(f"Variation of {L.name} on {spec.label} along {direction}: "
                    f"fd={result.finite_difference:.9g} current={result.current_integral:.9g} "
                    f"deviation={result.deviation:.2e}")
        results.append(result)
    return results


def variational_consistency(spec, L, bump=None, direction=(0.0, 0.0, 0.0, 0.0, 1.0),
                            steps=(1e-3, 5e-4), n=12, chunk_size=2048):
    return variational_sweep(spec, L, (direction,), bump, steps, n, chunk_size)[0]
