"""
Multivector-valued forms on the 4-dimensional chart.

A :class:`MultiForm` of bidegree (p, q) stores its components on sorted
parameter blades (C(4, p) of them) times sorted ambient blades of R^5
(C(5, q) of them).  Components may be plain arrays or jets; every product
is a contraction against cached structure tensors through
:func:`~verification.jets.jet_einsum`.

Conventions:

* wedge at either level is the sorted-blade product (no 1/k! factors);
* the ambient interior is the left contraction <A -| B, C> = <A, B ^ C>,
  "dot" is the same contraction and reduces to the inner product for equal degrees;
* the parameter interior contracts the trailing indices of the left factor
  against the raised right factor, so that <A -| B, C> = <A, C ^ B>;
* the bullet splits off the first vector of a blade:
  A . (b ^ C) = (A -| b) ^ C + (-1)^{deg C} (A . C) ^ b;
* (*A)_J = sqrt(det g) sum_I sign(I, J) A^I and d* := * d *.
"""
import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import linalg

from .catalog import GraphPatch, random_chart_points
from .exceptions import DegreeOverflow, DegreeUnderflow, InsufficientOrder
from .jets import Jet, coefficient_count, jet_einsum
from .shape import frame_at
from .tensors import blade_index, blades, complement_signs, expand_tensor, permutation_sign, wedge_tensor

logger = logging.getLogger(__name__)

PARAMETER_DIM = 4
AMBIENT_DIM = 5
DENOMINATOR_LIMIT = 64


# structure tensors


def _check_degrees(level, left, right, operation, limit):
    if operation == 'wedge':
        if left + right > limit:
            raise DegreeOverflow(level, left + right, limit)
    elif operation in ('interior', 'dot'):
        if left < right:
            raise DegreeUnderflow(level, left, right)
    elif operation == 'bullet':
        if left < 1 or right < 1:
            raise DegreeUnderflow(level, min(left, right), 1)
        if left + right - 2 > limit:
            raise DegreeOverflow(level, left + right - 2, limit)
    else:
        raise ValueError(f"Unknown {level} operation {operation!r}")


@lru_cache(maxsize=None)
def interior_table(dim, a, b):
    """T[I(a), J(b), C(a-b)] for the left contraction."""
    return np.ascontiguousarray(wedge_tensor(dim, b, a - b).transpose(2, 0, 1))


@lru_cache(maxsize=None)
def trailing_interior_table(dim, a, b):
    """T[K(a), J(b), I(a-b)] with (A -| B)_I = sum sign(I J -> K) A_K B^J."""
    return np.ascontiguousarray(wedge_tensor(dim, a - b, b).transpose(2, 1, 0))


@lru_cache(maxsize=None)
def bullet_table(a, b):
    """First-order contraction of an a-vector with a b-vector in R^5."""
    _check_degrees('ambient', a, b, 'bullet', AMBIENT_DIM)
    if b == 1:
        return interior_table(AMBIENT_DIM, a, 1)
    rest_index = blade_index(AMBIENT_DIM, b - 1)
    inner = interior_table(AMBIENT_DIM, a, 1)
    head_wedge = wedge_tensor(AMBIENT_DIM, a - 1, b - 1)
    sub = bullet_table(a, b - 1)
    tail_wedge = wedge_tensor(AMBIENT_DIM, a + b - 3, 1)
    table = np.zeros((len(blades(AMBIENT_DIM, a)), len(blades(AMBIENT_DIM, b)), len(blades(AMBIENT_DIM, a + b - 2))))
    sign = (-1.0) ** (b - 1)
    for J, blade in enumerate(blades(AMBIENT_DIM, b)):
        first, rest = blade[0], rest_index[blade[1:]]
        table[:, J, :] = inner[:, first, :] @ head_wedge[:, rest, :] + sign * sub[:, rest, :] @ tail_wedge[:, first, :]
    return table


def _parameter_table(p, q, operation):
    _check_degrees('parameter', p, q, operation, PARAMETER_DIM)
    if operation == 'wedge':
        return wedge_tensor(PARAMETER_DIM, p, q), p + q
    return trailing_interior_table(PARAMETER_DIM, p, q), p - q


def _ambient_table(a, b, operation):
    _check_degrees('ambient', a, b, operation, AMBIENT_DIM)
    if operation == 'wedge':
        return wedge_tensor(AMBIENT_DIM, a, b), a + b
    if operation in ('interior', 'dot'):
        return interior_table(AMBIENT_DIM, a, b), a - b
    return bullet_table(a, b), a + b - 2


@lru_cache(maxsize=None)
def _minor_indices(p):
    """Row/column index arrays and signs for the p-th compound matrix of a 4x4 matrix."""
    chosen = blades(PARAMETER_DIM, p)
    rows = np.array([[[I[k] for _ in chosen] for I in chosen] for k in range(p)], dtype=int)
    terms = []
    for perm in itertools.permutations(range(p)):
        cols = np.array([[[J[perm[k]] for J in chosen] for _ in chosen] for k in range(p)], dtype=int)
        terms.append((float(permutation_sign(perm)), cols))
    return rows, terms


def compound(matrix, p):
    """p-th compound (matrix of p x p minors) of a (..., 4, 4) array or jet."""
    if p == 0:
        if isinstance(matrix, Jet):
            return Jet.constant(np.ones(matrix.shape[:-2] + (1, 1)), matrix.order, matrix.nvars)
        return np.ones(np.shape(matrix)[:-2] + (1, 1))
    rows, terms = _minor_indices(p)
    total = None
    for sign, cols in terms:
        term = None
        for k in range(p):
            entry = matrix[..., rows[k], cols[k]]
            term = entry if term is None else term * entry
        term = term * sign
        total = term if total is None else total + term
    return total


# forms


@dataclass(frozen=True)
class MultiForm:
    p: int
    q: int
    components: object

    def __post_init__(self):
        shape = self.components.shape
        expected = (len(blades(PARAMETER_DIM, self.p)), len(blades(AMBIENT_DIM, self.q)))
        if tuple(shape[-2:]) != expected:
            raise ValueError(f"({self.p},{self.q})-form needs trailing shape {expected}, got {tuple(shape[-2:])}")

    @classmethod
    def zeros(cls, p, q, batch=()):
        return cls(p, q, np.zeros(tuple(batch) + (len(blades(PARAMETER_DIM, p)), len(blades(AMBIENT_DIM, q)))))

    @classmethod
    def random(cls, p, q, rng, batch=()):
        shape = tuple(batch) + (len(blades(PARAMETER_DIM, p)), len(blades(AMBIENT_DIM, q)))
        return cls(p, q, rng.standard_normal(shape))

    @classmethod
    def scalar(cls, p, components):
        """A scalar-valued p-form from (..., C(4,p)) components."""
        return cls(p, 0, components[..., None])

    @property
    def value(self):
        c = self.components
        return MultiForm(self.p, self.q, c.value if isinstance(c, Jet) else c)

    def _same(self, other):
        if (self.p, self.q) != (other.p, other.q):
            raise ValueError(f"Cannot combine ({self.p},{self.q}) and ({other.p},{other.q}) forms")

    def __add__(self, other):
        self._same(other)
        return MultiForm(self.p, self.q, self.components + other.components)

    def __sub__(self, other):
        self._same(other)
        return MultiForm(self.p, self.q, self.components - other.components)

    def __neg__(self):
        return MultiForm(self.p, self.q, -self.components)

    def __mul__(self, factor):
        return MultiForm(self.p, self.q, self.components * factor)

    __rmul__ = __mul__

    def scaled(self, field):
        """Multiply by a scalar field of the batch shape."""
        return MultiForm(self.p, self.q, jet_einsum('...,...IK->...IK', field, self.components))

    def full(self):
        """Components as a full antisymmetric parameter tensor (..., 4, ..., 4, C(5,q))."""
        letters = 'abcd'[:self.p]
        return jet_einsum(f'{letters}I,...IK->...{letters}K', expand_tensor(PARAMETER_DIM, self.p), self.components)

    def norm(self):
        c = self.value.components
        return np.sqrt(np.einsum('...IK,...IK->...', c, c))


@dataclass(frozen=True)
class PointFrame:
    """First-order frame data of an immersion, as arrays or jets."""

    d_phi: object
    n: object
    g: object
    g_inv: object
    sqrt_det_g: object

    @classmethod
    def from_frame(cls, frame):
        return cls(frame.d_phi, frame.n, frame.g, frame.g_inv, frame.sqrt_det_g)

    @classmethod
    def from_vectors(cls, d_phi, n=None):
        """Frame of four tangent vectors (..., 4, 5); the normal completes them."""
        d_phi = np.asarray(d_phi, dtype=float)
        g = np.einsum('...iA,...jA->...ij', d_phi, d_phi)
        if n is None:
            _, _, vt = np.linalg.svd(d_phi)
            n = vt[..., -1, :]
        return cls(d_phi, n, g, np.linalg.inv(g), np.sqrt(np.linalg.det(g)))

    @property
    def batch(self):
        return self.g.shape[:-2]

    def values(self):
        unwrap = lambda x: x.value if isinstance(x, Jet) else x
        return PointFrame(*(unwrap(x) for x in (self.d_phi, self.n, self.g, self.g_inv, self.sqrt_det_g)))

    def rotated(self, rotation):
        rotation = np.asarray(rotation)
        return PointFrame(self.d_phi @ rotation.T, self.n @ rotation.T, self.g, self.g_inv, self.sqrt_det_g)

    def dphi_form(self):
        return MultiForm(1, 1, self.d_phi)

    def normal_form(self):
        return MultiForm(0, 1, self.n[..., None, :])

    def eta(self):
        """d Phi wedge d Phi at both levels: components grad_i Phi ^ grad_j Phi."""
        dphi = self.dphi_form()
        return product(dphi, dphi, 'wedge', 'wedge', self)

    def raised_dphi(self):
        return jet_einsum('...ij,...jA->...iA', self.g_inv, self.d_phi)


def random_frames(spec, count, rng, margin=0.05):
    """Frames of ``spec`` at uniformly drawn interior chart points."""
    points = random_chart_points(spec.chart, count, rng, margin)
    centroid = spec.centroid() if spec.closed else None
    return PointFrame.from_frame(frame_at(spec.evaluate(points, 1), centroid)).values()


# products


def raise_parameter(form, frame):
    return MultiForm(form.p, form.q, jet_einsum('...JM,...MK->...JK', compound(frame.g_inv, form.p), form.components))


def product(a, b, parameter='wedge', ambient='wedge', frame=None):
    """Bilinear product with ``parameter`` in {wedge, interior} and ``ambient`` in {wedge, interior, bullet, dot}."""
    P, p_out = _parameter_table(a.p, b.p, parameter)
    Q, q_out = _ambient_table(a.q, b.q, ambient)
    right = b.components
    if parameter == 'interior':
        if frame is None:
            raise ValueError("The parameter interior product needs a frame for the metric")
        right = raise_parameter(b, frame).components
    components = jet_einsum('IJX,...IK,...JL,KLY->...XY', P, a.components, right, Q)
    return MultiForm(p_out, q_out, components)


def wedge(a, b, level='parameter', other='wedge', frame=None):
    """Wedge at ``level``; ``other`` is the product used at the remaining level."""
    if level == 'parameter':
        return product(a, b, 'wedge', other, frame)
    return product(a, b, other, 'wedge', frame)


def interior(a, b, level='parameter', other='wedge', frame=None):
    if level == 'parameter':
        return product(a, b, 'interior', other, frame)
    return product(a, b, other, 'interior', frame)


def bullet(a, b, parameter='wedge', frame=None):
    return product(a, b, parameter, 'bullet', frame)


def inner(a, b, frame):
    """Pointwise <a, b> with g on the parameter level and the Euclidean metric on R^5."""
    a._same(b)
    return jet_einsum('...IK,...IK->...', a.components, raise_parameter(b, frame).components)


def hodge(a, frame):
    signs = complement_signs(PARAMETER_DIM, a.p)
    raised = raise_parameter(a, frame).components
    starred = jet_einsum('IJ,...IK->...JK', signs, raised)
    return MultiForm(PARAMETER_DIM - a.p, a.q, jet_einsum('...,...JK->...JK', frame.sqrt_det_g, starred))


def ext_d(a):
    """Exterior derivative of a form field whose components are jets."""
    if not isinstance(a.components, Jet):
        raise InsufficientOrder(1, 0)
    if a.components.order < 1:
        raise InsufficientOrder(1, a.components.order)
    _check_degrees('parameter', 1, a.p, 'wedge', PARAMETER_DIM)
    grad = a.components.grad()
    table = wedge_tensor(PARAMETER_DIM, 1, a.p)
    return MultiForm(a.p + 1, a.q, jet_einsum('iIM,...IKi->...MK', table, grad))


def d_star(a, frame):
    return hodge(ext_d(hodge(a, frame)), frame)


def hodge_laplacian(a, frame):
    """d* d A + d d* A."""
    total = None
    if a.p < PARAMETER_DIM:
        total = d_star(ext_d(a), frame)
    if a.p > 0:
        term = ext_d(d_star(a, frame))
        total = term if total is None else total + term
    return total


def derivative_checks(spec, rng, count=16, flat=None):
    """d d = 0 on random jets, d eta = 0 on ``spec`` and the flat-chart Laplacian."""
    points = random_chart_points(spec.chart, count, rng)
    centroid = spec.centroid() if spec.closed else None
    frame = PointFrame.from_frame(frame_at(spec.evaluate(points, 2), centroid))
    out = {'d_eta': _max_abs(ext_d(frame.eta()).components.value)}

    worst = 0.0
    for p in range(PARAMETER_DIM - 1):
        shape = (count, len(blades(PARAMETER_DIM, p)), len(blades(AMBIENT_DIM, 1)))
        field = MultiForm(p, 1, Jet(rng.standard_normal(shape + (coefficient_count(PARAMETER_DIM, 2),)), 2))
        worst = max(worst, _max_abs(ext_d(ext_d(field)).components.value))
    out['d_squared'] = worst

    flat = flat or GraphPatch(amplitude=0.0)
    points = random_chart_points(flat.chart, count, rng)
    flat_frame = PointFrame.from_frame(frame_at(flat.evaluate(points, 3)))
    worst = 0.0
    for p in range(PARAMETER_DIM + 1):
        shape = (count, len(blades(PARAMETER_DIM, p)), 1)
        field = MultiForm(p, 0, Jet(rng.standard_normal(shape + (coefficient_count(PARAMETER_DIM, 3),)), 3))
        expected = sum(field.components.partial(tuple(2 if k == i else 0 for k in range(4))) for i in range(4))
        worst = max(worst, _max_abs(hodge_laplacian(field, flat_frame).components.value - expected))
    out['flat_laplacian'] = worst
    return out


# structural checks


def _max_abs(x):
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


def structural_checks(frame, rng):
    """Residuals of the defining algebraic properties on random inputs at each frame."""
    batch = frame.batch
    out = {}
    for p in range(PARAMETER_DIM + 1):
        a = MultiForm.random(p, 1, rng, batch)
        b = MultiForm.random(p, 1, rng, batch)
        double = hodge(hodge(a, frame), frame)
        out[f'hodge_squared_p{p}'] = _max_abs(double.components - (-1.0) ** (p * (4 - p)) * a.components)
        out[f'hodge_isometry_p{p}'] = _max_abs(inner(hodge(a, frame), hodge(b, frame), frame) - inner(a, b, frame))

    worst = 0.0
    for da, db in ((1, 1), (2, 1), (3, 1), (2, 2), (3, 2), (4, 2), (5, 3)):
        A = MultiForm.random(0, da, rng, batch)
        B = MultiForm.random(0, db, rng, batch)
        C = MultiForm.random(0, da - db, rng, batch)
        lhs = inner(product(A, B, 'wedge', 'interior'), C, frame)
        rhs = inner(A, product(B, C, 'wedge', 'wedge'), frame)
        worst = max(worst, _max_abs(lhs - rhs))
    out['ambient_adjointness'] = worst

    worst = 0.0
    for pa, pb in ((1, 1), (2, 1), (3, 1), (2, 2), (3, 2), (4, 1), (4, 3)):
        A = MultiForm.random(pa, 0, rng, batch)
        B = MultiForm.random(pb, 0, rng, batch)
        C = MultiForm.random(pa - pb, 0, rng, batch)
        lhs = inner(product(A, B, 'interior', 'wedge', frame), C, frame)
        rhs = inner(A, product(C, B, 'wedge', 'wedge'), frame)
        worst = max(worst, _max_abs(lhs - rhs))
    out['parameter_adjointness'] = worst

    worst = 0.0
    for p, q in ((1, 1), (1, 2), (2, 1), (1, 3)):
        A = MultiForm.random(p, 0, rng, batch)
        B = MultiForm.random(q, 0, rng, batch)
        worst = max(worst, _max_abs(product(A, B).components - (-1.0) ** (p * q) * product(B, A).components))
    out['graded_antisymmetry'] = worst

    one = MultiForm.scalar(0, np.ones(batch + (1,)))
    out['hodge_of_one'] = _max_abs(hodge(one, frame).components[..., 0, 0] - frame.sqrt_det_g)
    return out


# Prop-type contraction identities


PRINTED_SECOND_IDENTITY = (Fraction(1, 6), Fraction(1, 2), Fraction(-1, 6), Fraction(-1, 2))
DERIVED_SECOND_IDENTITY = (Fraction(-1, 3), Fraction(-1), Fraction(1), Fraction(-1))
SECOND_IDENTITY_TERMS = ('eta_bullet_C', 'starD_bullet_eta', 'eta_A', 'starB_eta')


@dataclass(frozen=True)
class ContractionSuite:
    A: MultiForm
    B: MultiForm
    C: MultiForm
    D: MultiForm
    first_residual: np.ndarray
    terms: dict

    def combination(self, coefficients):
        total = None
        for name, c in zip(SECOND_IDENTITY_TERMS, coefficients):
            term = self.terms[name] * float(c)
            total = term if total is None else total + term
        return total.components

    def second_residual(self, coefficients):
        return self.C.components - self.combination(coefficients)

    def recover(self):
        """Least-squares coefficients of C over the four terms, with their rationalisation."""
        columns = np.stack([self.terms[name].components.reshape(-1) for name in SECOND_IDENTITY_TERMS], axis=1)
        target = self.C.components.reshape(-1)
        coefficients, _, rank, _ = linalg.lstsq(columns, target)
        fit = columns @ coefficients - target
        scale = max(1.0, float(np.max(np.abs(target))))
        rational = tuple(Fraction(float(c)).limit_denominator(DENOMINATOR_LIMIT) for c in coefficients)
        logger.debug(f"Second contraction identity fit: rank {rank}, coefficients {coefficients}")
        return coefficients, rational, float(np.max(np.abs(fit))) / scale, int(rank)


def contraction_suite(frame, L):
    """A, B, C, D built from a vector-valued 2-form L and the terms of both identities."""
    dphi = frame.dphi_form()
    star_L = hodge(L, frame)
    A = product(L, dphi, 'interior', 'dot', frame)
    B = product(star_L, dphi, 'interior', 'dot', frame)
    C = product(L, dphi, 'interior', 'wedge', frame)
    D = product(star_L, dphi, 'interior', 'wedge', frame)
    eta = frame.eta()
    first = product(eta, C, 'interior', 'dot', frame) - A
    terms = {
        'eta_bullet_C': product(eta, C, 'interior', 'bullet', frame),
        'starD_bullet_eta': product(hodge(D, frame), eta, 'interior', 'bullet', frame),
        'eta_A': product(eta, A, 'interior', 'wedge', frame),
        'starB_eta': product(hodge(B, frame), eta, 'interior', 'wedge', frame),
    }
    return ContractionSuite(A, B, C, D, first.components, terms)


# traceless contractions


def _mixed_power(h0_mixed, k):
    result = h0_mixed
    for _ in range(k - 1):
        result = result @ h0_mixed
    return result


def normal_bivectors(frame):
    """n ^ grad_i Phi with lower and raised i, each (..., 4, 10)."""
    W = wedge_tensor(AMBIENT_DIM, 1, 1)
    lower = np.einsum('ABK,...A,...iB->...iK', W, frame.n, frame.d_phi)
    upper = np.einsum('...ij,...jK->...iK', frame.g_inv, lower)
    return lower, upper


def u_field_difference(frame, h0_mixed, mu, lam):
    """u1 - u0 = F_j^k n ^ grad_k Phi with F = 4 mu |h0|^2 h0 + 4 lam h0^3 - lam Tr(h0^3) g."""
    lower, _ = normal_bivectors(frame)
    h0_sq = np.einsum('...ij,...ji->...', h0_mixed, h0_mixed)
    cube = _mixed_power(h0_mixed, 3)
    tr3 = np.einsum('...ii->...', cube)
    F = 4.0 * mu * h0_sq[..., None, None] * h0_mixed + 4.0 * lam * cube - lam * tr3[..., None, None] * np.eye(4)
    return MultiForm(1, 2, np.einsum('...kj,...kK->...jK', F, lower))


def traceless_contraction_checks(frame, h0_mixed, u0, mu=1.0, lam=1.0):
    """Residuals of the bullet identities for a traceless h0 (given as the mixed tensor h0^i_j)."""
    trace = np.abs(np.einsum('...ii->...', h0_mixed))
    scale_h = max(1.0, float(np.max(np.abs(h0_mixed))))
    if np.any(trace > 1e-12 * scale_h):
        raise ValueError(f"h0 is not traceless (|Tr| up to {float(trace.max()):.3e})")
    g_inv = frame.g_inv
    lower, upper = normal_bivectors(frame)
    raised = frame.raised_dphi()
    eta_up = np.einsum('ABK,...jA,...kB->...jkK', wedge_tensor(AMBIENT_DIM, 1, 1), raised, raised)
    delta = np.eye(4)

    bullet22 = np.einsum('PQR,...jkP,...iQ->...jkiR', bullet_table(2, 2), eta_up, lower)
    expected22 = (-np.einsum('ik,...jR->...jkiR', delta, upper) + np.einsum('ij,...kR->...jkiR', delta, upper))
    out = {'bullet_eta_normal': _max_abs(bullet22 - expected22)}

    cube = _mixed_power(h0_mixed, 3)
    tr3 = np.einsum('...ii->...', cube)
    lhs = np.einsum('...jkiR,...ij->...kR', bullet22, h0_mixed)
    out['traceless_h0'] = _max_abs(lhs + np.einsum('...jR,...kj->...kR', upper, h0_mixed))
    lhs = np.einsum('...jkiR,...ij->...kR', bullet22, cube)
    rhs = -np.einsum('...jR,...kj->...kR', upper, cube) + tr3[..., None, None] * upper
    out['traceless_h0_cubed'] = _max_abs(lhs - rhs)
    out['trace_contraction'] = _max_abs(np.einsum('...jkjR->...kR', bullet22) + 3.0 * upper)

    bullet21 = np.einsum('PQR,...iP,...jQ->...ijR', bullet_table(2, 1), lower, frame.d_phi)
    out['normal_bullet_tangent'] = _max_abs(bullet21 + frame.g[..., None] * frame.n[..., None, None, :])
    h0_upper = h0_mixed @ g_inv
    out['traceless_h0_tangent'] = _max_abs(np.einsum('...ij,...ijR->...R', h0_upper, bullet21))
    cube_upper = cube @ g_inv
    out['traceless_h0_cubed_tangent'] = _max_abs(
        np.einsum('...ij,...ijR->...R', cube_upper, bullet21) + tr3[..., None] * frame.n
    )

    eta = frame.eta()
    dphi = frame.dphi_form()
    du = u_field_difference(frame, h0_mixed, mu, lam)
    u1 = u0 + du
    out['lemma_dot'] = _max_abs(
        product(eta, u1, 'interior', 'dot', frame).components - product(eta, u0, 'interior', 'dot', frame).components
    )
    bullet_u1 = product(eta, u1, 'interior', 'bullet', frame)
    bullet_u0 = product(eta, u0, 'interior', 'bullet', frame)
    out['lemma_bullet_printed'] = _max_abs((bullet_u1 + u1 * 3.0).components - (bullet_u0 + u0 * 3.0).components)
    bullet_du = product(eta, du, 'interior', 'bullet', frame).components.reshape(-1)
    du_flat = du.components.reshape(-1)
    denominator = float(du_flat @ du_flat)
    kappa = -float(bullet_du @ du_flat) / denominator if denominator > 0 else float('nan')
    out['lemma_bullet_multiplier'] = kappa
    out['lemma_bullet_recovered'] = _max_abs(bullet_du + (kappa if np.isfinite(kappa) else 0.0) * du_flat)
    out['lemma_tangent'] = _max_abs(
        product(u1, dphi, 'interior', 'dot', frame).components - product(u0, dphi, 'interior', 'dot', frame).components
    )
    return out


def random_traceless(frame, rng, scale=1.0):
    """Mixed tensor of a random g-symmetric traceless h0."""
    sym = rng.standard_normal(frame.batch + (4, 4))
    sym = 0.5 * (sym + np.swapaxes(sym, -1, -2))
    mixed = frame.g_inv @ sym
    trace = np.einsum('...ii->...', mixed)
    return scale * (mixed - 0.25 * trace[..., None, None] * np.eye(4))


# the P operator


def p_operator(ell, frame):
    """P_pq = l_p ^ grad_q Phi - l_q ^ grad_p Phi for l in Lambda^1(Lambda^1); ell is (..., 4, 5)."""
    W = wedge_tensor(AMBIENT_DIM, 1, 1)
    full = np.einsum('ABK,...pA,...qB->...pqK', W, ell, frame.d_phi)
    full = full - np.swapaxes(full, -3, -2)
    pairs = blades(PARAMETER_DIM, 2)
    return MultiForm(2, 2, np.stack([full[..., p, q, :] for p, q in pairs], axis=-2))


def p_inverse(P, frame):
    """Reconstruct l from P through its normal and tangential projections."""
    full = np.einsum('pqI,...IK->...pqK', expand_tensor(PARAMETER_DIM, 2), P.components)
    _, normal_up = normal_bivectors(frame)
    raised = frame.raised_dphi()
    eta_up = np.einsum('ABK,...iA,...qB->...iqK', wedge_tensor(AMBIENT_DIM, 1, 1), raised, raised)
    normal = np.einsum('...pqK,...qK->...p', full, normal_up) / 3.0
    pairing = np.einsum('...pqK,...iqK->...pi', full, eta_up)
    trace = np.einsum('...pp->...', pairing)
    tangential = 0.5 * pairing - trace[..., None, None] * np.eye(4) / 12.0
    return (np.einsum('...p,...A->...pA', normal, frame.n)
            + np.einsum('...pi,...iA->...pA', tangential, frame.d_phi))


def p_operator_bound(frame):
    """Smallest singular value of the 60 x 20 matrix of l -> P at each frame."""
    batch = frame.batch
    basis = np.eye(20).reshape(20, 4, 5)
    columns = []
    for k in range(20):
        ell = np.broadcast_to(basis[k], batch + (4, 5))
        columns.append(p_operator(ell, frame).components.reshape(batch + (-1,)))
    matrix = np.stack(columns, axis=-1)
    return np.linalg.svd(matrix, compute_uv=False)[..., -1]


# return-equation checks


def antisymmetric_vector_forms(rng, batch):
    raw = rng.standard_normal(tuple(batch) + (4, 4, 5))
    return raw - np.swapaxes(raw, -3, -2)


def return_equation_checks(s, rng):
    """Algebraic vanishing of the symmetric L-contraction and the explicit d f -| d Phi formula.

    ``s`` are shape tensors from jets of order 4 or more.
    """
    if s.order < 4:
        raise InsufficientOrder(4, s.order)
    frame = PointFrame.from_frame(s.frame)
    values = frame.values()
    L = antisymmetric_vector_forms(rng, values.batch)
    vanishing = (np.einsum('...ab,...aB->...B', np.einsum('...abA,...bA->...ab', L, values.d_phi), values.d_phi)
                 + np.einsum('...ab,...bB->...B', np.einsum('...abA,...aA->...ab', L, values.d_phi), values.d_phi))

    mean_vector = s.n * s.H.expand(1)
    grad_up = jet_einsum('...ij,...Aj->...iA', s.g_inv, mean_vector.grad())
    f = 0.5 * jet_einsum('ABK,...iA,...iB->...K', wedge_tensor(AMBIENT_DIM, 1, 1), grad_up, s.frame.d_phi)
    df = ext_d(MultiForm(0, 2, f[..., None, :]))
    lhs = product(df, frame.dphi_form(), 'interior', 'dot', frame).components.value[..., 0, :]

    H = s.H.value
    lap_H = s.lap_H.value
    grad_H = s.grad_H.value
    grad_H_up = np.einsum('...ij,...j->...i', values.g_inv, grad_H)
    h_up = s.shape_operator.value @ values.g_inv
    rhs = (-0.5 * lap_H[..., None] * values.n
           - 2.0 * H[..., None] * np.einsum('...i,...iA->...A', grad_H_up, values.d_phi)
           + 0.5 * np.einsum('...ik,...i,...kA->...A', h_up, grad_H, values.d_phi))
    normal_part = np.einsum('...A,...A->...', lhs, values.n)
    denominator = float(np.sum(lap_H * lap_H))
    coefficient = float(np.sum(normal_part * lap_H)) / denominator if denominator > 0 else float('nan')
    scale = np.maximum(1.0, np.abs(rhs).max(axis=-1))
    return {
        'symmetric_contraction': float(np.max(np.abs(vanishing))),
        'df_explicit': float(np.max(np.abs(lhs - rhs).max(axis=-1) / scale)),
        'normal_coefficient': coefficient,
        'normal_part': normal_part,
        'lap_H': lap_H,
    }
