"""
Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores, for every entry of a tensor (or a batch of tensors),
the Taylor coefficients of a function of ``nvars`` variables up to a fixed
total order.  Coefficients live on the trailing axis, ordered by total degree
so that truncating to a lower order is a prefix slice.  Products use
precomputed index-pair tables and ``np.add.reduceat``; analytic functions are
evaluated through their nilpotent power series.
"""
import itertools
import logging
import math
from functools import lru_cache

import numpy as np

from .exceptions import (
    BasePointMismatch,
    InsufficientOrder,
    JetOrderMismatch,
    NonPositiveConstantTerm,
    UnsupportedOrder,
    ZeroConstantTerm,
)

logger = logging.getLogger(__name__)

MAX_ORDER = 6
CHART_DIM = 4
AMBIENT_DIM = 5
ZERO_TOLERANCE = 1e-14
BASE_POINT_TOLERANCE = 1e-12


def coefficient_count(nvars, order):
    return math.comb(order + nvars, nvars)


class _Tables:
    """Index tables shared by every jet with the same (nvars, order)."""

    def __init__(self, nvars, order):
        self.nvars = nvars
        self.order = order
        alphas = []
        for degree in range(order + 1):
            block = [a for a in itertools.product(range(degree + 1), repeat=nvars) if sum(a) == degree]
            alphas.extend(sorted(block, reverse=True))
        self.alphas = np.array(alphas, dtype=int).reshape(-1, nvars)
        self.lookup = {a: i for i, a in enumerate(alphas)}
        self.size = len(alphas)
        self.degrees = self.alphas.sum(axis=1)
        self.factorials = np.array(
            [math.prod(math.factorial(k) for k in a) for a in alphas], dtype=float
        )

        triples = []
        for i, a in enumerate(alphas):
            for j, b in enumerate(alphas):
                if sum(a) + sum(b) > order:
                    continue
                k = self.lookup[tuple(x + y for x, y in zip(a, b))]
                triples.append((k, i, j))
        triples.sort()
        triples = np.array(triples, dtype=int)
        self.left = triples[:, 1]
        self.right = triples[:, 2]
        self.starts = np.concatenate(([0], np.flatnonzero(np.diff(triples[:, 0])) + 1))

        # d/dx_v maps coefficient alpha + e_v (scaled by alpha_v + 1) onto alpha
        self.shift = []
        lower = coefficient_count(nvars, order - 1) if order > 0 else 0
        for v in range(nvars):
            src = np.empty(lower, dtype=int)
            factor = np.empty(lower, dtype=float)
            for i in range(lower):
                raised = list(alphas[i])
                raised[v] += 1
                src[i] = self.lookup[tuple(raised)]
                factor[i] = raised[v]
            self.shift.append((src, factor))

    @property
    def pair_count(self):
        return len(self.left)


@lru_cache(maxsize=None)
def tables(nvars, order):
    if not 0 <= order <= MAX_ORDER:
        raise UnsupportedOrder(order, MAX_ORDER)
    return _Tables(nvars, order)


def batch_size(chunk_size, order):
    """Points per batch for jets of ``order``; ``chunk_size`` is calibrated on order 3.

    Up to order 3 the largest jet products are rank 3; from order 4 on the
    Laplacians and current divergences form rank-4 intermediates.
    """
    reference = 4 ** 3 * tables(CHART_DIM, 3).pair_count
    rank = 3 if order <= 3 else 4
    footprint = 4 ** rank * tables(CHART_DIM, order).pair_count
    return max(4, int(chunk_size * reference / footprint))


def _check_order(order):
    if not isinstance(order, (int, np.integer)) or not 0 <= order <= MAX_ORDER:
        raise UnsupportedOrder(order, MAX_ORDER)


class Jet:
    """Immutable truncated Taylor expansion of a tensor-valued function."""

    __array_ufunc__ = None
    __slots__ = ('coeffs', 'order', 'nvars', 'base')

    def __init__(self, coeffs, order, nvars=CHART_DIM, base=None):
        _check_order(order)
        coeffs = np.asarray(coeffs, dtype=float)
        expected = coefficient_count(nvars, order)
        if coeffs.ndim == 0 or coeffs.shape[-1] != expected:
            raise ValueError(
                f"Jet of order {order} in {nvars} variables needs {expected} coefficients, "
                f"got trailing axis {coeffs.shape[-1:] }"
            )
        self.coeffs = coeffs
        self.order = int(order)
        self.nvars = nvars
        self.base = base

    # construction

    @classmethod
    def constant(cls, value, order, nvars=CHART_DIM):
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + (coefficient_count(nvars, order),))
        coeffs[..., 0] = value
        return cls(coeffs, order, nvars)

    @classmethod
    def variable(cls, index, value, order, nvars=CHART_DIM):
        """The coordinate function x_index expanded at ``value``."""
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + (coefficient_count(nvars, order),))
        coeffs[..., 0] = value
        if order > 0:
            coeffs[..., 1 + index] = 1.0
        return cls(coeffs, order, nvars)

    @classmethod
    def coordinates(cls, points, order, nvars=CHART_DIM):
        """Coordinate jets for a batch of points of shape (..., nvars)."""
        points = np.asarray(points, dtype=float)
        return [cls.variable(i, points[..., i], order, nvars) for i in range(nvars)]

    @classmethod
    def stack(cls, jets, axis=-1):
        order = min(j.order for j in jets)
        nvars = jets[0].nvars
        ndim = jets[0].coeffs.ndim
        if axis < 0:
            axis = ndim + axis
        arrays = [j.truncate(order).coeffs for j in jets]
        return cls(np.stack(arrays, axis=axis), order, nvars)

    # views

    @property
    def shape(self):
        return self.coeffs.shape[:-1]

    @property
    def ndim(self):
        return self.coeffs.ndim - 1

    @property
    def value(self):
        return self.coeffs[..., 0]

    def __repr__(self):
        return f"Jet(order={self.order}, nvars={self.nvars}, shape={self.shape})"

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            key = key + (slice(None),)
        return Jet(self.coeffs[key], self.order, self.nvars)

    def truncate(self, order):
        if order == self.order:
            return self
        if order > self.order:
            raise InsufficientOrder(order, self.order)
        return Jet(self.coeffs[..., :coefficient_count(self.nvars, order)], order, self.nvars)

    def partial(self, alpha):
        """Value of the partial derivative with multi-index ``alpha``."""
        table = tables(self.nvars, self.order)
        i = table.lookup[tuple(alpha)]
        return self.coeffs[..., i] * table.factorials[i]

    def derivative(self, v):
        if self.order == 0:
            raise InsufficientOrder(1, 0)
        src, factor = tables(self.nvars, self.order).shift[v]
        return Jet(self.coeffs[..., src] * factor, self.order - 1, self.nvars)

    def grad(self):
        """All first partials, stacked on a new trailing tensor axis."""
        return Jet.stack([self.derivative(v) for v in range(self.nvars)], axis=-1)

    def sum(self, axis):
        if axis < 0:
            axis = self.coeffs.ndim - 1 + axis
        return Jet(self.coeffs.sum(axis=axis), self.order, self.nvars)

    def expand(self, count):
        """Append ``count`` unit tensor axes so that products broadcast against higher rank jets."""
        return Jet(self.coeffs.reshape(self.shape + (1,) * count + self.coeffs.shape[-1:]), self.order, self.nvars)

    def with_base(self, base):
        return Jet(self.coeffs, self.order, self.nvars, base=base)

    # arithmetic

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return None

    def __add__(self, other):
        other_jet = self._coerce(other)
        if other_jet is not None:
            order = min(self.order, other_jet.order)
            return Jet(self.truncate(order).coeffs + other_jet.truncate(order).coeffs, order, self.nvars)
        shape = np.broadcast_shapes(self.shape, np.shape(other))
        coeffs = np.broadcast_to(self.coeffs, shape + self.coeffs.shape[-1:]).copy()
        coeffs[..., 0] += other
        return Jet(coeffs, self.order, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.order, self.nvars)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other_jet = self._coerce(other)
        if other_jet is not None:
            return _product(self, other_jet)
        other = np.asarray(other, dtype=float)
        return Jet(self.coeffs * other[..., None], self.order, self.nvars)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other_jet = self._coerce(other)
        if other_jet is not None:
            return _product(self, reciprocal(other_jet))
        other = np.asarray(other, dtype=float)
        return Jet(self.coeffs / other[..., None], self.order, self.nvars)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, exponent):
        if isinstance(exponent, (int, np.integer)) and exponent >= 0:
            result = Jet.constant(np.ones(self.shape), self.order, self.nvars)
            for _ in range(int(exponent)):
                result = result * self
            return result
        return power(self, exponent)


def _product(a, b):
    order = min(a.order, b.order)
    table = tables(a.nvars, order)
    n = table.size
    left = a.coeffs[..., :n][..., table.left]
    right = b.coeffs[..., :n][..., table.right]
    return Jet(np.add.reduceat(left * right, table.starts, axis=-1), order, a.nvars)


# elementary functions


def _series(x, derivatives):
    """Evaluate sum_k derivatives[k] * eps**k with eps the nilpotent part of x."""
    eps = Jet(x.coeffs.copy(), x.order, x.nvars)
    eps.coeffs[..., 0] = 0.0
    result = Jet.constant(derivatives[x.order], x.order, x.nvars)
    for k in range(x.order - 1, -1, -1):
        result = result * eps + derivatives[k]
    return result


def reciprocal(x):
    x0 = x.value
    if np.any(np.abs(x0) < ZERO_TOLERANCE):
        raise ZeroConstantTerm(float(np.min(np.abs(x0))))
    return _series(x, [(-1.0) ** k / x0 ** (k + 1) for k in range(x.order + 1)])


def power(x, exponent):
    x0 = x.value
    if np.any(x0 <= 0.0):
        raise NonPositiveConstantTerm(float(np.min(x0)), operation=f'power {exponent}')
    terms = []
    coefficient = 1.0
    for k in range(x.order + 1):
        terms.append(coefficient * x0 ** (exponent - k))
        coefficient *= (exponent - k) / (k + 1)
    return _series(x, terms)


def sqrt(x):
    if np.any(x.value <= 0.0):
        raise NonPositiveConstantTerm(float(np.min(x.value)))
    return power(x, 0.5)


def sin(x):
    x0 = x.value
    cycle = [np.sin(x0), np.cos(x0), -np.sin(x0), -np.cos(x0)]
    return _series(x, [cycle[k % 4] / math.factorial(k) for k in range(x.order + 1)])


def cos(x):
    x0 = x.value
    cycle = [np.cos(x0), -np.sin(x0), -np.cos(x0), np.sin(x0)]
    return _series(x, [cycle[k % 4] / math.factorial(k) for k in range(x.order + 1)])


def exp(x):
    e0 = np.exp(x.value)
    return _series(x, [e0 / math.factorial(k) for k in range(x.order + 1)])


def log(x):
    x0 = x.value
    if np.any(x0 <= 0.0):
        raise NonPositiveConstantTerm(float(np.min(x0)), operation='log')
    terms = [np.log(x0)] + [(-1.0) ** (k + 1) / (k * x0 ** k) for k in range(1, x.order + 1)]
    return _series(x, terms)


_BINARY = {
    '+': lambda a, b: a + b,
    '-': lambda a, b: a - b,
    '*': lambda a, b: a * b,
    '/': lambda a, b: a / b,
}

_UNARY = {'sin': sin, 'cos': cos, 'sqrt': sqrt, 'exp': exp, 'log': log}


def jet_arith(a, b, op):
    """Strict scalar-jet arithmetic: orders must agree exactly."""
    if op in _BINARY:
        if isinstance(b, Jet) and a.order != b.order:
            raise JetOrderMismatch(a.order, b.order)
        return _BINARY[op](a, b)
    if op == 'pow':
        return a ** b
    if op in _UNARY:
        return _UNARY[op](a)
    raise ValueError(f"Unknown jet operation {op!r}")


# tensor contractions


_LETTERS = 'abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ'


def _free_letter(subscripts):
    for letter in reversed(_LETTERS):
        if letter not in subscripts:
            return letter
    raise ValueError("No spare einsum letter")


def _einsum_pair(spec, x, y):
    x_jet = isinstance(x, Jet)
    y_jet = isinstance(y, Jet)
    if not x_jet and not y_jet:
        return np.einsum(spec, x, y)
    inputs, output = spec.split('->')
    left, right = inputs.split(',')
    z = _free_letter(spec)
    if x_jet and y_jet:
        order = min(x.order, y.order)
        table = tables(x.nvars, order)
        n = table.size
        xs = x.coeffs[..., :n][..., table.left]
        ys = y.coeffs[..., :n][..., table.right]
        raw = np.einsum(f'{left}{z},{right}{z}->{output}{z}', xs, ys)
        return Jet(np.add.reduceat(raw, table.starts, axis=-1), order, x.nvars)
    if x_jet:
        return Jet(np.einsum(f'{left}{z},{right}->{output}{z}', x.coeffs, y), x.order, x.nvars)
    return Jet(np.einsum(f'{left},{right}{z}->{output}{z}', x, y.coeffs), y.order, y.nvars)


def _einsum_single(spec, x):
    if not isinstance(x, Jet):
        return np.einsum(spec, x)
    term, output = spec.split('->')
    z = _free_letter(spec)
    return Jet(np.einsum(f'{term}{z}->{output}{z}', x.coeffs), x.order, x.nvars)


def jet_einsum(subscripts, *operands):
    """``np.einsum`` over jets and plain arrays, contracted pairwise left to right."""
    subscripts = subscripts.replace(' ', '')
    inputs, output = subscripts.split('->')
    terms = inputs.split(',')
    if len(terms) != len(operands):
        raise ValueError(f"{subscripts!r} expects {len(terms)} operands, got {len(operands)}")
    if len(terms) == 1:
        return _einsum_single(subscripts, operands[0])

    current_term, current = terms[0], operands[0]
    for i in range(1, len(terms)):
        later = ''.join(terms[i + 1:]) + output
        letters = (current_term + terms[i]).replace('...', '')
        keep = ''.join(c for c in dict.fromkeys(letters) if c in later)
        ellipsis = '...' if '...' in current_term or '...' in terms[i] else ''
        out_term = ellipsis + keep
        current = _einsum_pair(f'{current_term},{terms[i]}->{out_term}', current, operands[i])
        current_term = out_term
    if current_term != output:
        current = _einsum_single(f'{current_term}->{output}', current)
    return current


def values(x):
    return x.value if isinstance(x, Jet) else np.asarray(x)


# linear algebra on jet matrices


def jet_inv(matrix):
    """Inverse of a (..., n, n) jet matrix by the Neumann series around its value."""
    m0 = np.linalg.inv(matrix.value)
    nilpotent = Jet(matrix.coeffs.copy(), matrix.order, matrix.nvars)
    nilpotent.coeffs[..., 0] = 0.0
    step = -jet_einsum('...ij,...jk->...ik', m0, nilpotent)
    term = Jet.constant(m0, matrix.order, matrix.nvars)
    result = term
    for _ in range(matrix.order):
        term = jet_einsum('...ij,...jk->...ik', step, term)
        result = result + term
    return result


def jet_det(matrix):
    """Determinant of a (..., n, n) jet matrix via det(M0) exp(tr log(I + M0^-1 E))."""
    m0 = matrix.value
    det0 = np.linalg.det(m0)
    nilpotent = Jet(matrix.coeffs.copy(), matrix.order, matrix.nvars)
    nilpotent.coeffs[..., 0] = 0.0
    y = jet_einsum('...ij,...jk->...ik', np.linalg.inv(m0), nilpotent)
    power_k = y
    log_trace = jet_einsum('...ii->...', y)
    for k in range(2, matrix.order + 1):
        power_k = jet_einsum('...ij,...jk->...ik', power_k, y)
        log_trace = log_trace + jet_einsum('...ii->...', power_k) * ((-1.0) ** (k + 1) / k)
    return exp(log_trace) * det0


def jet_eval(surface, points, order):
    """Jet of ``surface`` at chart ``points`` (shape (..., 4))."""
    _check_order(order)
    return surface.evaluate(points, order)


# composition with ambient maps


def identity_jet(point, order):
    """The identity map of R^5 expanded at ``point`` (batch shape (..., 5))."""
    point = np.asarray(point, dtype=float)
    coords = Jet.coordinates(point, order, nvars=AMBIENT_DIM)
    return Jet.stack(coords, axis=-1).with_base(point)


@lru_cache(maxsize=None)
def _power_recipe(nvars, order):
    """For each multi-index beta > 0: (index of beta - e_k, k) with k its first nonzero slot."""
    table = tables(nvars, order)
    recipe = []
    for alpha in table.alphas[1:]:
        k = int(np.flatnonzero(alpha)[0])
        lowered = alpha.copy()
        lowered[k] -= 1
        recipe.append((table.lookup[tuple(lowered)], k))
    return recipe


def jet_compose(outer, inner):
    """Compose an ambient-map jet (5 variables, expanded at ``outer.base``) with a chart jet."""
    if outer.order != inner.order:
        raise JetOrderMismatch(outer.order, inner.order)
    if outer.base is not None:
        distance = float(np.max(np.abs(np.asarray(outer.base) - inner.value)))
        scale = max(1.0, float(np.max(np.abs(inner.value))))
        if distance > BASE_POINT_TOLERANCE * scale:
            raise BasePointMismatch(distance)
    order = inner.order
    delta = Jet(inner.coeffs.copy(), order, inner.nvars)
    delta.coeffs[..., 0] = 0.0
    components = [delta[..., k] for k in range(outer.nvars)]

    monomials = [Jet.constant(np.ones(inner.shape[:-1]), order, inner.nvars)]
    for lowered, k in _power_recipe(outer.nvars, order):
        monomials.append(monomials[lowered] * components[k])
    basis = Jet.stack(monomials, axis=-1)
    return jet_einsum('...mb,...b->...m', outer.coeffs, basis)
