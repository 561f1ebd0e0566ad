"""
Closed-form immersions of 4-dimensional charts into R^5.

Every surface is an immutable specification whose :meth:`evaluate` returns the
jet of its parametrization at a batch of chart points.  Möbius images wrap
another specification and push its jets through the generator maps with
:func:`verification.jets.jet_compose`.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import roots_legendre

from . import jets
from .exceptions import InadmissibleTransform, OpenPatchError, PointOutsideDomain
from .jets import Jet, identity_jet, jet_compose, jet_einsum

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
ADMISSIBILITY_FACTOR = 1e-3
ADMISSIBILITY_GRID = 16


@dataclass(frozen=True)
class ChartBox:
    lower: tuple
    upper: tuple
    periodic: tuple

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def check(self, points):
        points = np.asarray(points, dtype=float)
        lower = np.asarray(self.lower)
        upper = np.asarray(self.upper)
        periodic = np.asarray(self.periodic)
        inside = np.where(
            periodic,
            (points >= lower) & (points <= upper),
            (points > lower) & (points < upper),
        )
        if not np.all(inside):
            bad = points.reshape(-1, 4)[~inside.reshape(-1, 4).all(axis=1)][0]
            raise PointOutsideDomain(tuple(float(x) for x in bad), (self.lower, self.upper))


HYPERSPHERICAL_BOX = ChartBox((0.0, 0.0, 0.0, 0.0), (math.pi, math.pi, math.pi, TWO_PI), (False, False, False, True))
TORUS_BOX = ChartBox((0.0, 0.0, 0.0, 0.0), (TWO_PI, math.pi, math.pi, TWO_PI), (True, False, False, True))
GRAPH_BOX = ChartBox((-1.0, -1.0, -1.0, -1.0), (1.0, 1.0, 1.0, 1.0), (False, False, False, False))


def _hyperspherical(angles):
    """Unit vector of R^5 from coordinate jets (chi1, chi2, chi3, phi)."""
    c1, c2, c3, c4 = (jets.cos(a) for a in angles)
    s1, s2, s3, s4 = (jets.sin(a) for a in angles)
    return [c1, s1 * c2, s1 * s2 * c3, s1 * s2 * s3 * c4, s1 * s2 * s3 * s4]


def _three_sphere(angles):
    """Unit vector of R^4 from coordinate jets (psi, theta, phi)."""
    c1, c2, c3 = (jets.cos(a) for a in angles)
    s1, s2, s3 = (jets.sin(a) for a in angles)
    return [c1, s1 * c2, s1 * s2 * c3, s1 * s2 * s3]


class SurfaceSpec:
    """Base class for catalog immersions."""

    family = 'surface'
    chart = HYPERSPHERICAL_BOX
    euler_char = None

    @property
    def closed(self):
        return self.euler_char is not None

    @property
    def label(self):
        return self.family

    def __str__(self):
        return self.label

    def parametrize(self, coordinates):
        raise NotImplementedError

    def evaluate(self, points, order):
        points = np.asarray(points, dtype=float)
        self.chart.check(points)
        coordinates = Jet.coordinates(points, order)
        return Jet.stack(self.parametrize(coordinates), axis=-1)

    def centroid(self):
        return np.zeros(5)

    def require_closed(self):
        if not self.closed:
            raise OpenPatchError(self.label)


@dataclass(frozen=True, eq=True)
class Sphere(SurfaceSpec):
    radius: float = 1.0

    family = 'sphere'
    euler_char = 2

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"Sphere radius must be positive, got {self.radius}")

    @property
    def label(self):
        return f"sphere({self.radius:g})"

    def parametrize(self, coordinates):
        return [self.radius * x for x in _hyperspherical(coordinates)]


@dataclass(frozen=True, eq=True)
class Ellipsoid(SurfaceSpec):
    axes: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)

    family = 'ellipsoid'
    euler_char = 2

    def __post_init__(self):
        if len(self.axes) != 5 or min(self.axes) <= 0:
            raise ValueError(f"Ellipsoid needs five positive semi-axes, got {self.axes}")

    @property
    def label(self):
        return "ellipsoid(" + ",".join(f"{a:g}" for a in self.axes) + ")"

    def parametrize(self, coordinates):
        return [a * x for a, x in zip(self.axes, _hyperspherical(coordinates))]


@dataclass(frozen=True, eq=True)
class TorusOfRevolution(SurfaceSpec):
    """((R + r cos u) omega, r sin u) with omega on the unit 3-sphere; chart (u, psi, theta, phi)."""

    major: float = 2.0
    minor: float = 1.0

    family = 'torus'
    chart = TORUS_BOX
    euler_char = 0

    def __post_init__(self):
        if not self.major > self.minor > 0:
            raise ValueError(f"Torus needs R > r > 0, got R={self.major}, r={self.minor}")

    @property
    def label(self):
        return f"torus({self.major:g},{self.minor:g})"

    def parametrize(self, coordinates):
        u = coordinates[0]
        radial = self.major + self.minor * jets.cos(u)
        omega = _three_sphere(coordinates[1:])
        return [radial * w for w in omega] + [self.minor * jets.sin(u)]


@dataclass(frozen=True, eq=True)
class GraphPatch(SurfaceSpec):
    """Phi(x) = (x, f(x)) with f a polynomial times a Gaussian bump; amplitude 0 is flat."""

    amplitude: float = 0.3

    family = 'graph'
    chart = GRAPH_BOX
    euler_char = None

    @property
    def label(self):
        return f"graph({self.amplitude:g})"

    def parametrize(self, coordinates):
        x0, x1, x2, x3 = coordinates
        if self.amplitude == 0:
            height = 0.0 * x0
        else:
            radius_sq = x0 * x0 + x1 * x1 + x2 * x2 + x3 * x3
            polynomial = 1.0 + 0.5 * x0 - 0.2 * x1 * x2 + 0.1 * x3 * x3
            height = self.amplitude * polynomial * jets.exp(-0.5 * radius_sq)
        return [x0, x1, x2, x3, height]


# Möbius generators


@dataclass(frozen=True)
class Translation:
    vector: tuple

    def apply(self, x):
        return x + np.asarray(self.vector, dtype=float)

    def apply_points(self, values):
        return values + np.asarray(self.vector, dtype=float)


@dataclass(frozen=True)
class Rotation:
    matrix: tuple

    def __post_init__(self):
        q = np.asarray(self.matrix, dtype=float)
        if q.shape != (5, 5) or np.max(np.abs(q @ q.T - np.eye(5))) > 1e-12:
            raise ValueError("Rotation block must be a 5x5 orthogonal matrix to 1e-12")

    def apply(self, x):
        return jet_einsum('AB,...B->...A', np.asarray(self.matrix, dtype=float), x)

    def apply_points(self, values):
        return values @ np.asarray(self.matrix, dtype=float).T


@dataclass(frozen=True)
class Dilation:
    factor: float

    def __post_init__(self):
        if self.factor <= 0:
            raise ValueError(f"Dilation factor must be positive, got {self.factor}")

    def apply(self, x):
        return x * self.factor

    def apply_points(self, values):
        return values * self.factor


@dataclass(frozen=True)
class Inversion:
    """Unit-radius inversion x -> c + (x - c)/|x - c|^2."""

    center: tuple

    def apply(self, x):
        c = np.asarray(self.center, dtype=float)
        offset = x - c
        norm_sq = jet_einsum('...A,...A->...', offset, offset)
        return jet_einsum('...A,...->...A', offset, 1.0 / norm_sq) + c

    def apply_points(self, values):
        center = np.asarray(self.center, dtype=float)
        offset = values - center
        return center + offset / np.sum(offset * offset, axis=-1, keepdims=True)


@dataclass(frozen=True)
class MobiusTransform:
    generators: tuple = ()

    @classmethod
    def identity(cls):
        return cls(())

    def then(self, other):
        return MobiusTransform(self.generators + other.generators)

    def apply_points(self, values):
        for generator in self.generators:
            values = generator.apply_points(values)
        return values

    def __str__(self):
        return ' then '.join(type(g).__name__.lower() for g in self.generators) or 'identity'


@dataclass(frozen=True, eq=True)
class MobiusImage(SurfaceSpec):
    inner: SurfaceSpec = field(default_factory=Sphere)
    transform: MobiusTransform = field(default_factory=MobiusTransform)
    margins: tuple = ()

    family = 'mobius'

    @property
    def chart(self):
        return self.inner.chart

    @property
    def euler_char(self):
        return self.inner.euler_char

    @property
    def label(self):
        return f"mobius[{self.transform}]({self.inner.label})"

    def evaluate(self, points, order):
        result = self.inner.evaluate(points, order)
        for generator, margin in zip(self.transform.generators, self.margins):
            if isinstance(generator, Inversion):
                distance = np.linalg.norm(result.value - np.asarray(generator.center), axis=-1)
                if np.any(distance < margin):
                    worst = int(np.argmin(distance.reshape(-1)))
                    raise InadmissibleTransform(
                        generator.center, tuple(np.asarray(points).reshape(-1, 4)[worst]),
                        float(distance.reshape(-1)[worst]), margin,
                    )
            outer = generator.apply(identity_jet(result.value, order))
            result = jet_compose(outer, result)
        return result

    def centroid(self):
        return self.sampled_centroid

    @cached_property
    def sampled_centroid(self):
        """Mean of the image over the admissibility grid, computed once per image."""
        values = self.evaluate(chart_sample_plan(self, ADMISSIBILITY_GRID).points(), 0).value
        centroid = values.mean(axis=0)
        centroid.flags.writeable = False
        return centroid


def evaluate(spec, points, order):
    return jets.jet_eval(spec, points, order)


def mobius_apply(transform, spec):
    """Wrap ``spec`` so that its evaluation composes the generator maps in order.

    Each inversion center is checked against the image sampled on a
    16^4 chart grid; the minimum allowed distance is 1e-3 times the
    diameter of the image at that stage.
    """
    if not transform.generators:
        return spec
    if isinstance(spec, MobiusImage):
        return mobius_apply(spec.transform.then(transform), spec.inner)

    plan = chart_sample_plan(spec, ADMISSIBILITY_GRID)
    chart_points = plan.points()
    values = spec.evaluate(chart_points, 0).value
    margins = []
    for generator in transform.generators:
        margin = 0.0
        if isinstance(generator, Inversion):
            diameter = float(np.linalg.norm(values.max(axis=0) - values.min(axis=0)))
            margin = ADMISSIBILITY_FACTOR * diameter
            distance = np.linalg.norm(values - np.asarray(generator.center), axis=-1)
            worst = int(np.argmin(distance))
            if distance[worst] < margin:
                raise InadmissibleTransform(
                    generator.center, tuple(chart_points[worst]), float(distance[worst]), margin
                )
            logger.debug(f"Inversion about {generator.center}: clearance {distance[worst]:.4g}, margin {margin:.4g}")
        margins.append(margin)
        values = generator.apply_points(values)
    return MobiusImage(inner=spec, transform=transform, margins=tuple(margins))


# quadrature


@dataclass(frozen=True)
class SamplePlan:
    """Tensor-product quadrature on a chart box, without the area element."""

    nodes: tuple
    weights: tuple

    @property
    def shape(self):
        return tuple(len(n) for n in self.nodes)

    def __len__(self):
        return int(np.prod(self.shape))

    def _block(self, start, stop):
        index = np.unravel_index(np.arange(start, stop), self.shape)
        points = np.stack([self.nodes[k][index[k]] for k in range(4)], axis=-1)
        weights = np.prod([self.weights[k][index[k]] for k in range(4)], axis=0)
        return points, weights

    def points(self):
        return self._block(0, len(self))[0]

    def weight_array(self):
        return self._block(0, len(self))[1]

    def chunks(self, size=2048):
        for start in range(0, len(self), size):
            yield self._block(start, min(start + size, len(self)))

    def __iter__(self):
        return self.chunks()


def _axis_rule(lower, upper, periodic, n):
    if periodic:
        step = (upper - lower) / n
        return lower + step * np.arange(n), np.full(n, step)
    x, w = roots_legendre(n)
    half = 0.5 * (upper - lower)
    return lower + half * (x + 1.0), half * w


def chart_sample_plan(spec, n):
    """Trapezoid rule on periodic coordinates, Gauss–Legendre on the others."""
    return box_sample_plan(spec.chart, n)


def box_sample_plan(box, n):
    if n < 4:
        raise ValueError(f"Quadrature grid must have at least 4 nodes per axis, got {n}")
    rules = [_axis_rule(lo, hi, per, n) for lo, hi, per in zip(box.lower, box.upper, box.periodic)]
    return SamplePlan(tuple(r[0] for r in rules), tuple(r[1] for r in rules))


def random_chart_points(chart, count, rng, margin=0.05):
    """Uniform chart points kept a relative ``margin`` away from the box faces."""
    lower = np.asarray(chart.lower, dtype=float)
    span = np.asarray(chart.upper, dtype=float) - lower
    return lower + span * (margin + (1.0 - 2.0 * margin) * rng.random((count, 4)))
