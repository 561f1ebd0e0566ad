"""
Pointwise extrinsic geometry of a hypersurface from the jet of its chart map.

Conventions: h_ij = n . d_ij Phi, H = Tr_g h / 4, Laplacians are
g^{ij} nabla_i nabla_j.  Every field is kept as a jet so that later stages
(curvature, Noether currents, exterior derivatives) can differentiate it
again; the orders drop by one per derivative taken.
"""
import logging
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import jets
from .exceptions import InsufficientOrder, NotAnImmersion
from .jets import Jet, jet_einsum, jet_inv
from .tensors import (
    ambient_divergence,
    covariant_derivative,
    cross_product_tensor,
    divergence_upper,
    laplacian,
    wedge_tensor,
)

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class FrameData:
    d_phi: Jet        # (..., 4, 5)
    g: Jet            # (..., 4, 4)
    g_inv: Jet
    sqrt_det_g: Jet   # (...)
    n: Jet            # (..., 5)
    position: Jet     # (..., 5)


@dataclass(frozen=True)
class ShapeTensors:
    frame: FrameData
    h: Jet
    shape_operator: Jet
    H: Jet
    h0: Jet
    gamma: Jet
    grad_h: Jet
    grad_H: Jet
    lap_H: Optional[Jet]
    lap_h: Optional[Jet]
    X: Jet
    order: int

    @property
    def g(self):
        return self.frame.g

    @property
    def g_inv(self):
        return self.frame.g_inv

    @property
    def n(self):
        return self.frame.n


@dataclass(frozen=True)
class CurvatureData:
    riemann: Jet
    ricci: Jet
    scalar: Jet
    schouten: Jet
    weyl: Jet
    einstein: Jet


@dataclass(frozen=True)
class InvariantVector:
    grad_h_sq: np.ndarray
    grad_H_sq: np.ndarray
    tr_h4: np.ndarray
    h_4: np.ndarray
    H_tr_h3: np.ndarray
    H2_h2: np.ndarray
    H4: np.ndarray
    det_h: np.ndarray
    h0_4: np.ndarray
    tr_h04: np.ndarray
    W2: np.ndarray
    ric2: np.ndarray
    R: np.ndarray
    Q: np.ndarray

    @classmethod
    def names(cls):
        return tuple(f.name for f in fields(cls))

    def as_array(self):
        return np.stack([getattr(self, name) for name in self.names()], axis=-1)

    def __getitem__(self, name):
        return getattr(self, name)


def frame_at(j, centroid=None, flip=False):
    """First-order frame; the normal is outward relative to ``centroid`` or points up when none is given."""
    if j.order < 1:
        raise InsufficientOrder(1, j.order)
    d_phi = jet_einsum('...Av->...vA', j.grad())
    singular = np.linalg.svd(d_phi.value, compute_uv=False)
    worst = singular[..., -1] / np.maximum(singular[..., 0], 1e-300)
    if np.any(worst < RANK_TOLERANCE):
        raise NotAnImmersion(float(np.min(singular[..., -1])))

    g = jet_einsum('...iA,...jA->...ij', d_phi, d_phi)
    g_inv = jet_inv(g)
    pair = wedge_tensor(5, 1, 1)
    first = jet_einsum('abI,...a,...b->...I', pair, d_phi[..., 0, :], d_phi[..., 1, :])
    second = jet_einsum('abI,...a,...b->...I', pair, d_phi[..., 2, :], d_phi[..., 3, :])
    raw = jet_einsum('IJA,...I,...J->...A', cross_product_tensor(), first, second)
    length = jets.sqrt(jet_einsum('...A,...A->...', raw, raw))
    n = raw * jets.reciprocal(length).expand(1)

    if centroid is None:
        sign = np.sign(n.value[..., 4])
    else:
        sign = np.sign(np.einsum('...A,...A->...', n.value, j.value - np.asarray(centroid)))
    sign = np.where(sign == 0, 1.0, sign)
    if flip:
        sign = -sign
    n = n * sign[..., None]
    return FrameData(d_phi=d_phi, g=g, g_inv=g_inv, sqrt_det_g=length, n=n, position=j)


def shape_at(j, centroid=None, flip=False):
    """Second fundamental form and its covariant derivatives.

    Order-3 jets give everything up to nabla h; the Laplacians need order 4
    and are left as ``None`` below that.
    """
    if j.order < 3:
        raise InsufficientOrder(3, j.order)
    frame = frame_at(j, centroid, flip)
    d_phi, g, g_inv, n = frame.d_phi, frame.g, frame.g_inv, frame.n

    dd_phi = jet_einsum('...iAj->...ijA', d_phi.grad())
    h = jet_einsum('...ijA,...A->...ij', dd_phi, n)
    gamma = jet_einsum('...kl,...ijA,...lA->...kij', g_inv, dd_phi, d_phi)
    shape_operator = jet_einsum('...ik,...kj->...ij', g_inv, h)
    H = 0.25 * jet_einsum('...ii->...', shape_operator)
    h0 = h - g * H.expand(2)

    grad_h = covariant_derivative(h, gamma, 'dd')
    grad_H = H.grad()
    lap_H = lap_h = None
    if j.order >= 4:
        lap_H = laplacian(H, gamma, g_inv)
        lap_h = laplacian(h, gamma, g_inv, 'dd')

    mean_vector = n * H.expand(1)
    grad_mean_vector = jet_einsum('...jk,...Ak->...jA', g_inv, mean_vector.grad())
    h0_upper = jet_einsum('...ja,...ab,...bk->...jk', g_inv, h0, g_inv)
    X = grad_mean_vector + 2.0 * jet_einsum('...jk,...kA->...jA', h0_upper * H.expand(2), d_phi)

    return ShapeTensors(
        frame=frame, h=h, shape_operator=shape_operator, H=H, h0=h0, gamma=gamma,
        grad_h=grad_h, grad_H=grad_H, lap_H=lap_H, lap_h=lap_h, X=X, order=j.order,
    )


def kulkarni_nomizu(a, b):
    return (
        jet_einsum('...ik,...jl->...ijkl', a, b)
        + jet_einsum('...jl,...ik->...ijkl', a, b)
        - jet_einsum('...il,...jk->...ijkl', a, b)
        - jet_einsum('...jk,...il->...ijkl', a, b)
    )


def curvature_at(s, f=None, order=None):
    """Gauss-equation curvature; ``order`` truncates the inputs (0 for values only)."""
    f = f or s.frame
    h = s.h if order is None else s.h.truncate(order)
    g = f.g.truncate(h.order)
    g_inv = f.g_inv.truncate(h.order)

    hh = jet_einsum('...ik,...jl->...ijkl', h, h)
    riemann = hh - jet_einsum('...ijkl->...ijlk', hh)
    ricci = jet_einsum('...ik,...ijkl->...jl', g_inv, riemann)
    scalar = jet_einsum('...jl,...jl->...', g_inv, ricci)
    schouten = 0.5 * (ricci - g * (scalar * (1.0 / 6.0)).expand(2))
    weyl = riemann - kulkarni_nomizu(schouten, g)
    einstein_lower = ricci - g * (0.5 * scalar).expand(2)
    einstein = jet_einsum('...ia,...ab,...bj->...ij', g_inv, einstein_lower, g_inv)
    return CurvatureData(riemann=riemann, ricci=ricci, scalar=scalar, schouten=schouten, weyl=weyl, einstein=einstein)


def _value(x):
    return x.value


def _trace_power(matrix, k):
    result = matrix
    for _ in range(k - 1):
        result = np.einsum('...ij,...jk->...ik', result, matrix)
    return np.einsum('...ii->...', result)


def scalar_curvature_jet(s):
    """R = 16 H^2 - |h|^2 as a jet of the same order as h."""
    h_sq = jet_einsum('...ij,...ji->...', s.shape_operator, s.shape_operator)
    return 16.0 * s.H * s.H - h_sq


def scalar_curvature_laplacian(s):
    if s.order < 4:
        raise InsufficientOrder(4, s.order)
    return laplacian(scalar_curvature_jet(s), s.gamma, s.g_inv)


def invariants_at(s, c=None):
    """The fourteen pointwise scalar densities; Q is NaN below order 4."""
    c = c or curvature_at(s, order=0)
    g_inv = s.g_inv.value
    S = s.shape_operator.value
    H = s.H.value
    S0 = S - H[..., None, None] * np.eye(4)
    grad_h = s.grad_h.value
    grad_H = s.grad_H.value

    h_sq = _trace_power(S, 2)
    h0_sq = _trace_power(S0, 2)
    det_h = np.linalg.det(S)
    weyl = c.weyl.value
    weyl_upper = np.einsum('...ia,...jb,...kc,...ld,...abcd->...ijkl', g_inv, g_inv, g_inv, g_inv, weyl, optimize=True)
    ricci = c.ricci.value
    ricci_mixed = np.einsum('...ia,...aj->...ij', g_inv, ricci)

    W2 = np.einsum('...ijkl,...ijkl->...', weyl, weyl_upper)
    if s.order >= 4:
        lap_R = _value(scalar_curvature_laplacian(s))
        Q = 6.0 * det_h - 0.25 * W2 - lap_R / 6.0
    else:
        Q = np.full(H.shape, np.nan)

    return InvariantVector(
        grad_h_sq=np.einsum('...cd,...ae,...bf,...cab,...def->...', g_inv, g_inv, g_inv, grad_h, grad_h, optimize=True),
        grad_H_sq=np.einsum('...ab,...a,...b->...', g_inv, grad_H, grad_H),
        tr_h4=_trace_power(S, 4),
        h_4=h_sq * h_sq,
        H_tr_h3=H * _trace_power(S, 3),
        H2_h2=H * H * h_sq,
        H4=H ** 4,
        det_h=det_h,
        h0_4=h0_sq * h0_sq,
        tr_h04=_trace_power(S0, 4),
        W2=W2,
        ric2=_trace_power(ricci_mixed, 2),
        R=c.scalar.value,
        Q=Q,
    )


def geometry(spec, points, order, flip=False):
    """Evaluate ``spec`` at chart points and return its shape tensors."""
    j = spec.evaluate(points, order)
    return shape_at(j, centroid=spec.centroid() if spec.closed else None, flip=flip)


# identities certified pointwise by the verification suite


def mean_curvature_vector(s):
    return s.n * s.H.expand(1)


def flux_identity_residual(s):
    """Normal-projected Laplacian of the mean-curvature vector against its divergence form.

    Returns the ambient residual vector and its local scale.
    """
    if s.order < 4:
        raise InsufficientOrder(4, s.order)
    g_inv, gamma, d_phi, n, H = s.g_inv, s.gamma, s.frame.d_phi, s.n, s.H
    mean_vector = mean_curvature_vector(s)
    grad_mean = jet_einsum('...jk,...Ak->...jA', g_inv, mean_vector.grad())
    normal_part = jet_einsum('...jA,...A->...j', grad_mean, n)
    projected = jet_einsum('...j,...A->...jA', normal_part, n)
    laplace_normal = jet_einsum('...A,...A->...', ambient_divergence(projected, gamma), n)
    h_sq = jet_einsum('...ij,...ji->...', s.shape_operator, s.shape_operator)
    lhs = n * laplace_normal.expand(1) + mean_vector * (h_sq - 8.0 * H * H).expand(1)

    h_upper = jet_einsum('...ja,...ab,...bk->...jk', g_inv, s.h, g_inv)
    weight = g_inv * (H * H).expand(2) - h_upper * H.expand(2)
    field = grad_mean - 2.0 * jet_einsum('...jk,...kA->...jA', weight, d_phi)
    rhs = ambient_divergence(field, gamma)

    scale = np.maximum(1.0, np.abs(lhs.value).max(axis=-1))
    return (lhs - rhs).value, scale


def flux_field_divergence(s):
    """nabla_j X^j and the expected normal density (Delta H + |h|^2 H - 8 H^3) n."""
    if s.order < 4:
        raise InsufficientOrder(4, s.order)
    divergence = ambient_divergence(s.X, s.gamma)
    H = s.H.truncate(divergence.order)
    h_sq = jet_einsum('...ij,...ji->...', s.shape_operator, s.shape_operator).truncate(divergence.order)
    density = s.lap_H + h_sq * H - 8.0 * H * H * H
    expected = s.n * density.expand(1)
    return divergence.value, expected.value


def einstein_identity_residual(s):
    """E^{ij} h_ij n - nabla_j (E^{ij} d_i Phi)."""
    if s.order < 4:
        raise InsufficientOrder(4, s.order)
    c = curvature_at(s)
    lhs = s.n * jet_einsum('...ij,...ij->...', c.einstein, s.h).expand(1)
    field = jet_einsum('...ij,...iA->...jA', c.einstein, s.frame.d_phi)
    rhs = ambient_divergence(field, s.gamma)
    scale = np.maximum(1.0, np.abs(lhs.value).max(axis=-1))
    return (lhs - rhs).value, scale


def einstein_divergence(s):
    """nabla_j E^{ij}, which vanishes by the contracted Bianchi identity."""
    c = curvature_at(s)
    return divergence_upper(c.einstein, s.gamma, 'uu').value


def codazzi_asymmetry(s):
    grad_h = s.grad_h.value
    return np.max(np.abs(grad_h - np.swapaxes(grad_h, -3, -2)), axis=(-3, -2, -1))
