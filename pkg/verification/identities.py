"""
The verification suite and the discovery of linear integral identities.

``run_suite`` walks four sections (pointwise, integral, noether, exterior)
and returns one :class:`~verification.reporting.VerificationReport` row per
registered identity.  Every row id is listed in ``SUITE_ROWS`` so that the
coverage of a report can be checked exactly; ``DISCOVERY_ROWS`` does the same
for ``run_discovery``.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.stats import special_ortho_group

from . import exterior
from .catalog import (
    Dilation,
    Ellipsoid,
    Inversion,
    MobiusImage,
    MobiusTransform,
    Sphere,
    TorusOfRevolution,
    mobius_apply,
    random_chart_points,
)
from .energies import (
    EA,
    EA_RECONCILED,
    EB,
    EB_PRINTED,
    EB_RECONCILED,
    EC,
    EWM,
    GAUSS_BONNET_FACTOR,
    EnergyPreset,
    double_divergence_term,
    e_mu_lambda_sigma,
    integrate_presets,
    sphere_closed_form,
)
from .exceptions import FamilyError, IllConditionedFamily, InsufficientOrder
from .jets import jet_einsum
from .noether import (
    ALGEBRAIC_ATOMS,
    TABLE_ATOMS,
    LagrangianSpec,
    e_alpha_beta,
    e_family,
    flux_field_check,
    get_lagrangian,
    muller_fields,
    noether_table,
    trace_checks,
    variational_sweep,
)
from .reporting import VerificationReport, failed_row, make_row
from .shape import (
    InvariantVector,
    codazzi_asymmetry,
    curvature_at,
    einstein_divergence,
    einstein_identity_residual,
    flux_identity_residual,
    geometry,
    invariants_at,
    scalar_curvature_laplacian,
)
from .tensors import covariant_derivative, divergence_upper, laplacian

logger = logging.getLogger(__name__)

POINTWISE_TOLERANCE = 1e-9
FLUX_TOLERANCE = 1e-7
TABLE_TOLERANCE = 1e-9
EXTERIOR_TOLERANCE = 1e-11
DERIVATIVE_TOLERANCE = 1e-10
FIT_TOLERANCE = 1e-10
VARIATION_TOLERANCE = 1e-5
INVARIANCE_TOLERANCE = 1e-4
GAUSS_BONNET_TOLERANCE = 1e-6
GAUSS_BONNET_GENERAL_TOLERANCE = 1e-4
CLOSED_FORM_TOLERANCE = 1e-6
FLAT_TOLERANCE = 1e-8
HELD_OUT_TOLERANCE = 1e-4
NULL_THRESHOLD = 1e-6
GAP_LIMIT = 1e-2
EXPECTED_NULLITY = 6
PIVOT_TOLERANCE = 1e-8
DENOMINATOR_LIMIT = exterior.DENOMINATOR_LIMIT

SECTIONS = ('pointwise', 'integral', 'noether', 'exterior')

GENERIC_ELLIPSOID = Ellipsoid((1.0, 1.3, 0.8, 1.1, 0.9))
REFERENCE_TORUS = TorusOfRevolution(2.0, 1.0)
CONFORMAL_TRANSFORM = MobiusTransform((Inversion((0.0, 0.0, 0.0, 0.0, 6.0)), Dilation(1.7)))
CLOSED_FORM_RADII = (0.5, 1.0, 2.0)


def _fraction(x):
    return Fraction(float(x)).limit_denominator(DENOMINATOR_LIMIT)


def _fractions(names, values):
    return {name: str(_fraction(v)) for name, v in zip(names, values)}


def _max(values):
    values = [float(v) for v in values]
    return max(values) if values else 0.0


def _base_family(spec):
    while isinstance(spec, MobiusImage):
        spec = spec.inner
    return spec.family


# registry


@dataclass(frozen=True)
class RowSpec:
    id: str
    location: str
    printed: bool = False
    optional: bool = False


@dataclass(frozen=True)
class PointwiseIdentity:
    """``target = sum coefficient * field`` at every sampled point."""

    key: str
    location: str
    target: str
    printed: dict
    reconciled: Optional[dict] = None
    recovery: Optional[tuple] = None

    def residual(self, fields, coefficients=None):
        coefficients = self.printed if coefficients is None else coefficients
        lhs = fields[self.target]
        rhs = 0.0 * lhs
        scale = np.abs(lhs)
        for name, c in coefficients.items():
            term = float(c) * fields[name]
            rhs = rhs + term
            scale = scale + np.abs(term)
        return float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, scale)))

    def recover(self, fields):
        """Least-squares coefficients over the printed support, rationalised."""
        names = self.recovery or tuple(self.printed)
        columns = np.stack([np.ravel(fields[name]) for name in names], axis=1)
        target = np.ravel(fields[self.target])
        weight = 1.0 / np.maximum(1.0, np.abs(target) + np.abs(columns).sum(axis=1))
        coefficients, _, rank, _ = linalg.lstsq(columns * weight[:, None], target * weight)
        fit = float(np.max(np.abs(columns @ coefficients - target) * weight))
        return _fractions(names, coefficients), fit, int(rank)


F = Fraction

POINTWISE_IDENTITIES = (
    PointwiseIdentity('scalar_curvature', "R = 16H^2 - |h|^2", 'R', {'H2': 16, 'h2': -1}),
    PointwiseIdentity('h0_norm', "|h0|^4 in terms of |h|^4, H^2|h|^2, H^4", 'h0_4',
                      {'h_4': 1, 'H2_h2': -8, 'H4': 16}),
    PointwiseIdentity('h0_quartic_trace', "Tr h0^4 in terms of Tr h^4, H Tr h^3, H^2|h|^2, H^4", 'tr_h04',
                      {'tr_h4': 1, 'H_tr_h3': -4, 'H2_h2': 6, 'H4': -12}),
    PointwiseIdentity('ricci_norm', "|Ric|^2 = Tr h^4 - 8H Tr h^3 + 16H^2|h|^2", 'ric2',
                      {'tr_h4': 1, 'H_tr_h3': -8, 'H2_h2': 16}),
    PointwiseIdentity('ricci_norm_traceless', "|Ric|^2 through Tr h0^4", 'ric2',
                      {'tr_h04': 1, 'H_tr_h3': -4, 'H2_h2': 10, 'H4': 12}),
    PointwiseIdentity('ricci_weyl', "|Ric|^2 = |W|^2/2 + c det h + R^2/3", 'ric2',
                      {'W2': F(1, 2), 'det_h': -3, 'R2': F(1, 3)},
                      {'W2': F(1, 2), 'det_h': -12, 'R2': F(1, 3)}),
    PointwiseIdentity('ricci_weyl_expanded', "|Ric|^2 with R^2/3 expanded through |h0|^4", 'ric2',
                      {'W2': F(1, 2), 'det_h': -3, 'H4': 80, 'H2_h2': -8, 'h0_4': F(1, 3)},
                      {'W2': F(1, 2), 'det_h': -12, 'H4': 80, 'H2_h2': -8, 'h0_4': F(1, 3)}),
    PointwiseIdentity('quartic_ricci_first', "|h|^4/4 - H Tr h^3 through |Ric|^2, unsimplified", 'quartic',
                      {'h0_4': F(1, 4), 'H2_h2': F(-1, 2), 'H4': -11, 'ric2': F(1, 4), 'tr_h04': F(-1, 4)},
                      {'h0_4': F(1, 4), 'H2_h2': F(-1, 2), 'H4': -7, 'ric2': F(1, 4), 'tr_h04': F(-1, 4)}),
    PointwiseIdentity('quartic_ricci', "|h|^4/4 - H Tr h^3 through |Ric|^2", 'quartic',
                      {'h0_4': F(1, 4), 'tr_h04': F(-1, 4), 'H2_h2': F(-1, 2), 'H4': -7, 'ric2': F(1, 4)}),
    PointwiseIdentity('quartic_weyl_intermediate', "|h|^4/4 - H Tr h^3 through |W|^2 and Tr h0^4", 'quartic',
                      {'W2': F(1, 8), 'det_h': F(-3, 4), 'h0_4': F(1, 3), 'tr_h04': F(-1, 4),
                       'H2_h2': F(-5, 2), 'H4': 13},
                      {'W2': F(1, 8), 'det_h': -3, 'h0_4': F(1, 3), 'tr_h04': F(-1, 4),
                       'H2_h2': F(-5, 2), 'H4': 13},
                      recovery=('det_h', 'h0_4', 'tr_h04', 'H2_h2', 'H4')),
    PointwiseIdentity('weyl_norm', "|W|^2 = 7/3 |h0|^4 - 4 Tr h0^4", 'W2',
                      {'h0_4': F(7, 3), 'tr_h04': -4}),
    PointwiseIdentity('quartic_weyl', "|h|^4/4 - H Tr h^3 through |W|^2 and |h0|^4", 'quartic',
                      {'W2': F(3, 16), 'det_h': F(-3, 4), 'h0_4': F(9, 8), 'H2_h2': F(-5, 2), 'H4': 13},
                      {'W2': F(3, 16), 'det_h': -3, 'h0_4': F(3, 16), 'H2_h2': F(-5, 2), 'H4': 13}),
    PointwiseIdentity('simons', "h^ij nabla_ij H from Simons' identity", 'hess_H_h',
                      {'h_lap_h': F(1, 4), 'H_tr_h3': -1, 'h_4': F(1, 4)}),
    PointwiseIdentity('simons_laplacian', "h^ij nabla_ij H through the Laplacian of |h|^2", 'hess_H_h',
                      {'lap_h2': F(1, 8), 'grad_h_sq': F(-1, 4), 'H_tr_h3': -1, 'h_4': F(1, 4)}),
    PointwiseIdentity('codazzi_contracted', "h^ij nabla_ij H through Codazzi-Mainardi", 'hess_H_h',
                      {'dd': 1, 'lap_H2': 2, 'grad_H_sq': -4}),
    PointwiseIdentity('scalar_laplacian', "Delta R / 8 from Simons and Codazzi", 'lap_R_8',
                      {'grad_H_sq': 4, 'grad_h_sq': F(-1, 4), 'H_tr_h3': -1, 'h_4': F(1, 4), 'dd': -1}),
    PointwiseIdentity('scalar_laplacian_expansion', "Delta R / 6 in invariants and the double divergence", 'lap_R_6',
                      {'grad_H_sq': F(16, 3), 'grad_h_sq': F(-1, 3), 'H2_h2': F(-10, 3), 'H4': F(52, 3),
                       'h0_4': F(3, 2), 'W2': F(1, 2), 'det_h': -1, 'dd': F(-4, 3)},
                      {'grad_H_sq': F(16, 3), 'grad_h_sq': F(-1, 3), 'H2_h2': F(-10, 3), 'H4': F(52, 3),
                       'h0_4': F(1, 4), 'W2': F(1, 4), 'det_h': -4, 'dd': F(-4, 3)}),
    PointwiseIdentity('q_expansion', "Q = E_B + 6 det h - 3/4 |W|^2 + 4/3 double divergence", 'Q',
                      {'grad_h_sq': F(1, 3), 'grad_H_sq': F(-16, 3), 'H2_h2': F(10, 3), 'H4': F(-52, 3),
                       'h0_4': F(-3, 2), 'det_h': 7, 'W2': F(-3, 4), 'dd': F(4, 3)},
                      {'grad_h_sq': F(1, 3), 'grad_H_sq': F(-16, 3), 'H2_h2': F(10, 3), 'H4': F(-52, 3),
                       'h0_4': F(1, 3), 'tr_h04': -1, 'det_h': 10, 'W2': F(-3, 4), 'dd': F(4, 3)}),
    PointwiseIdentity('reduction_tr_h4', "Tr h^4 rewritten in h0 and H", 'tr_h4',
                      {'tr_h04': 4, 'h0_4': F(-3, 2), 'det_h': 12, 'H2_h2': 12, 'H4': -56}),
    PointwiseIdentity('reduction_h4', "|h|^4 rewritten in h0 and H", 'h_4',
                      {'h0_4': 1, 'H2_h2': 8, 'H4': -16}),
    PointwiseIdentity('reduction_H_tr_h3', "H Tr h^3 rewritten in h0 and H", 'H_tr_h3',
                      {'det_h': 3, 'H2_h2': F(9, 2), 'H4': -17, 'h0_4': F(-3, 8), 'tr_h04': F(3, 4)}),
)

SHAPE_ROWS = (
    RowSpec('pointwise:codazzi_symmetry', "nabla_c h_ab totally symmetric"),
    RowSpec('pointwise:weyl_trace_free', "Weyl tensor totally trace-free"),
    RowSpec('pointwise:flux_identity', "normal Laplacian of the mean-curvature vector in divergence form"),
    RowSpec('pointwise:flux_field', "divergence of the redressing field X"),
    RowSpec('pointwise:einstein', "Einstein tensor contracted with h as a divergence"),
    RowSpec('pointwise:einstein_divergence', "contracted Bianchi identity"),
)


def _pointwise_rows():
    rows = []
    for identity in POINTWISE_IDENTITIES:
        rows.append(RowSpec(f'pointwise:{identity.key}', identity.location, printed=identity.reconciled is not None))
        if identity.reconciled is not None:
            rows.append(RowSpec(f'pointwise:{identity.key}:reconciled', identity.location + ", reconciled"))
    return tuple(rows) + SHAPE_ROWS


CONFORMAL_PRESETS = (
    ('EA', EA, True),
    ('EA_reconciled', EA_RECONCILED, False),
    ('EC', EC, False),
    ('E_1_0_0', e_mu_lambda_sigma(1.0, 0.0, 0.0), False),
    ('E_0_1_0', e_mu_lambda_sigma(0.0, 1.0, 0.0), False),
    ('EB', EB, False),
    ('EWm', EWM, False),
)

INTEGRAL_ROWS = (
    RowSpec('integral:gauss_bonnet', "6 int det h = 8 pi^2 chi on round spheres and tori"),
    RowSpec('integral:gauss_bonnet_general', "6 int det h = 8 pi^2 chi on ellipsoids and Moebius images", optional=True),
    RowSpec('integral:closed_form_EC', "E_C on round spheres = 96 pi^2"),
    RowSpec('integral:closed_form_EA', "E_A on round spheres = -88 pi^2 / 3"),
) + tuple(
    RowSpec(f'integral:conformal:{key}', f"conformal invariance of {key} under inversion and dilation", printed=printed)
    for key, _, printed in CONFORMAL_PRESETS
) + (
    RowSpec('integral:eb_printed', "int E_B = 1/2 int |W|^2 with the printed E_B", printed=True),
    RowSpec('integral:eb_printed_value', "printed E_B on the unit sphere = -8 pi^2"),
    RowSpec('integral:eb_reconciled', "int E_B = 1/2 int |W|^2 with the reconciled E_B"),
    RowSpec('integral:eb_conformally_flat', "1/2 int |W|^2 vanishes on conformally flat surfaces"),
    RowSpec('integral:eb_positive', "1/2 int |W|^2 > 0 on a generic ellipsoid"),
)

TRACE_NAMES = {
    'E_C': ('T_algebraic', 'F_algebraic', 'T_grad_h'),
    'E_family': ('T_algebraic', 'F_algebraic', 'T_grad_H', 'F_grad_H', 'T_total', 'F_total'),
}

VARIATION_LAGRANGIANS = ('E_C', 'E_family', 'H2_h2')

NOETHER_ROWS = tuple(
    RowSpec(f'noether:table:{atom}', f"stress and F table row for {atom}") for atom in TABLE_ATOMS
) + (
    RowSpec('noether:det_F_printed', "F vanishes for det h", printed=True),
    RowSpec('noether:det_F_cofactor', "F of det h is the cofactor of the shape operator"),
    RowSpec('noether:det_T', "stress of det h vanishes"),
    RowSpec('noether:det_F_divergence', "cofactor of the shape operator is divergence free"),
    RowSpec('noether:det_current', "translation current of det h vanishes"),
) + tuple(
    RowSpec(f'noether:trace:{family}:{name}', f"trace formula {name} for {family}")
    for family, names in TRACE_NAMES.items() for name in names
) + (
    RowSpec('noether:T_symmetric', "stress symmetric when K is zero or pure trace"),
    RowSpec('noether:T_antisymmetric_grad_h', "antisymmetric stress of |grad h|^2 = -6 (Delta h . h)^[ab]"),
) + tuple(
    RowSpec(f'noether:variation:{name}', f"first variation of {name} against the current", optional=True)
    for name in VARIATION_LAGRANGIANS
)

EXTERIOR_ROWS = (
    RowSpec('exterior:hodge_squared', "** = (-1)^{p(4-p)}"),
    RowSpec('exterior:hodge_isometry', "* is an isometry"),
    RowSpec('exterior:hodge_of_one', "*1 = sqrt(det g) volume form"),
    RowSpec('exterior:ambient_adjointness', "<A -| B, C> = <A, B ^ C> in R^5"),
    RowSpec('exterior:parameter_adjointness', "<A -| B, C> = <A, C ^ B> on the chart"),
    RowSpec('exterior:graded_antisymmetry', "a ^ b = (-1)^{pq} b ^ a"),
    RowSpec('exterior:d_squared', "d d = 0"),
    RowSpec('exterior:d_eta', "d eta = 0"),
    RowSpec('exterior:flat_laplacian', "d* d + d d* on a flat chart"),
    RowSpec('exterior:contraction_first', "eta contracted with C returns A"),
    RowSpec('exterior:contraction_second_printed', "C through bullet contractions, printed coefficients", printed=True),
    RowSpec('exterior:contraction_second_derived', "C through bullet contractions, derived coefficients", printed=True),
    RowSpec('exterior:contraction_second_recovered', "C through bullet contractions, recovered coefficients"),
    RowSpec('exterior:rotation_invariance', "A, B and |C| invariant under ambient rotations"),
    RowSpec('exterior:bullet_eta_normal', "eta^jk . (n ^ grad_i Phi)"),
    RowSpec('exterior:traceless_h0', "contraction with a traceless h0"),
    RowSpec('exterior:traceless_h0_cubed', "contraction with h0^3"),
    RowSpec('exterior:trace_contraction', "eta -| . (n ^ d Phi) = -3 (n ^ grad Phi)"),
    RowSpec('exterior:normal_bullet_tangent', "(n ^ grad_i Phi) . grad_j Phi = -g_ij n"),
    RowSpec('exterior:traceless_h0_tangent', "tangential contraction with a traceless h0"),
    RowSpec('exterior:traceless_h0_cubed_tangent', "tangential contraction with h0^3"),
    RowSpec('exterior:lemma_dot', "eta -| . u unchanged by the h0 correction"),
    RowSpec('exterior:lemma_bullet_printed', "eta -| . u + 3u unchanged by the h0 correction", printed=True),
    RowSpec('exterior:lemma_bullet_recovered', "bullet of the h0 correction with the recovered multiplier"),
    RowSpec('exterior:lemma_tangent', "u -| . d Phi unchanged by the h0 correction"),
    RowSpec('exterior:p_round_trip', "P inverse reconstructs l"),
    RowSpec('exterior:p_injectivity', "l -> P has full rank"),
    RowSpec('exterior:symmetric_contraction', "symmetric L-contraction vanishes"),
    RowSpec('exterior:df_explicit', "d f -| . d Phi explicit form"),
    RowSpec('exterior:df_normal_printed', "normal coefficient of n Delta H, printed", printed=True),
    RowSpec('exterior:df_normal_recovered', "normal coefficient of n Delta H, recovered"),
)

SUITE_ROWS = {row.id: row for row in _pointwise_rows() + INTEGRAL_ROWS + NOETHER_ROWS + EXTERIOR_ROWS}

DISCOVERY_ROWS = {row.id: row for row in (
    RowSpec('discovery:nullspace_dimension', "dimension of the integral nullspace"),
    RowSpec('discovery:nullspace_basis', "rational echelon basis of the integral nullspace"),
    RowSpec('discovery:gauss_bonnet', "6 int det h - 8 pi^2 chi = 0"),
    RowSpec('discovery:corollary_gradient_pair', "int |grad h|^2 - 16 int |grad H|^2 identity, gradient pair"),
    RowSpec('discovery:corollary_printed', "int |grad h|^2 - 16 int |grad H|^2 identity, printed right side",
            printed=True),
    RowSpec('discovery:weyl_norm', "int |W|^2 = 7/3 int |h0|^4 - 4 int Tr h0^4"),
    RowSpec('discovery:held_out', "recovered identities on held-out surfaces"),
    RowSpec('discovery:eb_fit', "E_B fitted to 1/2 int |W|^2 across the family"),
    RowSpec('discovery:eb_coefficients', "fitted E_B coefficients"),
    RowSpec('discovery:eb_held_out', "fitted E_B on held-out surfaces"),
    RowSpec('discovery:eb_printed_sphere', "printed E_B on the round sphere", printed=True),
)}


def coverage_problems(report, registry=None, sections=SECTIONS):
    """Registered rows missing from ``report`` and rows it carries that are not registered."""
    registry = SUITE_ROWS if registry is None else registry
    prefixes = tuple(f'{section}:' for section in sections)
    expected = {rid for rid, spec in registry.items() if rid.startswith(prefixes) and not spec.optional}
    present = set(report.ids)
    problems = [f"missing row {rid}" for rid in sorted(expected - present)]
    problems += [f"unregistered row {rid}" for rid in sorted(present - set(registry))]
    return problems


class RowCollector:
    """Builds rows for one section; a check that raises is recorded as a failed row."""

    def __init__(self, registry):
        self.registry = registry
        self.rows = []

    def check(self, row_id, compute, surfaces=()):
        spec = self.registry[row_id]
        try:
            outcome = compute()
            row = make_row(row_id, spec.location, printed=spec.printed, surfaces=surfaces, **outcome)
        except Exception as e:
            row = failed_row(row_id, spec.location, e, surfaces, spec.printed)
        self.rows.append(row)
        return row

    def fail(self, row_ids, error, surfaces=()):
        for row_id in row_ids:
            spec = self.registry[row_id]
            self.rows.append(failed_row(row_id, spec.location, error, surfaces, spec.printed))


# pointwise section


def pointwise_fields(s):
    """Scalar fields entering the pointwise identities; needs jets of order 4."""
    if s.order < 4:
        raise InsufficientOrder(4, s.order)
    c = curvature_at(s, order=0)
    inv = invariants_at(s, c)
    fields = {name: inv[name] for name in InvariantVector.names()}

    S = s.shape_operator.value
    H = s.H.value
    h_sq = np.einsum('...ij,...ji->...', S, S)
    h_up = S @ s.g_inv.value
    hess_H = covariant_derivative(s.grad_H, s.gamma, 'd').value
    h_sq_jet = jet_einsum('...ij,...ji->...', s.shape_operator, s.shape_operator)
    lap_R = scalar_curvature_laplacian(s).value

    fields.update(
        H2=H * H,
        h2=h_sq,
        R2=inv.R * inv.R,
        quartic=0.25 * inv.h_4 - inv.H_tr_h3,
        lap_R_8=lap_R / 8.0,
        lap_R_6=lap_R / 6.0,
        dd=double_divergence_term(s),
        hess_H_h=np.einsum('...ij,...ij->...', h_up, hess_H),
        h_lap_h=np.einsum('...ij,...ij->...', h_up, s.lap_h.value),
        lap_h2=laplacian(h_sq_jet, s.gamma, s.g_inv).value,
        lap_H2=laplacian(s.H * s.H, s.gamma, s.g_inv).value,
    )
    return fields


def _concatenate(parts):
    return {key: np.concatenate([np.ravel(p[key]) for p in parts]) for key in parts[0]}


def _weyl_trace(s):
    c = curvature_at(s, order=0)
    trace = np.einsum('...ik,...ijkl->...jl', s.g_inv.value, c.weyl.value)
    scale = np.maximum(1.0, np.abs(c.riemann.value).max(axis=(-4, -3, -2, -1)))
    return float(np.max(np.abs(trace).max(axis=(-2, -1)) / scale))


def _shape_residuals(s):
    grad_h = s.grad_h.value
    h = s.h.value
    flux, flux_scale = flux_identity_residual(s)
    einstein, einstein_scale = einstein_identity_residual(s)
    bianchi_scale = max(1.0, float(np.max(np.abs(grad_h))) * max(1.0, float(np.max(np.abs(h)))))
    return {
        'pointwise:codazzi_symmetry': float(np.max(codazzi_asymmetry(s) / np.maximum(1.0, np.abs(grad_h).max(
            axis=(-3, -2, -1))))),
        'pointwise:weyl_trace_free': _weyl_trace(s),
        'pointwise:flux_identity': float(np.max(np.abs(flux).max(axis=-1) / flux_scale)),
        'pointwise:flux_field': float(np.max(flux_field_check(s))),
        'pointwise:einstein': float(np.max(np.abs(einstein).max(axis=-1) / einstein_scale)),
        'pointwise:einstein_divergence': float(np.max(np.abs(einstein_divergence(s)))) / bianchi_scale,
    }


SHAPE_TOLERANCES = {
    'pointwise:codazzi_symmetry': POINTWISE_TOLERANCE,
    'pointwise:weyl_trace_free': POINTWISE_TOLERANCE,
    'pointwise:flux_identity': FLUX_TOLERANCE,
    'pointwise:flux_field': FLUX_TOLERANCE,
    'pointwise:einstein': FLUX_TOLERANCE,
    'pointwise:einstein_divergence': FLUX_TOLERANCE,
}


def pointwise_section(surfaces, count, rng):
    rows = RowCollector(SUITE_ROWS)
    labels = [s.label for s in surfaces]
    ids = [rid for rid in SUITE_ROWS if rid.startswith('pointwise:')]
    try:
        parts, shape_residuals = [], {}
        for spec in surfaces:
            s = geometry(spec, random_chart_points(spec.chart, count, rng), 4)
            parts.append(pointwise_fields(s))
            for key, value in _shape_residuals(s).items():
                shape_residuals[key] = max(shape_residuals.get(key, 0.0), value)
            logger.debug(f"Sampled {count} pointwise fields on {spec.label}")
        fields = _concatenate(parts)
    except Exception as e:
        rows.fail(ids, e, labels)
        return rows.rows

    for identity in POINTWISE_IDENTITIES:
        row_id = f'pointwise:{identity.key}'

        def printed_outcome(identity=identity):
            residual = identity.residual(fields)
            outcome = {'residual': residual, 'tolerance': POINTWISE_TOLERANCE}
            if identity.reconciled is not None and residual > POINTWISE_TOLERANCE:
                recovered, fit, rank = identity.recover(fields)
                outcome.update(recovered=recovered, note=f"least-squares fit {fit:.2e}, rank {rank}")
            return outcome

        rows.check(row_id, printed_outcome, labels)
        if identity.reconciled is not None:
            rows.check(f'{row_id}:reconciled', lambda identity=identity: {
                'residual': identity.residual(fields, identity.reconciled), 'tolerance': POINTWISE_TOLERANCE,
            }, labels)

    for row_id, tolerance in SHAPE_TOLERANCES.items():
        rows.check(row_id, lambda row_id=row_id, tolerance=tolerance: {
            'residual': shape_residuals[row_id], 'tolerance': tolerance,
        }, labels)
    return rows.rows


# integral section


def _integrals(spec, presets, grid, chunk_size):
    results = integrate_presets(spec, list(presets.values()), grid, chunk_size)
    return dict(zip(presets, results))


def _relative(value, expected):
    return abs(value - expected) / max(1.0, abs(expected))


def gauss_bonnet_outcome(results, tolerance):
    """Row outcome for ``(spec, IntegralResult)`` pairs: relative error, absolute where chi = 0."""
    fine, coarse, notes = [], [], []
    for spec, result in results:
        expected = GAUSS_BONNET_FACTOR * spec.euler_char
        fine.append(_relative(result.value, expected))
        coarse.append(_relative(result.coarse, expected))
        notes.append(f"{spec.label}: {result.value:.9g} vs {expected:.9g}")
    return {'residual': _max(fine), 'tolerance': tolerance, 'grid': max(r.grid for _, r in results),
            'coarse': _max(coarse), 'note': '; '.join(notes)}


def integral_section(surfaces, grid, chunk_size):
    rows = RowCollector(SUITE_ROWS)
    closed = [spec for spec in surfaces if spec.closed]
    labels = [spec.label for spec in closed]
    gauss_bonnet = e_mu_lambda_sigma(0.0, 0.0, 6.0)
    survey_presets = {'GB': gauss_bonnet, 'EB_printed': EB_PRINTED, 'EB_reconciled': EB_RECONCILED, 'EB': EB}

    surveys = {}

    def survey(spec):
        if spec.label not in surveys:
            surveys[spec.label] = _integrals(spec, survey_presets, grid, chunk_size)
        return surveys[spec.label]

    strict = [spec for spec in closed if isinstance(spec, (Sphere, TorusOfRevolution))]
    general = [spec for spec in closed if spec not in strict]
    strict = strict or [Sphere(1.0), REFERENCE_TORUS]

    rows.check('integral:gauss_bonnet',
               lambda: gauss_bonnet_outcome([(s, survey(s)['GB']) for s in strict], GAUSS_BONNET_TOLERANCE),
               [spec.label for spec in strict])
    if general:
        rows.check('integral:gauss_bonnet_general',
                   lambda: gauss_bonnet_outcome([(s, survey(s)['GB']) for s in general],
                                                GAUSS_BONNET_GENERAL_TOLERANCE),
                   [spec.label for spec in general])

    spheres = {}

    def sphere_survey(radius):
        if radius not in spheres:
            spheres[radius] = _integrals(Sphere(radius), {'EC': EC, 'EA': EA, 'EB_printed': EB_PRINTED, 'EB': EB},
                                         grid, chunk_size)
        return spheres[radius]

    for key, preset in (('EC', EC), ('EA', EA)):
        def closed_form_row(key=key, preset=preset):
            fine, coarse = [], []
            for radius in CLOSED_FORM_RADII:
                result = sphere_survey(radius)[key]
                expected = sphere_closed_form(preset, radius)
                fine.append(abs(result.value - expected) / abs(expected))
                coarse.append(abs(result.coarse - expected) / abs(expected))
            return {'residual': _max(fine), 'tolerance': CLOSED_FORM_TOLERANCE, 'grid': grid, 'coarse': _max(coarse)}

        rows.check(f'integral:closed_form_{key}', closed_form_row, [f"sphere({r:g})" for r in CLOSED_FORM_RADII])

    conformal = {}
    image_label = f"mobius[{CONFORMAL_TRANSFORM}]({GENERIC_ELLIPSOID.label})"
    presets = {key: preset for key, preset, _ in CONFORMAL_PRESETS}

    def conformal_survey():
        if not conformal:
            image = mobius_apply(CONFORMAL_TRANSFORM, GENERIC_ELLIPSOID)
            conformal['base'] = _integrals(GENERIC_ELLIPSOID, presets, grid, chunk_size)
            conformal['image'] = _integrals(image, presets, grid, chunk_size)
        return conformal['base'], conformal['image']

    for key, _, _ in CONFORMAL_PRESETS:
        def conformal_row(key=key):
            base, image = conformal_survey()
            b, i = base[key], image[key]
            scale = max(1.0, abs(b.value))
            return {'residual': abs(i.value - b.value) / scale, 'tolerance': INVARIANCE_TOLERANCE, 'grid': grid,
                    'coarse': abs(i.coarse - b.coarse) / scale,
                    'note': f"{b.value:.9g} -> {i.value:.9g}"}

        rows.check(f'integral:conformal:{key}', conformal_row, [GENERIC_ELLIPSOID.label, image_label])

    def weyl_match(key):
        fine, coarse = [], []
        for spec in closed:
            values = survey(spec)
            target = values['EB']
            scale = max(1.0, abs(target.value))
            fine.append(abs(values[key].value - target.value) / scale)
            coarse.append(abs(values[key].coarse - target.coarse) / scale)
        return {'residual': _max(fine), 'tolerance': HELD_OUT_TOLERANCE, 'grid': grid, 'coarse': _max(coarse)}

    rows.check('integral:eb_printed', lambda: weyl_match('EB_printed'), labels)

    def eb_printed_value():
        value = sphere_survey(1.0)['EB_printed'].value
        expected = -GAUSS_BONNET_FACTOR
        return {'residual': abs(value - expected) / abs(expected), 'tolerance': 1e-5, 'grid': grid,
                'note': f"int E_B(printed) on sphere(1) = {value:.9g}"}

    rows.check('integral:eb_printed_value', eb_printed_value, ['sphere(1)'])
    rows.check('integral:eb_reconciled', lambda: weyl_match('EB_reconciled'), labels)

    flat = [spec for spec in closed if _base_family(spec) in ('sphere', 'torus')]

    def conformally_flat():
        values = [abs(sphere_survey(1.0)['EB'].value)]
        values += [abs(survey(spec)['EB'].value) for spec in flat]
        return {'residual': _max(values), 'tolerance': FLAT_TOLERANCE, 'grid': grid}

    rows.check('integral:eb_conformally_flat', conformally_flat, ['sphere(1)'] + [spec.label for spec in flat])

    def positive():
        result = conformal_survey()[0]['EB']
        return {'residual': 0.0 if result.value > result.error else 1.0, 'tolerance': 0.0, 'grid': grid,
                'note': f"1/2 int |W|^2 = {result.value:.9g} (+/- {result.error:.2e})"}

    rows.check('integral:eb_positive', positive, [GENERIC_ELLIPSOID.label])
    return rows.rows


# noether section


def _scaled_max(difference, reference, axes):
    scale = np.maximum(1.0, np.abs(reference).max(axis=axes))
    return float(np.max(np.abs(difference).max(axis=axes) / scale))


def _cofactor(S):
    """adj(S) = -S^3 + e1 S^2 - e2 S + e3 I for 4 x 4 matrices."""
    S2 = S @ S
    S3 = S2 @ S
    p1 = np.einsum('...ii->...', S)
    p2 = np.einsum('...ii->...', S2)
    p3 = np.einsum('...ii->...', S3)
    e2 = 0.5 * (p1 * p1 - p2)
    e3 = (p1 ** 3 - 3.0 * p1 * p2 + 2.0 * p3) / 6.0
    return -S3 + p1[..., None, None] * S2 - e2[..., None, None] * S + e3[..., None, None] * np.eye(4)


def _atom(atom):
    return LagrangianSpec(atom, {atom: 1.0})


def _table_residual(atom, s):
    fields = muller_fields(_atom(atom), s)
    T, F_table = noether_table(atom, s)
    return max(_scaled_max(fields.T.value - T, T, (-2, -1)), _scaled_max(fields.F.value - F_table, F_table, (-2, -1)))


def _det_residuals(s):
    fields = muller_fields(_atom('det_h'), s)
    F_value = fields.F.value
    cofactor = _cofactor(s.shape_operator.value) @ s.g_inv.value
    divergence = divergence_upper(jet_einsum('...ab->...ba', fields.F), s.gamma, 'uu').value
    scale = max(1.0, float(np.max(np.abs(cofactor))))
    return {
        'noether:det_F_printed': float(np.max(np.abs(F_value))) / scale,
        'noether:det_F_cofactor': _scaled_max(F_value - cofactor, cofactor, (-2, -1)),
        'noether:det_T': float(np.max(np.abs(fields.T.value))) / scale,
        'noether:det_F_divergence': float(np.max(np.abs(divergence))) / max(1.0, float(np.max(np.abs(s.grad_h.value)))),
    }


def _antisymmetric_grad_h(s):
    fields = muller_fields(_atom('grad_h_sq'), s)
    g_inv = s.g_inv.value
    product = g_inv @ s.lap_h.value @ s.shape_operator.value @ g_inv
    expected = -3.0 * (product - np.swapaxes(product, -1, -2))
    return _scaled_max(fields.T_antisymmetric - expected, fields.T.value, (-2, -1))


def suite_lagrangians():
    return {'E_C': e_alpha_beta(-6.0, 60.0), 'E_family': e_family(1.0, 2.0, 3.0, 0.5, -0.25)}


def noether_section(surfaces, count, rng, variation=False, variation_grid=12, chunk_size=2048):
    rows = RowCollector(SUITE_ROWS)
    labels = [spec.label for spec in surfaces]
    ids = [rid for rid, spec in SUITE_ROWS.items()
           if rid.startswith('noether:') and not rid.startswith('noether:variation:')]
    try:
        shapes = [geometry(spec, random_chart_points(spec.chart, count, rng), 4) for spec in surfaces]
    except Exception as e:
        rows.fail(ids, e, labels)
        return rows.rows

    for atom in TABLE_ATOMS:
        rows.check(f'noether:table:{atom}', lambda atom=atom: {
            'residual': _max(_table_residual(atom, s) for s in shapes), 'tolerance': TABLE_TOLERANCE,
        }, labels)

    det = {}

    def det_residual(key):
        if not det:
            for s in shapes:
                for name, value in _det_residuals(s).items():
                    det[name] = max(det.get(name, 0.0), value)
        return {'residual': det[key], 'tolerance': TABLE_TOLERANCE}

    for key in ('noether:det_F_printed', 'noether:det_F_cofactor', 'noether:det_T', 'noether:det_F_divergence'):
        rows.check(key, lambda key=key: det_residual(key), labels)

    def det_current():
        worst = 0.0
        for spec in surfaces:
            s = geometry(spec, random_chart_points(spec.chart, 4, rng), 5)
            V = muller_fields(_atom('det_h'), s).V.value
            worst = max(worst, float(np.max(np.abs(V))) / max(1.0, float(np.max(np.abs(s.grad_h.value)))))
        return {'residual': worst, 'tolerance': TABLE_TOLERANCE}

    rows.check('noether:det_current', det_current, labels)

    lagrangians = suite_lagrangians()
    for family, names in TRACE_NAMES.items():
        traces = {}

        def trace_residual(name, family=family, traces=traces):
            if not traces:
                for s in shapes:
                    for check in trace_checks(lagrangians[family], s):
                        key = check.name.removeprefix('trace_')
                        traces[key] = max(traces.get(key, 0.0), check.residual)
            return {'residual': traces[name], 'tolerance': FLUX_TOLERANCE}

        for name in names:
            rows.check(f'noether:trace:{family}:{name}', lambda name=name, trace_residual=trace_residual:
                       trace_residual(name), labels)

    def symmetric():
        worst, atoms = 0.0, ALGEBRAIC_ATOMS + ('grad_H_sq',)
        for s in shapes:
            for atom in atoms:
                fields = muller_fields(_atom(atom), s)
                worst = max(worst, _scaled_max(fields.T_antisymmetric, fields.T.value, (-2, -1)))
        return {'residual': worst, 'tolerance': TABLE_TOLERANCE}

    rows.check('noether:T_symmetric', symmetric, labels)
    rows.check('noether:T_antisymmetric_grad_h', lambda: {
        'residual': _max(_antisymmetric_grad_h(s) for s in shapes), 'tolerance': TABLE_TOLERANCE,
    }, labels)

    if variation:
        variations = dict(lagrangians, H2_h2=get_lagrangian('H2_h2'))
        for name in VARIATION_LAGRANGIANS:
            def variation_row(name=name):
                results = variational_sweep(REFERENCE_TORUS, variations[name], np.eye(5), n=variation_grid,
                                            chunk_size=chunk_size)
                return {'residual': _max(r.deviation for r in results), 'tolerance': VARIATION_TOLERANCE,
                        'grid': variation_grid,
                        'note': '; '.join(f"{r.finite_difference:.6g}/{r.current_integral:.6g}" for r in results)}

            rows.check(f'noether:variation:{name}', variation_row, [REFERENCE_TORUS.label])
    return rows.rows


# exterior section


def _rotation_residual(frame, L, rng):
    rotation = special_ortho_group.rvs(5, random_state=rng)
    rotated = exterior.contraction_suite(frame.rotated(rotation), exterior.MultiForm(2, 1, L.components @ rotation.T))
    original = exterior.contraction_suite(frame, L)
    worst = 0.0
    for name in ('A', 'B'):
        a, b = getattr(original, name).components, getattr(rotated, name).components
        worst = max(worst, _scaled_max(a - b, a, (-2, -1)))
    norms = original.C.norm(), rotated.C.norm()
    return max(worst, float(np.max(np.abs(norms[0] - norms[1]) / np.maximum(1.0, norms[0]))))


def exterior_section(samples, rng):
    rows = RowCollector(SUITE_ROWS)
    labels = [GENERIC_ELLIPSOID.label]
    ids = [rid for rid in SUITE_ROWS if rid.startswith('exterior:')]
    try:
        frame = exterior.random_frames(GENERIC_ELLIPSOID, samples, rng)
        structural = exterior.structural_checks(frame, rng)
    except Exception as e:
        rows.fail(ids, e, labels)
        return rows.rows

    def exact(value, tolerance=EXTERIOR_TOLERANCE, **extra):
        return dict({'residual': value, 'tolerance': tolerance}, **extra)

    rows.check('exterior:hodge_squared', lambda: exact(
        _max(v for k, v in structural.items() if k.startswith('hodge_squared'))), labels)
    rows.check('exterior:hodge_isometry', lambda: exact(
        _max(v for k, v in structural.items() if k.startswith('hodge_isometry'))), labels)
    for key in ('hodge_of_one', 'ambient_adjointness', 'parameter_adjointness', 'graded_antisymmetry'):
        rows.check(f'exterior:{key}', lambda key=key: exact(structural[key]), labels)

    derivatives = {}

    def derivative(key):
        if not derivatives:
            derivatives.update(exterior.derivative_checks(GENERIC_ELLIPSOID, rng, count=min(samples, 32)))
        return exact(derivatives[key], DERIVATIVE_TOLERANCE)

    for key in ('d_squared', 'd_eta', 'flat_laplacian'):
        rows.check(f'exterior:{key}', lambda key=key: derivative(key), labels)

    L = exterior.MultiForm.random(2, 1, rng, frame.batch)
    contraction = {}

    def suite():
        if not contraction:
            contraction['suite'] = exterior.contraction_suite(frame, L)
        return contraction['suite']

    def scale_of(target):
        return max(1.0, float(np.max(np.abs(target))))

    rows.check('exterior:contraction_first', lambda: exact(
        float(np.max(np.abs(suite().first_residual))) / scale_of(suite().A.components)), labels)

    def second(coefficients):
        s = suite()
        return exact(float(np.max(np.abs(s.second_residual(coefficients)))) / scale_of(s.C.components))

    rows.check('exterior:contraction_second_printed',
               lambda: second(exterior.PRINTED_SECOND_IDENTITY), labels)
    rows.check('exterior:contraction_second_derived',
               lambda: second(exterior.DERIVED_SECOND_IDENTITY), labels)

    def recovered():
        coefficients, rational, fit, rank = suite().recover()
        return exact(fit, FIT_TOLERANCE, recovered={
            name: str(r) for name, r in zip(exterior.SECOND_IDENTITY_TERMS, rational)
        }, note=f"rank {rank}")

    rows.check('exterior:contraction_second_recovered', recovered, labels)
    rows.check('exterior:rotation_invariance', lambda: exact(_rotation_residual(frame, L, rng)), labels)

    h0 = exterior.random_traceless(frame, rng)
    u0 = exterior.MultiForm.random(1, 2, rng, frame.batch)
    lemmas = {}

    def lemma(key):
        if not lemmas:
            lemmas.update(exterior.traceless_contraction_checks(frame, h0, u0, mu=0.7, lam=-1.3))
            lemmas['scale'] = max(1.0, float(np.max(np.abs(h0)))) ** 3
        return lemmas[key] / lemmas['scale']

    for key in ('bullet_eta_normal', 'traceless_h0', 'traceless_h0_cubed', 'trace_contraction',
                'normal_bullet_tangent', 'traceless_h0_tangent', 'traceless_h0_cubed_tangent',
                'lemma_dot', 'lemma_bullet_printed', 'lemma_tangent'):
        rows.check(f'exterior:{key}', lambda key=key: exact(lemma(key)), labels)

    def multiplier():
        value = lemma('lemma_bullet_recovered')
        kappa = lemmas['lemma_bullet_multiplier']
        return exact(value, recovered={'multiplier': str(_fraction(kappa)) if math.isfinite(kappa) else 'nan'})

    rows.check('exterior:lemma_bullet_recovered', multiplier, labels)

    def round_trip():
        ell = rng.standard_normal(frame.batch + (4, 5))
        back = exterior.p_inverse(exterior.p_operator(ell, frame), frame)
        return exact(float(np.max(np.abs(back - ell))) / scale_of(ell))

    rows.check('exterior:p_round_trip', round_trip, labels)

    def injectivity():
        bound = float(np.min(exterior.p_operator_bound(frame)))
        return exact(0.0 if bound > 1e-8 else 1.0, 0.0, note=f"smallest singular value {bound:.3e}")

    rows.check('exterior:p_injectivity', injectivity, labels)

    returns = {}

    def return_equations():
        if not returns:
            count = min(samples, 64)
            s = geometry(GENERIC_ELLIPSOID, random_chart_points(GENERIC_ELLIPSOID.chart, count, rng), 4)
            returns.update(exterior.return_equation_checks(s, rng))
        return returns

    rows.check('exterior:symmetric_contraction', lambda: exact(return_equations()['symmetric_contraction']), labels)
    rows.check('exterior:df_explicit', lambda: exact(return_equations()['df_explicit'], FLUX_TOLERANCE), labels)
    rows.check('exterior:df_normal_printed', lambda: exact(
        abs(return_equations()['normal_coefficient'] + 1.0), FLUX_TOLERANCE), labels)

    def normal_recovered():
        r = return_equations()
        c = r['normal_coefficient']
        residual = np.abs(r['normal_part'] - c * r['lap_H']) / np.maximum(1.0, np.abs(r['lap_H']))
        return exact(float(np.max(residual)), FLUX_TOLERANCE, recovered={'normal_coefficient': str(_fraction(c))})

    rows.check('exterior:df_normal_recovered', normal_recovered, labels)
    return rows.rows


# suite


def run_suite(config, sections=SECTIONS, meta=None):
    """Run the requested sections for ``config`` and return the report.

    Each section draws from its own generator seeded by (seed, section index),
    so dropping a section does not change the residuals of the others.
    """
    surfaces = config.surface_specs
    report = VerificationReport(dict(meta or {}))
    for index, section in enumerate(SECTIONS):
        if section not in sections:
            continue
        rng = np.random.default_rng([config.seed, index])
        logger.info(f"Running {section} checks on {', '.join(s.label for s in surfaces)}")
        if section == 'pointwise':
            rows = pointwise_section(surfaces, config.random_points, rng)
        elif section == 'integral':
            rows = integral_section(surfaces, config.grid, config.chunk_size)
        elif section == 'noether':
            count = max(8, config.random_points // 5)
            rows = noether_section(surfaces, count, rng, config.variation, config.variation_grid, config.chunk_size)
        else:
            rows = exterior_section(config.exterior_samples, rng)
        report.extend(rows)
    if config.tolerance is not None:
        report = report.with_tolerance(config.tolerance)
    problems = coverage_problems(report, SUITE_ROWS, sections)
    if problems:
        logger.warning(f"Report coverage: {'; '.join(problems)}")
    logger.info(f"Suite finished: {report.passed} passed, {report.failed} failed")
    return report


# discovery

BASIS_FIELDS = ('grad_h_sq', 'grad_H_sq', 'tr_h4', 'h_4', 'H_tr_h3', 'H2_h2', 'H4', 'det_h', 'h0_4', 'tr_h04', 'W2')
COLUMNS = BASIS_FIELDS + ('chi',)
BASIS_PRESETS = tuple(EnergyPreset(name, {name: 1.0}) for name in BASIS_FIELDS)
HELD_OUT = (GENERIC_ELLIPSOID, TorusOfRevolution(2.2, 0.7))


@dataclass(frozen=True)
class BasisIntegralVector:
    """The eleven basis integrals of a closed surface with their two-grid error estimates."""

    label: str
    values: np.ndarray
    errors: np.ndarray
    euler_char: int

    def __getitem__(self, name):
        if name == 'chi':
            return math.pi ** 2 * self.euler_char
        return float(self.values[BASIS_FIELDS.index(name)])

    def row(self):
        return np.append(self.values, math.pi ** 2 * self.euler_char)

    def combination(self, coefficients):
        """(sum c * I, sum |c * I|) over named columns."""
        terms = [float(c) * self[name] for name, c in coefficients.items()]
        return sum(terms), sum(abs(t) for t in terms)

    def relative_residual(self, coefficients):
        total, magnitude = self.combination(coefficients)
        return abs(total) / magnitude if magnitude > 0 else 0.0


def basis_integrals(spec, n, chunk_size=2048):
    spec.require_closed()
    results = integrate_presets(spec, list(BASIS_PRESETS), n, chunk_size)
    values = np.array([r.value for r in results])
    errors = np.array([max(r.error, np.finfo(float).eps * max(1.0, abs(r.value))) for r in results])
    logger.info(f"Basis integrals of {spec.label} at n={n}: max error {errors.max():.2e}")
    return BasisIntegralVector(spec.label, values, errors, spec.euler_char)


def default_family(seed):
    """Thirty closed surfaces: 3 spheres, 12 ellipsoids, 10 tori and 5 Moebius images."""
    rng = np.random.default_rng([seed, 99])
    spheres = [Sphere(r) for r in (0.5, 1.0, 2.0)]
    ellipsoids = [Ellipsoid(tuple(float(a) for a in rng.uniform(0.7, 1.4, 5))) for _ in range(12)]
    tori = []
    for _ in range(10):
        major = float(rng.uniform(1.5, 3.0))
        tori.append(TorusOfRevolution(major, float(rng.uniform(0.3, 0.7)) * major))
    images = []
    for base in (spheres[1], ellipsoids[0], ellipsoids[1], tori[0], tori[1]):
        transform = MobiusTransform((Inversion((0.0, 0.0, 0.0, 0.0, 6.0)), Dilation(float(rng.uniform(0.5, 2.0)))))
        images.append(mobius_apply(transform, base))
    return spheres + ellipsoids + tori + images


def check_family(family):
    if len(family) < 2 * len(COLUMNS):
        raise IllConditionedFamily(None, f"Family of {len(family)} surfaces, need at least {2 * len(COLUMNS)}")
    shapes = {_base_family(spec) for spec in family}
    if len(shapes) < 3:
        raise IllConditionedFamily(None, f"Family spans {sorted(shapes)}, need at least 3 distinct shapes")
    topologies = {spec.euler_char for spec in family}
    if len(topologies) < 2:
        raise IllConditionedFamily(None, f"Family has Euler characteristics {sorted(topologies)}, need 2")


@dataclass(frozen=True)
class Nullspace:
    singular_values: np.ndarray
    basis: np.ndarray
    normalized: np.ndarray
    scale: np.ndarray
    threshold: float

    @property
    def nullity(self):
        return self.basis.shape[1]

    @property
    def gap(self):
        """Largest null singular value over the smallest kept one."""
        sigma = np.zeros(self.normalized.shape[1])
        sigma[:len(self.singular_values)] = self.singular_values
        null = sigma <= self.threshold
        if null.all() or not null.any():
            return 0.0
        return float(sigma[null].max() / sigma[~null].min())

    def membership(self, coefficients):
        """Distance of a column-space vector from the nullspace, after normalisation."""
        v = np.asarray(coefficients, dtype=float) * self.scale
        v = v / np.linalg.norm(v)
        unit = self.basis * self.scale[:, None]
        q, _ = np.linalg.qr(unit)
        return float(np.linalg.norm(v - q @ (q.T @ v)))


def integral_nullspace(matrix, threshold=NULL_THRESHOLD):
    """Null vectors of a surfaces x columns matrix after scaling each column by its largest entry."""
    matrix = np.asarray(matrix, dtype=float)
    scale = np.max(np.abs(matrix), axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    normalized = matrix / scale
    _, sigma, vt = linalg.svd(normalized, full_matrices=True)
    full = np.zeros(matrix.shape[1])
    full[:len(sigma)] = sigma
    cutoff = threshold * sigma[0]
    basis = vt[full <= cutoff].T / scale[:, None]
    if basis.size:
        basis = basis / np.linalg.norm(basis, axis=0)
    return Nullspace(sigma, basis, normalized, scale, cutoff)


def rational_basis(nullspace):
    """Reduced row echelon basis of the nullspace over COLUMNS, one {column: Fraction} per null vector.

    Pivots run in column order and each vector is scaled to a unit pivot before rationalising.
    """
    rows = (nullspace.basis * nullspace.scale[:, None]).T.copy()
    pivots = []
    for c in range(rows.shape[1]):
        r = len(pivots)
        if r == len(rows):
            break
        p = r + int(np.argmax(np.abs(rows[r:, c])))
        if abs(rows[p, c]) < PIVOT_TOLERANCE:
            continue
        rows[[r, p]] = rows[[p, r]]
        rows[r] /= rows[r, c]
        others = np.arange(len(rows)) != r
        rows[others] -= np.outer(rows[others, c], rows[r])
        pivots.append(c)
    basis = []
    for row, c in zip(rows, pivots):
        w = row / nullspace.scale
        rational = (_fraction(x) for x in w / w[c])
        basis.append({name: q for name, q in zip(COLUMNS, rational) if q != 0})
    return tuple(basis)


def _format_relation(coefficients):
    return ' '.join(f"{'+' if q > 0 else '-'} {abs(q)} {name}" for name, q in coefficients.items()).lstrip('+ ')


def extract_identity(nullspace, support, anchor, anchor_value):
    """Smallest singular vector of the columns in ``support``, anchored and rationalised."""
    indices = [COLUMNS.index(name) for name in support]
    sub = nullspace.normalized[:, indices]
    _, sigma, vt = linalg.svd(sub, full_matrices=False)
    v = vt[-1] / nullspace.scale[indices]
    k = support.index(anchor)
    if v[k] == 0.0:
        raise FamilyError(f"Null vector on {support} has no {anchor} component")
    coefficients = v * (anchor_value / v[k])
    rational = [_fraction(c) for c in coefficients]
    ratio = float(sigma[-1] / nullspace.singular_values[0])
    return coefficients, rational, ratio


@dataclass(frozen=True)
class IdentityTarget:
    name: str
    support: tuple
    anchor: str
    anchor_value: Fraction
    expected: tuple


TARGETS = (
    IdentityTarget('gauss_bonnet', ('det_h', 'chi'), 'det_h', F(6), (F(6), F(-8))),
    IdentityTarget('corollary', ('grad_h_sq', 'grad_H_sq', 'H_tr_h3', 'h_4'), 'grad_h_sq', F(1),
                   (F(1), F(-16), F(4), F(-1))),
    IdentityTarget('weyl_norm', ('W2', 'h0_4', 'tr_h04'), 'W2', F(1), (F(1), F(-7, 3), F(4))),
)
PRINTED_COROLLARY = (F(1), F(-16), F(-1), F(-1, 4))


@dataclass(frozen=True)
class DiscoveredIdentity:
    target: IdentityTarget
    coefficients: np.ndarray
    rational: tuple
    singular_ratio: float
    membership: float
    held_out_residual: float

    def as_dict(self):
        return dict(zip(self.target.support, self.rational))

    def mismatch(self, expected=None, count=None):
        """Largest gap to ``expected`` over the first ``count`` coefficients."""
        expected = self.target.expected if expected is None else expected
        pairs = list(zip(self.rational, expected))[:count]
        return max(abs(float(r - e)) for r, e in pairs)


@dataclass(frozen=True)
class DiscoveryResult:
    vectors: list
    held_out: list
    nullspace: Nullspace
    identities: dict = field(default_factory=dict)
    basis: tuple = ()

    def pairs(self):
        """(rational coefficient vector, held-out residual) per recovered identity."""
        return [(found.as_dict(), found.held_out_residual) for found in self.identities.values()]


def discover_identities(family, n, held_out=HELD_OUT, chunk_size=2048):
    check_family(family)
    vectors = [basis_integrals(spec, n, chunk_size) for spec in family]
    held = [basis_integrals(spec, n, chunk_size) for spec in held_out]
    return analyse_family(vectors, held)


def analyse_family(vectors, held_out=()):
    """Nullspace and target identities of precomputed basis vectors."""
    matrix = np.stack([v.row() for v in vectors])
    nullspace = integral_nullspace(matrix)
    if nullspace.gap > GAP_LIMIT:
        logger.warning(f"Singular value gap {nullspace.gap:.2e} above {GAP_LIMIT:g}")
        raise IllConditionedFamily(nullspace.singular_values,
                                   f"No clear nullspace: gap ratio {nullspace.gap:.2e} > {GAP_LIMIT:g}")
    logger.info(f"Nullspace dimension {nullspace.nullity} from singular values "
                f"{', '.join(f'{s:.2e}' for s in nullspace.singular_values)}")

    identities = {}
    for target in TARGETS:
        coefficients, rational, ratio = extract_identity(nullspace, target.support, target.anchor,
                                                         target.anchor_value)
        full = np.zeros(len(COLUMNS))
        for name, c in zip(target.support, coefficients):
            full[COLUMNS.index(name)] = c
        named = dict(zip(target.support, rational))
        residual = _max(v.relative_residual(named) for v in held_out)
        identities[target.name] = DiscoveredIdentity(target, coefficients, tuple(rational), ratio,
                                                     nullspace.membership(full), residual)
        logger.info(f"Recovered {target.name}: {', '.join(f'{k}={v}' for k, v in named.items())}")
    basis = rational_basis(nullspace)
    for relation in basis:
        logger.info(f"Null relation: {_format_relation(relation)} = 0")
    return DiscoveryResult(vectors, list(held_out), nullspace, identities, basis)


EB_FIXED = {'grad_h_sq': F(1, 3), 'grad_H_sq': F(-16, 3)}
EB_FITTED = ('H4', 'H2_h2', 'det_h', 'h0_4', 'tr_h04')
EB_EXPECTED = (F(-52, 3), F(10, 3), F(4), F(1, 3), F(-1))


@dataclass(frozen=True)
class EBFit:
    coefficients: np.ndarray
    rational: tuple
    residual: float
    rank: int
    held_out_residual: float

    def weights(self):
        return dict(EB_FIXED, **dict(zip(EB_FITTED, self.rational)))


def eb_reconciliation(vectors, held_out=()):
    """Fit the algebraic part of E_B so that int E_B = 1/2 int |W|^2 across the family.

    The gradient part 1/3 (|grad h|^2 - 16 |grad H|^2) is kept fixed.
    """
    A = np.array([[v[name] for name in EB_FITTED] for v in vectors])
    b = np.array([0.5 * v['W2'] - sum(float(c) * v[k] for k, c in EB_FIXED.items()) for v in vectors])
    scale = np.max(np.abs(A), axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    solution, _, rank, sigma = linalg.lstsq(A / scale, b)
    if rank < len(EB_FITTED):
        raise IllConditionedFamily(sigma, f"E_B fit has rank {rank} < {len(EB_FITTED)}")
    coefficients = solution / scale
    magnitude = np.abs(A * coefficients).sum(axis=1) + np.abs(b)
    residual = float(np.max(np.abs(A @ coefficients - b) / np.maximum(magnitude, 1e-300)))
    rational = tuple(_fraction(c) for c in coefficients)
    weights = dict(EB_FIXED, **dict(zip(EB_FITTED, rational)))
    weights['W2'] = F(-1, 2)
    held = _max(v.relative_residual(weights) for v in held_out)
    logger.info(f"E_B fit: {', '.join(f'{k}={r}' for k, r in zip(EB_FITTED, rational))} residual {residual:.2e}")
    return EBFit(coefficients, rational, residual, int(rank), held)


def run_discovery(family, n, held_out=HELD_OUT, chunk_size=2048, meta=None):
    """Discovery rows for ``family``; failures become DISCREPANCY rows."""
    rows = RowCollector(DISCOVERY_ROWS)
    labels = [spec.label for spec in family]
    held_labels = [spec.label for spec in held_out]
    try:
        check_family(family)
        vectors = [basis_integrals(spec, n, chunk_size) for spec in family]
        held = [basis_integrals(spec, n, chunk_size) for spec in held_out]
    except Exception as e:
        rows.fail(DISCOVERY_ROWS, e, labels)
        return VerificationReport(dict(meta or {}), rows.rows)

    found = {}

    def discovered():
        if not found:
            found['result'] = analyse_family(vectors, held)
        return found['result']

    def identity_row(name, expected=None, support=None):
        identity = discovered().identities[name]
        return {'residual': identity.mismatch(expected, support), 'tolerance': NULL_THRESHOLD, 'grid': n,
                'recovered': {k: str(v) for k, v in identity.as_dict().items()},
                'note': f"singular ratio {identity.singular_ratio:.2e}, nullspace distance {identity.membership:.2e}"}

    rows.check('discovery:nullspace_dimension', lambda: {
        'residual': float(abs(discovered().nullspace.nullity - EXPECTED_NULLITY)), 'tolerance': 0.0, 'grid': n,
        'note': f"gap ratio {discovered().nullspace.gap:.2e}",
    }, labels)

    def basis_row():
        result = discovered()
        held_residual = _max(v.relative_residual(relation) for relation in result.basis for v in result.held_out)
        return {'residual': held_residual, 'tolerance': HELD_OUT_TOLERANCE, 'grid': n,
                'recovered': {f'relation_{k}': _format_relation(relation)
                              for k, relation in enumerate(result.basis, start=1)},
                'note': f"{len(result.basis)} relations for nullity {result.nullspace.nullity}"}

    rows.check('discovery:nullspace_basis', basis_row, labels + held_labels)
    rows.check('discovery:gauss_bonnet', lambda: identity_row('gauss_bonnet'), labels)
    rows.check('discovery:corollary_gradient_pair', lambda: identity_row('corollary', support=2), labels)
    rows.check('discovery:corollary_printed', lambda: identity_row('corollary', PRINTED_COROLLARY), labels)
    rows.check('discovery:weyl_norm', lambda: identity_row('weyl_norm'), labels)
    rows.check('discovery:held_out', lambda: {
        'residual': _max(i.held_out_residual for i in discovered().identities.values()),
        'tolerance': HELD_OUT_TOLERANCE, 'grid': n,
    }, held_labels)

    fits = {}

    def eb():
        if not fits:
            fits['fit'] = eb_reconciliation(vectors, held)
        return fits['fit']

    rows.check('discovery:eb_fit', lambda: {'residual': eb().residual, 'tolerance': HELD_OUT_TOLERANCE,
                                            'grid': n, 'note': f"rank {eb().rank}"}, labels)
    rows.check('discovery:eb_coefficients', lambda: {
        'residual': max(abs(float(r - e)) for r, e in zip(eb().rational, EB_EXPECTED)),
        'tolerance': NULL_THRESHOLD, 'grid': n,
        'recovered': {k: str(v) for k, v in eb().weights().items()},
    }, labels)
    rows.check('discovery:eb_held_out', lambda: {'residual': eb().held_out_residual,
                                                 'tolerance': HELD_OUT_TOLERANCE, 'grid': n}, held_labels)

    def printed_sphere():
        spheres = [(spec, v) for spec, v in zip(family, vectors) if isinstance(spec, Sphere)]
        if spheres:
            value, _ = spheres[0][1].combination(EB_PRINTED.weights)
            target = 0.5 * spheres[0][1]['W2']
        else:
            value, target = sphere_closed_form(EB_PRINTED), 0.0
        return {'residual': abs(value - target), 'tolerance': HELD_OUT_TOLERANCE, 'grid': n,
                'note': f"int E_B(printed) = {value:.9g}, 1/2 int |W|^2 = {target:.9g}"}

    rows.check('discovery:eb_printed_sphere', printed_sphere, [s.label for s in family if isinstance(s, Sphere)])

    report = VerificationReport(dict(meta or {}), rows.rows)
    logger.info(f"Discovery finished: {report.passed} passed, {report.failed} failed")
    return report
