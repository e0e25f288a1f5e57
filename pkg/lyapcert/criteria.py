"""
Stability verdicts from the beta_i criterion and its baselines.

    beta_i(x) = d_ii(x) + 1/2 sum_{j != i} (|d_ij(x)| + |d_ji(x)|)      (variant "paper")
    beta_i(x) = d_ii(x) + sum_{j != i} |d_ij(x)|                       (variant "lakshmikantham")

With V(x) = 1/2 |x|^2 the derivative along trajectories is bounded by
sum_i beta_i(x) x_i^2, so sampled negativity of every beta_i on a ball is
evidence for (asymptotic) stability there. Verdicts are sampled evidence, not
proofs: a sample passes strictly only when beta_i < -(margin + est_error).
"""
import logging
import math

import attrs
import numpy as np

from .conf import default_config
from .exceptions import EigenSolverError, EmptySamplingPlanError, NotPositiveDefiniteError
from .ray_integral import ray_field
from .sampling import sampling_plan, system_plan

logger = logging.getLogger(__name__)

PAPER = 'paper'
LAKSHMIKANTHAM = 'lakshmikantham'
VARIANTS = (PAPER, LAKSHMIKANTHAM)

STABLE = 'stable'
ASYMPTOTICALLY_STABLE = 'asymptotically_stable'
GLOBALLY_ASYMPTOTICALLY_STABLE = 'globally_asymptotically_stable'
INCONCLUSIVE = 'inconclusive'

NEGATIVE_DEFINITE = 'negative_definite_on_samples'
INDEFINITE_WITNESS = 'indefinite_witness'

_JACOBI_TOL = 1e-14


def quadrature_options(config):
    return {
        'tol': config.quad_tol,
        'max_depth': config.quad_max_depth,
        'nodes': config.quad_nodes,
        'chunk_size': config.chunk_size,
        'rtol': config.reconstruction_rtol,
    }


# --- Beta profiles ---

@attrs.frozen(eq=False)
class BetaProfile:
    point: np.ndarray
    values: np.ndarray
    variant: str = PAPER
    est_error: float = 0.0


@attrs.frozen(eq=False)
class BetaField:
    """Beta values at a stack of points: values[k] belongs to points[k]."""
    points: np.ndarray
    values: np.ndarray
    variant: str
    est_error: np.ndarray

    def __getitem__(self, k):
        return BetaProfile(self.points[k], self.values[k], self.variant, float(self.est_error[k]))


def betas_from_entries(entries, variant=PAPER):
    """Beta values from D(x) entries of shape (..., n, n)."""
    entries = np.asarray(entries, dtype=float)
    diag = np.diagonal(entries, axis1=-2, axis2=-1)
    magnitude = np.abs(entries)
    row_off = magnitude.sum(axis=-1) - np.abs(diag)
    if variant == PAPER:
        col_off = magnitude.sum(axis=-2) - np.abs(diag)
        return diag + 0.5 * (row_off + col_off)
    if variant == LAKSHMIKANTHAM:
        return diag + row_off
    raise ValueError(f'Unknown beta variant {variant!r}; expected one of {VARIANTS}.')


def beta_field(system, points, variant=PAPER, config=None, rays=None):
    config = config or default_config()
    if rays is None:
        rays = ray_field(system, points, **quadrature_options(config))
    return BetaField(rays.points, betas_from_entries(rays.entries, variant), variant, rays.est_error)


def beta_profile(system, point, variant=PAPER, config=None):
    point = np.asarray(point, dtype=float)
    return beta_field(system, point[None, :], variant, config)[0]


def lyapunov_derivative(system, points):
    """V'(x) = sum_i x_i g_i(x) for V = 1/2 |x|^2; a float for one point."""
    points = np.asarray(points, dtype=float)
    derivative = np.sum(points * system.evaluate(points), axis=-1)
    return float(derivative) if points.ndim == 1 else derivative


# --- Verdicts ---

@attrs.frozen(eq=False)
class BetaEvidence:
    """Sample statistics behind a verdict; conditions maps a/b/c to whether it held."""
    sup: np.ndarray
    argmax: np.ndarray
    sample_count: int
    max_est_error: float
    conditions: dict


@attrs.frozen(eq=False)
class StabilityVerdict:
    classification: str
    certified_radius: float
    evidence: BetaEvidence
    violation_witness: np.ndarray | None = None
    witness_betas: np.ndarray | None = None
    variant: str = PAPER
    horizon: float | None = None
    margin: float = 0.0

    @property
    def certified(self):
        return self.classification in (ASYMPTOTICALLY_STABLE, GLOBALLY_ASYMPTOTICALLY_STABLE)


def _evidence(field, strict, nonstrict, unbounded):
    values = field.values
    best = np.argmax(values, axis=0)
    everywhere_strict = bool(np.all(strict))
    return BetaEvidence(
        sup=values.max(axis=0),
        argmax=field.points[best],
        sample_count=len(values),
        max_est_error=float(field.est_error.max()),
        conditions={
            'a': bool(np.all(nonstrict)),
            'b': everywhere_strict,
            'c': everywhere_strict and unbounded,
        },
    )


def _witness(field, failing):
    """First failing sample in plan order, preferring a genuinely positive beta."""
    positive = np.flatnonzero(np.any(field.values > 0, axis=-1))
    candidates = positive if len(positive) else np.flatnonzero(failing)
    if not len(candidates):
        return None, None
    k = candidates[0]
    return field.points[k], field.values[k]


def _classify_paper(field, plan):
    slack = plan.margin + field.est_error[:, None]
    strict = np.all(field.values < -slack, axis=-1)
    nonstrict = np.all(field.values <= slack, axis=-1)
    evidence = _evidence(field, strict, nonstrict, plan.unbounded)
    witness, witness_betas = _witness(field, ~strict)

    if evidence.conditions['b']:
        if plan.unbounded:
            classification, radius = GLOBALLY_ASYMPTOTICALLY_STABLE, math.inf
        else:
            classification, radius = ASYMPTOTICALLY_STABLE, plan.radius
    else:
        norms = plan.norms
        first_failure = norms[~strict].min()
        inside = norms[norms < first_failure]
        radius = float(inside.max()) if len(inside) else 0.0
        if radius > 0:
            classification = ASYMPTOTICALLY_STABLE
        elif evidence.conditions['a']:
            classification, radius = STABLE, (math.inf if plan.unbounded else plan.radius)
        else:
            classification = INCONCLUSIVE
    return StabilityVerdict(
        classification, radius, evidence, witness, witness_betas,
        variant=PAPER, horizon=plan.horizon, margin=plan.margin)


def dominance_mask(points):
    """mask[k, i] is True when points[k] != 0 and x_i^2 >= x_j^2 for every j."""
    points = np.asarray(points, dtype=float)
    magnitude = np.abs(points)
    largest = magnitude.max(axis=-1, keepdims=True)
    return (magnitude >= largest) & (largest > 0)


def _classify_dominance(field, plan):
    slack = plan.margin + field.est_error[:, None]
    mask = dominance_mask(field.points)
    strict = np.all(~mask | (field.values < -slack), axis=-1)
    nonstrict = np.all(~mask | (field.values <= slack), axis=-1)
    evidence = _evidence(field, strict, nonstrict, plan.unbounded)
    witness, witness_betas = None, None
    if not evidence.conditions['b']:
        k = np.flatnonzero(~strict)[0]
        witness, witness_betas = field.points[k], field.values[k]
        classification, radius = INCONCLUSIVE, 0.0
    elif plan.unbounded:
        classification, radius = GLOBALLY_ASYMPTOTICALLY_STABLE, math.inf
    else:
        classification, radius = ASYMPTOTICALLY_STABLE, plan.radius
    return StabilityVerdict(
        classification, radius, evidence, witness, witness_betas,
        variant=LAKSHMIKANTHAM, horizon=plan.horizon, margin=plan.margin)


def classify(system, plan=None, variant=PAPER, config=None, rays=None):
    """
    Strongest of (a) stable, (b) asymptotically stable, (c) globally
    asymptotically stable that the plan's samples support.

    The lakshmikantham variant only requires beta_i < 0 where x_i dominates
    (x_i^2 >= x_j^2), as in the comparison-principle criterion.
    """
    config = config or default_config()
    plan = plan if plan is not None else system_plan(system, config)
    if len(plan) == 0:
        raise EmptySamplingPlanError()
    field = beta_field(system, plan.points, variant, config, rays=rays)
    if variant == PAPER:
        verdict = _classify_paper(field, plan)
    else:
        verdict = _classify_dominance(field, plan)
    logger.info(
        'classify[%s] %r: %s (radius %s, %d samples)',
        variant, system.label, verdict.classification, verdict.certified_radius, len(plan))
    return verdict


# --- Certified radius ---

@attrs.frozen
class RegionSearch:
    radius: float
    r_max: float
    tol: float
    evaluations: int
    passes_at_radius: bool
    fails_above: bool | None


def _ball_passes(system, radius, config):
    plan = sampling_plan(system.n, radius, config)
    field = beta_field(system, plan.points, PAPER, config)
    slack = plan.margin + field.est_error[:, None]
    return bool(np.all(field.values < -slack))


def region_search(system, r_max, tol=None, config=None):
    """
    Largest radius r <= r_max whose sampled ball has every beta_i < 0.

    Answers lie on the lattice k * tol (r_max itself only when r_max < tol).
    A passing r_max is rounded down to the lattice; otherwise the lattice is
    bisected. The answer therefore never decreases as r_max grows, and does
    not depend on r_max once r_max lies above the certified boundary.
    """
    config = config or default_config()
    tol = config.region_tol if tol is None else tol
    if not r_max > 0 or not tol > 0:
        raise ValueError('r_max and tol must be positive.')

    evaluations = 1
    if _ball_passes(system, r_max, config):
        radius = r_max if r_max < tol else min(math.floor(r_max / tol + 1e-9) * tol, r_max)
        return RegionSearch(float(radius), float(r_max), tol, evaluations, True, None)

    # largest lattice index strictly below r_max
    top = math.ceil(r_max / tol) - 1
    evaluations += 1
    if top < 1 or not _ball_passes(system, tol, config):
        logger.warning('No radius passes for %r: beta is not strictly negative near 0', system.label)
        return RegionSearch(0.0, float(r_max), tol, evaluations, False, True)

    low, high = 1, top + 1
    while high - low > 1:
        middle = (low + high) // 2
        evaluations += 1
        if _ball_passes(system, middle * tol, config):
            low = middle
        else:
            high = middle
    radius = low * tol
    logger.info('Certified radius for %r: %.6g after %d ball checks', system.label, radius, evaluations)
    return RegionSearch(radius, float(r_max), tol, evaluations, True, True)


def certified_radius_search(system, r_max, tol=None, config=None):
    return region_search(system, r_max, tol, config).radius


# --- Krasovskii ---

def jacobi_eigenvalues(matrices, max_sweeps=100):
    """
    Eigenvalues of symmetric matrices (..., n, n) by cyclic Jacobi rotations,
    applied to the whole stack at once.
    """
    a = np.array(matrices, dtype=float)
    single = a.ndim == 2
    a = a.reshape(-1, a.shape[-1], a.shape[-1])
    n = a.shape[-1]
    off_diagonal = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a[:, off_diagonal] ** 2, axis=-1))
        scale = np.sqrt(np.sum(a ** 2, axis=(-2, -1)))
        if np.all(off <= _JACOBI_TOL * scale):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                rotate = apq != 0
                theta = np.where(rotate, (a[:, q, q] - a[:, p, p]) / (2 * np.where(rotate, apq, 1.0)), 0.0)
                sign = np.where(theta >= 0, 1.0, -1.0)
                t = np.where(rotate, sign / (np.abs(theta) + np.sqrt(theta ** 2 + 1)), 0.0)
                c = 1 / np.sqrt(t ** 2 + 1)
                s = t * c
                column_p, column_q = a[:, :, p].copy(), a[:, :, q].copy()
                a[:, :, p] = c[:, None] * column_p - s[:, None] * column_q
                a[:, :, q] = s[:, None] * column_p + c[:, None] * column_q
                row_p, row_q = a[:, p, :].copy(), a[:, q, :].copy()
                a[:, p, :] = c[:, None] * row_p - s[:, None] * row_q
                a[:, q, :] = s[:, None] * row_p + c[:, None] * row_q
    else:
        off = np.sqrt(np.sum(a[:, off_diagonal] ** 2, axis=-1))
        scale = np.sqrt(np.sum(a ** 2, axis=(-2, -1)))
        if not np.all(off <= _JACOBI_TOL * scale):
            raise EigenSolverError(f'Jacobi rotations did not converge in {max_sweeps} sweeps.')
    eigenvalues = np.sort(np.diagonal(a, axis1=-2, axis2=-1), axis=-1)
    return eigenvalues[0] if single else eigenvalues


def lyapunov_matrix(P, n, max_sweeps=100):
    """Validate P (identity when None) as symmetric positive definite."""
    if P is None:
        return np.eye(n)
    P = np.asarray(P, dtype=float)
    if P.shape != (n, n):
        raise NotPositiveDefiniteError(f'P must be {n}x{n}, got shape {P.shape}.')
    if not np.allclose(P, P.T, rtol=0, atol=1e-12):
        raise NotPositiveDefiniteError('P is not symmetric.')
    smallest = jacobi_eigenvalues(P, max_sweeps)[0]
    if not smallest > 0:
        raise NotPositiveDefiniteError(f'P has eigenvalue {smallest:.3e} <= 0.')
    return P


@attrs.frozen(eq=False)
class KrasovskiiReport:
    P: np.ndarray
    max_eig_field: float
    argmax: np.ndarray
    verdict: str
    witness: np.ndarray | None
    classification: str
    sample_count: int
    horizon: float | None = None


def krasovskii_check(system, P=None, plan=None, config=None):
    """
    Sampled negative definiteness of P J(x) + J(x)^T P.

    Its classification reads GAS (horizon-qualified) on an unbounded plan and
    AS on a bounded ball when no sample has lambda_max >= -margin.
    """
    config = config or default_config()
    plan = plan if plan is not None else system_plan(system, config)
    if len(plan) == 0:
        raise EmptySamplingPlanError()
    P = lyapunov_matrix(P, system.n, config.eigen_max_sweeps)

    largest = np.empty(len(plan))
    for start in range(0, len(plan), config.chunk_size):
        chunk = plan.points[start:start + config.chunk_size]
        jacobians = system.jacobian_stack(chunk)
        symmetric = P @ jacobians + np.swapaxes(jacobians, -1, -2) @ P
        largest[start:start + len(chunk)] = jacobi_eigenvalues(symmetric, config.eigen_max_sweeps)[:, -1]

    failing = np.flatnonzero(largest >= -plan.margin)
    best = int(np.argmax(largest))
    if len(failing):
        verdict, witness, classification = INDEFINITE_WITNESS, plan.points[failing[0]], INCONCLUSIVE
    else:
        verdict, witness = NEGATIVE_DEFINITE, None
        classification = GLOBALLY_ASYMPTOTICALLY_STABLE if plan.unbounded else ASYMPTOTICALLY_STABLE
    logger.info('krasovskii %r: %s (sup lambda_max %.6g)', system.label, verdict, largest[best])
    return KrasovskiiReport(
        P=P,
        max_eig_field=float(largest[best]),
        argmax=plan.points[best],
        verdict=verdict,
        witness=witness,
        classification=classification,
        sample_count=len(plan),
        horizon=plan.horizon,
    )
