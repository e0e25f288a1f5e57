"""
The ray-integral matrix D(x) = [d_ij(x)], d_ij(x) = int_0^1 J_ij(s x) ds.

Because g(0) = 0, D(x) x = g(x) for every x, which is the correctness check
recorded on every result. The integral is taken with adaptive Gauss-Legendre
quadrature: 4-node panels split in half until the two-panel refinement agrees
with the parent panel entrywise. For a stack of points the panel tree is
shared by the whole chunk, so every point meets the tolerance.
"""
import logging

import attrs
import numpy as np

from .conf import lyapcert_settings
from .exceptions import QuadratureError

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


@attrs.frozen(eq=False)
class RayMatrix:
    """D(x) at one point, with the quadrature effort and D(x)x - g(x) residual."""
    point: np.ndarray
    entries: np.ndarray
    node_count: int
    est_error: float


@attrs.frozen(eq=False)
class RayField:
    """D(x) at a stack of points; row k corresponds to points[k]."""
    points: np.ndarray
    entries: np.ndarray
    node_count: np.ndarray
    est_error: np.ndarray

    def __len__(self):
        return len(self.points)

    def __getitem__(self, k):
        return RayMatrix(self.points[k], self.entries[k], int(self.node_count[k]), float(self.est_error[k]))


def _panel(system, points, a, b, nodes, weights):
    n = system.n
    half = 0.5 * (b - a)
    s = 0.5 * (a + b) + half * nodes
    samples = s[:, None, None] * points[None, :, :]
    jacobians = system.jacobian_stack(samples.reshape(-1, n)).reshape(len(s), len(points), n, n)
    return half * np.tensordot(weights, jacobians, axes=1)


def _adaptive_ray(system, points, tol, max_depth, node_count):
    nodes, weights = np.polynomial.legendre.leggauss(node_count)
    stack = [(0.0, 1.0, 0, _panel(system, points, 0.0, 1.0, nodes, weights))]
    accepted = []
    while stack:
        a, b, depth, coarse = stack.pop()
        mid = 0.5 * (a + b)
        left = _panel(system, points, a, mid, nodes, weights)
        right = _panel(system, points, mid, b, nodes, weights)
        fine = left + right
        difference = np.max(np.abs(fine - coarse))
        threshold = tol * (b - a) + 64 * _EPS * np.max(np.abs(fine))
        if difference <= threshold:
            accepted.append((a, fine))
            continue
        if depth + 1 >= max_depth:
            raise QuadratureError(
                f'Ray integral did not converge on [{a:.3g}, {b:.3g}] at depth {depth + 1} '
                f'(refinement change {difference:.3e}); the ray may cross a non-C1 point.')
        stack.append((mid, b, depth + 1, right))
        stack.append((a, mid, depth + 1, left))
    accepted.sort(key=lambda item: item[0])
    entries = np.zeros((len(points), system.n, system.n))
    for _, contribution in accepted:
        entries += contribution
    return entries, 2 * node_count * len(accepted)


def _reconstruction_residual(system, points, entries):
    reconstructed = np.einsum('kij,kj->ki', entries, points)
    values = system.evaluate(points)
    residual = np.linalg.norm(reconstructed - values, axis=-1)
    return residual, np.linalg.norm(values, axis=-1)


def _ray_chunk(system, points, tol, max_depth, node_count, rtol):
    entries = np.empty((len(points), system.n, system.n))
    counts = np.zeros(len(points), dtype=int)
    at_origin = ~np.any(points, axis=-1)
    if np.any(at_origin):
        # the ray degenerates at x = 0: D(0) = J(0)
        entries[at_origin] = system.jacobian_stack(np.zeros(system.n))
        counts[at_origin] = 1
    moving = ~at_origin
    if not np.any(moving):
        return entries, counts, np.zeros(len(points))

    ray_points = points[moving]
    attempts = ((tol, max_depth), (tol * 1e-2, 2 * max_depth))
    for attempt, (attempt_tol, attempt_depth) in enumerate(attempts):
        ray_entries, used = _adaptive_ray(system, ray_points, attempt_tol, attempt_depth, node_count)
        residual, scale = _reconstruction_residual(system, ray_points, ray_entries)
        if np.all(residual <= rtol * (1.0 + scale)):
            break
        if attempt == 0:
            logger.warning(
                'Reconstruction residual %.3e above tolerance; retrying with depth %d',
                float(np.max(residual)), 2 * max_depth)
    else:
        worst = int(np.argmax(residual / (1.0 + scale)))
        raise QuadratureError(
            f'|D(x)x - g(x)| = {residual[worst]:.3e} at x = {ray_points[worst].tolist()} '
            f'exceeds the reconstruction tolerance.')

    entries[moving] = ray_entries
    counts[moving] = used
    est_error = np.zeros(len(points))
    est_error[moving] = residual
    return entries, counts, est_error


def ray_field(system, points, tol=None, max_depth=None, nodes=None, chunk_size=None, rtol=None):
    """D(x) for every row of `points` (shape (m, n))."""
    tol = lyapcert_settings.QUAD_TOL if tol is None else tol
    max_depth = lyapcert_settings.QUAD_MAX_DEPTH if max_depth is None else max_depth
    nodes = lyapcert_settings.QUAD_NODES if nodes is None else nodes
    chunk_size = lyapcert_settings.CHUNK_SIZE if chunk_size is None else chunk_size
    rtol = lyapcert_settings.RECONSTRUCTION_RTOL if rtol is None else rtol
    if not tol > 0:
        raise QuadratureError('Quadrature tolerance must be positive.')

    points = np.atleast_2d(np.asarray(points, dtype=float))
    entries, counts, errors = [], [], []
    for start in range(0, len(points), chunk_size):
        chunk = points[start:start + chunk_size]
        chunk_entries, chunk_counts, chunk_errors = _ray_chunk(system, chunk, tol, max_depth, nodes, rtol)
        entries.append(chunk_entries)
        counts.append(chunk_counts)
        errors.append(chunk_errors)
    if not entries:
        empty = np.zeros((0, system.n, system.n))
        return RayField(points, empty, np.zeros(0, dtype=int), np.zeros(0))
    return RayField(points, np.concatenate(entries), np.concatenate(counts), np.concatenate(errors))


def ray_matrix(system, point, tol=None, **quadrature):
    """D(x) at a single point."""
    point = np.asarray(point, dtype=float)
    return ray_field(system, point[None, :], tol=tol, **quadrature)[0]


def decoupled_row(ray, point, i):
    """
    Split g_i(x) into d_ii(x) x_i and sum_{j != i} d_ij(x) x_j (i is 1-based).
    """
    point = np.asarray(point, dtype=float)
    n = len(point)
    if not 1 <= i <= n:
        raise IndexError(f'Row index {i} outside 1..{n}.')
    row = ray.entries[i - 1]
    diag_term = float(row[i - 1] * point[i - 1])
    offdiag_sum = float(np.dot(row, point) - row[i - 1] * point[i - 1])
    return diag_term, offdiag_sum
