"""Edge curvature, its Jacobian and the convex energy on a triangulation.

A metric is a float array with one length per edge class.  Each tetrahedron
reads its six lengths through the slot-to-class incidence, so a class that
occupies several slots of the same tetrahedron collects one angle per slot.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from . import geometry
from .geometry import DegenerateError, Region
from .triangulation import Triangulation

__all__ = [
    "as_metric",
    "pull_tet_lengths",
    "pull_all_lengths",
    "extended_curvature",
    "raw_curvature",
    "is_nondegenerate",
    "tet_regions",
    "curvature_jacobian",
    "energy",
    "energy_gradient",
]

TWO_PI = 2.0 * math.pi


def as_metric(triangulation: Triangulation, metric) -> np.ndarray:
    l = np.array(metric, dtype=float).reshape(-1)
    if l.shape != (triangulation.num_edges,):
        raise ValueError(
            f"metric has {l.size} entries but the triangulation has {triangulation.num_edges} edges"
        )
    return l


def pull_tet_lengths(triangulation: Triangulation, metric, tet: int) -> np.ndarray:
    """Slot-ordered copy of the six lengths seen by ``tet``."""
    l = as_metric(triangulation, metric)
    return l[list(triangulation.incidence[tet])]


def pull_all_lengths(triangulation: Triangulation, metric) -> np.ndarray:
    """``(num_tets, 6)`` array of slot lengths (a fresh copy)."""
    return as_metric(triangulation, metric)[triangulation.incidence_array()]


def _scatter(triangulation: Triangulation, angles: np.ndarray) -> np.ndarray:
    inc = triangulation.incidence_array()
    sums = np.bincount(inc.ravel(), weights=angles.ravel(), minlength=triangulation.num_edges)
    return TWO_PI - sums


def extended_curvature(triangulation: Triangulation, metric) -> np.ndarray:
    """K~_e = 2 pi - (sum of extended dihedral angles at every slot of class e).

    Defined for every real metric, including non-positive entries.
    """
    return _scatter(triangulation, geometry.extended_angles(pull_all_lengths(triangulation, metric)))


def raw_curvature(triangulation: Triangulation, metric) -> np.ndarray:
    """Curvature from the unextended dihedral angles.

    Raises ``DegenerateError`` unless every tetrahedron is nondegenerate.
    """
    return _scatter(triangulation, geometry.dihedral_angles(pull_all_lengths(triangulation, metric)))


def tet_regions(triangulation: Triangulation, metric, tol: float = geometry.WALL_TOL) -> list[Region]:
    codes = geometry.classify_many(pull_all_lengths(triangulation, metric), tol)
    return [geometry.region_from_code(c) for c in np.atleast_1d(codes)]


def is_nondegenerate(
    triangulation: Triangulation, metric, tol: float = geometry.WALL_TOL
) -> tuple[bool, list[Region]]:
    """Whether the metric lies in the space of hyper-ideal polyhedral metrics,
    together with the region of every tetrahedron."""
    l = as_metric(triangulation, metric)
    regions = tet_regions(triangulation, l, tol)
    ok = bool(np.all(l > 0)) and all(r is Region.NON_DEGENERATE for r in regions)
    return ok, regions


def curvature_jacobian(
    triangulation: Triangulation,
    metric,
    rel_step: float = 1e-6,
    symmetrize: bool = True,
) -> sp.csr_matrix:
    """Sparse |E| x |E| matrix dK_e / dl_f on the nondegenerate locus.

    Assembled from the finite-difference angle Jacobian of each tetrahedron
    (with the sign flipped) through the slot-to-class map.
    """
    l = as_metric(triangulation, metric)
    ok, regions = is_nondegenerate(triangulation, l)
    if not ok:
        bad = [t for t, r in enumerate(regions) if r is not Region.NON_DEGENERATE]
        raise DegenerateError(
            f"curvature_jacobian needs a nondegenerate metric; degenerate tets {bad}"
            if bad
            else "curvature_jacobian needs strictly positive lengths"
        )
    inc = triangulation.incidence_array()
    rows, cols, data = [], [], []
    for t in range(triangulation.num_tets):
        block = geometry.angle_jacobian(l[inc[t]], rel_step=rel_step, symmetrize=False)
        rows.append(np.repeat(inc[t], 6))
        cols.append(np.tile(inc[t], 6))
        data.append(-block.ravel())
    n = triangulation.num_edges
    jac = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    if symmetrize:
        jac = ((jac + jac.T) * 0.5).tocsr()
    return jac


def energy(triangulation: Triangulation, metric, target=None, tol: float = 1e-11) -> float:
    """Convex energy whose gradient is -(K~ - target).

    sum over tets of the extended co-volume, minus 2 pi sum l, plus
    sum target_e l_e.  With ``target`` omitted this is the plain energy of
    the unprescribed flow.
    """
    l = as_metric(triangulation, metric)
    lengths = pull_all_lengths(triangulation, l)
    per_tet_tol = tol / max(1, triangulation.num_tets)
    value = sum(geometry.extended_covolume(row, per_tet_tol) for row in lengths)
    value -= TWO_PI * float(l.sum())
    if target is not None:
        value += float(as_metric(triangulation, target) @ l)
    return value


def energy_gradient(triangulation: Triangulation, metric, target=None) -> np.ndarray:
    """Analytic gradient of ``energy``: -(K~ - target)."""
    k = extended_curvature(triangulation, metric)
    if target is not None:
        k = k - as_metric(triangulation, target)
    return -k
