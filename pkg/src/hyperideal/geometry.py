"""Geometry of a single hyper-ideal tetrahedron.

A tetrahedron is described by the six lengths of the edges where pairs of
its hexagonal faces meet, always stored in the slot order
``(12, 13, 14, 23, 24, 34)`` (``SLOTS`` below, with 0-based vertices).

Every function accepts arrays of shape ``(..., 6)`` so that batches of
tetrahedra (or batches of points along a quadrature path) are evaluated in
one numpy call.  The cosine laws are evaluated in log space; that keeps the
kernel finite for lengths far outside the range where ``cosh`` is
representable, which matters for flows that run off to infinity.
"""

from __future__ import annotations

import enum
import math
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import zeta

__all__ = [
    "SLOTS",
    "OPPOSITE",
    "GUARD_EPS",
    "WALL_TOL",
    "Region",
    "DegenerateError",
    "QuadratureError",
    "vertex_edge_length",
    "phi",
    "phi_all",
    "phi_at_vertex",
    "classify",
    "classify_many",
    "extended_angles",
    "dihedral_angles",
    "angle_jacobian",
    "lobachevsky",
    "clausen2",
    "covolume_at_origin",
    "extended_covolume",
    "covolume_along_path",
    "volume",
]

SLOTS: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_SLOT_OF = {pair: k for k, pair in enumerate(SLOTS)}
_SLOT_OF.update({(j, i): k for (i, j), k in list(_SLOT_OF.items())})

# slot index of the edge opposite to each slot (12 <-> 34, 13 <-> 24, 14 <-> 23)
OPPOSITE: tuple[int, ...] = (5, 4, 3, 2, 1, 0)

GUARD_EPS = 1e-9
WALL_TOL = 1e-12

_LN2 = math.log(2.0)


class DegenerateError(ValueError):
    """Raised when an operation needs a nondegenerate tetrahedron and gets another."""


class QuadratureError(ArithmeticError):
    """Raised when the co-volume line integral misses its tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class Region(str, enum.Enum):
    NON_DEGENERATE = "NonDegenerate"
    OMEGA1 = "Omega1"
    OMEGA2 = "Omega2"
    OMEGA3 = "Omega3"
    WALL1 = "Wall1"
    WALL2 = "Wall2"
    WALL3 = "Wall3"

    @property
    def component(self) -> int:
        """1, 2 or 3 for the degenerate tags, 0 for ``NON_DEGENERATE``."""
        return 0 if self is Region.NON_DEGENERATE else int(self.value[-1])

    @property
    def is_wall(self) -> bool:
        return self.value.startswith("Wall")


# Region codes used by the vectorised classifier.
_REGION_BY_CODE = (
    Region.NON_DEGENERATE,
    Region.OMEGA1,
    Region.OMEGA2,
    Region.OMEGA3,
    Region.WALL1,
    Region.WALL2,
    Region.WALL3,
)


# ---------------------------------------------------------------------------
# cosine laws


def _log_cosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - _LN2


def _log_sinh(x):
    # x > 0
    return x + np.log(-np.expm1(-2.0 * x)) - _LN2


def _log_u(a, b, c):
    """log(cosh x - 1) for the vertex edge x opposite the hexagon side c.

    Uses cosh x - 1 = (cosh(a - b) + cosh c) / (sinh a sinh b).
    """
    return np.logaddexp(_log_cosh(a - b), _log_cosh(c)) - _log_sinh(a) - _log_sinh(b)


def vertex_edge_length(a, b, c):
    """Length of the vertex edge of a right-angled hexagon.

    ``a`` and ``b`` are the two hexagon sides meeting the vertex triangle and
    ``c`` is the side opposite; returns
    ``arccosh((cosh a cosh b + cosh c) / (sinh a sinh b))``.
    """
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    if np.any(a <= 0) or np.any(b <= 0) or np.any(c <= 0):
        raise ValueError("vertex_edge_length needs strictly positive lengths")
    u = np.exp(_log_u(a, b, c))
    x = np.log1p(u + np.sqrt(u * (u + 2.0)))
    return float(x) if x.ndim == 0 else x


def _phi_from_logs(L1, L2, L3):
    """Hyperbolic cosine law for the vertex triangle, written in terms of
    L = log(cosh x - 1) of its three sides (angle opposite the third side)."""
    half = 0.5 * (L1 + L2)
    beta = 0.5 * (np.logaddexp(L1, _LN2) + np.logaddexp(L2, _LN2))
    d = 0.5 * (L1 - L2)
    t1, t2, t3, t4 = half - beta, d - beta, -d - beta, L3 - half - beta
    # factor out the largest exponent so extreme triangles give +-inf, not nan
    top = np.maximum(np.maximum(t1, t2), np.maximum(t3, t4))
    s = np.exp(t1 - top) + np.exp(t2 - top) + np.exp(t3 - top) - np.exp(t4 - top)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(s == 0.0, 0.0, s * np.exp(top))


# Vertex edges x^v_{pq}: one per vertex v and pair {p, q} of the other three,
# described by the slots of its hexagon sides (v p), (v q) and (p q).
_VERTEX_EDGES = [
    (v, p, q) for v in range(4) for p in range(4) for q in range(p + 1, 4) if v not in (p, q)
]
_VE_INDEX = {}
for _n, (_v, _p, _q) in enumerate(_VERTEX_EDGES):
    _VE_INDEX[_v, _p, _q] = _VE_INDEX[_v, _q, _p] = _n
_VE_A = np.array([_SLOT_OF[v, p] for v, p, q in _VERTEX_EDGES])
_VE_B = np.array([_SLOT_OF[v, q] for v, p, q in _VERTEX_EDGES])
_VE_C = np.array([_SLOT_OF[p, q] for v, p, q in _VERTEX_EDGES])


def _phi_indices(from_first: bool):
    """Index triples into the vertex-edge array giving phi for every slot."""
    first, second, third = [], [], []
    for i, j in SLOTS:
        if not from_first:
            i, j = j, i
        k, h = [w for w in range(4) if w not in (i, j)]
        first.append(_VE_INDEX[i, j, k])
        second.append(_VE_INDEX[i, j, h])
        third.append(_VE_INDEX[i, k, h])
    return np.array(first), np.array(second), np.array(third)


_PHI_I = _phi_indices(True)
_PHI_J = _phi_indices(False)


def _vertex_logs(l):
    """log(cosh x - 1) for the twelve vertex edges, shape (..., 12)."""
    return _log_u(l[..., _VE_A], l[..., _VE_B], l[..., _VE_C])


def phi_all(l):
    """The six cosine-law values ``phi_ij`` (computed from vertex i).

    Entries of ``l`` must be strictly positive.  On the nondegenerate locus
    ``phi_ij`` equals the cosine of the dihedral angle at edge ij.
    """
    logs = _vertex_logs(np.asarray(l, dtype=float))
    a, b, c = _PHI_I
    return _phi_from_logs(logs[..., a], logs[..., b], logs[..., c])


def phi_at_vertex(l, slot: int, vertex: int):
    """``phi`` for edge ``slot`` evaluated from the vertex triangle at ``vertex``
    (which must be an endpoint of that edge)."""
    i, j = SLOTS[slot]
    if vertex not in (i, j):
        raise ValueError(f"vertex {vertex} is not an endpoint of slot {slot}")
    a, b, c = _PHI_I if vertex == i else _PHI_J
    logs = _vertex_logs(np.asarray(l, dtype=float))
    return _phi_from_logs(logs[..., a[slot]], logs[..., b[slot]], logs[..., c[slot]])


def phi(l, slot: int) -> float:
    l = np.asarray(l, dtype=float)
    if np.any(l <= 0):
        raise ValueError("phi is defined for strictly positive lengths only")
    return phi_all(l)[..., slot]


def _guard(l):
    return np.maximum(np.asarray(l, dtype=float), GUARD_EPS)


# ---------------------------------------------------------------------------
# regions and angles


def _region_codes(ph, tol):
    """Vectorised classification from the (..., 6) array of phi values."""
    ph = np.asarray(ph)
    degenerate = np.any(np.abs(ph) >= 1.0 - tol, axis=-1)
    # component k pairs slot k-1 (12, 13, 14) with its opposite (34, 24, 23)
    m = np.stack([np.minimum(ph[..., s], ph[..., OPPOSITE[s]]) for s in range(3)], axis=-1)
    k = np.argmin(m, axis=-1)
    mk = np.take_along_axis(m, k[..., None], axis=-1)[..., 0]
    inside = mk < -1.0 - tol
    codes = np.where(inside, k + 1, k + 4)
    return np.where(degenerate, codes, 0)


def classify_many(l, tol: float = WALL_TOL) -> np.ndarray:
    """Integer region codes for a batch ``(..., 6)``; decode with ``Region`` via
    ``region_from_code``.  Non-positive entries are clamped and guarded first."""
    return _region_codes(phi_all(_guard(np.maximum(l, 0.0))), tol)


def region_from_code(code: int) -> Region:
    return _REGION_BY_CODE[int(code)]


def classify(l, tol: float = WALL_TOL) -> Region:
    """Which part of the positive orthant the length vector lies in.

    Walls take precedence whenever the relevant phi is within ``tol`` of -1,
    and any other tolerance collision is resolved to the wall of the component
    with the smallest phi.
    """
    l = np.asarray(l, dtype=float)
    if l.shape != (6,):
        raise ValueError("classify expects a single 6-vector")
    return region_from_code(classify_many(l, tol))


def extended_angles(l):
    """Dihedral angles extended continuously to all of R^6.

    Negative entries are clamped to zero, zero entries are replaced by
    ``GUARD_EPS`` and the cosine is clipped into [-1, 1], so angles are 0 or
    pi on the degenerate regions.  Edges of length <= 0 get angle 0, the
    continuous limit at a vanishing edge.
    """
    lp = np.maximum(np.asarray(l, dtype=float), 0.0)
    angles = np.arccos(np.clip(phi_all(_guard(lp)), -1.0, 1.0))
    # a zero-length edge has dihedral angle 0 in the limit; there phi is 1 up
    # to O(eps^2), below double resolution, so arccos would only return noise
    return np.where(lp > 0.0, angles, 0.0)


def dihedral_angles(l):
    """Unextended dihedral angles; ``l`` must be nondegenerate."""
    l = np.asarray(l, dtype=float)
    if np.any(l <= 0):
        raise DegenerateError("dihedral angles need strictly positive lengths")
    ph = phi_all(l)
    bad = np.abs(ph) >= 1.0
    if np.any(bad):
        raise DegenerateError(f"degenerate tetrahedron: phi = {ph[bad].ravel()[0]!r}")
    return np.arccos(ph)


def angle_jacobian(l, rel_step: float = 1e-6, symmetrize: bool = True) -> np.ndarray:
    """Central finite-difference matrix of d a_ij / d l_kh (6 x 6).

    The step for coordinate k is ``rel_step * max(1, |l_k|)``.  With
    ``symmetrize`` the result is (M + M^T) / 2.
    """
    l = np.asarray(l, dtype=float)
    if l.shape != (6,):
        raise ValueError("angle_jacobian expects a single 6-vector")
    h = rel_step * np.maximum(1.0, np.abs(l))
    if np.any(l - h <= 0):
        raise DegenerateError("angle_jacobian needs strictly positive lengths")
    ph = phi_all(l)
    margin = 1.0 - np.abs(ph)
    worst = int(np.argmin(margin))
    if margin[worst] < 10.0 * h.max():
        raise DegenerateError(
            f"too close to the degenerate set: phi_{SLOTS[worst][0] + 1}{SLOTS[worst][1] + 1}"
            f" = {ph[worst]!r}"
        )
    steps = np.diag(h)
    angles = dihedral_angles(np.concatenate([l + steps, l - steps]))
    m = ((angles[:6] - angles[6:]) / (2.0 * h[:, None])).T
    return 0.5 * (m + m.T) if symmetrize else m


# ---------------------------------------------------------------------------
# Lobachevsky function

_ZETA_TERMS = 30
_K = np.arange(1, _ZETA_TERMS + 1)
_CLAUSEN_COEF = zeta(2.0 * _K) / (_K * (2.0 * _K + 1.0))


def clausen2(x):
    """Clausen function Cl_2(x) = sum sin(kx)/k^2.

    After reduction to [-pi, pi] the Bernoulli-type expansion
    Cl_2(x) = x - x log|x| + x sum_k zeta(2k)/(k(2k+1)) (x/2pi)^(2k)
    is summed to 30 terms; since |x/2pi| <= 1/2 the tail is below 1e-19.
    """
    x = np.asarray(x, dtype=float)
    r = x - 2.0 * np.pi * np.round(x / (2.0 * np.pi))
    ar = np.abs(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        head = ar - ar * np.log(ar)
    head = np.where(ar == 0.0, 0.0, head)
    powers = (ar[..., None] / (2.0 * np.pi)) ** (2 * _K)
    series = ar * (powers @ _CLAUSEN_COEF)
    out = np.sign(r) * (head + series)
    return float(out) if out.ndim == 0 else out


def lobachevsky(theta):
    """Lobachevsky function, -int_0^theta log|2 sin t| dt = Cl_2(2 theta) / 2."""
    out = 0.5 * np.asarray(clausen2(2.0 * np.asarray(theta, dtype=float)))
    return float(out) if out.ndim == 0 else out


def covolume_at_origin() -> float:
    """Co-volume of the degenerate tetrahedron with all lengths zero, 16 Psi(pi/4)."""
    return 16.0 * lobachevsky(math.pi / 4.0)


# ---------------------------------------------------------------------------
# co-volume line integrals

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _gauss_many(f, lo, hi):
    """12-point Gauss-Legendre on every interval [lo_k, hi_k] with one call of f."""
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    values = f((mid[:, None] + half[:, None] * _GL_NODES).ravel()).reshape(len(lo), -1)
    return half * (values @ _GL_WEIGHTS), half * (np.abs(values) @ _GL_WEIGHTS)


def _adaptive_gauss(f, knots, tol, max_intervals=20000):
    """Globally adaptive Gauss-Legendre over the partition ``knots``.

    f is evaluated on node arrays.  Every interval carries the two-halves
    estimate and its difference from the whole-interval rule as error.
    While the summed error exceeds ``tol`` the intervals with the largest
    errors are bisected, all of them in one batched evaluation.  Endpoint
    square-root behaviour at walls is handled because the budget is global
    rather than per unit length.
    """
    knots = np.asarray(knots, dtype=float)
    lo, hi = knots[:-1], knots[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    if lo.size == 0:
        return 0.0, 0.0
    whole, _ = _gauss_many(f, lo, hi)
    while True:
        mid = 0.5 * (lo + hi)
        halves, magnitude = _gauss_many(f, np.concatenate([lo, mid]), np.concatenate([mid, hi]))
        left, right = halves[: lo.size], halves[lo.size :]
        value = left + right
        err = np.abs(value - whole)
        total_err = float(err.sum())
        # below this the error estimate is roundoff
        floor = 64.0 * np.finfo(float).eps * float(magnitude.sum())
        if not np.isfinite(total_err):
            raise QuadratureError("non-finite integrand in co-volume quadrature", achieved=math.inf)
        if total_err <= max(tol, floor):
            return float(value.sum()), total_err
        if lo.size > max_intervals:
            raise QuadratureError(
                f"co-volume quadrature reached {total_err:.3e}, requested {tol:.3e}",
                achieved=total_err,
            )
        split = err >= 0.1 * err.max()
        lo = np.concatenate([lo[~split], lo[split], mid[split]])
        hi = np.concatenate([hi[~split], mid[split], hi[split]])
        whole = np.concatenate([whole[~split], left[split], right[split]])


def _wall_crossings(a, b, samples=33):
    """Parameters in (0, 1) where some phi crosses +-1 along the clamped segment."""
    ts = np.linspace(0.0, 1.0, samples)
    direction = b - a

    def phis(t):
        return phi_all(_guard(np.maximum(a + np.multiply.outer(t, direction), 0.0)))

    values = phis(ts)
    # clamped coordinates sit at phi = 1 up to roundoff; not a wall
    clamped = (a + np.multiply.outer(ts, direction)) <= 0.0
    values = np.where(clamped, np.nan, values)
    found = []
    for level in (-1.0, 1.0):
        g = values - level
        with np.errstate(invalid="ignore"):
            sign_change = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)
        for idx, slot in zip(*sign_change):
            root = brentq(
                lambda t, s=slot: phis(np.array([t]))[0, s] - level,
                ts[idx],
                ts[idx + 1],
                xtol=1e-15,
            )
            found.append(root)
    return found


def _segment_integral(a, b, tol):
    """int over the segment a -> b of sum_ij a~_ij dl_ij."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    direction = b - a
    breaks = {0.0, 1.0}
    # kinks where a coordinate changes sign (clamping)
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = -a / direction
    breaks.update(float(t) for t in t0[np.isfinite(t0)] if 0.0 < t < 1.0)
    breaks.update(_wall_crossings(a, b))
    # a long segment from near the origin crosses the unit length scale,
    # where the angles change fastest, in a thin layer near t = 0
    span = float(np.max(np.abs(direction)))
    if span > 4.0 and float(np.max(np.abs(a))) < 1.0:
        breaks.update(float(t) for t in 2.0 ** np.arange(-2, 7) / span if t < 1.0)
    knots = sorted(breaks)

    def integrand(t):
        points = a + np.multiply.outer(t, direction)
        return extended_angles(points) @ direction

    return _adaptive_gauss(integrand, knots, tol)[0]


def extended_covolume(l, tol: float = 1e-11) -> float:
    """Convex C^1 co-volume on R^6.

    Integrates the extended angle 1-form along the straight segment from the
    origin to ``l`` and adds the co-volume 16 Psi(pi/4) at the origin.  The
    segment is cut at every kink of the integrand (sign changes and wall
    crossings) and the resulting partition is refined by one globally
    adaptive Gauss-Legendre pass.
    """
    l = np.asarray(l, dtype=float)
    if l.shape != (6,):
        raise ValueError("extended_covolume expects a single 6-vector")
    return covolume_at_origin() + _segment_integral(np.zeros(6), l, tol)


def covolume_along_path(points: Sequence, tol: float = 1e-11) -> float:
    """Co-volume at the last point, integrating along the polyline through
    ``points`` (which must start at the origin)."""
    pts = [np.asarray(p, dtype=float) for p in points]
    if np.any(pts[0] != 0.0):
        raise ValueError("path must start at the origin")
    per_segment = tol / max(1, len(pts) - 1)
    total = covolume_at_origin()
    for a, b in zip(pts[:-1], pts[1:]):
        total += _segment_integral(a, b, per_segment)
    return total


def volume(l, tol: float = 1e-11) -> float:
    """Hyperbolic volume from the co-volume identity F = 2V + sum a_ij l_ij."""
    l = np.asarray(l, dtype=float)
    if np.any(l <= 0) or classify(l) is not Region.NON_DEGENERATE:
        raise DegenerateError("volume is defined on nondegenerate tetrahedra only")
    return 0.5 * (extended_covolume(l, tol) - float(extended_angles(l) @ l))
