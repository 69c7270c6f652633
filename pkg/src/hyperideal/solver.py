"""Extended combinatorial Ricci flow, damped Newton and the regular-instance solver."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

from . import geometry
from .curvature import (
    as_metric,
    curvature_jacobian,
    energy,
    extended_curvature,
    raw_curvature,
    is_nondegenerate,
)
from .geometry import DegenerateError, Region
from .triangulation import NONEXISTENCE_ADVISORY, Triangulation

__all__ = [
    "FlowConfig",
    "FlowSample",
    "FlowEvent",
    "FlowTrace",
    "SolveReport",
    "RateFit",
    "RegularSolution",
    "NoSolution",
    "flow",
    "newton_solve",
    "hybrid_solve",
    "regular_solve",
    "regular_curvature",
    "convergence_rate",
]

logger = logging.getLogger(__name__)

METHODS = ("euler", "rk4", "adaptive")

CONVERGED = "converged"
MAX_TIME = "max_time"
NEWTON_CONVERGED = "newton_converged"
DIVERGED = "diverged_error"


@dataclass(frozen=True)
class FlowConfig:
    method: str = "rk4"
    step: float = 0.05
    t_max: float = 100.0
    tol_curvature: float = 1e-10
    record_every: int = 1
    newton: str = "off"
    seed: int = 0
    # local error target of the step-doubling integrator
    adaptive_tol: float = 1e-8
    # False integrates the unextended flow (raw angles), which stops being
    # defined once a tetrahedron degenerates
    extended: bool = True
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    handoff_threshold: float = 0.1
    handoff_samples: int = 10
    energy_tol: float = 1e-11

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.newton not in ("off", "hybrid"):
            raise ValueError(f"newton must be 'off' or 'hybrid', got {self.newton!r}")
        for name in ("step", "t_max", "tol_curvature"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass(frozen=True)
class FlowSample:
    t: float
    metric: np.ndarray
    curvature_norm: float
    energy: float
    regions: tuple[str, ...]


@dataclass(frozen=True)
class FlowEvent:
    t: float
    kind: str  # entered_OmegaK, left_OmegaK or clamped_coordinate
    index: int  # tet for region events, edge for clamped_coordinate


@dataclass
class FlowTrace:
    samples: list[FlowSample] = field(default_factory=list)
    events: list[FlowEvent] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def metrics(self) -> np.ndarray:
        return np.array([s.metric for s in self.samples])

    @property
    def curvature_norms(self) -> np.ndarray:
        return np.array([s.curvature_norm for s in self.samples])

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.samples])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n = len(self.samples[0].metric) if self.samples else 0
        writer.writerow(["t", *(f"l_e{k}" for k in range(n)), "Knorm", "energy"])
        for s in self.samples:
            writer.writerow([repr(s.t), *(repr(float(x)) for x in s.metric),
                             repr(s.curvature_norm), repr(s.energy)])
        return buf.getvalue()

    def events_to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "event", "index"])
        for e in self.events:
            writer.writerow([repr(e.t), e.kind, e.index])
        return buf.getvalue()


@dataclass(frozen=True)
class RateFit:
    rate: float
    r_squared: float
    samples: int


@dataclass
class SolveReport:
    status: str
    final_metric: np.ndarray
    final_curvature_norm: float
    rate: RateFit | None = None
    steps: int = 0
    newton_iterations: int = 0
    final_time: float = 0.0
    handoff_time: float | None = None
    wall_time: float = 0.0
    advisories: list[str] = field(default_factory=list)
    message: str = ""

    @property
    def success(self) -> bool:
        return self.status in (CONVERGED, NEWTON_CONVERGED)

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "status": self.status,
            "final_metric": [float(x) for x in self.final_metric],
            "final_curvature_norm": float(self.final_curvature_norm),
            "rate": None
            if self.rate is None
            else {"rate": self.rate.rate, "r_squared": self.rate.r_squared, "samples": self.rate.samples},
            "steps": self.steps,
            "newton_iterations": self.newton_iterations,
            "final_time": float(self.final_time),
            "handoff_time": self.handoff_time,
            "advisories": list(self.advisories),
            "message": self.message,
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out


# ---------------------------------------------------------------------------
# flow


def _advisories(triangulation: Triangulation) -> list[str]:
    if triangulation.num_edges and int(triangulation.degrees.max()) <= 6:
        return [NONEXISTENCE_ADVISORY]
    return []


class _Integrator:
    """State of one flow run; owns its trace."""

    def __init__(self, triangulation, l0, target, config: FlowConfig, trace: FlowTrace):
        self.tri = triangulation
        self.cfg = config
        self.target = np.zeros(triangulation.num_edges) if target is None else as_metric(triangulation, target)
        self.curv = extended_curvature if config.extended else raw_curvature
        self.trace = trace
        self.l = as_metric(triangulation, l0).copy()
        if not np.all(np.isfinite(self.l)):
            raise ValueError("initial metric must be finite")
        if np.any(self.target >= 2.0 * math.pi):
            raise ValueError("target curvature entries must be < 2 pi")
        self.t = 0.0
        self.steps = 0
        self.h = config.step
        self.rhs = self.field(self.l)
        self.codes = self._codes(self.l)
        self.last_energy = None

    def field(self, l):
        return self.curv(self.tri, l) - self.target

    def _codes(self, l):
        return np.atleast_1d(geometry.classify_many(l[self.tri.incidence_array()]))

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.rhs))) if self.rhs.size else 0.0

    def nondegenerate(self) -> bool:
        return bool(np.all(self.l > 0) and np.all(self.codes == 0))

    def record(self):
        e = energy(self.tri, self.l, self.target, tol=self.cfg.energy_tol)
        if self.last_energy is not None and e > self.last_energy + 1e-8:
            logger.warning("energy increased by %.3e at t=%g", e - self.last_energy, self.t)
        self.last_energy = e
        regions = tuple(geometry.region_from_code(c).value for c in self.codes)
        self.trace.samples.append(FlowSample(self.t, self.l.copy(), self.norm, e, regions))

    # -- single steps --------------------------------------------------------

    def _rk4(self, l, k1, h):
        k2 = self.field(l + 0.5 * h * k1)
        k3 = self.field(l + 0.5 * h * k2)
        k4 = self.field(l + h * k3)
        return l + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def advance(self, h_max):
        """One accepted step of size <= h_max; returns the step taken."""
        method = self.cfg.method
        if method == "euler":
            h = min(self.cfg.step, h_max)
            new = self.l + h * self.rhs
        elif method == "rk4":
            h = min(self.cfg.step, h_max)
            new = self._rk4(self.l, self.rhs, h)
        else:
            # step doubling: one full step against two half steps
            while True:
                h = min(self.h, h_max)
                full = self._rk4(self.l, self.rhs, h)
                half = self._rk4(self.l, self.rhs, 0.5 * h)
                two = self._rk4(half, self.field(half), 0.5 * h)
                err = float(np.max(np.abs(two - full))) if full.size else 0.0
                if not np.isfinite(err):
                    new = two
                    break
                if err <= self.cfg.adaptive_tol or h < 1e-12:
                    new = two
                    if err < self.cfg.adaptive_tol / 32.0:
                        self.h = min(2.0 * self.h, 16.0 * self.cfg.step)
                    break
                self.h = 0.5 * h
        self.l = new
        self.t += h
        self.steps += 1
        return h

    def after_step(self):
        """Refresh derived state; returns False if the state is not finite."""
        if not np.all(np.isfinite(self.l)):
            return False
        old_l = self.l_prev
        self.rhs = self.field(self.l)
        if not np.all(np.isfinite(self.rhs)):
            return False
        codes = self._codes(self.l)
        for tet, (before, after) in enumerate(zip(self.codes, codes)):
            if before == after:
                continue
            b, a = geometry.region_from_code(before), geometry.region_from_code(after)
            if b.component and not b.is_wall and a is not b:
                self.trace.events.append(FlowEvent(self.t, f"left_Omega{b.component}", tet))
            if a.component and not a.is_wall:
                self.trace.events.append(FlowEvent(self.t, f"entered_Omega{a.component}", tet))
        for e in np.nonzero((old_l > 0) & (self.l <= 0))[0]:
            self.trace.events.append(FlowEvent(self.t, "clamped_coordinate", int(e)))
        self.codes = codes
        return True

    def run(self, handoff: bool = False) -> str:
        """Integrate until convergence, handoff, t_max or a non-finite state."""
        cfg = self.cfg
        good = 0
        if not self.trace.samples:
            self.record()
        if self.norm < cfg.tol_curvature and self.nondegenerate():
            return CONVERGED
        since_record = 0
        while self.t < cfg.t_max * (1.0 - 1e-12):
            self.l_prev = self.l
            self.advance(cfg.t_max - self.t)
            since_record += 1
            if not self.after_step():
                return DIVERGED
            done = self.norm < cfg.tol_curvature and self.nondegenerate()
            if handoff:
                good = good + 1 if (self.norm < cfg.handoff_threshold and self.nondegenerate()) else 0
            at_end = self.t >= cfg.t_max * (1.0 - 1e-12)
            stop_handoff = handoff and good >= cfg.handoff_samples
            if since_record >= cfg.record_every or done or at_end or stop_handoff:
                self.record()
                since_record = 0
            if done:
                return CONVERGED
            if stop_handoff:
                return "handoff"
        return MAX_TIME


def _finish(run: _Integrator, status: str, start: float, **extra) -> SolveReport:
    rate = convergence_rate(run.trace)
    report = SolveReport(
        status=status,
        final_metric=run.l.copy(),
        final_curvature_norm=run.norm,
        rate=rate,
        steps=run.steps,
        final_time=run.t,
        wall_time=time.perf_counter() - start,
        advisories=_advisories(run.tri),
        **extra,
    )
    if status == DIVERGED:
        report.message = f"non-finite state at t={run.t!r}"
    elif status == MAX_TIME and report.advisories:
        report.message = "no convergence by t_max; " + report.advisories[0]
    return report


def flow(
    triangulation: Triangulation,
    l0,
    target=None,
    config: FlowConfig | None = None,
) -> tuple[FlowTrace, SolveReport]:
    """Integrate dl/dt = K~(l) - target from ``l0``.

    Runs until the curvature error is below ``config.tol_curvature`` on a
    nondegenerate metric or until ``t_max``.  Degenerate tetrahedra along
    the way are expected and only logged as events.
    """
    config = config or FlowConfig()
    start = time.perf_counter()
    trace = FlowTrace()
    run = _Integrator(triangulation, l0, target, config, trace)
    status = run.run()
    return trace, _finish(run, status, start)


def newton_solve(
    triangulation: Triangulation,
    l0,
    target=None,
    config: FlowConfig | None = None,
) -> SolveReport:
    """Damped Newton on K~(l) = target inside the nondegenerate locus.

    A trial step is halved while it leaves the locus or fails to decrease the
    sup-norm residual.  Failure (50 consecutive rejections, a singular
    Jacobian or the iteration cap) reports status ``max_time`` so the caller
    can fall back to the flow.
    """
    config = config or FlowConfig()
    start = time.perf_counter()
    tri = triangulation
    goal = np.zeros(tri.num_edges) if target is None else as_metric(tri, target)
    l = as_metric(tri, l0).copy()
    ok, regions = is_nondegenerate(tri, l)
    if not ok:
        raise DegenerateError("newton_solve needs a nondegenerate starting metric")

    def residual(x):
        return extended_curvature(tri, x) - goal

    r = residual(l)
    norm = float(np.max(np.abs(r)))
    iterations = 0
    message = ""
    while norm >= config.newton_tol:
        if iterations >= config.newton_max_iter:
            message = "newton iteration cap reached"
            break
        try:
            jac = curvature_jacobian(tri, l)
            delta = spla.spsolve(jac.tocsc(), -r) if tri.num_edges > 1 else -r / jac.toarray()[0]
        except (DegenerateError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
            message = f"jacobian failure: {exc}"
            break
        delta = np.atleast_1d(np.asarray(delta, dtype=float))
        if not np.all(np.isfinite(delta)):
            message = "jacobian factorization failed"
            break
        alpha, rejected = 1.0, 0
        while True:
            trial = l + alpha * delta
            if np.all(np.isfinite(trial)) and np.all(trial > 0) and is_nondegenerate(tri, trial)[0]:
                r_trial = residual(trial)
                n_trial = float(np.max(np.abs(r_trial)))
                if n_trial < norm:
                    break
            rejected += 1
            if rejected >= 50:
                break
            alpha *= 0.5
        if rejected >= 50:
            message = "50 consecutive rejected newton steps"
            break
        l, r, norm = trial, r_trial, n_trial
        iterations += 1
    converged = norm < config.newton_tol
    return SolveReport(
        status=NEWTON_CONVERGED if converged else MAX_TIME,
        final_metric=l,
        final_curvature_norm=norm,
        newton_iterations=iterations,
        wall_time=time.perf_counter() - start,
        advisories=_advisories(tri),
        message=message,
    )


def hybrid_solve(
    triangulation: Triangulation,
    l0,
    target=None,
    config: FlowConfig | None = None,
) -> tuple[FlowTrace, SolveReport]:
    """Flow until the state is safely inside the basin, then finish with Newton.

    The handoff happens after ``handoff_samples`` consecutive steps with a
    nondegenerate metric and curvature error below ``handoff_threshold``.
    If Newton fails the flow simply continues.
    """
    config = config or FlowConfig(newton="hybrid")
    start = time.perf_counter()
    trace = FlowTrace()
    run = _Integrator(triangulation, l0, target, config, trace)
    status = run.run(handoff=True)
    if status == "handoff":
        handoff_time = run.t
        newton = newton_solve(triangulation, run.l, target, config)
        if newton.success:
            report = _finish(run, NEWTON_CONVERGED, start, handoff_time=handoff_time)
            report.final_metric = newton.final_metric
            report.final_curvature_norm = newton.final_curvature_norm
            report.newton_iterations = newton.newton_iterations
            report.message = f"newton handoff at t={handoff_time!r}"
            return trace, report
        logger.info("newton failed after handoff (%s); continuing the flow", newton.message)
        status = run.run(handoff=False)
        return trace, _finish(run, status, start, handoff_time=handoff_time)
    return trace, _finish(run, status, start)


# ---------------------------------------------------------------------------
# rate fit


def convergence_rate(trace: FlowTrace, threshold: float = 1e-2, min_samples: int = 10) -> RateFit | None:
    """Least-squares slope of log ||K~ - target||_inf against t.

    Uses the last quarter of the recorded samples whose norm is below
    ``threshold``; returns None with fewer than ``min_samples`` such samples.
    """
    t = trace.times
    k = trace.curvature_norms
    keep = (k > 0) & (k < threshold) & np.isfinite(k)
    if keep.sum() < min_samples:
        return None
    t, y = t[keep], np.log(k[keep])
    window = max(3, math.ceil(0.25 * len(t)))
    t, y = t[-window:], y[-window:]
    slope, intercept = np.polyfit(t, y, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), r2, int(window))


# ---------------------------------------------------------------------------
# regular instances


@dataclass(frozen=True)
class RegularSolution:
    degree: int
    length: float
    cosh_length: float
    residual: float


@dataclass(frozen=True)
class NoSolution:
    degree: int
    limit_curvature: float


def regular_curvature(degree: int, s: float) -> float:
    """Curvature of a constant metric s when every edge has the same degree."""
    # cosh s / (2 cosh s - 1), written to stay finite for large s
    c = 1.0 / (2.0 - 1.0 / math.cosh(s)) if s < 700 else 0.5
    return 2.0 * math.pi - degree * math.acos(c)


def regular_solve(degree: int, tol: float = 0.0) -> RegularSolution | NoSolution:
    """Zero-curvature constant length for all-edges-degree-N triangulations.

    The curvature decreases strictly from 2 pi (s -> 0) to (6 - N) pi / 3
    (s -> infinity), so a root exists iff N > 6; it is found by bisection
    until the bracket is narrower than ``tol`` (or cannot shrink further).
    """
    if isinstance(degree, bool) or int(degree) != degree or degree < 1:
        raise ValueError(f"degree must be a positive integer, got {degree!r}")
    degree = int(degree)
    if degree <= 6:
        return NoSolution(degree, (6 - degree) * math.pi / 3.0)
    lo, hi = 0.0, 1.0
    while regular_curvature(degree, hi) > 0:
        lo, hi = hi, 2.0 * hi
    while True:
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid in (lo, hi):
            break
        if regular_curvature(degree, mid) > 0:
            lo = mid
        else:
            hi = mid
    s = lo if abs(regular_curvature(degree, lo)) <= abs(regular_curvature(degree, hi)) else hi
    return RegularSolution(degree, s, math.cosh(s), regular_curvature(degree, s))
