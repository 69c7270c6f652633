"""Acceptance criteria, one checker per criterion.

Each checker returns ``(passed, detail)``.  Under pytest the summary lines
are printed at the end of the session (see conftest.py); running this file
directly prints them as it goes.
"""

import math
import sys
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import interior_points, load  # noqa: E402
from hyperideal import curvature as cv  # noqa: E402
from hyperideal import geometry as g  # noqa: E402
from hyperideal import solver  # noqa: E402
from hyperideal.geometry import OPPOSITE, SLOTS  # noqa: E402
from hyperideal.solver import FlowConfig  # noqa: E402

RESULTS: dict[int, tuple[bool, str, float]] = {}
TIME_BUDGET = 10.0


def scalar_k(s, n=12):
    return 2 * math.pi - n * math.acos(math.cosh(s) / (2 * math.cosh(s) - 1))


def bisect_root(n=12):
    lo, hi = 1e-9, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if scalar_k(mid, n) > 0 else (lo, mid)
    return 0.5 * (lo + hi)


def random_nondegenerate(tri, n, seed, lo=0.3, hi=2.5, margin=1e-3):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        l = rng.uniform(lo, hi, tri.num_edges)
        if np.all(np.abs(g.phi_all(cv.pull_all_lengths(tri, l))) < 1 - margin):
            out.append(l)
    return out


# ---------------------------------------------------------------------------


def criterion_1():
    tri = load("degree12.inc")
    oracle = bisect_root()
    worst = 0.0
    for l0 in ([0.1], [1.0], [3.0], [-0.5]):
        _, report = solver.hybrid_solve(tri, l0)
        if not report.success:
            return False, f"start {l0}: status {report.status}"
        worst = max(worst, abs(report.final_metric[0] - oracle))
    c = math.cos(math.pi / 6)
    cosh_err = abs(math.cosh(report.final_metric[0]) - c / (2 * c - 1))
    ok = worst < 1e-8 and cosh_err < 1e-10
    return ok, f"max |s* - bisect| = {worst:.2e} (< 1e-8), cosh error = {cosh_err:.2e} (< 1e-10)"


def criterion_2_formula():
    tri = load("degree12.inc")
    errs = [abs(cv.extended_curvature(tri, [s])[0] - scalar_k(s)) for s in np.linspace(0.05, 6.0, 20)]
    k20 = cv.extended_curvature(tri, [20.0])[0]
    ok = max(errs) < 1e-12 and abs(k20 + 2 * math.pi) < 1e-3
    return ok, f"max formula error {max(errs):.2e} (< 1e-12), |K(20) + 2pi| = {abs(k20 + 2 * math.pi):.2e}"


def criterion_2_small_s():
    k = cv.extended_curvature(load("degree12.inc"), [0.01])[0]
    gap = 2 * math.pi - k
    return gap < 0.05, f"2pi - K(0.01) = {gap:.6f} (needs < 0.05; closed form gives {2 * math.pi - scalar_k(0.01):.6f})"


def criterion_2():
    ok_a, detail_a = criterion_2_formula()
    ok_b, detail_b = criterion_2_small_s()
    return ok_a and ok_b, f"{detail_a}; {detail_b}"


def criterion_3():
    tri = load("single_tet.inc")
    trace, report = solver.flow(tri, np.ones(6), config=FlowConfig(t_max=100.0))
    rise = float(np.max(np.diff(trace.energies)))
    finite = bool(np.all(np.isfinite(trace.metrics)) and np.all(np.isfinite(trace.energies)))
    ok = report.status == solver.MAX_TIME and rise <= 1e-8 and finite
    return ok, f"status {report.status}, max energy increase {rise:.2e} over {len(trace.samples)} samples, finite={finite}"


def criterion_4():
    worst = 0.0
    for name, seed in (("degree12.inc", 40), ("three_tet.inc", 41)):
        tri = load(name)
        for lbar in random_nondegenerate(tri, 10, seed):
            target = cv.extended_curvature(tri, lbar)
            _, report = solver.hybrid_solve(tri, np.ones(tri.num_edges), target)
            if not report.success:
                return False, f"{name}: status {report.status} for lbar={lbar.tolist()}"
            worst = max(worst, float(np.max(np.abs(report.final_metric - lbar))))
    return worst < 1e-8, f"max sup-norm recovery error {worst:.2e} over 20 trials (< 1e-8)"


def criterion_5():
    asym, min_eig = 0.0, math.inf
    for l in interior_points(100, seed=50):
        m = g.angle_jacobian(l, symmetrize=False)
        asym = max(asym, float(np.max(np.abs(m - m.T))))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (m + m.T)).min()))
    tri = load("three_tet.inc")
    big_asym, max_eig = 0.0, -math.inf
    for l in random_nondegenerate(tri, 100, seed=51):
        raw = cv.curvature_jacobian(tri, l, symmetrize=False).toarray()
        big_asym = max(big_asym, float(np.max(np.abs(raw - raw.T))))
        max_eig = max(max_eig, float(np.linalg.eigvalsh(0.5 * (raw + raw.T)).max()))
    ok = asym < 1e-6 and min_eig > 0 and big_asym < 1e-6 and max_eig < 0
    return ok, (
        f"per-tet asym {asym:.1e}, min eig {min_eig:.3e}; "
        f"assembled asym {big_asym:.1e}, max eig {max_eig:.3e}"
    )


def criterion_6():
    tri = load("three_tet.inc")
    rng = np.random.default_rng(60)
    values = []
    for _ in range(200):
        l1, l2 = rng.uniform(-1.0, 3.0, (2, tri.num_edges))
        k1, k2 = cv.extended_curvature(tri, l1), cv.extended_curvature(tri, l2)
        values.append(float((k1 - k2) @ (l1 - l2)))
    worst = max(values)
    strict = sum(v < -1e-6 for v in values)
    return worst <= 1e-8, f"max (K1 - K2).(l1 - l2) = {worst:.3e} (<= 1e-8); strictly negative in {strict}/200"


def criterion_7():
    pts = np.random.default_rng(70).uniform(0.05, 4.0, size=(100_000, 6))
    diff = 0.0
    for slot, (i, j) in enumerate(SLOTS):
        diff = max(diff, float(np.max(np.abs(g.phi_at_vertex(pts, slot, i) - g.phi_at_vertex(pts, slot, j)))))
    ph = g.phi_all(pts)
    member = np.stack([(ph[:, k] <= -1) | (ph[:, OPPOSITE[k]] <= -1) for k in range(3)], axis=1)
    both = int(np.sum(member.sum(axis=1) >= 2))
    uncoupled = int(np.sum((ph <= -1) & ~(ph[:, list(OPPOSITE)] <= -1)))
    ok = diff <= 1e-12 and both == 0 and uncoupled == 0
    return ok, (
        f"max |phi^i - phi^j| = {diff:.1e}; points in two components: {both}; "
        f"phi <= -1 without its opposite: {uncoupled}; Omega points sampled: {int(member.any(axis=1).sum())}"
    )


def criterion_8():
    tri = load("three_tet.inc")
    h = 1e-5
    grad_err = 0.0
    for l in random_nondegenerate(tri, 50, seed=80):
        fd = np.array([(cv.energy(tri, l + h * e) - cv.energy(tri, l - h * e)) / (2 * h) for e in np.eye(4)])
        grad_err = max(grad_err, float(np.max(np.abs(fd + cv.extended_curvature(tri, l)))))
    rng = np.random.default_rng(81)
    dir_err = 0.0
    for l in interior_points(20, seed=82):
        v = rng.normal(size=6)
        fd = (g.extended_covolume(l + h * v) - g.extended_covolume(l - h * v)) / (2 * h)
        dir_err = max(dir_err, abs(fd - float(g.extended_angles(l) @ v)))
    path_err = 0.0
    for _ in range(20):
        l, mid = rng.uniform(-1.0, 5.0, (2, 6))
        path_err = max(path_err, abs(g.extended_covolume(l) - g.covolume_along_path([np.zeros(6), mid, l])))
    origin = 16 * float(mpmath.clsin(2, mpmath.pi / 2)) / 2
    origin_err = abs(g.extended_covolume(np.zeros(6)) - origin)
    ok = grad_err < 1e-6 and dir_err < 1e-6 and path_err < 2e-9 and origin_err < 1e-9
    return ok, (
        f"grad err {grad_err:.1e}, Schlaefli err {dir_err:.1e}, path gap {path_err:.1e}, "
        f"F(0) = {g.extended_covolume(np.zeros(6)):.9f} (err {origin_err:.1e})"
    )


def criterion_9():
    tri = load("degree12.inc")
    cfg = FlowConfig(t_max=5.0, tol_curvature=1e-300)
    worst = -math.inf
    for a0, b0 in (([0.1], [4.0]), ([-0.5], [3.0])):
        a, _ = solver.flow(tri, a0, config=cfg)
        b, _ = solver.flow(tri, b0, config=cfg)
        gap = np.sum((a.metrics - b.metrics) ** 2, axis=1)
        worst = max(worst, float(np.max(np.diff(gap))))
    return worst <= 1e-8, f"max increase of |l1 - l2|^2 = {worst:.2e} (<= 1e-8)"


def criterion_10():
    tri = load("degree12.inc")
    _, report = solver.flow(tri, [3.0])
    fit = report.rate
    if fit is None:
        return False, "rate unavailable"
    top = float(np.linalg.eigvalsh(cv.curvature_jacobian(tri, report.final_metric).toarray()).max())
    rel = abs(fit.rate - top) / abs(top)
    ok = fit.rate < 0 and fit.r_squared > 0.99 and rel < 0.2
    return ok, f"lambda = {fit.rate:.4f}, R^2 = {fit.r_squared:.6f}, top eigenvalue {top:.4f}, rel diff {rel:.2%}"


CRITERIA = {
    1: ("regular fixed point", criterion_1),
    2: ("scalar curvature formula", criterion_2),
    3: ("nonexistence", criterion_3),
    4: ("rigidity round-trip", criterion_4),
    5: ("jacobian structure", criterion_5),
    6: ("monotone gradient", criterion_6),
    7: ("extension consistency", criterion_7),
    8: ("energy gradient and Schlaefli", criterion_8),
    9: ("flow contraction", criterion_9),
    10: ("exponential rate", criterion_10),
}


def evaluate(number):
    name, check = CRITERIA[number]
    start = time.perf_counter()
    ok, detail = check()
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < TIME_BUDGET
    RESULTS[number] = (ok, detail, elapsed)
    return ok, detail, elapsed


def summary_line(number):
    ok, detail, elapsed = RESULTS[number]
    return f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {CRITERIA[number][0]}: {detail} ({elapsed:.1f}s)"


# ---------------------------------------------------------------------------


@pytest.mark.parametrize("number", [1, 3, 4, 5, 6, 7, 8, 9, 10])
def test_criterion(number):
    ok, detail, elapsed = evaluate(number)
    assert elapsed < TIME_BUDGET, f"took {elapsed:.1f}s"
    assert ok, detail


def test_criterion_2():
    """Runs both halves; the small-s bound contradicts the closed form it also requires."""
    evaluate(2)
    ok, detail = criterion_2_formula()
    assert ok, detail


@pytest.mark.xfail(
    strict=True,
    reason="K(0.01) = 2pi - 12 arccos(...) ~ 2pi - 0.12, so 'K(0.01) > 2pi - 0.05' cannot hold",
)
def test_criterion_2_small_s_bound():
    ok, detail = criterion_2_small_s()
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n in CRITERIA:
        evaluate(n)
        print(summary_line(n), flush=True)
        failed += not RESULTS[n][0]
    sys.exit(1 if failed else 0)
