"""Acceptance criteria, one test per criterion.

Each test records a ``[PASS]``/``[FAIL]`` line that is printed in the terminal
summary at the end of the module, whatever pytest's capture settings.
Tolerances are the ones stated for each criterion.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from ffrsim import experiments as ex
from ffrsim.analysis import average_ceu_probability, joint_nearest_pdf
from ffrsim.cli import main
from ffrsim.ffr import ceu_prob_conditional, db_to_linear
from ffrsim.geometry import Window, nearest_two, sample_ppp
from ffrsim.pathloss import PathLossParams
from ffrsim.quadrature import integrate_semi_infinite
from ffrsim.simulator import SimConfig, estimate_many

DROPS = 100_000
LAM = 1e-2
RESULTS: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    RESULTS[criterion] = (ok, detail)
    assert ok, detail


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    reporter = request.config.pluginmanager.getplugin("terminalreporter")
    lines = [f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}" for n, (ok, detail) in sorted(RESULTS.items())]
    if reporter is not None:
        reporter.write_line("")
        for line in lines:
            reporter.write_line(line)
    else:
        print("\n".join(lines))


@pytest.fixture(scope="module")
def calibration():
    return ex.load_calibration()


def separated_below(lo, hi):
    """``lo`` is below ``hi`` with non-overlapping 95% intervals."""
    return lo.coverage + lo.ci_half_width < hi.coverage - hi.ci_half_width


@pytest.fixture(scope="module")
def coverage_runs(calibration):
    """One shared pass of 10^5 drops for the coverage criteria (5, 6 and 7)."""
    base = SimConfig(n_drops=DROPS)
    fig4 = ex.figure_spec("fig4", calibration, base, coarse=True)
    fig5 = ex.figure_spec("fig5", calibration, base, coarse=True)
    uniform = [ex.apply_axis(ex.apply_axis(base, "power_ratio_a", 1.0), "threshold_T_dB", t) for t in (-15.0, 15.0)]
    cfgs = fig4.configs() + fig5.configs() + uniform
    start = time.perf_counter()
    est = estimate_many(cfgs)
    elapsed = time.perf_counter() - start
    n4, n5 = len(fig4.configs()), len(fig5.configs())
    return {
        "fig4": dict(zip(fig4.points(), est[:n4])),
        "fig5": dict(zip(fig5.points(), est[n4:n4 + n5])),
        "uniform": est[n4 + n5:],
        "fig5_grid": fig5.grid,
        "elapsed": elapsed,
    }


def test_criterion_1_conditional_ceu_probability():
    rng = np.random.default_rng(2024)
    n = 1_000_000
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        L1, L2 = rng.uniform(0.01, 1.0, size=2)
        T = db_to_linear(rng.uniform(-10.0, 10.0))
        g = rng.exponential(size=(n, 2))
        freq = np.count_nonzero(g[:, 0] * L1 < T * g[:, 1] * L2) / n
        p = ceu_prob_conditional(L1, L2, T)
        worst = max(worst, abs(freq - p) / math.sqrt(p * (1 - p) / n))
    elapsed = time.perf_counter() - start
    record(1, worst <= 3.0 and elapsed < 10.0, f"worst deviation {worst:.2f} s.e. over 20 triples, {elapsed:.1f} s")


def test_criterion_2_distance_law():
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    w = Window()
    r1 = np.array([nearest_two((0.0, 0.0), sample_ppp(LAM, w, rng))[1] for _ in range(DROPS)])
    ks = stats.kstest(r1, lambda r: 1.0 - np.exp(-math.pi * LAM * r**2))

    scale = 1.0 / math.sqrt(math.pi * LAM)

    def inner(x):
        return np.array([integrate_semi_infinite(lambda r2: joint_nearest_pdf(v, r2, LAM), v, scale=scale)[0]
                         for v in np.atleast_1d(x)])

    total, _ = integrate_semi_infinite(inner, 0.0, scale=scale)
    elapsed = time.perf_counter() - start
    ok = ks.pvalue > 0.01 and abs(total - 1.0) <= 1e-6 and elapsed < 30.0
    record(2, ok, f"KS p-value {ks.pvalue:.3f}, joint density integral {total:.10f}, {elapsed:.1f} s")


def test_criterion_3_ceu_density_matches_analysis(calibration):
    alpha = calibration.params("fig3")["alpha"]
    combos = [(-10.0, 0.5), (20.0, 0.5), (0.0, 1.5), (10.0, 1.5), (0.0, 2.0), (20.0, 2.0)]
    base = SimConfig(n_drops=DROPS)
    cfgs = [ex.apply_axis(base.replace(pathloss=PathLossParams(alpha, b)), "threshold_T_dB", t) for t, b in combos]
    start = time.perf_counter()
    ests = estimate_many(cfgs, classification_only=True)
    diffs = [abs(e.ceu_density - average_ceu_probability(LAM, c.ffr.threshold_T, c.pathloss))
             for c, e in zip(cfgs, ests)]
    elapsed = time.perf_counter() - start
    record(3, max(diffs) <= 0.01 and elapsed < 120.0,
           f"max |simulated - analytical| = {max(diffs):.4f} over {len(combos)} (T, beta) points, {elapsed:.1f} s")


def test_criterion_4_ceu_density_anchors(calibration):
    fig = calibration.figures["fig3"]
    alpha = fig.params["alpha"]
    base = SimConfig(n_drops=DROPS, pathloss=PathLossParams(alpha, 1.0))
    grid = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    betas = (0.5, 1.5, 2.0)
    spec = ex.SweepSpec(base, "threshold_T_dB", grid, "beta", betas)
    ests = dict(zip(spec.points(), estimate_many(spec.configs(), classification_only=True)))

    anchors = [
        (ests[(0.0, 0.5)].ceu_density, 0.40, 0.50),
        (ests[(0.0, 1.5)].ceu_density, 0.25, 0.35),
        (ests[(0.0, 2.0)].ceu_density, 0.10, 0.20),
        (ests[(20.0, 0.5)].ceu_density, 0.93, 1.0),
        (ests[(20.0, 2.0)].ceu_density, 0.0, 0.70),
    ]
    anchors_ok = all(lo <= v <= hi for v, lo, hi in anchors)
    monotone = all(ests[(a, beta)].ceu_density < ests[(b, beta)].ceu_density
                   for beta in betas for a, b in zip(grid, grid[1:]))
    ordered = all(ests[(t, 0.5)].ceu_density > ests[(t, 1.5)].ceu_density > ests[(t, 2.0)].ceu_density
                  for t in grid if t >= 0)
    values = ", ".join(f"{v:.3f}" for v, _, _ in anchors)
    if anchors_ok:
        ok, how = monotone and ordered, "anchors met"
    else:
        # degradation clause: ordering and monotonicity plus the published report
        ok, how = monotone and ordered and not fig.within_tolerance, "anchors missed, degraded check"
    record(4, ok, f"alpha={alpha:g}: anchors [{values}] ({how}); monotone in T {monotone}, beta-ordered {ordered}")


def test_criterion_5_power_ratio_shape(coverage_runs):
    c = coverage_runs["fig4"]
    v_shape = all(separated_below(c[(0.0, a)], c[(-15.0, a)]) and separated_below(c[(0.0, a)], c[(15.0, a)])
                  for a in (5.0, 10.0, 15.0))
    ordering = separated_below(c[(0.0, 10.0)], c[(0.0, 5.0)]) and separated_below(c[(0.0, 15.0)], c[(0.0, 10.0)])
    anchors = [(c[(-15.0, 10.0)], 0.905), (c[(0.0, 10.0)], 0.808), (c[(15.0, 10.0)], 0.902),
               (c[(0.0, 5.0)], 0.873), (c[(0.0, 15.0)], 0.744)]
    anchors_ok = all(abs(e.coverage - x) <= 0.05 for e, x in anchors)
    values = ", ".join(f"{e.coverage:.3f}" for e, _ in anchors)
    record(5, v_shape and ordering and anchors_ok,
           f"V-shape {v_shape}, a-ordering {ordering}, anchors [{values}] within 0.05: {anchors_ok}")


def test_criterion_6_obstacle_density_trends(coverage_runs):
    c = coverage_runs["fig5"]
    grid = coverage_runs["fig5_grid"]
    alphas = (0.1, 0.01, 0.001)
    # non-decreasing up to sampling noise: no step drops by more than the CIs allow
    monotone = all(c[(b, al)].coverage >= c[(a, al)].coverage - c[(a, al)].ci_half_width - c[(b, al)].ci_half_width
                   for al in alphas for a, b in zip(grid, grid[1:]))
    at = {al: c[(1.2, al)] for al in alphas}
    ordering = separated_below(at[0.01], at[0.1]) and separated_below(at[0.001], at[0.01])
    anchors_ok = all(abs(at[al].coverage - x) <= 0.07 for al, x in zip(alphas, (0.99, 0.71, 0.15)))
    values = ", ".join(f"{at[al].coverage:.3f}" for al in alphas)
    record(6, monotone and ordering and anchors_ok,
           f"monotone in beta {monotone}, alpha-ordering {ordering}, "
           f"anchors at beta=1.2 [{values}] vs [0.99, 0.71, 0.15] within 0.07: {anchors_ok}")


def test_criterion_7_uniform_power_invariance(coverage_runs):
    lo, hi = coverage_runs["uniform"]
    overlap = abs(lo.coverage - hi.coverage) <= lo.ci_half_width + hi.ci_half_width
    record(7, overlap, f"a=1 coverage {lo.coverage:.4f} (T=-15 dB) vs {hi.coverage:.4f} (T=+15 dB), "
                       f"CIs +/-{lo.ci_half_width:.4f}")


def test_criterion_8_reproduce_is_byte_identical(tmp_path):
    outs = []
    for i, workers in enumerate((1, 1, 2)):
        out = tmp_path / f"fig4_{i}.csv"
        assert main(["reproduce", "fig4", "--drops", "1000", "--seed", "4242",
                     "--workers", str(workers), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    same = outs[0] == outs[1] == outs[2]
    record(8, same, f"3 runs (workers 1, 1, 2) byte-identical: {same}, {len(outs[0])} bytes")
