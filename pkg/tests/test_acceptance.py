"""The nine acceptance criteria at their stated tolerances.

Each test reports one PASS/FAIL line (collected in the terminal summary) and
then asserts.  Criteria 5-7 run with one worker thread; criterion 9 reruns
them in a fresh interpreter with four threads and compares the results.
"""

import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import acceptance_runs as runs
from annulus_sle import conformal, mc, pde
from annulus_sle.special_fn import (AnnulusParam, dilog_pair, eta, theta1, theta1_over_sin,
                                    weier_p, weier_zeta, xi2)

RESULTS = {}


@pytest.fixture
def report(request):
    lines = request.config.__dict__.setdefault("acceptance_report", [])
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        lines.append(line)
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        return ok

    return emit


def test_criterion_1_special_functions(report):
    t0 = time.perf_counter()
    # heat equation, fourth-order stencils
    h = 1e-3
    c1 = np.array([1, -8, 0, 8, -1]) / (12 * h)
    c2 = np.array([-1, 16, -30, 16, -1]) / (12 * h * h)
    ks = np.arange(-2, 3)
    heat = 0.0
    for q in (0.1, 0.3, 0.5, 0.7, 0.9):
        a = math.log(q)
        pa = AnnulusParam(a)
        for x in np.linspace(0.3, 2 * math.pi - 0.3, 20):
            th_a = c1 @ [theta1(x, AnnulusParam(a + k * h)) for k in ks]
            th_xx = c2 @ [theta1(x + k * h, pa) for k in ks]
            heat = max(heat, abs(th_a + th_xx) / max(abs(th_a), abs(theta1(x, pa))))
    zeta_eta = max(abs(weier_zeta(math.pi, AnnulusParam.from_q(q)).real - eta(AnnulusParam.from_q(q)))
                   / max(1.0, abs(eta(AnnulusParam.from_q(q))))
                   for q in (0.1, 0.3, 0.5, 0.7, 0.9))
    wp = 0.0
    hz = 1e-5
    for q in (0.2, 0.5, 0.8):
        p = AnnulusParam.from_q(q)
        for z in (0.5, 1.3 + 0.2j, 3.0, 4.4 - 0.1j):
            fd = (weier_zeta(z + hz, p) - weier_zeta(z - hz, p)) / (2 * hz)
            ref = weier_p(z, p)
            wp = max(wp, abs(fd + ref) / max(1.0, abs(ref)))
    # normwise per q: near x = 0 the alternating sine series cancels down to
    # theta ~ 1e-9 at q = 0.9, so its pointwise error there is set by rounding
    prod = point = 0.0
    for q in np.linspace(0.05, 0.9, 18):
        p = AnnulusParam.from_q(q)
        xs = np.linspace(0.1, 2 * math.pi - 0.1, 25)
        ser = np.array([theta1(x, p, "series") for x in xs])
        pro = np.array([theta1_over_sin(x, p, "series") * math.sin(x / 2) for x in xs])
        prod = max(prod, float(np.max(np.abs(ser - pro)) / np.max(np.abs(pro))))
        point = max(point, float(np.max(np.abs(ser / pro - 1))))
    xi = 0.0
    for q in (0.2, 0.5, 0.8):
        p = AnnulusParam.from_q(q)
        for t in np.linspace(0.2, 6.0, 8):
            for y0 in (1.0, 3.0):
                xi = max(xi, abs(xi2(complex(t, p.a), y0, p).imag - 1),
                         abs(xi2(complex(t, -p.a), y0, p).imag + 1))
    dt = time.perf_counter() - t0
    ok = (heat < 1e-5 and zeta_eta < 1e-12 and wp < 1e-7 and prod < 1e-10 and xi < 1e-10
          and dt < 10)
    report(1, ok, f"heat {heat:.1e} zeta(pi)-eta {zeta_eta:.1e} wp+zeta' {wp:.1e} "
                  f"series/product {prod:.1e} (pointwise {point:.1e}) Xi2 {xi:.1e} ({dt:.1f} s)")
    assert ok


def test_criterion_2_frozen_exact(report):
    t0 = time.perf_counter()
    sol = pde.solve(-0.02, -4.0, frozen=True, init=lambda x: 0.5 * np.sin(x / 2) ** 2)
    exact = 0.5 * np.exp(2 / 3 * (sol.a_levels[:, None] + 0.02)) * np.sin(sol.x_nodes / 2) ** 2
    err = float(np.max(np.abs(sol.H / exact - 1)))
    dt = time.perf_counter() - t0
    ok = err < 1e-4 and dt < 30
    report(2, ok, f"max relative error {err:.2e} over {len(sol.a_levels)} levels ({dt:.1f} s)")
    assert ok


def test_criterion_3_small_q_exponent(report, full_solution):
    from annulus_sle import xval

    t0 = time.perf_counter()
    f = xval.fit_q0_exponent(math.pi, full_solution)
    dt = time.perf_counter() - t0 + full_solution.metadata["wall_seconds"]
    ratio = f.extra["shape_ratio"]
    ok = f.rel_error < 0.05 and abs(ratio / 0.5 - 1) < 0.05 and dt < 300
    report(3, ok, f"slope {f.slope:.5f} (target 2/3, {f.rel_error:.2%}) shape ratio "
                  f"{ratio:.5f} ({dt:.1f} s incl. solve)")
    assert ok


def test_criterion_4_q_to_one(report):
    from annulus_sle import xval

    t0 = time.perf_counter()
    grid = np.linspace(-0.2, -0.05, 16)
    fits = [xval.fit_q1_slope(x, grid) for x in (math.pi / 2, math.pi)]
    pooled = xval.fit_q1_pooled(a_values=grid)
    joint = xval.fit_joint_hit_rate()
    r = joint.extra["prefactor_ratio"]
    dev = [abs(v - 1) for v in r]
    conv = dev[-1] < 0.05 and dev[-1] < dev[0]
    dt = time.perf_counter() - t0
    ok = (all(f.rel_error < 0.1 for f in fits) and pooled.rel_error < 0.1
          and joint.rel_error < 0.1 and conv and dt < 60)
    report(4, ok, f"slopes {fits[0].slope:.4f}, {fits[1].slope:.4f}, pooled {pooled.slope:.4f} "
                  f"(target {5 * math.pi / 8:.4f}); joint rate {joint.slope:.6f}; prefactor "
                  f"ratio {r[0]:.4f} -> {r[-1]:.6f} ({dt:.1f} s)")
    assert ok


def test_criterion_5_cross_method(report, full_solution):
    t0 = time.perf_counter()
    rows = runs.criterion5(full_solution, threads=1)
    dt = time.perf_counter() - t0
    RESULTS["c5"] = rows
    zs = [(m - f) / se for (_, _, f, m, se, *_) in rows]
    inside = [lo <= f <= hi for (_, _, f, _, _, lo, hi, _, _) in rows]
    ok = all(abs(z) <= 3 for z in zs) and all(inside) and dt < 600
    report(5, ok, "z " + " ".join(f"{z:+.2f}" for z in zs)
           + f"; in bracket {sum(inside)}/6 ({dt:.0f} s)")
    assert ok


def test_criterion_6_direct_oracle(report):
    t0 = time.perf_counter()
    res = runs.criterion6(threads=1)
    dt = time.perf_counter() - t0
    RESULTS["c6"] = res
    exact = 2 ** -1.25
    v_mean, v_se = res["slit"][:2]
    d_mean, d_se = res["direct"][:2]
    m_mean, m_se = res["mc"][:2]
    z_slit = (v_mean - exact) / v_se
    z_pt = (d_mean - m_mean) / math.hypot(d_se, m_se)
    ok = abs(z_slit) <= 3 and abs(z_pt) <= 3 and dt < 900
    report(6, ok, f"slit {v_mean:.5f} vs {exact:.5f} (z {z_slit:+.2f}); direct {d_mean:.4f} "
                  f"vs FK-MC {m_mean:.4f} (z {z_pt:+.2f}) ({dt:.0f} s)")
    assert ok


def test_criterion_7_martingale(report, full_solution):
    t0 = time.perf_counter()
    rows = runs.criterion7(full_solution, threads=1)
    dt = time.perf_counter() - t0
    RESULTS["c7"] = rows
    ok = all(abs(z) <= 3 for *_, z in rows) and dt < 600
    report(7, ok, "z " + " ".join(f"{r[4]:+.2f}" for r in rows)
           + f" at a = {', '.join(str(r[0]) for r in rows)} ({dt:.0f} s)")
    assert ok


def test_criterion_8_inequalities(report, full_solution):
    t0 = time.perf_counter()
    worst = -math.inf
    for q in np.linspace(0.3, 0.95, 10):
        for x in np.linspace(math.pi / 50, math.pi, 50):
            lhs = -math.log(mc.prefactor(x, math.log(q)))
            rhs = (math.pi ** 2 / 8 - 0.375 * dilog_pair(x)) / (1 - q)
            worst = max(worst, lhs - rhs)
    xs = np.linspace(0, math.pi, 2001)
    gap = np.array([5 * math.pi * x - (math.pi ** 2 - 3 * dilog_pair(x)) for x in xs])
    dilog_ok = abs(gap[0]) < 1e-12 and bool(np.all(gap[1:] > 0))
    probs = []
    for q in np.linspace(0.02, 0.98, 25):
        for x in np.linspace(0.05, math.pi, 12):
            b = conformal.bracket_F(math.log(q), x)
            probs += [b.lower, b.upper]
    m = conformal.modulus_L(math.log(0.6))
    for u in (-1.0, -2.0, -10.0):
        probs.append(conformal.joint_hit_prob(u, m.L, m.one_minus_L))
    for phi in np.linspace(0.1, 3.0, 10):
        probs.append(conformal.two_slit_hit_prob(m.L, phi))
    probs += [conformal.slit_avoid_prob(c, d) for c in (0.1, 1, 10) for d in (0, 0.5, 5)]
    probs += list(full_solution.F.ravel()[::997])
    probs.append(mc.estimate_F_feynman_kac(math.log(0.3), 2.0, 500, seed=3).mean)
    in_range = all(0 <= p <= 1 for p in probs)
    dt = time.perf_counter() - t0
    ok = worst <= 0 and dilog_ok and in_range and dt < 10
    report(8, ok, f"product bound max(lhs-rhs) {worst:.3f} on 50x10 grid; dilog inequality "
                  f"{'holds' if dilog_ok else 'fails'}; {len(probs)} probabilities in [0,1] "
                  f"{in_range} ({dt:.1f} s)")
    assert ok


def test_criterion_9_determinism(report):
    missing = [k for k in ("c5", "c6", "c7") if k not in RESULTS]
    if missing:
        report(9, False, f"criteria {missing} did not produce results to compare")
        pytest.fail("criteria 5-7 must run first")
    here = Path(__file__).parent
    env = dict(os.environ, NUMBA_NUM_THREADS="4")
    t0 = time.perf_counter()
    p = subprocess.run([sys.executable, str(here / "acceptance_runs.py"), "4"], env=env,
                       capture_output=True, text=True, cwd=here)
    dt = time.perf_counter() - t0
    if p.returncode != 0:
        report(9, False, f"rerun failed: {p.stderr.strip().splitlines()[-1:]}")
        pytest.fail(p.stderr)
    other = json.loads(p.stdout.strip().splitlines()[-1])
    mine = runs.data_sections(RESULTS["c5"], RESULTS["c6"], RESULTS["c7"])
    same = {k: mine[k] == other[k] for k in mine}
    ok = all(same.values())
    report(9, ok, "1 thread vs 4 threads identical for "
           + ", ".join(f"{k}={v}" for k, v in same.items()) + f" ({dt:.0f} s rerun)")
    assert ok
