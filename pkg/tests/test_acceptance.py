"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line with its headline
numbers, then asserts.
"""

import math

import numpy as np
import pytest

from optosqueeze.analysis import (adiabatic_model, analytic_squeezing_db, analytic_variance_p,
                                  optimal_ratio_search, squeezing_db, wigner)
from optosqueeze.dynamics import (diffusion, drift_rwa, evolve, initial_covariance,
                                  lyapunov_residual, steady_state_covariance)
from optosqueeze.model import default_params
from optosqueeze.stability import routh_hurwitz
from optosqueeze.sweep import PRESETS, figure_preset

K = 0.05


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return _report


def _numeric_db(sp):
    return squeezing_db(steady_state_covariance(sp).variance_q)


@pytest.fixture(scope="module")
def rwa_runs():
    runs = {}
    for gain in (0.0, 0.4 * K):
        sp = default_params(gain=gain)
        runs[gain] = (sp, evolve(sp, initial_covariance(0.0), t_end=3000.0, dt=1e-2))
    return runs


def test_criterion_1_point_reproduction(report):
    targets = {"A": (0.28, 0.06, 3.00), "B": (0.0, 0.06, 0.49),
               "C": (0.0, 0.40, 2.55), "D": (0.28, 0.40, 5.05)}
    errs = {}
    for label, (x, g, target) in targets.items():
        sp = default_params(ratio=x, gain=g * K)
        errs[label] = (abs(_numeric_db(sp) - target), abs(analytic_squeezing_db(sp) - target))
    ok = all(n <= 0.05 and a <= 0.02 for n, a in errs.values())
    worst_n = max(e[0] for e in errs.values())
    worst_a = max(e[1] for e in errs.values())
    report(1, ok, f"worst numeric err {worst_n:.4f} dB, worst analytic err {worst_a:.4f} dB")
    assert ok


def test_criterion_2_steady_variances(report, rwa_runs):
    lines, ok = [], True
    for gain, target in ((0.0, 0.2815), (0.4 * K, 0.1565)):
        sp, traj = rwa_runs[gain]
        end = traj.final.entries
        lyap = steady_state_covariance(sp).entries
        gap = float(np.max(np.abs(end - lyap)))
        ok &= abs(end[2, 2] - target) <= 0.002 and gap < 1e-4
        lines.append(f"G={gain:g}: V33={end[2, 2]:.5f} gap={gap:.1e}")
    report(2, ok, "; ".join(lines))
    assert ok


def _final_period_average(sp):
    periods = math.ceil(3000.0 / math.pi)
    per_period = 50
    traj = evolve(sp, initial_covariance(0.0), t_end=periods * math.pi,
                  dt=math.pi / per_period, rwa=False, sample_every=1)
    return float(np.mean(traj.element(3, 3)[-per_period - 1:-1]))


def test_criterion_3_rwa_validity(report):
    lines, ok = [], True
    for gain in (0.0, 0.4 * K):
        sp = default_params(gain=gain)
        avg = _final_period_average(sp)
        ref = steady_state_covariance(sp).variance_q
        rel = abs(avg - ref) / ref
        ok &= rel < 0.01
        lines.append(f"G={gain:g}: rel diff {rel:.2%}")
    report(3, ok, "; ".join(lines))
    assert ok


def test_criterion_4_maximum_squeezing(report):
    table_points = figure_preset("fig3b", resolution=200).axes[0][1]
    numeric = max(_numeric_db(default_params(gain=0.4 * K, ratio=x)) for x in table_points)
    analytic_grid = max(analytic_squeezing_db(default_params(gain=0.4 * K, ratio=x))
                        for x in table_points)
    x_opt, analytic_opt = optimal_ratio_search(default_params(gain=0.4 * K), (0.0, 0.99))
    ok = all(19.2 <= s <= 19.7 for s in (numeric, analytic_grid, analytic_opt))
    report(4, ok, f"numeric {numeric:.3f} dB, analytic {analytic_grid:.3f} dB "
                  f"(optimum {analytic_opt:.3f} dB at x={x_opt:.4f})")
    assert ok


def test_criterion_5_analytic_numeric_grid(report):
    worst, stable = 0.0, 0
    for gain in np.linspace(0.0, 0.45 * K, 40):
        for x in np.linspace(0.0, 0.95, 40):
            sp = default_params(gain=float(gain), ratio=float(x))
            if not routh_hurwitz(sp).eig_stable:
                continue
            stable += 1
            worst = max(worst, abs(_numeric_db(sp) - analytic_squeezing_db(sp)))
    ok = worst < 0.1 and stable > 0
    report(5, ok, f"{stable} stable points, max |diff| {worst:.4f} dB")
    assert ok


def test_criterion_6_stability_boundaries(report):
    unstable_high_gain = not routh_hurwitz(default_params(gain=0.6 * K)).eig_stable
    unstable_blue = not routh_hurwitz(default_params(g_plus=0.012, gain=0.0)).eig_stable
    figure_sets = [p for name in PRESETS for p in figure_preset(name).points()]
    figures_stable = all(routh_hurwitz(p).eig_stable for p in figure_sets)

    rng = np.random.default_rng(7)
    agree, marginal = 0, 0
    n = 1000
    for _ in range(n):
        sp = default_params(gamma_m=rng.uniform(0, 1e-4 * K), g_minus=rng.uniform(0, 0.2 * K),
                            g_plus=rng.uniform(0, 0.2 * K), gain=rng.uniform(0, K),
                            theta=rng.uniform(0, 2 * math.pi))
        r = routh_hurwitz(sp)
        if r.marginal:
            marginal += 1
            continue
        agree += r.rh_stable == r.eig_stable
    grid_ok = agree == n - marginal
    ok = unstable_high_gain and unstable_blue and figures_stable and grid_ok
    report(6, ok, f"G=0.6k unstable={unstable_high_gain}, g+>g- unstable={unstable_blue}, "
                  f"{len(figure_sets)} figure sets stable={figures_stable}, "
                  f"agreement {agree}/{n - marginal} ({marginal} marginal)")
    assert ok


def test_criterion_7_robustness(report):
    base = default_params(ratio=0.28, gain=0.4 * K)
    thermal = [_numeric_db(base.replace(n_th=n)) for n in (0.0, 10.0, 100.0)]
    damping = [_numeric_db(base.replace(gamma_m=g)) for g in (1e-6, 1e-5, 1e-4)]
    thetas = np.linspace(0.0, 2 * math.pi, 12, endpoint=False)
    s_theta = np.array([_numeric_db(base.replace(theta=float(t))) for t in thetas])
    s_shift = np.array([_numeric_db(base.replace(theta=float(t) + 2 * math.pi)) for t in thetas])
    period_gap = float(np.max(np.abs(s_theta - s_shift)))
    ok = (min(thermal) > 3 and min(damping) > 3 and period_gap < 1e-12
          and int(np.argmax(s_theta)) == 0)
    report(7, ok, f"n_th S={[round(s, 3) for s in thermal]}, gamma S={[round(s, 3) for s in damping]}, "
                  f"periodicity gap {period_gap:.1e}, argmax theta={thetas[np.argmax(s_theta)]:.3f}")
    assert ok


def test_criterion_8_physicality(report, rwa_runs):
    covs, residual = [], 0.0
    for gain in np.linspace(0.0, 0.45 * K, 8):
        for x in np.linspace(0.0, 0.95, 8):
            sp = default_params(gain=float(gain), ratio=float(x))
            v = steady_state_covariance(sp)
            covs.append(v)
            residual = max(residual, lyapunov_residual(drift_rwa(sp), v, diffusion(sp)))
    n_steady = len(covs)
    for _, traj in rwa_runs.values():
        covs.extend(traj[i] for i in range(len(traj)))

    def physical(v):
        p = v.physicality()
        return (p["asymmetry"] <= 1e-12 and p["min_eig"] > -1e-10
                and p["det_mechanical"] >= 0.25 - 1e-8 and p["det_cavity"] >= 0.25 - 1e-8)

    bad = sum(not physical(v) for v in covs)
    integrals = [wigner(steady_state_covariance(default_params()), b).integral()
                 for b in ("mechanical", "cavity")]
    for v in covs[:n_steady]:
        for b in ("mechanical", "cavity"):
            vb = v.block(b)
            hq, hp = 6 * math.sqrt(vb[0, 0]), 6 * math.sqrt(vb[1, 1])
            integrals.append(wigner(v, b, (-hq, hq), (-hp, hp)).integral())
    norm_ok = all(abs(w - 1) <= 0.01 for w in integrals)
    ok = bad == 0 and norm_ok and residual < 1e-10
    report(8, ok, f"{len(covs)} covariances, {bad} unphysical, "
                  f"wigner integrals in [{min(integrals):.4f}, {max(integrals):.4f}], "
                  f"max residual {residual:.1e}")
    assert ok


def test_criterion_9_adiabatic_consistency(report):
    worst = 0.0
    for x in (0.0, 0.28, 0.6, 0.95):
        for gain in (0.0, 0.2 * K, 0.4 * K):
            sp = default_params(ratio=x, gain=gain, theta=0.0)
            m = adiabatic_model(sp)
            expected = 2 * (sp.g_plus**2 - sp.g_minus**2) / (sp.kappa + 2 * sp.gain)
            worst = max(worst, abs((m.coef_a + m.coef_b) - expected) / abs(expected))
    sp = default_params()
    v44 = steady_state_covariance(sp).variance_p
    vp = analytic_variance_p(sp)
    rel_p = abs(v44 - vp) / vp
    ok = worst < 1e-12 and rel_p < 0.01
    report(9, ok, f"coefficient rel err {worst:.1e}, V44 {v44:.4f} vs {vp:.4f} ({rel_p:.2%})")
    assert ok
