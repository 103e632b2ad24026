import io
import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from optosqueeze.dynamics import (NON_RWA_MAX_STEP, CovarianceMatrix, _long_time_limit,
                                  diffusion, drift_rwa, drift_time_dependent, evolve,
                                  initial_covariance, lyapunov_residual,
                                  steady_state_covariance)
from optosqueeze.errors import DivergenceError, InvalidParameterError, StabilityError
from optosqueeze.model import default_params
from optosqueeze.stability import eigen_stable


def test_drift_rwa_reference_entries():
    m = drift_rwa(default_params(gain=0.02, theta=0.0)).entries
    np.testing.assert_allclose(m[0], [-0.005, 0.0, 0.0, -0.0072], rtol=0, atol=1e-15)
    assert m[1, 2] == pytest.approx(0.0128, abs=1e-15)
    assert m[2, 2] == m[3, 3] == -5e-7
    for j, k in [(0, 2), (1, 3), (2, 0), (3, 1)]:
        assert m[j, k] == 0.0


@pytest.mark.parametrize("theta", [0.0, 0.7, math.pi])
def test_drift_rwa_without_gain(theta):
    m = drift_rwa(default_params(gain=0.0, theta=theta)).entries
    np.testing.assert_array_equal(m[:2, :2], np.diag([-0.025, -0.025]))


def test_drift_rwa_quarter_phase():
    m = drift_rwa(default_params(gain=0.02, theta=math.pi / 2)).entries
    assert m[0, 0] == pytest.approx(-0.025, abs=1e-17)
    assert m[1, 1] == pytest.approx(-0.025, abs=1e-17)
    assert m[0, 1] == m[1, 0] == 0.02


def test_drift_time_dependent_at_origin(sp):
    m = drift_time_dependent(sp, 0.0).entries
    g = sp.g_minus + sp.g_plus
    assert m[1, 2] == pytest.approx(2 * g) and m[3, 0] == pytest.approx(2 * g)
    assert m[0, 3] == 0.0 and m[2, 1] == 0.0
    assert m[0, 2] == m[1, 3] == m[2, 0] == m[3, 1] == 0.0


def test_drift_time_dependent_quarter_period(sp):
    # e^{2it} = e^{i pi} = -1: f1 = g- - g+, f2 = g+ - g-, f3 = g- - g+
    m = drift_time_dependent(sp, math.pi / 2).entries
    f1 = sp.g_minus - sp.g_plus
    f2 = -f1
    assert m[1, 2] == pytest.approx(0.0, abs=1e-17)       # R(f2 + f3)
    assert m[0, 3] == pytest.approx(2 * f2, abs=1e-17)    # R(f2 - f3)
    assert m[3, 0] == pytest.approx(0.0, abs=1e-17)       # R(f1 + f2)
    assert m[2, 1] == pytest.approx(2 * f2, abs=1e-17)    # R(f2 - f1)


def test_drift_time_dependent_diagonal_matches_rwa(sp):
    rwa = drift_rwa(sp).entries
    for t in np.linspace(0, 10, 17):
        m = drift_time_dependent(sp, t).entries
        np.testing.assert_array_equal(np.diag(m), np.diag(rwa))
        np.testing.assert_array_equal(m[:2, :2], rwa[:2, :2])


@pytest.mark.parametrize("n", [64, 100])
def test_period_average_equals_rwa(sp, n):
    ts = np.arange(n) * math.pi / n
    avg = np.mean([drift_time_dependent(sp, t).entries for t in ts], axis=0)
    np.testing.assert_allclose(avg, drift_rwa(sp).entries, rtol=0, atol=1e-8)


def test_diffusion_entries():
    d = diffusion(default_params(n_th=0.0)).entries
    np.testing.assert_allclose(np.diag(d), [0.025, 0.025, 5e-7, 5e-7], rtol=1e-15)
    assert np.count_nonzero(d - np.diag(np.diag(d))) == 0
    d = diffusion(default_params(n_th=100.0)).entries
    assert d[2, 2] == pytest.approx(1e-6 * 201 / 2, rel=1e-15)
    d = diffusion(default_params(n_th=0.0, gamma_m=0.0)).entries
    np.testing.assert_array_equal(np.diag(d), [0.025, 0.025, 0.0, 0.0])


def test_initial_covariance():
    np.testing.assert_array_equal(initial_covariance(0).entries, np.diag([0.5] * 4))
    np.testing.assert_array_equal(initial_covariance(10).entries, np.diag([0.5, 0.5, 10.5, 10.5]))
    assert initial_covariance(0).mechanical_det() == pytest.approx(0.25, abs=1e-16)
    with pytest.raises(InvalidParameterError):
        initial_covariance(-1)


def test_evolve_zero_horizon(sp):
    v0 = initial_covariance(3.0)
    tr = evolve(sp, v0, t_end=0.0)
    assert len(tr) == 1
    np.testing.assert_array_equal(tr.states[0], v0.entries)


def test_evolve_samples_and_endpoints(sp):
    tr = evolve(sp, t_end=10.0, dt=0.3, sample_every=5)
    assert tr.times[0] == 0.0 and tr.times[-1] == 10.0
    assert np.all(np.diff(tr.times) > 0)


@pytest.mark.parametrize("rwa", [True, False])
def test_affine_and_direct_steppers_agree(sp, rwa):
    kw = dict(t_end=60.0, dt=math.pi / 50, rwa=rwa, sample_every=7)
    a = evolve(sp, stepper="affine", **kw)
    b = evolve(sp, stepper="direct", **kw)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_allclose(a.states, b.states, rtol=0, atol=1e-12)


def test_non_rwa_requires_resolved_step(sp):
    with pytest.raises(InvalidParameterError):
        evolve(sp, t_end=1.0, dt=1.1 * NON_RWA_MAX_STEP, rwa=False)


def test_richardson_fourth_order():
    # large couplings so the truncation error sits far above roundoff
    sp = default_params(kappa=1.0, gamma_m=0.1, g_minus=0.4, g_plus=0.1, gain=0.2, theta=0.3)
    ends = [evolve(sp, t_end=8.0, dt=h, sample_every=10**6).final.entries
            for h in (0.4, 0.2, 0.1)]
    ratio = np.max(np.abs(ends[0] - ends[1])) / np.max(np.abs(ends[1] - ends[2]))
    assert 8 <= ratio <= 32


def test_unstable_run_raises_divergence():
    sp = default_params(gain=0.03)
    with pytest.raises(DivergenceError) as info:
        evolve(sp, t_end=50000.0, dt=0.5, sample_every=10**6)
    assert 0 < info.value.time < 50000.0


def test_trajectory_csv_layout(sp):
    tr = evolve(sp, t_end=1.0, dt=0.5, sample_every=1)
    buf = io.StringIO()
    tr.to_csv(buf)
    lines = buf.getvalue().splitlines()
    header = lines[0].split(",")
    assert header[0] == "t" and header[1] == "V11" and header[-1] == "V44" and len(header) == 17
    assert len(lines) == 1 + len(tr)
    row = [float(x) for x in lines[-1].split(",")]
    assert row[0] == 1.0
    np.testing.assert_allclose(row[1:], tr.states[-1].ravel(), rtol=1e-11)


@settings(max_examples=25, deadline=None)
@given(x=st.floats(0.0, 0.9), g_frac=st.floats(0.0, 0.45), n_th=st.floats(0, 50),
       theta=st.floats(0, 2 * math.pi))
def test_steady_state_matches_scipy(x, g_frac, n_th, theta):
    sp = default_params(ratio=x, gain=g_frac * 0.05, n_th=n_th, theta=theta)
    if not eigen_stable(drift_rwa(sp))[1]:
        return
    v = steady_state_covariance(sp).entries
    m, d = drift_rwa(sp).entries, diffusion(sp).entries
    oracle = sla.solve_continuous_lyapunov(m, -d)
    np.testing.assert_allclose(v, oracle, rtol=1e-8, atol=1e-12)
    assert lyapunov_residual(m, v, d) < 1e-10
    assert CovarianceMatrix(v).is_physical()


def test_steady_uncoupled_vacuum():
    sp = default_params(g_minus=0.0, g_plus=0.0, gain=0.0, n_th=0.0)
    np.testing.assert_allclose(steady_state_covariance(sp).entries, np.diag([0.5] * 4),
                               rtol=0, atol=1e-12)


def test_steady_reference_point(sp):
    v = steady_state_covariance(sp)
    assert v.variance_q == pytest.approx(0.1565, abs=1e-3)
    assert v.variance_q == pytest.approx(0.1563720703125, rel=5e-3)
    assert v.mechanical_det() >= 0.25


def test_pure_sideband_cooling_limit():
    v = steady_state_covariance(default_params(gain=0.0, g_plus=0.0))
    assert 0.5 <= v.variance_q <= 0.5001


def test_steady_unstable_raises():
    with pytest.raises(StabilityError):
        steady_state_covariance(default_params(gain=0.03))


def test_long_time_fallback_matches_direct_solve(sp):
    m, d = drift_rwa(sp).entries, diffusion(sp).entries
    v = _long_time_limit(m, d)
    np.testing.assert_allclose(v, sla.solve_continuous_lyapunov(m, -d), rtol=0, atol=1e-8)


def test_singular_system_falls_back(monkeypatch, sp):
    def singular(*args, **kwargs):
        raise np.linalg.LinAlgError("singular")
    monkeypatch.setattr(np.linalg, "solve", singular)
    v = steady_state_covariance(sp)
    assert v.variance_q == pytest.approx(0.15633772, rel=1e-6)


@pytest.mark.parametrize("gain", [0.0, 0.01, 0.02, 0.024, 0.026, 0.03])
@pytest.mark.parametrize("ratio", [0.0, 0.5, 0.99, 1.2])
def test_steady_solve_succeeds_iff_eigen_stable(gain, ratio):
    sp = default_params(gain=gain, ratio=ratio)
    stable = eigen_stable(drift_rwa(sp))[1]
    try:
        steady_state_covariance(sp)
        solved = True
    except StabilityError:
        solved = False
    assert solved == stable
