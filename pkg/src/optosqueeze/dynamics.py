"""Linearized quadrature dynamics and the covariance-matrix equation.

Quadrature ordering is ``(dX, dY, dQ, dP)``: cavity amplitude/phase then
mechanical position/momentum, all in the frame rotating with the shifted
cavity and mechanical frequencies. The covariance obeys

    dV/dt = M V + V M^T + D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (ConvergenceError, DivergenceError, InvalidParameterError,
                     NumericalError, SingularityError, StabilityError)
from .model import SystemParams

__all__ = [
    "CovarianceMatrix",
    "DiffusionMatrix",
    "DriftMatrix",
    "Trajectory",
    "diffusion",
    "drift_rwa",
    "drift_time_dependent",
    "evolve",
    "initial_covariance",
    "lyapunov_residual",
    "steady_state_covariance",
]

TWO_PI = 2.0 * math.pi
DRIVE_PERIOD = math.pi          # period of the 2 omega_m beat
NON_RWA_MAX_STEP = DRIVE_PERIOD / 50
DIVERGENCE_LIMIT = 1e8
FALLBACK_HORIZON = 1e6
_CHECK_CHUNK = 64
_TRANSPOSE = np.arange(16).reshape(4, 4).T.ravel()


def _phase(theta):
    # canonical representative so that S(theta) and S(theta + 2 pi) coincide
    return math.fmod(theta, TWO_PI)


@dataclass(frozen=True)
class DriftMatrix:
    entries: np.ndarray
    time_tag: Union[float, str] = "stationary"

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def stationary(self) -> bool:
        return self.time_tag == "stationary"


@dataclass(frozen=True)
class DiffusionMatrix:
    entries: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric second moments of ``(dX, dY, dQ, dP)``."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.shape != (4, 4):
            raise InvalidParameterError(f"covariance must be 4x4, got shape {a.shape}")
        object.__setattr__(self, "entries", a)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def variance_q(self) -> float:
        return float(self.entries[2, 2])

    @property
    def variance_p(self) -> float:
        return float(self.entries[3, 3])

    def block(self, which="mechanical") -> np.ndarray:
        if which in ("mechanical", "mech"):
            return self.entries[2:, 2:].copy()
        if which in ("cavity", "cav"):
            return self.entries[:2, :2].copy()
        raise InvalidParameterError(f"unknown block {which!r}")

    def mechanical_det(self) -> float:
        return float(np.linalg.det(self.block("mechanical")))

    def physicality(self) -> dict:
        """Symmetry error, smallest eigenvalue and both block determinants."""
        v = self.entries
        return {
            "asymmetry": float(np.max(np.abs(v - v.T))),
            "min_eig": float(np.linalg.eigvalsh(0.5 * (v + v.T)).min()),
            "det_mechanical": self.mechanical_det(),
            "det_cavity": float(np.linalg.det(self.block("cavity"))),
        }

    def is_physical(self, sym_tol=1e-12, psd_tol=1e-10, det_tol=1e-8) -> bool:
        p = self.physicality()
        return (p["asymmetry"] <= sym_tol and p["min_eig"] > -psd_tol
                and p["det_mechanical"] >= 0.25 - det_tol)


def drift_rwa(sp: SystemParams) -> DriftMatrix:
    """Time-independent drift matrix with the 2 omega_m terms dropped."""
    k, gm, gmn, gpl, G = sp.kappa, sp.gamma_m, sp.g_minus, sp.g_plus, sp.gain
    c = G * math.cos(_phase(sp.theta))
    s = G * math.sin(_phase(sp.theta))
    m = np.array([
        [c - k / 2, s, 0.0, gpl - gmn],
        [s, -c - k / 2, gpl + gmn, 0.0],
        [0.0, gpl - gmn, -gm / 2, 0.0],
        [gpl + gmn, 0.0, 0.0, -gm / 2],
    ])
    return DriftMatrix(m, "stationary")


def _coupling_functions(g_minus, g_plus, t):
    e = complex(math.cos(2 * t), math.sin(2 * t))
    f1 = g_minus + g_plus * e
    f2 = g_plus + g_minus * e
    f3 = g_minus + g_plus * e.conjugate()
    return f1, f2, f3


def drift_time_dependent(sp: SystemParams, t) -> DriftMatrix:
    """Full drift matrix M(t) keeping the terms oscillating at 2 omega_m."""
    t = float(t)
    if not math.isfinite(t):
        raise InvalidParameterError("t must be finite")
    k, gm, G = sp.kappa, sp.gamma_m, sp.gain
    c = G * math.cos(_phase(sp.theta))
    s = G * math.sin(_phase(sp.theta))
    f1, f2, f3 = _coupling_functions(sp.g_minus, sp.g_plus, t)
    f23p, f23m = f2 + f3, f2 - f3
    f12p, f21m = f1 + f2, f2 - f1
    m = np.array([
        [c - k / 2, s, -f23p.imag, f23m.real],
        [s, -c - k / 2, f23p.real, f23m.imag],
        [-f12p.imag, f21m.real, -gm / 2, 0.0],
        [f12p.real, f21m.imag, 0.0, -gm / 2],
    ])
    return DriftMatrix(m, t)


def diffusion(sp: SystemParams) -> DiffusionMatrix:
    mech = sp.gamma_m * (2 * sp.n_th + 1) / 2
    return DiffusionMatrix(np.diag([sp.kappa / 2, sp.kappa / 2, mech, mech]))


def initial_covariance(n_th) -> CovarianceMatrix:
    """Cavity vacuum times a mechanical thermal state."""
    n_th = float(n_th)
    if not math.isfinite(n_th) or n_th < 0:
        raise InvalidParameterError(f"n_th must be finite and non-negative, got {n_th!r}")
    return CovarianceMatrix(np.diag([0.5, 0.5, n_th + 0.5, n_th + 0.5]))


def lyapunov_residual(m, v, d) -> float:
    m, v, d = np.asarray(m), np.asarray(v), np.asarray(d)
    return float(np.max(np.abs(m @ v + v @ m.T + d)))


def _lyapunov_operator(m):
    # column-stacked vec: vec(M V) = (I kron M) vec V, vec(V M^T) = (M kron I) vec V
    eye = np.eye(4)
    return np.kron(eye, m) + np.kron(m, eye)


def _vec(a):
    return np.asarray(a).reshape(-1, order="F")


def _unvec(v):
    return v.reshape(4, 4, order="F")


# ---------------------------------------------------------------------------
# integration


def _rhs(m, v, d):
    return m @ v + v @ m.T + d


def _rk4_step(drift_at, d, t, v, h):
    m0 = drift_at(t)
    mh = drift_at(t + h / 2)
    m1 = drift_at(t + h)
    k1 = _rhs(m0, v, d)
    k2 = _rhs(mh, v + h / 2 * k1, d)
    k3 = _rhs(mh, v + h / 2 * k2, d)
    k4 = _rhs(m1, v + h * k3, d)
    return v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _affine_step(drift_at, d, t, h):
    """The RK4 update from t to t + h written as vec V -> P vec V + q.

    The covariance equation is affine in V, so one RK4 step is an affine map;
    it is read off by stepping the zero matrix and the 16 unit matrices.
    """
    zero = np.zeros((4, 4))
    q = _vec(_rk4_step(drift_at, d, t, zero, h))
    p = np.empty((16, 16))
    for j in range(16):
        e = np.zeros(16)
        e[j] = 1.0
        p[:, j] = _vec(_rk4_step(drift_at, d, t, _unvec(e), h)) - q
    return p, q


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n, 4, 4)
    rwa: bool

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> CovarianceMatrix:
        return CovarianceMatrix(self.states[i])

    @property
    def final(self) -> CovarianceMatrix:
        return self[-1]

    def element(self, j, k) -> np.ndarray:
        """Time series of V_jk with 1-based indices, e.g. ``element(3, 3)``."""
        return self.states[:, j - 1, k - 1]

    def csv_header(self) -> str:
        return "t," + ",".join(f"V{j}{k}" for j in range(1, 5) for k in range(1, 5))

    def to_csv(self, path_or_file) -> None:
        lines = [self.csv_header()]
        for t, v in zip(self.times, self.states):
            lines.append(",".join(f"{x + 0.0:.12g}" for x in (t, *v.ravel())))
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)


def evolve(sp: SystemParams, v0=None, t_end=3000.0, dt=1e-2, rwa=True,
           sample_every=100, stepper="affine") -> Trajectory:
    """Integrate the covariance equation with classical fixed-step RK4.

    ``dt`` is an upper bound: the step is shrunk to ``t_end / ceil(t_end / dt)``
    so that ``t_end`` is hit exactly. Every ``sample_every``-th state is kept,
    plus the first and the last. Each state is symmetrized after its step.

    ``stepper="affine"`` precomputes the RK4 update as an affine map (one per
    drive phase when ``rwa`` is false); ``stepper="direct"`` evaluates the
    four stages at every step. Both perform the same arithmetic scheme.

    Raises
    ------
    DivergenceError
        If an entry exceeds ``DIVERGENCE_LIMIT``; ``.time`` holds the time.
    NumericalError
        If a NaN appears.
    """
    if v0 is None:
        v0 = initial_covariance(sp.n_th)
    v0 = np.array(np.asarray(v0), dtype=float)
    if v0.shape != (4, 4) or not np.all(np.isfinite(v0)):
        raise InvalidParameterError("v0 must be a finite 4x4 matrix")
    t_end, dt = float(t_end), float(dt)
    if not (math.isfinite(t_end) and t_end >= 0):
        raise InvalidParameterError("t_end must be finite and non-negative")
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidParameterError("dt must be positive")
    if not rwa and dt > NON_RWA_MAX_STEP * (1 + 1e-12):
        raise InvalidParameterError(
            f"dt={dt} does not resolve the 2 omega_m oscillation (max {NON_RWA_MAX_STEP:.6g})")
    sample_every = int(sample_every)
    if sample_every < 1:
        raise InvalidParameterError("sample_every must be >= 1")
    if stepper not in ("affine", "direct"):
        raise InvalidParameterError(f"unknown stepper {stepper!r}")

    v0 = 0.5 * (v0 + v0.T)
    if t_end == 0:
        return Trajectory(np.array([0.0]), v0[None].copy(), bool(rwa))

    n = math.ceil(t_end / dt - 1e-9)
    h = t_end / n
    d = diffusion(sp).entries
    if rwa:
        m_const = drift_rwa(sp).entries
        drift_at = lambda t: m_const  # noqa: E731
    else:
        drift_at = lambda t: drift_time_dependent(sp, t).entries  # noqa: E731

    steps_per_period = DRIVE_PERIOD / h
    periodic = not rwa and abs(steps_per_period - round(steps_per_period)) < 1e-9
    if stepper == "affine" and (rwa or periodic):
        n_maps = 1 if rwa else int(round(steps_per_period))
        maps = []
        for k in range(n_maps):
            p, q = _affine_step(drift_at, d, k * h, h)
            # symmetrization is linear too: fold it into the map
            maps.append((0.5 * (p + p[_TRANSPOSE]), 0.5 * (q + q[_TRANSPOSE])))

        def advance(k, v):
            p, q = maps[k % n_maps]
            return p @ v + q
        v = _vec(v0)
        to_matrix = _unvec
    else:
        def advance(k, v):
            w = _rk4_step(drift_at, d, k * h, v, h)
            return 0.5 * (w + w.T)
        v = v0
        to_matrix = np.asarray

    times = [0.0]
    states = [v0]
    k = 0
    while k < n:
        stop = min(n, k + _CHECK_CHUNK)
        start_k, start_v = k, v
        samples = []
        while k < stop:
            v = advance(k, v)
            k += 1
            if k % sample_every == 0 or k == n:
                samples.append((k, v))
        if not np.max(np.abs(v)) < DIVERGENCE_LIMIT:
            _locate_divergence(advance, start_k, start_v, stop, h)
        for j, w in samples:
            times.append(j * h)
            states.append(np.array(to_matrix(w)))
    times[-1] = t_end
    return Trajectory(np.array(times), np.array(states), bool(rwa))


def _locate_divergence(advance, k, v, stop, h):
    while k < stop:
        v = advance(k, v)
        k += 1
        big = np.max(np.abs(v))
        if not big < DIVERGENCE_LIMIT:
            if np.isnan(big):
                raise NumericalError(f"NaN in covariance at t={k * h:.6g}")
            raise DivergenceError(
                f"covariance diverged (|V| > {DIVERGENCE_LIMIT:g}) at t={k * h:.6g}; "
                "parameters are likely unstable", time=k * h)
    raise NumericalError("non-finite covariance")


# ---------------------------------------------------------------------------
# stationary solution


def _long_time_limit(m, d, h=1e-2, horizon=FALLBACK_HORIZON, tol=1e-12):
    """Stationary covariance by repeated squaring of the RK4 step map."""
    p, q = _affine_step(lambda t: m, d, 0.0, h)
    v = _vec(np.diag([0.5, 0.5, 0.5, 0.5]))
    t = h
    prev = None
    while t <= horizon:
        w = p @ v + q
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > DIVERGENCE_LIMIT:
            raise ConvergenceError(f"long-time integration diverged at t={t:.3g}")
        if prev is not None and np.max(np.abs(w - prev)) < tol * max(1.0, np.max(np.abs(w))):
            return _unvec(w)
        prev = w
        # compose the map with itself: doubles the covered time
        q = p @ q + q
        p = p @ p
        t *= 2
    raise ConvergenceError(f"no stationary state reached within t={horizon:g}")


def steady_state_covariance(sp: SystemParams) -> CovarianceMatrix:
    """Solve ``M V + V M^T = -D`` for the RWA drift matrix.

    The 16 unknowns are obtained from the column-stacked linear system. If
    that system is singular, the stationary state is approached by
    long-time integration instead.

    Raises
    ------
    StabilityError
        If the drift matrix is not Hurwitz.
    """
    from .stability import eigen_stable

    m = drift_rwa(sp)
    max_re, stable = eigen_stable(m)
    if not stable:
        raise StabilityError(
            f"drift matrix is unstable (max Re eigenvalue {max_re:.3e}); no steady state")
    d = diffusion(sp).entries
    try:
        v = _unvec(np.linalg.solve(_lyapunov_operator(m.entries), -_vec(d)))
    except np.linalg.LinAlgError:
        v = _long_time_limit(m.entries, d)
    v = 0.5 * (v + v.T)
    if not np.all(np.isfinite(v)):
        raise SingularityError("Lyapunov solution is not finite")
    return CovarianceMatrix(v)
