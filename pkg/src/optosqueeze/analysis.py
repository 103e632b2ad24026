"""Squeezing measures, the adiabatic closed form and Wigner grids."""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .dynamics import CovarianceMatrix, steady_state_covariance
from .errors import DomainError, InvalidParameterError, SingularityError
from .model import SystemParams

__all__ = [
    "AdiabaticModel",
    "SqueezingReport",
    "WignerGrid",
    "adiabatic_model",
    "analytic_squeezing_db",
    "analytic_variance_p",
    "analytic_variance_q",
    "optimal_ratio_search",
    "squeezing_db",
    "squeezing_report",
    "wigner",
]

VACUUM_VARIANCE = 0.5
RATIO_CLAMP = 1 - 1e-4
GOLDEN_TOL = 1e-6


def squeezing_db(variance) -> float:
    """Squeezing relative to the vacuum variance 1/2, in dB (positive = squeezed)."""
    variance = float(variance)
    if not variance > 0:
        raise InvalidParameterError(f"variance must be positive, got {variance!r}")
    return -10.0 * math.log10(variance / VACUUM_VARIANCE)


@dataclass(frozen=True)
class AdiabaticModel:
    """Mechanical dynamics with the cavity eliminated.

    ``coef_a``/``coef_b`` multiply ``db`` and ``db^dag``, ``coef_c``/``coef_d``
    the optical input noise and its conjugate, ``coef_e`` the mechanical noise.
    ``q_drift_rate`` is the relaxation rate of the position quadrature and the
    two noise powers are the delta-correlation strengths of the optical and
    thermal forces acting on it.
    """

    coef_a: complex
    coef_b: complex
    coef_c: complex
    coef_d: complex
    coef_e: float
    q_drift_rate: float
    noise_q_optical: float
    noise_q_thermal: float

    def stationary_variance_q(self) -> float:
        # d<Q^2>/dt = N_opt + N_th + 2 rate <Q^2>
        return -(self.noise_q_optical + self.noise_q_thermal) / (2 * self.q_drift_rate)


def adiabatic_model(sp: SystemParams) -> AdiabaticModel:
    k, G, gm, gp = sp.kappa, sp.gain, sp.g_minus, sp.g_plus
    den = k**2 - 4 * G**2
    if abs(den) < 1e-12:
        raise SingularityError("kappa^2 - 4 G^2 vanishes: the OPA sits at its threshold")
    e_p = cmath.exp(1j * sp.theta)
    e_m = e_p.conjugate()
    sqk = math.sqrt(k)
    a = (-gm * (2 * k * gm - 4 * G * e_p * gp) + gp * (2 * k * gp - 4 * G * e_m * gm)) / den
    b = (-gm * (2 * k * gp - 4 * G * e_p * gm) + gp * (2 * k * gm - 4 * G * e_m * gp)) / den
    c = 1j * sqk * (4 * G * e_m * gp + 2 * k * gm) / den
    d = 1j * sqk * (4 * G * e_p * gm + 2 * k * gp) / den
    return AdiabaticModel(
        coef_a=complex(a),
        coef_b=complex(b),
        coef_c=complex(c),
        coef_d=complex(d),
        coef_e=math.sqrt(sp.gamma_m),
        q_drift_rate=2 * (gp**2 - gm**2) / (k + 2 * G),
        noise_q_optical=2 * k * (gm - gp)**2 / (k + 2 * G)**2,
        noise_q_thermal=sp.gamma_m * (2 * sp.n_th + 1) / 2,
    )


def _check_domain(sp, minus_sign=False):
    if not sp.g_plus < sp.g_minus:
        raise DomainError(
            f"closed form needs g_plus < g_minus (got {sp.g_plus:.6g} >= {sp.g_minus:.6g})")
    opa = sp.kappa - 2 * sp.gain if minus_sign else sp.kappa + 2 * sp.gain
    if not opa > 0:
        raise DomainError("closed form needs kappa > 2 G" if minus_sign else
                          "closed form needs kappa + 2 G > 0")
    return opa


def analytic_variance_q(sp: SystemParams) -> float:
    k, gm, gp = sp.kappa, sp.g_minus, sp.g_plus
    kg = _check_domain(sp)
    return (k * (gm - gp) / (2 * kg * (gm + gp))
            + sp.gamma_m * kg * (2 * sp.n_th + 1) / (8 * (gm**2 - gp**2)))


def analytic_variance_p(sp: SystemParams) -> float:
    """Momentum counterpart of :func:`analytic_variance_q`.

    Same elimination repeated for ``dP``: the OPA now enters as ``kappa - 2G``
    and the optical noise weight as ``(g_- + g_+)^2``.
    """
    k, gm, gp = sp.kappa, sp.g_minus, sp.g_plus
    kg = _check_domain(sp, minus_sign=True)
    return (k * (gm + gp) / (2 * kg * (gm - gp))
            + sp.gamma_m * kg * (2 * sp.n_th + 1) / (8 * (gm**2 - gp**2)))


def analytic_squeezing_db(sp: SystemParams) -> float:
    return -10.0 * math.log10(2.0 * analytic_variance_q(sp))


@dataclass(frozen=True)
class SqueezingReport:
    variance_q_numeric: float
    variance_q_analytic: Optional[float]
    s_db_numeric: float
    s_db_analytic: Optional[float]
    params_echo: SystemParams

    def to_dict(self) -> dict:
        return {
            "variance_q_numeric": self.variance_q_numeric,
            "variance_q_analytic": self.variance_q_analytic,
            "s_db_numeric": self.s_db_numeric,
            "s_db_analytic": self.s_db_analytic,
            "params_echo": self.params_echo.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "SqueezingReport":
        keys = {"variance_q_numeric", "variance_q_analytic", "s_db_numeric",
                "s_db_analytic", "params_echo"}
        if set(data) != keys:
            raise InvalidParameterError(f"malformed squeezing report keys: {sorted(data)}")
        report = cls(
            variance_q_numeric=float(data["variance_q_numeric"]),
            variance_q_analytic=None if data["variance_q_analytic"] is None
            else float(data["variance_q_analytic"]),
            s_db_numeric=float(data["s_db_numeric"]),
            s_db_analytic=None if data["s_db_analytic"] is None else float(data["s_db_analytic"]),
            params_echo=SystemParams.from_dict(data["params_echo"]),
        )
        if abs(report.s_db_numeric - squeezing_db(report.variance_q_numeric)) > 1e-9:
            raise InvalidParameterError("s_db_numeric inconsistent with variance_q_numeric")
        if report.variance_q_analytic is not None and report.s_db_analytic is not None:
            if abs(report.s_db_analytic - squeezing_db(report.variance_q_analytic)) > 1e-9:
                raise InvalidParameterError("s_db_analytic inconsistent with variance_q_analytic")
        return report


def squeezing_report(sp: SystemParams, v: Optional[CovarianceMatrix] = None) -> SqueezingReport:
    """Numeric (Lyapunov) and closed-form squeezing for one parameter point.

    The analytic fields are ``None`` where the closed form does not apply.
    """
    if v is None:
        v = steady_state_covariance(sp)
    vq = v.variance_q
    try:
        vq_a = analytic_variance_q(sp)
    except (DomainError, SingularityError):
        vq_a = None
    return SqueezingReport(
        variance_q_numeric=vq,
        variance_q_analytic=vq_a,
        s_db_numeric=squeezing_db(vq),
        s_db_analytic=None if vq_a is None else squeezing_db(vq_a),
        params_echo=sp,
    )


# ---------------------------------------------------------------------------
# Wigner function


@dataclass(frozen=True)
class WignerGrid:
    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray   # values[i, j] at (q_axis[i], p_axis[j])
    block: str
    det: float
    narrow_grid: bool = False

    def integral(self) -> float:
        inner = np.trapezoid(self.values, self.p_axis, axis=1)
        return float(np.trapezoid(inner, self.q_axis))

    def to_csv(self, path_or_file) -> None:
        tag = "mech" if self.block == "mechanical" else "cav"
        lines = [f"# block={tag} det={self.det:.12g}", "q,p,w"]
        for i, q in enumerate(self.q_axis):
            for j, p in enumerate(self.p_axis):
                lines.append(f"{q + 0.0:.12g},{p + 0.0:.12g},{self.values[i, j]:.12g}")
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)


def wigner(v, block="mechanical", q_range=None, p_range=None, points=201) -> WignerGrid:
    """Gaussian Wigner function of one 2x2 block on a rectangular grid.

    Ranges default to +-5 sqrt(max diagonal) of the block. ``narrow_grid`` is
    set on the result when either axis covers less than +-2 standard
    deviations of that quadrature.

    The shared default span undersamples the narrow quadrature of strongly
    squeezed states; pass per-axis ranges there.
    """
    if not isinstance(v, CovarianceMatrix):
        v = CovarianceMatrix(np.asarray(v))
    if block in ("mech", "mechanical"):
        block = "mechanical"
    elif block in ("cav", "cavity"):
        block = "cavity"
    else:
        raise InvalidParameterError(f"block must be 'mechanical' or 'cavity', got {block!r}")
    vb = v.block(block)
    vb = 0.5 * (vb + vb.T)
    det = float(vb[0, 0] * vb[1, 1] - vb[0, 1] * vb[1, 0])
    if det <= 1e-10:
        raise SingularityError(f"{block} block is singular (det={det:.3e})")
    points = int(points)
    if points < 2:
        raise InvalidParameterError("need at least two grid points per axis")
    half = 5.0 * math.sqrt(max(vb[0, 0], vb[1, 1]))
    q_range = (-half, half) if q_range is None else tuple(q_range)
    p_range = (-half, half) if p_range is None else tuple(p_range)
    q = np.linspace(q_range[0], q_range[1], points)
    p = np.linspace(p_range[0], p_range[1], points)

    inv = np.array([[vb[1, 1], -vb[0, 1]], [-vb[1, 0], vb[0, 0]]]) / det
    qq, pp = np.meshgrid(q, p, indexing="ij")
    quad = inv[0, 0] * qq**2 + (inv[0, 1] + inv[1, 0]) * qq * pp + inv[1, 1] * pp**2
    values = np.exp(-0.5 * quad) / (2 * math.pi * math.sqrt(det))

    sq, sp_ = math.sqrt(vb[0, 0]), math.sqrt(vb[1, 1])
    narrow = (min(-q_range[0], q_range[1]) < 2 * sq or min(-p_range[0], p_range[1]) < 2 * sp_)
    return WignerGrid(q, p, values, block, det, narrow)


# ---------------------------------------------------------------------------
# optimal ratio


def optimal_ratio_search(sp_template: SystemParams, ratio_range=(0.0, 1.0),
                         tol=GOLDEN_TOL) -> Tuple[float, float]:
    """Golden-section search for the g_plus/g_minus ratio of strongest squeezing.

    The closed-form position variance is minimized over
    ``[lo, min(hi, 1 - 1e-4)]`` with ``g_minus`` held at its template value.
    Returns ``(x_star, s_star_db)``.
    """
    lo, hi = (float(x) for x in ratio_range)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0 or hi > 1 or not lo < hi:
        raise InvalidParameterError(f"ratio range must satisfy 0 <= lo < hi <= 1, got {ratio_range}")
    if sp_template.g_minus <= 0:
        raise InvalidParameterError("template needs g_minus > 0")
    hi = min(hi, RATIO_CLAMP)
    if not lo < hi:
        raise InvalidParameterError("ratio range is empty after clamping")

    def objective(x):
        return analytic_variance_q(sp_template.replace(g_plus=x * sp_template.g_minus))

    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = objective(d)
    # endpoints are candidates too: the minimum may sit on the clamp
    candidates = [(objective(a), a), (fc, c), (fd, d), (objective(b), b)]
    best_f, best_x = min(candidates, key=lambda fx: (fx[0], fx[1]))
    return best_x, squeezing_db(best_f)
