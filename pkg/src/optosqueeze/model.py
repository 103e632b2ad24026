"""System parameters, unit conversion and the classical steady state.

Everything inside the package is expressed in units of the mechanical
frequency (``omega_m == 1``); laboratory units appear only in
:class:`PhysicalParams` and are converted by :func:`normalize_params`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConvergenceError, InvalidParameterError, SingularityError

__all__ = [
    "CODATA",
    "Couplings",
    "PhysicalConstants",
    "PhysicalParams",
    "SteadyState",
    "SystemParams",
    "cavity_amplitudes",
    "couplings",
    "default_params",
    "normalize_params",
    "resolve_physical",
    "solve_steady_amplitudes",
    "thermal_occupation",
]

MAX_ITERATIONS = 100
RTOL = 1e-10
SINGULAR_DENOMINATOR = 1e-9


def _finite(name, value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34
    kB: float = 1.380649e-23
    c: float = 299792458.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if _finite(f.name, getattr(self, f.name)) <= 0:
                raise InvalidParameterError(f"{f.name} must be positive")


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory description of the setup.

    ``omega_m_hz`` is an angular frequency in rad/s despite its name; the rate
    ratios (``kappa_ratio`` and friends) are already relative to it.
    """

    omega_m_hz: float = 2 * math.pi * 25.45e6
    lambda_minus_m: float = 1564.25e-9
    power_plus_w: float = 0.0
    power_minus_w: float = 1e-4
    temperature_k: float = 0.0
    kappa_ratio: float = 0.05
    gamma_ratio: float = 1e-6
    g0_ratio: float = 2e-5
    gain_ratio: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            _finite(f.name, getattr(self, f.name))
        if self.omega_m_hz <= 0:
            raise InvalidParameterError("omega_m_hz must be positive")
        if self.lambda_minus_m <= 0:
            raise InvalidParameterError("lambda_minus_m must be positive")
        for name in ("power_plus_w", "power_minus_w", "temperature_k",
                     "kappa_ratio", "gamma_ratio", "g0_ratio", "gain_ratio"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be non-negative")


@dataclass(frozen=True)
class SystemParams:
    """Dimensionless model parameters, all rates in units of omega_m.

    ``eps_plus``, ``eps_minus`` and ``omega_c`` are only populated when the
    parameters originate from :func:`normalize_params`; ``omega_c_eff`` once a
    steady state has been solved. Parameter sets built directly from the
    couplings ``g_minus``/``g_plus`` leave them as ``None``.
    """

    kappa: float
    gamma_m: float
    g_minus: float
    g_plus: float
    gain: float = 0.0
    theta: float = 0.0
    n_th: float = 0.0
    g0: float = 2e-5
    eps_plus: Optional[float] = None
    eps_minus: Optional[float] = None
    omega_c: Optional[float] = None
    omega_c_eff: Optional[float] = None

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is None and f.default is None:
                continue
            object.__setattr__(self, f.name, _finite(f.name, value))
        if self.kappa <= 0:
            raise InvalidParameterError("kappa must be positive")
        for name in ("gamma_m", "g_minus", "g_plus", "gain", "n_th", "g0"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be non-negative")
        for name in ("eps_plus", "eps_minus"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise InvalidParameterError(f"{name} must be non-negative")

    @property
    def pump_freq(self) -> Optional[float]:
        # frequency matching: the OPA pump sits at twice the shifted cavity frequency
        if self.omega_c_eff is None:
            return None
        return 2.0 * self.omega_c_eff

    @property
    def ratio(self) -> float:
        if self.g_minus == 0:
            return math.inf if self.g_plus > 0 else 0.0
        return self.g_plus / self.g_minus

    def replace(self, **changes) -> "SystemParams":
        """Return a copy with some fields changed; ``ratio`` sets g_plus."""
        ratio = changes.pop("ratio", None)
        new = dataclasses.replace(self, **changes)
        if ratio is not None:
            new = dataclasses.replace(new, g_plus=_finite("ratio", ratio) * new.g_minus)
        return new

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidParameterError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**data)


def default_params(**overrides) -> SystemParams:
    """Parameter set used throughout the reference figures.

    kappa = 0.05, gamma_m = 1e-6, g_- = 0.01, g_+ = 0.0028, G = 0.4 kappa,
    theta = 0, n_th = 0.
    """
    base = SystemParams(kappa=0.05, gamma_m=1e-6, g_minus=0.01, g_plus=0.0028,
                        gain=0.02, theta=0.0, n_th=0.0, g0=2e-5)
    return base.replace(**overrides) if overrides else base


def thermal_occupation(omega, temperature, constants: PhysicalConstants = CODATA) -> float:
    """Bose factor 1/(exp(hbar omega / kB T) - 1); exactly 0 at T = 0."""
    if temperature < 0:
        raise InvalidParameterError("temperature must be non-negative")
    if temperature == 0:
        return 0.0
    x = constants.hbar * omega / (constants.kB * temperature)
    if x > 700:
        return 0.0
    return 1.0 / math.expm1(x)


def normalize_params(p: PhysicalParams, constants: PhysicalConstants = CODATA) -> SystemParams:
    """Convert laboratory parameters to omega_m units.

    The red laser frequency is ``2 pi c / lambda_minus``; the cavity sits one
    mechanical frequency above it and the blue laser one above the cavity.
    Drive strengths follow ``eps = sqrt(kappa P / (hbar omega_laser))``.

    The couplings ``g_minus``/``g_plus`` of the result are zero; use
    :func:`resolve_physical` to also solve the steady state.
    """
    if not isinstance(p, PhysicalParams):
        raise InvalidParameterError("expected PhysicalParams")
    wm = p.omega_m_hz
    omega_minus = 2 * math.pi * constants.c / p.lambda_minus_m
    omega_c = omega_minus + wm
    omega_plus = omega_c + wm
    kappa = p.kappa_ratio * wm
    eps_minus = math.sqrt(kappa * p.power_minus_w / (constants.hbar * omega_minus)) / wm
    eps_plus = math.sqrt(kappa * p.power_plus_w / (constants.hbar * omega_plus)) / wm
    return SystemParams(
        kappa=p.kappa_ratio,
        gamma_m=p.gamma_ratio,
        g_minus=0.0,
        g_plus=0.0,
        gain=p.gain_ratio,
        theta=p.theta,
        n_th=thermal_occupation(wm, p.temperature_k, constants),
        g0=p.g0_ratio,
        eps_plus=eps_plus,
        eps_minus=eps_minus,
        omega_c=omega_c / wm,
    )


@dataclass(frozen=True)
class SteadyState:
    alpha_plus: float
    alpha_minus: float
    beta: float
    omega_c_eff: Optional[float]
    frequency_shift: float
    iterations: int
    residual: float = field(default=0.0)


def cavity_amplitudes(eps_plus, eps_minus, kappa, gain, detuning_plus, detuning_minus):
    """Complex sideband amplitudes for fixed detunings ``omega_pm - omega_c_eff``.

    Linear in the drive strengths.
    """
    out = []
    for eps, delta in ((eps_plus, detuning_plus), (eps_minus, detuning_minus)):
        den = 4 * gain**2 - kappa**2 - 4 * delta**2
        if abs(den) < SINGULAR_DENOMINATOR:
            raise SingularityError(
                f"resonant amplitude denominator {den:.3e} at detuning {delta!r}")
        out.append(2 * eps * (1j * kappa - 2 * delta) / den)
    return out[0], out[1]


def solve_steady_amplitudes(sp: SystemParams, eps_plus=None, eps_minus=None) -> SteadyState:
    """Self-consistent classical amplitudes of the two-tone driven cavity.

    Iterates ``beta -> g0 (|alpha_+|^2 + |alpha_-|^2)`` with the cavity
    frequency pulled by ``2 g0 beta``; the ``2 omega_m`` beat of
    ``|alpha(t)|^2`` is averaged out. Drives default to ``sp.eps_plus`` and
    ``sp.eps_minus``.

    Raises
    ------
    SingularityError
        If a sideband is resonant with the parametrically modified cavity.
    ConvergenceError
        If the fixed point is not reached within ``MAX_ITERATIONS``.
    """
    eps_plus = sp.eps_plus if eps_plus is None else eps_plus
    eps_minus = sp.eps_minus if eps_minus is None else eps_minus
    if eps_plus is None or eps_minus is None:
        raise InvalidParameterError("drive strengths are required")
    eps_plus = _finite("eps_plus", eps_plus)
    eps_minus = _finite("eps_minus", eps_minus)
    if eps_plus < 0 or eps_minus < 0:
        raise InvalidParameterError("drive strengths must be non-negative")

    beta = 0.0
    for it in range(1, MAX_ITERATIONS + 1):
        shift = 2 * sp.g0 * beta
        a_plus, a_minus = cavity_amplitudes(eps_plus, eps_minus, sp.kappa, sp.gain,
                                            1.0 + shift, -1.0 + shift)
        beta_new = sp.g0 * (abs(a_plus)**2 + abs(a_minus)**2)
        residual = abs(beta_new - beta)
        if residual <= RTOL * max(1.0, abs(beta_new)):
            break
        beta = beta_new
    else:
        raise ConvergenceError(
            f"steady state did not converge in {MAX_ITERATIONS} iterations "
            f"(last residual {residual:.3e})")

    return SteadyState(
        alpha_plus=abs(a_plus),
        alpha_minus=abs(a_minus),
        beta=beta,
        omega_c_eff=None if sp.omega_c is None else sp.omega_c - shift,
        frequency_shift=shift,
        iterations=it,
        residual=residual,
    )


@dataclass(frozen=True)
class Couplings:
    g_minus: float
    g_plus: float
    r: Optional[float]
    g_eff: Optional[float]

    @property
    def in_working_regime(self) -> bool:
        """False when g_plus >= g_minus and the Bogoliubov mode is undefined."""
        return self.r is not None


def bogoliubov(g_minus, g_plus):
    """Squeezing coefficient r and effective coupling, or ``(None, None)``."""
    if not g_plus < g_minus:
        return None, None
    r = 0.5 * math.log((g_minus + g_plus) / (g_minus - g_plus))
    g_eff = math.sqrt(g_minus**2 - g_plus**2)
    return r, g_eff


def couplings(ss: SteadyState, g0) -> Couplings:
    g0 = _finite("g0", g0)
    if g0 < 0:
        raise InvalidParameterError("g0 must be non-negative")
    g_minus = g0 * ss.alpha_minus
    g_plus = g0 * ss.alpha_plus
    r, g_eff = bogoliubov(g_minus, g_plus)
    return Couplings(g_minus=g_minus, g_plus=g_plus, r=r, g_eff=g_eff)


def resolve_physical(p: PhysicalParams, constants: PhysicalConstants = CODATA) -> SystemParams:
    """Normalize, solve the steady state and fill in the linearized couplings."""
    sp = normalize_params(p, constants)
    ss = solve_steady_amplitudes(sp)
    c = couplings(ss, sp.g0)
    return sp.replace(g_minus=c.g_minus, g_plus=c.g_plus, omega_c_eff=ss.omega_c_eff)
