"""Stability of the linearized dynamics.

Two verdicts are produced: the closed-form Routh-Hurwitz inequalities for the
RWA drift matrix, and a direct eigenvalue test. The eigenvalue test is the
one the rest of the package acts on.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np

from .dynamics import DriftMatrix, drift_rwa
from .errors import InvalidParameterError, NumericalError
from .model import SystemParams

__all__ = ["StabilityReport", "eigen_stable", "routh_hurwitz", "routh_hurwitz_values"]

POSITIVE_TOL = 1e-18
EIG_TOL = 1e-12


@dataclass(frozen=True)
class StabilityReport:
    rh_values: Tuple[float, float, float]
    rh_stable: bool
    max_real_eig: float
    eig_stable: bool
    sufficient: bool
    marginal: bool = False

    @property
    def stable(self) -> bool:
        return self.eig_stable

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rh_values"] = list(self.rh_values)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "StabilityReport":
        expected = {"rh_values", "rh_stable", "max_real_eig", "eig_stable", "sufficient", "marginal"}
        if set(data) - expected or not {"rh_values", "eig_stable"} <= set(data):
            raise InvalidParameterError(f"malformed stability report keys: {sorted(data)}")
        values = tuple(float(x) for x in data["rh_values"])
        if len(values) != 3:
            raise InvalidParameterError("rh_values must have three entries")
        return cls(rh_values=values, rh_stable=bool(data["rh_stable"]),
                   max_real_eig=float(data["max_real_eig"]),
                   eig_stable=bool(data["eig_stable"]), sufficient=bool(data["sufficient"]),
                   marginal=bool(data.get("marginal", False)))


def routh_hurwitz_values(kappa, gamma_m, g_minus, g_plus, gain):
    """Left-hand sides of the three simplified Routh-Hurwitz inequalities.

    The phase of the pump does not enter.
    """
    k, g, G = kappa, gamma_m, gain
    opa = k**2 - 4 * G**2
    eff = g_minus**2 - g_plus**2
    first = g**2 / 16 * opa + k * g / 2 * eff + eff**2
    second = k / 4 * opa + (eff + (g**2 + 3 * k * g) / 4) * (k + g) + k**2 * g / 4
    third = ((k * g * opa + 4 * eff * (k + g)**2 + k * g**3 + 2 * k**2 * g**2)
             * (opa + g**2 + 2 * k * g) / 16)
    return first, second, third


def eigen_stable(m) -> Tuple[float, bool]:
    """Largest real part of the eigenvalues of a stationary drift matrix."""
    if isinstance(m, DriftMatrix):
        if not m.stationary:
            raise InvalidParameterError("eigenvalue test needs the stationary (RWA) drift matrix")
        m = m.entries
    m = np.asarray(m, dtype=float)
    try:
        eig = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue solver failed for drift matrix\n{m}") from exc
    max_re = float(np.max(eig.real))
    return max_re, max_re < -EIG_TOL


def routh_hurwitz(sp: SystemParams) -> StabilityReport:
    values = routh_hurwitz_values(sp.kappa, sp.gamma_m, sp.g_minus, sp.g_plus, sp.gain)
    max_re, eig_ok = eigen_stable(drift_rwa(sp))
    return StabilityReport(
        rh_values=values,
        rh_stable=all(v > POSITIVE_TOL for v in values),
        max_real_eig=max_re,
        eig_stable=eig_ok,
        sufficient=sp.gain < 0.5 * sp.kappa and sp.g_plus < sp.g_minus,
        marginal=any(abs(v) <= POSITIVE_TOL for v in values),
    )
