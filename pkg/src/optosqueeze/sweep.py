"""Cartesian parameter sweeps and the figure presets built on them."""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analysis import analytic_variance_q, squeezing_db
from .dynamics import steady_state_covariance
from .errors import DomainError, InvalidParameterError, OptosqueezeError, SingularityError
from .model import SystemParams, default_params
from .stability import routh_hurwitz

__all__ = ["AXIS_NAMES", "OUTPUTS", "PRESETS", "SweepSpec", "SweepTable",
           "evaluate_point", "figure_preset", "run_sweep"]

AXIS_NAMES = ("kappa", "gamma_m", "g_minus", "g_plus", "gain", "theta", "n_th", "g0", "ratio")
OUTPUTS = ("s_numeric", "s_analytic", "variance_q", "variance_p", "stable",
           "rh_values", "max_real_eig")
_FIELDS_OUT = {"rh_values": ("rh1", "rh2", "rh3")}


@dataclass(frozen=True)
class SweepSpec:
    base: SystemParams
    axes: Tuple[Tuple[str, Tuple[float, ...]], ...]
    outputs: Tuple[str, ...] = OUTPUTS
    name: Optional[str] = None

    def __post_init__(self):
        axes = tuple((str(n), tuple(float(x) for x in vals)) for n, vals in self.axes)
        seen = set()
        for name, values in axes:
            if name not in AXIS_NAMES:
                raise InvalidParameterError(
                    f"unknown sweep axis {name!r}; valid axes: {', '.join(AXIS_NAMES)}")
            if name in seen:
                raise InvalidParameterError(f"axis {name!r} listed twice")
            seen.add(name)
            if not values:
                raise InvalidParameterError(f"axis {name!r} has no values")
            for i, x in enumerate(values):
                if not math.isfinite(x):
                    raise InvalidParameterError(f"axis {name!r} index {i}: non-finite value {x!r}")
        if "ratio" in seen and "g_plus" in seen:
            raise InvalidParameterError("axes 'ratio' and 'g_plus' are mutually exclusive")
        outputs = tuple(self.outputs)
        for o in outputs:
            if o not in OUTPUTS:
                raise InvalidParameterError(f"unknown output {o!r}; valid: {', '.join(OUTPUTS)}")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "outputs", outputs)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(v) for _, v in self.axes)

    @property
    def axis_names(self) -> Tuple[str, ...]:
        return tuple(n for n, _ in self.axes)

    def with_outputs(self, outputs) -> "SweepSpec":
        return SweepSpec(self.base, self.axes, tuple(outputs), self.name)

    def points(self) -> List[SystemParams]:
        """Parameter sets in row-major order over the axes as listed."""
        names = self.axis_names
        for name, values in self.axes:
            for i, x in enumerate(values):
                try:
                    if name == "ratio" and x < 0:
                        raise InvalidParameterError("ratio must be non-negative")
                    self.base.replace(**{name: x})
                except InvalidParameterError as exc:
                    raise InvalidParameterError(f"axis {name!r} index {i}: {exc}") from None
        out = []
        for combo in itertools.product(*(v for _, v in self.axes)):
            changes = dict(zip(names, combo))
            ratio = changes.pop("ratio", None)
            sp = self.base.replace(**changes)
            if ratio is not None:
                sp = sp.replace(ratio=ratio)
            out.append(sp)
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base": self.base.to_dict(),
            "axes": [[n, list(v)] for n, v in self.axes],
            "outputs": list(self.outputs),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        return cls(base=SystemParams.from_dict(data["base"]),
                   axes=tuple((n, tuple(v)) for n, v in data["axes"]),
                   outputs=tuple(data.get("outputs", OUTPUTS)),
                   name=data.get("name"))


def _columns(spec: SweepSpec) -> List[str]:
    cols = list(spec.axis_names)
    for o in spec.outputs:
        cols.extend(_FIELDS_OUT.get(o, (o,)))
    cols.append("error")
    return cols


def evaluate_point(sp: SystemParams, outputs: Sequence[str] = OUTPUTS) -> Dict[str, object]:
    """Stability first, then steady covariance and squeezing for stable points.

    Unstable points and failed evaluations get ``None`` for every squeezing
    and variance field; failures are described in ``error``.
    """
    row: Dict[str, object] = {"error": None}
    report = routh_hurwitz(sp)
    if "stable" in outputs:
        row["stable"] = report.eig_stable
    if "rh_values" in outputs:
        row.update(zip(_FIELDS_OUT["rh_values"], report.rh_values))
    if "max_real_eig" in outputs:
        row["max_real_eig"] = report.max_real_eig
    for key in ("s_numeric", "s_analytic", "variance_q", "variance_p"):
        if key in outputs:
            row[key] = None
    if not report.eig_stable:
        return row

    try:
        v = steady_state_covariance(sp)
        if "variance_q" in outputs:
            row["variance_q"] = v.variance_q
        if "variance_p" in outputs:
            row["variance_p"] = v.variance_p
        if "s_numeric" in outputs:
            row["s_numeric"] = squeezing_db(v.variance_q)
    except (OptosqueezeError, np.linalg.LinAlgError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    if "s_analytic" in outputs:
        try:
            row["s_analytic"] = squeezing_db(analytic_variance_q(sp))
        except (DomainError, SingularityError, InvalidParameterError) as exc:
            row["error"] = f"analytic: {exc}"
    return row


def _evaluate_chunk(args):
    points, outputs = args
    return [evaluate_point(sp, outputs) for sp in points]


@dataclass
class SweepTable:
    columns: List[str]
    rows: List[Dict[str, object]]
    provenance: Dict[str, object] = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def column(self, name) -> np.ndarray:
        """Column as a float array; ``None`` becomes NaN, booleans 0/1."""
        if name not in self.columns:
            raise KeyError(name)
        return np.array([np.nan if r[name] is None else float(r[name]) for r in self.rows])

    def select(self, **fixed) -> "SweepTable":
        rows = [r for r in self.rows if all(r[k] == v for k, v in fixed.items())]
        return SweepTable(self.columns, rows, self.provenance)

    def to_csv(self, path_or_file) -> None:
        lines = [",".join(self.columns)]
        for r in self.rows:
            lines.append(",".join(_cell(r[c]) for c in self.columns))
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)

    def write_provenance(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.provenance, fh, indent=2)
            fh.write("\n")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value + 0.0:.12g}"
    text = str(value)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def run_sweep(spec: SweepSpec, workers: Optional[int] = None) -> SweepTable:
    """Evaluate every grid point of ``spec``.

    With ``workers > 1`` points are fanned out over a process pool in
    contiguous chunks; rows are always returned in grid order.
    """
    from . import __version__

    points = spec.points()
    axis_values = list(itertools.product(*(v for _, v in spec.axes)))
    if workers is not None and workers > 1 and len(points) > 1:
        size = max(1, math.ceil(len(points) / (4 * workers)))
        chunks = [(points[i:i + size], spec.outputs) for i in range(0, len(points), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [row for chunk in pool.map(_evaluate_chunk, chunks) for row in chunk]
    else:
        results = _evaluate_chunk((points, spec.outputs))

    columns = _columns(spec)
    rows = []
    for values, res in zip(axis_values, results):
        row = dict(zip(spec.axis_names, values))
        row.update(res)
        rows.append({c: row.get(c) for c in columns})
    provenance = {"package": "optosqueeze", "version": __version__, "spec": spec.to_dict()}
    return SweepTable(columns, rows, provenance)


# ---------------------------------------------------------------------------
# presets

PRESETS = ("fig3a", "fig3b", "fig5a", "fig5b", "fig5c", "fig5d", "fig5e", "fig5f",
           "fig6a", "fig6b")
_SINGLE = ("s_numeric", "variance_q", "stable", "max_real_eig")
_BOTH = ("s_numeric", "s_analytic", "variance_q", "stable", "max_real_eig")


def figure_preset(name: str, base: Optional[SystemParams] = None, resolution: int = 200,
                  theta_points: int = 7) -> SweepSpec:
    """Sweep reproducing the data behind one of the reference figures.

    Gain axes span ``[0, 0.45 kappa]`` and ratio axes ``[0, 0.99]`` with
    ``resolution`` points each; the theta axis has ``theta_points`` values
    in ``[0, pi]``.
    """
    if name not in PRESETS:
        raise InvalidParameterError(f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}")
    base = default_params() if base is None else base
    k = base.kappa
    base = base.replace(gain=0.4 * k, ratio=0.28)
    gain_axis = ("gain", tuple(np.linspace(0.0, 0.45 * k, resolution)))
    ratio_axis = ("ratio", tuple(np.linspace(0.0, 0.99, resolution)))
    theta_axis = ("theta", tuple(np.linspace(0.0, math.pi, theta_points)))
    gamma_axis = ("gamma_m", (1e-4, 1e-5, 1e-6))
    nth_axis = ("n_th", (0.0, 10.0, 100.0))
    two_gains = ("gain", (0.0, 0.4 * k))
    two_ratios = ("ratio", (0.0, 0.28))

    axes = {
        "fig3a": (gain_axis, two_ratios),
        "fig3b": (ratio_axis, two_gains),
        "fig5a": (theta_axis, gain_axis),
        "fig5b": (theta_axis, ratio_axis),
        "fig5c": (gamma_axis, gain_axis),
        "fig5d": (gamma_axis, two_gains, ratio_axis),
        "fig5e": (nth_axis, gain_axis),
        "fig5f": (nth_axis, ratio_axis),
        "fig6a": (gain_axis, two_ratios),
        "fig6b": (ratio_axis, two_gains),
    }[name]
    outputs = _BOTH if name.startswith("fig6") else _SINGLE
    return SweepSpec(base=base, axes=axes, outputs=outputs, name=name)
