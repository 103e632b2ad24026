"""Command-line entry point.

Configuration is an INI-style key/value document::

    [mode]
    mode = steady            ; steady | evolve | sweep | wigner | stability | check

    [params]                 ; dimensionless, rates in units of omega_m
    kappa = 0.05
    gamma_m = 1e-6
    g_minus = 0.01
    g_plus = 0.0028
    gain = 0.02
    theta = 0
    n_th = 0

    [output]
    dir = out

``[physical]`` (laboratory units, see :class:`~optosqueeze.model.PhysicalParams`)
may replace ``[params]``; giving both is an error. Omitted parameters take
the reference defaults. Unknown keys are rejected.

Exit status: 0 success, 1 numerical failure or instability, 2 bad config.
Every error is also reported as one JSON object on standard error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import difflib
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .analysis import analytic_variance_q, squeezing_db, squeezing_report, wigner
from .dynamics import evolve, initial_covariance, steady_state_covariance
from .errors import (DivergenceError, DomainError, InvalidParameterError, OptosqueezeError,
                     StabilityError)
from .model import PhysicalParams, SystemParams, default_params, resolve_physical
from .stability import routh_hurwitz
from .sweep import PRESETS, OUTPUTS, SweepSpec, figure_preset, run_sweep

MODES = ("steady", "evolve", "sweep", "wigner", "stability", "check")
PARAM_KEYS = ("kappa", "gamma_m", "g_minus", "g_plus", "gain", "theta", "n_th", "g0")
PHYSICAL_KEYS = tuple(f.name for f in dataclasses.fields(PhysicalParams))
MODE_OPTIONS = {
    "steady": {},
    "evolve": {"t_end": float, "dt": float, "rwa": bool, "sample_every": int, "stepper": str},
    "sweep": {"preset": str, "resolution": int, "theta_points": int, "workers": int,
              "outputs": str},
    "wigner": {"block": str, "points": int, "span": float},
    "stability": {},
    "check": {"grid": int, "tolerance": float},
}
MODE_DEFAULTS = {
    "steady": {},
    "evolve": {"t_end": 3000.0, "dt": 1e-2, "rwa": True, "sample_every": 100,
               "stepper": "affine"},
    "sweep": {"preset": None, "resolution": 200, "theta_points": 7, "workers": 1,
              "outputs": None},
    "wigner": {"block": "mechanical", "points": 201, "span": 5.0},
    "stability": {},
    "check": {"grid": 20, "tolerance": 0.1},
}
OUTPUT_KEYS = ("dir",)
_AXIS_PREFIX = "axis."
_LINSPACE = re.compile(r"^linspace\(\s*([^,]+),\s*([^,]+),\s*(\d+)\s*\)$")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


class ConfigError(OptosqueezeError):
    """Invalid configuration. ``error_class`` is "config" or "domain"."""

    def __init__(self, message, error_class="config", line=None, field=None):
        super().__init__(message)
        self.error_class = error_class
        self.line = line
        self.field = field

    def to_dict(self):
        d = {"error_class": self.error_class, "message": str(self)}
        if self.line is not None:
            d["line"] = self.line
        if self.field is not None:
            d["field"] = self.field
        return d


@dataclass
class RunConfig:
    mode: str
    params: SystemParams
    physical: Optional[PhysicalParams] = None
    options: Dict[str, object] = field(default_factory=dict)
    axes: List[tuple] = field(default_factory=list)
    output_dir: str = "."

    def resolved(self) -> dict:
        """Everything needed to reproduce the run, defaults included."""
        d = {
            "package": "optosqueeze",
            "version": __version__,
            "mode": self.mode,
            "options": dict(self.options),
            "params": self.params.to_dict(),
        }
        if self.physical is not None:
            d["physical"] = dataclasses.asdict(self.physical)
        if self.axes:
            d["axes"] = [[n, list(v)] for n, v in self.axes]
        return d


def _line_of(text, section, key):
    current = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and re.match(rf"^{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return i
    return None


def _unknown(key, valid, section, line):
    hint = difflib.get_close_matches(key, valid, n=1)
    msg = f"unknown key {key!r} in [{section}]"
    if hint:
        msg += f"; did you mean {hint[0]!r}?"
    return ConfigError(msg, line=line, field=key)


def _convert(kind, raw, key, line):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        return raw.strip()
    except ValueError:
        raise ConfigError(f"cannot read {key} = {raw!r} as {kind.__name__}",
                          line=line, field=key) from None


def _parse_axis(raw, key, line):
    m = _LINSPACE.match(raw.strip())
    try:
        if m:
            return tuple(np.linspace(float(m.group(1)), float(m.group(2)), int(m.group(3))))
        return tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"cannot read axis {key} = {raw!r}", line=line, field=key) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document.

    Raises
    ------
    ConfigError
        ``error_class == "config"`` for syntax errors, unknown keys or bad
        values (with the offending line when known); ``"domain"`` for
        physically meaningless requests.
    """
    cp = configparser.ConfigParser(interpolation=None, strict=True,
                                   inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any section", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"syntax error: {exc.errors[0][1] if exc.errors else exc}",
                          line=line) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).splitlines()[0], line=exc.lineno) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    sections = cp.sections()
    known = ["mode", "params", "physical", "output"]
    for s in sections:
        if s not in known:
            raise ConfigError(f"unknown section [{s}]" + _suggest(s, known), field=s)
    if "mode" not in sections or "mode" not in cp["mode"]:
        raise ConfigError("missing [mode] section with a 'mode' key", field="mode")
    if ("params" in sections) == ("physical" in sections):
        raise ConfigError("give exactly one of [params] or [physical]", field="params")

    mode_sec = cp["mode"]
    mode = mode_sec["mode"].strip()
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}" + _suggest(mode, MODES),
                          line=_line_of(text, "mode", "mode"), field="mode")

    options = dict(MODE_DEFAULTS[mode])
    axes = []
    spec = MODE_OPTIONS[mode]
    all_option_keys = sorted({k for opts in MODE_OPTIONS.values() for k in opts} | {"mode"})
    for key, raw in mode_sec.items():
        if key == "mode":
            continue
        line = _line_of(text, "mode", key)
        if mode == "sweep" and key.startswith(_AXIS_PREFIX):
            axes.append((key[len(_AXIS_PREFIX):], _parse_axis(raw, key, line)))
            continue
        if key not in spec:
            if key in all_option_keys:
                raise ConfigError(f"option {key!r} does not apply to mode {mode!r}",
                                  line=line, field=key)
            raise _unknown(key, all_option_keys, "mode", line)
        options[key] = _convert(spec[key], raw, key, line)

    physical = None
    if "params" in sections:
        values = {}
        for key, raw in cp["params"].items():
            line = _line_of(text, "params", key)
            if key not in PARAM_KEYS:
                raise _unknown(key, PARAM_KEYS, "params", line)
            values[key] = _convert(float, raw, key, line)
        try:
            params = default_params(**values)
        except InvalidParameterError as exc:
            raise ConfigError(str(exc), error_class="domain") from None
    else:
        values = {}
        for key, raw in cp["physical"].items():
            line = _line_of(text, "physical", key)
            if key not in PHYSICAL_KEYS:
                raise _unknown(key, PHYSICAL_KEYS, "physical", line)
            values[key] = _convert(float, raw, key, line)
        try:
            physical = PhysicalParams(**values)
            params = resolve_physical(physical)
        except InvalidParameterError as exc:
            raise ConfigError(str(exc), error_class="domain") from None
        except OptosqueezeError as exc:
            raise ConfigError(f"steady state of the physical parameters failed: {exc}",
                              error_class="domain") from None

    output_dir = "."
    if "output" in sections:
        for key, raw in cp["output"].items():
            if key not in OUTPUT_KEYS:
                raise _unknown(key, OUTPUT_KEYS, "output", _line_of(text, "output", key))
            output_dir = raw.strip()

    cfg = RunConfig(mode=mode, params=params, physical=physical, options=options,
                    axes=axes, output_dir=output_dir)
    _validate_semantics(cfg)
    return cfg


def _suggest(word, valid):
    hint = difflib.get_close_matches(word, list(valid), n=1)
    return f"; did you mean {hint[0]!r}?" if hint else ""


def _validate_semantics(cfg: RunConfig):
    o, sp = cfg.options, cfg.params
    if cfg.mode == "check" and not sp.g_plus < sp.g_minus:
        raise ConfigError("mode=check needs g_plus < g_minus", error_class="domain",
                          field="g_plus")
    if cfg.mode == "check" and o["grid"] < 2:
        raise ConfigError("grid must be >= 2", field="grid")
    if cfg.mode == "evolve":
        if not o["t_end"] >= 0:
            raise ConfigError("t_end must be non-negative", error_class="domain", field="t_end")
        if not o["dt"] > 0:
            raise ConfigError("dt must be positive", error_class="domain", field="dt")
        if o["sample_every"] < 1:
            raise ConfigError("sample_every must be >= 1", field="sample_every")
        if o["stepper"] not in ("affine", "direct"):
            raise ConfigError("stepper must be 'affine' or 'direct'", field="stepper")
    if cfg.mode == "wigner":
        if o["block"] not in ("mechanical", "mech", "cavity", "cav"):
            raise ConfigError("block must be 'mechanical' or 'cavity'", field="block")
        if o["points"] < 2 or not o["span"] > 0:
            raise ConfigError("points must be >= 2 and span > 0", field="points")
    if cfg.mode == "sweep":
        if (o["preset"] is None) == (not cfg.axes):
            raise ConfigError("sweep needs either 'preset' or 'axis.<name>' entries, not both",
                              field="preset")
        if o["preset"] is not None and o["preset"] not in PRESETS:
            raise ConfigError(f"unknown preset {o['preset']!r}; valid presets: "
                              f"{', '.join(PRESETS)}", field="preset")
        for name in (x.strip() for x in (o["outputs"] or "").split(",") if x.strip()):
            if name not in OUTPUTS:
                raise ConfigError(f"unknown output {name!r}" + _suggest(name, OUTPUTS),
                                  field="outputs")
        try:
            _sweep_spec(cfg)
        except InvalidParameterError as exc:
            raise ConfigError(str(exc), error_class="domain", field="axes") from None


def _sweep_spec(cfg: RunConfig) -> SweepSpec:
    o = cfg.options
    if o["preset"] is not None:
        spec = figure_preset(o["preset"], base=cfg.params, resolution=o["resolution"],
                             theta_points=o["theta_points"])
        if o["outputs"]:
            spec = spec.with_outputs(x.strip() for x in o["outputs"].split(","))
        return spec
    outputs = tuple(x.strip() for x in o["outputs"].split(",")) if o["outputs"] else OUTPUTS
    return SweepSpec(base=cfg.params, axes=tuple(cfg.axes), outputs=outputs, name="custom")


# ---------------------------------------------------------------------------
# execution


def _fmt(x):
    return f"{x + 0.0:.12g}"


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_covariance_csv(path, v):
    names = ["dX", "dY", "dQ", "dP"]
    lines = ["row," + ",".join(names)]
    for name, row in zip(names, np.asarray(v)):
        lines.append(name + "," + ",".join(_fmt(x) for x in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def check_grid(sp: SystemParams, n=20, tolerance=0.1) -> dict:
    """Numeric versus closed-form squeezing over gain x ratio."""
    points = []
    worst = 0.0
    for gain in np.linspace(0.0, 0.45 * sp.kappa, n):
        for ratio in np.linspace(0.0, 0.95, n):
            p = sp.replace(gain=float(gain), ratio=float(ratio))
            entry = {"gain": float(gain), "ratio": float(ratio)}
            if not routh_hurwitz(p).eig_stable:
                entry.update(stable=False, passed=None)
            else:
                s_num = squeezing_db(steady_state_covariance(p).variance_q)
                s_ana = squeezing_db(analytic_variance_q(p))
                diff = abs(s_num - s_ana)
                worst = max(worst, diff)
                entry.update(stable=True, s_numeric=s_num, s_analytic=s_ana, diff_db=diff,
                             passed=diff < tolerance)
            points.append(entry)
    return {
        "tolerance_db": tolerance,
        "grid": n,
        "max_abs_diff_db": worst,
        "passed": all(p["passed"] is not False for p in points),
        "points": points,
    }


def run(cfg: RunConfig) -> int:
    """Execute a validated configuration and write its artifacts."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    out = lambda name: os.path.join(cfg.output_dir, name)  # noqa: E731
    sp = cfg.params
    o = cfg.options
    provenance = cfg.resolved()
    status = EXIT_OK

    if cfg.mode == "steady":
        v = steady_state_covariance(sp)
        _write_json(out("report.json"), squeezing_report(sp, v).to_dict())
        _write_covariance_csv(out("covariance.csv"), v)
        artifacts = ["report.json", "covariance.csv"]
    elif cfg.mode == "evolve":
        traj = evolve(sp, initial_covariance(sp.n_th), t_end=o["t_end"], dt=o["dt"],
                      rwa=o["rwa"], sample_every=o["sample_every"], stepper=o["stepper"])
        traj.to_csv(out("trajectory.csv"))
        artifacts = ["trajectory.csv"]
    elif cfg.mode == "sweep":
        spec = _sweep_spec(cfg)
        table = run_sweep(spec, workers=o["workers"])
        table.to_csv(out("sweep.csv"))
        provenance["spec"] = table.provenance["spec"]
        artifacts = ["sweep.csv"]
    elif cfg.mode == "wigner":
        v = steady_state_covariance(sp)
        vb = v.block(o["block"])
        half = o["span"] * math.sqrt(max(vb[0, 0], vb[1, 1]))
        grid = wigner(v, o["block"], (-half, half), (-half, half), o["points"])
        grid.to_csv(out("wigner.csv"))
        artifacts = ["wigner.csv"]
    elif cfg.mode == "stability":
        _write_json(out("stability.json"), routh_hurwitz(sp).to_dict())
        artifacts = ["stability.json"]
    elif cfg.mode == "check":
        result = check_grid(sp, o["grid"], o["tolerance"])
        _write_json(out("check.json"), result)
        artifacts = ["check.json"]
        if not result["passed"]:
            status = EXIT_FAILURE
    else:  # pragma: no cover - guarded by parse_config
        raise ConfigError(f"unknown mode {cfg.mode!r}")

    provenance["artifacts"] = artifacts
    _write_json(out("provenance.json"), provenance)
    return status


def _report_error(payload):
    sys.stderr.write(json.dumps(payload) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="optosqueeze",
        description="Mechanical squeezing of a two-tone driven optomechanical cavity with an OPA.")
    parser.add_argument("--config", help="path to the INI configuration")
    parser.add_argument("--preset", help=f"run a figure sweep preset ({', '.join(PRESETS)})")
    parser.add_argument("--out", help="output directory (overrides [output] dir)")
    parser.add_argument("--workers", type=int, help="worker processes for sweeps")
    parser.add_argument("--seedless", action="store_true",
                        help="accepted for compatibility; every run is deterministic")
    parser.add_argument("--version", action="version", version=__version__)
    args = parser.parse_args(argv)

    try:
        if args.config is None and args.preset is None:
            raise ConfigError("need --config or --preset")
        if args.config is not None:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}", field="config") from None
            cfg = parse_config(text)
        else:
            cfg = RunConfig(mode="sweep", params=default_params())
        if args.preset is not None:
            cfg.mode = "sweep"
            cfg.axes = []
            cfg.options = dict(MODE_DEFAULTS["sweep"], preset=args.preset)
        if args.out is not None:
            cfg.output_dir = args.out
        if args.workers is not None and cfg.mode == "sweep":
            cfg.options["workers"] = args.workers
        _validate_semantics(cfg)
    except ConfigError as exc:
        _report_error(exc.to_dict())
        return EXIT_CONFIG

    try:
        return run(cfg)
    except (StabilityError, DivergenceError) as exc:
        _report_error({"error_class": "instability", "message": str(exc)})
    except DomainError as exc:
        _report_error({"error_class": "domain", "message": str(exc)})
    except OptosqueezeError as exc:
        _report_error({"error_class": "numerical", "message": str(exc)})
    except OSError as exc:
        _report_error({"error_class": "io", "message": str(exc)})
    return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
