"""Command-line front end.

Every subcommand writes one CSV (``-o -`` sends it to stdout) and, when the
CSV goes to a file, a ``<stem>.meta.json`` sidecar holding the resolved
parameters, tolerances and package version.

Settings come from flags, an optional JSON config document (``--config``)
and built-in defaults, in that order of precedence.  Config keys are the
flag names with dashes replaced by underscores, plus ``command``.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    AxisSpec,
    bifurcation_grid,
    steady_sweep,
    threshold_scan,
)
from .chain_delay import lct_substitution_check
from .equilibria import NUMERIC_ONLY, equilibria
from .errors import (
    ConfigError,
    DomainError,
    IntegrationError,
    SingularParameterError,
    StructuralError,
    TwoStrainError,
)
from .integrator import IntegrationOptions, integrate, protocol_initial_state
from .model_core import EpiParams, ModelKind, ModelSpec, epsilon_to_lambda, lambda_to_epsilon
from .reproduction import repro_closed

__all__ = [
    "COMMANDS",
    "FIGURES",
    "FigurePreset",
    "RunConfig",
    "parse_config",
    "run",
    "main",
]

log = logging.getLogger(__name__)

COMMANDS = ("simulate", "repro", "equilibria", "bifurcation", "sweep", "scan", "verify-lct", "figure")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_INTEGRATION = 4
EXIT_CHECK_FAILED = 5

MODEL_KEYS = ("model", "k", "r")
RATE_KEYS = ("beta1", "beta2", "gamma", "alpha")
INTEGRATION_DEFAULTS = {"rel_tol": 1e-8, "abs_tol": None, "max_step": 1.0, "method": "rk45", "output_step": 1.0}
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {"t_end": 10000.0, "seed": 10.0, **INTEGRATION_DEFAULTS},
    "repro": {},
    "equilibria": {},
    "bifurcation": {"x": None, "y": None, "tie_tol": 1e-9},
    "sweep": {"eps_grid": None, "t_end": 10000.0, "workers": 1, **INTEGRATION_DEFAULTS},
    "scan": {"eps_range": [0.0, 0.995], "refine_tol": 1e-6, "step": 0.005},
    "verify-lct": {
        "t_end": 500.0, "t_check": None, "quad_step": 0.05, "tolerance": 1e-3,
        **INTEGRATION_DEFAULTS, "rel_tol": 1e-10, "abs_tol": 1e-7,
    },
    "figure": {"figure": None, "points": None, "workers": 1, **INTEGRATION_DEFAULTS},
}
COMMON_KEYS = ("command", "output", "lambda", "eps", "N") + MODEL_KEYS + RATE_KEYS


# --- figure presets ---------------------------------------------------------


@dataclass(frozen=True)
class FigurePreset:
    """Parameter bundle for one published panel.

    Bifurcation panels carry ``x``/``y`` axes; steady-state panels carry an
    ``eps_grid`` of ``(lo, hi, n)``.  Values on an axis are placeholders in
    ``params`` and get overwritten node by node.
    """

    id: str
    kind: ModelKind
    k: int
    r: int
    params: EpiParams
    x: Optional[AxisSpec] = None
    y: Optional[AxisSpec] = None
    eps_grid: Optional[tuple[float, float, int]] = None

    @property
    def product(self) -> str:
        return "sweep" if self.eps_grid else "bifurcation"

    @property
    def model(self) -> ModelSpec:
        return ModelSpec(self.kind, self.k, self.r)


def _presets() -> dict[str, FigurePreset]:
    ib, sb = ModelKind.INTEGRATED_BASIC, ModelKind.SEPARATED_BASIC
    ic, sc = ModelKind.INTEGRATED_CHAIN, ModelKind.SEPARATED_CHAIN
    eps_x = AxisSpec("epsilon", 0.0, 0.99, 100)
    beta1_y = AxisSpec("beta1", 0.0, 1.0, 101)
    r_y = AxisSpec("r", 0.0, 5.0, 101)
    grid = (0.0, 0.99, 100)
    one = EpiParams(0.6, 0.2, 0.1, 0.1, N=1000.0)
    two = EpiParams(0.4, 0.2, 0.1, 0.1, N=1000.0)
    three = EpiParams(0.45, 0.2, 0.1, 0.04, N=1000.0)
    three_b = EpiParams(0.9, 0.169, 0.1, 0.04, N=1000.0)
    items = [
        FigurePreset("fig1a", ib, 1, 1, one, eps_x, beta1_y),
        FigurePreset("fig1b", ib, 1, 1, one, eps_grid=grid),
        FigurePreset("fig1c", sb, 1, 1, one, eps_x, beta1_y),
        FigurePreset("fig1d", sb, 1, 1, one, eps_grid=grid),
        FigurePreset("fig2a", ic, 5, 3, two, eps_x, beta1_y),
        FigurePreset("fig2b", ic, 5, 3, two.replace(beta1=0.5), eps_x, r_y),
        FigurePreset("fig2c", ic, 5, 3, two, eps_grid=grid),
        FigurePreset("fig2d", sc, 5, 3, two, eps_x, beta1_y),
        FigurePreset("fig2e", sc, 5, 3, two.replace(beta1=0.3), eps_x, r_y),
        FigurePreset("fig2f", sc, 5, 3, two.replace(beta1=0.28), eps_grid=grid),
        FigurePreset("fig3a", ic, 5, 3, three, eps_x, beta1_y),
        FigurePreset("fig3b", ic, 5, 3, three, eps_grid=grid),
        FigurePreset("fig3c", ic, 5, 3, three.replace(beta1=0.7), eps_grid=grid),
        FigurePreset("fig3d", ic, 4, 3, three_b, eps_x, beta1_y),
        FigurePreset("fig3e", ic, 4, 3, three_b.replace(beta1=0.6), eps_grid=grid),
        FigurePreset("fig3f", ic, 4, 3, three_b, eps_grid=grid),
    ]
    return {p.id: p for p in items}


FIGURES = _presets()


# --- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run settings.

    ``eps`` is the effective immunity level as supplied (``None`` when the
    vaccination rate was given directly); ``params.lam`` is always resolved.
    """

    command: str
    model: Optional[ModelSpec]
    params: Optional[EpiParams]
    eps: Optional[float] = None
    options: dict = field(default_factory=dict)
    output: str = "-"

    @property
    def epsilon(self) -> Optional[float]:
        if self.eps is not None:
            return self.eps
        if self.model is None or self.params is None:
            return None
        return lambda_to_epsilon(self.model, self.params.lam, self.params.alpha)

    def to_document(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"command": self.command, "output": self.output}
        if self.model is not None:
            doc.update(model=self.model.kind.value, k=self.model.k, r=self.model.r)
        if self.params is not None:
            p = self.params
            doc.update(beta1=p.beta1, beta2=p.beta2, gamma=p.gamma, alpha=p.alpha, N=p.N)
            if self.eps is None:
                doc["lambda"] = p.lam
            else:
                doc["eps"] = self.eps
        doc.update(self.options)
        return doc

    def integration_options(self) -> IntegrationOptions:
        o = self.options
        return IntegrationOptions(
            rel_tol=o.get("rel_tol", 1e-8), abs_tol=o.get("abs_tol"), max_step=o.get("max_step", 1.0),
            method=o.get("method", "rk45"),
            output_step=o.get("quad_step", o.get("output_step", 1.0)),
        )


def _float(key: str, value: Any) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", key) from None
    if not math.isfinite(out):
        raise ConfigError(f"expected a finite number, got {value!r}", key)
    return out


def _int(key: str, value: Any) -> int:
    out = _float(key, value)
    if not out.is_integer():
        raise ConfigError(f"expected an integer, got {value!r}", key)
    return int(out)


def _axis(key: str, value: Any) -> list:
    if isinstance(value, Mapping):
        value = [value.get("variable"), value.get("lo"), value.get("hi"), value.get("n")]
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        raise ConfigError("expected VARIABLE LO HI N", key)
    axis = [str(value[0]), _float(key, value[1]), _float(key, value[2]), _int(key, value[3])]
    try:
        AxisSpec(*axis)
    except ConfigError as exc:
        raise ConfigError(str(exc), key) from None
    return axis


def _normalize_option(key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in ("x", "y"):
        return _axis(key, value)
    if key == "eps_grid":
        if not isinstance(value, (list, tuple)) or len(value) != 3:
            raise ConfigError("expected LO HI N", key)
        return [_float(key, value[0]), _float(key, value[1]), _int(key, value[2])]
    if key == "eps_range":
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError("expected LO HI", key)
        return [_float(key, value[0]), _float(key, value[1])]
    if key in ("workers", "points"):
        return _int(key, value)
    if key in ("method", "figure"):
        return str(value)
    return _float(key, value)


def _load_document(source: Any) -> dict[str, Any]:
    if source is None:
        return {}
    if isinstance(source, Mapping):
        return dict(source)
    try:
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}", "config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "config") from None
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object", "config")
    return doc


def _resolve_model(merged: Mapping[str, Any]) -> ModelSpec:
    if merged.get("model") is None:
        raise ConfigError("a model kind is required", "model")
    try:
        kind = ModelKind.parse(merged["model"])
    except DomainError as exc:
        raise ConfigError(str(exc), "model") from None
    if kind.is_basic:
        k = _int("k", merged.get("k", 1))
        r = _float("r", merged.get("r", 1))
        if k != 1 or r != 1:
            raise ConfigError(f"{kind.value} is the k = r = 1 model", "k" if k != 1 else "r")
        return ModelSpec(kind, 1, 1)
    for key in ("k", "r"):
        if merged.get(key) is None:
            raise ConfigError(f"{kind.value} needs --{key}", key)
    k = _int("k", merged["k"])
    r = _float("r", merged["r"])
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}", "k")
    if not 0 <= r <= k:
        raise ConfigError(f"r must lie in [0, k={k}], got {r}", "r")
    return ModelSpec(kind, k, r)


def _resolve_params(merged: Mapping[str, Any], model: ModelSpec) -> tuple[EpiParams, Optional[float]]:
    values = {}
    for key in RATE_KEYS:
        if merged.get(key) is None:
            raise ConfigError("required", key)
        values[key] = _float(key, merged[key])
        if values[key] < 0 or (key in ("gamma", "alpha") and values[key] == 0):
            raise ConfigError(f"out of range: {values[key]}", key)
    n = _float("N", merged.get("N", 1000.0))
    if n <= 0:
        raise ConfigError(f"out of range: {n}", "N")
    eps = merged.get("eps")
    if eps is not None:
        eps = _float("eps", eps)
        try:
            lam = epsilon_to_lambda(model, eps, values["alpha"])
        except DomainError as exc:
            raise ConfigError(str(exc), "eps") from None
    else:
        lam = _float("lambda", merged.get("lambda", 0.0))
        if lam < 0:
            raise ConfigError(f"out of range: {lam}", "lambda")
    return EpiParams(lam=lam, N=n, **values), eps


def _check_output(command: str, output: str) -> None:
    if output == "-":
        if command == "figure":
            raise ConfigError("figure writes several files; give an output directory", "output")
        return
    path = Path(output)
    parent = path if command == "figure" else path.parent
    probe = parent if parent.exists() else parent.parent
    if not probe.is_dir():
        raise ConfigError(f"directory {parent} does not exist", "output")


def _merge_lambda_eps(layers: list[Mapping[str, Any]]) -> dict[str, Any]:
    merged: dict[str, Any] = {}
    for layer in layers:
        has_lam, has_eps = layer.get("lambda") is not None, layer.get("eps") is not None
        if has_lam and has_eps:
            raise ConfigError("give either lambda or eps, not both", "eps")
        if has_lam or has_eps:
            # a higher-precedence source replaces the other spelling too
            merged.pop("lambda", None)
            merged.pop("eps", None)
        merged.update({k: v for k, v in layer.items() if v is not None})
    return merged


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON config document")
    common.add_argument("-o", "--output", help="CSV path, '-' for stdout (figure: output directory)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    model = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    model.add_argument("--model", help="integrated-basic | separated-basic | integrated-chain | separated-chain")
    model.add_argument("--k", help="chain length")
    model.add_argument("--r", help="stages evaded by Strain 2")
    for key in RATE_KEYS:
        model.add_argument(f"--{key}")
    model.add_argument("--lambda", dest="lambda", help="vaccination rate (1/day)")
    model.add_argument("--eps", help="effective immunity level, converted to lambda")
    model.add_argument("--N", help="population size")

    stepper = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    stepper.add_argument("--rel-tol", dest="rel_tol")
    stepper.add_argument("--abs-tol", dest="abs_tol")
    stepper.add_argument("--max-step", dest="max_step")
    stepper.add_argument("--method", choices=["rk45", "rk4"])
    stepper.add_argument("--output-step", dest="output_step")

    parser = argparse.ArgumentParser(prog="twostrain", description="Two-strain epidemic model toolkit.")
    parser.add_argument("--version", action="version", version=f"twostrain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, parents: list, help_: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common] + parents, help=help_,
                              argument_default=argparse.SUPPRESS)

    p = add("simulate", [model, stepper], "integrate one trajectory")
    p.add_argument("--t-end", dest="t_end")
    p.add_argument("--seed", help="initial infected per strain")
    add("repro", [model], "closed-form reproduction numbers")
    add("equilibria", [model], "closed-form equilibria")
    p = add("bifurcation", [model], "region labels on a 2-D grid")
    p.add_argument("--x", nargs=4, metavar=("VAR", "LO", "HI", "N"))
    p.add_argument("--y", nargs=4, metavar=("VAR", "LO", "HI", "N"))
    p.add_argument("--tie-tol", dest="tie_tol")
    p = add("sweep", [model, stepper], "simulated steady states across epsilon")
    p.add_argument("--eps-grid", dest="eps_grid", nargs=3, metavar=("LO", "HI", "N"))
    p.add_argument("--t-end", dest="t_end")
    p.add_argument("--workers")
    p = add("scan", [model], "ordered region transitions across epsilon")
    p.add_argument("--eps-range", dest="eps_range", nargs=2, metavar=("LO", "HI"))
    p.add_argument("--refine-tol", dest="refine_tol")
    p.add_argument("--step")
    p = add("verify-lct", [model, stepper], "check chain states against delay integrals")
    p.add_argument("--t-end", dest="t_end")
    p.add_argument("--t-check", dest="t_check")
    p.add_argument("--quad-step", dest="quad_step")
    p.add_argument("--tolerance", help="allowed residual as a fraction of N")
    p = add("figure", [stepper], "reproduce a published panel")
    p.add_argument("figure", choices=sorted(FIGURES))
    p.add_argument("--points", help="override grid resolution")
    p.add_argument("--workers")
    return parser


def parse_config(argv: Sequence[str], config: Any = None) -> RunConfig:
    """Merge flags, a config document and defaults into a :class:`RunConfig`.

    Raises:
        ConfigError: unknown keys, conflicting lambda/eps, missing or
            out-of-range values.  ``key`` names the offender.
    """
    ns = vars(_build_parser().parse_args(list(argv)))
    command = ns.pop("command")
    ns.pop("verbose", None)
    doc = _load_document(ns.pop("config", config))
    if doc.get("command", command) != command:
        raise ConfigError(f"config is for {doc['command']!r}, not {command!r}", "command")
    doc.pop("command", None)

    allowed = set(COMMON_KEYS) | set(COMMAND_DEFAULTS[command])
    if command == "figure":
        allowed = {"output"} | set(COMMAND_DEFAULTS[command])
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown key for {command}", key)

    merged = _merge_lambda_eps([{"output": "-", **COMMAND_DEFAULTS[command]}, doc, ns])
    output = str(merged.pop("output"))
    _check_output(command, output)
    options = {k: _normalize_option(k, merged.get(k)) for k in COMMAND_DEFAULTS[command]}

    if command == "figure":
        if options["figure"] not in FIGURES:
            raise ConfigError(f"unknown figure {options['figure']!r}", "figure")
        if options["points"] is not None and options["points"] < 2:
            raise ConfigError("need at least 2 points", "points")
        return RunConfig(command, None, None, None, options, output)

    model = _resolve_model(merged)
    params, eps = _resolve_params(merged, model)
    if command == "bifurcation":
        for key in ("x", "y"):
            if options[key] is None:
                raise ConfigError("axis required", key)
            try:
                AxisSpec(*options[key]).check_model(model)
            except ConfigError as exc:
                raise ConfigError(str(exc), key) from None
        if options["x"][0] == options["y"][0]:
            raise ConfigError("axis variables must differ", "y")
    if command == "sweep" and options["eps_grid"] is None:
        raise ConfigError("required", "eps_grid")
    if command == "sweep" and not 0 <= options["eps_grid"][0] <= options["eps_grid"][1] < 1:
        raise ConfigError("epsilon grid must lie in [0, 1)", "eps_grid")
    return RunConfig(command, model, params, eps, options, output)


# --- output -----------------------------------------------------------------


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return getattr(value, "value", str(value))


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


class _Writer:
    """Single point through which every output file is written."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.written: list[str] = []

    def csv(self, path: str | Path, header, rows) -> None:
        text = _csv_text(header, rows)
        if str(path) == "-":
            sys.stdout.write(text)
            return
        Path(path).write_text(text, encoding="utf-8")
        self.written.append(str(path))

    def meta(self, csv_path: str | Path, summary: Mapping[str, Any], extra: Optional[Mapping] = None) -> None:
        if str(csv_path) == "-":
            return
        doc = _metadata(self.config, summary, extra)
        doc["outputs"] = list(self.written)
        path = _sidecar_path(Path(csv_path))
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(value: Any):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if hasattr(value, "value"):
        return value.value
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _describe(model: Optional[ModelSpec], params: Optional[EpiParams], eps: Optional[float]) -> dict:
    if model is None or params is None:
        return {}
    return {
        "model": {"kind": model.kind.value, "k": model.k, "r": model.r},
        "params": {
            "beta1": params.beta1, "beta2": params.beta2, "gamma": params.gamma,
            "alpha": params.alpha, "lambda": params.lam, "N": params.N,
            "epsilon": eps if eps is not None else _safe_epsilon(model, params),
            "epsilon_supplied": eps is not None,
        },
    }


def _safe_epsilon(model: ModelSpec, params: EpiParams) -> Optional[float]:
    try:
        return lambda_to_epsilon(model, params.lam, params.alpha)
    except DomainError:
        return None


def _metadata(config: RunConfig, summary: Mapping[str, Any], extra: Optional[Mapping]) -> dict:
    import scipy

    doc = {
        "command": config.command,
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": config.to_document(),
        "summary": dict(summary),
    }
    doc.update(_describe(config.model, config.params, config.eps))
    if extra:
        doc.update(extra)
    return doc


# --- commands ---------------------------------------------------------------


def _tolerances(config: RunConfig) -> dict:
    o = config.integration_options()
    return {
        "tolerances": {
            "rel_tol": o.rel_tol, "abs_tol": o.atol_for(config.params.N if config.params else 1000.0),
            "max_step": o.max_step, "method": o.method.value, "output_step": o.output_step,
        }
    }


def _run_simulate(config: RunConfig, out: _Writer) -> int:
    model, params, o = config.model, config.params, config.options
    init = protocol_initial_state(model, params.N, o["seed"])
    traj = integrate(model, params, init, o["t_end"], config.integration_options())
    header = ["t"] + model.labels()
    out.csv(config.output, header, ([t, *y] for t, y in zip(traj.times, traj.states)))
    summary = {"points": len(traj), "conservation_error": traj.conservation_error(params.N),
               "final": traj.final.as_dict()}
    out.meta(config.output, summary, _tolerances(config))
    return EXIT_OK


REPRO_HEADER = ["model", "k", "r", "beta1", "beta2", "gamma", "alpha", "lambda", "epsilon",
                "r0", "r1", "r2", "r12", "r21"]


def _run_repro(config: RunConfig, out: _Writer) -> int:
    model, p = config.model, config.params
    rs = repro_closed(model, p)
    row = [model.kind.value, model.k, model.r, p.beta1, p.beta2, p.gamma, p.alpha, p.lam,
           _safe_epsilon(model, p) if config.eps is None else config.eps,
           rs.r0, rs.r1, rs.r2, rs.r12, rs.r21]
    out.csv(config.output, REPRO_HEADER, [row])
    out.meta(config.output, rs.as_dict())
    return EXIT_OK


def _run_equilibria(config: RunConfig, out: _Writer) -> int:
    model = config.model
    model.require_integer_r()
    eq = equilibria(model, config.params)
    labels = model.labels()
    rows = []
    for name in ("disease_free", "strain1_only", "strain2_only"):
        state = getattr(eq, name)
        if state is None:
            rows.append([name, "inadmissible"] + [None] * len(labels))
        else:
            rows.append([name, "closed-form"] + state.to_array().tolist())
    rows.append(["coexistence", NUMERIC_ONLY] + [None] * len(labels))
    out.csv(config.output, ["equilibrium", "status"] + labels, rows)
    out.meta(config.output, {name: row[1] for name, row in zip(
        ("disease_free", "strain1_only", "strain2_only", "coexistence"), rows)})
    return EXIT_OK


def _write_grid(config: RunConfig, out: _Writer, path, grid) -> None:
    out.csv(path, ["x", "y", "label"], grid.cells())
    summary = {"x": config_axis(grid.x_axis), "y": config_axis(grid.y_axis),
               "counts": {k.value: v for k, v in grid.counts().items()}}
    out.meta(path, summary)


def config_axis(axis: AxisSpec) -> list:
    return [axis.variable.value, axis.lo, axis.hi, axis.n]


def _run_bifurcation(config: RunConfig, out: _Writer) -> int:
    o = config.options
    grid = bifurcation_grid(config.model, config.params, AxisSpec(*o["x"]), AxisSpec(*o["y"]), o["tie_tol"])
    _write_grid(config, out, config.output, grid)
    return EXIT_OK


SWEEP_HEADER = ["epsilon", "lambda", "i1_star", "i2_star", "total", "label", "status"]


def _write_sweep(config: RunConfig, out: _Writer, path, table, extra=None) -> None:
    rows = ([r.epsilon, r.lam, r.i1_star, r.i2_star, r.total, r.label, r.status] for r in table)
    out.csv(path, SWEEP_HEADER, rows)
    worst = [r.conservation_error for r in table if math.isfinite(r.conservation_error)]
    summary = {
        "rows": len(table),
        "errors": sum(r.status.startswith("error") for r in table),
        "unsettled": sum(r.status == "unsettled" for r in table),
        "max_conservation_error": max(worst) if worst else None,
    }
    tol = _tolerances(config)
    out.meta(path, summary, {**tol, **(extra or {})})


def _run_sweep(config: RunConfig, out: _Writer) -> int:
    o = config.options
    lo, hi, n = o["eps_grid"]
    table = steady_sweep(config.model, config.params, np.linspace(lo, hi, n),
                         opts=config.integration_options(), t_end=o["t_end"], workers=o["workers"])
    _write_sweep(config, out, config.output, table)
    return EXIT_OK


SCAN_HEADER = ["crossing_eps", "boundary", "from", "to"]


def _scan_rows(transitions):
    return ([t.epsilon, t.boundary, t.from_label, t.to_label] for t in transitions)


def _run_scan(config: RunConfig, out: _Writer) -> int:
    o = config.options
    tl = threshold_scan(config.model, config.params, tuple(o["eps_range"]), o["refine_tol"], o["step"])
    out.csv(config.output, SCAN_HEADER, _scan_rows(tl))
    out.meta(config.output, {"start": tl.start.value, "sequence": [x.value for x in tl.label_sequence()]})
    return EXIT_OK


def _run_verify_lct(config: RunConfig, out: _Writer) -> int:
    model, params, o = config.model, config.params, config.options
    t_check = o["t_check"] if o["t_check"] is not None else o["t_end"]
    traj = integrate(model, params, protocol_initial_state(model, params.N), o["t_end"],
                     config.integration_options())
    fine = lct_substitution_check(model, params, traj, t_check)
    try:
        coarse = lct_substitution_check(model, params, traj, t_check, stride=2)
        ratio = coarse.max_substitution_residual / fine.max_substitution_residual
        order = math.log2(ratio) if ratio > 0 and math.isfinite(ratio) else None
    except DomainError:
        coarse, order = None, None
    passed = fine.passes(params.N, o["tolerance"])
    rows = [[i + 1, s, m, e] for i, (s, m, e) in
            enumerate(zip(fine.substituted, fine.simulated, fine.per_index_residuals))]
    out.csv(config.output, ["index", "substituted", "simulated", "residual"], rows)
    summary = {
        "passed": passed,
        "max_substitution_residual": fine.max_substitution_residual,
        "max_gamma_pi_residual": fine.max_gamma_pi_residual,
        "allowed": max(o["tolerance"] * params.N, fine.truncation_bound),
        "truncation_bound": fine.truncation_bound,
        "quad_step": fine.quad_step,
        "t_check": fine.t_check,
        "half_resolution_residual": coarse.max_substitution_residual if coarse else None,
        "observed_order": order,
    }
    out.meta(config.output, summary, _tolerances(config))
    if not passed:
        print(f"twostrain: substitution residual {fine.max_substitution_residual:.3g} exceeds "
              f"{summary['allowed']:.3g}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _run_figure(config: RunConfig, out: _Writer) -> int:
    o = config.options
    preset = FIGURES[o["figure"]]
    outdir = Path(config.output)
    outdir.mkdir(parents=True, exist_ok=True)
    sub = RunConfig(config.command, preset.model, preset.params, None, o, config.output)
    writer = _Writer(sub)
    path = outdir / f"{preset.id}.csv"
    if preset.product == "bifurcation":
        x, y = preset.x, preset.y
        if o["points"]:
            x = AxisSpec(x.variable, x.lo, x.hi, o["points"])
            y = AxisSpec(y.variable, y.lo, y.hi, o["points"])
        _write_grid(sub, writer, path, bifurcation_grid(preset.model, preset.params, x, y))
        return EXIT_OK
    lo, hi, n = preset.eps_grid
    n = o["points"] or n
    table = steady_sweep(preset.model, preset.params, np.linspace(lo, hi, n),
                         opts=sub.integration_options(), workers=o["workers"])
    tl = threshold_scan(preset.model, preset.params, (lo, hi))
    trans = outdir / f"{preset.id}_transitions.csv"
    writer.csv(trans, SCAN_HEADER, _scan_rows(tl))
    _write_sweep(sub, writer, path, table,
                 {"transitions": [[t.epsilon, t.boundary, t.from_label.value, t.to_label.value] for t in tl]})
    return EXIT_OK


_HANDLERS = {
    "simulate": _run_simulate,
    "repro": _run_repro,
    "equilibria": _run_equilibria,
    "bifurcation": _run_bifurcation,
    "sweep": _run_sweep,
    "scan": _run_scan,
    "verify-lct": _run_verify_lct,
    "figure": _run_figure,
}


def run(config: RunConfig) -> int:
    """Execute a parsed configuration; returns the process exit status."""
    return _HANDLERS[config.command](config, _Writer(config))


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    verbose = sum(a in ("-v", "--verbose") for a in argv)
    logging.basicConfig(level=logging.DEBUG if verbose > 1 else logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print(f"twostrain: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(config)
    except (DomainError, SingularParameterError, StructuralError) as exc:
        print(f"twostrain: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except IntegrationError as exc:
        print(f"twostrain: integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (TwoStrainError, OSError) as exc:
        print(f"twostrain: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
