"""Region diagrams, boundary curves, steady-state sweeps and transition scans.

Grids and scans classify with the closed-form reproduction numbers; sweeps
simulate.  The two routes are independent, so their agreement is a check.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.optimize import bisect

from .errors import ConfigError, DomainError, SingularParameterError, TwoStrainError
from .integrator import IntegrationOptions, protocol_initial_state, settle
from .model_core import EpiParams, ModelSpec, StateVec
from .reproduction import (
    TARGETS,
    RegionLabel,
    _side,
    closed_form_value,
    region_label,
    repro_closed,
)

__all__ = [
    "AxisVariable",
    "AxisSpec",
    "RegionGrid",
    "BoundaryCurve",
    "SweepRow",
    "SweepTable",
    "Transition",
    "TransitionList",
    "EXTINCTION_FRACTION",
    "apply_settings",
    "bifurcation_grid",
    "solve_boundary",
    "boundary_curve",
    "steady_sweep",
    "threshold_scan",
    "default_workers",
]

log = logging.getLogger(__name__)

# a strain below this fraction of N at the end of a settle run counts as extinct
EXTINCTION_FRACTION = 1e-3
_EVAL_ERRORS = (DomainError, SingularParameterError, ZeroDivisionError, OverflowError)


class AxisVariable(str, Enum):
    EPSILON = "epsilon"
    BETA1 = "beta1"
    R = "r"


@dataclass(frozen=True)
class AxisSpec:
    variable: AxisVariable
    lo: float
    hi: float
    n: int = 51

    def __post_init__(self):
        try:
            object.__setattr__(self, "variable", AxisVariable(self.variable))
        except ValueError:
            raise ConfigError(f"unknown axis variable {self.variable!r}", key="variable") from None
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not self.lo < self.hi:
            raise ConfigError(f"axis needs finite lo < hi, got [{self.lo}, {self.hi}]", key="lo")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"axis needs n >= 2 grid points, got {self.n}", key="n")
        object.__setattr__(self, "n", int(self.n))
        if self.variable is AxisVariable.EPSILON and not (0.0 <= self.lo and self.hi < 1.0):
            raise ConfigError(f"epsilon axis must lie in [0, 1), got [{self.lo}, {self.hi}]", key="hi")
        if self.variable is AxisVariable.BETA1 and self.lo < 0:
            raise ConfigError(f"beta1 axis must be >= 0, got lo={self.lo}", key="lo")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    def check_model(self, model: ModelSpec) -> None:
        if self.variable is AxisVariable.R:
            if model.kind.is_basic:
                raise ConfigError("the basic models have no r to vary", key="variable")
            if self.lo < 0 or self.hi > model.k:
                raise ConfigError(f"r axis must lie in [0, k={model.k}]", key="hi")


def apply_settings(model: ModelSpec, params: EpiParams, settings: dict) -> tuple[ModelSpec, EpiParams]:
    """Set axis variables on a template; ``r`` goes first since the
    epsilon-to-lambda map depends on it."""
    settings = {AxisVariable(k): v for k, v in settings.items()}
    if AxisVariable.R in settings:
        model = model.with_r(float(settings[AxisVariable.R]))
    if AxisVariable.BETA1 in settings:
        params = params.replace(beta1=float(settings[AxisVariable.BETA1]))
    if AxisVariable.EPSILON in settings:
        params = params.with_epsilon(model, float(settings[AxisVariable.EPSILON]))
    return model, params


def _safe_label(model: ModelSpec, params: EpiParams, tie_tol: float = 1e-9) -> RegionLabel:
    try:
        return region_label(model, params, tie_tol)
    except _EVAL_ERRORS:
        return RegionLabel.INDETERMINATE


# --- region diagrams -------------------------------------------------------


@dataclass(frozen=True)
class RegionGrid:
    x_axis: AxisSpec
    y_axis: AxisSpec
    labels: tuple[tuple[RegionLabel, ...], ...]  # labels[j][i] at (x_i, y_j)

    def __post_init__(self):
        if len(self.labels) != self.y_axis.n or any(len(row) != self.x_axis.n for row in self.labels):
            raise DomainError("label matrix does not match the axes")

    def label_at(self, i: int, j: int) -> RegionLabel:
        return self.labels[j][i]

    def cells(self) -> Iterator[tuple[float, float, RegionLabel]]:
        xs, ys = self.x_axis.values(), self.y_axis.values()
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                yield float(x), float(y), self.labels[j][i]

    def counts(self) -> dict[RegionLabel, int]:
        out: dict[RegionLabel, int] = {}
        for row in self.labels:
            for lab in row:
                out[lab] = out.get(lab, 0) + 1
        return out


def bifurcation_grid(model: ModelSpec, params: EpiParams, x: AxisSpec, y: AxisSpec,
                     tie_tol: float = 1e-9) -> RegionGrid:
    """Closed-form region label at every node of an ``x`` by ``y`` grid."""
    if x.variable == y.variable:
        raise ConfigError(f"both axes vary {x.variable.value}", key="y")
    x.check_model(model)
    y.check_model(model)
    rows = []
    for yv in y.values():
        row = []
        for xv in x.values():
            try:
                m, p = apply_settings(model, params, {x.variable: xv, y.variable: yv})
            except _EVAL_ERRORS:
                row.append(RegionLabel.INDETERMINATE)
                continue
            row.append(_safe_label(m, p, tie_tol))
        rows.append(tuple(row))
    return RegionGrid(x, y, tuple(rows))


# --- boundary curves -------------------------------------------------------


def _target_name(target: str) -> str:
    name = str(target).lower()
    if name not in TARGETS:
        raise ConfigError(f"unknown boundary target {target!r}; expected one of {TARGETS}", key="target")
    return name


def _excess(model, params, target, settings) -> float:
    m, p = apply_settings(model, params, settings)
    return closed_form_value(m, p, target) - 1.0


def solve_boundary(model: ModelSpec, params: EpiParams, target: str, solve_for: str,
                   bracket: tuple[float, float], tol: float = 1e-10,
                   fixed: Optional[dict] = None) -> float:
    """Root of ``target - 1`` in ``solve_for`` inside ``bracket`` by bisection.

    Raises:
        DomainError: no sign change across the bracket, or the sign change
            is a pole rather than a root.
    """
    target = _target_name(target)
    var = AxisVariable(solve_for)
    fixed = dict(fixed or {})

    def f(v: float) -> float:
        return _excess(model, params, target, {**fixed, var: v})

    lo, hi = bracket
    try:
        f_lo, f_hi = f(lo), f(hi)
    except _EVAL_ERRORS as exc:
        raise DomainError(f"{target} undefined at a bracket end: {exc}") from exc
    if f_lo == 0.0:
        return float(lo)
    if f_hi == 0.0:
        return float(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise DomainError(f"{target} - 1 keeps sign {np.sign(f_lo):+.0f} on [{lo}, {hi}]")
    try:
        root = bisect(f, lo, hi, xtol=tol, maxiter=400)
        residual = abs(f(root))
    except _EVAL_ERRORS as exc:
        raise DomainError(f"{target} undefined inside the bracket: {exc}") from exc
    if residual > 1e-8:
        raise DomainError(f"{target} jumps across 1 near {root:.12g} (pole, |R - 1| = {residual:.3g})")
    return float(root)


@dataclass(frozen=True)
class BoundaryCurve:
    target: str
    sweep: AxisVariable
    solve_for: AxisVariable
    points: tuple[tuple[float, float], ...]  # (sweep value, root)
    skipped: tuple[tuple[float, str], ...] = ()
    diagnostic: Optional[str] = None

    @property
    def empty(self) -> bool:
        return not self.points


def boundary_curve(model: ModelSpec, params: EpiParams, target: str, sweep: AxisSpec,
                   solve_for: str, bracket: tuple[float, float], tol: float = 1e-10) -> BoundaryCurve:
    """Trace ``target = 1`` by one bisection per sweep value."""
    target = _target_name(target)
    solve_var = AxisVariable(solve_for)
    if solve_var == sweep.variable:
        raise ConfigError("sweep and solve_for must differ", key="solve_for")
    sweep.check_model(model)
    points, skipped = [], []
    for s in sweep.values():
        try:
            root = solve_boundary(model, params, target, solve_var, bracket, tol, {sweep.variable: s})
        except DomainError as exc:
            skipped.append((float(s), str(exc)))
            continue
        points.append((float(s), root))
    diagnostic = None
    if not points:
        diagnostic = f"no sign change of {target} - 1 in {solve_var.value} on {list(bracket)} at any sweep point"
    elif skipped:
        diagnostic = f"{len(skipped)} of {sweep.n} sweep points skipped"
    return BoundaryCurve(target, sweep.variable, solve_var, tuple(points), tuple(skipped), diagnostic)


# --- steady-state sweeps ---------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    lam: float
    i1_star: float
    i2_star: float
    total: float
    label: RegionLabel
    status: str = "ok"
    max_rate: float = math.nan
    conservation_error: float = math.nan
    min_entry: float = math.nan


@dataclass(frozen=True)
class SweepTable:
    model: ModelSpec
    params: EpiParams
    rows: tuple[SweepRow, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)


def default_workers() -> int:
    """Worker count: the CPU count, capped by ``TWOSTRAIN_THREADS`` if set."""
    n = os.cpu_count() or 1
    cap = os.environ.get("TWOSTRAIN_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"TWOSTRAIN_THREADS must be an integer, got {cap!r}", key="TWOSTRAIN_THREADS")
    return n


def _sweep_row(args) -> SweepRow:
    model, template, eps, init, opts, t_end = args
    try:
        params = template.with_epsilon(model, eps)
    except TwoStrainError as exc:
        nan = math.nan
        return SweepRow(eps, nan, nan, nan, nan, RegionLabel.INDETERMINATE, f"error: {exc}")
    label = _safe_label(model, params)
    try:
        res = settle(model, params, init, t_end=t_end, opts=opts)
    except TwoStrainError as exc:
        nan = math.nan
        return SweepRow(eps, params.lam, nan, nan, nan, label, f"error: {exc}")
    floor = EXTINCTION_FRACTION * params.N
    i1 = res.state.i1 if res.state.i1 >= floor else 0.0
    i2 = res.state.i2 if res.state.i2 >= floor else 0.0
    return SweepRow(
        epsilon=float(eps),
        lam=params.lam,
        i1_star=i1,
        i2_star=i2,
        total=i1 + i2,
        label=label,
        status="ok" if res.quiescent else "unsettled",
        max_rate=res.max_rate,
        conservation_error=res.trajectory.conservation_error(params.N),
        min_entry=float(res.trajectory.states.min()),
    )


def steady_sweep(model: ModelSpec, params: EpiParams, eps_grid: Sequence[float],
                 init: Optional[StateVec] = None, opts: Optional[IntegrationOptions] = None,
                 t_end: float = 10000.0, workers: Optional[int] = 1) -> SweepTable:
    """Settle once per ``eps`` and record the surviving infections.

    A row whose integration fails carries ``status = "error: ..."`` and NaN
    infections; the sweep continues.  ``status = "unsettled"`` flags rows
    still moving faster than the quiescence tolerance at ``t_end``.
    ``workers=None`` uses :func:`default_workers`.
    """
    init = init or protocol_initial_state(model, params.N)
    jobs = [(model, params, float(e), init, opts, t_end) for e in eps_grid]
    n = default_workers() if workers is None else max(1, int(workers))
    if n > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    return SweepTable(model, params, tuple(rows))


# --- transition scans ------------------------------------------------------


@dataclass(frozen=True)
class Transition:
    epsilon: float
    boundary: str  # which reproduction number crosses 1, or "unresolved"
    from_label: RegionLabel
    to_label: RegionLabel


@dataclass(frozen=True)
class TransitionList:
    start: RegionLabel
    transitions: tuple[Transition, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)

    def __getitem__(self, i):
        return self.transitions[i]

    @property
    def crossings(self) -> list[float]:
        return [t.epsilon for t in self.transitions]

    def label_sequence(self) -> list[RegionLabel]:
        return [self.start] + [t.to_label for t in self.transitions]

    def contains_sequence(self, *labels) -> bool:
        want = [RegionLabel(x) for x in labels]
        seq = self.label_sequence()
        return any(seq[i : i + len(want)] == want for i in range(len(seq) - len(want) + 1))

    def last_endemic_label(self) -> Optional[RegionLabel]:
        """Endemic label in force just before the final entry into DF."""
        seq = self.label_sequence()
        for i in range(len(seq) - 1, 0, -1):
            if seq[i] is RegionLabel.DF and seq[i - 1].endemic:
                return seq[i - 1]
        return None


def _scan_point(model, params, eps):
    try:
        p = params.with_epsilon(model, eps)
        return p, repro_closed(model, p)
    except _EVAL_ERRORS:
        return None, None


def _label(model, params, eps) -> RegionLabel:
    try:
        return region_label(model, params.with_epsilon(model, eps))
    except _EVAL_ERRORS:
        return RegionLabel.INDETERMINATE


def _responsible(model, params, a: float, b: float, tol: float) -> tuple[float, str]:
    """Crossing point and the reproduction number whose side of 1 flips."""
    _, rs_a = _scan_point(model, params, a)
    _, rs_b = _scan_point(model, params, b)
    mid = 0.5 * (a + b)
    if rs_a is None or rs_b is None:
        return mid, "unresolved"
    best: Optional[tuple[float, str]] = None
    for name in TARGETS:
        va, vb = getattr(rs_a, name), getattr(rs_b, name)
        if va is None or vb is None or _side(va, 0.0) == _side(vb, 0.0):
            continue
        try:
            root = solve_boundary(model, params, name, AxisVariable.EPSILON, (a, b), tol)
        except DomainError:
            continue
        if best is None or abs(root - mid) < abs(best[0] - mid):
            best = (root, name.upper())
    return best or (mid, "unresolved")


def threshold_scan(model: ModelSpec, params: EpiParams, eps_range: tuple[float, float] = (0.0, 0.995),
                   refine_tol: float = 1e-6, step: float = 0.005) -> TransitionList:
    """Ordered label changes along ``eps`` for a fixed parameter template.

    A coarse scan of step ``step`` finds label changes between nodes; each
    is narrowed by bisection on the label to ``refine_tol`` and then placed
    on the root of the reproduction number that flips there.  Nodes that
    land exactly on a boundary (label ``Indeterminate``) are skipped.
    """
    lo, hi = eps_range
    if not (0.0 <= lo < hi < 1.0):
        raise DomainError(f"eps_range must satisfy 0 <= lo < hi < 1, got {eps_range}")
    if not (refine_tol > 0 and step > 0):
        raise DomainError("refine_tol and step must be > 0")
    n = int(math.ceil((hi - lo) / step - 1e-9))
    grid = np.linspace(lo, hi, n + 1)
    nodes = [(float(e), _label(model, params, e)) for e in grid]
    nodes = [(e, lab) for e, lab in nodes if lab is not RegionLabel.INDETERMINATE]
    if not nodes:
        return TransitionList(RegionLabel.INDETERMINATE)

    found: list[Transition] = []

    def probe(a: float, b: float) -> RegionLabel:
        # midpoint, nudged off exact ties
        for frac in (0.5, 0.5 + 1e-3, 0.5 - 1e-3, 0.25, 0.75):
            lab = _label(model, params, a + frac * (b - a))
            if lab is not RegionLabel.INDETERMINATE:
                return a + frac * (b - a), lab
        return 0.5 * (a + b), RegionLabel.INDETERMINATE

    def refine(a: float, la: RegionLabel, b: float, lb: RegionLabel) -> None:
        if b - a <= refine_tol:
            eps, boundary = _responsible(model, params, a, b, min(refine_tol, 1e-12))
            found.append(Transition(eps, boundary, la, lb))
            return
        m, lm = probe(a, b)
        if lm is RegionLabel.INDETERMINATE:
            eps, boundary = _responsible(model, params, a, b, min(refine_tol, 1e-12))
            found.append(Transition(eps, boundary, la, lb))
            return
        if lm != la:
            refine(a, la, m, lm)
        if lm != lb:
            refine(m, lm, b, lb)

    for (a, la), (b, lb) in zip(nodes, nodes[1:]):
        if la != lb:
            refine(a, la, b, lb)

    found.sort(key=lambda t: t.epsilon)
    ordered: list[Transition] = []
    for t in found:
        if ordered and t.epsilon <= ordered[-1].epsilon:
            log.warning("dropping non-increasing crossing at eps=%.12g", t.epsilon)
            continue
        ordered.append(t)
    return TransitionList(nodes[0][1], tuple(ordered))
