"""Time stepping of any model variant: trajectories and long-run endpoints."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, IntegrationError
from .model_core import EpiParams, ModelSpec, StateVec, rhs_function

__all__ = [
    "Method",
    "IntegrationOptions",
    "Trajectory",
    "SettleResult",
    "integrate",
    "settle",
    "protocol_initial_state",
]

log = logging.getLogger(__name__)

# undershoot below -CLAMP_TOL * N is clamped to zero (with a warning)
CLAMP_TOL = 1e-9


class Method(str, Enum):
    ADAPTIVE_RK45 = "rk45"
    FIXED_RK4 = "rk4"


@dataclass(frozen=True)
class IntegrationOptions:
    """Stepper settings.

    ``abs_tol`` defaults to ``1e-8 * N``.  For ``FIXED_RK4`` the step is
    ``max_step``.  Output is written every ``output_step`` days.
    """

    rel_tol: float = 1e-8
    abs_tol: Optional[float] = None
    max_step: float = 1.0
    method: Method = Method.ADAPTIVE_RK45
    output_step: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.rel_tol <= 0 or (self.abs_tol is not None and self.abs_tol <= 0):
            raise DomainError("tolerances must be > 0")
        if self.max_step <= 0 or self.output_step <= 0:
            raise DomainError("max_step and output_step must be > 0")

    def atol_for(self, N: float) -> float:
        return 1e-8 * N if self.abs_tol is None else self.abs_tol


@dataclass(frozen=True)
class Trajectory:
    model: ModelSpec
    times: np.ndarray
    states: np.ndarray  # shape (len(times), model.n_states)

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> StateVec:
        return StateVec.from_array(self.model, self.states[i])

    @property
    def final(self) -> StateVec:
        return self.state(-1)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.model.labels().index(name)]

    def conservation_error(self, N: float) -> float:
        """Largest ``|sum(state) - N|`` over all output points."""
        return float(np.max(np.abs(self.states.sum(axis=1) - N)))


@dataclass(frozen=True)
class SettleResult:
    state: StateVec
    max_rate: float
    quiescent: bool
    trajectory: Trajectory


def protocol_initial_state(model: ModelSpec, N: float = 1000.0, seed: float = 10.0) -> StateVec:
    """``I_1(0) = I_2(0) = seed`` with everyone else fully susceptible."""
    s = [N - 2 * seed] + [0.0] * model.k
    return StateVec(s, seed, seed, 0.0 if model.has_v else None)


def _output_grid(t_end: float, step: float) -> np.ndarray:
    n = int(math.floor(t_end / step + 1e-9))
    grid = np.arange(n + 1) * step
    if t_end - grid[-1] > 1e-9 * max(1.0, t_end):
        grid = np.append(grid, t_end)
    else:
        grid[-1] = t_end
    return grid


def _rk45(f, y0, t_end, opts: IntegrationOptions, atol: float):
    grid = _output_grid(t_end, opts.output_step)
    sol = solve_ivp(
        f, (0.0, t_end), y0, method="RK45", t_eval=grid,
        rtol=opts.rel_tol, atol=atol, max_step=opts.max_step,
    )
    if sol.status != 0:
        last = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(sol.message, last)
    return sol.t, sol.y.T


def _rk4(f, y0, t_end, opts: IntegrationOptions):
    n = max(1, int(math.ceil(t_end / opts.max_step - 1e-9)))
    h = t_end / n
    every = max(1, int(round(opts.output_step / h)))
    y = np.array(y0, dtype=float)
    times, states = [0.0], [y.copy()]
    for i in range(1, n + 1):
        t = (i - 1) * h
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError("non-finite state", t)
        if i % every == 0 or i == n:
            times.append(i * h)
            states.append(y.copy())
    return np.array(times), np.array(states)


def integrate(
    model: ModelSpec,
    params: EpiParams,
    init: StateVec,
    t_end: float,
    opts: Optional[IntegrationOptions] = None,
) -> Trajectory:
    """Integrate from ``t = 0`` to ``t_end`` days."""
    opts = opts or IntegrationOptions()
    init.check_layout(model)
    if not t_end > 0:
        raise DomainError(f"t_end must be > 0, got {t_end!r}")
    y0 = init.to_array()
    if abs(y0.sum() - params.N) > 1e-9 * params.N:
        raise DomainError(f"initial state sums to {y0.sum()!r}, expected N={params.N!r}")
    f = rhs_function(model, params)
    if opts.method is Method.ADAPTIVE_RK45:
        times, states = _rk45(f, y0, t_end, opts, opts.atol_for(params.N))
    else:
        times, states = _rk4(f, y0, t_end, opts)

    low = states < -CLAMP_TOL * params.N
    if low.any():
        log.warning(
            "clamping %d negative entries (min %.3g) to zero", int(low.sum()), float(states.min())
        )
        states = np.where(low, 0.0, states)
    return Trajectory(model, times, states)


def settle(
    model: ModelSpec,
    params: EpiParams,
    init: StateVec,
    t_end: float = 10000.0,
    quiescence_tol: float = 1e-10,
    opts: Optional[IntegrationOptions] = None,
) -> SettleResult:
    """Long-horizon run used as a steady-state probe.

    Non-quiescence (``max |dx/dt| > quiescence_tol`` at ``t_end``) is
    reported through :attr:`SettleResult.quiescent`, not raised.
    """
    traj = integrate(model, params, init, t_end, opts)
    f = rhs_function(model, params)
    rate = float(np.max(np.abs(f(t_end, traj.states[-1]))))
    return SettleResult(traj.final, rate, rate <= quiescence_tol, traj)
