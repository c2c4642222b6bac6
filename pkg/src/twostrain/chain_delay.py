"""Erlang kernels and runtime checks of the linear chain trick.

The chain ODE models are equivalent to distributed-delay systems whose
partial-immunity occupancies are convolutions of the model's flows with
Erlang kernels.  :func:`lct_substitution_check` recomputes those
convolutions by trapezoid quadrature over a simulated trajectory and
compares them with the simulated ``S_1..S_k``.

History before ``t = 0`` is taken to be zero (the population is "born" at
``t = 0`` with nobody in ``S_1..S_k``).  The tail mass of the shortest
kernel beyond ``t_check`` is reported as a bound on what an unknown history
could contribute.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .integrator import Trajectory
from .model_core import EpiParams, ModelSpec

__all__ = [
    "ErlangKernel",
    "DelayCheckReport",
    "erlang_pdf",
    "erlang_pdf_derivative",
    "erlang_chain_residual",
    "delay_means",
    "lct_substitution_check",
]


@dataclass(frozen=True)
class ErlangKernel:
    shape: int
    rate: float

    def __post_init__(self):
        if isinstance(self.shape, bool) or int(self.shape) != self.shape or self.shape < 1:
            raise DomainError(f"Erlang shape must be a positive integer, got {self.shape!r}")
        if not self.rate > 0:
            raise DomainError(f"Erlang rate must be > 0, got {self.rate!r}")
        object.__setattr__(self, "shape", int(self.shape))
        object.__setattr__(self, "rate", float(self.rate))

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    def tail(self, t: float) -> float:
        """``P(T > t)`` for the Erlang waiting time ``T``."""
        x = self.rate * t
        return math.exp(-x) * math.fsum(x**j / math.factorial(j) for j in range(self.shape))


def _as_output(values: np.ndarray, scalar: bool):
    return float(values[()]) if scalar else values


def erlang_pdf(kernel: ErlangKernel, t):
    """Erlang density ``a^b t^(b-1) e^(-a t) / (b-1)!``; zero for ``t < 0``."""
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    b, a = kernel.shape, kernel.rate
    out = np.zeros(t.shape)
    pos = t > 0
    tp = t[pos]
    out[pos] = np.exp(b * math.log(a) + (b - 1) * np.log(tp) - a * tp - math.lgamma(b))
    if b == 1:
        out[t == 0] = a
    return _as_output(out, scalar)


def erlang_pdf_derivative(kernel: ErlangKernel, t):
    """Analytic ``d/dt`` of the density for ``t >= 0``.

    ``a^b / (b-1)! * ((b-1) t^(b-2) - a t^(b-1)) e^(-a t)``
    """
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    b, a = kernel.shape, kernel.rate
    out = np.zeros(t.shape)
    pos = t > 0
    tp = t[pos]
    out[pos] = erlang_pdf(kernel, tp) * ((b - 1) / tp - a)
    at0 = t == 0
    if b == 1:
        out[at0] = -a * a
    elif b == 2:
        out[at0] = a * a
    return _as_output(out, scalar)


def erlang_chain_residual(k: int, alpha: float, t_grid) -> float:
    """Max discrepancy between ``d/dt g^i`` and ``k alpha (g^(i-1) - g^i)``.

    Checked for ``i = 1..k`` at every grid point, with ``g^0 = 0``.
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t_grid must lie in (0, inf)")
    a = k * alpha
    prev = np.zeros_like(t)
    worst = 0.0
    for i in range(1, k + 1):
        kern = ErlangKernel(i, a)
        cur = erlang_pdf(kern, t)
        worst = max(worst, float(np.max(np.abs(erlang_pdf_derivative(kern, t) - a * (prev - cur)))))
        prev = cur
    return worst


def delay_means(model: ModelSpec, params: EpiParams) -> tuple[float, float]:
    """Mean waits (days) from recovery to ``S_r`` and from ``S_r`` to ``S_0``."""
    ka = model.k * params.alpha
    return (model.k - model.r) / ka, model.r / ka


@dataclass(frozen=True)
class DelayCheckReport:
    max_substitution_residual: float  # people
    max_gamma_pi_residual: float  # people/day
    truncation_bound: float  # people: N * tail mass of g^1 beyond t_check
    tail_mass: float
    per_index_residuals: tuple[float, ...]  # index i-1 holds |S_i(quad) - S_i(traj)|
    quad_step: float
    t_check: float
    substituted: tuple[float, ...]
    simulated: tuple[float, ...]

    def passes(self, N: float, rel_tol: float = 1e-3) -> bool:
        return self.max_substitution_residual <= max(rel_tol * N, self.truncation_bound)


def _uniform_step(times: np.ndarray) -> float:
    steps = np.diff(times)
    h = float(np.median(steps))
    if np.max(np.abs(steps - h)) > 1e-6 * h:
        raise DomainError("substitution check needs a uniform output grid")
    return h


def _trapz_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    if n == 1:
        w[0] = 0.0
    return w


def _causal_convolution(u: np.ndarray, kernel: np.ndarray, h: float) -> np.ndarray:
    # trapezoid rule for int_0^{t_j} u(s) g(t_j - s) ds at every grid point t_j
    full = np.convolve(u, kernel)[: len(u)]
    out = h * (full - 0.5 * u[0] * kernel - 0.5 * u * kernel[0])
    out[0] = 0.0
    return out


def lct_substitution_check(
    model: ModelSpec,
    params: EpiParams,
    traj: Trajectory,
    t_check: float,
    stride: int = 1,
) -> DelayCheckReport:
    """Compare convolution integrals of a trajectory with its chain states.

    The trajectory must start with ``S_1..S_k`` empty and have a uniform
    output grid; ``stride`` subsamples it to coarsen the quadrature.
    """
    if model.kind.is_basic:
        raise DomainError("the substitution check applies to chain models")
    k, r = model.k, model.require_integer_r()
    p = params
    times = traj.times
    if t_check > times[-1] * (1 + 1e-12) or t_check <= 0:
        raise DomainError(f"t_check={t_check} outside trajectory range (0, {times[-1]}]")
    j = int(np.argmin(np.abs(times - t_check)))
    h_raw = _uniform_step(times[: j + 1])
    if abs(times[j] - t_check) > 1e-6 * h_raw:
        raise DomainError(f"t_check={t_check} is not on the output grid")
    if j % stride:
        raise DomainError(f"stride {stride} does not divide the index of t_check")
    idx = np.arange(0, j + 1, stride)
    t = times[idx]
    y = traj.states[idx]
    h = h_raw * stride
    if np.any(np.abs(y[0, 1 : k + 1]) > 1e-12 * p.N):
        raise DomainError("trajectory must start with S_1..S_k empty")

    ka = k * p.alpha
    s0 = y[:, 0]
    chain = y[:, 1 : k + 1]
    i1, i2 = y[:, k + 1], y[:, k + 2]
    immune = chain[:, :r].sum(axis=1)  # R = S_1 + ... + S_r
    if model.kind.is_integrated:
        inflow = p.lam * (s0 + immune) + p.gamma * (i1 + i2)
    else:
        inflow = p.gamma * (i1 + i2)

    lag = t[-1] - t  # t_check - tau
    w = _trapz_weights(len(t), h)

    def kernel_on_lag(shape: int) -> np.ndarray:
        return erlang_pdf(ErlangKernel(shape, ka), lag)

    if k - r >= 1:
        gamma_series = _causal_convolution(inflow, erlang_pdf(ErlangKernel(k - r, ka), t), h)
    else:
        gamma_series = inflow

    cum_i2 = np.concatenate(([0.0], np.cumsum(0.5 * h * (i2[1:] + i2[:-1]))))
    survival = np.exp(-(p.beta2 / p.N) * (cum_i2[-1] - cum_i2) - p.lam * lag)

    substituted = np.empty(k)
    for i in range(1, k + 1):
        if i <= r:
            integrand = gamma_series * survival * kernel_on_lag(r - i + 1)
        else:
            integrand = inflow * kernel_on_lag(k - i + 1)
        substituted[i - 1] = float(np.dot(w, integrand)) / ka

    simulated = chain[-1]
    residuals = np.abs(substituted - simulated)

    flow_residuals = []
    if r < k:
        flow_residuals.append(abs(gamma_series[-1] - ka * simulated[r]))
    pi_value = float(np.dot(w, gamma_series * survival * kernel_on_lag(r))) if r >= 1 else gamma_series[-1]
    flow_residuals.append(abs(pi_value - ka * simulated[0]))

    tail = math.exp(-ka * t_check)
    return DelayCheckReport(
        max_substitution_residual=float(residuals.max()),
        max_gamma_pi_residual=float(max(flow_residuals)),
        truncation_bound=p.N * tail,
        tail_mass=tail,
        per_index_residuals=tuple(residuals.tolist()),
        quad_step=h,
        t_check=float(t[-1]),
        substituted=tuple(substituted.tolist()),
        simulated=tuple(simulated.tolist()),
    )
