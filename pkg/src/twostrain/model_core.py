"""Model variants, parameter sets, state layout and right-hand sides.

All four models share one state layout::

    [S_0, S_1, ..., S_k, I_1, I_2]        integrated kinds
    [S_0, S_1, ..., S_k, I_1, I_2, V]     separated kinds

The basic models are the ``k = r = 1`` instances of the chain models, with
``R`` stored in ``S_1``.  One right-hand-side routine serves every kind.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from numbers import Integral, Real

import numpy as np

from .errors import DomainError, StructuralError

__all__ = [
    "ModelKind",
    "ModelSpec",
    "EpiParams",
    "StateVec",
    "make_model",
    "epsilon_to_lambda",
    "lambda_to_epsilon",
    "eval_rhs",
    "rhs_function",
]


class ModelKind(str, Enum):
    INTEGRATED_BASIC = "integrated-basic"
    SEPARATED_BASIC = "separated-basic"
    INTEGRATED_CHAIN = "integrated-chain"
    SEPARATED_CHAIN = "separated-chain"

    @property
    def is_basic(self) -> bool:
        return self in (ModelKind.INTEGRATED_BASIC, ModelKind.SEPARATED_BASIC)

    @property
    def is_integrated(self) -> bool:
        return self in (ModelKind.INTEGRATED_BASIC, ModelKind.INTEGRATED_CHAIN)

    @property
    def is_separated(self) -> bool:
        return not self.is_integrated

    @classmethod
    def parse(cls, value: "ModelKind | str") -> "ModelKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for kind in cls:
            if key in (kind.value, kind.name.lower().replace("_", "-"), kind.value.replace("-", "")):
                return kind
        raise DomainError(f"unknown model kind {value!r}")


@dataclass(frozen=True)
class ModelSpec:
    """Which model, plus the chain length ``k`` and Strain-2 resistance ``r``.

    ``r`` may be real-valued when the model is only used for closed-form
    analysis (e.g. a continuous ``r`` axis); anything that needs the state
    layout calls :meth:`require_integer_r` first.
    """

    kind: ModelKind
    k: int = 1
    r: float = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        if isinstance(self.k, bool) or not isinstance(self.k, Integral) or self.k < 1:
            raise DomainError(f"k must be an integer >= 1, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        if not isinstance(self.r, Real) or not math.isfinite(self.r) or not 0 <= self.r <= self.k:
            raise DomainError(f"r must satisfy 0 <= r <= k={self.k}, got {self.r!r}")
        if isinstance(self.r, Integral) or float(self.r).is_integer():
            object.__setattr__(self, "r", int(self.r))
        if self.kind.is_basic and (self.k != 1 or self.r != 1):
            raise DomainError(f"{self.kind.value} requires k = r = 1")

    @property
    def has_v(self) -> bool:
        return self.kind.is_separated

    @property
    def n_states(self) -> int:
        return self.k + 3 + int(self.has_v)

    @property
    def integer_r(self) -> bool:
        return isinstance(self.r, int)

    def require_integer_r(self) -> int:
        if not self.integer_r:
            raise DomainError(f"r must be an integer for the state layout, got {self.r!r}")
        return self.r

    def with_r(self, r: float) -> "ModelSpec":
        return replace(self, r=r)

    def labels(self) -> list[str]:
        names = [f"S{i}" for i in range(self.k + 1)] + ["I1", "I2"]
        if self.has_v:
            names.append("V")
        return names


def make_model(kind: ModelKind | str, k: int | None = None, r: int | None = None) -> ModelSpec:
    """Build a validated :class:`ModelSpec` for simulation use.

    Basic kinds default to ``k = r = 1`` and reject anything else; chain kinds
    need explicit integer ``k`` and ``r``.
    """
    kind = ModelKind.parse(kind)
    if kind.is_basic:
        if (k is not None and k != 1) or (r is not None and r != 1):
            raise DomainError(f"{kind.value} is the k = r = 1 model; got k={k}, r={r}")
        return ModelSpec(kind, 1, 1)
    if k is None or r is None:
        raise DomainError(f"{kind.value} needs explicit k and r")
    for name, value in (("k", k), ("r", r)):
        if isinstance(value, bool) or not isinstance(value, Integral):
            raise DomainError(f"{name} must be an integer, got {value!r}")
    if r > k:
        raise DomainError(f"r={r} exceeds k={k}")
    return ModelSpec(kind, int(k), int(r))


@dataclass(frozen=True)
class EpiParams:
    """Rates in 1/day and the population size.

    ``lam`` is the vaccination rate; the effective immunity level is derived
    from it on demand (see :func:`lambda_to_epsilon`).
    """

    beta1: float
    beta2: float
    gamma: float
    alpha: float
    lam: float = 0.0
    N: float = 1000.0

    def __post_init__(self):
        for name in ("beta1", "beta2", "gamma", "alpha", "lam", "N"):
            value = getattr(self, name)
            if not isinstance(value, Real) or not math.isfinite(value):
                raise DomainError(f"{name} must be a finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        for name in ("beta1", "beta2", "lam"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("gamma", "alpha", "N"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")

    def replace(self, **changes) -> "EpiParams":
        return replace(self, **changes)

    def with_epsilon(self, model: ModelSpec, eps: float) -> "EpiParams":
        return replace(self, lam=epsilon_to_lambda(model, eps, self.alpha))


def epsilon_to_lambda(model: ModelSpec, eps: float, alpha: float) -> float:
    """Vaccination rate that yields the effective immunity level ``eps``."""
    if not math.isfinite(eps) or not 0.0 <= eps < 1.0:
        raise DomainError(f"effective immunity must lie in [0, 1), got {eps!r}")
    if alpha <= 0:
        raise DomainError(f"alpha must be > 0, got {alpha!r}")
    if eps == 0.0:
        return 0.0
    if model.kind is ModelKind.INTEGRATED_CHAIN:
        if model.k - model.r <= 0:
            raise DomainError("degenerate parametrization: r = k pins epsilon at 0 for every lambda")
        return eps * alpha * model.k / ((1.0 - eps) * (model.k - model.r))
    return eps * alpha / (1.0 - eps)


def lambda_to_epsilon(model: ModelSpec, lam: float, alpha: float) -> float:
    """Disease-free fraction of the population effectively immune to Strain 1.

    For the integrated chain model this is the share in ``S_{r+1}..S_k``;
    for every other kind it is the share in ``R`` (integrated basic) or ``V``.
    """
    if not math.isfinite(lam) or lam < 0:
        raise DomainError(f"lambda must be >= 0, got {lam!r}")
    if alpha <= 0:
        raise DomainError(f"alpha must be > 0, got {alpha!r}")
    if model.kind is ModelKind.INTEGRATED_CHAIN:
        x = (model.k - model.r) * lam
        return x / (model.k * alpha + x)
    return lam / (alpha + lam)


@dataclass(frozen=True)
class StateVec:
    """Compartment occupancies (people) in the unified chain layout."""

    s: tuple[float, ...]
    i1: float
    i2: float
    v: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(float(x) for x in self.s))
        object.__setattr__(self, "i1", float(self.i1))
        object.__setattr__(self, "i2", float(self.i2))
        if self.v is not None:
            object.__setattr__(self, "v", float(self.v))
        if len(self.s) < 2:
            raise StructuralError("a state needs at least S_0 and S_1")

    @property
    def k(self) -> int:
        return len(self.s) - 1

    def total(self) -> float:
        return math.fsum(self.to_array())

    def to_array(self) -> np.ndarray:
        tail = [self.i1, self.i2] + ([] if self.v is None else [self.v])
        return np.array(list(self.s) + tail, dtype=float)

    @classmethod
    def from_array(cls, model: ModelSpec, y) -> "StateVec":
        y = np.asarray(y, dtype=float)
        if y.shape != (model.n_states,):
            raise StructuralError(
                f"{model.kind.value} with k={model.k} needs {model.n_states} entries, got shape {y.shape}"
            )
        k = model.k
        v = float(y[k + 3]) if model.has_v else None
        return cls(tuple(y[: k + 1]), y[k + 1], y[k + 2], v)

    def check_layout(self, model: ModelSpec) -> None:
        if self.k != model.k:
            raise StructuralError(f"state has k={self.k}, model has k={model.k}")
        if model.has_v != (self.v is not None):
            raise StructuralError(
                f"{model.kind.value} {'needs' if model.has_v else 'has no'} a V compartment"
            )

    def as_dict(self) -> dict[str, float]:
        names = [f"S{i}" for i in range(len(self.s))] + ["I1", "I2"] + ([] if self.v is None else ["V"])
        return dict(zip(names, self.to_array().tolist()))


@dataclass(frozen=True)
class _RhsConstants:
    """Linear flows as a matrix plus the two mass-action infection terms."""

    k: int
    r: int
    beta1_n: float
    beta2_n: float
    gamma: float
    linear: np.ndarray


def _linear_flows(model: ModelSpec, params: EpiParams, r: int) -> np.ndarray:
    k = model.k
    n = model.n_states
    i1, i2, v = k + 1, k + 2, k + 3
    a = np.zeros((n, n))

    def flow(src: int, dst: int, rate: float) -> None:
        if src != dst:
            a[src, src] -= rate
            a[dst, src] += rate

    ka = k * params.alpha
    for i in range(1, k + 1):
        flow(i, i - 1, ka)  # waning S_i -> S_{i-1}
    flow(i1, k, params.gamma)
    flow(i2, k, params.gamma)
    for i in range(r + 1):
        # integrated: boost to the top of the chain (S_k -> S_k is a no-op)
        flow(i, k if model.kind.is_integrated else v, params.lam)
    if model.has_v:
        flow(v, 0, params.alpha)
    return a


def _constants(model: ModelSpec, params: EpiParams) -> _RhsConstants:
    r = model.require_integer_r()
    return _RhsConstants(
        k=model.k,
        r=r,
        beta1_n=params.beta1 / params.N,
        beta2_n=params.beta2 / params.N,
        gamma=params.gamma,
        linear=_linear_flows(model, params, r),
    )


def _derivative(c: _RhsConstants, y: np.ndarray) -> np.ndarray:
    k, r = c.k, c.r
    dy = c.linear @ y
    inf1 = c.beta1_n * y[0] * y[k + 1]
    inf2 = (c.beta2_n * y[k + 2]) * y[: r + 1]
    dy[0] -= inf1
    dy[k + 1] += inf1
    dy[: r + 1] -= inf2
    dy[k + 2] += inf2.sum()
    return dy


def rhs_function(model: ModelSpec, params: EpiParams):
    """Return ``f(t, y)`` on raw arrays, for use with ODE steppers."""
    c = _constants(model, params)
    n = model.n_states

    def f(t, y):
        return _derivative(c, y)

    f.n_states = n
    return f


def eval_rhs(model: ModelSpec, params: EpiParams, state: StateVec) -> StateVec:
    """Time derivative of every compartment, returned in the state layout."""
    state.check_layout(model)
    c = _constants(model, params)
    return StateVec.from_array(model, _derivative(c, state.to_array()))
