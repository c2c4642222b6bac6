"""Closed-form disease-free and single-strain endemic equilibria.

The co-existence equilibrium has no closed form and is only reached
numerically (see :func:`twostrain.integrator.settle`).

The Strain-1 endemic levels are evaluated in a rearranged but algebraically
identical form: the textbook expressions are ``0/0`` at ``lam = 0``.  With
``x = lam / (k alpha)`` and ``q = 1 + x`` they become sums of powers of
``q`` that stay finite for every ``lam >= 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .model_core import EpiParams, ModelSpec, StateVec

__all__ = [
    "NUMERIC_ONLY",
    "ADMISSIBILITY_TOL",
    "EquilibriumSet",
    "geometric_sum",
    "endemic_level_1",
    "endemic_level_2",
    "disease_free",
    "strain1_only",
    "strain2_only",
    "equilibria",
]

NUMERIC_ONLY = "numeric-only"
# endemic levels at or below this fraction of N count as inadmissible
ADMISSIBILITY_TOL = 1e-12


def geometric_sum(x: float, r: float) -> float:
    """``sum_{i=0}^{r-1} (1+x)^i`` for ``x >= 0``; real ``r`` allowed."""
    if x == 0.0:
        return float(r)
    return math.expm1(r * math.log1p(x)) / x


def _chain_factors(model: ModelSpec, params: EpiParams) -> tuple[float, float, float]:
    ka = model.k * params.alpha
    x = params.lam / ka
    return ka, x, 1.0 + x


def _integrated_g(model: ModelSpec, params: EpiParams) -> float:
    # G = sum_{i=1}^r q^{i-1} + (k - r) q^r
    _, x, q = _chain_factors(model, params)
    return geometric_sum(x, model.r) + (model.k - model.r) * q**model.r


def _separated_h(model: ModelSpec, params: EpiParams) -> float:
    # H = sum_{j=1}^r q^{-j}
    _, x, q = _chain_factors(model, params)
    return geometric_sum(x, model.r) * q ** (-model.r)


def endemic_level_1(model: ModelSpec, params: EpiParams) -> float:
    """``I_1`` at the Strain-1-only equilibrium (may be <= 0: inadmissible)."""
    p = params
    if p.beta1 == 0.0:
        return -math.inf
    ka = model.k * p.alpha
    if model.kind.is_integrated:
        g = _integrated_g(model, p)
        return p.N * ((p.beta1 - p.gamma) * ka - p.lam * p.gamma * g) / (p.beta1 * (ka + p.gamma * g))
    h = _separated_h(model, p)
    num = ka * (p.alpha * p.beta1 - (p.alpha + p.lam) * p.gamma)
    den = p.beta1 * (model.k * p.alpha**2 + (p.alpha + p.lam) * p.gamma * h + p.alpha * (model.k - model.r) * p.gamma)
    return p.N * num / den


def endemic_level_2(model: ModelSpec, params: EpiParams) -> float:
    """``I_2`` at the Strain-2-only equilibrium (may be <= 0: inadmissible)."""
    p = params
    if p.beta2 == 0.0:
        return -math.inf
    ka = model.k * p.alpha
    kr = model.k - model.r
    if model.kind.is_integrated:
        return (p.N / p.beta2) * (p.beta2 * ka - p.gamma * (kr * p.lam + ka)) / (kr * p.gamma + ka)
    return p.N * model.k * (p.alpha * p.beta2 - (p.alpha + p.lam) * p.gamma) / (p.beta2 * (ka + kr * p.gamma))


def is_admissible_level(level: float, N: float) -> bool:
    return level > ADMISSIBILITY_TOL * N


def disease_free(model: ModelSpec, params: EpiParams) -> StateVec:
    k, r = model.k, model.require_integer_r()
    p = params
    s = [0.0] * (k + 1)
    if model.kind.is_integrated:
        ka, x, q = _chain_factors(model, p)
        s[0] = p.N * ka / (ka + (k - r) * p.lam) * q ** (-r)
        for i in range(1, k + 1):
            s[i] = x * q ** (min(i, r + 1) - 1) * s[0]
        return StateVec(s, 0.0, 0.0)
    s[0] = p.N * p.alpha / (p.alpha + p.lam)
    return StateVec(s, 0.0, 0.0, p.N * p.lam / (p.alpha + p.lam))


def strain1_only(model: ModelSpec, params: EpiParams) -> Optional[StateVec]:
    """Strain-1-only equilibrium, or ``None`` when ``I_1 <= 0`` there."""
    k, r = model.k, model.require_integer_r()
    p = params
    i1 = endemic_level_1(model, p)
    if not is_admissible_level(i1, p.N):
        return None
    ka, _, q = _chain_factors(model, p)
    s = [0.0] * (k + 1)
    s[0] = p.N * p.gamma / p.beta1
    if model.kind.is_integrated:
        s1 = p.gamma * (p.beta1 * i1 + p.N * p.lam) / (ka * p.beta1)
        for i in range(1, k + 1):
            s[i] = s1 * q ** (min(i, r + 1) - 1)
        return StateVec(s, i1, 0.0)
    top = p.gamma * i1 / ka
    for i in range(1, k + 1):
        s[i] = top * q ** min(i - 1 - r, 0)
    v = p.lam / p.alpha * math.fsum(s[: r + 1])
    return StateVec(s, i1, 0.0, v)


def strain2_only(model: ModelSpec, params: EpiParams) -> Optional[StateVec]:
    """Strain-2-only equilibrium, or ``None`` when ``I_2 <= 0`` there."""
    k, r = model.k, model.require_integer_r()
    p = params
    i2 = endemic_level_2(model, p)
    if not is_admissible_level(i2, p.N):
        return None
    ka = k * p.alpha
    force = p.beta2 * i2 / p.N
    growth = (force + p.lam + ka) / ka
    s = [0.0] * (k + 1)
    if model.kind.is_integrated:
        base = (k - r) * p.gamma + ka
        s[0] = (p.N * p.gamma / p.beta2) * (base / (p.beta2 + p.lam - p.gamma + base)) ** r
        if r >= 1:
            s[1] = (force + p.lam) / ka * s[0]
            for i in range(2, r + 1):
                s[i] = growth * s[i - 1]
        for i in range(r + 1, k + 1):
            s[i] = p.gamma * (p.beta2 * i2 + p.N * p.lam) / (ka * p.beta2)
        return StateVec(s, 0.0, i2)
    top = p.gamma * i2 / ka
    for i in range(1, k + 1):
        s[i] = top * growth ** min(i - 1 - r, 0)
    s[0] = (p.gamma * i2 * growth ** (-r) + p.N * p.lam * p.gamma / p.beta2) / (force + p.lam)
    v = p.N * p.gamma * p.lam / (p.beta2 * p.alpha)
    return StateVec(s, 0.0, i2, v)


@dataclass(frozen=True)
class EquilibriumSet:
    disease_free: StateVec
    strain1_only: Optional[StateVec]
    strain2_only: Optional[StateVec]
    coexistence: str = NUMERIC_ONLY


def equilibria(model: ModelSpec, params: EpiParams) -> EquilibriumSet:
    return EquilibriumSet(
        disease_free(model, params),
        strain1_only(model, params),
        strain2_only(model, params),
    )
