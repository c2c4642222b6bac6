"""Reproduction numbers (closed form and next-generation evaluation) and
region classification.

Two independent routes produce the same five numbers:

* :func:`repro_closed` evaluates the published closed-form expressions for
  each model kind;
* :func:`repro_numeric` evaluates the scalar next-generation expressions
  ``beta1 S_0 / (gamma N)`` and ``beta2 / (gamma N) * sum_{i<=r} S_i`` at the
  closed-form equilibria built by :mod:`twostrain.equilibria`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import Optional

from .equilibria import (
    disease_free,
    endemic_level_1,
    endemic_level_2,
    geometric_sum,
    is_admissible_level,
    strain1_only,
    strain2_only,
)
from .errors import SingularParameterError
from .model_core import EpiParams, ModelKind, ModelSpec

__all__ = [
    "ReproductionSet",
    "RegionLabel",
    "TARGETS",
    "repro_closed",
    "repro_numeric",
    "closed_form_value",
    "classify",
    "region_label",
]

TARGETS = ("r1", "r2", "r12", "r21")

# below this lam/(k alpha) the literal Strain-2 competitive expressions lose
# digits to a removable 0/0 at lam = 0; an equivalent expanded form is used
_SMALL_X = 1e-4


class RegionLabel(str, Enum):
    DF = "DF"
    S1 = "S1"
    S2 = "S2"
    C = "C"
    INDETERMINATE = "Indeterminate"

    @property
    def endemic(self) -> bool:
        return self in (RegionLabel.S1, RegionLabel.S2, RegionLabel.C)


@dataclass(frozen=True)
class ReproductionSet:
    """``r12``/``r21`` are ``None`` when the opposing single-strain
    equilibrium is inadmissible."""

    r0: float
    r1: float
    r2: float
    r12: Optional[float]
    r21: Optional[float]

    def as_dict(self) -> dict[str, Optional[float]]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _div(num: float, den: float, expression: str) -> float:
    if den == 0.0 or not math.isfinite(den):
        raise SingularParameterError(expression, den)
    return num / den


def _r1(model: ModelSpec, p: EpiParams) -> float:
    if model.kind is ModelKind.INTEGRATED_CHAIN:
        ka = model.k * p.alpha
        return (p.beta1 / p.gamma) * (ka / (ka + (model.k - model.r) * p.lam)) * (ka / (ka + p.lam)) ** model.r
    return (p.beta1 / p.gamma) * (p.alpha / (p.alpha + p.lam))


def _r2(model: ModelSpec, p: EpiParams) -> float:
    if model.kind is ModelKind.INTEGRATED_BASIC:
        return p.beta2 / p.gamma
    if model.kind is ModelKind.INTEGRATED_CHAIN:
        ka = model.k * p.alpha
        return (p.beta2 / p.gamma) * (ka / (ka + (model.k - model.r) * p.lam))
    return (p.beta2 / p.gamma) * (p.alpha / (p.alpha + p.lam))


def _r12(model: ModelSpec, p: EpiParams) -> float:
    b1, b2, g, a, lam = p.beta1, p.beta2, p.gamma, p.alpha, p.lam
    ratio = _div(b1, b2, "beta2")
    if model.kind is ModelKind.INTEGRATED_BASIC:
        return ratio * _div(a, a + b2 + lam - g, "alpha + beta2 + lambda - gamma")
    if model.kind is ModelKind.SEPARATED_BASIC:
        return ratio * _div(a * (lam + a), a * (b2 - g + lam + a) - g * lam,
                            "alpha (beta2 - gamma + lambda + alpha) - gamma lambda")
    k, r = model.k, model.r
    ka = k * a
    if model.kind is ModelKind.INTEGRATED_CHAIN:
        base = _div((k - r) * g + ka, (k - r - 1) * g + ka + b2 + lam,
                    "(k - r - 1) gamma + k alpha + beta2 + lambda")
        return ratio * base**r
    inner = _div(ka * ((k - r) * g + ka), ka**2 + ka * ((k - r - 1) * g + b2 + lam) - g * lam * r,
                 "(k alpha)^2 + k alpha ((k - r - 1) gamma + beta2 + lambda) - gamma lambda r")
    num = (ka * (b2 - g) - g * lam * k) * inner**r + lam * ((k - r) * g + ka)
    return ratio * _div(num, ka * (b2 - g + lam) - g * lam * r, "k alpha (beta2 - gamma + lambda) - gamma lambda r")


def _r21(model: ModelSpec, p: EpiParams) -> float:
    b1, b2, g, a, lam = p.beta1, p.beta2, p.gamma, p.alpha, p.lam
    ratio = _div(b2, b1, "beta1")
    if model.kind is ModelKind.INTEGRATED_BASIC:
        return ratio * (b1 + a + lam) / (g + a)
    if model.kind is ModelKind.SEPARATED_BASIC:
        return ratio * a * (a + b1 + lam) / ((lam + a) * (g + a))
    k, r = model.k, model.r
    ka = k * a
    x = lam / ka
    q = 1.0 + x
    if model.kind is ModelKind.INTEGRATED_CHAIN:
        if x < _SMALL_X:
            big_g = geometric_sum(x, r) + (k - r) * q**r
            return ratio * (b1 * geometric_sum(x, r) + q**r * (ka + g * (k - r))) / (ka + g * big_g)
        num = (g * lam * (k - r) + (b1 + lam) * ka) * (ka + lam) ** r - b1 * ka ** (r + 1)
        den = g * (ka + (k - r) * lam) * (ka + lam) ** r + (lam - g) * ka ** (r + 1)
        return ratio * _div(num, den, "gamma (k alpha + (k - r) lambda)(k alpha + lambda)^r + (lambda - gamma)(k alpha)^(r+1)")
    if x < _SMALL_X:
        h = geometric_sum(x, r) * q ** (-r)
        extra = h * (a * b1 - (a + lam) * g) / (k * a**2 + (a + lam) * g * h + a * (k - r) * g)
        return ratio * (1.0 + extra)
    num = a * b1 * k * ka**r + (g * lam * r - ((a + g) * lam + a * b1) * k) * (ka + lam) ** r
    den = k * g * (a + lam) * ka**r + (g * lam * r - ((a + 2 * g) * lam + a * g) * k) * (ka + lam) ** r
    return ratio * _div(num, den, "k gamma (alpha + lambda)(k alpha)^r + (gamma lambda r - ((alpha + 2 gamma) lambda + alpha gamma) k)(alpha k + lambda)^r")


_FORMULAS = {"r1": _r1, "r2": _r2, "r12": _r12, "r21": _r21}


def closed_form_value(model: ModelSpec, params: EpiParams, target: str) -> float:
    """Raw closed-form value of one of ``r1, r2, r12, r21``.

    Unlike :func:`repro_closed` this never marks a value absent, so it can be
    used for root finding across admissibility boundaries.
    """
    try:
        formula = _FORMULAS[target.lower()]
    except KeyError:
        raise ValueError(f"unknown reproduction number {target!r}; expected one of {TARGETS}") from None
    return formula(model, params)


def repro_closed(model: ModelSpec, params: EpiParams) -> ReproductionSet:
    r1 = _r1(model, params)
    r2 = _r2(model, params)
    r12 = _r12(model, params) if is_admissible_level(endemic_level_2(model, params), params.N) else None
    r21 = _r21(model, params) if is_admissible_level(endemic_level_1(model, params), params.N) else None
    return ReproductionSet(max(r1, r2), r1, r2, r12, r21)


def _ngm_strain1(state, params: EpiParams) -> float:
    return params.beta1 * state.s[0] / (params.gamma * params.N)


def _ngm_strain2(state, r: int, params: EpiParams) -> float:
    return params.beta2 * math.fsum(state.s[: r + 1]) / (params.gamma * params.N)


def repro_numeric(model: ModelSpec, params: EpiParams) -> ReproductionSet:
    """Next-generation expressions evaluated at the closed-form equilibria."""
    r = model.require_integer_r()
    x0 = disease_free(model, params)
    r1 = _ngm_strain1(x0, params)
    r2 = _ngm_strain2(x0, r, params)
    x2 = strain2_only(model, params)
    x1 = strain1_only(model, params)
    r12 = None if x2 is None else _ngm_strain1(x2, params)
    r21 = None if x1 is None else _ngm_strain2(x1, r, params)
    return ReproductionSet(max(r1, r2), r1, r2, r12, r21)


def _side(value: Optional[float], tie_tol: float) -> int:
    if value is None or not math.isfinite(value) or abs(value - 1.0) <= tie_tol:
        return 0
    return 1 if value > 1.0 else -1


def classify(rs: ReproductionSet, tie_tol: float = 1e-9) -> RegionLabel:
    """Region label from the four-case split on the reproduction numbers.

    A value within ``tie_tol`` of 1, or a missing competitive number that the
    split needs, gives ``INDETERMINATE``.  So does ``r12 < 1`` together with
    ``r21 < 1``, which none of the four cases covers.
    """
    one, two = _side(rs.r1, tie_tol), _side(rs.r2, tie_tol)
    if one == 0 or two == 0:
        return RegionLabel.INDETERMINATE
    if one < 0 and two < 0:
        return RegionLabel.DF
    if one > 0 and two < 0:
        return RegionLabel.S1
    if one < 0 and two > 0:
        return RegionLabel.S2
    s12, s21 = _side(rs.r12, tie_tol), _side(rs.r21, tie_tol)
    if s12 > 0 and s21 < 0:
        return RegionLabel.S1
    if s12 < 0 and s21 > 0:
        return RegionLabel.S2
    if s12 > 0 and s21 > 0:
        return RegionLabel.C
    return RegionLabel.INDETERMINATE


def region_label(model: ModelSpec, params: EpiParams, tie_tol: float = 1e-9) -> RegionLabel:
    return classify(repro_closed(model, params), tie_tol)
