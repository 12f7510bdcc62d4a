"""Built-in map families, parameter binding and Schwarzian derivative scans."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EvaluationError, MissingParameterError, NonFiniteError, UsageError
from .expr import (
    PARAMETERS,
    Jet3,
    MapExpr,
    compile_scalar,
    compile_vector,
    eval_jet,
    parse_map_expr,
)

EPS_DERIV = 1e-9

_BUILTIN_TEXT = {
    "sine": "alpha*sin(pi*x)+x+beta",
    "phi_nested": "alpha*sin(sin(0.5*pi*x)^2)+x+beta",
    "psi_nested": "alpha*sin(sin(pi*x))+x+beta",
    "composite": "0.31830988618379*sin(pi*(0.3*sin(pi*x)+x))+0.3*sin(pi*x)+x+beta",
    "phi_positive_schwarzian": "alpha*0.5*sin(0.5*pi*sin(pi*x))+x+beta",
}

BUILTIN_NAMES = tuple(_BUILTIN_TEXT)


@dataclass(frozen=True)
class FamilySpec:
    """A map family x -> F(x) with named parameters.

    `lift_period` is an integer L with F(x + L) = F(x) + L, or None when the
    map has no such symmetry.  The orbit iterator uses it to keep the
    argument small.
    """

    name: str
    expr: MapExpr
    free_params: frozenset
    fixed_params: dict = field(default_factory=dict)
    lift_period: Optional[int] = None

    def __post_init__(self):
        referenced = self.expr.parameters
        if set(self.free_params) | set(self.fixed_params) != set(referenced):
            raise UsageError(
                f"family {self.name!r}: free {sorted(self.free_params)} and fixed "
                f"{sorted(self.fixed_params)} must cover exactly {sorted(referenced)}")


def builtin(name: str) -> FamilySpec:
    try:
        text = _BUILTIN_TEXT[name]
    except KeyError:
        raise UsageError(
            f"unknown family {name!r}; choose from {', '.join(BUILTIN_NAMES)}") from None
    expr = parse_map_expr(text)
    return FamilySpec(name, expr, expr.parameters, {}, lift_period=2)


def custom(text: str, lift_period: Optional[int] = None, name: str = "custom",
           fixed_params: Optional[dict] = None) -> FamilySpec:
    expr = parse_map_expr(text)
    fixed = dict(fixed_params or {})
    return FamilySpec(name, expr, expr.parameters - set(fixed), fixed, lift_period)


@dataclass(frozen=True)
class BoundMap:
    family: FamilySpec
    alpha: Optional[float]
    beta: Optional[float]

    def __call__(self, x: float) -> float:
        return self.scalar()(x)

    def scalar(self):
        """A one-argument float function x -> F(x)."""
        f = compile_scalar(self.family.expr)
        a, b = self.alpha, self.beta
        return lambda x: f(x, a, b)

    def vector(self):
        f = compile_vector(self.family.expr)
        a, b = self.alpha, self.beta
        return lambda x: f(x, a, b)

    def jet(self, x) -> Jet3:
        return eval_jet(self.family.expr, x, self.alpha, self.beta)

    @property
    def lift_period(self):
        return self.family.lift_period

    def params(self):
        return {"alpha": self.alpha, "beta": self.beta}


def bind(family: FamilySpec, alpha=None, beta=None) -> BoundMap:
    values = {"alpha": alpha, "beta": beta}
    for p in PARAMETERS:
        if p in family.fixed_params:
            if values[p] is not None and values[p] != family.fixed_params[p]:
                raise UsageError(f"parameter {p!r} is fixed to {family.fixed_params[p]!r}")
            values[p] = family.fixed_params[p]
        elif p in family.free_params and values[p] is None:
            raise MissingParameterError(f"family {family.name!r} needs a value for {p!r}")
    return BoundMap(family, values["alpha"], values["beta"])


ASCEND_MARGIN = 1e-12  # F(x) - x at or below this counts as touching the diagonal


def validate_ascending(fmap: BoundMap, x_lo: float = 0.0, x_hi: float = 2.0,
                       samples: int = 10_000) -> bool:
    """True iff F(x) - x > 0 on an evenly spaced grid, including at a
    Newton-refined minimum near the smallest sampled gap."""
    if not x_lo < x_hi:
        raise UsageError("x_lo must be below x_hi")
    if samples < 2:
        raise UsageError("need at least 2 samples")
    xs = np.linspace(x_lo, x_hi, samples)
    with np.errstate(all="ignore"):
        ys = np.broadcast_to(fmap.vector()(xs), xs.shape)
    if not np.all(np.isfinite(ys)):
        raise NonFiniteError("non-finite value while validating ascending property")
    gap = ys - xs
    if not np.all(gap > 0):
        return False
    # a tangency between grid points shows up as a tiny positive sampled gap;
    # Newton on (F(x) - x)' = 0 around the sampled minimum finds it
    i = int(np.argmin(gap))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, samples - 1)]
    x = xs[i]
    best = gap[i]
    for _ in range(30):
        try:
            j = fmap.jet(x)
        except EvaluationError:
            break
        best = min(best, j.v0 - x)
        if not j.v2 > 0:
            break
        step = (j.v1 - 1.0) / j.v2
        x = min(max(x - step, lo), hi)
        if abs(step) < 1e-15:
            break
    return bool(best > ASCEND_MARGIN)


def schwarzian_from_jet(jet: Jet3, eps: float = EPS_DERIV) -> Optional[float]:
    if abs(jet.v1) < eps:
        return None
    q = jet.v2 / jet.v1
    return jet.v3 / jet.v1 - 1.5 * q * q


def schwarzian_at(fmap: BoundMap, x: float, eps: float = EPS_DERIV) -> Optional[float]:
    """F'''/F' - 1.5 (F''/F')^2 at x, or None where |F'(x)| < eps."""
    return schwarzian_from_jet(fmap.jet(x), eps)


@dataclass
class SchwarzianReport:
    grid: list
    values: list  # None marks a singular sample
    all_negative: bool
    first_positive_sample: Optional[float]

    def to_dict(self):
        return {
            "all_negative": self.all_negative,
            "first_positive_sample": self.first_positive_sample,
            "singular_samples": sum(v is None for v in self.values),
            "grid": self.grid,
            "values": self.values,
        }


def schwarzian_scan(fmap: BoundMap, x_lo: float = 0.0, x_hi: float = 2.0,
                    samples: int = 10_000, eps: float = EPS_DERIV) -> SchwarzianReport:
    if samples < 2:
        raise UsageError("need at least 2 samples")
    grid = [float(v) for v in np.linspace(x_lo, x_hi, samples)]
    values = [schwarzian_at(fmap, x, eps) for x in grid]
    regular = [v for v in values if v is not None]
    first_pos = next((x for x, v in zip(grid, values) if v is not None and v > 0), None)
    all_negative = bool(regular) and all(v < 0 for v in regular)
    return SchwarzianReport(grid, values, all_negative, first_pos)


def finite_difference_schwarzian(fmap: BoundMap, x: float, h: float = 2e-3) -> float:
    """Schwarzian from fourth-order central stencils on plain evaluations."""
    f = fmap.scalar()
    fm3, fm2, fm1, f0, fp1, fp2, fp3 = (f(x + k * h) for k in range(-3, 4))
    if not all(math.isfinite(v) for v in (fm3, fm2, fm1, f0, fp1, fp2, fp3)):
        raise EvaluationError("non-finite value in finite-difference stencil")
    d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
    d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h)
    d3 = (fm3 - 8 * fm2 + 13 * fm1 - 13 * fp1 + 8 * fp2 - fp3) / (8 * h ** 3)
    return d3 / d1 - 1.5 * (d2 / d1) ** 2
