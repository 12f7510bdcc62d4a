"""Orbit iteration with an exact integer/fractional split of every term.

Terms are stored as ``int_part`` (int64) plus ``frac_part`` (float64 in
[0, 1)).  For maps with a lift period L (F(x + L) = F(x) + L) the map is
always evaluated on an argument in [0, L), so increments and second
differences keep full double precision however far the orbit climbs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import (
    DescendingStepError,
    DomainError,
    NonFiniteError,
    SeriesTooShortError,
    UsageError,
)
from .expr import compile_scalar
from .families import BoundMap


def decompose(value: float) -> tuple[int, float]:
    """(floor, fractional part).  Exact for value >= 0; for tiny negative
    values value - floor rounds up to 1.0, which is folded back to 0."""
    k = math.floor(value)
    y = value - k
    if y >= 1.0:
        return int(k) + 1, 0.0
    return int(k), y


@dataclass
class OrbitSeries:
    int_part: np.ndarray
    frac_part: np.ndarray
    x0: Optional[float] = None
    params: dict = field(default_factory=dict)
    source: Optional[str] = None

    def __post_init__(self):
        self.int_part = np.asarray(self.int_part, dtype=np.int64)
        self.frac_part = np.asarray(self.frac_part, dtype=np.float64)
        if self.int_part.shape != self.frac_part.shape or self.int_part.ndim != 1:
            raise UsageError("int_part and frac_part must be 1-d arrays of equal length")

    @classmethod
    def from_values(cls, values, **kw):
        values = np.asarray(values, dtype=np.float64)
        k = np.floor(values)
        y = values - k
        wrap = y >= 1.0
        k[wrap] += 1
        y[wrap] = 0.0
        return cls(k.astype(np.int64), y, **kw)

    def __len__(self):
        return len(self.int_part)

    @property
    def N(self):
        return len(self)

    @property
    def values(self) -> np.ndarray:
        return self.int_part.astype(np.float64) + self.frac_part

    def value(self, n: int) -> float:
        """Term u(n), 1-based as in the printed tables."""
        return float(self.int_part[n - 1]) + float(self.frac_part[n - 1])

    def lag_diff(self, lag: int) -> np.ndarray:
        """u(i + lag) - u(i) for every admissible i, without cancellation loss."""
        k, y = self.int_part, self.frac_part
        return (k[lag:] - k[:-lag]).astype(np.float64) + (y[lag:] - y[:-lag])

    def second_diff(self, p: int) -> np.ndarray:
        """u(i + 2p) - 2u(i + p) + u(i) for every admissible i (0-based i)."""
        k, y = self.int_part, self.frac_part
        n = len(k)
        ki = k[2 * p:] - 2 * k[p:n - p] + k[:n - 2 * p]
        yi = (y[2 * p:] - y[p:n - p]) - (y[p:n - p] - y[:n - 2 * p])
        return ki.astype(np.float64) + yi

    def tail(self, start: int) -> "OrbitSeries":
        """Drop the first `start` terms (0-based slice)."""
        return OrbitSeries(self.int_part[start:], self.frac_part[start:],
                           self.x0, self.params, self.source)


@dataclass
class DiffColumns:
    delta1: np.ndarray
    delta2_by_phase: list


def diff_columns(series: OrbitSeries, p: int) -> DiffColumns:
    if p < 1:
        raise UsageError("period must be >= 1")
    if len(series) < 3 * p:
        raise SeriesTooShortError(f"need at least {3 * p} terms, have {len(series)}")
    d2 = series.second_diff(p)
    return DiffColumns(series.lag_diff(1), [d2[j::p] for j in range(p)])


def orbit_steps(fmap: BoundMap, x0: float) -> Iterator[tuple[int, float]]:
    """Stream (int_part, frac_part) of u(1) = x0, u(2) = F(x0), ... forever.

    Streaming mode: callers keep whatever window they need.
    """
    f = fmap.scalar()
    lift = fmap.lift_period
    k, y = decompose(float(x0))
    n = 1
    while True:
        yield k, y
        if lift:
            base = k - k % lift
            x = (k - base) + y
        else:
            base = 0
            x = k + y
        v = f(x)
        if not math.isfinite(v):
            raise NonFiniteError(f"non-finite iterate at index {n + 1}")
        if not v > x:
            raise DescendingStepError(
                f"F(x) <= x at index {n} (x={x!r}, F(x)={v!r}); map is not ascending")
        fl = math.floor(v)
        k = base + int(fl)
        y = v - fl
        n += 1


def iterate(fmap: BoundMap, x0: float, n: int) -> OrbitSeries:
    """Materialize the first n terms of the orbit of x0."""
    if n < 1:
        raise UsageError("n must be >= 1")
    ks = np.empty(n, dtype=np.int64)
    ys = np.empty(n, dtype=np.float64)
    # inlined copy of orbit_steps: this loop dominates every run time
    raw = compile_scalar(fmap.family.expr).raw
    a, b = fmap.alpha, fmap.beta
    lift = fmap.lift_period
    floor, isfinite = math.floor, math.isfinite
    k, y = decompose(float(x0))
    ks[0], ys[0] = k, y
    # python lists are flushed into the arrays every CHUNK terms
    CHUNK = 1 << 16
    kl, yl = [], []
    filled = 1
    i = 0
    try:
        for i in range(1, n):
            if lift:
                base = k - k % lift
                x = (k - base) + y
            else:
                base = 0
                x = k + y
            v = raw(x, a, b)
            if not isfinite(v):
                raise NonFiniteError(f"non-finite iterate at index {i + 1}")
            if not v > x:
                raise DescendingStepError(
                    f"F(x) <= x at index {i} (x={x!r}, F(x)={v!r}); map is not ascending")
            fl = floor(v)
            k = base + int(fl)
            y = v - fl
            kl.append(k)
            yl.append(y)
            if len(kl) == CHUNK:
                ks[filled:filled + CHUNK] = kl
                ys[filled:filled + CHUNK] = yl
                filled += CHUNK
                kl, yl = [], []
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise DomainError(f"{exc} at index {i}") from exc
    ks[filled:] = kl
    ys[filled:] = yl
    return OrbitSeries(ks, ys, x0=float(x0), params=fmap.params())
