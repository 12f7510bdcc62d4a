"""Steady-point periodicity metrics and the chaos-modulo-1 estimator."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DescendingStepError,
    InsufficientDataError,
    NonFiniteError,
    UsageError,
)


def _check_orders(orders):
    orders = [int(o) for o in orders]
    if any(b <= a for a, b in zip(orders, orders[1:])):
        raise UsageError("steady orders must be strictly increasing")
    return orders


def average_periodicity(orders: Sequence[int]) -> float:
    orders = _check_orders(orders)
    if len(orders) < 2:
        raise InsufficientDataError("average periodicity needs at least 2 steady orders")
    return (orders[-1] - orders[0]) / (len(orders) - 1)


@dataclass
class QuasiAPResult:
    verdict: bool
    band: tuple
    average_periodicity: float
    differences: list
    outliers: list

    def to_dict(self):
        return {"verdict": self.verdict, "band": list(self.band),
                "average_periodicity": self.average_periodicity,
                "differences": self.differences, "outliers": self.outliers}


def quasi_ap_check(orders: Sequence[int]) -> QuasiAPResult:
    """Every consecutive gap must lie in [P - P^(1/3), P + P^(1/3)]."""
    orders = _check_orders(orders)
    if len(orders) < 3:
        raise InsufficientDataError("quasi-AP check needs at least 3 steady orders")
    P = average_periodicity(orders)
    half = float(np.cbrt(P))
    band = (P - half, P + half)
    diffs = [b - a for a, b in zip(orders, orders[1:])]
    outliers = [d for d in diffs if not band[0] <= d <= band[1]]
    return QuasiAPResult(not outliers, band, P, diffs, outliers)


@dataclass
class SteadyPointTrain:
    orders: list
    average_periodicity: Optional[float]
    quasi_ap: Optional[bool]
    band: Optional[tuple]

    def to_dict(self):
        return {"orders": list(self.orders),
                "average_periodicity": self.average_periodicity,
                "quasi_ap": self.quasi_ap,
                "band": list(self.band) if self.band else None}


def make_train(orders) -> SteadyPointTrain:
    orders = _check_orders(orders)
    P = average_periodicity(orders) if len(orders) >= 2 else None
    if len(orders) >= 3:
        q = quasi_ap_check(orders)
        return SteadyPointTrain(orders, P, q.verdict, q.band)
    return SteadyPointTrain(orders, P, None, None)


# ---------------------------------------------------------------- chaos modulo 1

DEFAULT_SHIFTS = (0.0, 0.25, 0.5)


def shifted_frac_distance(a, b, s):
    """|[a + s] - [b + s]| elementwise, [.] being the fractional part."""
    return np.abs(np.mod(np.add(a, s), 1.0) - np.mod(np.add(b, s), 1.0))


@dataclass
class PairStats:
    x: float
    y: float
    spread: float
    min_frac_distance: dict
    degenerate: bool

    def to_dict(self):
        return {"x": self.x, "y": self.y, "spread": self.spread,
                "min_frac_distance": {repr(s): v for s, v in self.min_frac_distance.items()},
                "degenerate": self.degenerate}


@dataclass
class ChaosModReport:
    spread_estimate: float
    min_frac_distance: dict
    lambda_threshold: float
    frac_tol: float
    verdict: bool
    pairs: list = field(default_factory=list)
    observed_max_spread: float = 0.0
    settings: dict = field(default_factory=dict)
    note: str = ("finite-horizon estimate: lim sup / lim inf replaced by max / min "
                 "over the iterates after burn-in; not a proof")

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "spread_estimate": self.spread_estimate,
            "min_frac_distance": {repr(s): v for s, v in self.min_frac_distance.items()},
            "lambda_threshold": self.lambda_threshold,
            "frac_tol": self.frac_tol,
            "observed_max_spread": self.observed_max_spread,
            "settings": dict(self.settings),
            "note": self.note,
            "pairs": [p.to_dict() for p in self.pairs],
        }


def _verdict(spread_estimate, min_frac, lambda_threshold, frac_tol):
    return bool(spread_estimate >= lambda_threshold
                and any(v < frac_tol for v in min_frac.values()))


def chaos_mod1_test(fmap, pair_count: int = 20, horizon: int = 1_000_000,
                    burn_in: int = 1_000, shifts=DEFAULT_SHIFTS,
                    lambda_threshold: float = 0.1, frac_tol: float = 1e-3,
                    seed: int = 0, pairs=None, chunk: int = 4096) -> ChaosModReport:
    """Estimate both chaos-mod-1 conditions on sampled initial pairs.

    A pair (x, y) satisfies condition I when max |u_x(n) - u_y(n)| over
    n in (burn_in, horizon] reaches `lambda_threshold`, and condition II for
    shift s when min |[u_x(n)+s] - [u_y(n)+s]| over the same range drops
    below `frac_tol`.  The family is declared chaotic when some single shift
    makes every non-degenerate pair (x != y) satisfy both conditions.
    Pairs with x == y are reported but excluded from the verdict.
    """
    if not horizon > burn_in:
        raise UsageError("horizon must exceed burn_in")
    shifts = tuple(float(s) for s in shifts)
    if any(not -1.0 < s < 1.0 for s in shifts):
        raise UsageError("shifts must lie in (-1, 1)")
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = rng.uniform(0.0, 1.0, size=(pair_count, 2))
    pairs = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    npairs = len(pairs)

    f = fmap.vector()
    lift = fmap.lift_period
    x0 = np.concatenate([pairs[:, 0], pairs[:, 1]])
    K = np.floor(x0).astype(np.int64)
    Y = x0 - K

    spread = np.zeros(npairs)
    min_frac = np.full((len(shifts), npairs), np.inf)
    bufK = np.empty((chunk, 2 * npairs), dtype=np.int64)
    bufY = np.empty((chunk, 2 * npairs))

    def absorb(rows):
        if rows == 0:
            return
        kx, ky = bufK[:rows, :npairs], bufK[:rows, npairs:]
        yx, yy = bufY[:rows, :npairs], bufY[:rows, npairs:]
        diff = np.abs((kx - ky).astype(np.float64) + (yx - yy))
        np.maximum(spread, diff.max(axis=0), out=spread)
        for i, s in enumerate(shifts):
            np.minimum(min_frac[i], shifted_frac_distance(yx, yy, s).min(axis=0), out=min_frac[i])

    rows = 0
    with np.errstate(all="ignore"):
        for n in range(1, horizon + 1):
            if n > burn_in:
                bufK[rows] = K
                bufY[rows] = Y
                rows += 1
                if rows == chunk:
                    absorb(rows)
                    rows = 0
            if n == horizon:
                break
            if lift:
                base = K - K % lift
                x = (K - base) + Y
            else:
                base = 0
                x = K + Y
            v = f(x)
            if not np.all(np.isfinite(v)):
                raise NonFiniteError(f"non-finite iterate at index {n + 1}")
            if not np.all(v > x):
                raise DescendingStepError(f"F(x) <= x at index {n}")
            fl = np.floor(v)
            K = base + fl.astype(np.int64)
            Y = v - fl
    absorb(rows)

    stats = []
    for i in range(npairs):
        x, y = float(pairs[i, 0]), float(pairs[i, 1])
        stats.append(PairStats(x, y, float(spread[i]),
                               {s: float(min_frac[k, i]) for k, s in enumerate(shifts)},
                               degenerate=(x == y)))
    live = [p for p in stats if not p.degenerate]
    if live:
        spread_estimate = min(p.spread for p in live)
        worst = {s: max(p.min_frac_distance[s] for p in live) for s in shifts}
    else:
        spread_estimate = 0.0
        worst = {s: math.inf for s in shifts}
    settings = {"pair_count": npairs, "horizon": horizon, "burn_in": burn_in,
                "shifts": list(shifts), "seed": seed}
    return ChaosModReport(
        spread_estimate=spread_estimate,
        min_frac_distance=worst,
        lambda_threshold=lambda_threshold,
        frac_tol=frac_tol,
        verdict=_verdict(spread_estimate, worst, lambda_threshold, frac_tol),
        pairs=stats,
        observed_max_spread=float(spread.max()) if npairs else 0.0,
        settings=settings,
    )
