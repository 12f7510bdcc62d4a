"""Parameter sweeps, order/chaos boundaries, the mu(param) estimator and its
inverse, and the Vier ratio estimate built on top of them.

Distances to a boundary are always positive; `side` says on which side of
the boundary the chaotic (pseudo-helix) regime lives:

    side="left"   ->  v = boundary - d
    side="right"  ->  v = boundary + d
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .detect import (
    PSEUDO_HELIX_REGIME,
    STABLE_HELIX,
    ClassifyOptions,
    classify,
    classify_series,
    regime_segments,
)
from .errors import (
    BracketError,
    EvaluationError,
    HelixChaosError,
    InsufficientDataError,
    NonMonotoneError,
    NotInRegimeError,
    UnreachableTargetError,
    UsageError,
)
from .families import BoundMap, FamilySpec, bind, validate_ascending
from .metrics import average_periodicity
from .orbit import iterate

log = logging.getLogger(__name__)

INVALID = "Invalid"
PARAMS = ("alpha", "beta")
SIDES = ("left", "right")


def bind_param(family: FamilySpec, param: str, value: float,
               fixed_other: Optional[float] = None) -> BoundMap:
    """Bind `param` to value and the other parameter (if the family uses it) to fixed_other."""
    if param not in PARAMS:
        raise UsageError(f"param must be one of {PARAMS}")
    other = "beta" if param == "alpha" else "alpha"
    kw = {param: value}
    if other in family.free_params:
        kw[other] = fixed_other
    return bind(family, **kw)


def _toward(boundary, side, d):
    if side not in SIDES:
        raise UsageError(f"side must be one of {SIDES}")
    return boundary - d if side == "left" else boundary + d


# ---------------------------------------------------------------- grid

@dataclass
class SweepRecord:
    param_name: str
    param_value: float
    verdict: str
    period: Optional[int] = None
    mu: Optional[float] = None
    steady_points: int = 0
    error: Optional[str] = None

    def to_dict(self):
        return asdict(self)


SWEEP_COLUMNS = ("param_name", "param_value", "verdict", "period", "mu",
                 "steady_points", "error")


def _grid_point(args) -> SweepRecord:
    family, param, value, fixed_other, x0, opts, min_steady = args
    try:
        fmap = bind_param(family, param, value, fixed_other)
        if not validate_ascending(fmap, 0.0, float(family.lift_period or 1)):
            return SweepRecord(param, value, INVALID, error="map is not ascending (F(x) <= x somewhere)")
        c = classify(fmap, x0, opts)
    except EvaluationError as exc:
        return SweepRecord(param, value, INVALID, error=str(exc))
    orders = c.steady_orders
    mu_val = None
    if c.verdict == PSEUDO_HELIX_REGIME and len(orders) >= min_steady:
        mu_val = average_periodicity(orders)
    return SweepRecord(param, value, c.verdict, c.period, mu_val, len(orders))


def grid_values(lo: float, hi: float, steps: int) -> list:
    if not lo < hi:
        raise UsageError("lo must be below hi")
    if steps < 2:
        raise UsageError("steps must be >= 2")
    vals = np.linspace(lo, hi, steps)
    vals[0], vals[-1] = lo, hi
    return [float(v) for v in vals]


def classify_grid(family: FamilySpec, param: str, lo: float, hi: float, steps: int,
                  fixed_other: Optional[float] = None, x0: float = 0.5,
                  opts: ClassifyOptions = ClassifyOptions(), min_steady_points: int = 10,
                  workers: Optional[int] = None) -> list:
    """One SweepRecord per evenly spaced grid value, endpoints included.

    Points are independent; with workers > 1 they run in a process pool but
    come back in grid order, so output never depends on scheduling.
    """
    jobs = [(family, param, v, fixed_other, x0, opts, min_steady_points)
            for v in grid_values(lo, hi, steps)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_grid_point, jobs))
    return [_grid_point(j) for j in jobs]


# ---------------------------------------------------------------- boundary

@dataclass
class BoundaryResult:
    value: float
    lo: float
    hi: float
    iterations: int
    converged: bool
    pred_lo: bool
    pred_hi: bool
    helix_order: Optional[int] = None

    @property
    def width(self):
        return self.hi - self.lo

    def to_dict(self):
        d = asdict(self)
        d["width"] = self.width
        return d


def locate_boundary(pred: Callable[[float], bool], lo: float, hi: float,
                    tol: float = 1e-9, iter_max: int = 60) -> BoundaryResult:
    """Bisect on a boolean predicate that differs at the two bracket ends.

    Returns the midpoint of the final bracket; `converged` is False when the
    iteration budget ran out before the bracket narrowed below tol.
    """
    if not lo < hi:
        raise UsageError("bracket must satisfy lo < hi")
    p_lo, p_hi = bool(pred(lo)), bool(pred(hi))
    if p_lo == p_hi:
        raise BracketError(f"predicate is {p_lo} at both ends of [{lo!r}, {hi!r}]")
    it = 0
    while hi - lo >= tol and it < iter_max:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # bracket is down to adjacent doubles
        if bool(pred(mid)) == p_lo:
            lo = mid
        else:
            hi = mid
        it += 1
    converged = hi - lo < tol or np.nextafter(lo, hi) >= hi
    if not converged:
        log.warning("boundary bisection stopped after %d steps with width %.3g", it, hi - lo)
    return BoundaryResult(0.5 * (lo + hi), lo, hi, it, bool(converged), p_lo, p_hi)


def find_boundary(family: FamilySpec, param: str, bracket_lo: float, bracket_hi: float,
                  fixed_other: Optional[float] = None, x0: float = 0.5,
                  opts: ClassifyOptions = ClassifyOptions(), iter_max: int = 60,
                  tol: float = 1e-9, match_order: bool = True) -> BoundaryResult:
    """Bisection on the is-stable-helix verdict.

    With `match_order` the predicate is "stable helix of the same order as
    at the helix end of the bracket", so the long periodic windows that
    riddle a chaotic interval do not capture the bisection.
    """
    def verdict(v):
        return classify(bind_param(family, param, v, fixed_other), x0, opts)

    order = None
    if match_order:
        c_lo, c_hi = verdict(bracket_lo), verdict(bracket_hi)
        if c_lo.is_stable_helix == c_hi.is_stable_helix:
            raise BracketError(
                f"is-stable-helix verdict is {c_lo.is_stable_helix} at both ends "
                f"of [{bracket_lo!r}, {bracket_hi!r}]")
        order = (c_lo if c_lo.is_stable_helix else c_hi).period

    def pred(v):
        c = verdict(v)
        return c.is_stable_helix and (order is None or c.period == order)
    res = locate_boundary(pred, bracket_lo, bracket_hi, tol, iter_max)
    res.helix_order = order
    return res


def helix_windows(records) -> list:
    """Runs of consecutive StableHelix records sharing one period, as
    (first_index, last_index, period)."""
    runs = []
    i = 0
    while i < len(records):
        r = records[i]
        if r.verdict != STABLE_HELIX:
            i += 1
            continue
        j = i
        while (j + 1 < len(records) and records[j + 1].verdict == STABLE_HELIX
               and records[j + 1].period == r.period):
            j += 1
        runs.append((i, j, r.period))
        i = j + 1
    return runs


def widest_window_bracket(records, side: str):
    """Bracket around the chaotic-side edge of the widest helix window."""
    if side not in SIDES:
        raise UsageError(f"side must be one of {SIDES}")
    best = None
    for i, j, p in helix_windows(records):
        edge_ok = i > 0 if side == "left" else j + 1 < len(records)
        if edge_ok and (best is None or j - i > best[1] - best[0]):
            best = (i, j, p)
    if best is None:
        raise BracketError(f"no helix window with a {side} neighbour in the scanned range")
    i, j, p = best
    if side == "left":
        return records[i - 1].param_value, records[i].param_value, p
    return records[j].param_value, records[j + 1].param_value, p


# ---------------------------------------------------------------- mu

MU_OPTIONS = ClassifyOptions(transient=1000)


@dataclass
class MuMeasurement:
    value: float
    steady_points: int
    horizon: int
    x0: float
    regime: str  # PseudoHelixRegime, or StableHelix for a periodic window

    def to_dict(self):
        return asdict(self)


def measure_mu(fmap: BoundMap, x0: float = 0.5, horizon: int = 100_000,
               min_steady_points: int = 10, opts: ClassifyOptions = MU_OPTIONS,
               allow_windows: bool = True) -> MuMeasurement:
    """Average steady-point periodicity of one orbit.

    Inside the chaotic interval narrow periodic windows occur, where the
    orbit locks onto a long helix whose laminar stretches still carry steady
    points, now exactly periodic.  With `allow_windows` their train is
    measured like any other; a helix without steady points (e.g. the helix
    bounding the interval) is never in the regime.
    """
    opts = replace(opts, horizon=horizon)
    if not horizon > opts.transient:
        raise UsageError("horizon must exceed transient")
    series = iterate(fmap, x0, horizon)
    c = classify_series(series, opts)
    if c.verdict == PSEUDO_HELIX_REGIME:
        orders = c.steady_orders
    elif c.verdict == STABLE_HELIX and allow_windows:
        _, segments = regime_segments(series, opts)
        orders = [s.steady_orders[0] for s in segments]
        if len(orders) < 2:
            raise NotInRegimeError(f"classified as StableHelix of order {c.period}")
    else:
        raise NotInRegimeError(
            f"classified as {c.verdict}" + (f" of order {c.period}" if c.period else ""))
    if len(orders) < min_steady_points:
        raise InsufficientDataError(
            f"only {len(orders)} steady points within horizon {horizon} "
            f"(need {min_steady_points}); raise the horizon")
    return MuMeasurement(average_periodicity(orders), len(orders), horizon, float(x0), c.verdict)


def mu(family: FamilySpec, param_value: float, fixed_other: Optional[float] = None,
       x0: float = 0.5, horizon: int = 100_000, min_steady_points: int = 10,
       param: str = "beta", opts: ClassifyOptions = MU_OPTIONS,
       allow_windows: bool = True) -> float:
    fmap = bind_param(family, param, param_value, fixed_other)
    return measure_mu(fmap, x0, horizon, min_steady_points, opts, allow_windows).value


DEFAULT_X0S = (1 / 6, 1 / 2, 5 / 6)


class MuEvaluator:
    """mu(v) averaged over several initial values, with horizon auto-doubling.

    Narrow periodic windows inside the chaotic interval make a single
    parameter value come back as a stable helix.  Such a point is nudged by
    `jitter_rel` times its distance to the boundary, away from the boundary,
    up to `jitter_tries` times; the nudges are recorded.
    """

    def __init__(self, family: FamilySpec, param: str = "beta",
                 fixed_other: Optional[float] = None, boundary: Optional[float] = None,
                 side: str = "left", x0s=DEFAULT_X0S, horizon: int = 100_000,
                 horizon_max: int = 100_000_000, min_steady_points: int = 10,
                 opts: ClassifyOptions = MU_OPTIONS, jitter_rel: float = 1e-4,
                 jitter_tries: int = 3, min_cycles: int = 40):
        self.family = family
        self.param = param
        self.fixed_other = fixed_other
        self.boundary = boundary
        self.side = side
        self.x0s = tuple(x0s)
        self.horizon = horizon
        self.horizon_max = horizon_max
        self.min_steady_points = min_steady_points
        self.opts = opts
        self.jitter_rel = jitter_rel
        self.jitter_tries = jitter_tries
        self.min_cycles = min_cycles
        self.hint = None  # expected mu, sizes the first horizon
        self.log = []  # (v, mu, jitters) per evaluation

    def _one(self, v):
        fmap = bind_param(self.family, self.param, v, self.fixed_other)
        vals = []
        for x0 in self.x0s:
            h = max(self.horizon, int(self.opts.transient + self.min_cycles * (self.hint or 0)))
            while True:
                try:
                    vals.append(measure_mu(fmap, x0, h, self.min_steady_points, self.opts).value)
                    break
                except InsufficientDataError:
                    if h >= self.horizon_max:
                        raise
                    h = min(2 * h, self.horizon_max)
        return float(np.mean(vals))

    def __call__(self, v: float) -> float:
        jitters = 0
        while True:
            try:
                m = self._one(v)
                self.log.append((v, m, jitters))
                return m
            except NotInRegimeError:
                if self.boundary is None or jitters >= self.jitter_tries:
                    raise
                d = abs(v - self.boundary)
                v = _toward(self.boundary, self.side, d * (1 + self.jitter_rel))
                jitters += 1


@dataclass
class Inversion:
    value: float
    distance: float
    mu: float
    target: float
    residual: float  # |mu - target| / target
    evaluations: int

    def to_dict(self):
        return asdict(self)


def invert_mu(mu_of: Callable, boundary: float, side: str, target: float,
              start_distance: float, mu_rel_tol: float = 0.05, max_halvings: int = 60,
              bisect_steps: int = 60, rel_width: float = 1e-7) -> Inversion:
    """Find v on the chaotic side with mu(v) close to target.

    Walks from `start_distance` toward the boundary by halving the distance
    until mu reaches the target (mu must keep growing, up to mu_rel_tol
    noise), then bisects in log-distance on mu - target.
    """
    if not start_distance > 0:
        raise UsageError("start_distance must be positive")
    if not target > 0:
        raise UsageError("target must be positive")
    evals = 0

    def m(d):
        nonlocal evals
        evals += 1
        return mu_of(_toward(boundary, side, d))

    far = start_distance
    m_far = m(far)
    if m_far >= target:
        raise UnreachableTargetError(
            f"mu = {m_far:.6g} already exceeds target {target:.6g} at distance {far:.6g}; "
            "start further from the boundary")
    near, m_near = None, None
    prev = m_far
    for _ in range(max_halvings):
        d = far / 2
        md = m(d)
        if md < prev * (1 - mu_rel_tol):
            raise NonMonotoneError(
                f"mu fell from {prev:.6g} to {md:.6g} when the distance was halved to {d:.6g}")
        if md >= target:
            near, m_near = d, md
            break
        far, m_far, prev = d, md, md
    if near is None:
        raise UnreachableTargetError(
            f"target {target:.6g} not reached after {max_halvings} halvings")

    # bracket: mu(near) >= target > mu(far)
    for _ in range(bisect_steps):
        if far / near - 1 < rel_width:
            break
        mid = math.sqrt(far * near)
        mm = m(mid)
        if mm >= target:
            near, m_near = mid, mm
        else:
            far, m_far = mid, mm
    # report whichever end sits closer to the target
    if abs(m_near - target) <= abs(m_far - target):
        d, md = near, m_near
    else:
        d, md = far, m_far
    residual = abs(md - target) / target
    if residual >= mu_rel_tol:
        raise UnreachableTargetError(
            f"mu jumps across target {target:.6g} ({m_far:.6g} -> {m_near:.6g}); "
            f"residual {residual:.3g} exceeds {mu_rel_tol}")
    return Inversion(_toward(boundary, side, d), d, md, target, residual, evals)


# ---------------------------------------------------------------- Vier ratio

@dataclass
class VierEstimate:
    boundary: Optional[float]
    side: Optional[str]
    P0: float
    levels: int
    targets: list
    b: list
    ratios: list
    mu: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    failed_level: Optional[int] = None
    error: Optional[str] = None
    options: dict = field(default_factory=dict)

    @property
    def complete(self):
        return self.failed_level is None

    def to_dict(self):
        return asdict(self)


def vier_ratios(b) -> list:
    """r_n = (b[n+1] - b[n]) / (b[n+2] - b[n+1])."""
    return [(b[n + 1] - b[n]) / (b[n + 2] - b[n + 1]) for n in range(len(b) - 2)]


def vier_from_inverse(inverse: Callable[[float], float], P0: float, levels: int,
                      boundary: Optional[float] = None, side: Optional[str] = None) -> VierEstimate:
    """Vier estimate from a caller-supplied mu^-1 (e.g. an exact test model)."""
    if levels < 3:
        raise UsageError("levels must be >= 3")
    targets = [P0 * 2 ** n for n in range(levels)]
    b = [float(inverse(t)) for t in targets]
    return VierEstimate(boundary, side, P0, levels, targets, b, vier_ratios(b))


def vier_estimate(family: FamilySpec, param: str, boundary: float, side: str,
                  P0: float, levels: int, fixed_other: Optional[float] = None,
                  start_distance: float = 1e-2, mu_rel_tol: float = 0.05,
                  evaluator: Optional[MuEvaluator] = None, **eval_kw) -> VierEstimate:
    """b_n = mu^-1(2^n P0) for n < levels on the chaotic side of `boundary`.

    Each level starts its outward bracket at the previous level's solution.
    A failure at some level stops the run and is reported in `failed_level`
    together with everything computed before it.
    """
    if levels < 3:
        raise UsageError("levels must be >= 3")
    if evaluator is None:
        evaluator = MuEvaluator(family, param, fixed_other, boundary, side, **eval_kw)
    targets = [P0 * 2 ** n for n in range(levels)]
    est = VierEstimate(boundary, side, P0, levels, targets, [], [],
                       options={"param": param, "fixed_other": fixed_other,
                                "start_distance": start_distance, "mu_rel_tol": mu_rel_tol,
                                "x0s": list(evaluator.x0s), "horizon": evaluator.horizon,
                                "horizon_max": evaluator.horizon_max,
                                "min_steady_points": evaluator.min_steady_points,
                                "transient": evaluator.opts.transient})
    d = start_distance
    for n, t in enumerate(targets):
        evaluator.hint = t
        try:
            inv = invert_mu(evaluator, boundary, side, t, d, mu_rel_tol)
        except HelixChaosError as exc:
            est.failed_level, est.error = n, f"{type(exc).__name__}: {exc}"
            break
        est.b.append(inv.value)
        est.mu.append(inv.mu)
        est.residuals.append(inv.residual)
        d = inv.distance
    est.ratios = vier_ratios(est.b) if len(est.b) >= 3 else []
    return est
