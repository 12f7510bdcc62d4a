"""Helix / pseudo-helix / chaos classification of ascending orbits.

Index conventions: reported orders and segment starts are 1-based term
indices u(1), u(2), ...  Internally the second-difference array ``D2`` is
0-based with ``D2[i] = u[i+2p] - 2u[i+p] + u[i]`` (0-based u), so the
second difference "at order n" is ``D2[n-1]``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import SeriesTooShortError, UsageError
from .families import BoundMap
from .metrics import SteadyPointTrain, make_train
from .orbit import OrbitSeries, iterate

STABLE_HELIX = "StableHelix"
PSEUDO_HELIX_REGIME = "PseudoHelixRegime"
CHAOTIC = "Chaotic"


@dataclass(frozen=True)
class ClassifyOptions:
    transient: int = 10_000
    confirm_cycles: int = 100
    tol: float = 1e-6
    p_max: int = 128
    horizon: int = 100_000
    min_segment_length: Optional[int] = None  # None -> 5p
    slack: float = 1e-15
    drift_tol: float = 0.25
    # near-recurrence test used to pick the pseudo-helix order
    recurrence_tol: float = 0.05
    recurrence_fraction: float = 0.5

    def to_dict(self):
        return asdict(self)


@dataclass
class HelixReport:
    period_j: int
    lambdas: list
    modulo_step: int
    residual: float

    def to_dict(self):
        return asdict(self)


@dataclass
class PseudoHelixSegment:
    n0: int
    m: int
    period_p: int
    steady_point_k0: Optional[int]
    steady_orders: list

    @property
    def end(self):
        return self.n0 + self.m

    def to_dict(self):
        return {"n0": self.n0, "end": self.end, "m": self.m, "period_p": self.period_p,
                "steady_point_k0": self.steady_point_k0,
                "steady_orders": list(self.steady_orders)}


@dataclass
class Classification:
    verdict: str
    helix: Optional[HelixReport] = None
    period_p: Optional[int] = None
    segments: list = field(default_factory=list)
    evidence: dict = field(default_factory=dict)

    @property
    def period(self):
        if self.helix is not None:
            return self.helix.period_j
        return self.period_p

    @property
    def is_stable_helix(self):
        return self.verdict == STABLE_HELIX

    @property
    def steady_orders(self):
        return [s.steady_orders[0] for s in self.segments]

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "period": self.period,
            "helix": self.helix.to_dict() if self.helix else None,
            "steady_orders": self.steady_orders,
            "segments": [s.to_dict() for s in self.segments],
            "evidence": dict(self.evidence),
        }


# ---------------------------------------------------------------- periods

def _circular_gap(a, b):
    d = np.abs(a - b)
    return np.minimum(d, 1.0 - d)


def detect_helix(series: OrbitSeries, p_max: int = 128, tol: float = 1e-6,
                 confirm_cycles: int = 100) -> Optional[HelixReport]:
    """Smallest j whose fractional parts repeat to within `tol` over the last
    `confirm_cycles` cycles, or None."""
    fr = series.frac_part
    n = len(fr)
    for j in range(1, p_max + 1):
        need = (confirm_cycles + 1) * j
        if need > n:
            break
        w = fr[n - need:]
        gap = _circular_gap(w[j:], w[:-j])
        residual = float(gap.max())
        if residual < tol:
            step = series.int_part[-1] - series.int_part[-1 - j]
            step += int(round(fr[-1] - fr[-1 - j]))
            return HelixReport(j, [float(v) for v in fr[n - j:]], int(step), residual)
    return None


def infer_period(series: OrbitSeries, p_max: int, window: Optional[int] = None,
                 drift_tol: float = 0.25) -> Optional[int]:
    """Smallest p <= p_max whose integer jumps are p-periodic on the trailing window.

    Jumps over p steps are measured as round(u(n+p) - u(n)), which is immune
    to a fractional part wrapping through 0; each p-step increment must also
    lie within `drift_tol` of that integer.
    """
    if p_max < 1:
        raise UsageError("p_max must be >= 1")
    n = len(series)
    if n < 4 * p_max:
        raise SeriesTooShortError(f"need at least {4 * p_max} terms, have {n}")
    w = min(n, window or 4 * p_max)
    tail = series.tail(n - w)
    for p in range(1, p_max + 1):
        if p >= w:
            break
        inc = tail.lag_diff(p)
        m = np.rint(inc)
        if np.all(m == m[0]) and np.all(np.abs(inc - m) <= drift_tol):
            return p
    return None


def recurrent_period(series: OrbitSeries, p_max: int, tol: float = 0.05,
                     fraction: float = 0.5, max_terms: int = 200_000) -> Optional[int]:
    """Smallest p for which u(n+p) - u(n) is within `tol` of an integer for at
    least `fraction` of the terms: the order of the helix ghost an
    intermittent orbit lingers near."""
    n = len(series)
    if n > max_terms:
        series = series.tail(n - max_terms)
        n = max_terms
    for p in range(1, p_max + 1):
        if 2 * p >= n:
            break
        inc = series.lag_diff(p)
        near = np.abs(inc - np.rint(inc)) < tol
        if near.mean() >= fraction:
            return p
    return None


# ---------------------------------------------------------------- segmentation

@dataclass
class _Window:
    a: int  # first D2 index (0-based)
    b: int  # last D2 index


def _maximal_windows(series: OrbitSeries, p: int, slack: float, drift_tol: float):
    """Greedy left-to-right maximal windows of D2 indices on which every phase
    is non-increasing (up to `slack`) and every p-step increment rounds to the
    same integer within `drift_tol`."""
    d2 = series.second_diff(p)
    nd = len(d2)
    if nd <= 0:
        return d2, []
    inc = series.lag_diff(p)
    r = np.rint(inc)
    bad_drift = np.flatnonzero(np.abs(inc - r) > drift_tol)
    r_change = np.flatnonzero(r[1:] != r[:-1]) + 1
    broken = np.flatnonzero(~(d2[p:] < d2[:-p] + slack)) if nd > p else np.empty(0, int)

    def first_at_or_after(arr, pos):
        k = np.searchsorted(arr, pos)
        return int(arr[k]) if k < len(arr) else None

    windows = []
    a = 0
    while a < nd:
        # the start itself needs clean increments on [a, a+p]
        c = first_at_or_after(bad_drift, a)
        if c is not None and c <= a + p:
            a = c + 1
            continue
        c = first_at_or_after(r_change, a + 1)
        if c is not None and c <= a + p:
            a = c
            continue
        b = nd - 1
        c = first_at_or_after(broken, a)
        if c is not None:
            b = min(b, c + p - 1)
        c = first_at_or_after(bad_drift, a)
        if c is not None:
            b = min(b, c - p - 1)
        c = first_at_or_after(r_change, a + 1)
        if c is not None:
            b = min(b, c - p - 1)
        windows.append(_Window(a, b))
        a = b + 1
    return d2, windows


def _steady_block(d2, a, b, p):
    """First-negative D2 index of each phase, if every phase goes + -> -."""
    firsts = []
    for j in range(p):
        seq = d2[a + j:b + 1:p]
        if len(seq) < 2 or not seq[0] > 0 or not seq[-1] < 0:
            return None
        t = int(np.argmax(seq < 0))
        if not np.all(seq[:t] > 0):
            return None
        firsts.append(a + j + p * t)
    s = min(firsts)
    if max(firsts) - s > p - 1:
        return None
    return s


def pseudo_helix_windows(series: OrbitSeries, p: int, min_length: Optional[int] = None,
                         slack: float = 1e-15, drift_tol: float = 0.25,
                         require_steady_point: bool = False):
    """All maximal windows of length >= min_length, with or without a steady point.

    Windows lacking a sign change come back with ``steady_point_k0=None``
    (the "pseudo-helix without a steady point" case).
    """
    if p < 1:
        raise UsageError("period must be >= 1")
    if min_length is None:
        min_length = 5 * p
    if len(series) < 2 * p + 1:
        return []
    d2, windows = _maximal_windows(series, p, slack, drift_tol)
    out = []
    for w in windows:
        m = (w.b - w.a) + 2 * p
        if m + 1 < min_length:
            continue
        s = _steady_block(d2, w.a, w.b, p)
        if s is None:
            if require_steady_point:
                continue
            out.append(PseudoHelixSegment(w.a + 1, m, p, None, []))
        else:
            out.append(PseudoHelixSegment(w.a + 1, m, p, (s - w.a) // p,
                                          list(range(s + 1, s + p + 1))))
    return out


def segment_pseudo_helices(series: OrbitSeries, p: int, min_length: Optional[int] = None,
                           slack: float = 1e-15, drift_tol: float = 0.25) -> list:
    """Maximal windows that qualify as pseudo-helices of order p (each with a steady point)."""
    return pseudo_helix_windows(series, p, min_length, slack, drift_tol,
                                require_steady_point=True)


def steady_points(series: OrbitSeries, p: int, min_length: Optional[int] = None,
                  slack: float = 1e-15, drift_tol: float = 0.25) -> SteadyPointTrain:
    segs = segment_pseudo_helices(series, p, min_length, slack, drift_tol)
    return make_train([s.steady_orders[0] for s in segs])


# ---------------------------------------------------------------- classify

def regime_segments(series: OrbitSeries, opts: ClassifyOptions = ClassifyOptions(),
                    transient: Optional[int] = None):
    """(p, segments): the recurrent order and the steady-point segments that
    start after the transient.  p is None when no order recurs."""
    if transient is None:
        transient = min(opts.transient, max(len(series) - 1, 0))
    p = recurrent_period(series.tail(transient), opts.p_max, opts.recurrence_tol,
                         opts.recurrence_fraction)
    if p is None:
        return None, []
    segments = [s for s in segment_pseudo_helices(series, p, opts.min_segment_length,
                                                  opts.slack, opts.drift_tol)
                if s.n0 > transient]
    return p, segments


def classify_series(series: OrbitSeries, opts: ClassifyOptions = ClassifyOptions()) -> Classification:
    transient = min(opts.transient, max(len(series) - 1, 0))
    tail = series.tail(transient)
    evidence = {"horizon": len(series), "transient_used": transient}
    helix = detect_helix(tail, opts.p_max, opts.tol, opts.confirm_cycles)
    if helix is not None:
        evidence["cycles_checked"] = opts.confirm_cycles
        evidence["segments_found"] = 0
        return Classification(STABLE_HELIX, helix=helix, evidence=evidence)
    evidence["cycles_checked"] = 0
    p, segments = regime_segments(series, opts, transient)
    evidence["segments_found"] = len(segments)
    if len(segments) >= 2:
        return Classification(PSEUDO_HELIX_REGIME, period_p=p, segments=segments,
                              evidence=evidence)
    return Classification(CHAOTIC, period_p=None, evidence=evidence)


def classify(fmap: BoundMap, x0: float, opts: ClassifyOptions = ClassifyOptions()) -> Classification:
    if not opts.horizon > opts.transient:
        raise UsageError("horizon must exceed transient")
    return classify_series(iterate(fmap, x0, opts.horizon), opts)
