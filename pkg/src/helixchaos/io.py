"""Series ingestion, deterministic CSV/JSON emission and flat key=value run configs."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import IngestError, UsageError
from .orbit import OrbitSeries

_SPLIT = re.compile(r"[,\t ]+")


@dataclass
class IngestedSeries:
    series: OrbitSeries
    path: str
    sha256: str
    printed_delta1: Optional[np.ndarray] = None  # third column, kept for comparison only

    @property
    def provenance(self):
        return {"path": self.path, "sha256": self.sha256, "rows": len(self.series)}

    def __len__(self):
        return len(self.series)


def _split_decimal(text: str):
    """Exact floor / fractional split of a decimal literal."""
    d = Decimal(text)
    if not d.is_finite():
        raise InvalidOperation(text)
    k = int(d.to_integral_value(rounding="ROUND_FLOOR"))
    return k, float(d - k)


def parse_series_text(text: str, path: str = "<string>") -> IngestedSeries:
    """Parse an (index, value[, difference]) table.

    Blank lines, '#' comments and a non-numeric header row are skipped.
    Indices must run 1, 2, 3, ... without gaps or repeats.
    """
    ks, ys, third = [], [], []
    expected = 1
    seen_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = _SPLIT.split(line)
        if not seen_data and not re.match(r"^[+-]?\d", cols[0]):
            continue  # header
        seen_data = True
        if len(cols) not in (2, 3):
            raise IngestError(f"expected 2 or 3 columns, found {len(cols)}", line=lineno)
        try:
            idx = int(cols[0])
        except ValueError:
            raise IngestError(f"bad index {cols[0]!r}", line=lineno) from None
        if idx < expected:
            raise IngestError(f"duplicate or descending index {idx}", line=lineno)
        if idx != expected:
            raise IngestError(f"non-contiguous index {idx} (expected {expected})", line=lineno)
        try:
            k, y = _split_decimal(cols[1])
            if len(cols) == 3:
                third.append(float(Decimal(cols[2])))
        except (InvalidOperation, ValueError):
            raise IngestError(f"malformed number in {line!r}", line=lineno) from None
        ks.append(k)
        ys.append(y)
        expected += 1
    if not ks:
        raise IngestError("no data rows")
    if third and len(third) != len(ks):
        raise IngestError("difference column present on some rows only")
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    series = OrbitSeries(np.array(ks, dtype=np.int64), np.array(ys), source=path)
    return IngestedSeries(series, path, digest, np.array(third) if third else None)


def ingest_series(path) -> IngestedSeries:
    p = Path(path)
    return parse_series_text(p.read_text(encoding="utf-8"), str(p))


def appendix_fixture_path() -> Path:
    return Path(str(resources.files("helixchaos") / "data" / "appendix1.csv"))


def load_appendix_fixture() -> IngestedSeries:
    return ingest_series(appendix_fixture_path())


# ---------------------------------------------------------------- emission

def _plain(obj):
    """Convert dataclasses / numpy values into JSON-ready builtins."""
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _plain(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return _plain(float(obj))
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)  # "inf", "nan": JSON has no literal for these
    return obj


def to_json(report) -> str:
    # json uses float.__repr__, i.e. the shortest round-trip decimal
    return json.dumps(_plain(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def series_rows(series: OrbitSeries):
    """Rows (index, value, int_part, frac_part, delta1) for CSV export or plotting."""
    d1 = series.lag_diff(1) if len(series) > 1 else np.empty(0)
    for i in range(len(series)):
        yield {"index": i + 1, "int_part": int(series.int_part[i]),
               "frac_part": float(series.frac_part[i]), "value": series.value(i + 1),
               "delta1": float(d1[i]) if i < len(d1) else None}


SERIES_COLUMNS = ("index", "value", "int_part", "frac_part", "delta1")


def series_to_csv(series: OrbitSeries) -> str:
    return to_csv(series_rows(series), SERIES_COLUMNS)


def emit(report, fmt: str = "json", path=None, columns=None) -> str:
    """Render a report as json or csv and write it to `path` (stdout when None).

    CSV needs either an OrbitSeries, or rows (dicts) plus `columns`.
    """
    if fmt == "json":
        text = to_json(report)
    elif fmt == "csv":
        if isinstance(report, OrbitSeries):
            text = series_to_csv(report)
        else:
            if columns is None:
                raise UsageError("csv output needs a column list for this report")
            text = to_csv(report, columns)
    else:
        raise UsageError(f"unknown format {fmt!r}")
    if path is not None and str(path) != "-":
        Path(path).write_text(text, encoding="utf-8")
    return text


# ---------------------------------------------------------------- run config

@dataclass
class RunConfig:
    """Every knob of every subcommand, as one flat record.

    Command-line flags override values loaded from a config file; the merged
    record is echoed into each report so a run can be replayed from it.
    """
    family: Optional[str] = None
    expr: Optional[str] = None
    lift_period: Optional[int] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    x0: Optional[float] = None
    horizon: Optional[int] = None
    transient: Optional[int] = None
    confirm_cycles: Optional[int] = None
    tol: Optional[float] = None
    p_max: Optional[int] = None
    min_segment_length: Optional[int] = None
    slack: Optional[float] = None
    period: Optional[int] = None
    ingest: Optional[str] = None
    orders: Optional[str] = None
    x_lo: Optional[float] = None
    x_hi: Optional[float] = None
    samples: Optional[int] = None
    lambda_threshold: Optional[float] = None
    frac_tol: Optional[float] = None
    burn_in: Optional[int] = None
    pairs: Optional[int] = None
    shifts: Optional[str] = None
    param: Optional[str] = None
    lo: Optional[float] = None
    hi: Optional[float] = None
    steps: Optional[int] = None
    workers: Optional[int] = None
    bracket_lo: Optional[float] = None
    bracket_hi: Optional[float] = None
    iter_max: Optional[int] = None
    boundary_tol: Optional[float] = None
    value: Optional[float] = None
    min_steady_points: Optional[int] = None
    horizon_max: Optional[int] = None
    boundary: Optional[float] = None
    side: Optional[str] = None
    p0: Optional[float] = None
    levels: Optional[int] = None
    start_distance: Optional[float] = None
    mu_rel_tol: Optional[float] = None
    seed: Optional[int] = None
    out: Optional[str] = None
    format: Optional[str] = None

    @classmethod
    def keys(cls):
        return [f.name for f in dataclasses.fields(cls)]

    def to_dict(self):
        return {k: getattr(self, k) for k in self.keys()}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.keys())
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)


def _coerce(name, text):
    ftype = {f.name: f.type for f in dataclasses.fields(RunConfig)}[name]
    if text.lower() in ("", "none"):
        return None
    try:
        if "int" in ftype:
            return int(text)
        if "float" in ftype:
            return float(text)
    except ValueError:
        raise UsageError(f"config key {name!r}: cannot parse {text!r}") from None
    return text


def parse_config_text(text: str) -> RunConfig:
    cfg = RunConfig()
    known = set(RunConfig.keys())
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in known:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _coerce(key, value.strip()))
    return cfg


def load_config(path) -> RunConfig:
    """Read a flat key = value file, or the "config" block of a JSON report."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad JSON config: {exc}") from None
        return RunConfig.from_dict(data.get("config", data))
    return parse_config_text(text)


def config_to_text(cfg: RunConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        if v is None:
            continue
        lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
    return "\n".join(lines) + "\n"
