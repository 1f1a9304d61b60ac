"""Tweet-record datasets and the end-to-end calibration/validation pipeline.

The pipeline turns a file of ``created_at,user_id,followers_count`` records
into a fitted popularity curve and a confidence band for the read count:

1. N, <f>, <f^2> from the distinct users in the sample
2. binned fraction of distinct active users (the empirical w)
3. k-point moving average
4. Levenberg-Marquardt fit of the gamma kernel
5. cumulative follower sum as the observed X(t)
6. normal band from the fitted model and its coverage of the observations
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, NoSignalError, SchemaError
from .fitting import (
    FitResult,
    empirical_popularity,
    gamma_kernel_values,
    initial_guess,
    lm_fit_gamma,
    moving_average,
)
from .model import (
    DegreeDistribution,
    NetworkParams,
    PopularitySpec,
    TimeSeries,
    TweetRecord,
    as_generator,
)
from .moments import MomentCurves, asymptotic_moments, confidence_band
from .simulator import simulate_events

REQUIRED_FIELDS = ("created_at", "user_id", "followers_count")
UNIX_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
SYNTHETIC_START = datetime(2020, 1, 1, tzinfo=timezone.utc)
DEFAULT_SMOOTHING = 5
DEFAULT_LEVEL = 0.95

_INT_RE = re.compile(r"^[+-]?\d+$")
_ONE_US = timedelta(microseconds=1)


@dataclass(frozen=True)
class Dataset:
    """Time-sorted records.

    ``epoch`` is the wall-clock instant of t = 0. For loaded files that is the
    first record; synthetic datasets keep the simulation start instead.
    """
    records: tuple
    epoch: datetime
    time_format: str = "iso"
    source_path: str = field(default="", compare=False)
    diagnostics: tuple = field(default=(), compare=False)

    def __len__(self):
        return len(self.records)


# --------------------------------------------------------------------------
# Ingestion
# --------------------------------------------------------------------------

def _parse_iso(text: str) -> datetime:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _classify_time(value):
    """Return ("epoch", int seconds) or ("iso", datetime)."""
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, int):
        return "epoch", value
    if isinstance(value, str):
        if _INT_RE.match(value.strip()):
            return "epoch", int(value)
        return "iso", _parse_iso(value)
    raise ValueError(f"unsupported timestamp {value!r}")


def _parse_followers(value) -> int:
    if isinstance(value, bool):
        raise ValueError("boolean is not a follower count")
    if isinstance(value, int):
        count = value
    elif isinstance(value, str) and _INT_RE.match(value.strip()):
        count = int(value)
    else:
        raise ValueError(f"followers_count {value!r} is not an integer")
    if count < 0:
        raise ValueError(f"negative followers_count {count}")
    return count


def _iter_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [k for k in REQUIRED_FIELDS if k not in header]
        if missing:
            raise SchemaError(f"{path}: missing required column(s) {', '.join(missing)}")
        for row in reader:
            yield reader.line_num, row


def _iter_jsonl(path):
    rows = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                rows.append((lineno, exc))
                continue
            if isinstance(obj, dict):
                seen.update(k for k in REQUIRED_FIELDS if k in obj)
            rows.append((lineno, obj))
    missing = [k for k in REQUIRED_FIELDS if k not in seen]
    if rows and missing:
        raise SchemaError(f"{path}: no object carries required key(s) {', '.join(missing)}")
    return rows


def _format_from_path(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return "jsonl"
    return "csv"


def load_dataset(path, format: str | None = None) -> Dataset:
    """Read a CSV or JSONL file of tweet records.

    Timestamps are either all ISO-8601 or all integer epoch seconds; a file
    mixing the two is a schema error. Rows that fail to parse are skipped and
    listed in ``Dataset.diagnostics`` as ``(line, reason)``.
    """
    fmt = format or _format_from_path(path)
    if fmt == "csv":
        rows = _iter_csv(path)
    elif fmt == "jsonl":
        rows = _iter_jsonl(path)
    else:
        raise SchemaError(f"unknown format {fmt!r}")

    parsed = []
    diagnostics = []
    kinds = set()
    for lineno, row in rows:
        try:
            if isinstance(row, Exception):
                raise ValueError(f"invalid JSON: {row}")
            if not isinstance(row, dict):
                raise ValueError("line is not an object")
            missing = [k for k in REQUIRED_FIELDS if row.get(k) in (None, "")]
            if missing:
                raise ValueError(f"missing {', '.join(missing)}")
            kind, stamp = _classify_time(row["created_at"])
            user = str(row["user_id"]).strip()
            if not user:
                raise ValueError("empty user_id")
            followers = _parse_followers(row["followers_count"])
        except (ValueError, TypeError) as exc:
            diagnostics.append((lineno, str(exc)))
            continue
        kinds.add(kind)
        parsed.append((stamp, user, followers))

    if len(kinds) > 1:
        raise SchemaError(f"{path}: created_at mixes ISO-8601 and epoch-second values")
    if not parsed:
        raise EmptyInputError(f"{path}: no valid records ({len(diagnostics)} rejected)")

    kind = kinds.pop()
    if kind == "epoch":
        seconds = [stamp for stamp, _, _ in parsed]
        origin = min(seconds)
        offsets = [float(s - origin) for s in seconds]
        epoch = UNIX_EPOCH + timedelta(seconds=origin)
    else:
        micros = [(stamp - UNIX_EPOCH) // _ONE_US for stamp, _, _ in parsed]
        origin = min(micros)
        offsets = [(m - origin) / 1e6 for m in micros]
        epoch = UNIX_EPOCH + origin * _ONE_US

    order = sorted(range(len(parsed)), key=offsets.__getitem__)
    records = tuple(TweetRecord(offsets[i], parsed[i][1], parsed[i][2]) for i in order)
    return Dataset(records, epoch, kind, str(path), tuple(diagnostics))


def _iso(dt: datetime) -> str:
    text = dt.strftime("%Y-%m-%dT%H:%M:%S")
    if dt.microsecond:
        text += f".{dt.microsecond:06d}"
    return text + "Z"


def atomic_write_text(path, text: str):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _created_at_values(ds: Dataset):
    as_epoch = ds.time_format == "epoch" and all(
        float(r.timestamp).is_integer() for r in ds.records)
    if as_epoch:
        base = (ds.epoch - UNIX_EPOCH) // timedelta(seconds=1)
        return [base + int(r.timestamp) for r in ds.records]
    return [_iso(ds.epoch + timedelta(seconds=r.timestamp)) for r in ds.records]


def dataset_to_text(ds: Dataset, format: str = "csv") -> str:
    stamps = _created_at_values(ds)
    buf = io.StringIO()
    if format == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REQUIRED_FIELDS)
        for stamp, rec in zip(stamps, ds.records):
            writer.writerow([stamp, rec.user_id, rec.follower_count])
    elif format == "jsonl":
        for stamp, rec in zip(stamps, ds.records):
            obj = {"created_at": stamp, "user_id": rec.user_id,
                   "followers_count": rec.follower_count}
            buf.write(json.dumps(obj) + "\n")
    else:
        raise SchemaError(f"unknown format {format!r}")
    return buf.getvalue()


def write_dataset(ds: Dataset, path, format: str | None = None):
    atomic_write_text(path, dataset_to_text(ds, format or _format_from_path(path)))


# --------------------------------------------------------------------------
# Pipeline steps
# --------------------------------------------------------------------------

def _require_records(ds: Dataset):
    if not ds.records:
        raise EmptyInputError("dataset has no records")


def compute_network_params(ds: Dataset) -> NetworkParams:
    """N distinct users, and follower moments with one (latest) count per user."""
    _require_records(ds)
    latest = {}
    for rec in ds.records:
        latest[rec.user_id] = rec.follower_count
    counts = np.array(list(latest.values()), dtype=float)
    return NetworkParams(len(latest), float(counts.mean()), float(np.mean(counts ** 2)))


def empirical_reads(ds: Dataset) -> TimeSeries:
    """Cumulative follower sum at each distinct record time."""
    _require_records(ds)
    times = np.array([r.timestamp for r in ds.records], dtype=float)
    cum = np.cumsum([r.follower_count for r in ds.records]).astype(float)
    # several records can share a timestamp; keep the value after the last one
    last = np.append(times[1:] != times[:-1], True)
    return TimeSeries(times[last], cum[last])


def synthesize_dataset(params: NetworkParams, spec: PopularitySpec, dist: DegreeDistribution,
                       horizon: float, seed, start: datetime = SYNTHETIC_START) -> Dataset:
    """Simulated records from the event-level model.

    Each shoot gets a user id drawn uniformly from ``params.n_users`` ids and a
    follower count equal to its jump size. Times stay on the simulation clock
    (t = 0 at ``start``), so the process origin survives into validation.
    """
    rng = as_generator(seed)
    trace = simulate_events(params, spec, dist, horizon, rng)
    if len(trace) == 0:
        raise EmptyInputError("simulation produced no shoot events")
    users = rng.integers(params.n_users, size=len(trace))
    width = len(str(params.n_users - 1))
    records = tuple(
        TweetRecord(float(t), f"u{u:0{width}d}", int(f))
        for t, u, f in zip(trace.event_times, users, trace.jump_sizes)
    )
    return Dataset(records, start, "iso", "<synthetic>")


def default_bins(n_records: int) -> int:
    return min(200, max(20, math.ceil(n_records / 50)))


@dataclass(frozen=True, eq=False)
class ValidationReport:
    network: NetworkParams
    fit: FitResult
    empirical_reads: TimeSeries
    curves: MomentCurves
    coverage_fraction: float
    long_run_limit: float
    w_raw: TimeSeries
    w_smooth: TimeSeries
    options: dict

    @property
    def converged(self) -> bool:
        return self.fit.converged

    @property
    def in_band(self) -> np.ndarray:
        x = self.empirical_reads.values
        return (x >= self.curves.band_low) & (x <= self.curves.band_high)

    def w_fit(self) -> np.ndarray:
        return gamma_kernel_values(self.w_raw.times, self.fit.a, self.fit.b, self.fit.c)


def validate(ds: Dataset, n_bins: int | None = None, k: int = DEFAULT_SMOOTHING,
             level: float = DEFAULT_LEVEL, n_users: int | None = None,
             fit_raw: bool = False, max_iterations: int = 200) -> ValidationReport:
    """Run the six calibration steps on ``ds``.

    ``n_users`` overrides the community size otherwise taken as the number of
    distinct users in the sample; c is only identifiable relative to N.
    A fit that does not converge is reported (``converged=False``), not raised.
    """
    _require_records(ds)
    network = compute_network_params(ds)
    if n_users is not None:
        network = NetworkParams(n_users, network.mean_followers, network.mean_sq_followers)
    n_bins = n_bins or default_bins(len(ds))

    try:
        w_raw = empirical_popularity(list(ds.records), network.n_users, n_bins)
        w_smooth = moving_average(w_raw, k)
        target = w_raw if fit_raw else w_smooth
        guess = initial_guess(target)
    except NoSignalError as exc:
        raise NoSignalError(f"{ds.source_path or 'dataset'}: empirical popularity is flat: {exc}") from exc
    fit = lm_fit_gamma(target, guess, max_iterations=max_iterations)

    reads = empirical_reads(ds)
    curves = confidence_band(network, fit.spec, reads.times, level)
    inside = (reads.values >= curves.band_low) & (reads.values <= curves.band_high)
    limit = asymptotic_moments(network, fit.spec).mean_limit_exact

    options = {"n_bins": n_bins, "k": k, "level": level, "fit_raw": fit_raw,
               "n_users_source": "sample" if n_users is None else "override"}
    return ValidationReport(network, fit, reads, curves, float(inside.mean()), limit,
                            w_raw, w_smooth, options)


# --------------------------------------------------------------------------
# Report serialisation
# --------------------------------------------------------------------------

def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def fit_to_dict(fit: FitResult) -> dict:
    return {
        "a": fit.a, "b": fit.b, "c": fit.c,
        "peak_time": fit.peak_time,
        "covariance": [[_num(v) for v in row] for row in fit.covariance],
        "rmse": _num(fit.rmse), "r_squared": _num(fit.r_squared),
        "iterations": fit.iterations, "converged": fit.converged,
        "gradient_norm": _num(fit.gradient_norm), "message": fit.message,
    }


def report_to_dict(report: ValidationReport) -> dict:
    net = report.network
    curves = report.curves
    return {
        "network": {"n_users": net.n_users, "mean_followers": net.mean_followers,
                    "mean_sq_followers": net.mean_sq_followers},
        "fit": fit_to_dict(report.fit),
        "coverage_fraction": report.coverage_fraction,
        "long_run_limit": report.long_run_limit,
        "band": {
            "level": curves.level, "z": curves.z,
            "approximate": True,
            "gaussian_valid_fraction": float(np.mean(curves.gaussian_valid)),
        },
        "n_observations": len(report.empirical_reads),
        "final_reads": float(report.empirical_reads.values[-1]),
        "options": report.options,
    }


def _csv_text(header, columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_report(report: ValidationReport, out_dir, svg: bool = False) -> list:
    """Write report.json, curves.csv and w.csv (and report.svg if asked)."""
    out = Path(out_dir)
    c = report.curves
    written = [out / "report.json", out / "curves.csv", out / "w.csv"]
    atomic_write_text(written[0], json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")
    atomic_write_text(written[1], _csv_text(
        ("t", "x_empirical", "mean", "band_low", "band_high"),
        (c.times, report.empirical_reads.values, c.mean, c.band_low, c.band_high)))
    atomic_write_text(written[2], _csv_text(
        ("t", "w_raw", "w_smooth", "w_fit"),
        (report.w_raw.times, report.w_raw.values, report.w_smooth.values, report.w_fit())))
    if svg:
        from .plotting import render_report_svg
        written.append(render_report_svg(report, out / "report.svg"))
    return written
