"""Wage-data ingestion, top-coding, run configuration and report files.

Every file written here carries ``format_version``. Grid CSVs print floats
with 17 significant digits so that a re-read reproduces them exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .bootstrap import BootstrapPlan
from .grid import ParameterGrid
from .lrr import ConfidenceReport, SensitivityReport
from .models.interval import IntervalData
from .simulation import CoverageGrid

FORMAT_VERSION = 1


class DataFormatError(ValueError):
    pass


class ReportWriteError(OSError):
    pass


@dataclass(frozen=True)
class WageRecord:
    wage: float
    gender: int

    def __post_init__(self):
        if not (math.isfinite(self.wage) and self.wage > 0):
            raise DataFormatError(f"wage must be positive, got {self.wage}")
        if self.gender not in (0, 1):
            raise DataFormatError(f"gender must be 0 or 1, got {self.gender}")


def ingest_csv(path) -> list[WageRecord]:
    """Read ``wage,gender`` rows; errors name the 1-based file line."""
    path = Path(path)
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file")
        if [h.strip().lower() for h in header] != ["wage", "gender"]:
            raise DataFormatError(f"{path}: line 1: expected header 'wage,gender', got {','.join(header)!r}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataFormatError(f"{path}: line {line}: expected 2 fields, got {len(row)}")
            try:
                wage = float(row[0])
                gender_f = float(row[1])
            except ValueError:
                raise DataFormatError(f"{path}: line {line}: cannot parse {','.join(row)!r}") from None
            if gender_f not in (0.0, 1.0):
                raise DataFormatError(f"{path}: line {line}: gender must be 0 or 1")
            try:
                records.append(WageRecord(wage, int(gender_f)))
            except DataFormatError as exc:
                raise DataFormatError(f"{path}: line {line}: {exc}") from None
    if not records:
        raise DataFormatError(f"{path}: no data rows")
    return records


def topcode_threshold(log_wages, fraction: float) -> float:
    """Order statistic ``k = n - c`` with ``c = floor(fraction n + 1/2)`` rows above it."""
    y = np.sort(np.asarray(log_wages, dtype=float))
    n = y.size
    c = int(math.floor(fraction * n + 0.5))
    k = min(max(n - c, 1), n)
    return float(y[k - 1])


def apply_topcoding(records, fraction: float, z2: float) -> tuple[IntervalData, float, float]:
    """Top-code log wages.

    Returns ``(data, z1, log_z2)``: rows with log wage above ``z1`` become
    ``[z1, log(z2)]``, all other rows keep their log wage. ``z2`` is given
    on the raw wage scale.
    """
    if not 0 < fraction < 1:
        raise ValueError("top-coding fraction must lie in (0, 1)")
    y = np.log([r.wage for r in records])
    x = np.array([r.gender for r in records], dtype=float)
    z1 = topcode_threshold(y, fraction)
    log_z2 = math.log(z2)
    if not log_z2 > z1:
        raise ValueError(f"z2 = {z2} must exceed the top-coding threshold exp({z1:.6g})")
    return IntervalData.from_latent(y, x, z1, log_z2), z1, log_z2


def synthetic_wages(n: int = 305, seed: int = 2000) -> list[WageRecord]:
    """Log-normal hourly wages with a binary gender dummy."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    gender = (rng.random(n) < 0.5).astype(int)
    log_w = 2.6 + 0.1 * gender + 0.45 * rng.standard_normal(n)
    return [WageRecord(float(round(math.exp(v), 2)), int(g)) for v, g in zip(log_w, gender)]


def write_wage_csv(records, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wage", "gender"])
        for r in records:
            w.writerow([repr(r.wage), r.gender])


# configuration ----------------------------------------------------------------


@dataclass
class RunConfig:
    model: str = "interval"
    grid: dict = field(default_factory=dict)
    plan: dict = field(default_factory=dict)
    method: str = "both"
    counterfactual_atoms: list | None = None
    input_path: str | None = None
    output_dir: str = "out"
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def validate(self, need_input: bool = False):
        if self.method not in ("conservative", "bonferroni", "both"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.grid:
            ParameterGrid.from_dict(self.grid)
        self.bootstrap_plan()
        if need_input:
            if not self.input_path:
                raise ValueError("an input data path is required")
            if not Path(self.input_path).is_file():
                raise FileNotFoundError(f"input file not found: {self.input_path}")
        return self

    def bootstrap_plan(self) -> BootstrapPlan:
        return BootstrapPlan(**{**self.plan, "seed": self.seed})

    def to_dict(self) -> dict:
        return {"format_version": FORMAT_VERSION, **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        version = d.pop("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported config format_version {version}")
        known = set(cls.__dataclass_fields__)
        extra = {k: d.pop(k) for k in list(d) if k not in known}
        cfg = cls(**d)
        cfg.extra.update(extra)
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        """Load a config file, or the config echoed in a run summary."""
        with Path(path).open(encoding="utf-8") as fh:
            d = json.load(fh)
        return cls.from_dict(d["config"] if "config" in d else d)


# reports ----------------------------------------------------------------------


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def _open_out(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="", encoding="utf-8")
    except OSError as exc:
        raise ReportWriteError(f"cannot write {path}: {exc}") from exc


def write_grid_csv(path, grid: ParameterGrid, columns: dict) -> Path:
    """One row per grid point: theta coordinates followed by ``columns``."""
    path = Path(path)
    thetas = grid.theta_array()
    names = [a.name or f"theta{i}" for i, a in enumerate(grid.axes)]
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["format_version", FORMAT_VERSION])
        w.writerow(names + list(columns))
        cols = [np.asarray(v) for v in columns.values()]
        for i, theta in enumerate(thetas):
            row = [fmt(t) for t in theta]
            for c in cols:
                v = c[i]
                row.append(str(int(v)) if c.dtype == bool else fmt(v))
            w.writerow(row)
    return path


def read_grid_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        version = next(r)
        if version != ["format_version", str(FORMAT_VERSION)]:
            raise DataFormatError(f"{path}: unsupported format line {version}")
        header = next(r)
        rows = [[float(v) for v in row] for row in r]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def write_json(path, obj) -> Path:
    path = Path(path)
    with _open_out(path) as fh:
        json.dump({"format_version": FORMAT_VERSION, **obj}, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _projection(mask) -> list | None:
    """Per-axis ``[min, max]`` of the points in ``mask``; ``None`` when empty."""
    if mask.is_empty():
        return None
    pts = mask.grid.theta_array()[mask.flags]
    return [[float(lo), float(hi)] for lo, hi in zip(pts.min(axis=0), pts.max(axis=0))]


def emit_report(report, outdir, config: dict | None = None, name: str = "report", timings: dict | None = None,
                methods=None) -> list[Path]:
    """Write a confidence, coverage or sensitivity report to ``outdir``.

    Grid results go to ``<name>_grid.csv``; the JSON summary echoes the
    configuration. ``methods`` restricts coverage columns to the listed
    critical-value schemes. Timings are only placed in the JSON file so that CSV
    output is byte-identical across identical runs.
    """
    outdir = Path(outdir)
    summary = {"config": config or {}, "timings": timings or {}}
    files = []
    if isinstance(report, dict) and report and all(isinstance(v, ConfidenceReport) for v in report.values()):
        reports = report
    elif isinstance(report, ConfidenceReport):
        reports = {report.method: report}
    else:
        reports = None

    if reports is not None:
        first = next(iter(reports.values()))
        cols = {"statistic": first.statistic, "q_lrr": first.q_lrr,
                "relaxed": first.relaxed.flags, "lrr_upper": first.lrr_upper.flags}
        for method, rep in reports.items():
            cols[f"critical_{method}"] = rep.critical_value
            cols[f"identified_{method}"] = rep.identified.flags
            cols[f"lrr_{method}"] = rep.lrr.flags
        files.append(write_grid_csv(outdir / f"{name}_grid.csv", first.grid, cols))
        summary["kind"] = "confidence"
        summary["grid"] = first.grid.to_dict()
        summary["results"] = {
            m: {**r.summary(), "identified_projection": _projection(r.identified), "lrr_projection": _projection(r.lrr)}
            for m, r in reports.items()
        }
        summary["empty"] = {m: r.identified.is_empty() for m, r in reports.items()}
    elif isinstance(report, CoverageGrid):
        cols = {k: v / report.R for k, v in report.counts.items()
                if methods is None or k.rsplit("_", 1)[-1] in methods}
        files.append(write_grid_csv(outdir / f"{name}_grid.csv", report.grid, cols))
        summary["kind"] = "coverage"
        summary["grid"] = report.grid.to_dict()
        s = report.summary()
        summary["timings"] = {**summary["timings"], "elapsed_seconds": s.pop("elapsed_seconds")}
        summary["results"] = s
    elif isinstance(report, SensitivityReport) or (isinstance(report, list) and report and isinstance(report[0], SensitivityReport)):
        items = report if isinstance(report, list) else [report]
        summary["kind"] = "sensitivity"
        summary["results"] = [r.to_dict() for r in items]
    else:
        raise TypeError(f"cannot emit a report of type {type(report).__name__}")
    files.append(write_json(outdir / f"{name}_summary.json", summary))
    return files
