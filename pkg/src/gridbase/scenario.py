"""Day profiles and batched baseline + sensitivity runs.

A day profile is an ordered list of occupied hours, each with outside-air
temperature and per-zone loads/setpoints/ventilation minima. run_day
solves every hour, builds the sensitivity operator, and collects the
signed scenario pair and the analytic/sampled uncertainty bounds into
plot-ready rows.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import hvac_model as hm
from . import sensitivity as sn
from .baseline_opt import SolverConfig, solve_baseline
from .errors import GridbaseError, ProfileParseError

J_PER_HR_TO_W = 1.0 / 3600.0
DAY_TYPES = ("hot", "moderate", "cold")
_DAY_CODE = {"hot": 1, "moderate": 2, "cold": 3}
DEFAULT_SAMPLES = 10_000


@dataclass(frozen=True)
class ProfileHour:
    hour_index: int
    t_oa: float
    zones: hm.ZoneInputs


@dataclass(frozen=True)
class DayProfile:
    label: str
    hours: tuple

    def __post_init__(self):
        if len(self.hours) < 1:
            raise ValueError("a day profile needs at least one hour")
        idx = [h.hour_index for h in self.hours]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("hour_index must be strictly increasing")


@dataclass(frozen=True)
class HourResult:
    hour_index: int
    j0: float
    x0: hm.DecisionVector | None
    lambda_max: float
    active_set_labels: tuple
    k_plus: float
    k_minus: float
    relative_plus: float
    relative_minus: float
    beta_holder: float
    beta_sample: float
    warnings: tuple = ()


# ---------------------------------------------------------------------------
# profile I/O
# ---------------------------------------------------------------------------

def _header_fields(n_zones: int) -> list:
    cols = ["hour", "T_oa_C"]
    for i in range(1, n_zones + 1):
        cols += [f"T_sp_C_{i}", f"Q_zone_{i}", f"m_oa_min_kg_s_{i}"]
    return cols


def load_profile(path, params: hm.HvacParameters | None = None) -> DayProfile:
    """Parse a profile CSV; errors carry the offending line number.

    An optional first metadata line `#label=...,units=<W|J_per_hr>`
    names the day type and the load units (J/hr loads are converted to
    watts on load).
    """
    params = params or hm.HvacParameters()
    label = "custom"
    scale = 1.0
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ProfileParseError("empty profile file", line=1)

    row_start = 1
    if lines[0].startswith("#"):
        for part in lines[0][1:].split(","):
            if "=" not in part:
                raise ProfileParseError(
                    f"malformed metadata entry {part!r}", line=1)
            key, val = (s.strip() for s in part.split("=", 1))
            if key == "label":
                label = val
            elif key == "units":
                if val == "J_per_hr":
                    scale = J_PER_HR_TO_W
                elif val != "W":
                    raise ProfileParseError(
                        f"unknown units {val!r} (expected W or J_per_hr)",
                        line=1)
            else:
                raise ProfileParseError(
                    f"unknown metadata key {key!r}", line=1)
        row_start = 2

    header = [c.strip() for c in lines[row_start - 1].split(",")]
    if len(header) < 5 or (len(header) - 2) % 3 != 0:
        raise ProfileParseError(
            f"header has {len(header)} columns; expected 2 + 3 per zone",
            line=row_start)
    n = (len(header) - 2) // 3
    if header != _header_fields(n):
        raise ProfileParseError(
            f"unexpected header columns {header}", line=row_start)

    hours = []
    for lineno, raw in enumerate(lines[row_start:], start=row_start + 1):
        if not raw.strip():
            continue
        cells = raw.split(",")
        if len(cells) != len(header):
            raise ProfileParseError(
                f"expected {len(header)} cells, found {len(cells)}",
                line=lineno)
        try:
            vals = [float(c) for c in cells]
        except ValueError as exc:
            raise ProfileParseError(f"non-numeric cell: {exc}", line=lineno)
        hour = int(vals[0])
        if hour != vals[0]:
            raise ProfileParseError("hour must be an integer", line=lineno)
        t_sp = np.array(vals[2::3])
        q = np.array(vals[3::3]) * scale
        v = np.array(vals[4::3])
        if np.any(v < 0):
            raise ProfileParseError(
                f"negative ventilation minimum in hour {hour}", line=lineno)
        if v.sum() > params.m_design:
            raise ProfileParseError(
                f"total ventilation minimum exceeds design flow in "
                f"hour {hour}", line=lineno)
        hours.append(ProfileHour(hour, vals[1], hm.ZoneInputs(q, t_sp, v)))
    if not hours:
        raise ProfileParseError("profile contains no data rows",
                                line=row_start + 1)
    try:
        return DayProfile(label=label, hours=tuple(hours))
    except ValueError as exc:
        raise ProfileParseError(str(exc), line=row_start + 1)


def write_profile(profile: DayProfile, path, units: str = "W") -> None:
    """Write a profile CSV that load_profile round-trips exactly."""
    if units not in ("W", "J_per_hr"):
        raise ValueError(f"unknown units {units!r}")
    scale = 1.0 if units == "W" else 3600.0
    n = profile.hours[0].zones.count
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"#label={profile.label},units={units}\n")
        fh.write(",".join(_header_fields(n)) + "\n")
        for h in profile.hours:
            cells = [str(h.hour_index), _fmt(h.t_oa)]
            for i in range(n):
                cells += [_fmt(h.zones.t_sp[i]),
                          _fmt(h.zones.q_zone[i] * scale),
                          _fmt(h.zones.m_oa_min[i])]
            fh.write(",".join(cells) + "\n")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# synthetic day fixtures
# ---------------------------------------------------------------------------

def synth_profile(day_type: str, seed: int, n_zones: int = 5,
                  n_hours: int = 7) -> DayProfile:
    """Deterministic seeded day fixture (setpoints 22 C, 0.05 kg/s
    ventilation per zone; hour indices span the occupied period)."""
    if day_type not in DAY_TYPES:
        raise ValueError(f"day_type must be one of {DAY_TYPES}")
    rng = np.random.default_rng([seed, _DAY_CODE[day_type]])
    hours = []
    for k in range(n_hours):
        # midday-peaked shape in [0, 1]
        shape = math.sin(math.pi * (k + 0.5) / n_hours)
        if day_type == "hot":
            t_oa = 33.0 + 6.0 * shape + rng.uniform(-0.5, 0.5)
            q = -rng.uniform(2500.0, 4500.0, n_zones) * (0.7 + 0.6 * shape)
        elif day_type == "cold":
            t_oa = -5.0 + 11.0 * shape + rng.uniform(-1.0, 1.0)
            q = rng.uniform(2000.0, 4000.0, n_zones) * (1.2 - 0.5 * shape)
        else:
            t_oa = 16.0 + 7.0 * shape + rng.uniform(-0.5, 0.5)
            q = -rng.uniform(800.0, 2600.0, n_zones) * (0.6 + 0.7 * shape)
        zones = hm.ZoneInputs(q, np.full(n_zones, 22.0),
                              np.full(n_zones, 0.05))
        hours.append(ProfileHour(9 + k, float(t_oa), zones))
    return DayProfile(label=day_type, hours=tuple(hours))


# ---------------------------------------------------------------------------
# batched runs
# ---------------------------------------------------------------------------

def run_day(profile: DayProfile, mask, alpha: float,
            cfg: SolverConfig | None = None,
            params: hm.HvacParameters | None = None,
            n_samples: int = DEFAULT_SAMPLES, seed: int = 0,
            max_workers: int | None = None) -> list:
    """Solve and analyze every hour; output order matches input order.

    Per-hour sampling seeds are seed XOR hour_index, so results do not
    depend on worker count or scheduling. Hours that fail record the
    error in their warnings; if every hour fails, the last error is
    re-raised with a day-level summary.
    """
    cfg = cfg or SolverConfig()
    params = params or hm.HvacParameters()
    workers = max_workers or min(len(profile.hours), os.cpu_count() or 1)

    def one(hour: ProfileHour) -> HourResult:
        return _run_hour(hour, mask, alpha, cfg, params, n_samples,
                         seed ^ hour.hour_index)

    if workers <= 1:
        results = [one(h) for h in profile.hours]
    else:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, profile.hours))
    if all(math.isnan(r.j0) for r in results):
        raise GridbaseError(
            "every hour of the day failed: " +
            "; ".join(w for r in results for w in r.warnings))
    return results


def _run_hour(hour: ProfileHour, mask, alpha, cfg, params, n_samples,
              seed) -> HourResult:
    warnings = []
    try:
        w = hm.ExogenousVector(t_oa=hour.t_oa, zones=hour.zones,
                               params=params)
        kkt = solve_baseline(w, cfg)
        if not kkt.strict_complementarity_ok:
            warnings.append("degenerate anchor: active constraint with "
                            "zero multiplier")
        spec = sn.uncertainty_spec(w, mask, alpha)
        op = sn.build_operator(kkt, w, spec)
        pair = sn.signed_shift_pair(op, w, spec)
        qm = sn.quadratic_model(op, w, spec)
        holder = sn.holder_bound(qm, spec, "holder_paper_literal")
        sample = sn.sample_bound(op, w, spec, n_samples, seed)
        labels = hm.constraint_labels(hour.zones.count)
        return HourResult(
            hour_index=hour.hour_index,
            j0=kkt.j0,
            x0=kkt.x0,
            lambda_max=float(np.max(kkt.lam)) if kkt.lam.size else 0.0,
            active_set_labels=tuple(labels[i] for i in kkt.active_set),
            k_plus=pair["K_plus"],
            k_minus=pair["K_minus"],
            relative_plus=pair["K_plus"] / kkt.j0,
            relative_minus=pair["K_minus"] / kkt.j0,
            beta_holder=holder.beta,
            beta_sample=sample.beta,
            warnings=tuple(warnings),
        )
    except GridbaseError as exc:
        warnings.append(f"{type(exc).__name__}: {exc}")
        nan = float("nan")
        return HourResult(
            hour_index=hour.hour_index, j0=nan, x0=None, lambda_max=nan,
            active_set_labels=(), k_plus=nan, k_minus=nan,
            relative_plus=nan, relative_minus=nan, beta_holder=nan,
            beta_sample=nan, warnings=tuple(warnings))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

_CSV_COLUMNS = ("hour", "J0_W", "K_plus_W", "K_minus_W", "rel_plus",
                "rel_minus", "beta_holder_W", "beta_sample_W")


def export_results(results, path, format: str = "csv") -> None:
    """Write HourResults as CSV (fixed column set) or JSON; numbers carry
    17 significant digits so re-parsing is exact."""
    results = list(results)
    if not results:
        raise ValueError("no results to export")
    if format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_COLUMNS)
            for r in results:
                writer.writerow([
                    r.hour_index, _fmt(r.j0), _fmt(r.k_plus),
                    _fmt(r.k_minus), _fmt(r.relative_plus),
                    _fmt(r.relative_minus), _fmt(r.beta_holder),
                    _fmt(r.beta_sample),
                ])
    elif format == "json":
        rows = []
        for r in results:
            rows.append({
                "hour_index": r.hour_index,
                "j0": r.j0,
                "x0": None if r.x0 is None else {
                    "t_sa": r.x0.t_sa, "m_oa": r.x0.m_oa,
                    "m_sa": list(r.x0.m_sa),
                    "q_h": r.x0.q_h, "q_c": r.x0.q_c,
                },
                "lambda_max": r.lambda_max,
                "active_set_labels": list(r.active_set_labels),
                "k_plus": r.k_plus,
                "k_minus": r.k_minus,
                "relative_plus": r.relative_plus,
                "relative_minus": r.relative_minus,
                "beta_holder": r.beta_holder,
                "beta_sample": r.beta_sample,
                "warnings": list(r.warnings),
            })
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2, allow_nan=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {format!r}")
