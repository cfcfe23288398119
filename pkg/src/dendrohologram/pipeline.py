"""Batch pipeline: configuration, ingestion, orchestration and artifact output."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .dendrogram import LINKAGES, METRICS, EventPoint, agglomerate, assign_codes, pairwise_distances
from .density import (
    difference_pdf,
    expected_view,
    kinetic_energy_continuum,
    phase_field,
    to_grid,
)
from .dynamics import (
    Step,
    StepConfig,
    action_increment,
    build_step,
    dendrogram_distance,
    grow_sequence,
    least_action_step,
)
from .errors import ConfigError, DomainError, IngestionError
from .geodesic import (
    PROJECTIONS,
    SPACETIMES,
    Metric,
    integrate_geodesic,
    orbit_initial_state,
    sample_events,
)
from .padic import encode_edge
from .quantum import (
    POTENTIAL_MODES,
    action_evaluate,
    bohmian_residuals,
    expansion_constants,
    external_potential,
    floored_cells,
    hamiltonian_density,
    quantum_potential,
    third_order_constants,
    variety_expansion_terms,
    wavefunction,
)
from .views import (
    difference_matrix,
    differences_energy,
    event_distribution,
    event_values,
    mean_momenta,
    variety,
)

log = logging.getLogger(__name__)

SCHEMA_TAG = "dht-report/1"
SOURCES = ("csv", "geodesic", "synthetic")
ZV_MODES = ("window_mean", "fixed")
QP_SIGNS = ("paper", "bohmian")
PDF_MODES = ("signed", "absolute")


@dataclass(frozen=True)
class PipelineConfig:
    source: str = "geodesic"
    input: str = ""
    metric: str = "euclidean"
    linkage: str = "average"
    bins: int = 64
    lo: float = -1.0
    hi: float = 1.0
    tol: float = 1e-12
    A: float = 1.0
    zv_mode: str = "window_mean"
    zv: float = -36.0
    u_mode: str = "zero"
    floor: float = 1e-12
    continuity_squared: bool = False
    qp_sign: str = "paper"
    pdf_mode: str = "signed"
    projection: str = "coordinates"
    seed: int = 0
    output_dir: str = "out"
    # geodesic source
    spacetime: str = "schwarzschild"
    mass: float = 1.0
    r0: float = 10.0
    phi_rate_scale: float = 0.95
    ds: float = 1.0
    stride: int = 1
    coord_scales: str = "1,1,1,1"
    # synthetic source
    n_events: int = 8
    dim: int = 2
    # dynamics
    start: int = 3
    n_candidates: int = 0
    la_steps: int = 0
    plots: bool = True

    def __post_init__(self) -> None:
        enums = {
            "source": SOURCES,
            "metric": METRICS,
            "linkage": LINKAGES,
            "zv_mode": ZV_MODES,
            "u_mode": POTENTIAL_MODES,
            "qp_sign": QP_SIGNS,
            "pdf_mode": PDF_MODES,
            "projection": PROJECTIONS,
            "spacetime": SPACETIMES,
        }
        for key, allowed in enums.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key}={getattr(self, key)!r} not in {allowed}")
        checks = [
            (self.bins >= 8, "bins must be >= 8"),
            (self.hi > self.lo, "hi must exceed lo"),
            (self.tol >= 0, "tol must be >= 0"),
            (self.A > 0, "A must be > 0"),
            (self.floor > 0, "floor must be > 0"),
            (self.mass > 0, "mass must be > 0"),
            (self.ds > 0, "ds must be > 0"),
            (self.stride >= 1, "stride must be >= 1"),
            (self.n_events >= 3, "n_events must be >= 3"),
            (self.dim >= 1, "dim must be >= 1"),
            (self.start >= 3, "start must be >= 3"),
            (self.n_candidates >= 0 and self.la_steps >= 0, "candidate counts must be >= 0"),
            (0 <= self.seed < 2**64, "seed must fit in 64 bits"),
            (self.source != "csv" or bool(self.input), "source=csv needs input=<path>"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        self.scales()

    def scales(self) -> np.ndarray:
        try:
            s = np.array([float(v) for v in self.coord_scales.split(",")])
        except ValueError as exc:
            raise ConfigError(f"coord_scales must be 4 comma-separated numbers: {exc}") from exc
        if s.shape != (4,) or not np.all(np.isfinite(s)):
            raise ConfigError("coord_scales must be 4 comma-separated finite numbers")
        return s

    def step_config(self) -> StepConfig:
        return StepConfig(
            metric=self.metric,
            linkage=self.linkage,
            bins=self.bins,
            lo=self.lo,
            hi=self.hi,
            tol=self.tol,
            absolute=self.pdf_mode == "absolute",
            A=self.A,
            potential=self.u_mode,
            floor=self.floor,
        )

    def as_dict(self) -> dict[str, Any]:
        """Config echo; the output location is not part of the computation."""
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        return d


def _coerce(field: dataclasses.Field, raw: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    kind = field.type if isinstance(field.type, str) else field.type.__name__
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "int":
            return int(raw, 0)
        if kind == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {field.name}: {exc}") from exc
    return raw.strip()


def make_config(values: dict[str, Any]) -> PipelineConfig:
    known = {f.name: f for f in fields(PipelineConfig)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return PipelineConfig(**{k: _coerce(known[k], v) for k, v in values.items()})


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# --- ingestion -------------------------------------------------------------


def read_events_csv(path: str | Path) -> list[EventPoint]:
    """Events table with header ``id,c0,c1,...``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestionError(f"cannot read events file {path}: {exc}") from exc
    if not rows:
        raise IngestionError("events file is empty")
    header = [h.strip() for h in rows[0]]
    dim = len(header) - 1
    if dim < 1 or header[0] != "id" or header[1:] != [f"c{i}" for i in range(dim)]:
        raise IngestionError(f"header must be id,c0,c1,...; got {','.join(header)}")
    events = []
    for n, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != dim + 1:
            raise IngestionError(f"line {n}: expected {dim + 1} fields, got {len(row)}")
        try:
            eid = int(row[0])
            coords = tuple(float(v) for v in row[1:])
        except ValueError as exc:
            raise IngestionError(f"line {n}: {exc}") from exc
        events.append(EventPoint(eid, coords))
    events.sort(key=lambda e: e.id)
    if [e.id for e in events] != list(range(len(events))):
        raise IngestionError("event ids must be distinct and dense 0..N-1")
    return events


def write_events_csv(events: list[EventPoint], path: str | Path) -> None:
    dim = len(events[0].coords)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *(f"c{i}" for i in range(dim))])
        for e in events:
            w.writerow([e.id, *(repr(c) for c in e.coords)])


def rng_for(cfg: PipelineConfig) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(cfg.seed))


def geodesic_source(cfg: PipelineConfig, n_events: int | None = None):
    n_events = n_events or cfg.n_events
    metric = Metric(cfg.spacetime, cfg.mass)
    x0, u0 = orbit_initial_state(metric, cfg.r0, cfg.phi_rate_scale)
    n_steps = max((n_events - 1) * cfg.stride, 2)
    traj = integrate_geodesic(metric, x0, u0, cfg.ds, n_steps)
    events = sample_events(traj, cfg.stride, cfg.projection, cfg.scales())[:n_events]
    return events, traj


def load_events(cfg: PipelineConfig):
    """Events for the configured source, plus the trajectory when there is one."""
    if cfg.source == "csv":
        return read_events_csv(cfg.input), None
    if cfg.source == "geodesic":
        return geodesic_source(cfg)
    X = rng_for(cfg).random((cfg.n_events, cfg.dim))
    return [EventPoint(i, tuple(row)) for i, row in enumerate(X)], None


# --- run -------------------------------------------------------------------


def _finite(x: float) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def _norms(v: np.ndarray) -> dict[str, float | None]:
    v = np.asarray(v, dtype=float)
    ok = np.isfinite(v)
    if not ok.any():
        return {"max_abs": None, "rms": None}
    return {"max_abs": _finite(np.max(np.abs(v[ok]))), "rms": _finite(np.sqrt(np.mean(v[ok] ** 2)))}


@dataclass
class RunResult:
    report: dict[str, Any]
    tables: dict[str, tuple[list[str], list[list[Any]]]]
    trajectory: Any = None
    plots: dict[str, Any] = dataclasses.field(default_factory=dict)


def run_pipeline(cfg: PipelineConfig) -> RunResult:
    """Events -> dendrogram -> codes -> views -> pdf -> grid -> phase -> quantum diagnostics."""
    events, traj = load_events(cfg)
    n = len(events)
    if n < 3:
        raise IngestionError(f"pipeline needs at least 3 events, got {n}")
    sc = cfg.step_config()

    dm = pairwise_distances(events, cfg.metric)
    dend = assign_codes(agglomerate(dm, cfg.linkage))
    codes = dend.codes
    values = event_values(dend)
    dist = event_distribution(dend)
    q = difference_matrix(values)

    pdf = difference_pdf(q, cfg.tol, sc.absolute)
    grid = to_grid(pdf, cfg.bins, (cfg.lo, cfg.hi))
    phase = phase_field(grid)
    curr = wavefunction(grid, phase)

    prev_step = build_step(events[:-1], sc)
    prev = wavefunction(prev_step.grid, prev_step.phase)
    U = external_potential(grid, cfg.u_mode)
    bohm = cfg.qp_sign == "bohmian"
    uq = quantum_potential(grid, cfg.floor, bohmian=bohm)
    res_hj, res_cont = bohmian_residuals(prev, curr, U, cfg.floor, bohmian=bohm)
    _, res_cont_sq = bohmian_residuals(prev, curr, U, cfg.floor, continuity_squared=True, bohmian=bohm)
    H = hamiltonian_density(grid, phase, None if cfg.u_mode == "zero" else U, cfg.floor)
    action = action_evaluate([prev, curr], U, cfg.A, cfg.floor)

    first, second = expansion_constants()
    third = third_order_constants()
    try:
        zv = None if cfg.zv_mode == "window_mean" else cfg.zv
        ve = variety_expansion_terms(grid, cfg.floor, zv)
        expansion = {k: _finite(v) if isinstance(v, float) else v for k, v in dataclasses.asdict(ve).items()}
        expansion["status"] = "ok"
    except DomainError as exc:
        expansion = {"status": "skipped", "reason": str(exc)}

    ratio = next(iter(dist.values()))
    report = {
        "schema": SCHEMA_TAG,
        "version": __version__,
        "config": cfg.as_dict(),
        "dataset": {
            "source": cfg.source,
            "n_events": n,
            "dim": len(events[0].coords),
            "coord_scales": [float(s) for s in cfg.scales()] if cfg.source == "geodesic" else None,
        },
        "dendrogram": {
            "code_length": len(codes[0]),
            "merge_heights": {"min": float(dend.heights().min()), "max": float(dend.heights().max())},
            "codes": [
                {"id": i, "code": str(c), "edge": str(encode_edge(c)), "monna": str(v), "monna_float": float(v)}
                for i, (c, v) in enumerate(zip(codes, values))
            ],
        },
        "event_distribution": {
            "distinct_codes": len(dist),
            "uniform": all(p == ratio for p in dist.values()) and ratio == Fraction(1, n),
            "mass": str(ratio),
        },
        "views": {
            "variety": variety(q, cfg.A),
            "differences_energy": differences_energy(q),
            "mean_momentum": _norms(mean_momenta(q)),
        },
        "pdf": {"atoms": len(pdf), "pairs": pdf.n_pairs, "tolerance_merges": pdf.n_merged},
        "grid": {
            "bins": grid.bins,
            "lo": grid.lo,
            "hi": grid.hi,
            "h": grid.h,
            "expected_view": expected_view(grid),
            "floored_cells": floored_cells(grid, cfg.floor),
        },
        "energies": {
            "discrete": differences_energy(q),
            "continuum": kinetic_energy_continuum(grid, phase),
            "pdf_second_moment": pdf.second_moment(),
        },
        "expansion_constants": {
            "first": first,
            "second": second,
            "third_raw": third["raw"],
            "third_taylor": third["taylor"],
        },
        "variety_expansion": expansion,
        "action": action.as_dict(),
        "residuals": {
            "hamilton_jacobi": _norms(res_hj),
            "continuity": _norms(res_cont),
            "continuity_squared_form": _norms(res_cont_sq),
            "continuity_mode": "squared" if cfg.continuity_squared else "standard",
        },
        "hamiltonian": {
            "integral": _finite(grid.h * np.nansum(H)),
            "gaps": int(np.count_nonzero(np.isnan(H))),
        },
        "quantum_potential": _norms(uq),
        "dendrogram_distance_to_previous": dendrogram_distance(prev_step, Step(n, dend, pdf, grid, phase)),
    }
    cont = res_cont_sq if cfg.continuity_squared else res_cont
    Q = grid.centers
    tables = {
        "pdf.csv": (["Q", "rho"], [[float(a), float(b)] for a, b in zip(pdf.support, pdf.masses)]),
        "grid.csv": (
            ["Q", "rho", "S", "UQ", "res_hj", "res_cont", "re_psi", "im_psi"],
            [
                [float(v) for v in row]
                for row in zip(Q, grid.density, phase.S, uq, res_hj, cont, curr.psi.real, curr.psi.imag)
            ],
        ),
        "codes.csv": (
            ["id", "code", "edge", "monna"],
            [[i, str(c), encode_edge(c), str(v)] for i, (c, v) in enumerate(zip(codes, values))],
        ),
    }
    plots = {
        "rho": (Q, grid.density, "rho(Q)"),
        "S": (Q, phase.S, "S(Q)"),
        "UQ": (Q, uq, "U^Q(Q)"),
        "residuals": (Q, np.vstack([res_hj, cont]), "residuals (HJ, continuity)"),
    }
    return RunResult(_clean(report), tables, traj, plots)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _finite(obj)
    return obj


def dump_json(obj, path: str | Path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_table(path: Path, header: list[str], rows: list[list[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_outputs(result: RunResult, out: str | Path, plots: bool = True) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(result.report, out / "report.json")
    for name, (header, rows) in result.tables.items():
        write_table(out / name, header, rows)
    if result.trajectory is not None:
        result.trajectory.write_csv(out / "trajectory.csv")
    if plots:
        from .plots import write_svg

        (out / "plots").mkdir(exist_ok=True)
        for name, (x, y, title) in result.plots.items():
            write_svg(out / "plots" / f"{name}.svg", x, y, title)
    return out


def run_dynamics(cfg: PipelineConfig) -> dict[str, Any]:
    """Grow the sequence event by event, then optionally extend it by least action."""
    events, _ = load_events(cfg)
    sc = cfg.step_config()
    seq = grow_sequence(events, cfg.start, sc)
    records = []
    for k, step in enumerate(seq.steps):
        rec = {"step": k, "n_events": step.n_events, "chosen_candidate": None, "action_increment": None}
        rec["distance_to_previous"] = dendrogram_distance(seq.steps[k - 1], step) if k else None
        if k:
            rec["action_increment"] = action_increment(seq.steps[k - 1], step, sc)
        records.append(rec)
    if cfg.la_steps and cfg.n_candidates:
        rng = rng_for(cfg)
        for _ in range(cfg.la_steps):
            X = np.array([e.coords for e in seq.events])
            lo, hi = X.min(axis=0), X.max(axis=0)
            cand = lo + (hi - lo) * rng.random((cfg.n_candidates, X.shape[1]))
            n = len(seq.events)
            sel = least_action_step(seq, [EventPoint(n + i, tuple(c)) for i, c in enumerate(cand)], sc)
            prev = seq.steps[-1]
            seq = sel.sequence
            records.append(
                {
                    "step": len(seq.steps) - 1,
                    "n_events": seq.steps[-1].n_events,
                    "chosen_candidate": sel.index,
                    "action_increment": sel.increments[sel.index],
                    "distance_to_previous": dendrogram_distance(prev, seq.steps[-1]),
                }
            )
    return _clean({"schema": "dht-dynamics/1", "config": cfg.as_dict(), "steps": records})
