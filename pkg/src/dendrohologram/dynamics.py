"""Dendrogram sequences, best-match distance and least-action event selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dendrogram import Dendrogram, EventPoint, build_dendrogram
from .density import (
    DensityGrid,
    DifferencePdf,
    PhaseField,
    check_geometry,
    difference_pdf,
    phase_field,
    to_grid,
)
from .errors import DHTError, DomainError
from .quantum import DEFAULT_FLOOR, action_evaluate, external_potential, wavefunction
from .views import difference_matrix, event_values


@dataclass(frozen=True)
class StepConfig:
    metric: str = "euclidean"
    linkage: str = "average"
    bins: int = 64
    lo: float = -1.0
    hi: float = 1.0
    tol: float = 1e-12
    absolute: bool = False
    A: float = 1.0
    potential: str = "zero"
    floor: float = DEFAULT_FLOOR


@dataclass(frozen=True)
class Step:
    n_events: int
    dendrogram: Dendrogram
    pdf: DifferencePdf
    grid: DensityGrid
    phase: PhaseField

    @property
    def geometry(self):
        return self.grid.geometry


@dataclass
class DendrogramSequence:
    events: list[EventPoint]
    steps: list[Step] = field(default_factory=list)
    config: StepConfig = field(default_factory=StepConfig)

    def __len__(self) -> int:
        return len(self.steps)


def build_step(events: Sequence[EventPoint], cfg: StepConfig) -> Step:
    """Rebuild the whole dendrogram for ``events`` and grid its difference pdf."""
    d = build_dendrogram(events, cfg.metric, cfg.linkage)
    q = difference_matrix(event_values(d))
    pdf = difference_pdf(q, cfg.tol, cfg.absolute)
    grid = to_grid(pdf, cfg.bins, (cfg.lo, cfg.hi))
    return Step(len(events), d, pdf, grid, phase_field(grid))


def grow_sequence(events: Sequence[EventPoint], start: int = 3, cfg: StepConfig | None = None) -> DendrogramSequence:
    """One step per prefix ``events[:start] .. events[:N]``."""
    cfg = cfg or StepConfig()
    events = list(events)
    if start < 3:
        raise DomainError("sequence start must be >= 3")
    if start > len(events):
        raise DomainError(f"start {start} exceeds the {len(events)} available events")
    steps = [build_step(events[:k], cfg) for k in range(start, len(events) + 1)]
    return DendrogramSequence(events, steps, cfg)


def dendrogram_distance(a: Step, b: Step) -> float:
    """L2 distance between the gridded difference densities."""
    check_geometry(a, b)
    diff = a.grid.density - b.grid.density
    return float(np.sqrt(a.grid.h * np.dot(diff, diff)))


def sequence_differences_energy(seq: DendrogramSequence | Sequence[Step]) -> float:
    """``sum_t int (S_t - S_{t-1}) rho_t dQ`` over consecutive steps."""
    steps = seq.steps if isinstance(seq, DendrogramSequence) else list(seq)
    if len(steps) < 2:
        raise DomainError("differences energy needs at least 2 steps")
    check_geometry(*steps)
    h = steps[0].grid.h
    total = 0.0
    for prev, curr in zip(steps[:-1], steps[1:]):
        total += h * float(np.sum((curr.phase.S - prev.phase.S) * curr.grid.density))
    return total


def action_increment(prev: Step, new: Step, cfg: StepConfig) -> float:
    """Action of appending ``new`` after ``prev``: dS term + kinetic + U - A v."""
    U = external_potential(new.grid, cfg.potential)
    states = [wavefunction(s.grid, s.phase) for s in (prev, new)]
    both = action_evaluate(states, U, cfg.A, cfg.floor)
    alone = action_evaluate(states[:1], external_potential(prev.grid, cfg.potential), cfg.A, cfg.floor)
    return both.total - alone.total


@dataclass(frozen=True)
class Selection:
    index: int
    event: EventPoint
    increments: tuple[float, ...]
    sequence: DendrogramSequence


def least_action_step(
    seq: DendrogramSequence, candidates: Sequence[EventPoint], cfg: StepConfig | None = None
) -> Selection:
    """Append the candidate with the smallest action increment (lowest index on ties)."""
    cfg = cfg or seq.config
    if not candidates:
        raise DomainError("least-action step needs at least one candidate")
    if not seq.steps:
        raise DomainError("sequence has no steps")
    n = len(seq.events)
    for c in candidates:
        if c.id < n:
            raise DomainError(f"candidate id {c.id} does not extend the id range 0..{n - 1}")
    last = seq.steps[-1]
    increments = []
    built = []
    for c in candidates:
        try:
            ev = seq.events + [EventPoint(n, c.coords)]
            step = build_step(ev, cfg)
            increments.append(action_increment(last, step, cfg))
            built.append((ev, step))
        except DHTError:
            increments.append(np.inf)
            built.append(None)
    if all(b is None for b in built):
        raise DomainError("every candidate failed to build")
    idx = int(np.argmin(increments))
    ev, step = built[idx]
    extended = DendrogramSequence(ev, seq.steps + [step], cfg)
    return Selection(idx, ev[-1], tuple(increments), extended)
