"""Bifurcation diagrams: recorded maxima of one coordinate across m."""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .chaos import count_clusters
from .errors import UnijunctionError
from .integrate import IntegratorConfig, extract_maxima, integrate_trajectory
from .model import GCoeffs, ModelParams

log = logging.getLogger(__name__)

WORKERS_ENV = "UNIJUNCTION_MAX_WORKERS"
DEFAULT_GRID_POINTS = 501
DEFAULT_GAP = 1e-3


def max_workers(requested=None):
    """Worker count: ``requested``, capped by the environment variable and CPUs."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(WORKERS_ENV)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


@dataclass(eq=False)
class BifurcationDiagram:
    m_values: np.ndarray
    maxima_per_m: list
    settings: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)  # m -> diagnostic

    def to_csv(self, path):
        """Long form: one (m, value) row per recorded maximum."""
        coord = self.settings.get("coordinate", "u")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("m", f"{coord}_max"))
            for m, vals in zip(self.m_values, self.maxima_per_m):
                for v in vals:
                    w.writerow((repr(float(m)), repr(float(v))))


@dataclass(frozen=True)
class ColumnSummary:
    m: float
    count: int
    min: float | None
    max: float | None
    spread: float | None
    branches: int
    skipped: bool
    note: str = ""


def _column(m, p_base, g, cfg, coordinate, s0):
    p = p_base.with_m(m)
    traj = integrate_trajectory(s0, p, g, cfg)
    return extract_maxima(traj, coordinate).values, traj.states[-1]


def bifurcation_sweep(m_grid, p_base: ModelParams, g: GCoeffs,
                      cfg: IntegratorConfig | None = None, continuation=False,
                      descending=False, coordinate="u", workers=None):
    """Recorded ``coordinate`` maxima after the transient, per m.

    Without continuation every column starts from the default initial state
    of its own m and columns run on a thread pool. With continuation the grid
    is walked in order (descending if asked) and each column starts from the
    final state of the previous one. Failing columns are recorded in
    ``failures`` and left empty.
    """
    cfg = cfg or IntegratorConfig()
    grid = np.unique(np.asarray(m_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("m_grid is empty")
    if grid.size != np.size(m_grid):
        raise ValueError("m_grid has repeated values")
    maxima = [np.empty(0)] * len(grid)
    failures = {}
    order = list(range(len(grid)))[::-1] if descending else list(range(len(grid)))

    def one(i, s0=None):
        try:
            return _column(grid[i], p_base, g, cfg, coordinate, s0)
        except UnijunctionError as exc:
            log.warning("m=%g failed: %s", grid[i], exc)
            failures[float(grid[i])] = f"{type(exc).__name__}: {exc}"
            return np.empty(0), None

    if continuation:
        state = None
        for i in order:
            vals, last = one(i, state)
            maxima[i] = vals
            state = last if last is not None else None
    else:
        n_workers = max_workers(workers)
        if n_workers == 1:
            results = [one(i) for i in order]
        else:
            with ThreadPoolExecutor(n_workers) as pool:
                results = list(pool.map(one, order))
        for i, (vals, _) in zip(order, results):
            maxima[i] = vals

    settings = {"integrator": cfg.as_dict(), "continuation": bool(continuation),
                "descending": bool(descending), "coordinate": coordinate,
                "params": p_base.as_dict(), "g": g.as_dict()}
    return BifurcationDiagram(m_values=grid, maxima_per_m=maxima, settings=settings,
                              failures=failures)


def diagram_summary(d: BifurcationDiagram, gap=DEFAULT_GAP):
    if len(d.m_values) == 0:
        raise ValueError("empty diagram")
    out = []
    for m, vals in zip(d.m_values, d.maxima_per_m):
        if len(vals) == 0:
            note = d.failures.get(float(m), "no maxima recorded")
            out.append(ColumnSummary(float(m), 0, None, None, None, 0, True, note))
            continue
        lo, hi = float(np.min(vals)), float(np.max(vals))
        out.append(ColumnSummary(float(m), len(vals), lo, hi, hi - lo,
                                 count_clusters(vals, gap), False))
    return out


def summary_to_json(summary, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([asdict(s) for s in summary], fh, indent=2)
