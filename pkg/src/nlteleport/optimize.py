"""Bounded multi-start local optimisation with a reproducible restart log."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

__all__ = [
    "DEFAULT_RESTARTS",
    "OptimizationProblem",
    "OptimizationResult",
    "RestartRecord",
    "optimize",
    "optimize_scalar",
]

log = logging.getLogger(__name__)

DEFAULT_RESTARTS = 430


@dataclass(frozen=True)
class OptimizationProblem:
    """Objective plus box bounds; ``names`` label the parameter vector."""

    objective: Callable[[np.ndarray], float]
    bounds: tuple[tuple[float, float], ...]
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0
    names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds))
        for lo, hi in self.bounds:
            if not lo <= hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")
        if self.names and len(self.names) != len(self.bounds):
            raise ValueError("names and bounds differ in length")
        if self.restarts < 1:
            raise ValueError("need at least one restart")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def starts(self) -> np.ndarray:
        """Uniform random starting points, fixed by the seed."""
        rng = np.random.default_rng(self.seed)
        lo, hi = np.array(self.bounds).T
        return lo + (hi - lo) * rng.random((self.restarts, self.dim))

    def clip(self, x: np.ndarray) -> np.ndarray:
        lo, hi = np.array(self.bounds).T
        return np.clip(x, lo, hi)


@dataclass(frozen=True)
class RestartRecord:
    index: int
    start: np.ndarray
    end: np.ndarray | None
    value: float
    status: str = "ok"

    def to_record(self, names: Sequence[str] = ()) -> dict:
        names = names or [f"x{i}" for i in range(len(self.start))]
        rec = {"index": self.index, "value": self.value, "status": self.status}
        for n, v in zip(names, self.start):
            rec[f"start_{n}"] = float(v)
        end = self.end if self.end is not None else np.full(len(self.start), math.nan)
        for n, v in zip(names, end):
            rec[f"end_{n}"] = float(v)
        return rec


@dataclass(frozen=True)
class OptimizationResult:
    x: np.ndarray
    fun: float
    log: tuple[RestartRecord, ...] = field(repr=False)

    def running_best(self) -> np.ndarray:
        vals = np.array([r.value for r in self.log])
        return np.minimum.accumulate(np.where(np.isfinite(vals), vals, np.inf))


def _local(objective, bounds, index: int, x0: np.ndarray) -> RestartRecord:
    try:
        res = minimize(objective, x0, method="L-BFGS-B", bounds=bounds,
                       options={"ftol": 1e-12, "gtol": 1e-9, "eps": 1e-7, "maxiter": 2000})
        lo, hi = np.array(bounds).T
        x = np.clip(res.x, lo, hi)
        val = float(objective(x))
        if not math.isfinite(val):
            raise FloatingPointError(f"non-finite objective {val}")
        return RestartRecord(index, x0, x, val)
    except Exception as exc:  # a failing start must not abort the run
        log.warning("restart %d failed: %s", index, exc)
        return RestartRecord(index, x0, None, math.inf, f"failed: {type(exc).__name__}: {exc}")


def _local_star(args):
    return _local(*args)


def optimize(problem: OptimizationProblem, workers: int = 1,
             extra_starts: Sequence[np.ndarray] = (), random_starts: bool = True) -> OptimizationResult:
    """Run L-BFGS-B from every start and keep the global best.

    ``extra_starts`` are appended after the random starts, e.g. to warm-start
    from a related optimum; with ``random_starts=False`` only they are used.
    The log is ordered by restart index whatever the worker count.
    """
    starts = list(problem.starts()) if random_starts else []
    starts += [problem.clip(np.asarray(s, dtype=float)) for s in extra_starts]
    jobs = [(problem.objective, problem.bounds, i, x0) for i, x0 in enumerate(starts)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_local_star, jobs, chunksize=8))
    else:
        records = [_local_star(j) for j in jobs]
    records.sort(key=lambda r: r.index)
    ok = [r for r in records if r.end is not None]
    if not ok:
        raise RuntimeError("every restart failed")
    best = min(ok, key=lambda r: (r.value, r.index))
    return OptimizationResult(best.end, best.value, tuple(records))


def optimize_scalar(objective: Callable[[float], float], bounds: tuple[float, float],
                    n_scan: int = 41, xtol: float = 1e-4) -> tuple[float, float]:
    """Global minimum of a 1-D function: grid scan, then bounded Brent refinement."""
    lo, hi = bounds
    grid = np.linspace(lo, hi, n_scan)
    vals = np.array([objective(float(v)) for v in grid])
    i = int(np.nanargmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n_scan - 1)]
    res = minimize_scalar(objective, bounds=(a, b), method="bounded", options={"xatol": xtol})
    if res.fun <= vals[i]:
        return float(res.x), float(res.fun)
    return float(grid[i]), float(vals[i])
