"""Cubic nonlinear squeezing of single-mode states.

The figure of merit is the variance of ``p + z x**2`` relative to the
smallest value any Gaussian state can reach.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Protocol

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "GAUSSIAN_CONSTANT",
    "NoNativeCubicity",
    "SqueezingReport",
    "gaussian_min_variance",
    "native_cubicity",
    "native_cubicity_closed_form",
    "nonlinear_variance",
    "xi_from_moments",
    "xi_from_quadratic",
]

# min_G var(p + z x^2) = GAUSSIAN_CONSTANT * |z|**(2/3)
GAUSSIAN_CONSTANT = 3.0 * 2.0 ** (-5.0 / 3.0)


class NoNativeCubicity(ValueError):
    """The state shows no nonlinear squeezing inside the scanned bracket."""


class MomentSet(Protocol):
    var_p: float
    var_x2: float
    cov_x2_p: float


def gaussian_min_variance(z):
    """Smallest ``var(p + z x^2)`` over Gaussian states; 0 at ``z = 0``."""
    return GAUSSIAN_CONSTANT * np.abs(z) ** (2.0 / 3.0)


def nonlinear_variance(m: MomentSet, z: float) -> float:
    return m.var_p + 2.0 * z * m.cov_x2_p + z * z * m.var_x2


@dataclass(frozen=True)
class SqueezingReport:
    z: float
    numerator: float
    denominator: float
    xi: float
    xi_db: float
    z_native: float | None = None

    def to_record(self) -> dict:
        return asdict(self)


def _ratio(numerator: float, denominator: float) -> float:
    if denominator > 0:
        return numerator / denominator
    # z = 0: the Gaussian bound vanishes, report an infinite sentinel
    return math.inf if numerator > 0 else math.nan


def _db(xi: float) -> float:
    if xi > 0:
        return 10.0 * math.log10(xi)
    return -math.inf if xi == 0 else math.nan


def xi_from_moments(m: MomentSet, z: float, z_native: float | None = None) -> SqueezingReport:
    for name in ("var_p", "var_x2"):
        if getattr(m, name) < -1e-12:
            raise ValueError(f"inconsistent moments: {name} = {getattr(m, name)} < 0")
    num = nonlinear_variance(m, z)
    if num < -1e-12:
        raise ValueError(f"inconsistent moments: var(p + z x^2) = {num} < 0")
    den = float(gaussian_min_variance(z))
    xi = _ratio(num, den)
    return SqueezingReport(float(z), float(num), den, xi, _db(xi), z_native)


def xi_from_quadratic(c0: float, c1: float, c2: float, z):
    """xi for a numerator given as ``c0 + c1 z + c2 z^2``."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (c0 + c1 * z + c2 * z * z) / gaussian_min_variance(z)


def native_cubicity_closed_form(c0: float, c1: float, c2: float) -> tuple[float, float]:
    """Minimise ``(c0 + c1 z + c2 z^2) / (K |z|^(2/3))`` over real z.

    Stationary points solve ``4 c2 z^2 + c1 z - 2 c0 = 0``; with ``c0, c2 > 0``
    there is one root of each sign and the smaller ratio wins.
    """
    if c2 <= 0 or c0 <= 0:
        raise ValueError("need positive var(p) and var(x^2) coefficients")
    disc = math.sqrt(c1 * c1 + 32.0 * c2 * c0)
    roots = ((-c1 - disc) / (8.0 * c2), (-c1 + disc) / (8.0 * c2))
    vals = [float(xi_from_quadratic(c0, c1, c2, zr)) for zr in roots]
    # ties go to the negative root
    k = 0 if vals[0] <= vals[1] * (1 + 1e-12) else 1
    return roots[k], vals[k]


def native_cubicity(
    state: MomentSet | Callable[[float], float],
    bracket: tuple[float, float] = (-3.0, 3.0),
    n_scan: int = 400,
    xtol: float = 1e-6,
) -> tuple[float, float]:
    """Global minimiser ``(z_n, xi(z_n))`` of ``xi(z)``.

    ``state`` is either a moment set or a callable returning xi for a given
    z.  A coarse scan is refined by golden-section search.  Raises
    :class:`NoNativeCubicity` when xi never drops below 1 or the minimum sits
    on the bracket edge.
    """
    if callable(state):
        xi = state
    else:
        xi = lambda z: xi_from_moments(state, z).xi  # noqa: E731

    lo, hi = bracket
    grid = np.linspace(lo, hi, n_scan)
    grid = grid[np.abs(grid) > 1e-12]
    vals = np.array([xi(z) for z in grid])
    i = int(np.nanargmin(vals))
    if vals[i] >= 1.0 - 1e-12:
        raise NoNativeCubicity(f"min xi = {vals[i]:.6g} >= 1 on {bracket}")
    if i == 0 or i == len(grid) - 1:
        raise NoNativeCubicity(f"minimum at bracket edge z = {grid[i]:.6g}")

    a, b, c = grid[i - 1], grid[i], grid[i + 1]
    if a < 0 < c:
        # keep the golden-section bracket on one side of the z = 0 pole
        a, c = (a, -1e-12) if b < 0 else (1e-12, c)
    res = minimize_scalar(xi, bracket=(a, b, c), method="golden", options={"xtol": xtol * 1e-3})
    z_best, xi_best = float(res.x), float(res.fun)

    mirror = xi(-z_best)
    if z_best > 0 and mirror <= xi_best * (1 + 1e-9):
        z_best, xi_best = -z_best, mirror
    return z_best, xi_best
