"""Conditional teleportation in truncated Fock space.

Cluster modes A, B and the input mode Q are held as (ensembles of) pure
three-mode vectors.  Modes A and Q meet on a beam splitter, Q is measured in
x and A in a p-quadrature that is rotated by ``phi(m_x) = -atan(sqrt(2) chi
m_x)`` for the nonlinear scheme.  The displacement feedforward on B is
applied analytically to the conditional moments, which is exact and avoids
displacing truncated Fock vectors.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .fock import (
    FockDensity,
    TruncationError,
    beamsplitter_blocks,
    hermite_functions,
    momentum,
    position,
    quadrature_projector,
    squeezed_vacuum,
    squeezing_operator,
)
from .gaussian import ClusterParams, build_cluster
from .metrics import gaussian_min_variance
from .moments import SchemeConfig

__all__ = [
    "AGGREGATE_STATES",
    "AGGREGATE_XI",
    "CurvePoint",
    "MeasurementGrid",
    "PostSelection",
    "ThreeModeState",
    "build_grid",
    "condition",
    "gaussian_to_fock",
    "postselect",
    "prepare",
    "raw_moment_xi",
]

log = logging.getLogger(__name__)

AGGREGATE_STATES = "aggregate-states"
AGGREGATE_XI = "aggregate-xi"
MASS_TARGET = 0.999

# raw moments tracked per cell, in this order
_MOMENTS = ("x", "x2", "x3", "x4", "p", "p2", "xp", "x2p")


# ---------------------------------------------------------------- cluster


def _thermal_levels(nbar: float, tol: float = 1e-10) -> np.ndarray:
    if nbar == 0:
        return np.array([1.0])
    q = nbar / (1.0 + nbar)
    k = int(math.ceil(math.log(tol) / math.log(q)))
    w = (1.0 - q) * q ** np.arange(k)
    return w / w.sum()


def _phase(phi: float, c: int) -> np.ndarray:
    # exp(-i phi n): Heisenberg x -> x cos(phi) + p sin(phi)
    return np.exp(-1j * phi * np.arange(c))


def _cluster_components(params: ClusterParams, cutoff: int, tol: float, weight_floor: float = 1e-9):
    """Weighted pure two-mode vectors ``psi[a, b]`` making up the cluster.

    Thermal product components lighter than ``weight_floor`` are dropped.
    """
    work = max(2 * cutoff, cutoff + 30)
    nbar = params.n / 2.0  # variance (1 + n)/2 = nbar + 1/2
    levels = _thermal_levels(nbar)
    sA = sB = None
    if len(levels) > 1:
        # x_A -> exp(-r1/2) x_A, x_B -> exp(+r2/2) x_B
        sA = squeezing_operator(params.r1 / 2.0, work + 20)[:work, : len(levels)]
        sB = squeezing_operator(-params.r2 / 2.0, work + 20)[:work, : len(levels)]
    rotA = _phase(params.phi, work)
    out_w, out_v = [], []
    tail_mass = 0.0
    for j, wj in enumerate(levels):
        a = squeezed_vacuum(-params.r1, work) if sA is None else sA[:, j]
        for k, wk in enumerate(levels):
            if wj * wk < weight_floor:
                continue
            b = squeezed_vacuum(params.r2, work) if sB is None else sB[:, k]
            psi = np.outer(rotA * a, b)
            psi = beamsplitter_blocks(psi, params.t_c, out_cutoff=work)
            psi = _phase(params.phi1, work)[:, None] * psi * _phase(params.phi2, work)[None, :]
            psi = _displace_pair(psi, params.alpha1, params.alpha2)
            kept = psi[:cutoff, :cutoff]
            tail = 1.0 - float(np.vdot(kept, kept).real) / float(np.vdot(psi, psi).real)
            tail_mass += wj * wk * tail
            out_w.append(wj * wk)
            out_v.append(kept / np.linalg.norm(kept))
    if tail_mass > tol:
        raise TruncationError(tail_mass, tol, cutoff)
    w = np.array(out_w)
    return w / w.sum(), out_v


def _displace_pair(psi: np.ndarray, alpha1: float, alpha2: float) -> np.ndarray:
    """Shift the x-means of both modes by ``alpha1`` and ``alpha2``."""
    c = psi.shape[0]
    for axis, alpha in ((0, alpha1), (1, alpha2)):
        if alpha == 0:
            continue
        # D(beta) with beta = alpha/sqrt(2) shifts <x> by alpha
        D = expm(-1j * alpha * momentum(c))
        psi = np.moveaxis(np.tensordot(D, np.moveaxis(psi, axis, 0), axes=1), 0, axis)
    return psi


def gaussian_to_fock(params: ClusterParams, cutoff: int, tol: float = 1e-6) -> FockDensity:
    """Two-mode Fock representation of the cluster generated by ``params``.

    Takes the generation parameters rather than a covariance matrix because
    the state is built by running the preparation circuit on thermal inputs.
    """
    w, vecs = _cluster_components(params, cutoff, tol)
    if len(w) == 1:
        return FockDensity(vecs[0].reshape(-1), modes=2)
    flat = np.array([v.reshape(-1) for v in vecs])
    rho = np.einsum("k,ki,kj->ij", w, flat, flat.conj())
    return FockDensity(rho, modes=2)


def two_mode_moments(state: FockDensity) -> tuple[np.ndarray, np.ndarray]:
    """Covariance matrix and mean of a two-mode Fock state, order (x_A, p_A, x_B, p_B)."""
    c = state.cutoff
    big = c + 2
    I = np.eye(big)
    ops1 = [position(big), momentum(big)]
    ops = [np.kron(o, I) for o in ops1] + [np.kron(I, o) for o in ops1]
    rho = state.matrix().reshape(c, c, c, c)
    rho = np.pad(rho, [(0, 2)] * 4).reshape(big * big, big * big)
    E = lambda A: float(np.trace(rho @ A).real)  # noqa: E731
    mean = np.array([E(o) for o in ops])
    gamma = np.empty((4, 4))
    for i in range(4):
        for j in range(i, 4):
            gamma[i, j] = gamma[j, i] = E(0.5 * (ops[i] @ ops[j] + ops[j] @ ops[i])) - mean[i] * mean[j]
    return gamma, mean


# ---------------------------------------------------------------- three-mode input


@dataclass(frozen=True)
class ThreeModeState:
    """Product of the cluster (modes A, B) and the input mode Q.

    ``components`` holds weighted pure vectors ``psi[a, b, q]``; a mixed
    cluster or ancilla contributes one component per ensemble member.
    """

    weights: np.ndarray
    components: tuple
    cluster: ClusterParams
    ancilla: FockDensity

    @property
    def cutoff(self) -> int:
        return self.components[0].shape[0]


def prepare(params: ClusterParams, ancilla: FockDensity, cutoff: int = 30,
            tol: float = 1e-6, auto: bool = True, max_cutoff: int = 60) -> ThreeModeState:
    """Build the three-mode input, raising the cutoff until the tail is below ``tol``."""
    while True:
        try:
            w, vecs = _cluster_components(params, cutoff, tol)
            break
        except TruncationError:
            if not auto or cutoff >= max_cutoff:
                raise
            cutoff = min(max_cutoff, cutoff + 10)
            log.info("raising cluster cutoff to %d", cutoff)
    aw, av = ancilla.ensemble()
    weights, comps = [], []
    for wc, vc in zip(w, vecs):
        for wa, va in zip(aw, av):
            weights.append(wc * wa)
            comps.append(np.multiply.outer(vc, va))
    weights = np.array(weights)
    return ThreeModeState(weights / weights.sum(), tuple(comps), params, ancilla)


# ---------------------------------------------------------------- conditioning


@lru_cache(maxsize=8)
def _moment_ops(c: int) -> np.ndarray:
    """Operators for the raw moments on a basis padded by 4 levels."""
    big = c + 4
    x, p = position(big), momentum(big)
    x2 = x @ x
    ops = np.array([
        x, x2, x2 @ x, x2 @ x2, p, p @ p,
        0.5 * (x @ p + p @ x), 0.5 * (x2 @ p + p @ x2),
    ], dtype=complex)
    ops.setflags(write=False)
    return ops


def _raw_moments(V: np.ndarray) -> np.ndarray:
    """Unnormalised raw moments of the rows of ``V`` (shape (n, c)) -> (n, 8)."""
    c = V.shape[-1]
    Vp = np.pad(V, ((0, 0), (0, 4)))
    ops = _moment_ops(c)
    return np.einsum("ki,mij,kj->km", Vp.conj(), ops, Vp, optimize=True).real


def _shift(raw: np.ndarray, a, b) -> np.ndarray:
    """Raw moments after ``x -> x + a``, ``p -> p + b`` (normalised input)."""
    x, x2, x3, x4, p, p2, xp, x2p = np.moveaxis(raw, -1, 0)
    nx = x + a
    nx2 = x2 + 2 * a * x + a * a
    nx3 = x3 + 3 * a * x2 + 3 * a * a * x + a**3
    nx4 = x4 + 4 * a * x3 + 6 * a * a * x2 + 4 * a**3 * x + a**4
    np_ = p + b
    np2 = p2 + 2 * b * p + b * b
    nxp = xp + b * x + a * p + a * b
    nx2p = x2p + 2 * a * xp + a * a * p + b * nx2
    return np.stack([nx, nx2, nx3, nx4, np_, np2, nxp, nx2p], axis=-1)


def raw_moment_xi(raw: np.ndarray, z: float, adjust: bool = False) -> np.ndarray:
    """xi(z) from normalised raw moments (last axis ordered as ``_MOMENTS``).

    With ``adjust`` the best x-displacement of each state is applied first,
    i.e. the part of ``p + z x^2`` linear in x is projected out.
    """
    x, x2, x3, x4, p, p2, xp, x2p = np.moveaxis(raw, -1, 0)
    mean_o = p + z * x2
    num = p2 + 2 * z * x2p + z * z * x4 - mean_o**2
    if adjust:
        var_x = x2 - x * x
        cov = xp + z * x3 - x * mean_o
        num = num - cov * cov / var_x
    return num / gaussian_min_variance(z)


def _angle(cfg: SchemeConfig, m_x: float) -> tuple[float, float]:
    """Measurement angle of mode A and the cos(phi) factor."""
    if cfg.scheme == "canonical" or cfg.chi == 0.0:
        return math.pi / 2, 1.0
    phi = -math.atan(math.sqrt(2.0) * cfg.chi_eff * m_x)
    return math.pi / 2 - phi, math.cos(phi)


def _mixed(state: ThreeModeState, t: float) -> list[np.ndarray]:
    # modes A and Q share the beam splitter; Q becomes the x-measured port
    out = []
    for psi in state.components:
        moved = np.moveaxis(psi, 2, 1)  # [a, q, b]
        mixed = beamsplitter_blocks(moved, t)
        out.append(np.moveaxis(mixed, 1, 2))  # [a, b, q]
    return out


def _feedforward(cfg: SchemeConfig, m_x, m_p, cos_phi, compensate: bool):
    gain_p = cfg.g_F / cos_phi if compensate else cfg.g_F * cfg.alpha_lin
    return cfg.d_F * m_x, gain_p * m_p


def condition(state: ThreeModeState, cfg: SchemeConfig, m_x: float, m_p: float,
              compensate: bool = True) -> tuple[float, FockDensity]:
    """Born density of ``(m_x, m_p)`` and the displaced conditional state of B."""
    if cfg.scheme not in ("canonical", "nonlinear"):
        raise ValueError("conditioning is defined for canonical and nonlinear teleportation")
    mixed = _mixed(state, cfg.t)
    angle, cos_phi = _angle(cfg, m_x)
    cA, cB, cQ = mixed[0].shape
    hq = hermite_functions(cQ, np.array(m_x))
    pa = quadrature_projector(m_p, angle, cA)
    rho = np.zeros((cB, cB), dtype=complex)
    for w, psi in zip(state.weights, mixed):
        v = np.tensordot(pa, np.tensordot(psi, hq, axes=(2, 0)), axes=(0, 0))
        rho += w * np.outer(v, v.conj())
    prob = float(np.trace(rho).real)
    if prob < 1e-300:
        raise ZeroDivisionError(f"zero-probability outcome at ({m_x}, {m_p})")
    dx, dp = _feedforward(cfg, m_x, m_p, cos_phi, compensate)
    margin = int(4 * (abs(dx) + abs(dp)) ** 2 + 20)
    big = cB + margin
    x, p = position(big), momentum(big)
    D = expm(-1j * (dx * p - dp * x))  # shifts x by dx and p by dp
    R = np.zeros((big, big), dtype=complex)
    R[:cB, :cB] = rho / prob
    R = D @ R @ D.conj().T
    kept = R[:cB, :cB]
    deficit = 1.0 - float(np.trace(kept).real)
    return prob, FockDensity(kept, trace_deficit=deficit)


# ---------------------------------------------------------------- grids


@dataclass(frozen=True)
class MeasurementGrid:
    """Cell-centred outcome grid with per-cell probabilities and moments.

    ``raw`` holds the normalised raw moments of the displaced output of each
    cell; ``state_of(i, j)`` rebuilds the full conditional state on demand.
    """

    mx: np.ndarray
    mp: np.ndarray
    prob: np.ndarray
    raw: np.ndarray
    state_of: Callable[[int, int], FockDensity] = field(repr=False, compare=False)

    @property
    def dx(self) -> float:
        return float(self.mx[1] - self.mx[0])

    @property
    def dp(self) -> float:
        return float(self.mp[1] - self.mp[0])

    @property
    def range_x(self) -> float:
        return float(self.mx[-1] - self.mx[0] + self.dx) / 2

    @property
    def range_p(self) -> float:
        return float(self.mp[-1] - self.mp[0] + self.dp) / 2

    @property
    def mass(self) -> float:
        return float(self.prob.sum())

    @property
    def cells(self) -> list[tuple[float, float, float, Callable[[], FockDensity]]]:
        out = []
        for i, a in enumerate(self.mx):
            for j, b in enumerate(self.mp):
                out.append((float(a), float(b), float(self.prob[i, j]),
                            lambda i=i, j=j: self.state_of(i, j)))
        return out

    def xi(self, z: float, adjust: bool = False) -> np.ndarray:
        return raw_moment_xi(self.raw, z, adjust)

    def mixture_raw(self, mask: np.ndarray | None = None) -> np.ndarray:
        w = self.prob if mask is None else self.prob * mask
        return np.tensordot(w, self.raw, axes=([0, 1], [0, 1])) / w.sum()

    def records(self, z: float, adjust: bool = False) -> list[dict]:
        xi = self.xi(z, adjust)
        return [
            {"m_x": float(a), "m_p": float(b), "probability": float(self.prob[i, j]),
             "xi_cell": float(xi[i, j])}
            for i, a in enumerate(self.mx) for j, b in enumerate(self.mp)
        ]


def _marginal_widths(state: ThreeModeState, cfg: SchemeConfig) -> tuple[float, float, float]:
    """Rough standard deviations of m_x and m_p and the mean of m_x."""
    g = build_cluster(state.cluster).gamma
    mu = build_cluster(state.cluster).mean
    c = state.ancilla.cutoff + 4
    rho = state.ancilla.padded(c).matrix()
    x, p = position(c), momentum(c)
    E = lambda A: float(np.trace(rho @ A).real)  # noqa: E731
    vqx = E(x @ x) - E(x) ** 2
    vqp = E(p @ p) - E(p) ** 2
    t, r = cfg.t, cfg.r
    var_mx = t * t * vqx + r * r * g[0, 0]
    mean_mx = t * E(x) - r * mu[0]
    var_xa = t * t * g[0, 0] + r * r * vqx
    var_mp = t * t * g[1, 1] + r * r * vqp
    if cfg.scheme == "nonlinear":
        var_mp += 2.0 * cfg.chi_eff**2 * (var_mx + mean_mx**2) * var_xa
    return math.sqrt(var_mx), math.sqrt(var_mp), mean_mx


def build_grid(
    state: ThreeModeState,
    cfg: SchemeConfig,
    n_sigma: float = 6.0,
    per_sigma: int = 8,
    compensate: bool = True,
    mass_target: float = MASS_TARGET,
    max_expansions: int = 4,
) -> MeasurementGrid:
    """Evaluate every outcome cell, widening the grid until the mass target holds."""
    if cfg.scheme not in ("canonical", "nonlinear"):
        raise ValueError("grids are defined for canonical and nonlinear teleportation")
    sx, sp, mx0 = _marginal_widths(state, cfg)
    mixed = _mixed(state, cfg.t)
    for _ in range(max_expansions + 1):
        grid = _evaluate(state, mixed, cfg, mx0, sx, sp, n_sigma, per_sigma, compensate)
        if grid.mass >= mass_target:
            return grid
        log.info("grid mass %.6f below %.4f, widening", grid.mass, mass_target)
        n_sigma *= 1.5
    raise RuntimeError(f"grid mass {grid.mass:.6f} stays below {mass_target}")


def _axis(center: float, sigma: float, n_sigma: float, per_sigma: int) -> np.ndarray:
    step = sigma / per_sigma
    k = int(math.ceil(n_sigma * per_sigma))
    return center + step * np.arange(-k, k + 1)


def _evaluate(state, mixed, cfg, mx0, sx, sp, n_sigma, per_sigma, compensate) -> MeasurementGrid:
    mx = _axis(mx0, sx, n_sigma, per_sigma)
    mp = _axis(0.0, sp, n_sigma, per_sigma)
    cA, cB, cQ = mixed[0].shape
    hq = hermite_functions(cQ, mx)  # (cQ, n_x)
    ha = hermite_functions(cA, mp).T  # (n_p, cA)
    cell = (mx[1] - mx[0]) * (mp[1] - mp[0])
    prob = np.zeros((len(mx), len(mp)))
    raw = np.zeros((len(mx), len(mp), len(_MOMENTS)))
    levels = np.arange(cA)
    for i, m in enumerate(mx):
        angle, cos_phi = _angle(cfg, m)
        P = ha * np.exp(-1j * angle * levels)
        acc = np.zeros((len(mp), len(_MOMENTS)))
        dens = np.zeros(len(mp))
        for w, psi in zip(state.weights, mixed):
            V = P @ (psi @ hq[:, i])  # (n_p, cB)
            acc += w * _raw_moments(V)
            dens += w * np.einsum("ki,ki->k", V.conj(), V).real
        with np.errstate(invalid="ignore", divide="ignore"):
            normed = acc / dens[:, None]
        dx, dp = _feedforward(cfg, m, mp, cos_phi, compensate)
        raw[i] = _shift(normed, dx, dp)
        prob[i] = dens * cell
    bad = prob <= 1e-300
    raw[bad] = np.nan

    def state_of(i: int, j: int) -> FockDensity:
        return condition(state, cfg, float(mx[i]), float(mp[j]), compensate)[1]

    return MeasurementGrid(mx, mp, prob, raw, state_of)


# ---------------------------------------------------------------- post-selection


@dataclass(frozen=True)
class PostSelection:
    target_probability: float = 1.0
    mode: str = AGGREGATE_STATES
    z: float = 0.5
    adjust: bool = False

    def __post_init__(self):
        if not 0.0 < self.target_probability <= 1.0:
            raise ValueError("target probability must lie in (0, 1]")
        if self.mode not in (AGGREGATE_STATES, AGGREGATE_XI):
            raise ValueError(f"unknown aggregation mode {self.mode!r}")
        if self.z == 0:
            raise ValueError("query cubicity must be non-zero")


@dataclass(frozen=True)
class CurvePoint:
    P: float
    xi: float
    mode: str

    @property
    def xi_db(self) -> float:
        return 10.0 * math.log10(self.xi) if self.xi > 0 else -math.inf

    def to_record(self) -> dict:
        return {"P": self.P, "xi": self.xi, "xi_db": self.xi_db, "mode": self.mode}


def _sorted_cells(grid: MeasurementGrid, z: float, adjust: bool):
    xi = grid.xi(z, adjust).ravel()
    prob = grid.prob.ravel()
    ok = np.isfinite(xi) & (prob > 1e-300)
    order = np.argsort(xi[ok], kind="stable")
    raw = grid.raw.reshape(-1, grid.raw.shape[-1])[ok][order]
    return xi[ok][order], prob[ok][order], raw


def postselect(grid: MeasurementGrid, sel: PostSelection,
               p_grid: np.ndarray | None = None) -> list[CurvePoint]:
    """xi of the best cells aggregated up to each probability in ``p_grid``.

    Probabilities are relative to the captured grid mass, so P = 1 means the
    whole grid.  Without ``p_grid`` a single point at ``sel.target_probability``
    is returned.
    """
    xi, prob, raw = _sorted_cells(grid, sel.z, sel.adjust)
    cum = np.cumsum(prob) / prob.sum()
    if p_grid is None:
        p_grid = np.array([sel.target_probability])
    out = []
    for P in np.asarray(p_grid, dtype=float):
        k = int(min(np.searchsorted(cum, P - 1e-12), len(cum) - 1)) + 1
        w = prob[:k]
        if sel.mode == AGGREGATE_XI:
            val = float(np.dot(w, xi[:k]) / w.sum())
        else:
            mix = np.tensordot(w, raw[:k], axes=1) / w.sum()
            val = float(raw_moment_xi(mix, sel.z, sel.adjust))
        out.append(CurvePoint(float(P), val, sel.mode))
    return out


def prefix_curve(grid: MeasurementGrid, sel: PostSelection) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative probability and aggregated xi after every sorted cell."""
    xi, prob, raw = _sorted_cells(grid, sel.z, sel.adjust)
    cw = np.cumsum(prob)
    if sel.mode == AGGREGATE_XI:
        return cw / cw[-1], np.cumsum(prob * xi) / cw
    mix = np.cumsum(prob[:, None] * raw, axis=0) / cw[:, None]
    return cw / cw[-1], raw_moment_xi(mix, sel.z, sel.adjust)
