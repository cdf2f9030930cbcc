"""Structural invariant suite shared by ``nlteleport validate`` and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ancilla import AncillaSpec, build_fock, moments_two_component
from .fock import loss_channel
from .focksim import (
    AGGREGATE_STATES,
    AGGREGATE_XI,
    PostSelection,
    build_grid,
    gaussian_to_fock,
    prefix_curve,
    prepare,
    raw_moment_xi,
    two_mode_moments,
)
from .gaussian import (
    ClusterParams,
    beamsplitter_matrix,
    build_cluster,
    local_rotation_matrix,
    rotation_matrix,
    squeezer_matrix,
    symplectic_check,
)
from .metrics import gaussian_min_variance
from .moments import SchemeConfig, output_moments

__all__ = ["Check", "random_cluster", "run_all"]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""
    counts: bool = True  # informational checks do not affect the exit code

    def line(self) -> str:
        tag = "PASS" if self.passed else ("FAIL" if self.counts else "NOTE")
        return f"{tag} {self.name}: {self.detail}"


def random_cluster(rng: np.random.Generator, max_db: float = 8.0, n: float = 0.0,
                   mean_scale: float = 0.5) -> ClusterParams:
    rm = max_db * math.log(10) / 10
    return ClusterParams(
        r1=rng.uniform(-rm, rm), r2=rng.uniform(-rm, rm),
        phi=rng.uniform(-math.pi, math.pi), phi1=rng.uniform(-math.pi, math.pi),
        phi2=rng.uniform(-math.pi, math.pi), t_c=rng.uniform(0, 1),
        alpha1=rng.normal(0, mean_scale), alpha2=rng.normal(0, mean_scale), n=n,
    )


def _symplectic(rng) -> Check:
    worst = 0
    for _ in range(50):
        a = rng.uniform(-3, 3, 5)
        for M in (squeezer_matrix(a[0], a[1]), beamsplitter_matrix(abs(math.tanh(a[2]))),
                  rotation_matrix(a[3]), local_rotation_matrix(a[3], a[4])):
            worst += not symplectic_check(M)
        worst += not build_cluster(random_cluster(rng, 12.0, abs(a[4]))).is_physical()
    return Check("symplectic and physicality checks", worst == 0, f"{worst} violations in 250 matrices")


def _fock_moments(rng, cutoff) -> Check:
    errs = []
    for n in (0.0, 0.1):
        p = random_cluster(rng, 4.0, n, mean_scale=0.3)
        g, m = two_mode_moments(gaussian_to_fock(p, cutoff))
        c = build_cluster(p)
        errs.append(max(np.abs(g - c.gamma).max(), np.abs(m - c.mean).max()))
    return Check("Fock cluster reproduces covariance and mean", max(errs) < 1e-6,
                 f"max deviation {max(errs):.2e}")


def _densities(rng, cutoff) -> list[Check]:
    anc = build_fock(AncillaSpec(u=0.79), 2)
    lossy = loss_channel(anc, 0.75)
    loss_ok = abs(lossy.trace() - 1) < 1e-10 and lossy.is_valid()
    state = prepare(ClusterParams.two_mode_squeezed(6.0, n=0.1), lossy, cutoff)
    cfg = SchemeConfig("nonlinear", chi=0.2)
    grid = build_grid(state, cfg)
    bad = 0
    picks = rng.choice(grid.prob.size, size=8, replace=False, p=grid.prob.ravel() / grid.mass)
    for k in picks:
        i, j = np.unravel_index(k, grid.prob.shape)
        rho = grid.state_of(int(i), int(j))
        tr = rho.trace() + rho.trace_deficit
        bad += not (rho.is_valid(1e-10) and abs(tr - 1) < 1e-9)
    return [
        Check("loss channel keeps a valid unit-trace state", loss_ok),
        Check("conditional states are PSD with unit trace", bad == 0, f"{bad} of 8 sampled cells invalid"),
        Check("grid probability mass", 0.999 <= grid.mass <= 1 + 1e-6, f"mass {grid.mass:.8f}"),
    ]


def _monotone(cutoff) -> list[Check]:
    anc = build_fock(AncillaSpec(u=0.79), 2)
    state = prepare(ClusterParams.two_mode_squeezed(6.0), anc, cutoff)
    z = 0.4898
    out = []
    for scheme, chi in (("canonical", 0.0), ("nonlinear", 0.219)):
        grid = build_grid(state, SchemeConfig(scheme, chi=chi))
        for mode in (AGGREGATE_XI, AGGREGATE_STATES):
            _, xi = prefix_curve(grid, PostSelection(1.0, mode, z))
            step = float(np.min(np.diff(xi)))
            out.append(Check(f"prefix monotonicity {scheme} {mode}", step >= -1e-12,
                             f"smallest step {step:.3e}", counts=(mode == AGGREGATE_XI)))
    return out


def _cross_backend(rng, cutoff) -> Check:
    p = random_cluster(rng, 6.0, mean_scale=0.3)
    u = rng.uniform(0.6, 0.95)
    cfg = SchemeConfig("nonlinear", t=rng.uniform(0.3, 0.9), d_F=rng.uniform(0.5, 1.5),
                       g_F=rng.uniform(0.5, 1.5), chi=rng.uniform(-0.3, 0.3))
    z = 0.5
    state = prepare(p, build_fock(AncillaSpec(u=u), 2), cutoff)
    fock_xi = float(raw_moment_xi(build_grid(state, cfg).mixture_raw(), z))
    mom = output_moments(build_cluster(p), moments_two_component(u), cfg, z).numerator
    mom_xi = mom / gaussian_min_variance(z)
    rel = abs(fock_xi - mom_xi) / mom_xi
    return Check("moment engine vs Fock mixture", rel < 0.02, f"relative difference {rel:.2e}")


def run_all(cutoff: int = 30, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = [_symplectic(rng), _fock_moments(rng, cutoff)]
    checks += _densities(rng, cutoff)
    checks += _monotone(cutoff)
    checks.append(_cross_backend(rng, cutoff))
    return checks
