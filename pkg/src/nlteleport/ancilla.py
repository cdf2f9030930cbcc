"""Non-Gaussian input states carrying cubic nonlinear squeezing.

Three families are supported: the vacuum/single-photon superposition
``u|0> + i sqrt(1-u^2)|1>``, the three-level state ``c0|0> + i c1|1> + c2|2>``
and the cubic-phase-transformed squeezed vacuum ``C(chi) S(r)|0>`` with
``C(chi) = exp(-i chi x^3 / 3)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from .fock import FockDensity, TruncationError, momentum, position, squeezed_vacuum
from .gaussian import squeezing_db
from .metrics import native_cubicity_closed_form, xi_from_moments

__all__ = [
    "AncillaMoments",
    "AncillaSpec",
    "SubspaceState",
    "build_fock",
    "moments_cubic",
    "moments_from_fock",
    "moments_two_component",
    "optimal_subspace_state",
    "restricted_eigenstates",
]

KINDS = ("two-component", "three-component", "cubic-finite")


@dataclass(frozen=True)
class AncillaSpec:
    kind: str = "two-component"
    u: float = 0.79
    c0: float = 1.0
    c1: float = 0.0
    c2: float = 0.0
    chi_state: float = 0.0
    r_state: float = 0.0

    def validate(self, s_max_db: float | None = None) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown ancilla kind {self.kind!r}")
        if self.kind == "two-component" and not 0.0 < self.u <= 1.0:
            raise ValueError(f"u must lie in (0, 1], got {self.u}")
        if self.kind == "three-component":
            norm = self.c0**2 + self.c1**2 + self.c2**2
            if abs(norm - 1.0) > 1e-12:
                raise ValueError(f"c0^2 + c1^2 + c2^2 = {norm}, expected 1")
        if s_max_db is not None and abs(squeezing_db(self.r_state)) > s_max_db + 1e-9:
            raise ValueError(f"r_state exceeds the {s_max_db} dB squeezing bound")

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record: dict) -> "AncillaSpec":
        unknown = set(record) - set(cls.__dataclass_fields__)
        if unknown:
            raise KeyError(f"unknown AncillaSpec keys: {sorted(unknown)}")
        vals = {k: (v if k == "kind" else float(v)) for k, v in record.items()}
        return cls(**vals)


@dataclass(frozen=True)
class AncillaMoments:
    """Single-mode moment summary; covariances are symmetrised."""

    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_xp: float
    ex2: float
    var_x2: float
    cov_x2_p: float
    cov_x_x2: float

    def satisfies_assumptions(self, tol: float = 1e-9) -> bool:
        """Zero x-mean, no x-p and no x-x^2 correlation."""
        return (
            abs(self.mean_x) < tol and abs(self.cov_xp) < tol and abs(self.cov_x_x2) < tol
        )


def moments_two_component(u: float) -> AncillaMoments:
    if not 0.0 < u <= 1.0:
        raise ValueError(f"u must lie in (0, 1], got {u}")
    s2 = 1.0 - u * u
    return AncillaMoments(
        mean_x=0.0,
        mean_p=math.sqrt(2.0 * s2) * u,
        var_x=1.5 - u * u,
        var_p=2 * u**4 - 3 * u**2 + 1.5,
        cov_xp=0.0,
        ex2=1.5 - u * u,
        var_x2=1.5 - u**4,
        cov_x2_p=math.sqrt(2.0 * s2) * u * (u * u - 1.0),
        cov_x_x2=0.0,
    )


def moments_cubic(chi: float, r: float) -> AncillaMoments:
    """Moments of ``C(chi) S(r)|0>`` with ``var(x) = exp(r)/2`` before the gate.

    The gate maps p to ``p - chi x^2`` and leaves x Gaussian with variance V.
    """
    V = 0.5 * math.exp(r)
    return AncillaMoments(
        mean_x=0.0,
        mean_p=-chi * V,
        var_x=V,
        var_p=1.0 / (4.0 * V) + 2.0 * chi * chi * V * V,
        cov_xp=0.0,
        ex2=V,
        var_x2=2.0 * V * V,
        cov_x2_p=-2.0 * chi * V * V,
        cov_x_x2=0.0,
    )


def _sym(A, B):
    return 0.5 * (A @ B + B @ A)


def moments_from_fock(state: FockDensity | np.ndarray, tol: float = 1e-8) -> AncillaMoments:
    """Operator expectation values with ``x = (a + a^dag)/sqrt(2)``.

    The state is embedded in a basis four levels larger so that every
    product up to x^4 is exact for the truncated state.
    """
    if not isinstance(state, FockDensity):
        state = FockDensity(np.asarray(state, dtype=complex))
    tr = state.trace()
    if abs(tr - 1.0) > tol:
        raise ValueError(f"state is not normalised: trace = {tr}")
    big = state.padded(state.cutoff + 4)
    c = big.cutoff
    x, p = position(c), momentum(c)
    x2 = x @ x
    if big.is_pure:
        psi = big.data
        E = lambda A: float(np.vdot(psi, A @ psi).real)  # noqa: E731
    else:
        rho = big.data
        E = lambda A: float(np.trace(rho @ A).real)  # noqa: E731
    mx, mp, ex2 = E(x), E(p), E(x2)
    return AncillaMoments(
        mean_x=mx,
        mean_p=mp,
        var_x=ex2 - mx * mx,
        var_p=E(p @ p) - mp * mp,
        cov_xp=E(_sym(x, p)) - mx * mp,
        ex2=ex2,
        var_x2=E(x2 @ x2) - ex2 * ex2,
        cov_x2_p=E(_sym(x2, p)) - ex2 * mp,
        cov_x_x2=E(x2 @ x) - mx * ex2,
    )


def _cubic_fock(chi: float, r: float, cutoff: int, guard: int, tol: float) -> np.ndarray:
    work = max(guard * cutoff, cutoff + 20)
    psi = squeezed_vacuum(r, work)
    if abs(chi) > 0:
        x = position(work)
        psi = expm(-1j * chi / 3.0 * (x @ x @ x)) @ psi
    tail = float(np.sum(np.abs(psi[cutoff:]) ** 2))
    if tail > tol:
        raise TruncationError(tail, tol, cutoff)
    out = psi[:cutoff]
    return out / np.linalg.norm(out)


def build_fock(spec: AncillaSpec, cutoff: int, guard: int = 3, tol: float = 1e-8) -> FockDensity:
    """Pure Fock vector of the ancilla.

    The cubic gate is exponentiated in a basis ``guard`` times larger than
    the requested cutoff, since x^3 couples distant levels.
    """
    spec.validate()
    if spec.kind == "two-component":
        if cutoff < 2:
            raise TruncationError(1.0 - spec.u**2, tol, cutoff)
        psi = np.zeros(cutoff, dtype=complex)
        psi[0] = spec.u
        psi[1] = 1j * math.sqrt(1.0 - spec.u**2)
    elif spec.kind == "three-component":
        if cutoff < 3:
            raise TruncationError(spec.c2**2, tol, cutoff)
        psi = np.zeros(cutoff, dtype=complex)
        psi[:3] = [spec.c0, 1j * spec.c1, spec.c2]
    else:
        psi = _cubic_fock(spec.chi_state, spec.r_state, cutoff, guard, tol)
    return FockDensity(psi)


def ancilla_moments(spec: AncillaSpec) -> AncillaMoments:
    """Moment summary used by the analytic pipeline."""
    if spec.kind == "two-component":
        return moments_two_component(spec.u)
    if spec.kind == "cubic-finite":
        return moments_cubic(spec.chi_state, spec.r_state)
    return moments_from_fock(build_fock(spec, 3))


@dataclass(frozen=True)
class SubspaceState:
    """Optimal real coefficients of ``c0|0> + i c1|1> (+ c2|2>)``."""

    coefficients: np.ndarray
    z: float
    xi: float

    @property
    def u(self) -> float:
        return float(self.coefficients[0])

    def spec(self) -> AncillaSpec:
        c = self.coefficients
        if len(c) == 2:
            return AncillaSpec("two-component", u=float(c[0]))
        return AncillaSpec("three-component", c0=float(c[0]), c1=float(c[1]), c2=float(c[2]))


def _coeffs(angles: np.ndarray, dim: int) -> np.ndarray:
    if dim == 2:
        return np.array([math.cos(angles[0]), math.sin(angles[0])])
    a, b = angles
    return np.array([math.cos(a), math.sin(a) * math.cos(b), math.sin(a) * math.sin(b)])


def _subspace_moments(c: np.ndarray) -> AncillaMoments:
    psi = np.zeros(len(c), dtype=complex)
    psi[0] = c[0]
    psi[1] = 1j * c[1]
    if len(c) == 3:
        psi[2] = c[2]
    return moments_from_fock(psi)


def optimal_subspace_state(z: float | None, dim: int) -> SubspaceState:
    """Coefficients minimising xi on the first ``dim`` Fock levels.

    With ``z=None`` the cubicity is optimised as well, so the result is
    evaluated at its own native cubicity.
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    if z is not None and z == 0:
        raise ValueError("z must be non-zero")

    def objective(angles):
        m = _subspace_moments(_coeffs(angles, dim))
        if z is None:
            return native_cubicity_closed_form(m.var_p, 2 * m.cov_x2_p, m.var_x2)[1]
        return xi_from_moments(m, z).xi

    n_par = dim - 1
    best = None
    starts = np.linspace(0.05, math.pi - 0.05, 12)
    for s in starts:
        x0 = np.full(n_par, s) if n_par == 1 else np.array([s, 0.3])
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    c = _coeffs(best.x, dim)
    if c[0] < 0:
        c = -c
    if z is None and c[1] < 0:
        # complex conjugation maps z -> -z; report the +i|1> representative
        c[1] = -c[1]
    m = _subspace_moments(c)
    if z is None:
        z_used = native_cubicity_closed_form(m.var_p, 2 * m.cov_x2_p, m.var_x2)[0]
    else:
        z_used = z
    return SubspaceState(c, float(z_used), xi_from_moments(m, z_used).xi)


def restricted_eigenstates(z: float, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of ``p + z x^2`` projected onto the first ``dim`` Fock levels."""
    c = dim + 2
    x, p = position(c), momentum(c)
    O = (p + z * x @ x)[:dim, :dim]
    return np.linalg.eigh(O)
