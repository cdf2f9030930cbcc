"""Two-mode Gaussian cluster states built from squeezed thermal inputs.

Quadratures are ordered ``(x_A, p_A, x_B, p_B)`` with ``[x, p] = i`` so the
vacuum has variance 1/2.  A squeezing parameter ``r`` scales a quadrature
variance by ``exp(r)`` (amplitude factor ``g = exp(r/2)``), hence
``squeezing_db(r) = 10*log10(exp(r))``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "ClusterParams",
    "CovarianceState",
    "SqueezingBoundError",
    "beamsplitter_matrix",
    "build_cluster",
    "db_to_squeezing",
    "local_rotation_matrix",
    "omega",
    "rotation_matrix",
    "squeezer_matrix",
    "squeezing_db",
    "symplectic_check",
    "symplectic_eigenvalues",
]

_LN10 = math.log(10.0)


class SqueezingBoundError(ValueError):
    """A squeezer exceeds the configured Gaussian squeezing budget."""


def squeezing_db(r):
    """Squeezing parameter -> dB of the variance ratio ``exp(r)``."""
    return np.multiply(r, 10.0 / _LN10)


def db_to_squeezing(db):
    """Inverse of :func:`squeezing_db`."""
    return np.multiply(db, _LN10 / 10.0)


def omega(n_modes: int = 2) -> np.ndarray:
    """Symplectic form for interleaved ``(x1, p1, x2, p2, ...)`` ordering."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_check(M, atol: float = 1e-12) -> bool:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise ValueError(f"expected an even-dimensional square matrix, got {M.shape}")
    W = omega(M.shape[0] // 2)
    return bool(np.allclose(M @ W @ M.T, W, rtol=0.0, atol=atol))


def squeezer_matrix(r1: float, r2: float) -> np.ndarray:
    """``S``: mode A squeezed in x, mode B squeezed in p for positive r."""
    g1, g2 = math.exp(r1 / 2), math.exp(r2 / 2)
    return np.diag([1 / g1, g1, g2, 1 / g2])


def beamsplitter_matrix(t: float) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {t}")
    r = math.sqrt(1.0 - t * t)
    return np.array(
        [[t, 0, r, 0], [0, t, 0, r], [-r, 0, t, 0], [0, -r, 0, t]], dtype=float
    )


def _rot2(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, s], [-s, c]])


def rotation_matrix(phi: float) -> np.ndarray:
    """Phase rotation of mode A only."""
    R = np.eye(4)
    R[:2, :2] = _rot2(phi)
    return R


def local_rotation_matrix(phi1: float, phi2: float) -> np.ndarray:
    R = np.zeros((4, 4))
    R[:2, :2] = _rot2(phi1)
    R[2:, 2:] = _rot2(phi2)
    return R


@dataclass(frozen=True)
class ClusterParams:
    """Generation parameters of the two-mode cluster state.

    ``alpha1``/``alpha2`` are x-quadrature means of modes A and B, applied
    after the Gaussian circuit.  ``n`` is the added thermal noise in units
    of vacuum noise.
    """

    r1: float = 0.0
    r2: float = 0.0
    phi: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0
    t_c: float = 1.0
    alpha1: float = 0.0
    alpha2: float = 0.0
    n: float = 0.0

    @property
    def r_c(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.t_c**2))

    def validate(self, s_max_db: float | None = None) -> None:
        if self.n < 0:
            raise ValueError(f"thermal noise n must be >= 0, got {self.n}")
        if not 0.0 <= self.t_c <= 1.0:
            raise ValueError(f"t_c must lie in [0, 1], got {self.t_c}")
        if s_max_db is not None:
            for name in ("r1", "r2"):
                db = abs(squeezing_db(getattr(self, name)))
                if db > s_max_db + 1e-9:
                    raise SqueezingBoundError(
                        f"{name} = {db:.4f} dB exceeds the bound {s_max_db} dB"
                    )

    def to_record(self) -> dict[str, float]:
        return {k: float(v) for k, v in asdict(self).items()}

    @classmethod
    def from_record(cls, record: dict) -> "ClusterParams":
        known = set(cls.__dataclass_fields__)
        unknown = set(record) - known
        if unknown:
            raise KeyError(f"unknown ClusterParams keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in record.items()})

    @classmethod
    def two_mode_squeezed(cls, db: float, n: float = 0.0) -> "ClusterParams":
        """EPR-type state with ``x_A - x_B`` and ``p_A + p_B`` squeezed."""
        r = db_to_squeezing(db)
        return cls(r1=r, r2=r, t_c=1 / math.sqrt(2), n=n)


@dataclass(frozen=True)
class CovarianceState:
    gamma: np.ndarray
    mean: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        m = np.asarray(self.mean, dtype=float)
        if g.shape != (4, 4) or m.shape != (4,):
            raise ValueError("expected a 4x4 covariance and a 4-vector mean")
        g.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "mean", m)

    def is_physical(self, tol: float = 1e-10) -> bool:
        if not np.allclose(self.gamma, self.gamma.T, atol=1e-12):
            return False
        eig = np.linalg.eigvalsh(self.gamma + 0.5j * omega(2))
        return bool(eig.min() >= -tol)

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.gamma)

    def purity(self) -> float:
        # vacuum variance 1/2 -> pure states have det(gamma) = 1/16
        return 1.0 / (4.0 * math.sqrt(np.linalg.det(self.gamma)))


def symplectic_eigenvalues(gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    ev = np.linalg.eigvals(1j * omega(gamma.shape[0] // 2) @ gamma)
    return np.sort(np.abs(ev))[::2]


def build_cluster(params: ClusterParams, s_max_db: float | None = None) -> CovarianceState:
    """Covariance and mean of the cluster state generated by ``params``.

    gamma = R12 S_BS R1 S gamma_in S^T R1^T S_BS^T R12^T with a thermal input
    gamma_in = (1 + n)/2 * I.
    """
    params.validate(s_max_db)
    M = (
        local_rotation_matrix(params.phi1, params.phi2)
        @ beamsplitter_matrix(params.t_c)
        @ rotation_matrix(params.phi)
        @ squeezer_matrix(params.r1, params.r2)
    )
    gamma = 0.5 * (1.0 + params.n) * (M @ M.T)
    gamma = 0.5 * (gamma + gamma.T)
    mean = np.array([params.alpha1, 0.0, params.alpha2, 0.0])
    return CovarianceState(gamma, mean)
