"""Truncated Fock-space operators, quadrature wavefunctions and channels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

__all__ = [
    "FockDensity",
    "TruncationError",
    "annihilation",
    "beamsplitter_blocks",
    "displacement",
    "hermite_functions",
    "loss_channel",
    "momentum",
    "position",
    "quadrature_projector",
    "squeezed_vacuum",
    "squeezing_operator",
    "tail_mass",
]


class TruncationError(ValueError):
    """Population near the Fock cutoff exceeds the allowed tail."""

    def __init__(self, tail: float, bound: float, cutoff: int):
        super().__init__(f"tail mass {tail:.3e} above {bound:.1e} at cutoff {cutoff}")
        self.tail = tail
        self.bound = bound
        self.cutoff = cutoff


@lru_cache(maxsize=64)
def _ladder(cutoff: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), 1)
    a.setflags(write=False)
    return a


def annihilation(cutoff: int) -> np.ndarray:
    return _ladder(cutoff).copy()


def position(cutoff: int) -> np.ndarray:
    a = _ladder(cutoff)
    return (a + a.T) / math.sqrt(2)


def momentum(cutoff: int) -> np.ndarray:
    a = _ladder(cutoff)
    return (a - a.T) / (1j * math.sqrt(2))


def hermite_functions(n_max: int, x) -> np.ndarray:
    """Oscillator eigenfunctions ``psi_n(x)`` for n < n_max, shape (n_max, *x.shape).

    Normalised for vacuum variance 1/2, i.e. ``psi_0 = pi**-0.25 exp(-x^2/2)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max,) + x.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * x * x)
    if n_max > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def quadrature_projector(m, angle: float, cutoff: int, tol: float = 1e-8) -> np.ndarray:
    """Overlaps ``<x_angle = m | n>`` for ``x_angle = x cos(angle) + p sin(angle)``.

    angle 0 gives position eigenstates, pi/2 momentum eigenstates.
    """
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m) > math.sqrt(2 * cutoff + 1) + 6.0):
        raise ValueError(f"|m| beyond the reliable Hermite range for cutoff {cutoff}")
    h = hermite_functions(cutoff, m)
    phase = np.exp(-1j * angle * np.arange(cutoff))
    return np.moveaxis(h, 0, -1) * phase


def tail_mass(psi: np.ndarray, keep: int) -> float:
    """Probability weight of a pure single-mode state on levels >= keep."""
    return float(np.sum(np.abs(psi[keep:]) ** 2))


def squeezed_vacuum(r: float, cutoff: int) -> np.ndarray:
    """Amplitudes of a p-squeezed vacuum with ``var(x) = exp(r)/2``.

    Positive r stretches x.  Uses the closed form
    ``c_2k = (-tanh s)^k sqrt((2k)!)/(2^k k!) / sqrt(cosh s)`` with s = -r/2.
    """
    s = -r / 2.0
    th = math.tanh(s)
    psi = np.zeros(cutoff)
    c = 1.0 / math.sqrt(math.cosh(s))
    for k in range(0, (cutoff + 1) // 2):
        if 2 * k >= cutoff:
            break
        psi[2 * k] = c
        c *= -th * math.sqrt((2 * k + 1) * (2 * k + 2)) / (2 * (k + 1))
    return psi.astype(complex)


def squeezing_operator(s: float, cutoff: int) -> np.ndarray:
    """``exp(s (a^2 - a^dag^2)/2)`` on the truncated space; x -> exp(-s) x."""
    a = _ladder(cutoff)
    return expm(0.5 * s * (a @ a - a.T @ a.T))


def displacement(beta: complex, cutoff: int) -> np.ndarray:
    a = _ladder(cutoff)
    return expm(beta * a.T - np.conj(beta) * a)


@lru_cache(maxsize=16)
def _bs_block(total: int, theta: float) -> np.ndarray:
    # basis |k, total-k>, k = 0..total; generator a^dag b - a b^dag
    k = np.arange(total + 1)
    off = np.sqrt((k[:-1] + 1.0) * (total - k[:-1]))
    G = np.zeros((total + 1, total + 1))
    G[k[1:], k[:-1]] = off   # a^dag b raises k
    G[k[:-1], k[1:]] = -off  # -a b^dag lowers k
    U = expm(theta * G)
    U.setflags(write=False)
    return U


def beamsplitter_blocks(psi: np.ndarray, t: float, out_cutoff: int | None = None) -> np.ndarray:
    """Apply ``exp(theta (a^dag b - a b^dag))``, ``cos(theta) = t``, to ``psi[a, b, ...]``.

    In the Heisenberg picture ``a -> t a + r b`` and ``b -> t b - r a``.  Each
    photon-number block is exponentiated exactly, so nothing is lost as long
    as ``out_cutoff`` covers the largest total photon number.
    """
    ca, cb = psi.shape[:2]
    rest = psi.shape[2:]
    nmax = ca + cb - 2
    out_cutoff = out_cutoff or nmax + 1
    theta = math.acos(min(1.0, max(-1.0, t)))
    out = np.zeros((out_cutoff, out_cutoff) + rest, dtype=complex)
    for total in range(nmax + 1):
        ka = np.arange(max(0, total - cb + 1), min(ca - 1, total) + 1)
        if ka.size == 0:
            continue
        vin = psi[ka, total - ka]
        U = _bs_block(total, round(theta, 15))
        vout = np.tensordot(U[:, ka], vin, axes=(1, 0))
        ko = np.arange(total + 1)
        keep = (ko < out_cutoff) & (total - ko < out_cutoff)
        out[ko[keep], total - ko[keep]] = vout[keep]
    return out


@dataclass(frozen=True)
class FockDensity:
    """State on a truncated Fock basis (vector if pure).

    Multi-mode states are stored flattened in C order, so a two-mode pure
    state has ``data.shape == (cutoff**2,)``.
    """

    data: np.ndarray
    trace_deficit: float = 0.0
    modes: int = 1

    @property
    def cutoff(self) -> int:
        return int(round(self.data.shape[0] ** (1.0 / self.modes)))

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def trace(self) -> float:
        if self.is_pure:
            return float(np.vdot(self.data, self.data).real)
        return float(np.trace(self.data).real)

    def is_valid(self, tol: float = 1e-10) -> bool:
        rho = self.matrix()
        if not np.allclose(rho, rho.conj().T, atol=tol):
            return False
        return bool(np.linalg.eigvalsh(rho).min() >= -tol)

    def purity(self) -> float:
        rho = self.matrix()
        return float(np.real(np.trace(rho @ rho)))

    def ensemble(self, tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
        """Pure decomposition ``(weights, vectors)``, vectors along axis 0."""
        if self.is_pure:
            nrm = np.vdot(self.data, self.data).real
            return np.array([nrm]), (self.data / math.sqrt(nrm))[None, :]
        w, v = np.linalg.eigh(self.matrix())
        keep = w > tol
        return w[keep], v[:, keep].T

    def padded(self, cutoff: int) -> "FockDensity":
        if self.modes != 1:
            raise ValueError("padding is only defined for single-mode states")
        if cutoff < self.cutoff:
            raise ValueError("padding cannot shrink the basis")
        pad = cutoff - self.cutoff
        if self.is_pure:
            return FockDensity(np.pad(self.data, (0, pad)), self.trace_deficit)
        return FockDensity(np.pad(self.data, ((0, pad), (0, pad))), self.trace_deficit)


def loss_channel(state: FockDensity, eta: float) -> FockDensity:
    """Pure-loss channel with transmission ``eta`` (beam splitter with vacuum)."""
    if state.modes != 1:
        raise ValueError("loss_channel acts on single-mode states")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {eta}")
    rho = state.matrix()
    c = rho.shape[0]
    n = np.arange(c)
    out = np.zeros_like(rho, dtype=complex)
    for k in range(c):
        # E_k |n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k>
        amp = np.zeros(c)
        valid = n >= k
        nv = n[valid]
        amp[valid] = np.sqrt(
            np.array([math.comb(int(j), k) for j in nv], dtype=float)
            * eta ** (nv - k)
            * (1.0 - eta) ** k
        )
        E = np.zeros((c, c))
        E[nv - k, nv] = amp[valid]
        out += E @ rho @ E.T
    return FockDensity(out, state.trace_deficit)
