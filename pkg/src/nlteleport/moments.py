"""Analytic output statistics of the deterministic schemes.

The output operator ``p_out + z x_out^2`` is a quadratic polynomial in the
cluster quadratures ``(x_A, p_A, x_B, p_B)`` and the input mode ``Q``.  Its
variance is a weighted sum of monomial covariances; every covariance that
involves more than two Gaussian quadratures is reduced with Stein's lemma
through the lookup table below.  Quantum moments reduce like classical
Gaussian ones only because every product that appears is Weyl-symmetric.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from .ancilla import AncillaMoments
from .gaussian import CovarianceState

__all__ = [
    "AncillaAssumptionError",
    "OutputMoments",
    "SchemeConfig",
    "SCHEMES",
    "UnknownMomentError",
    "numerator_coefficients",
    "output_moments",
    "stein_reduce",
    "TABLE",
    "variance_ideal_cubic",
    "variance_teleportation",
]

SCHEMES = ("canonical", "nonlinear", "ideal-cubic")
# "povm": phi(m_x) = -atan(sqrt(2) chi m_x); "main-text": the opposite sign
CONVENTIONS = ("povm", "main-text")
_IDX = {"x_A": 0, "p_A": 1, "x_B": 2, "p_B": 3}


class UnknownMomentError(KeyError):
    pass


class AncillaAssumptionError(ValueError):
    """Input mode violates <x_Q> = cov(x_Q, p_Q) = cov(x_Q, x_Q^2) = 0."""


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "canonical"
    t: float = 1 / math.sqrt(2)
    d_F: float = math.sqrt(2)
    g_F: float = math.sqrt(2)
    g_p: float = 1.0
    chi: float = 0.0
    alpha_lin: float = 1.0
    convention: str = "povm"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown phase convention {self.convention!r}")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {self.t}")
        if self.scheme == "canonical" and self.chi != 0.0:
            # plain teleportation has no nonlinear feedforward
            object.__setattr__(self, "chi", 0.0)

    @property
    def chi_eff(self) -> float:
        """Feedforward strength in the POVM sign convention."""
        return self.chi if self.convention == "povm" else -self.chi

    @property
    def r(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.t * self.t))

    def check_bounds(self, gain_bound: float = 2.0, chi_bound: float = 2.0) -> None:
        for name in ("d_F", "g_F", "g_p"):
            if abs(getattr(self, name)) > gain_bound:
                raise ValueError(f"|{name}| exceeds {gain_bound}")
        if abs(self.chi) > chi_bound:
            raise ValueError(f"|chi| exceeds {chi_bound}")

    def with_(self, **kw) -> "SchemeConfig":
        return replace(self, **kw)

    def to_record(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_record(cls, record: dict) -> "SchemeConfig":
        unknown = set(record) - set(cls.__dataclass_fields__)
        if unknown:
            raise KeyError(f"unknown SchemeConfig keys: {sorted(unknown)}")
        text = ("scheme", "convention")
        return cls(**{k: (v if k in text else float(v)) for k, v in record.items()})

    @classmethod
    def unity_gain(cls, scheme: str = "canonical", chi: float = 0.0,
                   convention: str = "povm") -> "SchemeConfig":
        return cls(scheme=scheme, chi=chi, convention=convention)


@dataclass(frozen=True)
class OutputMoments:
    var_x_out: float
    var_p_out: float
    numerator: float
    mean_x_out: float


class _Stats:
    """Cluster second moments plus ancilla moments, looked up by name."""

    __slots__ = ("g", "m", "q")

    def __init__(self, cluster: CovarianceState, anc: AncillaMoments | None):
        self.g = cluster.gamma
        self.m = cluster.mean
        self.q = anc

    def V(self, a: str) -> float:
        i = _IDX[a]
        return self.g[i, i]

    def C(self, a: str, b: str) -> float:
        return self.g[_IDX[a], _IDX[b]]

    def M(self, a: str) -> float:
        return self.m[_IDX[a]]

    # ancilla
    @property
    def mQ(self) -> float:
        return self.q.mean_x

    @property
    def exQ2(self) -> float:
        return self.q.ex2


def _anc_required(s: _Stats) -> AncillaMoments:
    if s.q is None:
        raise ValueError("this moment involves the input mode Q; pass ancilla moments")
    return s.q


# Each identity maps Gaussian cluster statistics (and, where mode Q enters,
# the independent ancilla's moments) to a covariance.  Keys are canonical
# monomial pairs, see _key().
_STEIN: dict[str, Callable[[_Stats], float]] = {
    "cov(p_B,x_B^2)": lambda s: 2 * s.M("x_B") * s.C("x_B", "p_B"),
    "cov(p_B,x_Qx_B)": lambda s: _anc_required(s).mean_x * s.C("x_B", "p_B"),
    "cov(p_B,x_Ax_Q)": lambda s: _anc_required(s).mean_x * s.C("x_A", "p_B"),
    "cov(p_B,x_A^2)": lambda s: 2 * s.M("x_A") * s.C("x_A", "p_B"),
    "cov(p_A,x_B^2)": lambda s: 2 * s.M("x_B") * s.C("x_B", "p_A"),
    "cov(p_A,x_Qx_B)": lambda s: _anc_required(s).mean_x * s.C("x_B", "p_A"),
    "cov(p_A,x_Ax_Q)": lambda s: _anc_required(s).mean_x * s.C("x_A", "p_A"),
    "cov(p_A,x_A^2)": lambda s: 2 * s.M("x_A") * s.C("x_A", "p_A"),
    "cov(p_Q,x_Qx_B)": lambda s: s.M("x_B") * _anc_required(s).cov_xp,
    "cov(p_Q,x_Ax_Q)": lambda s: s.M("x_A") * _anc_required(s).cov_xp,
    "cov(p_B,x_Ax_B)": lambda s: s.M("x_B") * s.C("x_A", "p_B") + s.M("x_A") * s.C("x_B", "p_B"),
    "cov(p_A,x_Ax_B)": lambda s: s.M("x_A") * s.C("x_B", "p_A") + s.M("x_B") * s.C("x_A", "p_A"),
    "cov(x_B^2,x_Qx_B)": lambda s: _anc_required(s).mean_x * 2 * s.M("x_B") * s.V("x_B"),
    "cov(x_B^2,x_Ax_B)": lambda s: (
        2 * s.M("x_B") ** 2 * s.C("x_A", "x_B")
        + 2 * s.M("x_A") * s.M("x_B") * s.V("x_B")
        + 2 * s.V("x_B") * s.C("x_A", "x_B")
    ),
    "cov(x_B^2,x_Ax_Q)": lambda s: _anc_required(s).mean_x * 2 * s.M("x_B") * s.C("x_A", "x_B"),
    "var(x_Qx_B)": lambda s: (
        _anc_required(s).ex2 * (s.V("x_B") + s.M("x_B") ** 2)
        - s.q.mean_x**2 * s.M("x_B") ** 2
    ),
    "cov(x_A^2,x_B^2)": lambda s: (
        4 * s.C("x_A", "x_B") * s.M("x_A") * s.M("x_B") + 2 * s.C("x_A", "x_B") ** 2
    ),
    "cov(x_Qx_B,x_Ax_B)": lambda s: _anc_required(s).mean_x
    * (s.M("x_B") * s.C("x_A", "x_B") + s.M("x_A") * s.V("x_B")),
    "cov(x_Qx_B,x_A^2)": lambda s: _anc_required(s).mean_x * 2 * s.M("x_A") * s.C("x_A", "x_B"),
    "cov(x_Qx_B,x_Q^2)": lambda s: s.M("x_B") * _anc_required(s).cov_x_x2,
    "cov(x_Q^2,x_Ax_B)": lambda s: 0.0,
    "cov(x_Q^2,x_Ax_Q)": lambda s: s.M("x_A") * _anc_required(s).cov_x_x2,
    "cov(x_Q^2,x_A^2)": lambda s: 0.0,
    "var(x_Ax_B)": lambda s: (
        s.V("x_A") * s.M("x_B") ** 2
        + 2 * s.C("x_A", "x_B") * s.M("x_A") * s.M("x_B")
        + s.V("x_B") * s.M("x_A") ** 2
        + s.C("x_A", "x_B") ** 2
        + s.V("x_A") * s.V("x_B")
    ),
    "cov(x_Ax_B,x_Ax_Q)": lambda s: _anc_required(s).mean_x
    * (s.M("x_B") * s.V("x_A") + s.M("x_A") * s.C("x_A", "x_B")),
    "cov(x_Ax_B,x_A^2)": lambda s: 2 * (
        s.V("x_A") * s.C("x_A", "x_B")
        + s.C("x_A", "x_B") * s.M("x_A") ** 2
        + s.V("x_A") * s.M("x_A") * s.M("x_B")
    ),
    "var(x_Ax_Q)": lambda s: (
        _anc_required(s).ex2 * (s.V("x_A") + s.M("x_A") ** 2)
        - s.q.mean_x**2 * s.M("x_A") ** 2
    ),
    "cov(x_Ax_Q,x_A^2)": lambda s: _anc_required(s).mean_x * 2 * s.M("x_A") * s.V("x_A"),
    "var(x_A^2)": lambda s: 4 * s.V("x_A") * s.M("x_A") ** 2 + 2 * s.V("x_A") ** 2,
    "var(x_B^2)": lambda s: 4 * s.V("x_B") * s.M("x_B") ** 2 + 2 * s.V("x_B") ** 2,
    # needed by the expansion but absent from the published list
    "cov(x_Qx_B,x_Ax_Q)": lambda s: (
        _anc_required(s).ex2 * (s.C("x_A", "x_B") + s.M("x_A") * s.M("x_B"))
        - s.q.mean_x**2 * s.M("x_A") * s.M("x_B")
    ),
}

# Second-order entries, ancilla-only entries and products of independent modes.
_BASIC: dict[str, Callable[[_Stats], float]] = {
    "var(p_B)": lambda s: s.V("p_B"),
    "var(p_A)": lambda s: s.V("p_A"),
    "cov(p_A,p_B)": lambda s: s.C("p_A", "p_B"),
    "var(p_Q)": lambda s: _anc_required(s).var_p,
    "var(x_Q^2)": lambda s: _anc_required(s).var_x2,
    "cov(p_Q,x_Q^2)": lambda s: _anc_required(s).cov_x2_p,
    "cov(p_A,p_Q)": lambda s: 0.0,
    "cov(p_B,p_Q)": lambda s: 0.0,
    "cov(p_A,x_Q^2)": lambda s: 0.0,
    "cov(p_B,x_Q^2)": lambda s: 0.0,
    "cov(p_Q,x_B^2)": lambda s: 0.0,
    "cov(p_Q,x_Ax_B)": lambda s: 0.0,
    "cov(p_Q,x_A^2)": lambda s: 0.0,
    "cov(x_B^2,x_Q^2)": lambda s: 0.0,
}

_FACTOR = re.compile(r"([xp]_[ABQ])(?:\^(\d))?")
_ORDER = {"p_A": 0, "p_B": 1, "p_Q": 2, "x_A": 3, "x_B": 4, "x_Q": 5}


def _monomial(text: str) -> tuple[str, ...]:
    factors: list[str] = []
    pos = 0
    for m in _FACTOR.finditer(text):
        if m.start() != pos:
            raise UnknownMomentError(f"cannot parse monomial {text!r}")
        factors += [m.group(1)] * int(m.group(2) or 1)
        pos = m.end()
    if pos != len(text) or not factors:
        raise UnknownMomentError(f"cannot parse monomial {text!r}")
    return tuple(sorted(factors, key=_ORDER.__getitem__))


def _key(term: str) -> tuple:
    term = term.replace(" ", "")
    m = re.fullmatch(r"(var|cov)\((.+)\)", term)
    if not m:
        raise UnknownMomentError(f"cannot parse moment {term!r}")
    parts = m.group(2).split(",")
    if m.group(1) == "var" and len(parts) == 1:
        a = b = _monomial(parts[0])
    elif m.group(1) == "cov" and len(parts) == 2:
        a, b = _monomial(parts[0]), _monomial(parts[1])
    else:
        raise UnknownMomentError(f"cannot parse moment {term!r}")
    return tuple(sorted((a, b)))


TABLE: dict[tuple, tuple[str, Callable[[_Stats], float]]] = {}
for _name, _fn in _STEIN.items():
    TABLE[_key(_name)] = (_name, _fn)
_LOOKUP = dict(TABLE)
for _name, _fn in _BASIC.items():
    _LOOKUP[_key(_name)] = (_name, _fn)


def stein_reduce(term: str, cluster: CovarianceState, anc: AncillaMoments | None = None) -> float:
    """Evaluate one reduction identity, e.g. ``stein_reduce("var(x_A^2)", cluster)``.

    Only moment shapes from the reduction table are accepted; anything else
    raises :class:`UnknownMomentError`.
    """
    key = _key(term)
    if key not in TABLE:
        raise UnknownMomentError(f"{term!r} is not in the reduction table")
    return float(TABLE[key][1](_Stats(cluster, anc)))


@lru_cache(maxsize=None)
def _plan(names: tuple[str, ...]) -> tuple[tuple[int, int, Callable[[_Stats], float]], ...]:
    """Resolve which identity fills each upper-triangle entry, once per layout."""
    monos = [_monomial(n) for n in names]
    plan = []
    for i, mi in enumerate(monos):
        for j in range(i, len(monos)):
            key = tuple(sorted((mi, monos[j])))
            try:
                plan.append((i, j, _LOOKUP[key][1]))
            except KeyError:
                raise UnknownMomentError(f"no reduction for cov{key}") from None
    return tuple(plan)


def _cov_matrix(names: tuple[str, ...], stats: _Stats) -> np.ndarray:
    K = np.empty((len(names), len(names)))
    for i, j, fn in _plan(names):
        K[i, j] = K[j, i] = fn(stats)
    return K


_IDEAL_NAMES = ("p_B", "p_A", "x_A^2", "x_B^2")
_TELE_NAMES = ("p_B", "p_A", "p_Q", "x_B^2", "x_Qx_B", "x_Ax_B", "x_Ax_Q", "x_A^2", "x_Q^2")


def _ideal_coefficients(cfg: SchemeConfig) -> tuple[np.ndarray, np.ndarray]:
    """Monomial weights split as ``a + z b``."""
    g = cfg.g_p
    a = np.array([1.0, g, g * cfg.chi, 0.0])
    b = np.array([0.0, 0.0, 0.0, 1.0])
    return a, b


def _tele_coefficients(cfg: SchemeConfig) -> tuple[np.ndarray, np.ndarray]:
    t, r, d = cfg.t, cfg.r, cfg.d_F
    beta = cfg.alpha_lin * cfg.g_F
    k = math.sqrt(2.0) * cfg.chi_eff
    # shorthand A..F multiply x_B^2, x_Qx_B, x_Ax_B, x_Ax_Q, x_A^2, x_Q^2
    a = np.array([
        1.0, beta * t, beta * r,
        0.0, 0.0, 0.0,
        beta * k * (r * r - t * t), beta * k * r * t, -beta * k * r * t,
    ])
    b = np.array([
        0.0, 0.0, 0.0,
        1.0, 2 * d * t, -2 * d * r,
        -2 * d * d * r * t, d * d * r * r, d * d * t * t,
    ])
    return a, b


def _quadratic(K: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[float, float, float]:
    Ka = K @ a
    return float(a @ Ka), float(2.0 * b @ Ka), float(b @ K @ b)


def variance_ideal_cubic(cluster: CovarianceState, cfg: SchemeConfig, z: float) -> OutputMoments:
    """Projection of mode A on a cubic state, p-feedforward with gain ``g_p``.

    x_out = x_B,  p_out = p_B + g_p p_A + g_p chi x_A^2.
    """
    if cfg.scheme != "ideal-cubic":
        raise ValueError("variance_ideal_cubic needs scheme='ideal-cubic'")
    stats = _Stats(cluster, None)
    c0, c1, c2 = _quadratic(_cov_matrix(_IDEAL_NAMES, stats), *_ideal_coefficients(cfg))
    return OutputMoments(stats.V("x_B"), c0, c0 + c1 * z + c2 * z * z, stats.M("x_B"))


def variance_teleportation(
    cluster: CovarianceState, anc: AncillaMoments, cfg: SchemeConfig, z: float
) -> OutputMoments:
    """Teleportation of mode Q with linear (chi = 0) or nonlinear feedforward.

    x_out = x_B + d_F (t x_Q - r x_A)
    p_out = p_B + alpha g_F (t p_A + r p_Q + sqrt(2) chi (t x_A + r x_Q)(r x_A - t x_Q))
    """
    if cfg.scheme not in ("canonical", "nonlinear"):
        raise ValueError("variance_teleportation handles canonical and nonlinear schemes")
    if not anc.satisfies_assumptions():
        raise AncillaAssumptionError(
            f"need <x_Q> = cov(x_Q,p_Q) = cov(x_Q,x_Q^2) = 0, got "
            f"{anc.mean_x:.3g}, {anc.cov_xp:.3g}, {anc.cov_x_x2:.3g}"
        )
    stats = _Stats(cluster, anc)
    c0, c1, c2 = _quadratic(_cov_matrix(_TELE_NAMES, stats), *_tele_coefficients(cfg))
    num, var_p = c0 + c1 * z + c2 * z * z, c0
    t, r, d = cfg.t, cfg.r, cfg.d_F
    var_x = (
        stats.V("x_B")
        + d * d * (t * t * anc.var_x + r * r * stats.V("x_A"))
        - 2 * d * r * stats.C("x_A", "x_B")
    )
    mean_x = stats.M("x_B") + d * (t * anc.mean_x - r * stats.M("x_A"))
    return OutputMoments(var_x, var_p, num, mean_x)


def output_moments(cluster, anc, cfg: SchemeConfig, z: float) -> OutputMoments:
    if cfg.scheme == "ideal-cubic":
        return variance_ideal_cubic(cluster, cfg, z)
    return variance_teleportation(cluster, anc, cfg, z)


def numerator_coefficients(cluster, anc, cfg: SchemeConfig) -> tuple[float, float, float]:
    """``(c0, c1, c2)`` with ``var(p_out + z x_out^2) = c0 + c1 z + c2 z^2``."""
    if cfg.scheme == "ideal-cubic":
        K = _cov_matrix(_IDEAL_NAMES, _Stats(cluster, None))
        return _quadratic(K, *_ideal_coefficients(cfg))
    if not anc.satisfies_assumptions():
        raise AncillaAssumptionError("input mode violates the zero-mean/no-correlation assumptions")
    K = _cov_matrix(_TELE_NAMES, _Stats(cluster, anc))
    return _quadratic(K, *_tele_coefficients(cfg))
