import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlteleport.fock import (
    FockDensity,
    beamsplitter_blocks,
    hermite_functions,
    loss_channel,
    momentum,
    position,
    quadrature_projector,
    squeezed_vacuum,
    squeezing_operator,
)


def test_projector_values():
    assert quadrature_projector(0.0, 0.0, 4)[0] == pytest.approx(math.pi**-0.25)
    assert quadrature_projector(0.0, 0.0, 4)[1] == pytest.approx(0.0)
    # momentum eigenstates pick up (-i)^n
    v = quadrature_projector(0.7, math.pi / 2, 4)
    h = hermite_functions(4, np.array(0.7))
    assert np.allclose(v, h * (-1j) ** np.arange(4))


def test_hermite_orthonormal():
    x = np.linspace(-12, 12, 6001)
    h = hermite_functions(25, x)
    gram = h @ h.T * (x[1] - x[0])
    assert np.allclose(gram, np.eye(25), atol=1e-10)


def test_projector_rejects_far_outcomes():
    with pytest.raises(ValueError):
        quadrature_projector(40.0, 0.0, 10)


def test_canonical_commutator_away_from_edge():
    c = 20
    x, p = position(c), momentum(c)
    comm = x @ p - p @ x
    assert np.allclose(comm[:-1, :-1], 1j * np.eye(c - 1))


def test_squeezed_vacuum_closed_form():
    r = 0.8
    c = 60
    psi = squeezed_vacuum(r, c)
    x, p = position(c), momentum(c)
    assert np.vdot(psi, psi).real == pytest.approx(1.0, abs=1e-9)
    assert np.vdot(psi, x @ x @ psi).real == pytest.approx(math.exp(r) / 2, rel=1e-7)
    assert np.vdot(psi, p @ p @ psi).real == pytest.approx(math.exp(-r) / 2, rel=1e-7)
    # same state from the truncated squeezing operator (x -> exp(-s) x)
    vac = np.zeros(c)
    vac[0] = 1
    alt = squeezing_operator(-r / 2, 90)[:c, 0]
    assert abs(np.vdot(alt, psi)) == pytest.approx(1.0, abs=1e-8)


def test_loss_examples():
    one = FockDensity(np.array([0, 1], dtype=complex))
    out = loss_channel(one, 0.75).matrix()
    assert np.allclose(out, np.diag([0.25, 0.75]))
    assert np.allclose(loss_channel(one, 1.0).matrix(), one.matrix())
    assert np.allclose(loss_channel(one, 0.0).matrix(), np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        loss_channel(one, 1.2)


def test_beamsplitter_heisenberg():
    # |1, 0> -> t|1, 0> - r|0, 1>  with a -> t a + r b, b -> t b - r a
    t = 0.6
    psi = np.zeros((3, 3), dtype=complex)
    psi[1, 0] = 1
    out = beamsplitter_blocks(psi, t)
    r = math.sqrt(1 - t * t)
    assert abs(out[1, 0]) == pytest.approx(t)
    assert abs(out[0, 1]) == pytest.approx(r)
    # <x_a> after the mixer follows the Heisenberg rule for a coherent-like input
    c = 12
    a_in = squeezed_vacuum(0.3, c)
    b_in = np.zeros(c, dtype=complex)
    b_in[0] = b_in[1] = 1 / math.sqrt(2)
    state = beamsplitter_blocks(np.multiply.outer(a_in, b_in), t)
    x = position(state.shape[0])
    xa = np.einsum("ab,ac,cb->", state.conj(), x, state).real
    xb_in = np.vdot(b_in, position(c) @ b_in).real
    assert xa == pytest.approx(r * xb_in, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.integers(0, 2**31 - 1))
def test_loss_preserves_trace_and_positivity(eta, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=6) + 1j * rng.normal(size=6)
    state = FockDensity(v / np.linalg.norm(v))
    out = loss_channel(state, eta)
    assert out.trace() == pytest.approx(1.0, abs=1e-12)
    assert out.is_valid(1e-12)
    n = np.diag(np.arange(6))
    assert np.trace(out.matrix() @ n).real == pytest.approx(eta * np.trace(state.matrix() @ n).real)


def test_density_helpers():
    rho = FockDensity(np.diag([0.5, 0.5]).astype(complex))
    assert rho.purity() == pytest.approx(0.5)
    w, v = rho.ensemble()
    assert np.allclose(sorted(w), [0.5, 0.5])
    assert rho.padded(4).matrix().shape == (4, 4)
    with pytest.raises(ValueError):
        rho.padded(1)
