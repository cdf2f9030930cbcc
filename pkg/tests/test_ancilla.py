import math

import numpy as np
import pytest

from nlteleport.ancilla import (
    AncillaSpec,
    ancilla_moments,
    build_fock,
    moments_cubic,
    moments_from_fock,
    moments_two_component,
    optimal_subspace_state,
    restricted_eigenstates,
)
from nlteleport.metrics import native_cubicity_closed_form

FIELDS = ("mean_x", "mean_p", "var_x", "var_p", "cov_xp", "ex2", "var_x2", "cov_x2_p", "cov_x_x2")


def _close(a, b, tol):
    return all(abs(getattr(a, f) - getattr(b, f)) < tol for f in FIELDS)


def test_two_component_closed_forms_match_fock():
    for u in np.linspace(0.02, 1.0, 50):
        psi = np.array([u, 1j * math.sqrt(1 - u * u)])
        assert _close(moments_two_component(u), moments_from_fock(psi), 1e-10)
    m = moments_two_component(0.79)
    assert m.var_x2 == pytest.approx(1.5 - 0.79**4)


def test_cubic_moments_match_fock():
    spec = AncillaSpec("cubic-finite", chi_state=0.25, r_state=-0.6)
    fock = moments_from_fock(build_fock(spec, 80))
    assert _close(moments_cubic(0.25, -0.6), fock, 1e-6)


def test_three_component_fock_moments():
    spec = AncillaSpec("three-component", c0=0.8, c1=0.5, c2=math.sqrt(1 - 0.89))
    m = ancilla_moments(spec)
    psi = build_fock(spec, 3).data
    assert np.allclose(psi[:3], [0.8, 0.5j, math.sqrt(0.11)])
    assert m.var_p > 0 and m.var_x2 > 0


def test_spec_validation():
    with pytest.raises(ValueError):
        AncillaSpec("two-component", u=1.5).validate()
    with pytest.raises(ValueError):
        AncillaSpec("three-component", c0=1, c1=1).validate()
    with pytest.raises(ValueError):
        AncillaSpec("cubic-finite", r_state=3.0).validate(s_max_db=10)
    with pytest.raises(KeyError):
        AncillaSpec.from_record({"kind": "two-component", "v": 1})


def test_optimal_two_dimensional_state():
    s = optimal_subspace_state(None, 2)
    assert s.u == pytest.approx(0.79, abs=0.01)
    assert s.xi < 1
    # u = 0.79 is the optimum of the two-component family at its native cubicity
    def native(u):
        m = moments_two_component(u)
        return native_cubicity_closed_form(m.var_p, 2 * m.cov_x2_p, m.var_x2)[1]
    us = np.linspace(0.5, 0.99, 491)
    assert us[np.argmin([native(u) for u in us])] == pytest.approx(s.u, abs=2e-3)


def test_small_z_limit():
    # as z -> 0 the optimum approaches u = sqrt(3)/2
    s = optimal_subspace_state(1e-4, 2)
    assert s.u == pytest.approx(math.sqrt(3) / 2, abs=1e-3)


def test_three_dimensional_beats_two():
    assert optimal_subspace_state(None, 3).xi < optimal_subspace_state(None, 2).xi


def test_restricted_eigenstates_orthonormal():
    w, v = restricted_eigenstates(0.49, 3)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(v.conj().T @ v, np.eye(3))
