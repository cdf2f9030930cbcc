import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlteleport.ancilla import moments_two_component
from nlteleport.metrics import (
    GAUSSIAN_CONSTANT,
    NoNativeCubicity,
    gaussian_min_variance,
    native_cubicity,
    native_cubicity_closed_form,
    xi_from_moments,
    xi_from_quadratic,
)


def vacuum_xi(z):
    # vacuum: var p = 1/2, var x^2 = 1/2, no x^2-p correlation
    return (0.5 + 0.5 * z * z) / gaussian_min_variance(z)


def test_constant():
    assert GAUSSIAN_CONSTANT == pytest.approx(3 / 2 ** (5 / 3))


def test_denominator_matches_squeezed_family():
    # Gaussian pure states with var x = V: var(p + z x^2) = 1/(4V) + 2 z^2 V^2
    for z in (0.1, 0.5, 1.3):
        V = np.linspace(0.01, 3, 200001)
        assert gaussian_min_variance(z) == pytest.approx((1 / (4 * V) + 2 * z * z * V * V).min(), rel=1e-7)


def test_vacuum_anchor():
    assert vacuum_xi(1 / math.sqrt(2)) == pytest.approx(1.0, abs=1e-12)
    zs = np.linspace(0.05, 2, 80)
    zs = zs[np.abs(zs - 1 / math.sqrt(2)) > 1e-3]
    assert np.all(vacuum_xi(zs) > 1)


def test_zero_z_sentinel():
    from nlteleport.ancilla import moments_cubic
    rep = xi_from_moments(moments_cubic(0.0, 0.0), 0.0)
    assert rep.xi == math.inf


def test_inconsistent_moments_rejected():
    from nlteleport.ancilla import AncillaMoments
    bad = AncillaMoments(0, 0, 0.5, -1.0, 0, 0.5, 0.5, 0, 0)
    with pytest.raises(ValueError):
        xi_from_moments(bad, 0.5)


def test_two_component_native():
    m = moments_two_component(0.79)
    z_c, xi_c = native_cubicity_closed_form(m.var_p, 2 * m.cov_x2_p, m.var_x2)
    z_s, xi_s = native_cubicity(m)
    assert z_c == pytest.approx(z_s, abs=1e-5)
    assert xi_c == pytest.approx(xi_s, rel=1e-9)
    assert xi_c < 1
    assert xi_from_moments(m, z_c).xi_db == pytest.approx(10 * math.log10(xi_c))


def test_vacuum_has_no_native_cubicity():
    from nlteleport.ancilla import moments_cubic
    with pytest.raises(NoNativeCubicity):
        native_cubicity(moments_cubic(0.0, 0.0))


def test_symmetric_tie_prefers_negative_root():
    z, _ = native_cubicity_closed_form(0.5, 0.0, 0.5)
    assert z == pytest.approx(-1 / math.sqrt(2))


@settings(max_examples=80, deadline=None)
@given(st.floats(0.05, 3), st.floats(-3, 3), st.floats(0.05, 3))
def test_closed_form_is_global_minimum(c0, c1, c2):
    z, xi = native_cubicity_closed_form(c0, c1, c2)
    grid = np.concatenate([np.linspace(-8, -1e-3, 4000), np.linspace(1e-3, 8, 4000)])
    assert xi <= np.min(xi_from_quadratic(c0, c1, c2, grid)) * (1 + 1e-12)
    assert xi_from_quadratic(c0, c1, c2, z) == pytest.approx(xi)
