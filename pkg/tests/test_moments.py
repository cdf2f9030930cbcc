import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlteleport.ancilla import AncillaMoments, moments_cubic, moments_two_component
from nlteleport.gaussian import ClusterParams, build_cluster
from nlteleport.moments import (
    TABLE,
    AncillaAssumptionError,
    SchemeConfig,
    UnknownMomentError,
    numerator_coefficients,
    output_moments,
    stein_reduce,
    variance_teleportation,
)
from oracles import MC_CLUSTER, monte_carlo_identity_errors, oracle_numerator

small = st.floats(-1.2, 1.2)
angle = st.floats(-math.pi, math.pi)


def test_table_size():
    # 25 published identities plus those the expansion also needs
    assert len(TABLE) == 31


def test_identities_against_monte_carlo():
    errs = monte_carlo_identity_errors([v[0] for v in TABLE.values()], build_cluster(MC_CLUSTER))
    for name, (err, kind) in errs.items():
        assert err < (0.01 if kind == "rel" else 5e-3), (name, err, kind)


def test_zero_mean_examples():
    c = build_cluster(ClusterParams(0.7, -0.3, 0.2, 0.5, 0.1, 0.6))
    assert stein_reduce("cov(p_B, x_B^2)", c) == 0.0
    V = c.gamma[0, 0]
    assert stein_reduce("var(x_A^2)", c) == pytest.approx(2 * V * V)


def test_unknown_and_missing_moments():
    c = build_cluster(ClusterParams())
    with pytest.raises(UnknownMomentError):
        stein_reduce("var(x_A^3)", c)
    with pytest.raises(UnknownMomentError):
        stein_reduce("cov(p_A,p_B)", c)
    with pytest.raises(UnknownMomentError):
        stein_reduce("skew(x_A)", c)
    with pytest.raises(ValueError, match="ancilla"):
        stein_reduce("var(x_Ax_Q)", c)


def test_ideal_vacuum():
    c = build_cluster(ClusterParams())
    out = output_moments(c, None, SchemeConfig("ideal-cubic", g_p=0.0), 0.0)
    assert out.numerator == pytest.approx(0.5)


def test_vacuum_cluster_adds_one_unit():
    # unity gain through a vacuum "cluster": var x_out = var x_Q + 1
    anc = moments_two_component(0.79)
    out = variance_teleportation(build_cluster(ClusterParams()), anc, SchemeConfig(), 0.4)
    assert out.var_x_out == pytest.approx(anc.var_x + 1)


def test_epr_limit_recovers_input():
    anc = moments_two_component(0.79)
    c = build_cluster(ClusterParams.two_mode_squeezed(60.0))
    z = 0.49
    own = anc.var_p + 2 * z * anc.cov_x2_p + z * z * anc.var_x2
    out = variance_teleportation(c, anc, SchemeConfig(), z)
    assert out.numerator == pytest.approx(own, rel=1e-3)
    assert out.var_x_out == pytest.approx(anc.var_x, rel=1e-3)


def test_canonical_forces_zero_chi():
    assert SchemeConfig("canonical", chi=0.3).chi == 0.0
    with pytest.raises(ValueError):
        SchemeConfig("teleport")
    with pytest.raises(ValueError):
        SchemeConfig(convention="other")


def test_conventions_differ_by_sign():
    a = SchemeConfig("nonlinear", chi=0.2)
    b = SchemeConfig("nonlinear", chi=-0.2, convention="main-text")
    assert a.chi_eff == b.chi_eff
    c = build_cluster(ClusterParams.two_mode_squeezed(6.0))
    anc = moments_two_component(0.79)
    assert numerator_coefficients(c, anc, a) == numerator_coefficients(c, anc, b)


def test_ancilla_assumptions_enforced():
    bad = AncillaMoments(0.3, 0, 0.5, 0.5, 0, 0.59, 0.86, 0, 0.3)
    with pytest.raises(AncillaAssumptionError):
        variance_teleportation(build_cluster(ClusterParams()), bad, SchemeConfig(), 0.5)


def test_record_roundtrip():
    cfg = SchemeConfig("nonlinear", t=0.3, d_F=1.1, g_F=-0.4, chi=0.2, convention="main-text")
    assert SchemeConfig.from_record(cfg.to_record()) == cfg
    with pytest.raises(KeyError):
        SchemeConfig.from_record({"gain": 1})


@settings(max_examples=60, deadline=None)
@given(small, small, angle, angle, angle, st.floats(0, 1), small, small,
       st.floats(0, 1), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1, 1),
       st.floats(-1, 1), st.floats(-0.8, 0.8), st.floats(-2, 2))
def test_teleportation_matches_gaussian_oracle(r1, r2, phi, phi1, phi2, t_c, a1, a2,
                                               t, d, g, chi, chi_s, r_s, z):
    # with a Gaussian-moment input the output is a Gaussian quadratic form,
    # whose variance is known exactly; chi_s only enters via the p-statistics
    c = build_cluster(ClusterParams(r1, r2, phi, phi1, phi2, t_c, a1, a2))
    V = 0.5 * math.exp(r_s)
    q_cov = ((V, 0.0), (0.0, 1 / (4 * V)))
    anc = moments_cubic(0.0, r_s)
    cfg = SchemeConfig("nonlinear", t=t, d_F=d, g_F=g, chi=chi)
    got = output_moments(c, anc, cfg, z).numerator
    ref = oracle_numerator(c, (0.0, 0.0), q_cov, cfg, z)
    assert got == pytest.approx(ref, rel=1e-9, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(small, small, angle, angle, angle, st.floats(0, 1), small, small,
       st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_ideal_matches_gaussian_oracle(r1, r2, phi, phi1, phi2, t_c, a1, a2, g_p, chi, z):
    c = build_cluster(ClusterParams(r1, r2, phi, phi1, phi2, t_c, a1, a2))
    cfg = SchemeConfig("ideal-cubic", g_p=g_p, chi=chi)
    got = output_moments(c, None, cfg, z).numerator
    ref = oracle_numerator(c, (0.0, 0.0), ((0.5, 0), (0, 0.5)), cfg, z)
    assert got == pytest.approx(ref, rel=1e-9, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(small, small, angle, angle, angle, st.floats(0, 1), small, small,
       st.floats(0, 1), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1, 1),
       st.floats(-1, 1), st.floats(-0.8, 0.8), st.floats(-2, 2))
def test_sign_flip_symmetry(r1, r2, phi, phi1, phi2, t_c, a1, a2, t, d, g, chi, chi_s, r_s, z):
    # flipping the x-means and (chi, z) is exact once the input is conjugated,
    # which for the cubic family means chi_state -> -chi_state
    cfg = SchemeConfig("nonlinear", t=t, d_F=d, g_F=g, chi=chi)
    base = ClusterParams(r1, r2, phi, phi1, phi2, t_c, a1, a2)
    flipped = ClusterParams(r1, r2, phi, phi1, phi2, t_c, -a1, -a2)
    a = output_moments(build_cluster(base), moments_cubic(chi_s, r_s), cfg, z).numerator
    b = output_moments(build_cluster(flipped), moments_cubic(-chi_s, r_s), cfg.with_(chi=-chi), -z)
    assert a == pytest.approx(b.numerator, rel=1e-10, abs=1e-12)


def test_chi_zero_ignores_alpha_lin_nonlinear_terms():
    c = build_cluster(ClusterParams.two_mode_squeezed(6.0))
    anc = moments_two_component(0.79)
    lin = SchemeConfig("nonlinear", chi=0.0)
    can = SchemeConfig("canonical")
    assert numerator_coefficients(c, anc, lin) == numerator_coefficients(c, anc, can)


def test_quadratic_in_z():
    c = build_cluster(ClusterParams(0.5, 0.2, 0.1, 0.3, -0.2, 0.7, 0.4, -0.2))
    anc = moments_two_component(0.8)
    cfg = SchemeConfig("nonlinear", chi=0.15)
    c0, c1, c2 = numerator_coefficients(c, anc, cfg)
    for z in np.linspace(-2, 2, 9):
        assert output_moments(c, anc, cfg, z).numerator == pytest.approx(c0 + c1 * z + c2 * z * z)
    assert c2 > 0
