import math

import numpy as np
import pytest

from landauspec.landau import (
    LandauProfile,
    epsilon_from_force,
    eval_profile_derivative,
    eval_profiles,
    force_magnitude,
    landau_velocity_cartesian,
    series_profiles,
)

# Frozen oracle values: extended-precision (50-digit mpmath) evaluation of the
# closed forms at (eps, theta) = (0.1, 0.3).
ORACLE_01_03 = {
    "V": -0.065346865874233086207,
    "F": 0.42036219839725554395,
    "dV_dtheta": -0.2091135459787315198,
    "dF_dtheta": -0.15816308394572938885,
    "p": 0.4182270919574630396,
}
ORACLE_FORCE_001 = 0.50271179810575243826
ORACLE_FORCE_03 = 16.77796758511674116


def test_construction_rejects_out_of_range():
    for bad in (1.0, -1.0, 1.5, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            LandauProfile(bad)
    LandauProfile(0.999)
    LandauProfile(-0.999)


def test_zero_solution():
    vals = eval_profiles(LandauProfile(0.0), np.linspace(0, np.pi, 7))
    for key in ("V", "F", "p"):
        assert np.all(vals[key] == 0.0)


def test_direct_substitution_half():
    vals = eval_profiles(LandauProfile(0.5), math.pi / 2)
    assert vals["V"] == pytest.approx(-1.0, abs=1e-15)
    assert vals["F"] == pytest.approx(-0.5, abs=1e-15)


def test_oracle_point():
    vals = eval_profiles(LandauProfile(0.1), 0.3)
    for key, want in ORACLE_01_03.items():
        assert vals[key] == pytest.approx(want, rel=1e-14), key


def test_pressure_is_minus_two_dV():
    # p = -2 dV/dtheta holds identically on the unit sphere.
    theta = np.linspace(0.0, np.pi, 101)
    vals = eval_profiles(LandauProfile(0.45), theta)
    assert np.allclose(vals["p"], -2.0 * vals["dV_dtheta"], atol=1e-14)


@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
def test_divergence_identity(eps):
    # dV/dtheta + V cot(theta) + F = 0, away from the poles where cot blows up.
    j = np.arange(1, 1001)
    theta = 0.5 * np.pi * (1.0 + np.cos((2 * j - 1) * np.pi / 2000.0))
    theta = theta[(theta > 1e-3) & (theta < np.pi - 1e-3)]
    vals = eval_profiles(LandauProfile(eps), theta)
    resid = vals["dV_dtheta"] + vals["V"] / np.tan(theta) + vals["F"]
    assert np.max(np.abs(resid)) <= 1e-12


@pytest.mark.parametrize("eps", [0.2, 0.7])
def test_t_symmetry(eps):
    theta = np.linspace(0.0, np.pi, 37)
    plus = eval_profiles(LandauProfile(eps), theta)
    minus = eval_profiles(LandauProfile(-eps), theta)
    assert np.allclose(minus["V"], -plus["V"][::-1], atol=1e-14)
    assert np.allclose(minus["F"], plus["F"][::-1], atol=1e-14)


def test_profile_derivative_matches_central_difference():
    theta = np.linspace(0.1, np.pi - 0.1, 29)
    eps, h = 0.35, 1e-6
    got = eval_profile_derivative(LandauProfile(eps), theta)
    hi = eval_profiles(LandauProfile(eps + h), theta)
    lo = eval_profiles(LandauProfile(eps - h), theta)
    for key, name in (("dV_deps", "V"), ("dF_deps", "F"), ("dp_deps", "p")):
        fd = (hi[name] - lo[name]) / (2.0 * h)
        assert np.allclose(got[key], fd, atol=1e-7), key


def test_force_magnitude_oracle():
    # At eps = 0.01 the closed form cancels ~1e4 of leading digits, so double
    # precision caps the achievable relative accuracy near 1e-11.
    assert force_magnitude(0.01) == pytest.approx(ORACLE_FORCE_001, rel=5e-11)
    assert force_magnitude(0.3) == pytest.approx(ORACLE_FORCE_03, rel=1e-14)


def test_force_magnitude_leading_term():
    eps = 1e-4
    assert force_magnitude(eps) / eps == pytest.approx(16.0 * math.pi, rel=1e-6)


def test_force_magnitude_monotone():
    assert force_magnitude(0.2) < force_magnitude(0.4) < force_magnitude(0.8)


def test_force_magnitude_domain():
    for bad in (0.0, -0.1, 1.0, 1.2):
        with pytest.raises(ValueError):
            force_magnitude(bad)


def test_force_series_branch_continuity():
    # The series branch and the closed form must agree across the switch up to
    # the closed form's own cancellation floor (~1e6 ulps at eps = 1e-3).
    below, above = 1e-3 * (1 - 1e-9), 1e-3 * (1 + 1e-9)
    assert force_magnitude(below) == pytest.approx(force_magnitude(above), rel=2e-8)


def test_epsilon_from_force_roundtrip():
    for eps in (0.3, 0.05, 0.9, 1e-5):
        b = force_magnitude(eps)
        back = epsilon_from_force(b)
        assert abs(force_magnitude(back) - b) <= 1e-12 * (1.0 + b)
        assert back == pytest.approx(eps, rel=1e-10)


def test_epsilon_from_force_small():
    b = 16.0 * math.pi * 0.05
    eps = epsilon_from_force(b)
    assert eps == pytest.approx(0.05, rel=0.05 ** 2 * 2.0)


def test_epsilon_from_force_monotone_to_zero():
    vals = [epsilon_from_force(b) for b in (1e-1, 1e-3, 1e-6)]
    assert vals[0] > vals[1] > vals[2] > 0.0


def test_series_profiles_order2_gap():
    eps = 0.01
    theta = np.linspace(0.0, np.pi, 201)
    exact = eval_profiles(LandauProfile(eps), theta)
    approx = series_profiles(eps, order=2).evaluate(eps, theta)
    gap = max(np.max(np.abs(exact["V"] - approx["V"])),
              np.max(np.abs(exact["F"] - approx["F"])))
    assert gap <= 10.0 * eps ** 3


def test_series_profiles_halving_ratio():
    theta = np.linspace(0.0, np.pi, 201)
    table = series_profiles(0.0, order=2)

    def gap(eps):
        exact = eval_profiles(LandauProfile(eps), theta)
        approx = table.evaluate(eps, theta)
        return max(np.max(np.abs(exact["V"] - approx["V"])),
                   np.max(np.abs(exact["F"] - approx["F"])))

    ratio = gap(0.02) / gap(0.01)
    assert 6.0 <= ratio <= 10.0


def test_series_profiles_order3_terms():
    # Third-order coefficients: V3 = -2 cos^2 sin, F3 = 8 cos^3 - 4 cos.
    theta = np.linspace(0.0, np.pi, 51)
    t2 = series_profiles(0.0, order=2)
    t3 = series_profiles(0.0, order=3)
    eps = 1.0  # evaluate coefficient difference directly
    d = t3.evaluate(eps, theta)
    d2 = t2.evaluate(eps, theta)
    c, s = np.cos(theta), np.sin(theta)
    assert np.allclose(d["V"] - d2["V"], -2.0 * c * c * s, atol=1e-14)
    assert np.allclose(d["F"] - d2["F"], 8.0 * c**3 - 4.0 * c, atol=1e-14)


def test_series_profiles_bad_order():
    with pytest.raises(ValueError):
        series_profiles(0.1, order=4)


def test_velocity_homogeneity():
    x = np.array([0.3, -1.1, 0.7])
    u1 = landau_velocity_cartesian(0.4, x)
    u2 = landau_velocity_cartesian(0.4, 2.0 * x)
    assert np.allclose(u2, u1 / 2.0, atol=1e-15)


def test_velocity_axis_point():
    u = landau_velocity_cartesian(0.3, np.array([0.0, 0.0, 1.0]))
    F0 = float(eval_profiles(LandauProfile(0.3), 0.0)["F"])
    assert np.allclose(u, [0.0, 0.0, F0], atol=1e-15)


def test_velocity_origin_rejected():
    with pytest.raises(ValueError):
        landau_velocity_cartesian(0.3, np.zeros(3))


def test_velocity_divergence_free():
    h = 1e-5
    rng = np.random.default_rng(7)
    for _ in range(5):
        x = rng.uniform(-1.0, 1.0, size=3) + np.array([0.0, 0.0, 1.5])
        div = 0.0
        for axis in range(3):
            dx = np.zeros(3)
            dx[axis] = h
            up = landau_velocity_cartesian(0.25, x + dx)
            dn = landau_velocity_cartesian(0.25, x - dx)
            div += (up[axis] - dn[axis]) / (2.0 * h)
        assert abs(div) <= 1e-6
