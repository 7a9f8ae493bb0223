#!/usr/bin/env python3
"""
Tests for d'Alembert strings: constructions, constraints, area formulas,
varifold sampling and random relativistic strings
"""

import sys
import os

import numpy as np

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app.services.conservation_service import time_slices
from app.services.string_service import (
    AffineSheet, CircleCurve, ConstantCurve, FourierCurve, SplineCurve, area_three_ways, builtin_cylinder,
    builtin_kink, builtin_square, close_phase, constraint_report, cylinder_approximant, dalembert,
    lorentzian_action, multiplicity_summary, random_phase, random_relativistic_string, sample_varifold,
    singular_times, slice_speed,
)
from app.utils.errors import ClosureError, PatchError, StringDataError
from app.utils.script_runner import raises, run_tests


def test_kink_matches_closed_form():
    R = 0.7
    kink = builtin_kink(R)
    t, u = np.meshgrid(np.linspace(0, 2, 7), np.linspace(0, kink.period, 11), indexing="ij")
    expected = R * np.stack([np.cos(u / R), np.sin(u / R)], axis=-1) * np.cos(t / R)[..., None]
    assert np.allclose(kink.gamma(t, u), expected, atol=1e-14)
    assert np.isclose(kink.period, 2 * np.pi * R)
    assert kink.flavor == "relativistic"
    assert np.max(np.abs(kink.wave_residual(t, u))) < 1e-5
    assert np.allclose(slice_speed(kink, 0.4, np.linspace(0, 4, 9)), abs(np.sin(0.4 / R)))


def test_cylinder_and_approximants():
    cylinder = builtin_cylinder()
    assert cylinder.flavor == "subrelativistic"
    t, u = np.meshgrid(np.linspace(0, 1, 5), np.linspace(0, 2 * np.pi, 9), indexing="ij")
    assert np.allclose(cylinder.gamma(t, u), CircleCurve(1.0).value(u + t) / 2)
    g_t, g_u = cylinder.gamma_t(t, u), cylinder.gamma_u(t, u)
    assert np.allclose(np.sum(g_t ** 2, axis=-1) + np.sum(g_u ** 2, axis=-1), 0.5)
    report = constraint_report(cylinder, t[:, 0], u[0])
    assert report.satisfied and np.isclose(report.subrelativistic_excess, -0.5)
    for n in (2, 8, 32):
        approximant = cylinder_approximant(n=n)
        assert approximant.relativistic
        assert np.max(np.abs(approximant.gamma(t, u) - cylinder.gamma(t, u))) <= 0.5 / n + 1e-12


def test_dalembert_validation():
    raises(StringDataError, dalembert, CircleCurve(1.0), CircleCurve(2.0))
    raises(StringDataError, dalembert, CircleCurve(1.0), ConstantCurve(point=(0.0, 0.0, 0.0), period=2 * np.pi))
    raises(StringDataError, builtin_kink, -1.0)
    raises(StringDataError, builtin_cylinder, ConstantCurve(period=1.0))


def test_constraint_report():
    kink = builtin_kink(1.0)
    report = constraint_report(kink, np.linspace(0, 3, 13), np.linspace(0, 2 * np.pi, 50))
    assert report.orthogonality <= 1e-12 and report.energy_defect <= 1e-12
    assert report.satisfied and report.flagged_points == 0

    square = builtin_square(1.0)
    report = constraint_report(square, np.linspace(0, 1, 9), np.linspace(0, 4, 33))
    assert report.flagged_points > 0
    assert report.orthogonality <= 1e-12 and report.energy_defect <= 1e-12


def test_area_three_ways():
    flat = area_three_ways(AffineSheet(), (0.0, 1.0), (0.0, 1.0), nodes=8)
    for value in (flat.param, flat.nu, flat.coarea):
        assert np.isclose(value, 0.5, atol=1e-12)

    kink = builtin_kink(1.0)
    result = area_three_ways(kink, (0.0, np.pi / 4), (0.0, 2 * np.pi))
    assert result.max_relative_deviation < 1e-6
    assert np.isclose(lorentzian_action(kink, (0.0, np.pi / 4), (0.0, 2 * np.pi)), result.param)

    raises(PatchError, area_three_ways, AffineSheet(stretch=(0.0, 0.0)), (0.0, 1.0), (0.0, 1.0))
    raises(PatchError, area_three_ways, AffineSheet(stretch=(0.0, 0.5), velocity=(1.0, 0.0)), (0.0, 1.0), (0.0, 1.0))
    raises(PatchError, area_three_ways, AffineSheet(stretch=(0.5, 0.0, 0.0), velocity=(0.0, 0.0, 0.0),
                                                    offset=(0.0, 0.0, 0.0)), (0.0, 1.0), (0.0, 1.0))


def test_kink_sampling():
    kink = builtin_kink(1.0)
    sampling = sample_varifold(kink, 0.0, 1.0, 1e-2, 2 * np.pi / 200)
    V = sampling.varifold
    assert (V.h, V.N) == (2, 2)
    assert sampling.null_cells == 0 and sampling.timelike_cells == 100 * 200
    assert np.allclose(V.mass_weights(), sampling.dt * sampling.du)
    assert np.isclose(V.total_mass(), 2 * np.pi)
    summary = multiplicity_summary(sampling)
    assert np.isclose(summary["min"], 1.0) and np.isclose(summary["max"], 1.0)
    raises(StringDataError, sample_varifold, kink, 1.0, 0.0, 1e-2, 1e-2)


def test_cylinder_multiplicity_two():
    sampling = sample_varifold(builtin_cylinder(), 0.0, 1.0, 0.05, 2 * np.pi / 64)
    summary = multiplicity_summary(sampling)
    assert np.isclose(summary["mean"], 2.0) and np.isclose(summary["min"], 2.0)


def test_square_singular_phase():
    square = builtin_square(1.0)
    assert np.allclose(singular_times(square, 0.0, 1.0), [0.0, 0.5, 1.0])
    sampling = sample_varifold(square, 0.0, 1.0, 1 / 200, 1 / 200)
    V = sampling.varifold
    octagon_phase = V.subset(V.null & (V.points[:, 0] < 0.5))
    assert octagon_phase.total_mass() < 0.02
    for s in time_slices(V.subset(V.null), 0.5, 1.0, 0.05):
        if 0.6 < s.t < 0.9:
            expected = 4 * (2 * s.t - 1)
            assert abs(s.mass() - expected) / expected < 0.05, (s.t, s.mass(), expected)


def test_singular_times_of_kink():
    assert np.allclose(singular_times(builtin_kink(1.0), 0.0, 5.0), [np.pi / 2, 3 * np.pi / 2])
    assert singular_times(builtin_cylinder(), 0.0, 5.0).size == 0


def test_random_relativistic_string():
    string = random_relativistic_string(seed=4, modes=3)
    assert string.relativistic and np.isclose(string.period, 2 * np.pi)
    t, u = np.linspace(0, 1, 6), np.linspace(0, 2 * np.pi, 40)
    assert constraint_report(string, t, u).satisfied
    again = random_relativistic_string(seed=4, modes=3)
    assert np.allclose(string.gamma(0.3, u), again.gamma(0.3, u))
    assert not np.allclose(string.gamma(0.3, u), random_relativistic_string(seed=5, modes=3).gamma(0.3, u))


def test_closure():
    raises(ClosureError, FourierCurve, lambda s: 0.0 * np.asarray(s), 2 * np.pi)
    phase, coefficients = random_phase(np.random.default_rng(0), 2 * np.pi, 2)
    assert coefficients.shape == (2,)
    closed, c = close_phase(phase, 2 * np.pi)
    s = np.arange(2048) * 2 * np.pi / 2048
    assert abs(np.mean(np.cos(closed(s)))) < 1e-12
    assert abs(np.mean(np.sin(closed(s)))) < 1e-12
    curve = FourierCurve(closed, 2 * np.pi)
    assert np.allclose(np.linalg.norm(curve.derivative(s), axis=-1), 1.0)


def test_spline_curve():
    s = np.linspace(0, 2 * np.pi, 65)[:-1]
    rows = np.column_stack([s, 0.9 * np.cos(s), 0.9 * np.sin(s)])
    curve = SplineCurve(2 * np.pi, rows)
    assert curve.dimension == 2
    assert np.allclose(curve.value(s), rows[:, 1:], atol=1e-12)
    assert np.allclose(curve.value(s + 2 * np.pi), rows[:, 1:], atol=1e-12)
    assert np.max(curve.speeds()) < 1.0
    raises(StringDataError, SplineCurve, 2 * np.pi, rows[:3])
    raises(StringDataError, SplineCurve, 1.0, np.column_stack([s / 7, np.cos(s), np.sin(s)]))


if __name__ == "__main__":
    run_tests(dict(globals()), "String tests")
