#!/usr/bin/env python3
"""
Tests for time slices of sampled strings and the conserved energy,
momentum and angular momentum
"""

import sys
import os

import numpy as np

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app.services.conservation_service import (
    angular_momentum, closed_form_slice, conservation_report, energy, momentum, time_slices, window_support_radius,
)
from app.services.string_service import (
    CircleCurve, RescaledCurve, builtin_kink, builtin_square, dalembert, sample_varifold, singular_times,
)
from app.services.varifold_service import Box, DiscreteVarifold, mu_V
from app.utils.errors import StringDataError, SupportError
from app.utils.minkowski import projection_from_basis, random_timelike_basis
from app.utils.script_runner import raises, run_tests


def rotating_rod():
    """gamma = sin(u) (-sin t, cos t)"""
    circle = CircleCurve(radius=1.0)
    return dalembert(circle, RescaledCurve(circle, -1), name="rod")


def test_time_slices_partition_the_window():
    V = sample_varifold(builtin_kink(1.0), 0.0, 1.0, 0.01, 2 * np.pi / 100).varifold
    slices = time_slices(V, 0.0, 1.0, 0.1)
    assert len(slices) == 10
    assert sum(len(s.atoms) for s in slices) == len(V)
    assert np.allclose([s.t for s in slices], np.arange(10) * 0.1 + 0.05)
    assert np.allclose([s.mass() for s in slices], 2 * np.pi)
    raises(StringDataError, time_slices, V, 0.0, 1.0, 0.0)
    raises(StringDataError, time_slices, V, 1.0, 1.0, 0.1)


def test_kink_conservation():
    kink = builtin_kink(1.0)
    V = sample_varifold(kink, 0.0, 3.0, 0.01, 2 * np.pi / 200).varifold
    report = conservation_report(V, 0.0, 3.0, 0.1, singular_times=singular_times(kink, 0.0, 3.0))
    assert report.flagged.sum() == 1 and report.flagged[15]
    assert np.allclose(report.energy, 2 * np.pi)
    assert report.drift["energy_relative"] < 1e-10
    assert report.drift["momentum"] < 1e-9
    assert report.drift["angular_momentum"] < 1e-9
    rows = report.rows()
    assert len(rows) == 30 and {"t", "E", "P_1", "P_2", "Omega_01", "Omega_12"} <= set(rows[0])


def test_square_energy_through_null_phase():
    square = builtin_square(1.0)
    V = sample_varifold(square, 0.0, 1.0, 1 / 100, 1 / 100).varifold
    assert V.null.any()
    report = conservation_report(V, 0.0, 1.0, 0.1, singular_times=singular_times(square, 0.0, 1.0))
    assert np.allclose(report.energy, 4.0)
    assert report.drift["momentum"] < 0.05
    for s in time_slices(V, 0.6, 0.9, 0.1):
        assert np.isclose(energy(s), 4.0)
        assert len(s.null) > 0 and len(s.timelike) > 0


def test_rotating_rod_angular_momentum():
    rod = rotating_rod()
    assert rod.relativistic
    V = sample_varifold(rod, 0.0, 2.0, 0.02, 2 * np.pi / 200).varifold
    report = conservation_report(V, 0.0, 2.0, 0.2)
    assert np.allclose(report.angular_momentum[:, 1, 2], np.pi, atol=1e-9)
    assert np.allclose(report.angular_momentum[:, 0, 1:], 0.0, atol=1e-9)
    assert report.drift["angular_momentum"] < 1e-9
    exact = closed_form_slice(rod, 0.7)
    assert np.isclose(exact["angular_momentum"][1, 2], np.pi, atol=1e-9)
    assert np.allclose(exact["momentum"], 0.0, atol=1e-12)
    assert np.isclose(exact["energy"], rod.period, rtol=1e-12)
    assert exact["energy_null"] == 0.0


def test_square_closed_form_splits_energy():
    square = builtin_square(1.0)
    exact = closed_form_slice(square, 0.75)
    assert np.isclose(exact["energy_timelike"], 2.0, atol=0.02)
    assert np.isclose(exact["energy_null"], 2.0, atol=0.02)
    assert np.isclose(exact["energy"], exact["energy_timelike"] + exact["energy_null"])
    assert np.isclose(exact["energy"], 4.0, rtol=1e-9)
    V = sample_varifold(square, 0.7, 0.8, 1 / 100, 1 / 100).varifold
    sampled = time_slices(V, 0.7, 0.8, 0.1)[0]
    assert np.isclose(energy(sampled), exact["energy"], rtol=1e-9)
    assert np.allclose(momentum(sampled), exact["momentum"], atol=0.05)


def random_atoms(seed: int, count: int = 30) -> DiscreteVarifold:
    rng = np.random.default_rng(seed)
    bases = np.stack([random_timelike_basis(rng, 2, 2).T for _ in range(count)])
    points = np.column_stack([rng.uniform(0.0, 1.0, count), rng.uniform(-1.0, 1.0, (count, 2))])
    timelike = DiscreteVarifold(2, 2, points, projection_from_basis(bases), np.zeros(count, bool),
                                rng.uniform(0.1, 1.0, count))
    directions = rng.normal(size=(count, 2))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    null_points = np.column_stack([rng.uniform(0.0, 1.0, count), rng.uniform(-1.0, 1.0, (count, 2))])
    null = DiscreteVarifold.null_atoms(2, null_points, directions, rng.uniform(0.1, 1.0, count))
    return timelike.concatenate(null)


def test_energy_dominates_slice_mass():
    for V, t1 in ((random_atoms(1), 1.0), (sample_varifold(rotating_rod(), 0.0, 1.0, 0.02, 0.05).varifold, 1.0)):
        slices = time_slices(V, 0.0, t1, 0.1)
        excess = np.array([energy(s) - s.mass() for s in slices])
        assert np.all(excess >= -1e-12)
        assert np.any(excess > 1e-3)


def test_slice_energies_integrate_to_the_mass_measure():
    for V in (random_atoms(2), sample_varifold(builtin_square(1.0), 0.0, 1.0, 0.01, 0.01).varifold):
        slices = time_slices(V, 0.0, 1.0, 0.05)
        window = Box(lo=[0.0, -10.0, -10.0], hi=[1.0, 10.0, 10.0])
        assert np.isclose(sum(energy(s) * s.width for s in slices), mu_V(V, window), rtol=1e-12)


def test_rotation_covariance():
    V = random_atoms(3)
    c, s = np.cos(0.9), np.sin(0.9)
    R = np.array([[c, -s], [s, c]])
    L = np.eye(3)
    L[1:, 1:] = R
    before = time_slices(V, 0.0, 1.0, 1.0)[0]
    after = time_slices(V.transformed(L), 0.0, 1.0, 1.0)[0]
    assert np.isclose(energy(after), energy(before), rtol=1e-12)
    assert np.allclose(momentum(after), R @ momentum(before), atol=1e-12)
    assert np.allclose(angular_momentum(after), L @ angular_momentum(before) @ L.T, atol=1e-12)
    assert np.max(np.abs(angular_momentum(before)[0, 1:])) > 1e-3


def test_null_atoms_carry_energy_and_momentum():
    V = DiscreteVarifold.null_atoms(2, [[0.5, 1.0, 0.0], [0.5, -1.0, 0.0]], [[0.0, 1.0], [0.0, 1.0]],
                                    np.array([0.2, 0.3]))
    s = time_slices(V, 0.0, 1.0, 1.0)[0]
    assert np.isclose(energy(s), 0.5)
    assert np.allclose(momentum(s), [0.0, 0.5])
    omega = angular_momentum(s)
    # z^1 v^2 - z^2 v^1 per atom: 0.2 - 0.3
    assert np.isclose(omega[1, 2], -0.1)
    assert np.allclose(omega, -omega.T)


def test_support_check():
    V = sample_varifold(builtin_kink(1.0), 0.0, 0.5, 0.05, 2 * np.pi / 50).varifold
    raises(SupportError, conservation_report, V, 0.0, 0.5, 0.1, support_radius=0.5)
    assert conservation_report(V, 0.0, 0.5, 0.1, support_radius=1.5).drift["energy_relative"] < 1e-10
    report = conservation_report(V, 0.0, 0.5, 0.1)
    assert np.isclose(report.support_radius, np.max(np.linalg.norm(V.points[:, 1:], axis=1)))
    assert 0.8 < report.support_radius <= 1.0 + 1e-12
    assert window_support_radius(V, 5.0, 6.0) == 0.0


def test_support_is_checked_without_a_radius():
    runaway = DiscreteVarifold.null_atoms(2, [[0.2, np.inf, 0.0]], [[1.0, 0.0]], np.array([1.0]))
    raises(SupportError, conservation_report, runaway, 0.0, 1.0, 0.5)
    raises(SupportError, window_support_radius, runaway, 0.0, 1.0)
    # atoms outside the window do not count
    assert conservation_report(runaway, 0.5, 1.0, 0.5).support_radius == 0.0


if __name__ == "__main__":
    run_tests(dict(globals()), "Conservation tests")
