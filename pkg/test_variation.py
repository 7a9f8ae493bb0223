#!/usr/bin/env python3
"""
Tests for the first variation of discrete varifolds and the tangential
calculus on analytic patches
"""

import sys
import os

import numpy as np

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app.services.string_service import builtin_kink
from app.services.variation_service import (
    first_variation, mean_curvature, projection_divergence, stationarity_residual, tangential_divergence,
    tangential_gradient, weak_stationarity_residual,
)
from app.services.varifold_service import DiscreteVarifold
from app.utils.errors import DimensionMismatchError, EmptyFamilyError, PatchError
from app.utils.patches import AffinePatch, CylinderPatch
from app.utils.script_runner import raises, run_tests
from app.utils.vector_fields import BumpField, ProductField, ScalarBump, bump_family, validate_jacobian


def time_axis(t0=-2.0, t1=3.0, dt=1e-3, x=0.0):
    t = np.arange(t0 + dt / 2, t1, dt)
    points = np.stack([t, np.full_like(t, x)], axis=-1)
    return DiscreteVarifold.timelike_atoms(1, points, np.broadcast_to(np.diag([1.0, 0.0]), (len(t), 2, 2)),
                                           np.full(len(t), dt))


def test_first_variation_of_static_line():
    V = time_axis()
    Y = BumpField.directional((0.5, 0.0), (0.5, 0.5), axis=1)
    assert first_variation(V, Y) == 0.0
    raises(DimensionMismatchError, first_variation, V, BumpField.directional((0, 0, 0), (1, 1, 1), axis=0))


def test_half_line_boundary_term():
    half_line = time_axis(t0=0.0, t1=2.0)
    Y = BumpField.directional((0.0, 0.0), (0.5, 0.5), axis=0)
    # outward unit u = -e_0 at the endpoint, (Y(p), eta u)_e = -1
    assert abs(first_variation(half_line, Y) + 1.0) < 1e-4


def test_stationarity_residual_of_line():
    report = stationarity_residual(time_axis(), bump_family((-1.0, -1.0), (2.0, 1.0), (1, 2, 4)))
    assert report.family_size == (1 + 4 + 16) * 2
    assert report.residual < 1e-5
    assert report.is_stationary(1e-5)
    assert len(report.to_dict()["rows"]) == report.family_size
    raises(EmptyFamilyError, stationarity_residual, time_axis(), [])


def test_bump_field_jacobians():
    points = np.random.default_rng(3).uniform(-0.4, 0.4, size=(20, 3))
    Y = BumpField.directional(np.zeros(3), np.full(3, 0.5), axis=2)
    assert validate_jacobian(Y, points) < 1e-7
    affine = BumpField(bump=ScalarBump(np.zeros(3), np.ones(3)), constant=np.ones(3), linear=np.eye(3) * 2)
    assert validate_jacobian(affine, points) < 1e-7
    product = ProductField(ScalarBump(np.zeros(3), np.full(3, 0.7)), affine)
    assert validate_jacobian(product, points) < 1e-7


def test_family_jacobians_at_random_points():
    lo, hi = np.array([0.0, -1.0, -1.0]), np.array([1.0, 1.0, 1.0])
    points = np.random.default_rng(12).uniform(lo, hi, size=(100, 3))
    family = bump_family(lo, hi, (1, 2))
    assert len(family) == (1 + 8) * 3
    assert max(validate_jacobian(Y, points) for Y in family) <= 1e-6
    skewed = BumpField(bump=ScalarBump(np.array([0.5, 0.0, 0.0]), np.array([0.6, 1.2, 0.9])),
                       constant=np.array([0.3, -1.0, 2.0]), linear=np.arange(9.0).reshape(3, 3) / 9)
    assert validate_jacobian(skewed, points) <= 1e-6
    assert validate_jacobian(ProductField(ScalarBump(np.zeros(3), np.full(3, 1.5)), skewed), points) <= 1e-6


def test_tangential_divergence_on_time_axis():
    axis = AffinePatch(origin=np.zeros(2), basis=np.array([[1.0, 0.0]]))
    params = np.linspace(-0.4, 0.4, 9)[:, None]
    constant = BumpField(bump=None, constant=np.array([1.0, 2.0]))
    assert np.allclose(tangential_divergence(axis, constant, params), 0.0)

    chi = ScalarBump(np.array([0.1, 0.0]), np.array([1.0, 1.0]))
    Y = BumpField(bump=chi, constant=np.zeros(2), linear=np.array([[1.0, 0.0], [0.0, 0.0]]))
    points = axis.point(params)
    expected = chi.value(points) + points[:, 0] * chi.gradient(points)[:, 0]
    assert np.allclose(tangential_divergence(axis, Y, params), expected, atol=1e-12)


def test_divergence_product_rule():
    plane = AffinePatch(origin=np.zeros(3), basis=np.array([[1.0, 0.3, 0.0], [0.0, 0.0, 1.0]]))
    rng = np.random.default_rng(11)
    params = rng.uniform(-0.3, 0.3, size=(15, 2))
    psi = ScalarBump(np.array([0.05, 0.0, 0.1]), np.full(3, 0.9))
    Y = BumpField(bump=ScalarBump(np.zeros(3), np.ones(3)), constant=np.array([0.3, -1.0, 0.5]),
                  linear=rng.normal(size=(3, 3)))
    lhs = tangential_divergence(plane, ProductField(psi, Y), params)
    points = plane.point(params)
    grad = tangential_gradient(plane, psi.value, params)
    rhs = psi.value(points) * tangential_divergence(plane, Y, params) + np.sum(grad * Y.value(points), axis=1)
    assert np.max(np.abs(lhs - rhs)) < 1e-7


def test_mean_curvature():
    plane = AffinePatch(origin=np.zeros(3), basis=np.array([[1.0, 0.2, 0.1], [0.0, 1.0, 0.0]]))
    params = np.random.default_rng(5).uniform(-1.0, 1.0, size=(6, 2))
    assert np.max(np.abs(mean_curvature(plane, params))) < 1e-8

    sheet = builtin_kink(1.0).world_sheet_patch()
    params = np.array([[0.3, 0.5], [0.3, 2.0], [0.6, 4.0], [1.0, 5.5]])
    assert np.max(np.abs(mean_curvature(sheet, params))) < 1e-5

    tube = CylinderPatch(radius=0.5)
    params = np.array([[0.0, 0.0], [0.5, 1.0], [1.0, 2.5]])
    H = mean_curvature(tube, params)
    assert np.allclose(np.linalg.norm(H, axis=1), 2.0, atol=1e-5)


def test_weak_stationarity_residual():
    tube = CylinderPatch(radius=0.5)
    phi = np.linspace(0.0, 2 * np.pi, 25)[:-1]
    params = np.stack(np.meshgrid([0.2, 0.7], phi, indexing="ij"), axis=-1).reshape(-1, 2)

    def static(p):
        return np.broadcast_to(np.diag([2.0, 0.0, 0.0]), (len(p), 3, 3)).copy()

    assert weak_stationarity_residual(tube, static, lambda p: np.ones(len(p)), params) < 1e-8
    assert weak_stationarity_residual(tube, static, lambda p: 2.0 + np.sin(3 * p[:, 1]), params) < 1e-8
    # the tube itself is not minimal: |div P| = 1 / radius
    own = weak_stationarity_residual(tube, tube.projection, lambda p: np.ones(len(p)), params)
    assert abs(own - 2.0) < 1e-5
    raises(PatchError, weak_stationarity_residual, tube,
           lambda p: np.broadcast_to(np.eye(3), (len(p), 3, 3)).copy(), lambda p: np.ones(len(p)), params)

    plane = AffinePatch(origin=np.zeros(3), basis=np.array([[1.0, 0.5, 0.0], [0.0, 0.0, 1.0]]))
    grid = np.random.default_rng(2).uniform(-1.0, 1.0, size=(8, 2))
    assert weak_stationarity_residual(plane, plane.projection, lambda p: np.ones(len(p)), grid) < 1e-8
    assert np.max(np.abs(projection_divergence(plane, grid))) < 1e-8


if __name__ == "__main__":
    run_tests(dict(globals()), "First variation tests")
