#!/usr/bin/env python3
"""
Tests for the Minkowski geometry layer: causal classes, normal frames,
lorentzian projections and the model-set embedding
"""

import sys
import os
import time

import numpy as np

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app.utils.errors import (
    CausalityError, DegenerateBasisError, NonLorentzError, NonUnitVelocityError, NotInImageError, ZeroVectorError
)
from app.utils.minkowski import (
    CausalType, NormalFrame, TimelikeProjection, boost_matrix, boundary_form_distance, classify,
    frame_from_tangent_basis, horizontal_velocity, invariant_errors, lorentz_boost, lorentz_product,
    lorentzian_area_density, null_matrices, null_projection, projection_from_basis, projection_from_frame,
    projections_from_frames, q_embed, q_inverse, random_normal_frames, random_timelike_basis,
)
from app.utils.script_runner import raises, run_tests

MOVING = np.array([[25 / 16, -15 / 16], [15 / 16, -9 / 16]])


def test_lorentz_product():
    assert lorentz_product((1, 0), (1, 0)) == -1.0
    assert lorentz_product((1, 1), (1, 1)) == 0.0
    assert np.isclose(lorentz_product((0.75, 1.25), (0.75, 1.25)), 1.0)


def test_classify():
    assert classify((1, 0, 0)).kind == CausalType.TIMELIKE
    assert classify((1, 1, 0)).kind == CausalType.NULL
    assert classify((0, 1, 0)).kind == CausalType.SPACELIKE
    raises(ZeroVectorError, classify, (0, 0))


def test_static_line_frame():
    frame = frame_from_tangent_basis([(1, 0)])
    assert np.allclose(frame.n1, (0, 1))
    P = projection_from_frame(frame)
    assert np.allclose(P.matrix, np.diag([1, 0]))
    assert np.allclose(horizontal_velocity(frame), 0.0)


def test_moving_line_frame():
    frame = frame_from_tangent_basis([(1, 0.6)])
    assert np.allclose(frame.n1, (0.75, 1.25), atol=1e-12)
    P = projection_from_frame(frame)
    assert np.allclose(P.matrix, MOVING, atol=1e-12)
    assert np.allclose(horizontal_velocity(frame), 0.6)
    assert np.allclose(horizontal_velocity(P), 0.6)
    assert np.allclose(q_embed(P), MOVING * 16 / 25)


def test_static_plane_in_three_dimensions():
    frame = frame_from_tangent_basis([(1, 0, 0), (0, 1, 0)])
    assert np.allclose(frame.vectors, [[0, 0, 1]])
    assert np.allclose(projection_from_frame(frame).matrix, np.diag([1, 1, 0]))


def test_spatial_frame_sign_is_canonical():
    # static planes: n_1^0 = 0, so the sign comes from the lexicographic rule
    flipped = frame_from_tangent_basis([(0, -1, 0), (3, 0, 0)])
    assert np.allclose(flipped.vectors, [[0, 0, 1]])
    line = frame_from_tangent_basis([(1, 0, 0)])
    reversed_line = frame_from_tangent_basis([(-2, 0, 0)])
    assert np.allclose(line.vectors, reversed_line.vectors)
    assert all(v[np.flatnonzero(np.abs(v) > 1e-14)[0]] > 0 for v in line.vectors)
    assert np.allclose(projection_from_frame(reversed_line).matrix, np.diag([1, 0, 0]))


def test_frame_rejects_bad_bases():
    raises(CausalityError, frame_from_tangent_basis, [(1, 1)])
    raises(CausalityError, frame_from_tangent_basis, [(0, 1, 0)])
    raises(DegenerateBasisError, frame_from_tangent_basis, [(1, 0, 0), (2, 0, 0)])
    raises(DegenerateBasisError, frame_from_tangent_basis, [(1, 0), (0, 1)])


def test_projection_invariants_on_random_planes():
    rng = np.random.default_rng(7)
    for N in (1, 2, 3):
        for h in range(1, N + 1):
            basis = random_timelike_basis(rng, N, h)
            P = projection_from_frame(frame_from_tangent_basis(basis))
            errors = P.invariant_errors()
            assert max(errors.values()) < 1e-10, errors
            assert P.p00 >= 1.0 - 1e-12
            assert np.allclose(projection_from_basis(basis.T), P.matrix, atol=1e-10)
            Q = q_embed(P)
            assert np.isclose(Q[0, 0], 1.0)
            assert np.allclose(q_inverse(Q).matrix, P.matrix, atol=1e-9)


def test_q_inverse():
    assert np.allclose(q_inverse(np.diag([1.0, 0.0])).matrix, np.diag([1, 0]))
    assert np.allclose(q_inverse(MOVING * 16 / 25).matrix, MOVING, atol=1e-12)
    raises(NotInImageError, q_inverse, np.array([[1.0, -1.0], [1.0, -1.0]]))


def test_null_projection():
    assert np.allclose(null_projection([1.0]).matrix, [[1, -1], [1, -1]])
    assert np.allclose(null_projection([-1.0]).matrix, [[1, 1], [-1, -1]])
    Q = null_projection([1.0, 0.0])
    assert np.allclose(horizontal_velocity(Q), (1, 0))
    assert np.allclose(Q.matrix @ Q.matrix, 0.0)
    raises(NonUnitVelocityError, null_projection, [0.5])


def test_boundary_law():
    distances = []
    for tau in (1.0, 10.0, 100.0, 1000.0):
        n1 = np.array([tau, np.sqrt(1 + tau ** 2)])
        P = projection_from_frame(NormalFrame(h=1, vectors=n1[None, :]))
        distances.append(boundary_form_distance(q_embed(P), velocity=np.array([1.0])))
    assert all(b < a for a, b in zip(distances, distances[1:]))
    assert distances[-1] < 1e-5
    # O(1/tau^2)
    assert distances[-1] / distances[-2] < 0.02


def test_boundary_law_under_strong_boosts():
    unit_form = np.array([1.0])
    for k in range(21):
        a = 2.0 ** k
        frame = NormalFrame(h=1, vectors=np.array([[a, np.sqrt(1.0 + a * a)]]))
        Q = q_embed(projection_from_frame(frame))
        assert boundary_form_distance(Q, velocity=unit_form) <= 10.0 * 4.0 ** -k, k
        speed = abs(float(horizontal_velocity(frame)[0]))
        assert abs(speed - 1.0) <= 10.0 * 4.0 ** -k
        if k >= 15:
            assert abs(speed - 1.0) <= 1e-9
            assert boundary_form_distance(Q) <= 1e-9


def test_boundary_law_from_tangent_vectors():
    # below 1 - beta^2 ~ 4^-14 the induced metric is indistinguishable from a null one
    for k in range(15):
        beta = 2.0 ** k / np.sqrt(1.0 + 4.0 ** k)
        frame = frame_from_tangent_basis([(1.0, beta)])
        Q = q_embed(projection_from_frame(frame))
        assert boundary_form_distance(Q, velocity=np.array([1.0])) <= 10.0 * 4.0 ** -k, k
        assert np.isclose(horizontal_velocity(frame)[0], beta, rtol=1e-9)
    raises(CausalityError, frame_from_tangent_basis, [(1.0, 2.0 ** 20 / np.sqrt(1.0 + 4.0 ** 20))])


def test_projection_invariants_on_ten_thousand_frames():
    rng = np.random.default_rng(11)
    shapes = [(N, h) for N in (1, 2, 3) for h in range(1, N + 1)]
    counts = np.full(len(shapes), 10_000 // len(shapes))
    counts[: 10_000 % len(shapes)] += 1
    start = time.perf_counter()
    worst = {"idempotence": 0.0, "trace": 0.0, "eta_symmetry": 0.0, "p00_deficit": 0.0}
    for (N, h), count in zip(shapes, counts):
        P = projections_from_frames(random_normal_frames(rng, N, h, int(count)))
        for name, values in invariant_errors(P, h).items():
            worst[name] = max(worst[name], float(values.max()))
    elapsed = time.perf_counter() - start
    assert counts.sum() == 10_000
    assert max(worst.values()) <= 1e-12, worst
    assert elapsed < 1.0, elapsed


def test_random_frames_are_lorentz_orthonormal():
    rng = np.random.default_rng(5)
    frames = random_normal_frames(rng, 3, 2, 20)
    for vectors in frames:
        frame = NormalFrame(h=2, vectors=vectors)
        P = projection_from_frame(frame)
        # P annihilates every normal
        assert np.allclose(P.matrix @ vectors.T, 0.0, atol=1e-12)
        assert np.isclose(np.trace(P.matrix), 2.0)


def test_projection_does_not_depend_on_the_normal_frame():
    c, s = np.cos(0.7), np.sin(0.7)
    static = NormalFrame(h=1, vectors=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    turned = NormalFrame(h=1, vectors=np.array([[0.0, c, s], [0.0, s, -c]]))
    assert np.allclose(projection_from_frame(static).matrix, projection_from_frame(turned).matrix, atol=1e-14)
    assert np.allclose(projection_from_frame(turned).matrix, np.diag([1.0, 0.0, 0.0]), atol=1e-14)

    rng = np.random.default_rng(3)
    for vectors in random_normal_frames(rng, 3, 1, 10):
        spatial = vectors[1:]
        mixed = np.array([c * spatial[0] + s * spatial[1], s * spatial[0] - c * spatial[1]])
        reference = projection_from_frame(NormalFrame(h=1, vectors=vectors)).matrix
        other = projection_from_frame(NormalFrame(h=1, vectors=np.vstack([vectors[:1], mixed]))).matrix
        assert np.allclose(reference, other, atol=1e-12)


def test_model_set_boundary_is_not_convex():
    Q_plus, Q_minus = null_matrices(np.array([[1.0], [-1.0]]))
    assert np.linalg.matrix_rank(Q_plus) == 1 and np.linalg.matrix_rank(Q_minus) == 1
    midpoint = 0.5 * (Q_plus + Q_minus)
    assert np.allclose(midpoint, np.diag([1.0, -1.0]))
    assert np.linalg.matrix_rank(midpoint) == 2
    assert boundary_form_distance(midpoint) >= 1.0 - 1e-12

    rng = np.random.default_rng(2)
    for _ in range(20):
        v = rng.normal(size=(2, 2))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        midpoint = 0.5 * null_matrices(v).sum(axis=0)
        assert np.linalg.matrix_rank(midpoint, tol=1e-9) == 2
        assert np.max(np.abs(midpoint @ midpoint)) > 1e-6
        assert boundary_form_distance(midpoint) > 1e-6


def test_lorentz_boost():
    static = TimelikeProjection(matrix=np.diag([1.0, 0.0]), h=1)
    assert np.allclose(lorentz_boost(static, np.eye(2)).matrix, static.matrix)
    assert np.allclose(lorentz_boost(static, boost_matrix([0.6])).matrix, MOVING, atol=1e-12)
    raises(NonLorentzError, lorentz_boost, static, np.diag([2.0, 1.0]))
    raises(CausalityError, boost_matrix, [1.0])


def test_lorentzian_area_density():
    assert np.isclose(lorentzian_area_density((0, 0, 1)), 1.0)
    assert np.isclose(lorentzian_area_density(np.array([1.0, 1.0, 0.0]) / np.sqrt(2)), 0.0)
    raises(CausalityError, lorentzian_area_density, (1, 0, 0))


if __name__ == "__main__":
    run_tests(dict(globals()), "Minkowski geometry tests")
