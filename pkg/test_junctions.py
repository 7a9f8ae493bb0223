#!/usr/bin/env python3
"""
Tests for triple junctions in R^{1+1}: balance, the angle and multiplicity
solvers, conservation across the junction and the null limits
"""

import sys
import os

import numpy as np

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app.services.conservation_service import conservation_report
from app.services.junction_service import (
    HalfLine, JunctionNetwork, balance_residual, conormal_boundary_term, enumerate_integer_splits,
    junction_conservation_check, network_from_angles, null_limit_varifold, null_plane_limit, perturbed_network,
    random_solved_network, solve_angles, solve_multiplicities, solve_split, time_reversed,
)
from app.utils.errors import CausalityError, JunctionError, LorentzianError
from app.utils.script_runner import raises, run_tests
from app.utils.vector_fields import BumpField

SYMMETRIC_ANGLE = np.arctan(2 / np.sqrt(3))


def test_symmetric_split():
    solution = solve_angles(4.0, 1.0, 1.0)
    assert abs(solution.alpha - SYMMETRIC_ANGLE) < 1e-10
    assert abs(solution.beta - SYMMETRIC_ANGLE) < 1e-10
    assert solution.residual < 1e-10
    assert solution.to_dict()["theta"] == [4.0, 1.0, 1.0]


def test_asymmetric_split_round_trip():
    solution = solve_angles(5.0, 1.0, 2.0)
    assert solution.residual < 1e-10
    # the lighter line leaves faster
    assert solution.alpha < solution.beta
    back = solve_multiplicities(5.0, solution.alpha, solution.beta)
    assert np.allclose(back.theta, (5.0, 1.0, 2.0), atol=1e-8)


def test_solver_rejections():
    raises(JunctionError, solve_angles, 3.0, 1.0, 2.0)
    raises(JunctionError, solve_angles, 4.0, -1.0, 1.0)
    raises(JunctionError, solve_multiplicities, 4.0, 0.5, 1.0)
    raises(JunctionError, solve_multiplicities, 4.0, np.pi / 3, np.pi / 2)
    raises(JunctionError, solve_split, 4.0, "angles")
    raises(JunctionError, solve_split, 4.0, "sideways")


def test_integer_enumeration():
    splits = enumerate_integer_splits(4)
    assert sorted(s.theta[1:] for s in splits) == [(1, 1), (1, 2), (2, 1)]
    assert all(s.residual < 1e-10 for s in splits)
    assert len(solve_split(5, "enumerate")) == 6
    raises(JunctionError, enumerate_integer_splits, 2)
    raises(JunctionError, enumerate_integer_splits, 4.5)


def test_conormals_and_balance():
    net = network_from_angles((4.0, 1.0, 1.0), SYMMETRIC_ANGLE, SYMMETRIC_ANGLE)
    incoming, right, left = net.lines
    assert np.allclose(incoming.frame, (0.0, 1.0))
    # R n = eta u: incoming lines point back in time
    assert incoming.rotation @ incoming.frame @ (1.0, 0.0) > 0
    assert right.rotation @ right.frame @ (1.0, 0.0) < 0
    assert np.allclose(np.linalg.norm(left.conormal), 1.0)
    assert np.max(np.abs(balance_residual(net))) < 1e-10
    Y = BumpField(bump=None, constant=np.array([0.3, -0.7]))
    assert abs(conormal_boundary_term(net, Y)) < 1e-10


def test_conservation_across_junction():
    net = network_from_angles((4.0, 1.0, 1.0), SYMMETRIC_ANGLE, SYMMETRIC_ANGLE)
    check = junction_conservation_check(net)
    assert np.isclose(check.energy_before, 4.0)
    assert check.mismatch < 1e-10 and check.conserved()

    unbalanced = network_from_angles((4.0, 1.0, 2.0), SYMMETRIC_ANGLE, SYMMETRIC_ANGLE)
    check = junction_conservation_check(unbalanced)
    assert check.mismatch > 1e-3 and not check.conserved()
    assert np.max(np.abs(check.balance)) > 1e-3


def test_random_networks_and_perturbations():
    rng = np.random.default_rng(21)
    for _ in range(10):
        net = random_solved_network(rng)
        assert np.max(np.abs(balance_residual(net))) < 1e-9
        assert junction_conservation_check(net).conserved(1e-9)
        broken = perturbed_network(net, rng)
        assert np.max(np.abs(balance_residual(broken))) > 1e-4
        assert not junction_conservation_check(broken).conserved(1e-9)


def test_collision_is_time_reversed_split():
    split = network_from_angles((4.0, 1.0, 1.0), SYMMETRIC_ANGLE, SYMMETRIC_ANGLE)
    collision = time_reversed(split)
    assert [line.orientation for line in collision.lines] == ["out", "in", "in"]
    assert np.max(np.abs(balance_residual(collision))) < 1e-10
    assert junction_conservation_check(collision).conserved()


def test_network_validation_and_round_trip():
    raises(CausalityError, HalfLine, (0.0, 0.0), (1.0, 1.0), 1.0)
    raises(CausalityError, HalfLine, (0.0, 0.0), (0.0, 0.0), 1.0)
    raises(JunctionError, HalfLine, (0.0, 0.0), (1.0, 0.0), 0.0)
    raises(JunctionError, HalfLine, (0.0, 0.0), (1.0, 0.0), 1.0, "sideways")
    raises(JunctionError, JunctionNetwork, (0.0, 0.0), [HalfLine((1.0, 0.0), (1.0, 0.0), 1.0)])
    raises(JunctionError, JunctionNetwork.from_dict, {"p": [0.0, 0.0]})
    line = HalfLine((0.0, 0.0), (-2.0, 1.0), 1.0)
    assert line.direction[0] > 0 and np.isclose(line.velocity, -0.5)

    net = network_from_angles((5.0, 1.0, 2.0), 1.0, 1.2, p=(0.5, -0.25))
    again = JunctionNetwork.from_dict(net.to_dict())
    assert np.allclose(again.point, net.point)
    assert np.allclose(balance_residual(again), balance_residual(net))


def test_null_limit_keeps_energy():
    V = null_limit_varifold(3.0)
    assert V.null.sum() == 200
    report = conservation_report(V, -1.0, 1.0, 0.1)
    assert np.allclose(report.energy, 3.0)
    assert np.allclose(report.momentum, 0.0, atol=1e-12)
    raises(JunctionError, null_limit_varifold, 0.0)


def test_null_plane_limit():
    result = null_plane_limit(1, 1, (0.9, 0.99, 0.999), C=2.0, dt=0.05)
    assert np.allclose(result.thetas, 2.0 * np.sqrt(1 - np.array([0.9, 0.99, 0.999]) ** 2))
    assert all(b < a for a, b in zip(result.distances, result.distances[1:]))
    assert result.distances[-1] < 0.1 * result.distances[0]
    for V in result.sequence:
        assert np.isclose(V.total_mass(), result.limit.total_mass())

    planes = null_plane_limit(2, 3, (0.9, 0.99), dt=0.1)
    assert planes.limit.points.shape[1] == 4 and planes.limit.null.all()

    raises(JunctionError, null_plane_limit, 3, 2, (0.5,))
    raises(CausalityError, null_plane_limit, 1, 1, (0.5, 1.0))
    raises(LorentzianError, null_plane_limit, 1, 1, (0.99, 0.9))


if __name__ == "__main__":
    run_tests(dict(globals()), "Junction tests")
