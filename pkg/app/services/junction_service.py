"""
One-dimensional varifold networks in R^{1+1}: triple junctions of timelike
half-lines, the weighted balance condition, the conservation system and the
null limits.

A half-line is stored with its future-pointing euclidean unit direction and
an orientation: "in" lines lie before the junction point, "out" lines after.
With u_i the lorentz-unit vector pointing from p along line i, the first
variation of the network against a field Y is (Y(p), eta sum theta_i u_i)_e,
so balance, stationarity and conservation of E and P^1 all reduce to
sum theta_i u_i = 0.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, fsolve

from ..utils.errors import CausalityError, JunctionError, LorentzianError
from ..utils.minkowski import NULL_EPS, metric, null_matrices, projection_from_basis
from ..utils.vector_fields import TestVectorField, function_family
from .conservation_service import conservation_report
from .varifold_service import DiscreteVarifold, test_family_distance

logger = logging.getLogger(__name__)

ANGLE_MIN = np.pi / 4
ANGLE_MAX = np.pi / 2
ANGLE_XTOL = 1e-12
ORIENTATIONS = ("in", "out")


def _rotation(quarter_turns: int) -> np.ndarray:
    return np.array([[0.0, -1.0], [1.0, 0.0]]) if quarter_turns > 0 else np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass
class HalfLine:
    origin: np.ndarray
    direction: np.ndarray  # future-pointing, euclidean unit
    theta: float
    orientation: str = "out"

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(2)
        d = np.asarray(self.direction, dtype=float).reshape(2)
        norm = np.linalg.norm(d)
        if norm == 0:
            raise CausalityError("half-line direction is the zero vector")
        d = d / norm
        if d[0] < 0:
            d = -d
        if not (-d[0] ** 2 + d[1] ** 2) < -NULL_EPS:
            raise CausalityError(f"half-line direction {d.tolist()} is not timelike")
        self.direction = d
        if self.theta <= 0:
            raise JunctionError(f"multiplicity must be positive, got {self.theta}")
        if self.orientation not in ORIENTATIONS:
            raise JunctionError(f"orientation must be one of {ORIENTATIONS}")

    @property
    def outward(self) -> np.ndarray:
        """Euclidean unit direction pointing away from the junction."""
        return self.direction if self.orientation == "out" else -self.direction

    @property
    def velocity(self) -> float:
        return float(self.direction[1] / self.direction[0])

    @property
    def unit_outward(self) -> np.ndarray:
        d = self.outward
        return d / np.sqrt(d[0] ** 2 - d[1] ** 2)

    @property
    def frame(self) -> np.ndarray:
        """Spacelike unit normal n with n^0 >= 0 (n = (0, 1) for a static line)."""
        v = self.velocity
        n = np.array([v, 1.0]) / np.sqrt(1.0 - v * v)
        return -n if n[0] < 0 else n

    @property
    def rotation(self) -> np.ndarray:
        """Euclidean quarter turn R with R n = eta u (time component of R n is positive on
        incoming lines, negative on outgoing ones)."""
        target = metric(2) @ self.unit_outward
        for turns in (1, -1):
            R = _rotation(turns)
            if np.allclose(R @ self.frame, target, atol=1e-12):
                return R
        raise LorentzianError("no quarter turn maps the frame onto the conormal")

    @property
    def conormal(self) -> np.ndarray:
        """R applied to the euclidean unit normal."""
        n = self.frame
        return self.rotation @ (n / np.linalg.norm(n))

    def projection(self) -> np.ndarray:
        return projection_from_basis(self.direction.reshape(2, 1))


@dataclass
class JunctionNetwork:
    point: np.ndarray
    lines: List[HalfLine] = field(default_factory=list)

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float).reshape(2)
        for line in self.lines:
            if not np.allclose(line.origin, self.point, atol=1e-12):
                raise JunctionError("all half-lines must start at the junction point")
        if not self.lines:
            raise JunctionError("a network needs at least one half-line")

    @property
    def thetas(self) -> np.ndarray:
        return np.array([line.theta for line in self.lines])

    def to_dict(self) -> Dict:
        return {
            "p": self.point.tolist(),
            "lines": [
                {"dir": line.direction.tolist(), "theta": line.theta, "orientation": line.orientation}
                for line in self.lines
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "JunctionNetwork":
        try:
            p = data["p"]
            lines = [HalfLine(p, item["dir"], float(item["theta"]), item.get("orientation", "out"))
                     for item in data["lines"]]
        except (KeyError, TypeError) as exc:
            raise JunctionError(f"malformed network description: {exc}") from exc
        return cls(point=p, lines=lines)


def balance_residual(net: JunctionNetwork) -> np.ndarray:
    """sum theta_i R_i n_i"""
    return sum(line.theta * (line.rotation @ line.frame) for line in net.lines)


def conormal_boundary_term(net: JunctionNetwork, Y: TestVectorField) -> float:
    """(Y(p), sum theta_i R_i n_i)_e, the first variation of the network for fields
    that are affine on a neighbourhood of the half-lines' far ends."""
    return float(Y.value(net.point.reshape(1, 2))[0] @ balance_residual(net))


def _incoming_axis(p: Sequence[float], theta1: float) -> HalfLine:
    return HalfLine(p, (1.0, 0.0), theta1, "in")


def network_from_angles(theta: Sequence[float], alpha: float, beta: float,
                        p: Sequence[float] = (0.0, 0.0)) -> JunctionNetwork:
    """Splitting: Sigma_1 static before p, Sigma_2 along (sin a, -cos a), Sigma_3 along (sin b, cos b)."""
    t1, t2, t3 = theta
    return JunctionNetwork(p, [
        _incoming_axis(p, t1),
        HalfLine(p, (np.sin(alpha), -np.cos(alpha)), t2, "out"),
        HalfLine(p, (np.sin(beta), np.cos(beta)), t3, "out"),
    ])


def time_reversed(net: JunctionNetwork) -> JunctionNetwork:
    """Image under t -> 2 p^0 - t: a splitting becomes a collision."""
    flip = {"in": "out", "out": "in"}
    lines = [HalfLine(net.point, (line.direction[0], -line.direction[1]), line.theta, flip[line.orientation])
             for line in net.lines]
    return JunctionNetwork(net.point, lines)


def _energy_factor(angle):
    """u^0 of the exiting line at angle a: sin a / sqrt(sin^2 a - cos^2 a)."""
    return np.sin(angle) / np.sqrt(-np.cos(2 * angle))


def _momentum_factor(angle):
    return np.cos(angle) / np.sqrt(-np.cos(2 * angle))


def _check_angle(name: str, value: float) -> None:
    if not ANGLE_MIN < value < ANGLE_MAX:
        raise JunctionError(f"{name} = {value:.15g} outside the admissible range (pi/4, pi/2)")


@dataclass
class SplitSolution:
    theta: Tuple[float, float, float]
    alpha: float
    beta: float
    residual: float

    def to_dict(self) -> Dict:
        return {"theta": list(self.theta), "alpha": self.alpha, "beta": self.beta, "residual": self.residual}


def _solution(theta1, theta2, theta3, alpha, beta) -> SplitSolution:
    net = network_from_angles((theta1, theta2, theta3), alpha, beta)
    return SplitSolution((theta1, theta2, theta3), float(alpha), float(beta),
                         float(np.max(np.abs(balance_residual(net)))))


def solve_angles(theta1: float, theta2: float, theta3: float) -> SplitSolution:
    """Given all multiplicities find (alpha, beta).

    Both exiting lines carry the same momentum magnitude m, so
    theta1 = sqrt(theta2^2 + m^2) + sqrt(theta3^2 + m^2) is bracketed in m; the
    angles follow from cot a = g / sqrt(1 + g^2) with g = m / theta_i and are
    polished on the full system.
    """
    for value in (theta1, theta2, theta3):
        if value <= 0:
            raise JunctionError("multiplicities must be positive")
    if theta2 + theta3 >= theta1:
        raise JunctionError(f"theta2 + theta3 = {theta2 + theta3} must be smaller than theta1 = {theta1}")

    def excess(m):
        return np.hypot(theta2, m) + np.hypot(theta3, m) - theta1

    m = brentq(excess, 0.0, theta1, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def angle(g):
        return float(np.arctan2(np.sqrt(1.0 + g * g), g))

    alpha, beta = angle(m / theta2), angle(m / theta3)

    def system(x):
        a, b = x
        return [theta2 * _energy_factor(a) + theta3 * _energy_factor(b) - theta1,
                theta3 * _momentum_factor(b) - theta2 * _momentum_factor(a)]

    polished, info, ier, msg = fsolve(system, [alpha, beta], full_output=True, xtol=ANGLE_XTOL)
    if ier == 1 and np.max(np.abs(info["fvec"])) <= np.max(np.abs(system([alpha, beta]))):
        alpha, beta = float(polished[0]), float(polished[1])
    else:
        logger.debug("angle polish skipped: %s", msg)
    _check_angle("alpha", alpha)
    _check_angle("beta", beta)
    return _solution(theta1, theta2, theta3, alpha, beta)


def solve_multiplicities(theta1: float, alpha: float, beta: float) -> SplitSolution:
    """Given the angles the system is linear in (theta2, theta3)."""
    if theta1 <= 0:
        raise JunctionError("theta1 must be positive")
    _check_angle("alpha", alpha)
    _check_angle("beta", beta)
    A = np.array([[_energy_factor(alpha), _energy_factor(beta)],
                  [-_momentum_factor(alpha), _momentum_factor(beta)]])
    theta2, theta3 = np.linalg.solve(A, [theta1, 0.0])
    if theta2 <= 0 or theta3 <= 0:
        raise JunctionError(f"non-positive multiplicities ({theta2:.6g}, {theta3:.6g})")
    return _solution(theta1, float(theta2), float(theta3), alpha, beta)


def enumerate_integer_splits(theta1: int) -> List[SplitSolution]:
    """Every integer pair (theta2, theta3) admitting a splitting; the family is not unique."""
    if int(theta1) != theta1 or theta1 < 3:
        raise JunctionError("integer enumeration needs an integer theta1 >= 3")
    theta1 = int(theta1)
    out = []
    for theta2 in range(1, theta1):
        for theta3 in range(1, theta1 - theta2):
            out.append(solve_angles(theta1, theta2, theta3))
    return out


SPLIT_MODES = ("angles", "multiplicities", "enumerate")


def solve_split(theta1: float, mode: str = "angles", theta2: Optional[float] = None,
                theta3: Optional[float] = None, alpha: Optional[float] = None,
                beta: Optional[float] = None) -> List[SplitSolution]:
    if theta1 <= 0:
        raise JunctionError("theta1 must be positive")
    if mode == "angles":
        if theta2 is None or theta3 is None:
            raise JunctionError("mode 'angles' needs theta2 and theta3")
        return [solve_angles(theta1, theta2, theta3)]
    if mode == "multiplicities":
        if alpha is None or beta is None:
            raise JunctionError("mode 'multiplicities' needs alpha and beta")
        return [solve_multiplicities(theta1, alpha, beta)]
    if mode == "enumerate":
        return enumerate_integer_splits(theta1)
    raise JunctionError(f"unknown mode {mode!r}; expected one of {SPLIT_MODES}")


def sample_network(net: JunctionNetwork, length: float = 1.0, dt: float = 1e-2) -> DiscreteVarifold:
    """Midpoint atoms on every half-line over a time span `length` from p.

    Each atom carries V0-tilde weight theta sqrt(1 - v^2) dt, the lorentzian
    length of its piece, so mu_V receives theta dt / sqrt(1 - v^2)."""
    if length <= 0 or dt <= 0:
        raise JunctionError("sampling needs positive length and step")
    count = max(1, int(round(length / dt)))
    dt = length / count
    offsets = (np.arange(count) + 0.5) * dt
    points, matrices, weights = [], [], []
    for line in net.lines:
        sign = 1.0 if line.orientation == "out" else -1.0
        times = net.point[0] + sign * offsets
        xs = net.point[1] + line.velocity * (times - net.point[0])
        points.append(np.stack([times, xs], axis=-1))
        matrices.append(np.broadcast_to(line.projection(), (count, 2, 2)))
        weights.append(np.full(count, line.theta * np.sqrt(1.0 - line.velocity ** 2) * dt))
    return DiscreteVarifold.timelike_atoms(1, np.concatenate(points), np.concatenate(matrices),
                                           np.concatenate(weights), provenance=f"network/dt={dt:.3g}")


@dataclass
class JunctionConservation:
    energy_before: float
    energy_after: float
    momentum_before: float
    momentum_after: float
    balance: np.ndarray

    @property
    def mismatch(self) -> float:
        return max(abs(self.energy_after - self.energy_before), abs(self.momentum_after - self.momentum_before))

    def conserved(self, tol: float = 1e-10) -> bool:
        return self.mismatch <= tol * max(1.0, abs(self.energy_before))


def junction_conservation_check(net: JunctionNetwork, length: float = 1.0, dt: float = 0.05) -> JunctionConservation:
    """E and P^1 on the slices before and after p from the sampled network."""
    V = sample_network(net, length, dt)
    p0 = net.point[0]
    report = conservation_report(V, p0 - length, p0 + length, length / max(1, int(round(length / dt))))
    before = report.times < p0
    after = ~before
    return JunctionConservation(
        energy_before=float(np.mean(report.energy[before])),
        energy_after=float(np.mean(report.energy[after])),
        momentum_before=float(np.mean(report.momentum[before, 0])),
        momentum_after=float(np.mean(report.momentum[after, 0])),
        balance=balance_residual(net),
    )


def null_limit_varifold(theta1: float, p: Sequence[float] = (0.0, 0.0), length: float = 1.0,
                        dt: float = 1e-2) -> DiscreteVarifold:
    """theta1 on the static incoming line, then two null rays x = +-(t - p^0) carrying
    V-infinity density theta1 / (2 sqrt 2) per unit length."""
    if theta1 <= 0:
        raise JunctionError("theta1 must be positive")
    p = np.asarray(p, dtype=float)
    count = max(1, int(round(length / dt)))
    dt = length / count
    offsets = (np.arange(count) + 0.5) * dt
    incoming = DiscreteVarifold.timelike_atoms(
        1, np.stack([p[0] - offsets, np.full(count, p[1])], axis=-1),
        np.broadcast_to(_incoming_axis(p, theta1).projection(), (count, 2, 2)),
        np.full(count, theta1 * dt), provenance="incoming",
    )
    rays = []
    for v in (1.0, -1.0):
        pts = np.stack([p[0] + offsets, p[1] + v * offsets], axis=-1)
        # sqrt(2) dt of length per step
        rays.append(DiscreteVarifold.null_atoms(1, pts, np.full((count, 1), v),
                                                np.full(count, theta1 / (2 * np.sqrt(2)) * np.sqrt(2) * dt)))
    return incoming.concatenate(rays[0]).concatenate(rays[1])


def random_solved_network(rng: np.random.Generator, margin: float = 0.05) -> JunctionNetwork:
    theta1 = float(rng.uniform(1.0, 5.0))
    alpha, beta = rng.uniform(ANGLE_MIN + margin, ANGLE_MAX - margin, size=2)
    solution = solve_multiplicities(theta1, float(alpha), float(beta))
    return network_from_angles(solution.theta, solution.alpha, solution.beta)


def perturbed_network(net: JunctionNetwork, rng: np.random.Generator,
                      low: float = 0.01, high: float = 0.1) -> JunctionNetwork:
    """Same geometry, one exiting multiplicity scaled by 1 + delta."""
    lines = list(net.lines)
    k = int(rng.integers(1, len(lines)))
    delta = float(rng.uniform(low, high))
    line = lines[k]
    lines[k] = HalfLine(line.origin, line.direction, line.theta * (1.0 + delta), line.orientation)
    return JunctionNetwork(net.point, lines)


@dataclass
class NullPlaneLimit:
    sequence: List[DiscreteVarifold]
    limit: DiscreteVarifold
    speeds: np.ndarray
    thetas: np.ndarray
    distances: np.ndarray


def null_plane_limit(h: int, N: int, speeds: Sequence[float], C: float = 1.0,
                     window: Tuple[float, float] = (0.0, 1.0), dt: float = 0.02,
                     family_scales: Sequence[int] = (1, 2)) -> NullPlaneLimit:
    """Timelike h-planes span{(1, b e_1), e_2, ..., e_h} with b -> 1 and
    theta = C sqrt(1 - b^2), against the null plane limit with V-infinity
    density C / sqrt 2 per unit h-area and Q = -(1, e_1) (x) eta(1, e_1)."""
    if not 1 <= h <= N:
        raise JunctionError(f"need 1 <= h <= N, got h = {h}, N = {N}")
    speeds = np.asarray(list(speeds), dtype=float)
    if speeds.size == 0 or np.any(np.abs(speeds) >= 1.0):
        raise CausalityError("plane speeds must lie in (-1, 1)")
    gaps = 1.0 - speeds
    if speeds.size > 1 and np.any(np.diff(gaps) >= 0):
        raise LorentzianError("the planes do not approach a null plane: 1 - b must decrease strictly")
    if C <= 0:
        raise JunctionError("limit constant must be positive")

    t0, t1 = window
    n_t = max(1, int(round((t1 - t0) / dt)))
    dt = (t1 - t0) / n_t
    axes = [t0 + (np.arange(n_t) + 0.5) * dt] + [(np.arange(n_t) + 0.5) * dt / (t1 - t0)] * (h - 1)
    params = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, h)
    cell = dt * (dt / (t1 - t0)) ** (h - 1)
    dim = N + 1

    def embed(beta):
        pts = np.zeros((len(params), dim))
        pts[:, 0] = params[:, 0]
        pts[:, 1] = beta * params[:, 0]
        pts[:, 2:h + 1] = params[:, 1:]
        return pts

    e1 = np.zeros(N)
    e1[0] = 1.0
    sequence, thetas = [], []
    for beta in speeds:
        basis = np.zeros((dim, h))
        basis[0, 0] = 1.0
        basis[1, 0] = beta
        for j in range(1, h):
            basis[j + 1, j] = 1.0
        theta = C * np.sqrt(1.0 - beta ** 2)
        P = projection_from_basis(basis)
        sequence.append(DiscreteVarifold.timelike_atoms(
            h, embed(beta), np.broadcast_to(P, (len(params), dim, dim)),
            np.full(len(params), theta * np.sqrt(1.0 - beta ** 2) * cell), provenance=f"plane(b={beta:.6g})"))
        thetas.append(theta)
    limit = DiscreteVarifold(h, N, embed(1.0), np.broadcast_to(null_matrices(e1), (len(params), dim, dim)),
                             np.ones(len(params), bool), np.full(len(params), C * cell),
                             np.broadcast_to(e1, (len(params), N)), provenance="null-plane")

    reach = max(abs(t0), abs(t1), 1.0)
    lo = np.full(dim, -reach - 0.25)
    hi = np.full(dim, reach + 0.25)
    lo[0], hi[0] = t0 - 0.25, t1 + 0.25
    family = function_family(lo, hi, family_scales)
    distances = np.array([test_family_distance(V, limit, family) for V in sequence])
    logger.debug("null plane limit: distances %s", distances)
    return NullPlaneLimit(sequence, limit, speeds, np.array(thetas), distances)
