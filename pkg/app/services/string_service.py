"""
Closed relativistic and subrelativistic strings in d'Alembert form

    gamma(t, u) = (a(u + t) + b(u - t)) / 2,

their constraints, lorentzian area, and sampling of the world-sheet
Phi(t, u) = (t, gamma(t, u)) into discrete varifolds.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.special import roots_legendre

from ..utils.errors import ClosureError, PatchError, StringDataError
from ..utils.minkowski import null_matrices, projection_from_basis
from ..utils.patches import ParametricPatch
from .varifold_service import DiscreteVarifold

logger = logging.getLogger(__name__)

NULL_CELL_EPS = 1e-6
SPEED_TOL = 1e-9
CLOSURE_TOL = 1e-10


class PeriodicCurve(ABC):
    """L-periodic curve a: R -> R^N with |a'| <= 1 a.e."""

    period: float
    dimension: int = 2

    @abstractmethod
    def value(self, s: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def derivative(self, s: np.ndarray) -> np.ndarray:
        ...

    def corners(self) -> np.ndarray:
        """Parameters in [0, period) where a' jumps."""
        return np.zeros(0)

    def near_corner(self, s: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        c = self.corners()
        if c.size == 0:
            return np.zeros(np.shape(s), bool)
        r = np.mod(np.asarray(s, dtype=float), self.period)
        dist = np.min(np.abs(r[..., None] - np.concatenate([c, [self.period]])), axis=-1)
        return dist <= tol * max(1.0, self.period)

    def speeds(self, samples: int = 4096) -> np.ndarray:
        s = (np.arange(samples) + 0.5) * self.period / samples
        return np.linalg.norm(self.derivative(s), axis=-1)

    @property
    def relativistic(self) -> bool:
        return bool(np.all(np.abs(self.speeds() - 1.0) <= 1e-6))


@dataclass
class CircleCurve(PeriodicCurve):
    """Counterclockwise arclength circle of radius R."""
    radius: float = 1.0
    center: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.radius <= 0:
            raise StringDataError("circle radius must be positive")
        self.period = 2 * np.pi * self.radius
        self.dimension = 2

    def value(self, s):
        phase = np.asarray(s, dtype=float) / self.radius
        return np.stack([self.center[0] + self.radius * np.cos(phase),
                         self.center[1] + self.radius * np.sin(phase)], axis=-1)

    def derivative(self, s):
        phase = np.asarray(s, dtype=float) / self.radius
        return np.stack([-np.sin(phase), np.cos(phase)], axis=-1)

    @property
    def relativistic(self) -> bool:
        return True


@dataclass
class SquareCurve(PeriodicCurve):
    """Counterclockwise arclength boundary of [-L/2, L/2]^2 from (-L/2, -L/2), +x first."""
    side: float = 1.0

    def __post_init__(self):
        if self.side <= 0:
            raise StringDataError("square side must be positive")
        self.period = 4 * self.side
        self.dimension = 2
        h = self.side / 2
        self._corners = np.array([[-h, -h], [h, -h], [h, h], [-h, h]])
        self._directions = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])

    def _side_index(self, s):
        r = np.mod(np.asarray(s, dtype=float), self.period)
        k = np.minimum((r // self.side).astype(int), 3)
        return k, r - k * self.side

    def value(self, s):
        k, r = self._side_index(s)
        return self._corners[k] + r[..., None] * self._directions[k]

    def derivative(self, s):
        k, _ = self._side_index(s)
        return self._directions[k]

    def corners(self):
        return np.arange(4) * self.side

    @property
    def relativistic(self) -> bool:
        return True


@dataclass
class ConstantCurve(PeriodicCurve):
    point: Tuple[float, ...] = (0.0, 0.0)
    period: float = 1.0

    def __post_init__(self):
        self.dimension = len(self.point)

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(np.asarray(self.point, dtype=float), s.shape + (self.dimension,)).copy()

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        return np.zeros(s.shape + (self.dimension,))

    @property
    def relativistic(self) -> bool:
        return False


@dataclass
class RescaledCurve(PeriodicCurve):
    """s -> base(n s) / n; unit speed is preserved and the period L stays a period."""
    base: PeriodicCurve
    factor: int = 1

    def __post_init__(self):
        self.period = self.base.period
        self.dimension = self.base.dimension

    def value(self, s):
        return self.base.value(self.factor * np.asarray(s, dtype=float)) / self.factor

    def derivative(self, s):
        return self.base.derivative(self.factor * np.asarray(s, dtype=float))

    @property
    def relativistic(self) -> bool:
        return self.base.relativistic


class FourierCurve(PeriodicCurve):
    """Unit-speed closed curve a' = (cos psi, sin psi) from a phase psi with psi(s + L) = psi(s) + 2 pi.

    Positions come from the spectral antiderivative of a' on a fine lattice,
    interpolated by a periodic cubic spline; a' itself stays analytic.
    """

    def __init__(self, phase, period: float, samples: int = 2048):
        self.phase = phase
        self.period = float(period)
        self.dimension = 2
        s = np.arange(samples) * self.period / samples
        velocity = self.derivative(s)
        defect = float(np.max(np.abs(velocity.mean(axis=0)))) * self.period
        if defect > CLOSURE_TOL:
            raise ClosureError(f"integral of a' over a period is {defect:.3e}, the curve does not close")
        spectrum = np.fft.rfft(velocity, axis=0)
        k = np.fft.rfftfreq(samples, d=self.period / samples) * 2 * np.pi
        spectrum[0] = 0.0
        spectrum[1:] /= (1j * k[1:])[:, None]
        positions = np.fft.irfft(spectrum, n=samples, axis=0)
        nodes = np.append(s, self.period)
        self._spline = CubicSpline(nodes, np.vstack([positions, positions[:1]]), bc_type="periodic")

    def value(self, s):
        return self._spline(np.mod(np.asarray(s, dtype=float), self.period))

    def derivative(self, s):
        psi = self.phase(np.asarray(s, dtype=float))
        return np.stack([np.cos(psi), np.sin(psi)], axis=-1)

    @property
    def relativistic(self) -> bool:
        return True


class SplineCurve(PeriodicCurve):
    """User data {L, samples: [[s, a_1, ..., a_N], ...]} through a periodic cubic spline."""

    def __init__(self, period: float, samples: Sequence[Sequence[float]]):
        data = np.asarray(samples, dtype=float)
        if data.ndim != 2 or data.shape[1] < 3 or data.shape[0] < 4:
            raise StringDataError("curve samples must be rows [s, a_1, ..., a_N] with N >= 2 and at least 4 rows")
        order = np.argsort(data[:, 0])
        data = data[order]
        if data[0, 0] < 0 or data[-1, 0] >= period:
            raise StringDataError("sample parameters must lie in [0, L)")
        self.period = float(period)
        self.dimension = data.shape[1] - 1
        nodes = np.append(data[:, 0], data[0, 0] + self.period)
        values = np.vstack([data[:, 1:], data[:1, 1:]])
        self._spline = CubicSpline(nodes, values, bc_type="periodic")
        self._offset = data[0, 0]
        top = float(np.max(self.speeds()))
        if top > 1.0 + 1e-6:
            raise StringDataError(f"interpolated curve has speed {top:.6f} > 1")

    def _wrap(self, s):
        return self._offset + np.mod(np.asarray(s, dtype=float) - self._offset, self.period)

    def value(self, s):
        return self._spline(self._wrap(s))

    def derivative(self, s):
        return self._spline(self._wrap(s), 1)


class WorldSheet(ABC):
    """Map (t, u) -> gamma(t, u) in R^N with analytic partials."""

    dimension: int

    @abstractmethod
    def gamma(self, t, u) -> np.ndarray:
        ...

    @abstractmethod
    def gamma_t(self, t, u) -> np.ndarray:
        ...

    @abstractmethod
    def gamma_u(self, t, u) -> np.ndarray:
        ...

    def spacetime_point(self, t, u) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.concatenate([t[..., None], self.gamma(t, u)], axis=-1)

    def world_sheet_patch(self, scale: float = 1.0) -> "StringSheetPatch":
        return StringSheetPatch(self, scale)


@dataclass
class AffineSheet(WorldSheet):
    """gamma = offset + t w + u s"""
    stretch: Tuple[float, ...] = (0.5, 0.0)
    velocity: Tuple[float, ...] = (0.0, 0.0)
    offset: Tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self):
        self.dimension = len(self.stretch)

    def gamma(self, t, u):
        t, u = np.broadcast_arrays(np.asarray(t, float), np.asarray(u, float))
        return (np.asarray(self.offset) + t[..., None] * np.asarray(self.velocity)
                + u[..., None] * np.asarray(self.stretch))

    def gamma_t(self, t, u):
        t, _ = np.broadcast_arrays(np.asarray(t, float), np.asarray(u, float))
        return np.broadcast_to(np.asarray(self.velocity, float), t.shape + (self.dimension,)).copy()

    def gamma_u(self, t, u):
        t, _ = np.broadcast_arrays(np.asarray(t, float), np.asarray(u, float))
        return np.broadcast_to(np.asarray(self.stretch, float), t.shape + (self.dimension,)).copy()


class StringSolution(WorldSheet):
    def __init__(self, a: PeriodicCurve, b: PeriodicCurve, name: str = "string"):
        self.a = a
        self.b = b
        self.name = name
        self.period = a.period
        self.dimension = a.dimension
        self.relativistic = a.relativistic and b.relativistic

    @property
    def flavor(self) -> str:
        return "relativistic" if self.relativistic else "subrelativistic"

    def gamma(self, t, u):
        t, u = np.broadcast_arrays(np.asarray(t, float), np.asarray(u, float))
        return 0.5 * (self.a.value(u + t) + self.b.value(u - t))

    def gamma_t(self, t, u):
        t, u = np.broadcast_arrays(np.asarray(t, float), np.asarray(u, float))
        return 0.5 * (self.a.derivative(u + t) - self.b.derivative(u - t))

    def gamma_u(self, t, u):
        t, u = np.broadcast_arrays(np.asarray(t, float), np.asarray(u, float))
        return 0.5 * (self.a.derivative(u + t) + self.b.derivative(u - t))

    def on_corner_lines(self, t, u) -> np.ndarray:
        t, u = np.broadcast_arrays(np.asarray(t, float), np.asarray(u, float))
        return self.a.near_corner(u + t, 1e-9) | self.b.near_corner(u - t, 1e-9)

    def wave_residual(self, t, u, step: float = 1e-4) -> np.ndarray:
        """gamma_tt - gamma_uu by central second differences of gamma."""
        g = self.gamma(t, u)
        g_tt = (self.gamma(t + step, u) - 2 * g + self.gamma(t - step, u)) / step ** 2
        g_uu = (self.gamma(t, u + step) - 2 * g + self.gamma(t, u - step)) / step ** 2
        return g_tt - g_uu


class StringSheetPatch(ParametricPatch):
    """Phi(t, u) = (t, gamma(t, u)) with tangents (1, gamma_t), (0, gamma_u)."""

    def __init__(self, sheet: WorldSheet, scale: float = 1.0):
        self.sheet = sheet
        self.h = 2
        self.dimension = sheet.dimension + 1
        self.scale = scale

    def point(self, params):
        p = np.atleast_2d(params)
        return self.sheet.spacetime_point(p[:, 0], p[:, 1])

    def tangents(self, params):
        p = np.atleast_2d(params)
        t, u = p[:, 0], p[:, 1]
        e_t = np.concatenate([np.ones((len(p), 1)), self.sheet.gamma_t(t, u)], axis=1)
        e_u = np.concatenate([np.zeros((len(p), 1)), self.sheet.gamma_u(t, u)], axis=1)
        return np.stack([e_t, e_u], axis=-1)


def dalembert(a: PeriodicCurve, b: PeriodicCurve, name: str = "string") -> StringSolution:
    if a.dimension != b.dimension:
        raise StringDataError(f"curves live in R^{a.dimension} and R^{b.dimension}")
    if abs(a.period - b.period) > 1e-12 * max(1.0, a.period):
        raise StringDataError(f"period mismatch: {a.period} vs {b.period}")
    for label, curve in (("a", a), ("b", b)):
        top = float(np.max(curve.speeds()))
        if top > 1.0 + SPEED_TOL:
            raise StringDataError(f"|{label}'| reaches {top:.12f} > 1")
    solution = StringSolution(a, b, name)
    logger.debug("d'Alembert string %s: period %.6g, %s", name, solution.period, solution.flavor)
    return solution


@dataclass
class ConstraintReport:
    orthogonality: float  # max |(gamma_t, gamma_u)|
    energy_defect: float  # max ||gamma_t|^2 + |gamma_u|^2 - 1|
    subrelativistic_excess: float  # max (|gamma_t|^2 + |gamma_u|^2 - 1)
    flagged_points: int
    flavor: str

    @property
    def satisfied(self) -> bool:
        if self.flavor == "relativistic":
            return max(self.orthogonality, self.energy_defect) <= 1e-8
        return self.subrelativistic_excess <= 1e-12


def constraint_report(string: StringSolution, t_values: np.ndarray, u_values: np.ndarray) -> ConstraintReport:
    """Constraint residuals on the grid t_values x u_values; corner-line points are flagged and skipped."""
    T, U = np.meshgrid(np.asarray(t_values, float), np.asarray(u_values, float), indexing="ij")
    flagged = string.on_corner_lines(T, U)
    g_t = string.gamma_t(T, U)[~flagged]
    g_u = string.gamma_u(T, U)[~flagged]
    dot = np.abs(np.sum(g_t * g_u, axis=-1))
    total = np.sum(g_t ** 2, axis=-1) + np.sum(g_u ** 2, axis=-1) - 1.0
    empty = dot.size == 0
    return ConstraintReport(
        orthogonality=0.0 if empty else float(dot.max()),
        energy_defect=0.0 if empty else float(np.abs(total).max()),
        subrelativistic_excess=0.0 if empty else float(total.max()),
        flagged_points=int(flagged.sum()),
        flavor=string.flavor,
    )


def normal_velocity(g_t: np.ndarray, g_u: np.ndarray) -> np.ndarray:
    """gamma_t minus its component along gamma_u; zero where gamma_u vanishes."""
    u_sq = np.sum(g_u ** 2, axis=-1)
    coef = np.where(u_sq > 0, np.sum(g_t * g_u, axis=-1) / np.where(u_sq > 0, u_sq, 1.0), 0.0)
    return g_t - coef[..., None] * g_u


@dataclass
class AreaComparison:
    param: float
    nu: float
    coarea: float

    @property
    def max_relative_deviation(self) -> float:
        values = np.array([self.param, self.nu, self.coarea])
        scale = max(abs(values).max(), 1e-300)
        return float((values.max() - values.min()) / scale)


def area_three_ways(string: WorldSheet, t_range: Tuple[float, float], u_range: Tuple[float, float],
                    nodes: int = 64, eps: float = NULL_CELL_EPS) -> AreaComparison:
    """sigma^2 of Phi([t0, t1] x [u0, u1]) by Gauss-Legendre quadrature, three ways:
    sqrt(-det g); the lorentzian normal density against euclidean area; and the
    coarea form int dt int sqrt(1 - |v|^2) |gamma_u| du."""
    if string.dimension != 2:
        raise PatchError("the normal-density evaluation needs a world-sheet in R^{1+2}")
    x, w = roots_legendre(nodes)
    (t0, t1), (u0, u1) = t_range, u_range
    t = 0.5 * (t1 - t0) * (x + 1) + t0
    u = 0.5 * (u1 - u0) * (x + 1) + u0
    T, U = np.meshgrid(t, u, indexing="ij")
    W = np.outer(w, w) * 0.25 * (t1 - t0) * (u1 - u0)
    g_t = string.gamma_t(T, U)
    g_u = string.gamma_u(T, U)
    speed_u = np.linalg.norm(g_u, axis=-1)
    if np.min(speed_u) < eps:
        raise PatchError("the patch touches the set where gamma_u vanishes")
    u_sq = speed_u ** 2
    dot = np.sum(g_t * g_u, axis=-1)
    minus_det = (1.0 - np.sum(g_t ** 2, axis=-1)) * u_sq + dot ** 2
    if np.min(minus_det) <= 0:
        raise PatchError("the patch is not timelike")
    a_param = float(np.sum(W * np.sqrt(minus_det)))

    ones = np.ones(T.shape)
    tangent_t = np.stack([ones, g_t[..., 0], g_t[..., 1]], axis=-1)
    tangent_u = np.stack([0 * ones, g_u[..., 0], g_u[..., 1]], axis=-1)
    normal = np.cross(tangent_t, tangent_u)
    euclid_area = np.linalg.norm(normal, axis=-1)
    nu = normal / euclid_area[..., None]
    lor_density = np.sqrt(np.maximum(-nu[..., 0] ** 2 + nu[..., 1] ** 2 + nu[..., 2] ** 2, 0.0))
    a_nu = float(np.sum(W * lor_density * euclid_area))

    v = normal_velocity(g_t, g_u)
    a_coarea = float(np.sum(W * np.sqrt(np.maximum(1.0 - np.sum(v ** 2, axis=-1), 0.0)) * speed_u))
    return AreaComparison(param=a_param, nu=a_nu, coarea=a_coarea)


def lorentzian_action(string: WorldSheet, t_range, u_range, nodes: int = 64) -> float:
    """Nambu-Goto action int sqrt(-det g) dt du over a timelike parameter patch."""
    return area_three_ways(string, t_range, u_range, nodes).param


@dataclass
class SurfaceSampling:
    window: Tuple[float, float]
    dt: float
    du: float
    timelike_cells: int
    null_cells: int
    varifold: DiscreteVarifold
    parameters: np.ndarray  # (M, 2) cell midpoints in atom order
    multiplicity: np.ndarray  # Theta^0 on timelike cells, nan on null ones
    sigma_area: np.ndarray  # sigma^2 of each cell image, 0 on null cells
    extras: Dict[str, float] = field(default_factory=dict)


def sample_varifold(string: WorldSheet, t0: float, t1: float, dt: float, du: float,
                    period: Optional[float] = None, null_eps: float = NULL_CELL_EPS) -> SurfaceSampling:
    """Midpoint sampling of [t0, t1) x [0, L) into timelike and null atoms.

    Timelike cells receive V0-tilde weight Theta^0 sigma^2(cell) = (1 - |v|^2) dt du
    with Theta^0 = sqrt(1 - |v|^2) / |gamma_u| and v the normal velocity; null cells
    (|gamma_u| <= null_eps) receive V-infinity weight dt du with v_inf = gamma_t/|gamma_t|.
    Both give mu_V = Phi_# (Lebesgue) cell by cell.
    """
    L = getattr(string, "period", None) if period is None else period
    if L is None or L <= 0:
        raise StringDataError("sampling needs a positive parameter period")
    if not (t1 > t0) or dt <= 0 or du <= 0:
        raise StringDataError(f"invalid window [{t0}, {t1}) or grid widths ({dt}, {du})")
    n_t = max(1, int(round((t1 - t0) / dt)))
    n_u = max(1, int(round(L / du)))
    dt = (t1 - t0) / n_t
    du = L / n_u
    t_mid = t0 + (np.arange(n_t) + 0.5) * dt
    u_mid = (np.arange(n_u) + 0.5) * du
    T, U = np.meshgrid(t_mid, u_mid, indexing="ij")
    T, U = T.reshape(-1), U.reshape(-1)
    points = string.spacetime_point(T, U)
    g_t = string.gamma_t(T, U)
    g_u = string.gamma_u(T, U)
    speed_u = np.linalg.norm(g_u, axis=-1)
    timelike = speed_u > null_eps
    cell = dt * du
    dim = points.shape[1]

    v = normal_velocity(g_t[timelike], g_u[timelike])
    lorentz_factor = np.clip(1.0 - np.sum(v ** 2, axis=-1), 0.0, None)
    basis = np.stack([
        np.concatenate([np.ones((timelike.sum(), 1)), g_t[timelike]], axis=1),
        np.concatenate([np.zeros((timelike.sum(), 1)), g_u[timelike]], axis=1),
    ], axis=-1)
    matrices = np.zeros((len(T), dim, dim))
    matrices[timelike] = projection_from_basis(basis)
    weights = np.empty(len(T))
    weights[timelike] = lorentz_factor * cell

    null = ~timelike
    velocities = np.zeros((len(T), dim - 1))
    if np.any(null):
        g_t_null = g_t[null]
        norms = np.linalg.norm(g_t_null, axis=-1)
        degenerate = norms <= null_eps
        if np.any(degenerate):
            logger.warning("%d null cells with vanishing gamma_t; using the first spatial axis", degenerate.sum())
            g_t_null[degenerate] = np.eye(dim - 1)[0]
            norms[degenerate] = 1.0
        velocities[null] = g_t_null / norms[:, None]
        matrices[null] = null_matrices(velocities[null])
        weights[null] = cell

    multiplicity = np.full(len(T), np.nan)
    multiplicity[timelike] = np.sqrt(lorentz_factor) / speed_u[timelike]
    sigma_area = np.zeros(len(T))
    sigma_area[timelike] = speed_u[timelike] * np.sqrt(lorentz_factor) * cell

    V = DiscreteVarifold(2, dim - 1, points, matrices, null, weights, velocities,
                         provenance=f"{getattr(string, 'name', 'sheet')}[{t0},{t1})/dt={dt:.3g},du={du:.3g}")
    logger.debug("sampled %d timelike and %d null cells", int(timelike.sum()), int(null.sum()))
    return SurfaceSampling(
        window=(t0, t1), dt=dt, du=du,
        timelike_cells=int(timelike.sum()), null_cells=int(null.sum()),
        varifold=V, parameters=np.stack([T, U], axis=-1),
        multiplicity=multiplicity, sigma_area=sigma_area,
    )


def builtin_kink(R: float = 1.0) -> StringSolution:
    """gamma = R (cos(u/R), sin(u/R)) cos(t/R), period 2 pi R."""
    if R <= 0:
        raise StringDataError("kink radius must be positive")
    circle = CircleCurve(radius=R)
    return dalembert(circle, circle, name=f"kink(R={R:g})")


def builtin_cylinder(a: Optional[PeriodicCurve] = None) -> StringSolution:
    """Subrelativistic gamma = a(u + t) / 2 over a unit-speed closed curve."""
    a = CircleCurve(radius=1.0) if a is None else a
    if not a.relativistic:
        raise StringDataError("the cylinder profile must be a unit-speed closed curve")
    return dalembert(a, ConstantCurve(point=(0.0,) * a.dimension, period=a.period), name="cylinder")


def cylinder_approximant(a: Optional[PeriodicCurve] = None, n: int = 8) -> StringSolution:
    """Relativistic gamma_n = (a(u + t) + a(n(u - t)) / n) / 2, converging uniformly to the cylinder."""
    a = CircleCurve(radius=1.0) if a is None else a
    if n < 1:
        raise StringDataError("approximant index must be >= 1")
    return dalembert(a, RescaledCurve(a, n), name=f"cylinder-approximant(n={n})")


def builtin_square(L: float = 1.0) -> StringSolution:
    square = SquareCurve(side=L)
    return dalembert(square, square, name=f"square(L={L:g})")


def singular_times(string: StringSolution, t0: float, t1: float) -> np.ndarray:
    """Times in [t0, t1] where a slice degenerates: kink collapse times, square corner times."""
    a = string.a
    if isinstance(a, CircleCurve) and isinstance(string.b, CircleCurve):
        R = a.radius
        k = np.arange(np.floor((t0 - np.pi * R / 2) / (np.pi * R)), np.ceil((t1 - np.pi * R / 2) / (np.pi * R)) + 1)
        times = np.pi * R / 2 + k * np.pi * R
    elif isinstance(a, SquareCurve):
        half = a.side / 2
        times = np.arange(np.floor(t0 / half), np.ceil(t1 / half) + 1) * half
    else:
        return np.zeros(0)
    return times[(times >= t0) & (times <= t1)]


def slice_speed(string: StringSolution, t: float, u: np.ndarray) -> np.ndarray:
    """|v| of the slice at time t (the kink gives |sin(t/R)|)."""
    t_arr = np.full(np.shape(u), float(t))
    v = normal_velocity(string.gamma_t(t_arr, u), string.gamma_u(t_arr, u))
    return np.linalg.norm(v, axis=-1)


def random_phase(rng: np.random.Generator, period: float, modes: int):
    """Odd phase 2 pi s/L + sum b_m sin(2 pi m s / L); returns (phase without closure term, coefficients)."""
    if modes < 1:
        raise StringDataError("mode count must be >= 1")
    coefficients = rng.normal(scale=0.6, size=modes) / np.arange(1, modes + 1)
    k = 2 * np.pi / period

    def phase(s):
        s = np.asarray(s, dtype=float)
        return k * s + np.sum(coefficients * np.sin(np.multiply.outer(s, k * np.arange(1, modes + 1))), axis=-1)

    return phase, coefficients


def close_phase(phase, period: float, samples: int = 2048):
    """Add c sin(2 pi s / L) so that int cos(psi) = 0; int sin(psi) vanishes by oddness."""
    s = np.arange(samples) * period / samples
    k = 2 * np.pi / period
    base = phase(s)

    def defect(c):
        return float(np.mean(np.cos(base + c * np.sin(k * s))))

    grid = np.linspace(-2.0, 2.0, 41)
    values = np.array([defect(c) for c in grid])
    changes = np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0)
    if changes.size == 0:
        raise ClosureError("no closing amplitude in [-2, 2]")
    # smallest |c| keeps the phase closest to the drawn one
    i = changes[np.argmin(np.abs(grid[changes]))]
    c = brentq(defect, grid[i], grid[i + 1], xtol=1e-15)

    def closed(x):
        return phase(x) + c * np.sin(k * np.asarray(x, dtype=float))

    return closed, c


def random_relativistic_string(seed: int, period: float = 2 * np.pi, modes: int = 3,
                               max_attempts: int = 20) -> StringSolution:
    """Random closed relativistic string with unit-speed a and b drawn from one seed."""
    rng = np.random.default_rng(seed)
    curves: List[FourierCurve] = []
    attempts = 0
    while len(curves) < 2:
        attempts += 1
        if attempts > max_attempts:
            raise ClosureError(f"closure failed {max_attempts} times for seed {seed}")
        phase, _ = random_phase(rng, period, modes)
        try:
            closed, _ = close_phase(phase, period)
            curves.append(FourierCurve(closed, period))
        except ClosureError as exc:
            logger.debug("re-seeding random string (attempt %d): %s", attempts, exc)
    return dalembert(curves[0], curves[1], name=f"random(seed={seed},modes={modes})")


def multiplicity_summary(sampling: SurfaceSampling) -> Dict[str, float]:
    theta = sampling.multiplicity[~np.isnan(sampling.multiplicity)]
    if theta.size == 0:
        return {"min": float("nan"), "max": float("nan"), "mean": float("nan")}
    return {"min": float(theta.min()), "max": float(theta.max()), "mean": float(theta.mean())}
