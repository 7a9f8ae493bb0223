"""
Compactly supported test objects: scalar bumps, vector fields Y with exact
Jacobians (arguments of the first variation), and product test functions
f(z, P) = phi(z) g(q(P)) P^0_0 (arguments of the varifold action).

Every evaluator is batched: points have shape (M, N+1).
"""

import itertools
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatchError, EmptyFamilyError

logger = logging.getLogger(__name__)

# sup |b'| for b(s) = (1 - s^2)^2, attained at s = 1/sqrt(3)
BUMP_SLOPE_MAX = 8.0 / (3.0 * np.sqrt(3.0))


def bump_profile(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """b(s) = (1 - s^2)^2 on [-1, 1] and its derivative, zero outside."""
    inside = np.abs(s) < 1.0
    one_minus = np.where(inside, 1.0 - s * s, 0.0)
    return one_minus * one_minus, np.where(inside, -4.0 * s * one_minus, 0.0)


@dataclass(frozen=True)
class ScalarBump:
    """phi(z) = prod_alpha b((z^alpha - c^alpha) / r^alpha)"""
    center: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "radii", np.asarray(self.radii, dtype=float))
        if self.center.shape != self.radii.shape:
            raise DimensionMismatchError("bump center and radii differ in dimension")
        if np.any(self.radii <= 0):
            raise ValueError("bump radii must be positive")

    @property
    def dimension(self) -> int:
        return self.center.shape[0]

    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.center - self.radii, self.center + self.radii

    def _factors(self, points: np.ndarray):
        s = (np.atleast_2d(points) - self.center) / self.radii
        return bump_profile(s)

    def value(self, points: np.ndarray) -> np.ndarray:
        b, _ = self._factors(points)
        return np.prod(b, axis=-1)

    def gradient(self, points: np.ndarray) -> np.ndarray:
        b, db = self._factors(points)
        grad = np.empty_like(b)
        for axis in range(b.shape[-1]):
            others = np.prod(np.delete(b, axis, axis=-1), axis=-1)
            grad[:, axis] = db[:, axis] / self.radii[axis] * others
        return grad

    def sup_gradient(self) -> float:
        return float(BUMP_SLOPE_MAX / np.min(self.radii))


class TestVectorField(ABC):
    """Compactly supported C^1 vector field Y with exact Jacobian dY[alpha][beta] = d_beta Y^alpha."""
    __test__ = False

    label: str = ""

    @property
    @abstractmethod
    def dimension(self) -> int:
        ...

    @abstractmethod
    def value(self, points: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def jacobian(self, points: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def support(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        ...

    def _sample_points(self, per_axis: int = 9) -> np.ndarray:
        box = self.support()
        lo, hi = box if box is not None else (-np.ones(self.dimension), np.ones(self.dimension))
        axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dimension)

    def c1_norm(self) -> float:
        """sup|Y| + sup|dY| (entrywise max), sampled on a lattice over the support."""
        pts = self._sample_points()
        return float(np.max(np.abs(self.value(pts))) + np.max(np.abs(self.jacobian(pts))))


@dataclass(frozen=True)
class BumpField(TestVectorField):
    """Y(z) = phi(z) (c + A z); without a bump the field is globally affine."""
    bump: Optional[ScalarBump]
    constant: np.ndarray
    linear: Optional[np.ndarray] = None
    label: str = ""
    center: Optional[np.ndarray] = None
    scale: float = 0.0
    direction: int = -1

    def __post_init__(self):
        object.__setattr__(self, "constant", np.asarray(self.constant, dtype=float))
        if self.linear is not None:
            object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float))

    @property
    def dimension(self) -> int:
        return self.constant.shape[0]

    def _affine(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        out = np.broadcast_to(self.constant, pts.shape).copy()
        if self.linear is not None:
            out += pts @ self.linear.T
        return out

    def value(self, points: np.ndarray) -> np.ndarray:
        affine = self._affine(points)
        if self.bump is None:
            return affine
        return self.bump.value(points)[:, None] * affine

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        m, dim = pts.shape
        lin = self.linear if self.linear is not None else np.zeros((dim, dim))
        if self.bump is None:
            return np.broadcast_to(lin, (m, dim, dim)).copy()
        phi = self.bump.value(pts)
        return phi[:, None, None] * lin + self._affine(pts)[:, :, None] * self.bump.gradient(pts)[:, None, :]

    def support(self):
        return None if self.bump is None else self.bump.support()

    def c1_norm(self) -> float:
        if self.bump is not None and self.linear is None:
            amplitude = float(np.max(np.abs(self.constant)))
            return amplitude * (1.0 + self.bump.sup_gradient())
        return super().c1_norm()

    @classmethod
    def directional(cls, center, radii, axis: int, label: str = "") -> "BumpField":
        center = np.asarray(center, dtype=float)
        direction = np.zeros_like(center)
        direction[axis] = 1.0
        return cls(
            bump=ScalarBump(center, radii),
            constant=direction,
            label=label or f"e{axis}@{np.round(center, 6).tolist()}",
            center=center,
            scale=float(np.max(radii)),
            direction=axis,
        )


@dataclass(frozen=True)
class ProductField(TestVectorField):
    """psi Y for a scalar bump psi."""
    scalar: ScalarBump
    inner: TestVectorField
    label: str = "product"

    @property
    def dimension(self) -> int:
        return self.inner.dimension

    def value(self, points):
        return self.scalar.value(points)[:, None] * self.inner.value(points)

    def jacobian(self, points):
        pts = np.atleast_2d(points)
        return (self.scalar.value(pts)[:, None, None] * self.inner.jacobian(pts)
                + self.inner.value(pts)[:, :, None] * self.scalar.gradient(pts)[:, None, :])

    def support(self):
        return self.scalar.support()


def validate_jacobian(vector_field: TestVectorField, points: np.ndarray, step: float = 1e-6) -> float:
    """Max deviation between the stored Jacobian and central differences."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dim = pts.shape[1]
    fd = np.empty((pts.shape[0], dim, dim))
    for beta in range(dim):
        shift = np.zeros(dim)
        shift[beta] = step
        fd[:, :, beta] = (vector_field.value(pts + shift) - vector_field.value(pts - shift)) / (2 * step)
    return float(np.max(np.abs(fd - vector_field.jacobian(pts))))


def bump_family(lo: Sequence[float], hi: Sequence[float], scales: Iterable[int] = (1, 2, 4),
                directions: Optional[Sequence[int]] = None) -> List[BumpField]:
    """Deterministic lattice of bump fields inside the box [lo, hi].

    At scale k each axis carries k bumps of radius w = (hi - lo)/(k + 1) centred
    at lo + (i + 1) w, so every support stays inside the box.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    scales = list(scales)
    if np.any(hi <= lo):
        raise ValueError(f"degenerate family box {lo.tolist()} .. {hi.tolist()}")
    dim = lo.shape[0]
    axes = list(range(dim)) if directions is None else list(directions)
    family: List[BumpField] = []
    for k in scales:
        width = (hi - lo) / (k + 1)
        for index in itertools.product(range(k), repeat=dim):
            center = lo + (np.asarray(index) + 1.0) * width
            for axis in axes:
                family.append(BumpField.directional(center, width, axis, label=f"k{k}:{list(index)}:e{axis}"))
    logger.debug("bump family: %d fields over %d scales", len(family), len(scales))
    return family


@dataclass(frozen=True)
class GrassmannFactor:
    """g(Q) = c + sum C_{alpha beta} Q^alpha_beta on the closed model set."""
    constant: float = 1.0
    coefficients: Optional[np.ndarray] = None
    label: str = "1"

    def __call__(self, matrices: np.ndarray) -> np.ndarray:
        mats = np.asarray(matrices, dtype=float)
        out = np.full(mats.shape[0], self.constant)
        if self.coefficients is not None:
            out = out + np.einsum("mab,ab->m", mats, self.coefficients)
        return out

    @classmethod
    def entry(cls, dim: int, alpha: int, beta: int) -> "GrassmannFactor":
        coefficients = np.zeros((dim, dim))
        coefficients[alpha, beta] = 1.0
        return cls(constant=0.0, coefficients=coefficients, label=f"Q[{alpha}][{beta}]")


@dataclass(frozen=True)
class TestFunction:
    """f(z, P) = phi(z) g(q(P)) P^0_0 with recession value f_inf(z, Q) = phi(z) g(Q)."""
    __test__ = False

    phi: Optional[ScalarBump]
    g: GrassmannFactor = field(default_factory=GrassmannFactor)
    label: str = ""

    def spatial(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.ones(pts.shape[0]) if self.phi is None else self.phi.value(pts)

    def timelike(self, points: np.ndarray, projections: np.ndarray) -> np.ndarray:
        p00 = projections[:, 0, 0]
        return self.spatial(points) * self.g(projections / p00[:, None, None]) * p00

    def recession(self, points: np.ndarray, null_matrices: np.ndarray) -> np.ndarray:
        return self.spatial(points) * self.g(null_matrices)


def function_family(lo: Sequence[float], hi: Sequence[float], scales: Iterable[int] = (1, 2)) -> List[TestFunction]:
    """Bumps on the same lattice as `bump_family`, each paired with g = 1 and every
    matrix entry except the 0-0 one (which is identically 1 on the model set)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    dim = lo.shape[0]
    factors = [GrassmannFactor()] + [
        GrassmannFactor.entry(dim, a, b) for a in range(dim) for b in range(dim) if (a, b) != (0, 0)
    ]
    family: List[TestFunction] = []
    for k in scales:
        width = (hi - lo) / (k + 1)
        for index in itertools.product(range(k), repeat=dim):
            bump = ScalarBump(lo + (np.asarray(index) + 1.0) * width, width)
            for g in factors:
                family.append(TestFunction(phi=bump, g=g, label=f"k{k}:{list(index)}:{g.label}"))
    if not family:
        raise EmptyFamilyError("no scales given for the test-function family")
    return family


