"""
First variation of discrete varifolds and tangential calculus on analytic patches.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from decouple import config

from ..utils.errors import DimensionMismatchError, EmptyFamilyError, PatchError
from ..utils.minkowski import metric
from ..utils.patches import FD_STEP, ParametricPatch
from ..utils.vector_fields import TestVectorField
from .varifold_service import DiscreteVarifold

logger = logging.getLogger(__name__)

CONSISTENCY_TOL = 1e-6


def worker_count() -> Optional[int]:
    threads = config("LORVAR_THREADS", default=0, cast=int)
    return threads if threads > 0 else None


def first_variation(V: DiscreteVarifold, Y: TestVectorField) -> float:
    """sum_timelike w tr(P dY(z)) + sum_null w tr(Q dY(z))"""
    if Y.dimension != V.dimension:
        raise DimensionMismatchError(f"field on R^{Y.dimension}, varifold in R^{V.dimension}")
    if len(V) == 0:
        return 0.0
    box = Y.support()
    if box is None:
        mask = np.ones(len(V), bool)
    else:
        lo, hi = box
        mask = np.all((V.points > lo) & (V.points < hi), axis=1)
    if not np.any(mask):
        return 0.0
    jac = Y.jacobian(V.points[mask])
    traces = np.einsum("mab,mba->m", V.matrices[mask], jac)
    return float(np.sum(V.weights[mask] * traces))


@dataclass
class FieldVariation:
    label: str
    center: List[float]
    scale: float
    direction: int
    delta: float
    c1_norm: float

    @property
    def normalized(self) -> float:
        return abs(self.delta) / self.c1_norm if self.c1_norm > 0 else 0.0


@dataclass
class VariationReport:
    family_size: int
    max_abs: float
    residual: float  # max |dV(Y)| / ||Y||_C1
    rows: List[FieldVariation] = field(default_factory=list)

    def is_stationary(self, tau: float) -> bool:
        return self.residual <= tau

    def to_dict(self) -> Dict:
        return {
            "family_size": self.family_size,
            "max_abs": self.max_abs,
            "residual": self.residual,
            "rows": [asdict(r) for r in self.rows],
        }


def stationarity_residual(V: DiscreteVarifold, family: Sequence[TestVectorField]) -> VariationReport:
    if not family:
        raise EmptyFamilyError("stationarity needs at least one test field")

    def evaluate(Y: TestVectorField) -> FieldVariation:
        center = getattr(Y, "center", None)
        return FieldVariation(
            label=Y.label,
            center=[] if center is None else [float(c) for c in center],
            scale=float(getattr(Y, "scale", 0.0)),
            direction=int(getattr(Y, "direction", -1)),
            delta=first_variation(V, Y),
            c1_norm=Y.c1_norm(),
        )

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(evaluate, family))
    report = VariationReport(
        family_size=len(rows),
        max_abs=max(abs(r.delta) for r in rows),
        residual=max(r.normalized for r in rows),
        rows=rows,
    )
    logger.debug("stationarity residual %.3e over %d fields (%s)", report.residual, len(rows), V.provenance)
    return report


class _TangentialCalculus:
    """Induced metric data at patch points: G^{-1} and eta e_b."""

    def __init__(self, patch: ParametricPatch, params: np.ndarray):
        self.patch = patch
        self.params = np.atleast_2d(np.asarray(params, dtype=float))
        self.basis = patch.tangents(self.params)
        G = patch.check_timelike(self.params)
        self.g_inv = np.linalg.inv(G)
        self.eta_basis = metric(patch.dimension) @ self.basis  # (M, D, h)
        self.projection = self.basis @ self.g_inv @ np.swapaxes(self.eta_basis, -1, -2)

    def gradient(self, d_scalar: np.ndarray) -> np.ndarray:
        """Tangential differential (covector) from parameter derivatives (M, h)."""
        return np.einsum("mab,ma,mBb->mB", self.g_inv, d_scalar, self.eta_basis)

    def divergence(self, d_vector: np.ndarray) -> np.ndarray:
        """div X from parameter derivatives of X with shape (M, D, h)."""
        return np.einsum("mab,mBb,mBa->m", self.g_inv, self.eta_basis, d_vector)

    def tensor_divergence(self, d_tensor: np.ndarray) -> np.ndarray:
        """(div T)_alpha = sum G^{ab} (eta e_b)_beta d_a T^beta_alpha for (M, D, D, h) input."""
        return np.einsum("mab,mBb,mBAa->mA", self.g_inv, self.eta_basis, d_tensor)


def tangential_divergence(surface: ParametricPatch, Y: TestVectorField, params: np.ndarray) -> np.ndarray:
    """tr(P_Sigma dY) at the patch points Phi(params)."""
    calc = _TangentialCalculus(surface, params)
    jac = Y.jacobian(surface.point(calc.params))
    return np.einsum("mab,mba->m", calc.projection, jac)


def tangential_gradient(surface: ParametricPatch, fn: Callable[[np.ndarray], np.ndarray],
                        params: np.ndarray) -> np.ndarray:
    """d_tau f for a scalar f on spacetime, restricted to the patch."""
    calc = _TangentialCalculus(surface, params)
    d = surface.parameter_derivative(lambda s: fn(surface.point(s)), calc.params)
    return calc.gradient(d)


def mean_curvature(surface: ParametricPatch, params: np.ndarray) -> np.ndarray:
    """H = sum_j div_tau(n_j) n_j from central differences of the normal frame.

    Frames at neighbouring parameters are sign-aligned with the frame at the
    base point; the result is checked against div_tau P = -eta H.
    """
    calc = _TangentialCalculus(surface, params)
    frames = surface.frame(calc.params)  # (M, k, D)
    step = FD_STEP * surface.scale
    d_frames = np.empty(frames.shape + (surface.h,))
    for a in range(surface.h):
        shift = np.zeros(surface.h)
        shift[a] = step
        plus = surface.frame(calc.params + shift, reference=frames)
        minus = surface.frame(calc.params - shift, reference=frames)
        d_frames[..., a] = (plus - minus) / (2 * step)
    H = np.zeros((len(calc.params), surface.dimension))
    for j in range(frames.shape[1]):
        div_n = calc.divergence(d_frames[:, j])
        H += div_n[:, None] * frames[:, j]
    div_P = projection_divergence(surface, calc.params)
    defect = float(np.max(np.abs(div_P + H @ metric(surface.dimension)))) if len(H) else 0.0
    if defect > CONSISTENCY_TOL:
        raise PatchError(f"normal frame not differentiable: |div P + eta H| = {defect:.3e}")
    return H


def projection_divergence(surface: ParametricPatch, params: np.ndarray) -> np.ndarray:
    """div_tau P_Sigma as a covector, by differences of the projection field."""
    calc = _TangentialCalculus(surface, params)
    d_proj = surface.parameter_derivative(surface.projection, calc.params)
    return calc.tensor_divergence(d_proj)


def weak_stationarity_residual(surface: ParametricPatch,
                               pbar: Callable[[np.ndarray], np.ndarray],
                               theta: Callable[[np.ndarray], np.ndarray],
                               params: np.ndarray,
                               range_tol: float = 1e-8) -> float:
    """sup | Pbar d_tau theta + theta div_tau Pbar | over the parameter grid.

    `pbar` and `theta` are fields along the patch, i.e. functions of the patch
    parameters. Range(Pbar) must lie in the tangent plane.
    """
    calc = _TangentialCalculus(surface, params)
    bar = pbar(calc.params)
    th = theta(calc.params)
    leak = float(np.max(np.abs(calc.projection @ bar - bar)))
    scale = max(1.0, float(np.max(np.abs(bar))))
    if leak > range_tol * scale:
        raise PatchError(f"Range(Pbar) leaves the tangent plane by {leak:.3e}")
    d_theta = surface.parameter_derivative(theta, calc.params)
    d_bar = surface.parameter_derivative(pbar, calc.params)
    dtau_theta = calc.gradient(d_theta)
    transport = np.einsum("mB,mBA->mA", dtau_theta, bar)
    residual = transport + th[:, None] * calc.tensor_divergence(d_bar)
    return float(np.max(np.abs(residual)))
