"""
Lorentzian linear algebra on Minkowski spacetime R^{1+N}.

Conventions used throughout the package:
  * index 0 is time, c = 1, metric eta = diag(-1, 1, ..., 1)
  * matrices are stored dense and row-major with P[alpha][beta] = P^alpha_beta
  * a timelike h-plane is represented by its lorentzian orthogonal projection P,
    a null h-plane by Q = -(1, v) (x) eta(1, v) with |v| = 1
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.linalg import null_space

from .errors import (
    CausalityError,
    DegenerateBasisError,
    DimensionMismatchError,
    LorentzianError,
    NonLorentzError,
    NonUnitVelocityError,
    NotInImageError,
    ZeroVectorError,
)

logger = logging.getLogger(__name__)

NULL_EPS = 1e-9
PROJECTION_TOL = 1e-9
MAX_SPATIAL_DIM = 8


class CausalType(Enum):
    SPACELIKE = "spacelike"
    TIMELIKE = "timelike"
    NULL = "null"


@dataclass(frozen=True)
class CausalClass:
    kind: CausalType
    square: float  # (v, v)


def metric(dim: int) -> np.ndarray:
    """eta = diag(-1, 1, ..., 1) of size dim = N + 1"""
    eta = np.eye(dim)
    eta[0, 0] = -1.0
    return eta


def as_vector(v: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise DimensionMismatchError(f"expected a vector in R^(1+N) with N >= 1, got shape {arr.shape}")
    if arr.shape[0] - 1 > MAX_SPATIAL_DIM:
        raise DimensionMismatchError(f"N = {arr.shape[0] - 1} exceeds the supported maximum {MAX_SPATIAL_DIM}")
    if not np.all(np.isfinite(arr)):
        raise LorentzianError("vector components must be finite")
    return arr


def lower(v: np.ndarray) -> np.ndarray:
    """eta v, works on the last axis of batched input"""
    out = np.array(v, dtype=float, copy=True)
    out[..., 0] = -out[..., 0]
    return out


def lorentz_product(v: Sequence[float], w: Sequence[float]) -> float:
    v_arr, w_arr = as_vector(v), as_vector(w)
    if v_arr.shape != w_arr.shape:
        raise DimensionMismatchError(f"dimension mismatch: {v_arr.shape[0]} vs {w_arr.shape[0]}")
    return float(-v_arr[0] * w_arr[0] + v_arr[1:] @ w_arr[1:])


def classify(v: Sequence[float]) -> CausalClass:
    """Causal character of v with relative tolerance NULL_EPS on (v, v)."""
    arr = as_vector(v)
    euclid_sq = float(arr @ arr)
    if euclid_sq == 0.0:
        raise ZeroVectorError("the zero vector has no causal character")
    square = lorentz_product(arr, arr)
    if square < -NULL_EPS * euclid_sq:
        kind = CausalType.TIMELIKE
    elif square > NULL_EPS * euclid_sq:
        kind = CausalType.SPACELIKE
    else:
        kind = CausalType.NULL
    return CausalClass(kind=kind, square=square)


@dataclass(frozen=True)
class NormalFrame:
    """Lorentz-orthonormal spacelike normals n_1, ..., n_{N+1-h} of a timelike h-plane."""
    h: int
    vectors: np.ndarray  # shape (N + 1 - h, N + 1)

    def __post_init__(self):
        vecs = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        object.__setattr__(self, "vectors", vecs)
        dim = vecs.shape[1]
        if vecs.shape[0] != dim - self.h or self.h < 1:
            raise DimensionMismatchError(
                f"a frame for h = {self.h} in R^{dim} needs {dim - self.h} vectors, got {vecs.shape[0]}"
            )
        gram = vecs @ metric(dim) @ vecs.T
        # rounding in <n, n> grows with the euclidean size of a strongly boosted n_1
        scale = max(1.0, float(np.max(np.sum(vecs * vecs, axis=1))))
        if np.max(np.abs(gram - np.eye(vecs.shape[0]))) > PROJECTION_TOL * scale:
            raise LorentzianError("frame vectors are not lorentz-orthonormal")
        if vecs[0, 0] < -PROJECTION_TOL or np.any(np.abs(vecs[1:, 0]) > PROJECTION_TOL):
            raise LorentzianError("n_1 must have nonnegative time component and n_2.. zero time component")

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    @property
    def n1(self) -> np.ndarray:
        return self.vectors[0]


@dataclass(frozen=True)
class TimelikeProjection:
    matrix: np.ndarray
    h: int

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))

    @property
    def p00(self) -> float:
        return float(self.matrix[0, 0])

    def invariant_errors(self) -> dict:
        return {name: float(value[0]) for name, value in invariant_errors(self.matrix[None], self.h).items()}

    def validate(self, tol: float = PROJECTION_TOL) -> "TimelikeProjection":
        errors = self.invariant_errors()
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        bad = {k: v for k, v in errors.items() if v > tol * scale * scale}
        if bad:
            raise LorentzianError(f"not a lorentzian projection onto a timelike {self.h}-plane: {bad}")
        return self


@dataclass(frozen=True)
class NullProjection:
    velocity: np.ndarray  # v_inf, |v_inf| = 1
    matrix: np.ndarray


GrassmannAtom = Union[TimelikeProjection, NullProjection]


def _lexicographically_positive(vec: np.ndarray) -> np.ndarray:
    nonzero = np.flatnonzero(np.abs(vec) > 1e-14)
    if nonzero.size and vec[nonzero[0]] < 0:
        return -vec
    return vec


def _canonical_spatial_basis(subspace: np.ndarray, count: int) -> List[np.ndarray]:
    """Gram-Schmidt of the projected spatial coordinate axes e_1, e_2, ... onto a
    purely spatial subspace (columns of `subspace`, time components zero)."""
    dim = subspace.shape[0]
    if count == 0:
        return []
    q, _ = np.linalg.qr(subspace)
    projector = q @ q.T
    accepted: List[np.ndarray] = []
    for axis in range(1, dim):
        r = projector[:, axis].copy()
        for a in accepted:
            r -= (a @ r) * a
        norm = np.linalg.norm(r)
        if norm > 1e-10:
            accepted.append(_lexicographically_positive(r / norm))
        if len(accepted) == count:
            break
    if len(accepted) != count:
        raise DegenerateBasisError("could not complete the spatial part of the normal frame")
    return accepted


def frame_from_tangent_basis(basis: Sequence[Sequence[float]]) -> NormalFrame:
    """Distinguished normal frame of the timelike plane spanned by `basis`.

    n_2.. are spatial; n_1 carries the whole time component (n_1^0 >= 0).
    When e_0 lies in the plane every normal is spatial and the frame is the
    canonical Gram-Schmidt basis of the spatial complement.
    """
    B = np.array([as_vector(b) for b in basis]).T
    if B.ndim != 2 or B.shape[1] == 0:
        raise DegenerateBasisError("empty tangent basis")
    dim, h = B.shape
    if h >= dim:
        raise DegenerateBasisError(f"h = {h} must be smaller than N + 1 = {dim}")
    if np.linalg.matrix_rank(B, tol=1e-12 * max(1.0, np.abs(B).max())) < h:
        raise DegenerateBasisError("tangent basis vectors are linearly dependent")

    eta = metric(dim)
    induced = B.T @ eta @ B
    eigenvalues = np.linalg.eigvalsh(induced)
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    negative = int(np.sum(eigenvalues < -NULL_EPS * scale))
    degenerate = int(np.sum(np.abs(eigenvalues) <= NULL_EPS * scale))
    if negative != 1 or degenerate:
        kind = "null" if degenerate else "spacelike"
        raise CausalityError(f"the tangent basis spans a {kind} plane, not a timelike one")

    normals = null_space(B.T @ eta)  # columns span the lorentzian complement
    k = normals.shape[1]
    e0 = np.zeros(dim)
    e0[0] = 1.0
    coeffs, *_ = np.linalg.lstsq(B, e0, rcond=None)
    contains_time_axis = np.linalg.norm(B @ coeffs - e0) < 1e-12

    if contains_time_axis:
        normals[0, :] = 0.0
        vectors = _canonical_spatial_basis(normals, k)
        return NormalFrame(h=h, vectors=np.array(vectors))

    spatial_coeffs = null_space(normals[0:1, :])
    spatial = normals @ spatial_coeffs
    spatial[0, :] = 0.0
    others = _canonical_spatial_basis(spatial, k - 1)
    candidate = normals[:, np.argmax(np.abs(normals[0, :]))].copy()
    for m in others:
        candidate -= (m @ candidate) * m
    norm_sq = lorentz_product(candidate, candidate)
    if norm_sq <= 0:
        raise CausalityError("normal complement is not spacelike")
    n1 = candidate / np.sqrt(norm_sq)
    if n1[0] < 0:
        n1 = -n1
    return NormalFrame(h=h, vectors=np.array([n1] + others))


def projections_from_frames(frames: np.ndarray) -> np.ndarray:
    """Batched P = Id - sum_j n_j (x) eta n_j for stacked frames of shape (M, N+1-h, N+1)."""
    n = np.asarray(frames, dtype=float)
    return np.eye(n.shape[-1]) - np.einsum("mka,mkb->mab", n, lower(n))


def invariant_errors(P: np.ndarray, h: int) -> dict:
    """Per-matrix defects of stacked projections (M, N+1, N+1) onto timelike h-planes."""
    P = np.asarray(P, dtype=float)
    etaP = P.copy()
    etaP[:, 0, :] = -etaP[:, 0, :]
    return {
        "idempotence": np.max(np.abs(P @ P - P), axis=(1, 2)),
        "trace": np.abs(np.trace(P, axis1=1, axis2=2) - h),
        "eta_symmetry": np.max(np.abs(etaP - np.swapaxes(etaP, 1, 2)), axis=(1, 2)),
        "p00_deficit": np.maximum(0.0, 1.0 - P[:, 0, 0]),
    }


def projection_from_frame(frame: NormalFrame) -> TimelikeProjection:
    """P = Id - sum_j n_j (x) eta n_j"""
    P = projections_from_frames(frame.vectors[None])[0]
    return TimelikeProjection(matrix=P, h=frame.h).validate()


def projection_from_basis(basis: np.ndarray) -> np.ndarray:
    """Batched P = B G^{-1} B^T eta for tangent bases of shape (..., N+1, h).

    G = B^T eta B is the induced metric; no frame is formed, so this is the
    fast path used by the samplers. Causality is the caller's responsibility.
    """
    B = np.asarray(basis, dtype=float)
    Bt_eta = np.swapaxes(B, -1, -2).copy()
    Bt_eta[..., 0] = -Bt_eta[..., 0]
    G = Bt_eta @ B
    return B @ np.linalg.solve(G, Bt_eta)


def q_embed(P: Union[TimelikeProjection, np.ndarray]) -> np.ndarray:
    matrix = P.matrix if isinstance(P, TimelikeProjection) else np.asarray(P, dtype=float)
    return matrix / matrix[..., 0:1, 0:1]


def q_inverse(Q: np.ndarray, tol: float = PROJECTION_TOL) -> TimelikeProjection:
    """Recover P from q(P) = P / P^0_0 using tr(Q) / tr(Q^2) = P^0_0."""
    Q = np.asarray(Q, dtype=float)
    tr_q = float(np.trace(Q))
    tr_q2 = float(np.trace(Q @ Q))
    if abs(tr_q2) <= tol or tr_q <= 0:
        raise NotInImageError("matrix lies on the null boundary or outside the model set")
    p00 = tr_q / tr_q2
    if p00 < 1.0 - tol:
        raise NotInImageError(f"recovered P^0_0 = {p00:.6g} < 1")
    P = p00 * Q
    h = int(round(float(np.trace(P))))
    try:
        return TimelikeProjection(matrix=P, h=h).validate(tol)
    except LorentzianError as exc:
        raise NotInImageError(str(exc)) from exc


def null_matrices(velocity: np.ndarray) -> np.ndarray:
    """Batched Q = -(1, v) (x) eta(1, v) for velocities of shape (..., N)."""
    v = np.asarray(velocity, dtype=float)
    ones = np.ones(v.shape[:-1] + (1,))
    up = np.concatenate([ones, v], axis=-1)
    low = np.concatenate([ones, -v], axis=-1)
    return up[..., :, None] * low[..., None, :]


def null_projection(velocity: Sequence[float]) -> NullProjection:
    v = np.asarray(velocity, dtype=float).reshape(-1)
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise NonUnitVelocityError(f"|v_inf| = {np.linalg.norm(v):.15g}, expected 1")
    return NullProjection(velocity=v, matrix=null_matrices(v))


def velocities_from_projections(P: np.ndarray) -> np.ndarray:
    """Horizontal normal velocity v = P^a_0 / P^0_0, batched."""
    P = np.asarray(P, dtype=float)
    return P[..., 1:, 0] / P[..., 0:1, 0]


def horizontal_velocity(atom: Union[GrassmannAtom, NormalFrame]) -> np.ndarray:
    if isinstance(atom, NullProjection):
        return atom.velocity.copy()
    if isinstance(atom, NormalFrame):
        n1 = atom.n1
        if abs(n1[0]) <= 1e-15:
            return np.zeros(atom.dimension - 1)
        spatial = n1[1:]
        norm = np.linalg.norm(spatial)
        return (n1[0] / norm) * (spatial / norm)
    return velocities_from_projections(atom.matrix)


def is_lorentz(L: np.ndarray, tol: float = 1e-12) -> bool:
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        return False
    eta = metric(L.shape[0])
    scale = max(1.0, float(np.max(np.abs(L))) ** 2)
    return bool(np.max(np.abs(L.T @ eta @ L - eta)) <= tol * scale)


def boost_matrix(velocity: Sequence[float]) -> np.ndarray:
    """Pure boost mapping e_0 to gamma (1, beta)."""
    beta = np.asarray(velocity, dtype=float).reshape(-1)
    speed_sq = float(beta @ beta)
    if speed_sq >= 1.0:
        raise CausalityError(f"boost speed {np.sqrt(speed_sq):.6g} is not subluminal")
    dim = beta.shape[0] + 1
    gamma = 1.0 / np.sqrt(1.0 - speed_sq)
    L = np.eye(dim)
    L[0, 0] = gamma
    L[0, 1:] = gamma * beta
    L[1:, 0] = gamma * beta
    if speed_sq > 0:
        L[1:, 1:] += (gamma - 1.0) * np.outer(beta, beta) / speed_sq
    return L


def lorentz_boost(P: TimelikeProjection, L: np.ndarray) -> TimelikeProjection:
    """Projection onto L(plane): L P L^{-1}, with L^{-1} = eta L^T eta."""
    L = np.asarray(L, dtype=float)
    if L.shape != P.matrix.shape:
        raise DimensionMismatchError(f"Lorentz matrix shape {L.shape} vs projection {P.matrix.shape}")
    if not is_lorentz(L):
        raise NonLorentzError("L^T eta L differs from eta")
    eta = metric(L.shape[0])
    return TimelikeProjection(matrix=L @ P.matrix @ eta @ L.T @ eta, h=P.h).validate()


def boundary_form_distance(Q: np.ndarray, velocity: Optional[np.ndarray] = None) -> float:
    """max-norm distance between a model matrix and the null form built from `velocity`
    (default: the horizontal velocity read off Q's time column)."""
    Q = np.asarray(Q, dtype=float)
    v = Q[1:, 0] / Q[0, 0] if velocity is None else np.asarray(velocity, dtype=float)
    return float(np.max(np.abs(Q - null_matrices(v))))


def lorentzian_area_density(normal: Sequence[float]) -> float:
    """sqrt(-nu_t^2 + |nu_x|^2) for a euclidean unit normal of a hypersurface."""
    nu = as_vector(normal)
    value = -nu[0] ** 2 + float(nu[1:] @ nu[1:])
    if value < -NULL_EPS:
        raise CausalityError("timelike normal: the hypersurface is spacelike")
    return float(np.sqrt(max(value, 0.0)))


def random_timelike_basis(rng: np.random.Generator, N: int, h: int, max_speed: float = 0.95) -> np.ndarray:
    """Tangent basis (h vectors of R^{1+N}) of a random timelike h-plane."""
    if not 1 <= h <= N:
        raise DimensionMismatchError(f"need 1 <= h <= N, got h = {h}, N = {N}")
    direction = rng.normal(size=N)
    direction /= np.linalg.norm(direction)
    beta = rng.uniform(0.0, max_speed) * direction
    spatial, _ = np.linalg.qr(rng.normal(size=(N, N)))
    basis = [np.concatenate([[1.0], beta])]
    for j in range(h - 1):
        basis.append(np.concatenate([[0.0], spatial[:, j]]))
    return np.array(basis)


def random_normal_frames(rng: np.random.Generator, N: int, h: int, count: int,
                         max_speed: float = 0.95) -> np.ndarray:
    """Stacked frames (count, N+1-h, N+1) of random timelike h-planes.

    With a random rotation R and speed s the plane is spanned by (1, s R e_1)
    and (0, R e_2), ..., (0, R e_h); its frame is (s, R e_1) / sqrt(1 - s^2)
    followed by (0, R e_{h+1}), ..., (0, R e_N).
    """
    if not 1 <= h <= N:
        raise DimensionMismatchError(f"need 1 <= h <= N, got h = {h}, N = {N}")
    rotations, _ = np.linalg.qr(rng.normal(size=(count, N, N)))
    speed = rng.uniform(0.0, max_speed, size=count)
    frames = np.zeros((count, N + 1 - h, N + 1))
    gamma = 1.0 / np.sqrt(1.0 - speed * speed)
    frames[:, 0, 0] = speed * gamma
    frames[:, 0, 1:] = gamma[:, None] * rotations[:, :, 0]
    frames[:, 1:, 1:] = np.swapaxes(rotations[:, :, h:], 1, 2)
    return frames
