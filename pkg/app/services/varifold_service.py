"""
Discrete lorentzian h-varifolds.

A DiscreteVarifold is a finite atomic measure on spacetime x closed model set.
Timelike atoms carry their projection P and a weight measured against the
pulled-back measure V0-tilde (so mu_V receives weight * P^0_0); null atoms carry
Q = -(1, v) (x) eta(1, v) and a weight measured against V-infinity (so mu_V
receives the weight itself, Q^0_0 = 1).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from ..utils.errors import DimensionMismatchError, EmptyFamilyError, LorentzianError
from ..utils.minkowski import (
    GrassmannAtom,
    NullProjection,
    TimelikeProjection,
    is_lorentz,
    metric,
    null_matrices,
)
from ..utils.vector_fields import TestFunction

logger = logging.getLogger(__name__)

COLLAPSE_TOL = 1e-9


@dataclass(frozen=True)
class VarifoldAtom:
    z: np.ndarray
    grass: GrassmannAtom
    weight: float

    @property
    def is_null(self) -> bool:
        return isinstance(self.grass, NullProjection)


class DiscreteVarifold:
    """Columnar storage of weighted atoms; treat instances as immutable."""

    def __init__(self, h: int, N: int, points: np.ndarray, matrices: np.ndarray, null: np.ndarray,
                 weights: np.ndarray, velocities: Optional[np.ndarray] = None, provenance: str = ""):
        dim = N + 1
        self.h = int(h)
        self.N = int(N)
        self.points = np.asarray(points, dtype=float).reshape(-1, dim)
        self.matrices = np.asarray(matrices, dtype=float).reshape(-1, dim, dim)
        self.null = np.asarray(null, dtype=bool).reshape(-1)
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        count = self.points.shape[0]
        if not (self.matrices.shape[0] == self.null.shape[0] == self.weights.shape[0] == count):
            raise DimensionMismatchError("atom columns have different lengths")
        if np.any(self.weights < 0):
            raise LorentzianError("atom weights must be nonnegative")
        if velocities is None:
            velocities = np.zeros((count, N))
            velocities[self.null] = self.matrices[self.null, 1:, 0]
        self.velocities = np.asarray(velocities, dtype=float).reshape(-1, N)
        self.provenance = provenance

    @classmethod
    def empty(cls, h: int, N: int, provenance: str = "") -> "DiscreteVarifold":
        dim = N + 1
        return cls(h, N, np.zeros((0, dim)), np.zeros((0, dim, dim)), np.zeros(0, bool), np.zeros(0),
                   provenance=provenance)

    @classmethod
    def from_atoms(cls, h: int, N: int, atoms: Sequence[VarifoldAtom], provenance: str = "") -> "DiscreteVarifold":
        if not atoms:
            return cls.empty(h, N, provenance)
        points = np.array([a.z for a in atoms], dtype=float)
        if points.shape[1] != N + 1:
            raise DimensionMismatchError(f"atoms live in R^{points.shape[1]}, expected R^{N + 1}")
        matrices = np.array([a.grass.matrix for a in atoms], dtype=float)
        null = np.array([a.is_null for a in atoms])
        for a in atoms:
            if isinstance(a.grass, TimelikeProjection) and a.grass.h != h:
                raise DimensionMismatchError(f"atom of dimension {a.grass.h} in an h = {h} varifold")
        velocities = np.array([a.grass.velocity if a.is_null else np.zeros(N) for a in atoms])
        weights = np.array([a.weight for a in atoms], dtype=float)
        return cls(h, N, points, matrices, null, weights, velocities, provenance)

    @classmethod
    def timelike_atoms(cls, h: int, points: np.ndarray, projections: np.ndarray, weights: np.ndarray,
                       provenance: str = "") -> "DiscreteVarifold":
        points = np.atleast_2d(points)
        return cls(h, points.shape[1] - 1, points, projections, np.zeros(len(points), bool), weights,
                   provenance=provenance)

    @classmethod
    def null_atoms(cls, h: int, points: np.ndarray, velocities: np.ndarray, weights: np.ndarray,
                   provenance: str = "") -> "DiscreteVarifold":
        points = np.atleast_2d(points)
        velocities = np.atleast_2d(velocities)
        return cls(h, points.shape[1] - 1, points, null_matrices(velocities), np.ones(len(points), bool),
                   weights, velocities, provenance)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self) -> Iterator[VarifoldAtom]:
        for i in range(len(self)):
            if self.null[i]:
                grass = NullProjection(velocity=self.velocities[i].copy(), matrix=self.matrices[i].copy())
            else:
                grass = TimelikeProjection(matrix=self.matrices[i].copy(), h=self.h)
            yield VarifoldAtom(z=self.points[i].copy(), grass=grass, weight=float(self.weights[i]))

    @property
    def dimension(self) -> int:
        return self.N + 1

    def mass_weights(self) -> np.ndarray:
        """Per-atom contribution to mu_V."""
        return np.where(self.null, self.weights, self.weights * self.matrices[:, 0, 0])

    def total_mass(self) -> float:
        return float(np.sum(self.mass_weights()))

    def subset(self, mask: np.ndarray, provenance: Optional[str] = None) -> "DiscreteVarifold":
        return DiscreteVarifold(self.h, self.N, self.points[mask], self.matrices[mask], self.null[mask],
                                self.weights[mask], self.velocities[mask],
                                self.provenance if provenance is None else provenance)

    def concatenate(self, other: "DiscreteVarifold") -> "DiscreteVarifold":
        _check_compatible(self, other)
        return DiscreteVarifold(
            self.h, self.N,
            np.concatenate([self.points, other.points]),
            np.concatenate([self.matrices, other.matrices]),
            np.concatenate([self.null, other.null]),
            np.concatenate([self.weights, other.weights]),
            np.concatenate([self.velocities, other.velocities]),
            f"{self.provenance}+{other.provenance}",
        )

    def scaled(self, factor: float) -> "DiscreteVarifold":
        if factor < 0:
            raise LorentzianError("varifolds can only be scaled by nonnegative factors")
        return DiscreteVarifold(self.h, self.N, self.points, self.matrices, self.null, factor * self.weights,
                                self.velocities, f"{factor}*{self.provenance}")

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        if len(self) == 0:
            raise LorentzianError("empty varifold has no bounding box")
        return self.points.min(axis=0), self.points.max(axis=0)

    def v0_weights(self) -> np.ndarray:
        """Timelike weights converted from V0-tilde to V0 (times P^0_0); null weights unchanged."""
        return self.mass_weights()

    @classmethod
    def from_v0_weights(cls, h: int, N: int, points, matrices, null, v0_weights, velocities=None,
                        provenance: str = "") -> "DiscreteVarifold":
        matrices = np.asarray(matrices, dtype=float)
        null = np.asarray(null, dtype=bool)
        weights = np.where(null, v0_weights, np.asarray(v0_weights, dtype=float) / matrices[:, 0, 0])
        return cls(h, N, points, matrices, null, weights, velocities, provenance)

    def transformed(self, L: np.ndarray, shift: Optional[Sequence[float]] = None) -> "DiscreteVarifold":
        """Push-forward by z -> L z + shift for L both Lorentz and orthogonal
        (spatial rotations, reflections and time reversal), which preserve all weights."""
        L = np.asarray(L, dtype=float)
        if L.shape != (self.dimension, self.dimension):
            raise DimensionMismatchError(f"transformation of shape {L.shape} on R^{self.dimension}")
        if not (is_lorentz(L) and np.allclose(L.T @ L, np.eye(self.dimension), atol=1e-12)):
            raise LorentzianError("only maps that are both Lorentz and euclidean isometries are supported")
        shift = np.zeros(self.dimension) if shift is None else np.asarray(shift, dtype=float)
        eta = metric(self.dimension)
        L_inv = eta @ L.T @ eta
        matrices = L @ self.matrices @ L_inv
        time_sign = L[0, 0]
        velocities = time_sign * self.velocities @ L[1:, 1:].T
        return DiscreteVarifold(self.h, self.N, self.points @ L.T + shift, matrices, self.null, self.weights,
                                velocities, f"L({self.provenance})")


def _check_compatible(V1: DiscreteVarifold, V2: DiscreteVarifold) -> None:
    if (V1.h, V1.N) != (V2.h, V2.N):
        raise DimensionMismatchError(f"(h, N) = {(V1.h, V1.N)} vs {(V2.h, V2.N)}")


@dataclass(frozen=True)
class Box:
    """Half-open axis-aligned box [lo, hi) in R^{1+N}."""
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.hi < self.lo):
            raise LorentzianError(f"invalid box {self.lo.tolist()} .. {self.hi.tolist()}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lo) & (pts < self.hi), axis=1)


@dataclass(frozen=True)
class CellGrid:
    """Uniform axis-aligned cells of the box [lo, hi); `widths` per axis."""
    lo: np.ndarray
    hi: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        for name in ("lo", "hi", "widths"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.widths <= 0) or np.any(self.hi <= self.lo):
            raise LorentzianError("cell grid needs positive widths and a nonempty box")

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(int(n) for n in np.ceil((self.hi - self.lo) / self.widths - 1e-9))

    def cell_index(self, points: np.ndarray) -> np.ndarray:
        """Flat cell index per point, -1 outside the grid."""
        pts = np.atleast_2d(points)
        idx = np.floor((pts - self.lo) / self.widths).astype(int)
        shape = np.array(self.shape)
        inside = np.all((idx >= 0) & (idx < shape), axis=1) & np.all(pts < self.hi, axis=1)
        flat = np.full(pts.shape[0], -1)
        if np.any(inside):
            flat[inside] = np.ravel_multi_index(tuple(idx[inside].T), self.shape)
        return flat


@dataclass
class CellBarycenter:
    cell: Tuple[int, ...]
    pbar: np.ndarray
    qbar: np.ndarray
    timelike_mass: float  # V0-tilde mass
    null_mass: float  # V-infinity mass
    mass: float  # mu_V mass
    atom_count: int = 0

    @property
    def is_empty(self) -> bool:
        return self.atom_count == 0


def action(V: DiscreteVarifold, f: TestFunction) -> float:
    """int f dV0-tilde + int f_inf dV-infinity"""
    total = 0.0
    tl = ~V.null
    if np.any(tl):
        total += float(np.sum(V.weights[tl] * f.timelike(V.points[tl], V.matrices[tl])))
    if np.any(V.null):
        total += float(np.sum(V.weights[V.null] * f.recession(V.points[V.null], V.matrices[V.null])))
    return total


def split(V: DiscreteVarifold) -> Tuple[DiscreteVarifold, DiscreteVarifold]:
    return V.subset(~V.null, f"{V.provenance}:V0"), V.subset(V.null, f"{V.provenance}:Vinf")


def mu_V(V: DiscreteVarifold, region: Box) -> float:
    return float(np.sum(V.mass_weights()[region.contains(V.points)]))


def cell_masses(V: DiscreteVarifold, grid: CellGrid) -> np.ndarray:
    """mu_V of every grid cell, shaped like the grid."""
    flat = grid.cell_index(V.points)
    keep = flat >= 0
    size = int(np.prod(grid.shape))
    return np.bincount(flat[keep], weights=V.mass_weights()[keep], minlength=size).reshape(grid.shape)


def barycenters(V: DiscreteVarifold, grid: CellGrid) -> List[CellBarycenter]:
    """Weighted mean projections for every cell of the grid, in flat index order.

    Empty cells carry zero masses and zero barycenters."""
    dim = V.dimension
    flat = grid.cell_index(V.points)
    size = int(np.prod(grid.shape))
    out: List[CellBarycenter] = []
    tl = (~V.null) & (flat >= 0)
    nl = V.null & (flat >= 0)

    def weighted_sums(mask):
        w = np.bincount(flat[mask], weights=V.weights[mask], minlength=size)
        m = np.zeros((size, dim, dim))
        np.add.at(m, flat[mask], V.weights[mask, None, None] * V.matrices[mask])
        return w, m

    w_tl, m_tl = weighted_sums(tl)
    w_nl, m_nl = weighted_sums(nl)
    mass = np.bincount(flat[flat >= 0], weights=V.mass_weights()[flat >= 0], minlength=size)
    counts = np.bincount(flat[flat >= 0], minlength=size)
    for cell in range(size):
        pbar = m_tl[cell] / w_tl[cell] if w_tl[cell] > 0 else np.zeros((dim, dim))
        qbar = m_nl[cell] / w_nl[cell] if w_nl[cell] > 0 else np.zeros((dim, dim))
        out.append(CellBarycenter(
            cell=tuple(int(i) for i in np.unravel_index(cell, grid.shape)),
            pbar=pbar, qbar=qbar,
            timelike_mass=float(w_tl[cell]), null_mass=float(w_nl[cell]), mass=float(mass[cell]),
            atom_count=int(counts[cell]),
        ))
    return out


def cell_atoms(V: DiscreteVarifold, grid: CellGrid, cell: Tuple[int, ...]) -> DiscreteVarifold:
    flat = int(np.ravel_multi_index(cell, grid.shape))
    return V.subset(grid.cell_index(V.points) == flat)


def dirac_collapse_check(cell: CellBarycenter, atoms: DiscreteVarifold, tol: float = COLLAPSE_TOL) -> bool:
    """True iff the fibre measure of the cell is a single Dirac mass.

    Timelike part: P-bar idempotent. Null part: Q-bar nilpotent of rank one,
    i.e. again of boundary form. When a part collapses, all its atoms must carry
    the same matrix; a violation raises since it contradicts the rigidity of
    the barycenter.
    """
    if cell.timelike_mass <= 0 and cell.null_mass <= 0:
        raise LorentzianError(f"cell {cell.cell} carries no mass")
    collapsed = True
    if cell.timelike_mass > 0:
        scale = max(1.0, float(np.max(np.abs(cell.pbar))))
        idempotent = np.max(np.abs(cell.pbar @ cell.pbar - cell.pbar)) <= tol * scale * scale
        if idempotent:
            _assert_equal_matrices(atoms.matrices[~atoms.null], cell.pbar, tol, scale)
        collapsed = collapsed and bool(idempotent)
    if cell.null_mass > 0:
        nilpotent = np.max(np.abs(cell.qbar @ cell.qbar)) <= tol
        rank_one = np.linalg.matrix_rank(cell.qbar, tol=np.sqrt(tol)) == 1
        if nilpotent and rank_one:
            _assert_equal_matrices(atoms.matrices[atoms.null], cell.qbar, tol, 1.0)
        collapsed = collapsed and bool(nilpotent and rank_one)
    return collapsed


def _assert_equal_matrices(matrices: np.ndarray, mean: np.ndarray, tol: float, scale: float) -> None:
    if len(matrices) == 0:
        return
    spread = float(np.max(np.abs(matrices - mean)))
    # idempotence defect is quadratic in the spread
    if spread > 10.0 * np.sqrt(tol) * scale:
        raise LorentzianError(f"barycenter is a projection but atoms spread by {spread:.3g}")


def test_family_distance(V1: DiscreteVarifold, V2: DiscreteVarifold, family: Sequence[TestFunction]) -> float:
    """max_f |V1(f) - V2(f)| over a finite family."""
    if not family:
        raise EmptyFamilyError("test family is empty")
    _check_compatible(V1, V2)
    return max(abs(action(V1, f) - action(V2, f)) for f in family)


test_family_distance.__test__ = False


class SegmentPiece:
    """Closed segment [start, end] in spacetime with exact euclidean distance."""

    def __init__(self, start: Sequence[float], end: Sequence[float]):
        self.start = np.asarray(start, dtype=float)
        self.end = np.asarray(end, dtype=float)

    def distance(self, points: np.ndarray) -> np.ndarray:
        d = self.end - self.start
        length_sq = float(d @ d)
        rel = np.atleast_2d(points) - self.start
        s = np.clip(rel @ d / length_sq, 0.0, 1.0) if length_sq > 0 else np.zeros(len(rel))
        return np.linalg.norm(rel - s[:, None] * d, axis=1)


class SampledPatchPiece:
    """Patch image sampled on a parameter lattice; distance to the nearest sample."""

    def __init__(self, patch, param_lo: Sequence[float], param_hi: Sequence[float], resolution: int = 200):
        axes = [np.linspace(a, b, resolution) for a, b in zip(param_lo, param_hi)]
        params = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
        self.tree = cKDTree(patch.point(params))

    def distance(self, points: np.ndarray) -> np.ndarray:
        dist, _ = self.tree.query(np.atleast_2d(points))
        return dist


@dataclass
class ReferenceSet:
    """Finite union of parametrized pieces with membership tolerance delta_set."""
    pieces: List[Union[SegmentPiece, SampledPatchPiece]]
    tolerance: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        if not self.pieces:
            return np.zeros(len(pts), bool)
        dist = np.min([piece.distance(pts) for piece in self.pieces], axis=0)
        return dist <= self.tolerance


@dataclass
class RadonNikodymSplit:
    ac_mass: float
    singular_mass: float
    diffuse_mass: float = 0.0
    by_kind: Dict[str, float] = field(default_factory=dict)


def radon_nikodym_split(V: DiscreteVarifold, reference: ReferenceSet) -> RadonNikodymSplit:
    """mu_V mass on / off the reference set; atomic measures have no diffuse part."""
    near = reference.contains(V.points) if len(V) else np.zeros(0, bool)
    mass = V.mass_weights()
    by_kind = {
        "ac_timelike": float(np.sum(mass[near & ~V.null])),
        "ac_null": float(np.sum(mass[near & V.null])),
        "singular_timelike": float(np.sum(mass[~near & ~V.null])),
        "singular_null": float(np.sum(mass[~near & V.null])),
    }
    return RadonNikodymSplit(
        ac_mass=by_kind["ac_timelike"] + by_kind["ac_null"],
        singular_mass=by_kind["singular_timelike"] + by_kind["singular_null"],
        diffuse_mass=0.0,
        by_kind=by_kind,
    )


@dataclass
class RectifiabilityReport:
    cells: int
    collapsed_cells: int
    max_idempotence_defect: float
    rectifiable_candidate: bool


def weak_rectifiability_report(V: DiscreteVarifold, grid: CellGrid, tol: float = COLLAPSE_TOL) -> RectifiabilityReport:
    """Per-cell collapse statistics: every cell collapsing is the discrete mark of
    a rectifiable varifold; oscillating barycenters mark weakly rectifiable ones."""
    cells = [cell for cell in barycenters(V, grid) if not cell.is_empty]
    collapsed = 0
    worst = 0.0
    for cell in cells:
        if cell.timelike_mass > 0:
            worst = max(worst, float(np.max(np.abs(cell.pbar @ cell.pbar - cell.pbar))))
        try:
            collapsed += int(dirac_collapse_check(cell, cell_atoms(V, grid, cell.cell), tol))
        except LorentzianError as exc:
            logger.warning("cell %s: %s", cell.cell, exc)
    return RectifiabilityReport(
        cells=len(cells),
        collapsed_cells=collapsed,
        max_idempotence_defect=worst,
        rectifiable_candidate=bool(cells) and collapsed == len(cells),
    )
