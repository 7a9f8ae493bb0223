"""Analytic h-dimensional patches in R^{1+N} with tangent bases and frame fields."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import CausalityError, DegenerateBasisError, PatchError
from .minkowski import frame_from_tangent_basis, metric, projection_from_basis

FD_STEP = 1e-5


class ParametricPatch(ABC):
    """Phi: R^h -> R^{1+N}. Parameters are batched with shape (M, h)."""

    h: int
    dimension: int
    scale: float = 1.0  # typical parameter length, sets the finite-difference step

    @abstractmethod
    def point(self, params: np.ndarray) -> np.ndarray:
        ...

    def tangents(self, params: np.ndarray) -> np.ndarray:
        """(M, N+1, h) columns d_a Phi; central differences unless overridden."""
        params = np.atleast_2d(np.asarray(params, dtype=float))
        step = FD_STEP * self.scale
        cols = []
        for a in range(self.h):
            shift = np.zeros(self.h)
            shift[a] = step
            cols.append((self.point(params + shift) - self.point(params - shift)) / (2 * step))
        return np.stack(cols, axis=-1)

    def induced_metric(self, params: np.ndarray) -> np.ndarray:
        B = self.tangents(params)
        return np.swapaxes(B, -1, -2) @ metric(self.dimension) @ B

    def check_timelike(self, params: np.ndarray, tol: float = 1e-10) -> np.ndarray:
        """Induced metrics at `params`; raises PatchError where the tangent plane is not timelike."""
        G = self.induced_metric(params)
        eigenvalues = np.linalg.eigvalsh(G)
        scale = np.maximum(1.0, np.max(np.abs(eigenvalues), axis=-1))
        lowest = eigenvalues[..., 0] / scale
        rest = eigenvalues[..., 1:] / scale[..., None]
        if np.any(lowest > -tol) or np.any(rest <= tol):
            raise PatchError("tangent plane is null or spacelike at some patch points")
        return G

    def projection(self, params: np.ndarray) -> np.ndarray:
        self.check_timelike(params)
        return projection_from_basis(self.tangents(params))

    def frame(self, params: np.ndarray, reference: Optional[np.ndarray] = None) -> np.ndarray:
        """Normal frames (M, N+1-h, N+1); signs aligned with `reference` frames when given."""
        B = self.tangents(params)
        frames = []
        for i, basis in enumerate(B):
            try:
                frames.append(frame_from_tangent_basis(basis.T).vectors)
            except (CausalityError, DegenerateBasisError) as exc:
                raise PatchError(f"frame undefined at patch point {i}: {exc}") from exc
        frames = np.array(frames)
        if reference is not None:
            eta = metric(self.dimension)
            signs = np.sign(np.einsum("mjA,AB,mjB->mj", frames, eta, reference))
            signs[signs == 0] = 1.0
            frames = frames * signs[..., None]
        return frames

    def parameter_derivative(self, fn: Callable[[np.ndarray], np.ndarray], params: np.ndarray) -> np.ndarray:
        """Central differences of a field along the patch: (M, ..., h)."""
        params = np.atleast_2d(np.asarray(params, dtype=float))
        step = FD_STEP * self.scale
        cols = []
        for a in range(self.h):
            shift = np.zeros(self.h)
            shift[a] = step
            cols.append((fn(params + shift) - fn(params - shift)) / (2 * step))
        return np.stack(cols, axis=-1)


@dataclass
class AffinePatch(ParametricPatch):
    """z = origin + B s"""
    origin: np.ndarray
    basis: np.ndarray  # (h, N+1)
    scale: float = 1.0

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        self.h = self.basis.shape[0]
        self.dimension = self.origin.shape[0]

    def point(self, params):
        return self.origin + np.atleast_2d(params) @ self.basis

    def tangents(self, params):
        m = np.atleast_2d(params).shape[0]
        return np.broadcast_to(self.basis.T, (m, self.dimension, self.h)).copy()


@dataclass
class CylinderPatch(ParametricPatch):
    """Static world tube R x (circle of radius r) in R^{1+2}; parameters (t, phi)."""
    radius: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        self.h = 2
        self.dimension = 3

    def point(self, params):
        p = np.atleast_2d(params)
        t, phi = p[:, 0], p[:, 1]
        return np.stack([t, self.radius * np.cos(phi), self.radius * np.sin(phi)], axis=-1)

    def tangents(self, params):
        p = np.atleast_2d(params)
        phi = p[:, 1]
        zeros, ones = np.zeros_like(phi), np.ones_like(phi)
        e_t = np.stack([ones, zeros, zeros], axis=-1)
        e_phi = np.stack([zeros, -self.radius * np.sin(phi), self.radius * np.cos(phi)], axis=-1)
        return np.stack([e_t, e_phi], axis=-1)
