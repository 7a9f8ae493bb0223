"""
Time-slice disintegration of discrete varifolds and the conserved quantities
E(t), P^a(t), Omega^{alpha beta}(t).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..utils.errors import StringDataError, SupportError
from .string_service import NULL_CELL_EPS, WorldSheet, normal_velocity
from .varifold_service import DiscreteVarifold
from .variation_service import worker_count

logger = logging.getLogger(__name__)


@dataclass
class TimeSliceMeasures:
    """Atoms with z^0 in [t - w/2, t + w/2); weights already divided by w."""
    t: float
    width: float
    atoms: DiscreteVarifold

    @property
    def timelike(self) -> DiscreteVarifold:
        return self.atoms.subset(~self.atoms.null)

    @property
    def null(self) -> DiscreteVarifold:
        return self.atoms.subset(self.atoms.null)

    def mass(self) -> float:
        """mu of V0-tilde_t plus mu of V-infinity_t."""
        return float(np.sum(self.atoms.weights))


def time_slices(V: DiscreteVarifold, t0: float, t1: float, width: float) -> List[TimeSliceMeasures]:
    """Partition [t0, t1) into slices of width w (the last one absorbs rounding)."""
    if width <= 0 or not t1 > t0:
        raise StringDataError(f"invalid slicing of [{t0}, {t1}) with width {width}")
    count = max(1, int(round((t1 - t0) / width)))
    width = (t1 - t0) / count
    index = np.floor((V.points[:, 0] - t0) / width).astype(int) if len(V) else np.zeros(0, int)
    slices = []
    for i in range(count):
        part = V.subset(index == i)
        slices.append(TimeSliceMeasures(t=t0 + (i + 0.5) * width, width=width, atoms=part.scaled(1.0 / width)))
    return slices


def energy(slice_: TimeSliceMeasures) -> float:
    """sum_timelike w P^0_0 + sum_null w"""
    return float(np.sum(slice_.atoms.mass_weights()))


def momentum(slice_: TimeSliceMeasures) -> np.ndarray:
    """sum_timelike w P^a_0 + sum_null w v_inf^a"""
    V = slice_.atoms
    columns = np.where(V.null[:, None], V.velocities, V.matrices[:, 1:, 0])
    return np.sum(V.weights[:, None] * columns, axis=0)


def angular_momentum(slice_: TimeSliceMeasures) -> np.ndarray:
    """Omega^{alpha beta} = sum w (z^alpha M^beta_0 - z^beta M^alpha_0) with M = P or Q."""
    V = slice_.atoms
    flux = V.weights[:, None] * V.matrices[:, :, 0]  # Q^a_0 = v_inf^a, Q^0_0 = 1
    moment = V.points.T @ flux
    return moment - moment.T


@dataclass
class ConservationReport:
    times: np.ndarray
    energy: np.ndarray
    momentum: np.ndarray  # (S, N)
    angular_momentum: np.ndarray  # (S, N+1, N+1)
    flagged: np.ndarray  # slices touching a singular time, excluded from drifts
    drift: Dict[str, float] = field(default_factory=dict)
    support_radius: float = 0.0

    def rows(self) -> List[Dict[str, float]]:
        out = []
        dim = self.angular_momentum.shape[1]
        for i, t in enumerate(self.times):
            row = {"t": float(t), "E": float(self.energy[i]), "flagged": bool(self.flagged[i])}
            for a in range(self.momentum.shape[1]):
                row[f"P_{a + 1}"] = float(self.momentum[i, a])
            for a in range(dim):
                for b in range(a + 1, dim):
                    row[f"Omega_{a}{b}"] = float(self.angular_momentum[i, a, b])
            out.append(row)
        return out


def _drift(values: np.ndarray) -> float:
    if values.shape[0] == 0:
        return 0.0
    spread = values.max(axis=0) - values.min(axis=0)
    return float(np.max(spread))


def conservation_report(V: DiscreteVarifold, t0: float, t1: float, width: float,
                        singular_times: Sequence[float] = (),
                        support_radius: Optional[float] = None) -> ConservationReport:
    """E, P, Omega over the slices of [t0, t1) and their drifts (max - min) over unflagged slices.

    The spatial support of the window is always measured; with `support_radius`
    it must also stay inside that ball.
    """
    radius = window_support_radius(V, t0, t1)
    if support_radius is not None and radius > support_radius:
        raise SupportError(f"spatial support reaches radius {radius:.6g}, outside the ball of radius {support_radius}")

    slices = time_slices(V, t0, t1, width)
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        energies = list(pool.map(energy, slices))
        momenta = list(pool.map(momentum, slices))
        omegas = list(pool.map(angular_momentum, slices))
    times = np.array([s.t for s in slices])
    singular = np.asarray(list(singular_times), dtype=float)
    half = slices[0].width / 2
    flagged = np.array([bool(np.any(np.abs(singular - t) <= half)) for t in times])

    E = np.array(energies)
    P = np.array(momenta).reshape(len(slices), V.N)
    Om = np.array(omegas)
    keep = ~flagged
    scale = max(abs(float(np.mean(E[keep]))) if np.any(keep) else 0.0, 1e-300)
    drift = {
        "energy": _drift(E[keep][:, None]),
        "momentum": _drift(P[keep]),
        "angular_momentum": _drift(Om[keep].reshape(int(keep.sum()), -1)),
    }
    drift["energy_relative"] = drift["energy"] / scale
    drift["momentum_relative"] = drift["momentum"] / scale
    drift["angular_momentum_relative"] = drift["angular_momentum"] / scale
    logger.debug("conservation over %d slices (%d flagged): %s", len(slices), int(flagged.sum()), drift)
    return ConservationReport(times=times, energy=E, momentum=P, angular_momentum=Om, flagged=flagged, drift=drift,
                              support_radius=radius)


def window_support_radius(V: DiscreteVarifold, t0: float, t1: float) -> float:
    """Largest spatial distance from the origin of an atom with z^0 in [t0, t1)."""
    window = V.subset((V.points[:, 0] >= t0) & (V.points[:, 0] < t1))
    if len(window) == 0:
        return 0.0
    lo, hi = window.bounding_box()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise SupportError("atoms with non-finite coordinates in the window")
    return float(np.max(np.linalg.norm(window.points[:, 1:], axis=1)))


def closed_form_slice(string: WorldSheet, t: float, samples: int = 4096, period: Optional[float] = None,
                      null_eps: float = NULL_CELL_EPS) -> Dict:
    """Slice quantities straight from the parametrization at time t.

    With the multiplicity Theta^0 = sqrt(1 - |v|^2) / |gamma_u|, dH^1 = |gamma_u| du on
    the timelike arcs and V-infinity density du on the collapsed arcs (|gamma_u| <= null_eps):

        E = int Theta^0 / sqrt(1 - |v|^2) dH^1 + sqrt 2 int Theta^inf dH^1
        P = int Theta^0 v / sqrt(1 - |v|^2) dH^1 + sqrt 2 int v_inf Theta^inf dH^1
        Omega^{alpha beta} = int (x^alpha J^beta - x^beta J^alpha) du with J = (1, v) or (1, v_inf)
    """
    L = getattr(string, "period", None) if period is None else period
    if L is None or L <= 0:
        raise StringDataError("closed-form slice needs a positive period")
    du = L / samples
    u = (np.arange(samples) + 0.5) * du
    t_arr = np.full(samples, float(t))
    x = string.spacetime_point(t_arr, u)
    g_t = string.gamma_t(t_arr, u)
    g_u = string.gamma_u(t_arr, u)
    speed_u = np.linalg.norm(g_u, axis=-1)
    timelike = speed_u > null_eps

    velocity = np.zeros_like(g_t)
    velocity[timelike] = normal_velocity(g_t[timelike], g_u[timelike])
    lorentz_factor = np.clip(1.0 - np.sum(velocity[timelike] ** 2, axis=-1), np.finfo(float).tiny, None)
    theta = np.sqrt(lorentz_factor) / speed_u[timelike]
    density = theta * speed_u[timelike] * du / np.sqrt(lorentz_factor)

    null = ~timelike
    if np.any(null):
        norms = np.linalg.norm(g_t[null], axis=-1)
        if np.any(norms <= null_eps):
            raise StringDataError(f"collapsed arc with vanishing gamma_t at t = {t}")
        velocity[null] = g_t[null] / norms[:, None]
    weights = np.zeros(samples)
    weights[timelike] = density
    weights[null] = du

    flux = weights[:, None] * np.concatenate([np.ones((samples, 1)), velocity], axis=1)
    moment = x.T @ flux
    return {
        "energy": float(weights.sum()),
        "energy_timelike": float(density.sum()),
        "energy_null": float(weights[null].sum()),
        "momentum": flux[:, 1:].sum(axis=0),
        "angular_momentum": moment - moment.T,
    }
