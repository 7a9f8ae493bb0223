import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from decouple import config

from ..services.junction_service import JunctionNetwork
from ..services.string_service import SplineCurve
from ..services.varifold_service import DiscreteVarifold
from ..utils.errors import LorentzianError, StringDataError
from ..utils.minkowski import null_matrices

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _real(x: float) -> str:
    return format(float(x), ".17g")


def _reals(values) -> Any:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return _real(arr)
    return [_reals(v) for v in arr]


def varifold_to_dict(V: DiscreteVarifold) -> Dict[str, Any]:
    atoms = []
    for i in range(len(V)):
        atom = {"z": _reals(V.points[i]), "weight": _real(V.weights[i])}
        if V.null[i]:
            atom["kind"] = "null"
            atom["v_inf"] = _reals(V.velocities[i])
        else:
            atom["kind"] = "timelike"
            atom["matrix"] = _reals(V.matrices[i])
        atoms.append(atom)
    return {"h": V.h, "N": V.N, "provenance": V.provenance, "atoms": atoms}


def varifold_from_dict(data: Dict[str, Any]) -> DiscreteVarifold:
    try:
        h, N = int(data["h"]), int(data["N"])
        rows = data["atoms"]
        dim = N + 1
        points = np.array([[float(c) for c in a["z"]] for a in rows], dtype=float).reshape(-1, dim)
        null = np.array([a["kind"] == "null" for a in rows], dtype=bool)
        weights = np.array([float(a["weight"]) for a in rows], dtype=float)
        velocities = np.zeros((len(rows), N))
        matrices = np.zeros((len(rows), dim, dim))
        for i, a in enumerate(rows):
            if a["kind"] == "null":
                velocities[i] = [float(c) for c in a["v_inf"]]
            elif a["kind"] == "timelike":
                matrices[i] = [[float(c) for c in row] for row in a["matrix"]]
            else:
                raise LorentzianError(f"unknown atom kind {a['kind']!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, LorentzianError):
            raise
        raise LorentzianError(f"malformed varifold JSON: {exc}") from exc
    if null.any():
        matrices[null] = null_matrices(velocities[null])
    return DiscreteVarifold(h, N, points, matrices, null, weights, velocities, data.get("provenance", ""))


def write_varifold(V: DiscreteVarifold, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(varifold_to_dict(V), indent=1))
    return path


def read_varifold(path: PathLike) -> DiscreteVarifold:
    return varifold_from_dict(json.loads(Path(path).read_text()))


def load_curve(path_or_data: Union[PathLike, Dict[str, Any]]) -> SplineCurve:
    data = path_or_data if isinstance(path_or_data, dict) else json.loads(Path(path_or_data).read_text())
    try:
        return SplineCurve(float(data["L"]), data["samples"])
    except KeyError as exc:
        raise StringDataError(f"curve JSON needs keys L and samples, missing {exc}") from exc


def load_network(path_or_data: Union[PathLike, Dict[str, Any]]) -> JunctionNetwork:
    data = path_or_data if isinstance(path_or_data, dict) else json.loads(Path(path_or_data).read_text())
    return JunctionNetwork.from_dict(data)


def write_network(net: JunctionNetwork, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(net.to_dict(), indent=2))
    return path


def to_plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(payload: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_plain(payload), indent=2, sort_keys=True))
    return path


def write_csv(rows: Sequence[Dict[str, Any]], path: PathLike, columns: Optional[List[str]] = None) -> Path:
    """Rows share the column order of `columns` (default: keys of the first row)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [to_plain(r) for r in rows]
    columns = columns or (list(rows[0].keys()) if rows else [])
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    return path


REFINEMENT_COLUMNS = ["quantity", "width", "value", "observed_order"]


class ReportStore:
    """Writes experiment artefacts under one output directory."""

    def __init__(self, out_dir: Optional[PathLike] = None):
        self.out_dir = Path(out_dir or config("LORVAR_OUT_DIR", default="reports"))

    def ensure_writable(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        marker = self.out_dir / ".write-check"
        marker.write_text("ok")
        marker.unlink()
        return self.out_dir

    def save_report(self, report: Dict[str, Any]) -> Dict[str, str]:
        stem = f"{report['experiment']}-seed{report['seed']}"
        written = {"json": str(write_json(report, self.out_dir / f"{stem}.json"))}
        if report.get("refinement"):
            written["refinement_csv"] = str(
                write_csv(report["refinement"], self.out_dir / f"{stem}-refinement.csv", REFINEMENT_COLUMNS))
        for name, rows in report.get("results", {}).get("tables", {}).items():
            if rows:
                written[f"{name}_csv"] = str(write_csv(rows, self.out_dir / f"{stem}-{name}.csv"))
        logger.info("report written to %s", written["json"])
        return written
