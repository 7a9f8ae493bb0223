import json
from typing import List

from fastapi import APIRouter, File, Form, HTTPException, UploadFile
from ..database.varifold_store import to_plain, varifold_from_dict
from ..schemas.experiment_schemas import VarifoldSummary
from ..services.variation_service import stationarity_residual
from ..services.varifold_service import DiscreteVarifold
from ..utils.errors import LorentzianError
from ..utils.vector_fields import bump_family

router = APIRouter()


async def _read_upload(file: UploadFile) -> DiscreteVarifold:
    try:
        payload = json.loads(await file.read())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise LorentzianError(f"varifold upload is not JSON: {e}")
    return varifold_from_dict(payload)


def _scales(raw: str) -> List[int]:
    try:
        values = [int(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise LorentzianError(f"family scales must be comma-separated integers, got {raw!r}")
    if not values or any(v <= 0 for v in values):
        raise LorentzianError("family scales must be positive")
    return values


@router.post("/summary", response_model=VarifoldSummary)
async def summarize_varifold(file: UploadFile = File(...)):
    """Atom counts and the V0-tilde / V-infinity mass split of an uploaded varifold"""
    try:
        V = await _read_upload(file)
        mass = V.mass_weights()
        lo, hi = V.bounding_box() if len(V) else (None, None)
        return VarifoldSummary(
            h=V.h,
            N=V.N,
            atoms=len(V),
            timelike_atoms=int((~V.null).sum()),
            null_atoms=int(V.null.sum()),
            timelike_mass=float(mass[~V.null].sum()),
            null_mass=float(mass[V.null].sum()),
            total_mass=float(mass.sum()),
            bounding_box=None if lo is None else [lo.tolist(), hi.tolist()],
            provenance=V.provenance
        )
    except LorentzianError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/stationarity")
async def varifold_stationarity(file: UploadFile = File(...), scales: str = Form("1,2")):
    """Normalized first-variation residual over a bump lattice around the support"""
    try:
        V = await _read_upload(file)
        if not len(V):
            raise LorentzianError("the uploaded varifold has no atoms")
        lo, hi = V.bounding_box()
        pad = 0.1 * (hi - lo) + 0.1
        report = stationarity_residual(V, bump_family(lo - pad, hi + pad, _scales(scales)))
        return to_plain(report.to_dict())
    except LorentzianError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
