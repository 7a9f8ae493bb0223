from fastapi import APIRouter, HTTPException
from ..schemas.experiment_schemas import ExperimentConfig, ExperimentReport
from ..services.experiment_service import get_experiment_service

router = APIRouter()

@router.get("/")
async def list_experiments():
    service = await get_experiment_service()
    return {"experiments": service.experiments}

@router.post("/run", response_model=ExperimentReport)
async def run_experiment(config: ExperimentConfig, write: bool = False):
    """Run one experiment; numerical failures come back inside the report"""
    try:
        service = await get_experiment_service()
        return service.run(config, write=write)
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
