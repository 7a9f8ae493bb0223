from fastapi import APIRouter, HTTPException
from ..schemas.experiment_schemas import ClassifyRequest, ClassifyResponse, ProjectRequest, ProjectionResponse
from ..utils.errors import LorentzianError
from ..utils.minkowski import (
    classify, frame_from_tangent_basis, horizontal_velocity, projection_from_frame, q_embed
)

router = APIRouter()

@router.post("/classify", response_model=ClassifyResponse)
async def classify_vector(request: ClassifyRequest):
    """Causal character of a spacetime vector"""
    try:
        result = classify(request.vector)
        return ClassifyResponse(kind=result.kind.value, square=result.square)
    except LorentzianError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))

@router.post("/project", response_model=ProjectionResponse)
async def project_plane(request: ProjectRequest):
    """Normal frame, lorentzian projection and its model-set image for a timelike h-plane"""
    try:
        frame = frame_from_tangent_basis(request.basis)
        P = projection_from_frame(frame)
        return ProjectionResponse(
            h=P.h,
            dimension=frame.dimension,
            frame=frame.vectors.tolist(),
            projection=P.matrix.tolist(),
            q=q_embed(P).tolist(),
            horizontal_velocity=horizontal_velocity(P).tolist(),
            invariant_errors=P.invariant_errors(),
        )
    except LorentzianError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
