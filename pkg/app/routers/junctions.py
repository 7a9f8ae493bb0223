from fastapi import APIRouter, HTTPException
from ..database.varifold_store import load_network
from ..schemas.experiment_schemas import (
    BalanceResponse, JunctionSolveRequest, JunctionSolveResponse, NetworkRequest
)
from ..services.junction_service import balance_residual, junction_conservation_check, solve_split
from ..utils.errors import LorentzianError

router = APIRouter()

@router.post("/solve", response_model=JunctionSolveResponse)
async def solve_junction(request: JunctionSolveRequest):
    """Solve the balance law of a splitting for the missing angles or multiplicities"""
    try:
        solutions = solve_split(
            theta1=request.theta1,
            mode=request.mode,
            theta2=request.theta2,
            theta3=request.theta3,
            alpha=request.alpha,
            beta=request.beta
        )
        return JunctionSolveResponse(
            mode=request.mode,
            solutions=[s.to_dict() for s in solutions],
            count=len(solutions)
        )
    except LorentzianError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))

@router.post("/balance", response_model=BalanceResponse)
async def check_balance(request: NetworkRequest):
    """Balance residual and energy/momentum before and after the junction point"""
    try:
        net = load_network(request.model_dump())
        check = junction_conservation_check(net)
        return BalanceResponse(
            residual=balance_residual(net).tolist(),
            energy_before=check.energy_before,
            energy_after=check.energy_after,
            momentum_before=check.momentum_before,
            momentum_after=check.momentum_after,
            conserved=check.conserved()
        )
    except LorentzianError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
