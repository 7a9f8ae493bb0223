from pydantic import BaseModel, Field, field_validator
from typing import List, Dict, Optional, Any


EXPERIMENTS = (
    "classify",
    "project",
    "string-run",
    "junction-solve",
    "converge-zigzag",
    "converge-kinks",
    "converge-diffuse",
    "null-plane",
    "square-concentration",
    "cylinder",
    "area",
    "conservation-suite",
)

BUILTIN_STRINGS = ("kink", "cylinder", "square", "random", "curve")


class ExperimentConfig(BaseModel):
    experiment: str = Field(..., description="Experiment name")
    seed: int = Field(0, ge=0, description="RNG seed, echoed in every report")
    out_dir: Optional[str] = Field(None, description="Report directory (defaults to LORVAR_OUT_DIR)")

    # minkowski
    vector: Optional[List[float]] = Field(None, description="Spacetime vector for classify")
    basis: Optional[List[List[float]]] = Field(None, description="Tangent basis (h vectors of R^{1+N}) for project")

    # strings
    builtin: str = Field("kink", description="Built-in string: kink, cylinder, square, random or curve")
    R: float = Field(1.0, gt=0, description="Kink radius")
    L: float = Field(1.0, gt=0, description="Square side")
    curve_path: Optional[str] = Field(None, description="Curve JSON {L, samples} for builtin=curve")
    curve_b_path: Optional[str] = Field(None, description="Curve JSON for b; defaults to curve_path")
    modes: int = Field(3, ge=1, description="Fourier modes of random strings")

    # junctions
    theta1: float = Field(4.0, gt=0)
    theta2: Optional[float] = Field(None, gt=0)
    theta3: Optional[float] = Field(None, gt=0)
    alpha: Optional[float] = Field(None, gt=0)
    beta: Optional[float] = Field(None, gt=0)
    network_path: Optional[str] = Field(None, description="Network JSON {p, lines}")

    # grids and windows
    n_values: List[int] = Field(default_factory=lambda: [4, 8, 16, 32], description="Convergence indices")
    grid_dt: float = Field(1e-2, gt=0)
    grid_du: float = Field(1e-2, gt=0)
    refinements: int = Field(3, ge=1, le=8, description="Number of grid halvings in refinement tables")
    t0: float = Field(0.0)
    t1: float = Field(1.0)
    slice_width: Optional[float] = Field(None, gt=0, description="Defaults to grid_dt")
    family_scales: List[int] = Field(default_factory=lambda: [1, 2, 4], description="Bump family scales")
    trials: int = Field(10, ge=1, description="Random instances for property experiments")
    h: int = Field(1, ge=1, description="Plane dimension for null-plane")
    N: int = Field(1, ge=1, le=3, description="Spatial dimension for null-plane")
    C: float = Field(1.0, gt=0, description="Limit density constant for null-plane")

    @field_validator("experiment")
    @classmethod
    def known_experiment(cls, value: str) -> str:
        if value not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {value!r}; expected one of {', '.join(EXPERIMENTS)}")
        return value

    @field_validator("builtin")
    @classmethod
    def known_builtin(cls, value: str) -> str:
        if value not in BUILTIN_STRINGS:
            raise ValueError(f"unknown string {value!r}; expected one of {', '.join(BUILTIN_STRINGS)}")
        return value

    @field_validator("n_values", "family_scales")
    @classmethod
    def positive_increasing(cls, value: List[int]) -> List[int]:
        if not value or any(v <= 0 for v in value):
            raise ValueError("values must be positive")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("values must be strictly increasing")
        return value


class RefinementRow(BaseModel):
    quantity: str
    width: float
    value: float
    observed_order: Optional[float] = None


class ToleranceCheck(BaseModel):
    name: str
    value: float
    tolerance: float
    passed: bool


class ExperimentReport(BaseModel):
    experiment: str
    seed: int
    config: Dict[str, Any]
    results: Dict[str, Any] = Field(default_factory=dict)
    refinement: List[RefinementRow] = Field(default_factory=list)
    checks: List[ToleranceCheck] = Field(default_factory=list)
    family: Optional[str] = None
    passed: bool = False
    error: Optional[str] = None


class ClassifyRequest(BaseModel):
    vector: List[float] = Field(..., min_length=2, description="Components (v^0, v^1, ..., v^N)")


class ClassifyResponse(BaseModel):
    kind: str
    square: float


class ProjectRequest(BaseModel):
    basis: List[List[float]] = Field(..., min_length=1, description="h tangent vectors of R^{1+N}")


class ProjectionResponse(BaseModel):
    h: int
    dimension: int
    frame: List[List[float]]
    projection: List[List[float]]
    q: List[List[float]]
    horizontal_velocity: List[float]
    invariant_errors: Dict[str, float]


class JunctionSolveRequest(BaseModel):
    theta1: float = Field(..., gt=0)
    mode: str = Field("angles", description="angles, multiplicities or enumerate")
    theta2: Optional[float] = Field(None, gt=0)
    theta3: Optional[float] = Field(None, gt=0)
    alpha: Optional[float] = Field(None, gt=0)
    beta: Optional[float] = Field(None, gt=0)


class JunctionSolveResponse(BaseModel):
    mode: str
    solutions: List[Dict[str, Any]]
    count: int


class NetworkRequest(BaseModel):
    p: List[float] = Field(..., min_length=2, max_length=2)
    lines: List[Dict[str, Any]] = Field(..., min_length=1)


class BalanceResponse(BaseModel):
    residual: List[float]
    energy_before: float
    energy_after: float
    momentum_before: float
    momentum_after: float
    conserved: bool


class VarifoldSummary(BaseModel):
    h: int
    N: int
    atoms: int
    timelike_atoms: int
    null_atoms: int
    timelike_mass: float
    null_mass: float
    total_mass: float
    bounding_box: Optional[List[List[float]]] = None
    provenance: str = ""
