from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from contextlib import asynccontextmanager
import logging
import sys
import os
from decouple import config

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from app.routers import experiments, junctions, minkowski, varifolds

logging.basicConfig(level=config("LORVAR_LOG_LEVEL", default="INFO"),
                    format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@asynccontextmanager
async def lifespan(app: FastAPI):
    # Startup: validate numeric settings and the report directory
    try:
        threads = config("LORVAR_THREADS", default=0, cast=int)
        max_atoms = config("LORVAR_MAX_ATOMS", default=2000000, cast=int)
        if threads < 0 or max_atoms <= 0:
            raise ValueError("LORVAR_THREADS must be >= 0 and LORVAR_MAX_ATOMS > 0")
        print("✅ Numeric settings are valid")
    except ValueError as e:
        print(f"❌ Invalid configuration: {e}")
        sys.exit(1)

    try:
        from app.database.varifold_store import ReportStore
        out_dir = ReportStore().ensure_writable()
        print(f"✅ Report directory {out_dir} is writable")
    except OSError as e:
        print(f"❌ Report directory is not writable: {e}")
        sys.exit(1)

    print("🚀 Lorentzian Varifold API starting up...")

    yield

    # Shutdown
    print("🛑 Lorentzian Varifold API shutting down...")


app = FastAPI(
    title="Lorentzian Varifold API",
    description="Discrete Lorentzian varifolds in Minkowski space: strings, junctions, conservation laws and limit experiments",
    version="1.0.0",
    lifespan=lifespan
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(minkowski.router, prefix="/minkowski", tags=["minkowski"])
app.include_router(junctions.router, prefix="/junctions", tags=["junctions"])
app.include_router(varifolds.router, prefix="/varifolds", tags=["varifolds"])
app.include_router(experiments.router, prefix="/experiments", tags=["experiments"])

@app.get("/")
async def root():
    return {
        "message": "Welcome to the Lorentzian Varifold API",
        "version": "1.0.0",
        "endpoints": {
            "health": "/health",
            "docs": "/docs",
            "classify": "/minkowski/classify",
            "project": "/minkowski/project",
            "junction_solve": "/junctions/solve",
            "junction_balance": "/junctions/balance",
            "varifold_summary": "/varifolds/summary",
            "varifold_stationarity": "/varifolds/stationarity",
            "experiments": "/experiments/run"
        }
    }

@app.get("/health")
async def health_check():
    """Health check endpoint with service status"""
    try:
        from app.database.varifold_store import ReportStore
        ReportStore().ensure_writable()
        storage_status = "healthy"
    except OSError as e:
        storage_status = f"error: {str(e)}"

    return {
        "status": "healthy",
        "services": {
            "reports": storage_status,
            "api": "healthy"
        }
    }

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
