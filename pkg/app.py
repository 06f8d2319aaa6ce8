import math
import os
from typing import List, Optional

from dotenv import load_dotenv
from fastapi import FastAPI, File, Form, HTTPException, UploadFile, status
from fastapi.middleware.cors import CORSMiddleware
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from config import configure_logging, get_settings
from errors import SihtError
from models import ComplexityBreakdown, ConditionCheck, EnsembleFamily, ExperimentConfig, RecoveryMode
from services.complexity import (
    breakdown_from_fractions,
    condition_rhs,
    dynamic_sample_complexity,
    satisfies_condition,
)
from services.experiment_service import SWEEP_STREAM, recover
from services.measurements import make_schedule
from services.report_service import ReportService
from services.ric_oracle import ric

# Load environment variables
load_dotenv()
settings = get_settings()

configure_logging(settings.log_level)

# Initialize FastAPI app
app = FastAPI(
    title="SIHT Toolkit API",
    description="Dynamic sample complexity, exact RIC and sequential IHT recovery runs",
    version="1.0.0"
)

# CORS middleware (adjust origins as needed)
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

report_service = ReportService()


# Pydantic models for request/response
class ComplexityRequest(BaseModel):
    model_config = ConfigDict(
        json_schema_extra={
            "example": {"m": [4, 16, 4, 16], "p": [0.25, 0.25, 0.25, 0.25]}
        },
        extra="forbid"
    )
    m: List[int]
    p: Optional[List[float]] = None
    boundaries: Optional[List[int]] = None
    k: Optional[int] = None
    n: Optional[int] = None
    epsilon: float = 0.5
    c_tilde: Optional[float] = None


class ComplexityResponse(BaseModel):
    breakdown: ComplexityBreakdown
    condition: Optional[ConditionCheck] = None


class ConditionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    k: int
    n: int
    epsilon: float = 0.5
    c_tilde: Optional[float] = None


class RicResponse(BaseModel):
    order: int
    value: float
    witness: List[int]


class RecoverRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    seed: int = Field(ge=0)
    k: int = Field(ge=1)
    n: int = 1000
    t: int = 100
    mode: RecoveryMode = "siht"
    a: int = 20
    b: int = 150
    m: int = 250
    ensemble: EnsembleFamily = "gaussian"
    threshold: float = 1e-3
    trial_index: int = 0


class RecoverResponse(BaseModel):
    iterations: int
    success: bool
    diverged: bool
    final_error: Optional[float]
    rapid_decay: bool
    errors: List[Optional[float]]


def _finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def _bad_request(e: Exception) -> HTTPException:
    logger.warning(f"Rejected request: {e}")
    return HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))


def _server_error(action: str, e: Exception) -> HTTPException:
    logger.error(f"Error {action}: {str(e)}", exc_info=True)
    return HTTPException(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        detail=f"Error {action}: {str(e)}"
    )


# API Endpoints
@app.get("/", tags=["Health"])
async def root():
    """Health check endpoint."""
    logger.info("Health check endpoint accessed")
    return {
        "message": "SIHT Toolkit API is running",
        "status": "healthy",
        "version": "1.0.0"
    }


@app.post(
    "/complexity",
    response_model=ComplexityResponse,
    tags=["Complexity"],
    summary="Dynamic sample complexity",
    description="Compute M_d for per-phase measurement counts and optionally check the recovery condition"
)
async def complexity(request: ComplexityRequest):
    """
    Compute the dynamic sample complexity.

    - **m**: measurement count of every phase
    - **p** or **boundaries**: phase fractions or phase boundaries (equal phases if both omitted)
    - **k**, **n**: when given, also evaluate the sufficient condition
    """
    logger.info(f"Complexity request for {len(request.m)} phases")
    try:
        if request.boundaries is not None:
            breakdown = dynamic_sample_complexity(request.m, make_schedule(request.boundaries))
        else:
            fractions = request.p if request.p is not None else [1 / len(request.m)] * len(request.m)
            breakdown = breakdown_from_fractions(request.m, fractions)
        condition = None
        if request.k is not None and request.n is not None:
            c_tilde = request.c_tilde if request.c_tilde is not None else settings.c_tilde
            condition = satisfies_condition(breakdown, request.k, request.n, request.epsilon, c_tilde)
        return ComplexityResponse(breakdown=breakdown, condition=condition)
    except (SihtError, ValidationError, ZeroDivisionError, IndexError) as e:
        raise _bad_request(e)
    except Exception as e:
        raise _server_error("computing complexity", e)


@app.post("/condition", tags=["Complexity"], summary="Right-hand side of the recovery condition")
async def recovery_condition(request: ConditionRequest):
    try:
        c_tilde = request.c_tilde if request.c_tilde is not None else settings.c_tilde
        return {"rhs": condition_rhs(request.k, request.n, request.epsilon, c_tilde), "c_tilde": c_tilde}
    except SihtError as e:
        raise _bad_request(e)


@app.post(
    "/ric",
    response_model=RicResponse,
    tags=["RIC"],
    summary="Exact restricted isometry constant",
    description="Upload a matrix as CSV (rows of comma-separated decimals) and enumerate its RIC"
)
async def restricted_isometry_constant(file: UploadFile = File(...), order: int = Form(...)):
    """
    Compute delta_R of an uploaded matrix.

    - **file**: CSV matrix
    - **order**: subset size R
    """
    logger.info(f"Received matrix upload: {file.filename}")
    try:
        content = await file.read()
        matrix = report_service.parse_matrix_csv(content.decode("utf-8"))
        result = ric(matrix, order)
        logger.success(f"delta_{order} of {file.filename} = {result.value:.6f}")
        return RicResponse(order=result.order, value=result.value, witness=list(result.witness.indices))
    except UnicodeDecodeError:
        logger.error(f"Encoding error for file: {file.filename}")
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail="File encoding error. Please ensure the file is UTF-8 encoded."
        )
    except SihtError as e:
        raise _bad_request(e)
    except Exception as e:
        raise _server_error("computing RIC", e)


@app.post("/recover", response_model=RecoverResponse, tags=["Recovery"], summary="Single recovery run")
async def recover_signal(request: RecoverRequest):
    """Draw a K-sparse signal and recover it with SIHT or offline IHT."""
    logger.info(f"Recovery request: mode={request.mode}, K={request.k}, seed={request.seed}")
    try:
        config = ExperimentConfig(
            master_seed=request.seed,
            n=request.n,
            t=request.t,
            k_grid=(request.k,),
            mode=request.mode,
            a=request.a,
            b=request.b,
            m=request.m,
            ensemble=request.ensemble,
            threshold=request.threshold,
            workers=1,
        )
        trace = recover(config, request.k, (SWEEP_STREAM, request.k, request.trial_index))
        if not math.isfinite(trace.final_error):
            logger.warning(f"Recovery diverged: mode={request.mode}, K={request.k}, seed={request.seed}")
        return RecoverResponse(
            iterations=trace.iterations,
            success=trace.success,
            diverged=not math.isfinite(trace.final_error),
            final_error=_finite_or_none(trace.final_error),
            rapid_decay=trace.rapid_decay,
            errors=[_finite_or_none(e) for e in trace.errors],
        )
    except (SihtError, ValidationError) as e:
        raise _bad_request(e)
    except Exception as e:
        raise _server_error("running recovery", e)


if __name__ == "__main__":
    logger.info("Starting FastAPI server...")
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=int(os.environ.get("PORT", 8000)))
