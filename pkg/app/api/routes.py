"""
API Routes
"""
import logging

from fastapi import APIRouter, HTTPException
from fastapi.responses import FileResponse

from app.models.experiment_models import (
    EfficiencyRequest,
    ExperimentConfig,
    PlanRequest,
    TimingRequest,
    TraceGeneratorConfig,
)
from app.services.network import TRACE_PRNG, gen_trace
from app.services.planner import deco_plan, describe_plan
from app.services.report_service import ReportService
from app.services.timing import TimingParams, efficiency_grid, simulate_pipeline, summarize_schedule

logger = logging.getLogger(__name__)

# Create router
api_router = APIRouter()


@api_router.post("/plan")
async def create_plan(request: PlanRequest):
    """DeCo (τ, δ) for one network condition"""
    try:
        plan = deco_plan(request.s_g, request.a, request.b, request.t_comp, regime=request.regime, d=request.d)
        p = TimingParams(t_comp=request.t_comp, s_g=request.s_g, a=request.a, b=request.b)
        return describe_plan(p, plan)

    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error computing plan: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))


@api_router.post("/timing/simulate")
async def simulate_timing(request: TimingRequest):
    """Run the pipeline recurrence and compare it with the closed form"""
    try:
        p = TimingParams(t_comp=request.t_comp, s_g=request.s_g, a=request.a, b=request.b)
        schedule = simulate_pipeline(p, request.delta, request.tau, request.t)
        return summarize_schedule(schedule, p, request.delta, request.tau)

    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error simulating pipeline: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))


@api_router.post("/timing/efficiency")
async def timing_efficiency(request: EfficiencyRequest):
    """Throughput efficiency over a bandwidth x latency grid"""
    try:
        frame = efficiency_grid(
            request.t_comp, request.s_g, request.bandwidths, request.latencies, request.delta, request.tau
        )
        return {"rows": frame.to_dict(orient="records")}

    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error computing efficiency grid: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))


@api_router.post("/traces/generate")
async def generate_trace(request: TraceGeneratorConfig):
    """Deterministic fluctuating trace as JSON rows"""
    try:
        trace = gen_trace(
            seed=request.seed,
            mean_bandwidth=request.mean_bandwidth,
            fluctuation_fraction=request.fluctuation_fraction,
            latency=request.latency,
            duration=request.duration,
            interval=request.interval,
        )
        return {
            "prng": TRACE_PRNG,
            "samples": trace.to_frame().to_dict(orient="records"),
        }

    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error generating trace: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))


@api_router.post("/train")
async def start_training(config: ExperimentConfig):
    """Start a training run in the background"""
    try:
        from app.tasks.training import run_training

        task = run_training.delay(config.model_dump(mode="json"))

        return {
            "task_id": task.id,
            "status": "started",
            "message": f"{config.variant.value} run started in background",
            "check_status_url": f"/api/v1/tasks/{task.id}"
        }

    except Exception as e:
        logger.error(f"Error starting training run: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))


@api_router.get("/tasks/{task_id}")
async def get_task_status(task_id: str):
    """Get task status and, once finished, its result"""
    try:
        from app.celery_app import celery_app

        result = celery_app.AsyncResult(task_id)

        if result.state == 'PENDING':
            return {
                'task_id': task_id,
                'state': result.state,
                'status': 'Task is waiting to be processed...'
            }
        elif result.state == 'PROGRESS':
            return {
                'task_id': task_id,
                'state': result.state,
                'status': result.info.get('status', ''),
                'progress': f"{result.info.get('current', 0)}/{result.info.get('total', 1)}"
            }
        elif result.state == 'SUCCESS':
            return {
                'task_id': task_id,
                'state': result.state,
                'result': result.result,
                'status': 'Task completed successfully'
            }
        else:  # FAILURE
            error_info = result.info
            if isinstance(error_info, dict):
                error_message = error_info.get('error', str(error_info))
            else:
                error_message = str(error_info)

            return {
                'task_id': task_id,
                'state': result.state,
                'error': error_message,
                'status': 'Task failed'
            }

    except Exception as e:
        logger.error(f"Error getting task status: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@api_router.delete("/tasks/{task_id}")
async def cancel_task(task_id: str):
    """Cancel a running task"""
    try:
        from app.celery_app import celery_app

        celery_app.control.revoke(task_id, terminate=True)

        return {
            'task_id': task_id,
            'status': 'cancelled',
            'message': 'Task cancelled successfully'
        }

    except Exception as e:
        logger.error(f"Error cancelling task: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@api_router.get("/export/files")
async def list_exported_files():
    """List run, timing and sweep files in the output directory"""
    try:
        return ReportService().get_exported_reports()

    except Exception as e:
        logger.error(f"Error listing exported files: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@api_router.get("/export/files/{filename}")
async def download_exported_file(filename: str):
    """Download an exported file"""
    files = ReportService().get_exported_reports()
    file_info = next((f for f in files if f["filename"] == filename), None)

    if not file_info:
        raise HTTPException(status_code=404, detail="File not found")

    return FileResponse(
        path=file_info["filepath"],
        filename=filename,
        media_type='application/octet-stream'
    )
