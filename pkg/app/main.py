"""
DD-EF-SGD simulator API
Planning, pipeline timing, trace generation and background training runs
"""
import logging
import os
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.api.routes import api_router
from app.core.config import settings

# Logging configuration
logging.basicConfig(
    level=settings.log_level,
    format=settings.log_format
)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application initialization and cleanup"""
    os.makedirs(settings.output_dir, exist_ok=True)
    logger.info(f"Starting DD-EF-SGD simulator API (outputs in {settings.output_dir})")
    yield
    logger.info("Shutting down application")

# Create FastAPI application
app = FastAPI(
    title="DD-EF-SGD Simulator",
    description="Delayed, compressed distributed SGD with the DeCo planner",
    version="1.0.0",
    lifespan=lifespan
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include API routes
app.include_router(api_router, prefix="/api/v1")


@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {
        "status": "healthy",
        "service": "ddef-sgd",
        "version": "1.0.0"
    }

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "app.main:app",
        host="0.0.0.0",
        port=8080,
        reload=True
    )
