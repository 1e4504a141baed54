from fastapi import FastAPI
from src.pipeline.api import router as pose_router

app = FastAPI(title="posekit")

app.include_router(pose_router)
