from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from app.api.endpoints import scenarios

app = FastAPI(title="DCM Walking API")

app.include_router(
    scenarios.router,
    prefix="/api/scenarios",
    tags=["scenarios"]
)
app.include_router(
    scenarios.footsteps_router,
    prefix="/api/footsteps",
    tags=["footsteps"]
)

# CORS for local dev
app.add_middleware(
  CORSMiddleware,
  allow_origins=["*"],
  allow_credentials=True,
  allow_methods=["*"],
  allow_headers=["*"],
)

@app.get("/health")
async def health():
  return {"status": "ok"}
