"""HTTP reward and verification service for external RL trainers."""

from __future__ import annotations

import logging
import secrets
from typing import Any, Literal, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .config import ToolConfig
from .errors import EmptyPolicy, PolicyError, PolicyParseError
from .oracles import Oracles
from .policy import Policy, policy_from_dict
from .reward import compute_reward, group_advantages

log = logging.getLogger(__name__)

MAX_BATCH = 256


class VerifyRequest(BaseModel):
    config: str
    stage: Literal["FV1", "FV2", "FV3"] = "FV2"
    policy: Optional[dict[str, Any]] = None


class RewardRequest(BaseModel):
    config: str
    policy: dict[str, Any]


class BatchRequest(BaseModel):
    items: list[RewardRequest]
    group: bool = False


class _HttpError(Exception):
    def __init__(self, status: int, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.message = message


def _policy(doc: dict[str, Any]) -> Policy:
    try:
        return policy_from_dict(doc)
    except EmptyPolicy:
        raise
    except (PolicyError, ValueError) as exc:
        raise _HttpError(400, f"malformed policy: {exc}") from exc


def create_app(config: ToolConfig | None = None, oracles: Oracles | None = None, token: str | None = None) -> FastAPI:
    """Build the app. Oracles are resolved here, so a bad external setup fails at startup."""
    config = config or ToolConfig()
    oracles = oracles or config.build_oracles()
    app = FastAPI(title="iacforge reward service", version="1.0")

    @app.middleware("http")
    async def bearer(request: Request, call_next):
        if token and request.url.path != "/healthz":
            supplied = request.headers.get("authorization", "")
            if not secrets.compare_digest(supplied, f"Bearer {token}"):
                return JSONResponse({"error": "unauthorized"}, status_code=401)
        return await call_next(request)

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse({"error": "malformed request body", "detail": exc.errors()}, status_code=400)

    @app.exception_handler(EmptyPolicy)
    async def empty_policy(request: Request, exc: EmptyPolicy):
        return JSONResponse({"error": "empty policy", "detail": str(exc)}, status_code=422)

    @app.exception_handler(_HttpError)
    async def http_error(request: Request, exc: _HttpError):
        return JSONResponse({"error": exc.message}, status_code=exc.status)

    @app.exception_handler(PolicyParseError)
    async def policy_parse(request: Request, exc: PolicyParseError):
        return JSONResponse({"error": "policy engine rejected the policy", "detail": str(exc)}, status_code=400)

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz() -> str:
        return "ok"

    @app.post("/v1/verify")
    def verify(req: VerifyRequest) -> dict:
        policy = _policy(req.policy) if req.policy is not None else None
        if req.stage == "FV3" and policy is None:
            raise _HttpError(400, "stage FV3 needs a policy")
        fv1, parsed = oracles.compile(req.config)
        if not fv1.passed or req.stage == "FV1":
            return fv1.to_dict()
        fv2, plan_doc = oracles.deploy(req.config, parsed)
        if not fv2.passed or req.stage == "FV2":
            return fv2.to_dict()
        results = oracles.comply(policy, plan_doc)
        return {
            "stage": "FV3",
            "passed": results.passed,
            "code": None if results.passed else "POLICY_FAILED",
            "rules": results.to_dict(),
        }

    @app.post("/v1/reward")
    def reward(req: RewardRequest) -> dict:
        return compute_reward(req.config, _policy(req.policy), oracles).to_dict()

    @app.post("/v1/reward/batch")
    def reward_batch(req: BatchRequest) -> dict:
        if len(req.items) > MAX_BATCH:
            raise _HttpError(413, f"batch has {len(req.items)} items; the limit is {MAX_BATCH}")
        if not req.items:
            raise _HttpError(400, "batch has no items")
        results = [compute_reward(item.config, _policy(item.policy), oracles) for item in req.items]
        body: dict[str, Any] = {"results": [r.to_dict() for r in results]}
        if req.group:
            body["group"] = group_advantages([r.reward for r in results]).to_dict()
        return body

    return app


def serve(config: ToolConfig, host: str = "127.0.0.1", token: str | None = None) -> None:
    import uvicorn

    app = create_app(config, token=token)
    uvicorn.run(app, host=host, port=config.port, workers=1)


__all__ = ["MAX_BATCH", "create_app", "serve"]
