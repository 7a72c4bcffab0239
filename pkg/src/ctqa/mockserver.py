"""HTTP server exposing the deterministic mocks behind the real wire contract.

Lets the live HTTP clients be exercised end to end without any model:
POST /v1/chat takes {model, messages[], adapter_id?, vision_ref?} and routes
to the region mock when an adapter id is present, the planner mock otherwise;
POST /v1/embed takes {model, input[]}.
"""
from __future__ import annotations

from fastapi import FastAPI
from pydantic import BaseModel

from .memory import MockEmbedder
from .mockllm import MockPlannerLlm, MockRegionLlm


class ChatBody(BaseModel):
    model: str = "mock"
    messages: list[dict]
    adapter_id: str | None = None
    vision_ref: dict | None = None


class EmbedBody(BaseModel):
    model: str = "mock"
    input: list[str]


def create_mock_backend_app(embedder_dim: int = 256, seed: int = 0) -> FastAPI:
    app = FastAPI(title="ctqa-mock-backend")
    planner = MockPlannerLlm()
    region = MockRegionLlm()
    embedder = MockEmbedder(dim=embedder_dim, seed=seed)

    @app.post("/v1/chat")
    def chat(body: ChatBody):
        client = region if body.adapter_id is not None else planner
        reply = client.chat(
            body.messages, adapter_id=body.adapter_id, vision_ref=body.vision_ref
        )
        return {"text": reply.text}

    @app.post("/v1/embed")
    def embed(body: EmbedBody):
        return {"embeddings": embedder.embed(body.input).tolist()}

    return app
