"""Chat backend clients.

One wire contract serves every backend: POST JSON
``{model, messages[], adapter_id?, vision_ref?}`` returning
``{text, logprobs?}``. ``adapter_id`` names the low-rank adapter the backend
should activate; ``vision_ref`` is a reference to the compressed vision
matrix (study id plus shape/digest) that multimodal backends resolve out of
band and text-only mocks ignore.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import httpx

from .errors import BackendUnavailableError

Message = dict[str, str]


@dataclass(frozen=True)
class LlmReply:
    text: str
    logprobs: tuple[float, ...] | None = None
    backend_id: str = "unknown"

    @property
    def sequence_logprob(self) -> float | None:
        """Sum of per-token log probabilities, when the backend reports them."""
        if self.logprobs is None:
            return None
        return float(sum(self.logprobs))


@runtime_checkable
class LlmClient(Protocol):
    def chat(
        self,
        messages: list[Message],
        *,
        adapter_id: str | None = None,
        vision_ref: dict | None = None,
    ) -> LlmReply: ...


class HttpLlmClient:
    """Client for any backend speaking the wire contract above."""

    def __init__(self, endpoint: str, model: str = "default", timeout: float = 60.0,
                 transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self.model = model
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def chat(self, messages, *, adapter_id=None, vision_ref=None) -> LlmReply:
        payload: dict = {"model": self.model, "messages": messages}
        if adapter_id is not None:
            payload["adapter_id"] = adapter_id
        if vision_ref is not None:
            payload["vision_ref"] = vision_ref
        try:
            response = self._client.post(self.endpoint, json=payload)
            response.raise_for_status()
            data = response.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise BackendUnavailableError(f"backend {self.endpoint}: {exc}") from exc
        if "text" not in data:
            raise BackendUnavailableError(f"backend {self.endpoint}: reply missing 'text'")
        logprobs = data.get("logprobs")
        return LlmReply(
            text=data["text"],
            logprobs=tuple(logprobs) if logprobs is not None else None,
            backend_id=f"http:{self.endpoint}",
        )

    def close(self) -> None:
        self._client.close()
