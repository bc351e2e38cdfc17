"""Client for chat-completions style HTTP endpoints."""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass

import requests

from .dispatch import RATE_LIMIT, FinishState, LlmJob, LlmResult


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str
    api_key_env: str | None = None
    temperature: float = 0.0
    seed: int = 0
    timeout: float = 120.0

    def headers(self) -> dict[str, str]:
        h = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if key:
                h["Authorization"] = f"Bearer {key}"
        return h


def request_body(job: LlmJob, cfg: EndpointConfig) -> dict:
    return {
        "model": cfg.model,
        "messages": [{"role": "user", "content": job.prompt_text}],
        "temperature": cfg.temperature,
        "seed": cfg.seed,
    }


def _api_error(job: LlmJob, error_class: str, message: str) -> LlmResult:
    return LlmResult(job.task_id, "", FinishState.API_ERROR, error_class=error_class,
                     message=message[:500])


def call_backend(job: LlmJob, cfg: EndpointConfig,
                 session: requests.Session | None = None) -> LlmResult:
    """POST one prompt and classify the outcome.

    429 is a rate-limit error, 5xx a server error, timeouts and connection
    failures are their own classes. A body that is not the expected JSON is
    a format error.
    """
    http = session or requests
    try:
        resp = http.post(cfg.url, json=request_body(job, cfg), headers=cfg.headers(),
                         timeout=cfg.timeout)
    except requests.Timeout as e:
        return _api_error(job, "timeout", str(e))
    except requests.ConnectionError as e:
        return _api_error(job, "network", str(e))
    except requests.RequestException as e:
        return _api_error(job, "request", str(e))

    if resp.status_code == 429:
        return _api_error(job, RATE_LIMIT, resp.text)
    if resp.status_code >= 500:
        return _api_error(job, "server", f"HTTP {resp.status_code}: {resp.text}")
    if resp.status_code >= 400:
        return _api_error(job, "client", f"HTTP {resp.status_code}: {resp.text}")

    try:
        body = resp.json()
    except (ValueError, json.JSONDecodeError) as e:
        return LlmResult(job.task_id, resp.text, FinishState.FORMAT_ERROR,
                         error_class="invalid_json", message=str(e))
    if isinstance(body, dict) and "error" in body:
        err = body["error"]
        msg = err.get("message", "") if isinstance(err, dict) else str(err)
        kind = err.get("type", "api") if isinstance(err, dict) else "api"
        return _api_error(job, RATE_LIMIT if "rate" in str(kind) else "api", msg)
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        return LlmResult(job.task_id, resp.text, FinishState.FORMAT_ERROR,
                         error_class="unexpected_body", message="no choices[0].message.content")
    usage = body.get("usage") or {}
    usage_pair = (usage.get("prompt_tokens"), usage.get("completion_tokens")) if usage else None
    if not content:
        return LlmResult(job.task_id, "", FinishState.FORMAT_ERROR, usage_pair,
                         "empty", "empty message content")
    return LlmResult(job.task_id, content, FinishState.OK, usage_pair)


class HttpBackend:
    """Dispatcher backend with one ``requests.Session`` per worker thread."""

    def __init__(self, cfg: EndpointConfig) -> None:
        self.cfg = cfg
        self._local = threading.local()

    def _session(self) -> requests.Session:
        s = getattr(self._local, "session", None)
        if s is None:
            s = self._local.session = requests.Session()
        return s

    def __call__(self, job: LlmJob) -> LlmResult:
        return call_backend(job, self.cfg, self._session())
