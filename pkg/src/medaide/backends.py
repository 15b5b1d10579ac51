"""LLM backend adapters.

A backend turns a rendered prompt into response text. The in-repo mock
lives in the rag module; this module defines the protocol, the failure
types, and the adapter for real local runners: line-delimited JSON over
child-process pipes, one response line per request line.
"""

from __future__ import annotations

import json
import select
import subprocess
import time
import uuid
from dataclasses import dataclass
from typing import Protocol

from .errors import MedaideError

DEFAULT_TIMEOUT_S = 120.0


class BackendFailure(MedaideError):
    pass


class BackendTimeout(BackendFailure):
    pass


class MalformedPrompt(MedaideError):
    pass


@dataclass(frozen=True)
class GenerationParams:
    max_tokens: int = 256
    temperature: float = 0.0
    seed: int = 0
    timeout_s: float = DEFAULT_TIMEOUT_S


class LlmBackend(Protocol):
    name: str
    deterministic: bool

    def generate(self, prompt: str, params: GenerationParams) -> str: ...


class ProcessBackend:
    """Adapter for a local runner process speaking newline-delimited JSON.

    Request lines look like {"id", "prompt", "max_tokens", "temperature",
    "seed"}; the process must answer each with one line {"id", "text"} or
    {"id", "error"}. The child is started lazily and kept alive across
    calls.
    """

    deterministic = False

    def __init__(self, command: list[str], timeout_s: float = DEFAULT_TIMEOUT_S):
        if not command:
            raise BackendFailure("backend command must be non-empty")
        self.command = list(command)
        self.timeout_s = timeout_s
        self.name = f"process:{command[0]}"
        self._proc: subprocess.Popen | None = None

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise BackendFailure(f"could not start backend {self.command[0]!r}: {exc}") from exc
        return self._proc

    def _read_line(self, proc: subprocess.Popen, deadline: float) -> str:
        assert proc.stdout is not None
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise BackendTimeout(f"backend gave no response within {self.timeout_s}s")
            ready, _, _ = select.select([proc.stdout], [], [], remaining)
            if not ready:
                continue
            line = proc.stdout.readline()
            if line == "":
                raise BackendFailure("backend closed its output stream")
            if line.strip():
                return line

    def generate(self, prompt: str, params: GenerationParams) -> str:
        proc = self._ensure_started()
        request_id = uuid.uuid4().hex
        request = {
            "id": request_id,
            "prompt": prompt,
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "seed": params.seed,
        }
        timeout = params.timeout_s if params.timeout_s else self.timeout_s
        deadline = time.monotonic() + timeout
        try:
            assert proc.stdin is not None
            proc.stdin.write(json.dumps(request) + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendFailure(f"backend pipe broke: {exc}") from exc
        line = self._read_line(proc, deadline)
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendFailure(f"backend sent invalid JSON: {exc}") from exc
        if response.get("id") != request_id:
            raise BackendFailure(
                f"backend answered request {response.get('id')!r}, expected {request_id!r}"
            )
        if "error" in response:
            raise BackendFailure(f"backend error: {response['error']}")
        text = response.get("text")
        if not isinstance(text, str):
            raise BackendFailure("backend response missing 'text'")
        return text

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None

    def __enter__(self) -> "ProcessBackend":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
