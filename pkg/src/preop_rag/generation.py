"""Prompt assembly and LLM backends.

The preoperative prompt is fixed: a system prompt carrying the
anesthesiologist role, the eight numbered instruction components, and the
finality clause; and a user prompt carrying the retrieved guideline
context (tagged with source document ids) followed by the clinic note.
Systems with no knowledge base get no context block at all.

Two backends implement the same one-method interface: a replay backend
that serves canned responses keyed by (system, scenario, repeat) from a
line-delimited fixture, which makes every end-to-end run bit-reproducible
offline, and a generic HTTP chat-completion client for live services.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from .clinical import Scenario
from .retrieval import ContextNode

__all__ = [
    "KnowledgeBase",
    "SystemId",
    "GenerationConfig",
    "PromptBundle",
    "GenerationRequest",
    "GenerationResult",
    "Backend",
    "ReplayBackend",
    "ReplayMissError",
    "BackendTransportError",
    "HttpChatBackend",
    "assemble_prompt",
    "generate",
    "SYSTEM_PROMPT",
]


class KnowledgeBase(str, enum.Enum):
    NONE = "none"
    LOCAL = "local"
    INTERNATIONAL = "international"


@dataclass(frozen=True)
class SystemId:
    model_name: str
    knowledge_base: KnowledgeBase

    @property
    def rendered(self) -> str:
        if self.knowledge_base is KnowledgeBase.NONE:
            return self.model_name
        return f"{self.model_name}_{self.knowledge_base.value}"

    @classmethod
    def parse(cls, name: str) -> "SystemId":
        for kb in (KnowledgeBase.LOCAL, KnowledgeBase.INTERNATIONAL):
            suffix = f"_{kb.value}"
            if name.endswith(suffix):
                return cls(model_name=name[: -len(suffix)], knowledge_base=kb)
        return cls(model_name=name, knowledge_base=KnowledgeBase.NONE)


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = 0.1
    top_p: float = 0.90
    max_tokens: int = 2048
    short_context_mode: bool = False

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    @property
    def effective_max_tokens(self) -> int:
        """Short-context mode caps the response at 1024 tokens."""
        return min(self.max_tokens, 1024) if self.short_context_mode else self.max_tokens

    @property
    def context_node_cap(self) -> int | None:
        """Short-context mode feeds at most 10 retrieved pieces to the model."""
        return 10 if self.short_context_mode else None


_ROLE = (
    "You are the anesthesiologist seeing this patient in the preoperative "
    "clinic two weeks before the date of operation. The patients have "
    "already taken their routine preoperative investigations and the "
    "findings are listed within the clinical summary.\n\n"
    "Your role is to evaluate the clinical summary and give the "
    "preoperative anesthesia instructions for the following patient "
    "targeted to your fellow medical colleagues. You are to follow "
    "strictly the department's guidelines.\n\n"
    "Your instructions should consist of the following components:"
)

PROMPT_COMPONENTS = (
    "Should the patient be seen by a Doctor or a Nurse - Doctor/Nurse",
    "Fasting instructions - list instructions based on the number of hours "
    "before the time of the listed surgery",
    "Suitability for preoperative carbohydrate loading - yes/no.",
    "Medication instructions - name each medication and give the "
    "instructions for the day of the operation and days leading up to the "
    "operation as required.",
    "Any instructions for the healthcare team - for example, preoperative "
    "blood group matching, arranging for preoperative dialysis, or standby "
    "post-operative high dependency/ICU beds.",
    "Any preoperative optimization required for the patient - list what "
    "needs to be optimized.",
    "Any need to delay the operation for further medical workup and "
    "preoperative optimization?",
    "Any specific department protocols to follow for this patient - name "
    "as many as necessary, and give short reasoning for using these "
    "protocols.",
)

_FINALITY = (
    "Your instructions are the final instructions, do not give uncertain "
    "answers. If the medical condition is already optimized, there is no "
    "need to offer further optimization. If there are no relevant "
    "instructions in any of the above categories, leave it blank and "
    "write NA."
)

SYSTEM_PROMPT = "\n".join(
    [_ROLE]
    + [f"{i}. {component}" for i, component in enumerate(PROMPT_COMPONENTS, 1)]
    + ["", _FINALITY]
)


@dataclass(frozen=True)
class PromptBundle:
    system_prompt: str
    user_prompt: str


def assemble_prompt(
    scenario: Scenario,
    contexts: Sequence[ContextNode],
    knowledge_base: KnowledgeBase,
) -> PromptBundle:
    """Deterministically assemble the prompt pair for one scenario.

    With knowledge_base = none the context block is omitted entirely (the
    native-model condition); supplying contexts there is an error. Each
    context is tagged `[source: <doc_id>]` and they appear in rank order,
    blank-line separated, ahead of the clinic note.
    """
    if knowledge_base is KnowledgeBase.NONE:
        if contexts:
            raise ValueError("contexts forbidden for native system")
        return PromptBundle(system_prompt=SYSTEM_PROMPT, user_prompt=scenario.free_text)
    blocks = [f"[source: {c.doc_id}]\n{c.text}" for c in contexts]
    blocks.append(scenario.free_text)
    return PromptBundle(system_prompt=SYSTEM_PROMPT, user_prompt="\n\n".join(blocks))


@dataclass(frozen=True)
class GenerationRequest:
    system: SystemId
    scenario_id: str
    repeat_index: int
    bundle: PromptBundle
    config: GenerationConfig


@dataclass(frozen=True)
class GenerationResult:
    system: str
    scenario_id: str
    repeat_index: int
    text: str
    retrieval_latency_ms: float
    generation_latency_ms: float
    truncated: bool = False


class Backend(Protocol):
    def complete(self, request: GenerationRequest) -> str: ...


class ReplayMissError(KeyError):
    def __init__(self, system: str, scenario_id: str, repeat_index: int) -> None:
        super().__init__(
            f"no replay fixture for system={system!r} scenario={scenario_id!r} "
            f"repeat={repeat_index}"
        )
        self.system = system
        self.scenario_id = scenario_id
        self.repeat_index = repeat_index


class ReplayBackend:
    """Pure lookup backend: (system, scenario_id, repeat_index) -> text."""

    def __init__(self, responses: dict[tuple[str, str, int], str]) -> None:
        self._responses = dict(responses)

    @classmethod
    def from_jsonl(cls, path: Path | str) -> "ReplayBackend":
        responses: dict[tuple[str, str, int], str] = {}
        with Path(path).open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                key = (
                    entry["system"],
                    entry["scenario_id"],
                    int(entry["repeat_index"]),
                )
                responses[key] = entry["text"]
        return cls(responses)

    def complete(self, request: GenerationRequest) -> str:
        key = (request.system.rendered, request.scenario_id, request.repeat_index)
        try:
            return self._responses[key]
        except KeyError:
            raise ReplayMissError(*key) from None

    def __len__(self) -> int:
        return len(self._responses)


class BackendTransportError(RuntimeError):
    """Retryable transport failure; carries how many attempts were made."""

    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(f"{message} (after {attempts} attempt(s))")
        self.attempts = attempts


@dataclass
class HttpChatBackend:
    """Generic chat-completion client.

    POSTs `{"model", "messages", "temperature", "top_p", "max_tokens"}` to
    `endpoint` and reads `choices[0].message.content` from the JSON reply.
    The bearer token comes from the environment variable named by
    `auth_env`; endpoints and credentials are configuration, never code.
    """

    endpoint: str
    model: str
    auth_env: str | None = None
    max_attempts: int = 3
    timeout: float = 120.0
    transport: object = field(default=None, repr=False)

    def _headers(self) -> dict[str, str]:
        import os

        headers = {"content-type": "application/json"}
        if self.auth_env:
            token = os.environ.get(self.auth_env, "")
            if not token:
                raise ValueError(f"auth token env var {self.auth_env!r} is not set")
            headers["authorization"] = f"Bearer {token}"
        return headers

    def complete(self, request: GenerationRequest) -> str:
        import httpx

        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.bundle.system_prompt},
                {"role": "user", "content": request.bundle.user_prompt},
            ],
            "temperature": request.config.temperature,
            "top_p": request.config.top_p,
            "max_tokens": request.config.effective_max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                with httpx.Client(transport=self.transport, timeout=self.timeout) as client:
                    response = client.post(
                        self.endpoint, json=payload, headers=self._headers()
                    )
                response.raise_for_status()
                return response.json()["choices"][0]["message"]["content"]
            except httpx.TransportError as exc:
                last_error = exc
        raise BackendTransportError(str(last_error), attempts=self.max_attempts)


def _token_count(text: str) -> int:
    # Whitespace tokens: a deterministic stand-in for model tokenization.
    return len(text.split())


def generate(
    backend: Backend,
    bundle: PromptBundle,
    config: GenerationConfig,
    *,
    system: SystemId,
    scenario_id: str,
    repeat_index: int = 1,
    retrieval_latency_ms: float = 0.0,
) -> GenerationResult:
    """Obtain one response; records wall-clock latency on every call.

    The backend text is returned verbatim; a response longer than the
    effective token cap only sets the truncation flag.
    """
    request = GenerationRequest(
        system=system,
        scenario_id=scenario_id,
        repeat_index=repeat_index,
        bundle=bundle,
        config=config,
    )
    started = time.perf_counter()
    text = backend.complete(request)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    return GenerationResult(
        system=system.rendered,
        scenario_id=scenario_id,
        repeat_index=repeat_index,
        text=text,
        retrieval_latency_ms=retrieval_latency_ms,
        generation_latency_ms=elapsed_ms,
        truncated=_token_count(text) > config.effective_max_tokens,
    )
