"""Reasoning-engine abstraction: prompt augmentation, a deterministic scripted
backend for tests and simulations, and an HTTP chat-completion client.

Completion is single-turn; anything conversational lives in agent memory and
re-enters the prompt through augmentation.
"""

from __future__ import annotations

import os
import string
import time
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

from .ontology import ActionKind, AgentType


class SectionKind(Enum):
    ROLE_SPEC = "RoleSpec"
    MEMORY_EXCERPT = "MemoryExcerpt"
    CONTEXT_INFO = "ContextInfo"
    TEMPLATE_BODY = "TemplateBody"
    INSTRUCTION = "Instruction"


class BackendError(Exception):
    pass


class UnboundPlaceholder(BackendError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"template placeholder {name!r} has no binding")


class AlreadyAugmented(BackendError):
    pass


class NoAuthToken(BackendError):
    pass


class Timeout(BackendError):
    pass


class HttpStatus(BackendError):
    def __init__(self, code: int, detail: str = ""):
        self.code = code
        super().__init__(f"backend returned HTTP {code}: {detail}")


class BackendUnavailable(BackendError):
    pass


@dataclass
class PromptRecord:
    base: str
    augmented: str
    sections: List[Tuple[SectionKind, str]]
    response: Optional[str] = None
    is_augmented: bool = True


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    placeholders: frozenset
    action_kinds: frozenset = frozenset()

    def __post_init__(self):
        found = {
            name
            for _, name, _, _ in string.Formatter().parse(self.body)
            if name is not None
        }
        if found != set(self.placeholders):
            raise ValueError(
                f"template {self.id}: declared placeholders {sorted(self.placeholders)} "
                f"do not match body placeholders {sorted(found)}"
            )

    def fill(self, bindings: Dict[str, str]) -> str:
        for name in sorted(self.placeholders):
            if name not in bindings:
                raise UnboundPlaceholder(name)
        return self.body.format(**bindings)


def make_template(template_id: str, body: str, action_kinds: Set[ActionKind] = frozenset()) -> PromptTemplate:
    found = {
        name for _, name, _, _ in string.Formatter().parse(body) if name is not None
    }
    return PromptTemplate(
        id=template_id,
        body=body,
        placeholders=frozenset(found),
        action_kinds=frozenset(action_kinds),
    )


def augment_prompt(
    base: str,
    role: Optional[str] = None,
    memory_excerpt: Optional[str] = None,
    context_info: Optional[str] = None,
    template: Optional[PromptTemplate] = None,
    bindings: Optional[Dict[str, str]] = None,
) -> PromptRecord:
    """Assemble a prompt record.

    Sections appear in the fixed order role, memory, context, filled template,
    then the base instruction; absent inputs contribute no section. Passing an
    already-augmented record as the base is rejected rather than double-wrapped.
    """
    if isinstance(base, PromptRecord):
        raise AlreadyAugmented("base is already an augmented prompt record")
    sections: List[Tuple[SectionKind, str]] = []
    if role:
        sections.append((SectionKind.ROLE_SPEC, role))
    if memory_excerpt:
        sections.append((SectionKind.MEMORY_EXCERPT, memory_excerpt))
    if context_info:
        sections.append((SectionKind.CONTEXT_INFO, context_info))
    if template is not None:
        sections.append((SectionKind.TEMPLATE_BODY, template.fill(bindings or {})))
    sections.append((SectionKind.INSTRUCTION, base))
    augmented = "\n\n".join(content for _, content in sections)
    return PromptRecord(base=base, augmented=augmented, sections=sections)


class BackendKind(Enum):
    SCRIPTED = "Scripted"
    HTTP_CHAT = "HttpChat"


@dataclass(frozen=True)
class Matcher:
    """Rule predicate; unset fields match anything. Conditions are ANDed."""

    agent_type: Optional[AgentType] = None
    action_kind: Optional[ActionKind] = None
    step_range: Optional[Tuple[int, int]] = None  # inclusive 1-based call indices
    prompt_substring: Optional[str] = None

    def matches(
        self,
        step: int,
        prompt: PromptRecord,
        agent_type: Optional[AgentType],
        action_kind: Optional[ActionKind],
    ) -> bool:
        if self.agent_type is not None and self.agent_type is not agent_type:
            return False
        if self.action_kind is not None and self.action_kind is not action_kind:
            return False
        if self.step_range is not None:
            lo, hi = self.step_range
            if not lo <= step <= hi:
                return False
        if self.prompt_substring is not None and self.prompt_substring not in prompt.augmented:
            return False
        return True


@dataclass(frozen=True)
class Script:
    rules: Tuple[Tuple[Matcher, str], ...] = ()
    default_response: str = "ok"


@dataclass(frozen=True)
class BackendConfig:
    kind: BackendKind
    script: Optional[Script] = None
    seed: int = 0
    base_url: Optional[str] = None
    model_name: Optional[str] = None
    auth_token_env_name: str = "AAMATRIX_API_TOKEN"
    temperature: float = 0.0
    timeout_ms: int = 30_000
    max_retries: int = 2

    def __post_init__(self):
        if self.kind is BackendKind.HTTP_CHAT and not (self.base_url and self.model_name):
            raise ValueError("HttpChat backend needs base_url and model_name")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} not in [0, 2]")


class ScriptedBackend:
    """Pure function of (script, seed, call index, prompt): the first matching
    rule wins, the default response makes it total."""

    def __init__(self, script: Script, seed: int = 0):
        self.script = script
        self.seed = seed
        self.calls = 0

    def complete(
        self,
        prompt: PromptRecord,
        agent_type: Optional[AgentType] = None,
        action_kind: Optional[ActionKind] = None,
    ) -> str:
        self.calls += 1
        for matcher, response in self.script.rules:
            if matcher.matches(self.calls, prompt, agent_type, action_kind):
                prompt.response = response
                return response
        prompt.response = self.script.default_response
        return self.script.default_response


class HttpChatBackend:
    """Single-turn chat-completion client.

    The bearer token comes exclusively from the environment variable named in
    the config; the config itself never holds a credential.
    """

    def __init__(self, config: BackendConfig):
        self.config = config

    def complete(
        self,
        prompt: PromptRecord,
        agent_type: Optional[AgentType] = None,
        action_kind: Optional[ActionKind] = None,
    ) -> str:
        import requests

        token = os.environ.get(self.config.auth_token_env_name)
        if not token:
            raise NoAuthToken(
                f"environment variable {self.config.auth_token_env_name} is not set"
            )
        messages = []
        role_sections = [c for k, c in prompt.sections if k is SectionKind.ROLE_SPEC]
        if role_sections:
            messages.append({"role": "system", "content": role_sections[0]})
        messages.append({"role": "user", "content": prompt.augmented})
        body = {
            "model": self.config.model_name,
            "messages": messages,
            "temperature": self.config.temperature,
        }
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        last_error: Optional[BackendError] = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(0.2 * attempt)
            try:
                reply = requests.post(
                    url,
                    json=body,
                    headers={"Authorization": f"Bearer {token}"},
                    timeout=self.config.timeout_ms / 1000.0,
                )
            except requests.Timeout:
                last_error = Timeout(f"no response within {self.config.timeout_ms} ms")
                continue
            except requests.RequestException as exc:
                last_error = BackendUnavailable(str(exc))
                continue
            if 400 <= reply.status_code < 500:
                raise HttpStatus(reply.status_code, reply.text[:200])
            if reply.status_code != 200:
                last_error = HttpStatus(reply.status_code, reply.text[:200])
                continue
            try:
                text = reply.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise BackendUnavailable(f"malformed completion payload: {exc}")
            prompt.response = text
            return text
        raise BackendUnavailable(f"retries exhausted: {last_error}")


def make_backend(config: BackendConfig):
    if config.kind is BackendKind.SCRIPTED:
        return ScriptedBackend(config.script or Script(), config.seed)
    return HttpChatBackend(config)
