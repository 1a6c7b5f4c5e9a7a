"""Registry and invocation layer for contextual resources: tools, data sources,
and foundation models.

Resources live in one of three states. Active resources are usable now;
Dormant ones are prepared adapters that an adaptive integration level may
activate on demand; Catalog entries model a discoverable pool that only a
self-organizing integration level may bind. Resolution is deterministic:
the lowest resource id among matches wins.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple, Union

from .ontology import Artefact, ArtefactKind
from .taxonomy import AutonomyLevel


class ResourceKind(Enum):
    TOOL = "Tool"
    DATA = "Data"
    MODEL = "Model"


class ToolSubkind(Enum):
    SEARCH_ANALYSIS = "SearchAnalysis"
    EXECUTION = "Execution"
    REASONING = "Reasoning"
    DEVELOPMENT = "Development"
    COMMUNICATION = "Communication"


class DataSubkind(Enum):
    STRUCTURED_TEXT = "StructuredText"
    UNSTRUCTURED_TEXT = "UnstructuredText"
    MULTIMODAL = "Multimodal"
    DOMAIN_SPECIFIC = "DomainSpecific"


class ModelSubkind(Enum):
    NLP = "NLP"
    VISION = "Vision"
    AUDIO = "Audio"
    MULTIMODAL = "Multimodal"


Subkind = Union[ToolSubkind, DataSubkind, ModelSubkind]

_SUBKIND_FOR_KIND = {
    ResourceKind.TOOL: ToolSubkind,
    ResourceKind.DATA: DataSubkind,
    ResourceKind.MODEL: ModelSubkind,
}


class ResourceState(Enum):
    ACTIVE = "Active"
    DORMANT = "Dormant"
    CATALOG = "Catalog"


# Which states each integration autonomy level may draw from.
STATES_BY_LEVEL: Dict[AutonomyLevel, Tuple[ResourceState, ...]] = {
    AutonomyLevel.STATIC: (ResourceState.ACTIVE,),
    AutonomyLevel.ADAPTIVE: (ResourceState.ACTIVE, ResourceState.DORMANT),
    AutonomyLevel.SELF_ORGANIZING: (
        ResourceState.ACTIVE,
        ResourceState.DORMANT,
        ResourceState.CATALOG,
    ),
}


class RegistryError(Exception):
    pass


class DuplicateResource(RegistryError):
    pass


class KindMismatch(RegistryError):
    pass


class ResourceUnavailable(RegistryError):
    def __init__(self, capability: str, detail: str = ""):
        self.capability = capability
        super().__init__(detail or f"no resource available for capability {capability!r}")


class HandlerFailure(RegistryError):
    pass


@dataclass
class ResourceDescriptor:
    id: str
    kind: ResourceKind
    subkind: Subkind
    state: ResourceState = ResourceState.ACTIVE
    capabilities: frozenset = frozenset()
    invoke_spec: str = "echo"

    def __post_init__(self):
        if not isinstance(self.subkind, _SUBKIND_FOR_KIND[self.kind]):
            raise KindMismatch(
                f"resource {self.id}: subkind {self.subkind} does not belong to "
                f"kind {self.kind.value}"
            )


@dataclass(frozen=True)
class ResourceInvocation:
    resource: str
    request: str
    result: Union[str, Artefact]
    impact: Optional[str] = None


@dataclass
class Handler:
    """Executable behind a resource's invoke_spec."""

    fn: Callable[[str, str], Union[str, Artefact]]
    side_effecting: bool = False
    impact_note: str = ""


def _echo(resource_id: str, request: str) -> str:
    return request


def _arithmetic(resource_id: str, request: str) -> str:
    # Integer expressions with + - * // and parentheses only.
    allowed = set("0123456789+-*/() ")
    if not request or set(request) - allowed:
        raise HandlerFailure(f"not an arithmetic expression: {request!r}")
    try:
        value = eval(compile(request, "<arith>", "eval"), {"__builtins__": {}}, {})
    except Exception as exc:
        raise HandlerFailure(f"arithmetic evaluation failed: {exc}")
    return str(value)


class KvLookup:
    def __init__(self, data: Dict[str, str]):
        self.data = dict(data)

    def __call__(self, resource_id: str, request: str) -> str:
        if request not in self.data:
            raise HandlerFailure("key not found")
        return self.data[request]


class FileArtefactWriter:
    def __init__(self, directory: str):
        self.directory = directory

    def __call__(self, resource_id: str, request: str) -> Artefact:
        import os

        os.makedirs(self.directory, exist_ok=True)
        name = f"{resource_id}-out.txt"
        path = os.path.join(self.directory, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(request)
        return Artefact(
            kind=ArtefactKind.TEXT, name=name, payload=request, produced_by=resource_id
        )


def _mock_web_search(resource_id: str, request: str) -> str:
    return f"search results for: {request}"


def _mock_email(resource_id: str, request: str) -> str:
    return f"email queued: {request}"


def builtin_handlers(artefact_dir: str = ".") -> Dict[str, Handler]:
    return {
        "echo": Handler(_echo),
        "kv_lookup": Handler(KvLookup({})),
        "arithmetic": Handler(_arithmetic),
        "file_writer": Handler(
            FileArtefactWriter(artefact_dir),
            side_effecting=True,
            impact_note="wrote a file artefact",
        ),
        "web_search": Handler(_mock_web_search),
        "email": Handler(
            _mock_email, side_effecting=True, impact_note="queued an outbound email"
        ),
    }


class Registry:
    """Resource catalogue with state transitions serialized per instance."""

    def __init__(self, handlers: Optional[Dict[str, Handler]] = None):
        self._resources: Dict[str, ResourceDescriptor] = {}
        self._handlers: Dict[str, Handler] = handlers or builtin_handlers()
        self._lock = threading.Lock()

    def register(
        self,
        descriptor: ResourceDescriptor,
        initial_state: Optional[ResourceState] = None,
    ) -> "Registry":
        with self._lock:
            if descriptor.id in self._resources:
                raise DuplicateResource(f"resource id {descriptor.id!r} already registered")
            if initial_state is not None:
                descriptor = replace(descriptor, state=initial_state)
            self._resources[descriptor.id] = descriptor
        return self

    def add_handler(self, handler_id: str, handler: Handler) -> None:
        self._handlers[handler_id] = handler

    def get(self, resource_id: str) -> ResourceDescriptor:
        try:
            return self._resources[resource_id]
        except KeyError:
            raise ResourceUnavailable(resource_id, f"unknown resource {resource_id!r}")

    def descriptors(self) -> List[ResourceDescriptor]:
        return [self._resources[rid] for rid in sorted(self._resources)]

    def is_side_effecting(self, resource_id: str) -> bool:
        descriptor = self._resources.get(resource_id)
        if descriptor is None:
            return False
        handler = self._handlers.get(descriptor.invoke_spec)
        return bool(handler and handler.side_effecting)

    def matches(self, capability: str, integ_level: AutonomyLevel) -> List[ResourceDescriptor]:
        states = STATES_BY_LEVEL[integ_level]
        return [
            d
            for d in self.descriptors()
            if capability in d.capabilities and d.state in states
        ]

    def resolve(self, capability: str, integ_level: AutonomyLevel) -> ResourceDescriptor:
        """Pick a resource providing the capability that the integration level
        may reach, activating dormant or catalog entries where the level
        permits. Already-active resources are preferred, then the lowest id;
        this keeps the choice identical across levels whenever the static
        level could already resolve the capability."""
        with self._lock:
            states = STATES_BY_LEVEL[integ_level]
            rank = {
                ResourceState.ACTIVE: 0,
                ResourceState.DORMANT: 1,
                ResourceState.CATALOG: 2,
            }
            candidates = sorted(
                (
                    d
                    for d in self._resources.values()
                    if capability in d.capabilities and d.state in states
                ),
                key=lambda d: (rank[d.state], d.id),
            )
            if not candidates:
                raise ResourceUnavailable(capability)
            chosen = candidates[0]
            if chosen.state is not ResourceState.ACTIVE:
                chosen.state = ResourceState.ACTIVE
            return chosen

    def resolve_by_id(self, resource_id: str, integ_level: AutonomyLevel) -> ResourceDescriptor:
        """Resolve a specific resource id under the integration level's state rules."""
        descriptor = self.get(resource_id)
        with self._lock:
            if descriptor.state not in STATES_BY_LEVEL[integ_level]:
                raise ResourceUnavailable(
                    resource_id,
                    f"resource {resource_id!r} is {descriptor.state.value} and the "
                    f"{integ_level.label} integration level cannot reach it",
                )
            if descriptor.state is not ResourceState.ACTIVE:
                descriptor.state = ResourceState.ACTIVE
            return descriptor

    def invoke(self, resource_id: str, request: str) -> ResourceInvocation:
        descriptor = self.get(resource_id)
        if descriptor.state is not ResourceState.ACTIVE:
            raise ResourceUnavailable(
                resource_id, f"resource {resource_id!r} is not active"
            )
        handler = self._handlers.get(descriptor.invoke_spec)
        if handler is None:
            raise HandlerFailure(f"no handler registered for {descriptor.invoke_spec!r}")
        try:
            result = handler.fn(resource_id, request)
        except HandlerFailure:
            raise
        except Exception as exc:
            raise HandlerFailure(f"handler {descriptor.invoke_spec!r} failed: {exc}")
        impact = handler.impact_note or None if handler.side_effecting else None
        if handler.side_effecting and not impact:
            impact = f"external side effect via {resource_id}"
        return ResourceInvocation(
            resource=resource_id, request=request, result=result, impact=impact
        )

    def clone(self) -> "Registry":
        """Copy for per-activity use; activations stay local to the copy."""
        twin = Registry(handlers=dict(self._handlers))
        for descriptor in self._resources.values():
            twin._resources[descriptor.id] = replace(descriptor)
        return twin


def registry_from_manifest(
    manifest: dict, handlers: Optional[Dict[str, Handler]] = None
) -> Registry:
    """Build a registry from a manifest object: {"resources": [...]}."""
    registry = Registry(handlers=handlers)
    for entry in manifest.get("resources", []):
        kind = ResourceKind(entry["kind"])
        subkind = _SUBKIND_FOR_KIND[kind](entry["subkind"])
        descriptor = ResourceDescriptor(
            id=entry["id"],
            kind=kind,
            subkind=subkind,
            state=ResourceState(entry.get("state", "Active")),
            capabilities=frozenset(entry.get("capabilities", [])),
            invoke_spec=entry.get("handler", "echo"),
        )
        registry.register(descriptor)
        if "data" in entry:
            registry.add_handler(
                descriptor.invoke_spec, Handler(KvLookup(entry["data"]))
            )
    return registry


def manifest_from_registry(registry: Registry) -> dict:
    return {
        "resources": [
            {
                "id": d.id,
                "kind": d.kind.value,
                "subkind": d.subkind.value,
                "state": d.state.value,
                "capabilities": sorted(d.capabilities),
                "handler": d.invoke_spec,
            }
            for d in registry.descriptors()
        ]
    }


def load_manifest(path: str, handlers: Optional[Dict[str, Handler]] = None) -> Registry:
    with open(path, "r", encoding="utf-8") as fh:
        return registry_from_manifest(json.load(fh), handlers=handlers)
