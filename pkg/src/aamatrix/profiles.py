"""System-profile model, the profile file format, validation, and the bundled
assessment dataset of eight task-management systems.

A profile assigns every one of the twelve aspects an (autonomy, alignment)
pair. Profiles serialize to a small JSON document::

    {"name": "...", "category": "...", "notes": "...",
     "aspects": {"decom": {"au": 2, "al": 0}, ..., "util": {"au": 2, "al": 0}}}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .taxonomy import (
    ASPECT_BY_KEY,
    ASPECT_ORDER,
    AlignmentLevel,
    AspectConfig,
    AspectId,
    AutonomyLevel,
)

logger = logging.getLogger(__name__)


class Category(Enum):
    GENERAL_PURPOSE = "GeneralPurpose"
    CENTRAL_CONTROLLER = "CentralController"
    ROLE_AGENT = "RoleAgent"
    WORKFLOW_AUTOMATION = "WorkflowAutomation"
    UNLABELED = "Unlabeled"


class ProfileError(Exception):
    """Base class for profile parsing failures."""


class MalformedDocument(ProfileError):
    pass


class MissingAspect(ProfileError):
    def __init__(self, aspect: AspectId):
        self.aspect = aspect
        super().__init__(f"profile is missing aspect {aspect.value}")


class DuplicateAspect(ProfileError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"aspect {key!r} appears more than once")


class LevelOutOfRange(ProfileError):
    def __init__(self, aspect: AspectId, value: object):
        self.aspect = aspect
        self.value = value
        super().__init__(f"aspect {aspect.value}: level {value!r} not in 0..2")


@dataclass(frozen=True)
class SystemProfile:
    """A 12-aspect (autonomy, alignment) assessment of one system."""

    name: str
    category: Category
    aspects: Dict[AspectId, AspectConfig]
    notes: Optional[str] = None

    def level_vector(self) -> Tuple[int, ...]:
        """24 ordinals in canonical aspect order: (au, al) per aspect."""
        out: List[int] = []
        for aspect in ASPECT_ORDER:
            cfg = self.aspects[aspect]
            out.extend((int(cfg.autonomy), int(cfg.alignment)))
        return tuple(out)


@dataclass(frozen=True)
class ProfileValidationReport:
    valid: bool
    issues: List[Tuple[str, str]] = field(default_factory=list)


def _level(aspect: AspectId, raw: object, kind: str) -> int:
    if not isinstance(raw, int) or isinstance(raw, bool) or not 0 <= raw <= 2:
        raise LevelOutOfRange(aspect, raw)
    return raw


def _check_duplicate_keys(pairs):
    seen = set()
    out = {}
    for key, value in pairs:
        if key in seen:
            raise DuplicateAspect(key)
        seen.add(key)
        out[key] = value
    return out


def parse_profile(document: str) -> SystemProfile:
    """Parse a profile document; unknown fields are ignored with a logged notice."""
    try:
        data = json.loads(document, object_pairs_hook=_check_duplicate_keys)
    except DuplicateAspect:
        raise
    except (ValueError, TypeError) as exc:
        raise MalformedDocument(f"not a valid profile document: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedDocument("profile document must be an object")
    return profile_from_dict(data)


def profile_from_dict(data: dict) -> SystemProfile:
    known = {"name", "category", "aspects", "notes"}
    for extra in sorted(set(data) - known):
        logger.warning("ignoring unknown profile field %r", extra)

    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise MalformedDocument("profile needs a nonempty 'name'")

    category = Category.UNLABELED
    if "category" in data:
        try:
            category = Category(data["category"])
        except ValueError:
            raise MalformedDocument(f"unknown category {data['category']!r}")

    raw_aspects = data.get("aspects")
    if not isinstance(raw_aspects, dict):
        raise MalformedDocument("profile needs an 'aspects' object")

    aspects: Dict[AspectId, AspectConfig] = {}
    for key, levels in raw_aspects.items():
        aspect = ASPECT_BY_KEY.get(str(key).lower())
        if aspect is None:
            logger.warning("ignoring unknown aspect key %r", key)
            continue
        if aspect in aspects:
            raise DuplicateAspect(aspect.key)
        if not isinstance(levels, dict):
            raise MalformedDocument(f"aspect {key!r} must be an object with au/al")
        au = _level(aspect, levels.get("au"), "au")
        al = _level(aspect, levels.get("al"), "al")
        aspects[aspect] = AspectConfig(AutonomyLevel(au), AlignmentLevel(al))

    for aspect in ASPECT_ORDER:
        if aspect not in aspects:
            raise MissingAspect(aspect)

    notes = data.get("notes")
    if notes is not None and not isinstance(notes, str):
        raise MalformedDocument("'notes' must be a string")
    return SystemProfile(name=name, category=category, aspects=aspects, notes=notes)


def profile_to_dict(profile: SystemProfile) -> dict:
    doc: dict = {
        "name": profile.name,
        "category": profile.category.value,
        "aspects": {
            aspect.key: {
                "au": int(profile.aspects[aspect].autonomy),
                "al": int(profile.aspects[aspect].alignment),
            }
            for aspect in ASPECT_ORDER
        },
    }
    if profile.notes is not None:
        doc["notes"] = profile.notes
    return doc


def serialize_profile(profile: SystemProfile) -> str:
    return json.dumps(profile_to_dict(profile), indent=2, sort_keys=False)


def validate(profile: SystemProfile) -> ProfileValidationReport:
    """Check the SystemProfile invariants without mutating the input."""
    issues: List[Tuple[str, str]] = []
    if not profile.name:
        issues.append(("name", "name must be nonempty"))
    if not isinstance(profile.category, Category):
        issues.append(("category", f"unknown category {profile.category!r}"))
    for aspect in ASPECT_ORDER:
        if aspect not in profile.aspects:
            issues.append((f"aspects.{aspect.key}", f"missing aspect {aspect.value}"))
    for aspect, cfg in profile.aspects.items():
        if not isinstance(aspect, AspectId):
            issues.append(("aspects", f"unknown aspect key {aspect!r}"))
            continue
        if not isinstance(cfg, AspectConfig):
            issues.append((f"aspects.{aspect.key}", "value is not an AspectConfig"))
            continue
        if not 0 <= int(cfg.autonomy) <= 2:
            issues.append((f"aspects.{aspect.key}.au", f"level {cfg.autonomy} out of range"))
        if not 0 <= int(cfg.alignment) <= 2:
            issues.append((f"aspects.{aspect.key}.al", f"level {cfg.alignment} out of range"))
    return ProfileValidationReport(valid=not issues, issues=issues)


def profile_from_levels(
    name: str,
    levels: Sequence[int],
    category: Category = Category.UNLABELED,
    notes: Optional[str] = None,
) -> SystemProfile:
    """Build a profile from 24 ordinals in canonical aspect order."""
    if len(levels) != 24:
        raise ValueError(f"need 24 level values, got {len(levels)}")
    aspects = {
        aspect: AspectConfig(AutonomyLevel(levels[2 * i]), AlignmentLevel(levels[2 * i + 1]))
        for i, aspect in enumerate(ASPECT_ORDER)
    }
    return SystemProfile(name=name, category=category, aspects=aspects, notes=notes)


_CAMEL_NOTE = (
    "Narrative assessment describes self-organizing prompt engineering and action "
    "management; the tabulated grid records adaptive levels (PrEng 1/0, ActM 1/0). "
    "The tabulated values are kept as the canonical dataset."
)

# (name, category, 24 ordinals in canonical order, notes)
_BUILTIN_ROWS: Tuple[Tuple[str, Category, Tuple[int, ...], Optional[str]], ...] = (
    ("Auto-GPT", Category.GENERAL_PURPOSE,
     (2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 2, 0), None),
    ("BabyAGI", Category.GENERAL_PURPOSE,
     (2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 2, 0), None),
    ("SuperAGI", Category.GENERAL_PURPOSE,
     (2, 0, 1, 0, 1, 1, 0, 0, 1, 0, 2, 0, 1, 1, 2, 1, 0, 1, 0, 0, 0, 1, 2, 1), None),
    ("HuggingGPT", Category.CENTRAL_CONTROLLER,
     (2, 0, 1, 0, 2, 0, 0, 0, 2, 0, 2, 0, 2, 0, 2, 0, 1, 0, 0, 0, 2, 0, 2, 0), None),
    ("MetaGPT", Category.ROLE_AGENT,
     (2, 0, 0, 0, 2, 0, 1, 0, 1, 0, 2, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 2, 0), None),
    ("CAMEL", Category.ROLE_AGENT,
     (2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0), _CAMEL_NOTE),
    ("AgentGPT", Category.GENERAL_PURPOSE,
     (2, 1, 1, 0, 1, 0, 0, 0, 1, 0, 2, 0, 1, 1, 2, 0, 0, 0, 0, 0, 0, 0, 2, 1), None),
    ("Zapier", Category.WORKFLOW_AUTOMATION,
     (1, 1, 0, 1, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 1), None),
)


def builtin_profiles() -> List[SystemProfile]:
    """The bundled assessment of eight systems, in fixed row order."""
    return [
        profile_from_levels(name, levels, category=category, notes=notes)
        for name, category, levels, notes in _BUILTIN_ROWS
    ]


def builtin_profile(name: str) -> SystemProfile:
    for profile in builtin_profiles():
        if profile.name == name:
            return profile
    raise KeyError(f"no builtin profile named {name!r}")


def llm_builtin_profiles() -> List[SystemProfile]:
    """The seven agent systems, excluding the workflow-automation contrast row."""
    return [p for p in builtin_profiles() if p.category is not Category.WORKFLOW_AUTOMATION]
