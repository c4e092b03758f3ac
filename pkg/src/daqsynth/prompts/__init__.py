"""Prompt catalog: designer persona, stage prompts, and the nine
category-specific detailing templates.

Templates are plain UTF-8 text files with {placeholder} slots, listed in a
manifest so wording can be tuned without touching code. Rendering is a single
pass: bound values are inserted literally, never re-scanned for placeholders.
"""

from __future__ import annotations

import enum
import functools
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from ..errors import RenderError, UsageError
from ..gateway import ChatMessage

DEFAULT_PACK_DIR = Path(__file__).parent / "templates"

_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")


class CategoryId(enum.Enum):
    """The nine block roles a categorised architecture can use."""

    SENSOR = "Sensor"
    SIGNAL_CONDITIONING = "Signal conditioning"
    AMPLIFICATION = "Amplification"
    FILTERING = "Filtering"
    OTHER_CONDITIONING = "Other conditioning"
    DIRECT_MEASUREMENT = "Direct measurement"
    ANALOGUE_DIGITAL_CONVERTER = "Analogue-digital converter"
    DIGITAL_PROCESSING = "Digital processing"
    OTHERS = "Others"

    @classmethod
    def parse(cls, text: str) -> "CategoryId | None":
        """Tolerant parse of a category name; None when nothing matches."""
        return _CATEGORY_LOOKUP.get(_normalize_category(text))


def _normalize_category(text: str) -> str:
    return re.sub(r"[\s_/-]+", " ", text.strip().casefold())


_CATEGORY_LOOKUP: dict[str, CategoryId] = {
    _normalize_category(member.value): member for member in CategoryId
}
_CATEGORY_LOOKUP.update(
    {
        "adc": CategoryId.ANALOGUE_DIGITAL_CONVERTER,
        "analog digital converter": CategoryId.ANALOGUE_DIGITAL_CONVERTER,
        "analogue digital converter (adc)": CategoryId.ANALOGUE_DIGITAL_CONVERTER,
        "analog to digital converter": CategoryId.ANALOGUE_DIGITAL_CONVERTER,
        "analogue to digital converter": CategoryId.ANALOGUE_DIGITAL_CONVERTER,
        "other": CategoryId.OTHERS,
    }
)

_CATEGORY_TEMPLATES: dict[CategoryId, str] = {
    CategoryId.SENSOR: "category_sensor",
    CategoryId.SIGNAL_CONDITIONING: "category_signal_conditioning",
    CategoryId.AMPLIFICATION: "category_amplification",
    CategoryId.FILTERING: "category_filtering",
    CategoryId.OTHER_CONDITIONING: "category_other_conditioning",
    CategoryId.DIRECT_MEASUREMENT: "category_direct_measurement",
    CategoryId.ANALOGUE_DIGITAL_CONVERTER: "category_adc",
    CategoryId.DIGITAL_PROCESSING: "category_digital_processing",
    CategoryId.OTHERS: "category_others",
}


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    required_placeholders: frozenset[str]


def render(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute {placeholder} slots in a single pass."""
    missing = sorted(template.required_placeholders - set(bindings))
    if missing:
        raise RenderError(
            f"template {template.id!r}: missing binding for placeholder {missing[0]!r}"
        )

    def substitute(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in bindings:
            raise RenderError(
                f"template {template.id!r}: unbound placeholder {name!r}"
            )
        return bindings[name]

    return _PLACEHOLDER_RE.sub(substitute, template.body)


def format_numbered(items: Sequence[str]) -> str:
    """Stable numbered-list rendering; empty entries stay visibly empty."""
    return "\n".join(f"{i}. {item}".rstrip() for i, item in enumerate(items, start=1))


class PromptCatalog:
    """Read-only template pack plus the stage-prompt builders on top of it."""

    def __init__(self, templates: dict[str, PromptTemplate]):
        self._templates = templates

    @classmethod
    def load(cls, pack_dir: str | Path | None = None) -> "PromptCatalog":
        pack = Path(pack_dir) if pack_dir else DEFAULT_PACK_DIR
        manifest_path = pack / "manifest.json"
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise RenderError(f"cannot read template manifest: {exc}") from exc
        templates: dict[str, PromptTemplate] = {}
        for template_id, placeholders in manifest.items():
            body = (pack / f"{template_id}.txt").read_text(encoding="utf-8")
            required = frozenset(placeholders)
            for name in required:
                if f"{{{name}}}" not in body:
                    raise RenderError(
                        f"template {template_id!r}: required placeholder {name!r} "
                        "does not appear in the body"
                    )
            templates[template_id] = PromptTemplate(template_id, body, required)
        return cls(templates)

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise RenderError(f"unknown template {template_id!r}") from None

    def render(self, template_id: str, **bindings: str) -> str:
        return render(self.get(template_id), bindings)

    # Stage prompts ---------------------------------------------------------

    def persona(self) -> str:
        return self.get("persona").body

    def architecture_prompt(self, description: str) -> list[ChatMessage]:
        """Opening message pair: persona plus the architecture request."""
        if not description.strip():
            raise UsageError("project description must be nonempty")
        return [
            ChatMessage("system", self.persona()),
            ChatMessage("user", self.render("architecture", description=description)),
        ]

    def categorisation_prompt(self, block_names: Sequence[str]) -> str:
        if not block_names:
            raise UsageError("categorisation requires at least one block name")
        blocks = "\n".join(f"- {name}" for name in block_names)
        return self.render("categorisation", blocks=blocks)

    def category_prompt(self, category: CategoryId, block_name: str) -> str:
        if not block_name.strip():
            raise UsageError("block name must be nonempty")
        return self.render(_CATEGORY_TEMPLATES[category], block=block_name)

    def revision_prompt(self, details: Sequence[str]) -> str:
        if not details:
            raise UsageError("revision requires at least one block detail")
        return self.render("revision", details="\n\n".join(details))

    def answers_message(self, answers: Sequence[str], stage: str) -> str:
        template = "answers_architecture" if stage == "architectural" else "answers_detail"
        return self.render(template, answers=format_numbered(answers))

    def feedback_message(self, feedback: str) -> str:
        return self.render("revise_feedback", feedback=feedback)

    def regenerate_message(self, error: str) -> str:
        return self.render("regenerate_diagram", error=error)


@functools.lru_cache(maxsize=1)
def default_catalog() -> PromptCatalog:
    return PromptCatalog.load()
