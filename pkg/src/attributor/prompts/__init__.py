"""Prompt templates, stored as plain-text assets next to this module.

Each template keeps the original prompt wording untouched; only the
``{name}`` slots are filled in at render time.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

TEMPLATE_VERSION = "1"

SLOTS: dict[str, tuple[str, ...]] = {
    "factscore": ("sentence",),
    "checkworthiness": ("input",),
    "nli": ("question", "claim", "document"),
    "independence": ("claim",),
    "enrichment": ("question", "answer", "claim"),
    "direct_segmentation": ("question", "answer"),
}

_SLOT = re.compile(r"\{(\w+)\}")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    if name not in SLOTS:
        raise KeyError(f"unknown prompt template {name!r}")
    text = resources.files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return text.rstrip("\n")


def render(name: str, **values: str) -> str:
    expected = set(SLOTS[name])
    if set(values) != expected:
        raise KeyError(f"template {name!r} takes slots {sorted(expected)}, got {sorted(values)}")
    # single pass, so slotted text containing "{claim}" etc. is left alone
    return _SLOT.sub(
        lambda m: values[m.group(1)] if m.group(1) in expected else m.group(0),
        load_template(name),
    )


def identify(prompt: str) -> str | None:
    """Return the name of the template a rendered prompt came from, if any."""
    for name in SLOTS:
        head = load_template(name).split("{", 1)[0]
        if prompt.startswith(head):
            return name
    return None


@lru_cache(maxsize=None)
def _parser(name: str) -> re.Pattern[str]:
    parts = _SLOT.split(load_template(name))
    # split() alternates literal text and slot names
    pattern = "".join(
        re.escape(p) if i % 2 == 0 else f"(?P<{p}>.*?)" for i, p in enumerate(parts)
    )
    return re.compile(rf"\A{pattern}\Z", re.S)


def parse(name: str, prompt: str) -> dict[str, str] | None:
    """Inverse of ``render``: recover slot values from a rendered prompt."""
    m = _parser(name).match(prompt)
    return m.groupdict() if m else None
