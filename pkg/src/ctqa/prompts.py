"""Prompt template assets and rendering.

Templates are plain UTF-8 files with ``{{placeholder}}`` slots, shipped with
the package; a configured directory can override them wholesale. Rendering is
a single left-to-right pass, so placeholder-like text inside substituted
values is never re-expanded (user questions cannot inject slots).
"""
from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

TEMPLATE_NAMES = (
    "task_classification",
    "query_rewriting",
    "answer_generation",
    "report_generation",
)

_SLOT = re.compile(r"\{\{([a-zA-Z_][a-zA-Z0-9_ ]*)\}\}")


def load_template(name: str, template_dir: str | Path | None = None) -> str:
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown template {name!r}; have {TEMPLATE_NAMES}")
    if template_dir is not None:
        return (Path(template_dir) / f"{name}.txt").read_text(encoding="utf-8")
    return (resources.files("ctqa.templates") / f"{name}.txt").read_text(encoding="utf-8")


def render(template: str, values: dict[str, str]) -> str:
    """Fill ``{{key}}`` slots from ``values``; unknown slots stay verbatim."""

    def _sub(match: re.Match) -> str:
        key = match.group(1)
        return str(values[key]) if key in values else match.group(0)

    return _SLOT.sub(_sub, template)
