"""Prompt templates shipped as text assets under ``seesaw/templates/``.

Placeholders look like ``{MAIN_PATH}``. Substitution is a single pass, so
braces inside inserted code are left alone.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

_PLACEHOLDER = re.compile(r"\{([A-Z_]+)\}")


@lru_cache(maxsize=None)
def template(name: str) -> str:
    return resources.files("seesaw").joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")


def fill(text: str, **values: str) -> str:
    def sub(m: re.Match) -> str:
        key = m.group(1)
        return values[key] if key in values else m.group(0)

    return _PLACEHOLDER.sub(sub, text)


def render(name: str, **values: str) -> str:
    return fill(template(name), **values)


def system_text() -> str:
    return template("system").strip()


def files_block(units, empty: str = "(none)") -> str:
    """Format ``(path, content)`` pairs as fenced sections."""
    parts = [f"--- {path} ---\n```\n{content}\n```" for path, content in units]
    return "\n".join(parts) if parts else empty
