from __future__ import annotations

import re

_FENCE_OPEN = re.compile(r"^\s*(`{3,}|~{3,})[^\n]*$")


def strip_fence(text: str) -> str:
    """Return the body of the first fenced code block in ``text``.

    Text without a fence is returned unchanged. An unterminated fence runs
    to the end of the text.
    """
    lines = text.splitlines()
    for i, line in enumerate(lines):
        m = _FENCE_OPEN.match(line)
        if not m:
            continue
        marker = m.group(1)
        closing = re.compile(re.escape(marker[0]) + "{%d,}" % len(marker))
        body = []
        for inner in lines[i + 1:]:
            if closing.fullmatch(inner.strip()):
                break
            body.append(inner)
        return "\n".join(body)
    return text


def first_fenced_block(text: str) -> str | None:
    """Like :func:`strip_fence` but ``None`` when there is no fence."""
    if not any(_FENCE_OPEN.match(line) for line in text.splitlines()):
        return None
    return strip_fence(text)
