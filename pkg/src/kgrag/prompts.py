"""Sectioned prompt format.

Every prompt sent to a generation provider is plain text of the form::

    ### task: <tag>
    ### instructions
    <free text>
    ### <section name>
    <section body>
    ...

Hosted models read it as an ordinary instruction prompt; the mock provider
parses it back to pick a template for the task tag.
"""

from __future__ import annotations

import re

_HEADER = re.compile(r"^### (\w+)(?:: (.*))?$")


def render_prompt(task: str, instructions: str, **sections: str) -> str:
    lines = [f"### task: {task}", "### instructions", instructions.strip()]
    for name, body in sections.items():
        lines.append(f"### {name}")
        # section bodies must not fake a header line
        lines.append(re.sub(r"(?m)^###", "# ##", body.rstrip("\n")))
    return "\n".join(lines) + "\n"


def parse_prompt(prompt: str) -> tuple[str | None, dict[str, str]]:
    """Return ``(task, sections)``; ``task`` is None for free-form prompts."""
    task = None
    sections: dict[str, list[str]] = {}
    current = None
    for line in prompt.splitlines():
        m = _HEADER.match(line)
        if m:
            if m.group(1) == "task" and m.group(2) is not None:
                task = m.group(2).strip()
                current = None
            else:
                current = m.group(1)
                sections[current] = []
            continue
        if current is not None:
            sections[current].append(line)
        else:
            sections.setdefault("body", []).append(line)
    return task, {k: "\n".join(v) for k, v in sections.items()}
