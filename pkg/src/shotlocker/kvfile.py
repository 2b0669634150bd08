"""Reader for the plain ``key = value`` text files used by dataset manifests,
prompt templates, and experiment configs.

Lines are ``key = value``; ``#`` starts a comment line; blank lines are
skipped. Values are stripped, so fields that need leading/trailing
whitespace or newlines (template separators, for instance) use the escape
sequences ``\\n``, ``\\t``, and ``\\\\``, expanded by :func:`unescape`.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ParseError

_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\"}


def read_kv(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    p = Path(path)
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", path=p, line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ParseError("empty key", path=p, line=lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", path=p, line=lineno)
        out[key] = value.strip()
    return out


def unescape(value: str) -> str:
    """Expand ``\\n``, ``\\t``, and ``\\\\`` sequences."""
    out: list[str] = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value) and value[i + 1] in _ESCAPES:
            out.append(_ESCAPES[value[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def parse_bool(value: str, *, key: str = "") -> bool:
    low = value.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ParseError(f"cannot read {value!r} as a boolean for key {key!r}")


def parse_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]
