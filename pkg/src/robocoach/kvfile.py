"""Line-oriented ``key = value`` text format with ``[section]`` headers.

Shared by the activity catalog, the phrase pool files and session
configuration files.  Parsing is total: any input either produces a
document or raises :class:`KvParseError` carrying a 1-based line and
column.  Comments start with ``#`` and must occupy their own line, so
values are free to contain any printable text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_.:-]+)\]\s*$")
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class KvParseError(Exception):
    """Syntax error with a source location."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass
class Record:
    key: str
    value: str
    line: int


@dataclass
class Section:
    name: str
    line: int
    records: list[Record] = field(default_factory=list)

    def get(self, key: str) -> str | None:
        for rec in self.records:
            if rec.key == key:
                return rec.value
        return None

    def line_of(self, key: str) -> int:
        for rec in self.records:
            if rec.key == key:
                return rec.line
        return self.line


@dataclass
class Document:
    header: Section                # records before the first section header
    sections: list[Section]


def parse(text: str) -> Document:
    """Parse ``text`` into a document, raising KvParseError on bad syntax."""
    header = Section(name="", line=0)
    sections: list[Section] = []
    current = header
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            m = _SECTION_RE.match(line)
            if m is None:
                raise KvParseError(
                    "malformed section header", lineno, raw.index("[") + 1
                )
            current = Section(name=m.group(1), line=lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise KvParseError("expected 'key = value'", lineno, len(raw) - len(raw.lstrip()) + 1)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not _KEY_RE.match(key):
            raise KvParseError(f"invalid key {key!r}", lineno, raw.index("=") if key else 1)
        if not value:
            raise KvParseError(f"missing value for {key!r}", lineno, raw.index("=") + 2)
        if current.get(key) is not None:
            raise KvParseError(f"duplicate key {key!r}", lineno)
        current.records.append(Record(key=key, value=value, line=lineno))
    return Document(header=header, sections=sections)


def render_pairs(pairs: list[tuple[str, str]]) -> list[str]:
    return [f"{key} = {value}" for key, value in pairs]


def render_section(name: str, pairs: list[tuple[str, str]]) -> list[str]:
    return [f"[{name}]"] + render_pairs(pairs)
