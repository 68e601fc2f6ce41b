"""YAML loading that remembers where every key came from.

Parse errors and validation errors raised through :class:`ConfigError` name
the file, the dotted key and the line it was defined on.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    def __init__(self, message: str, path=None, key: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = str(path)
            if line is not None:
                where += f":{line}"
            where += ": "
        if key:
            message = f"{key}: {message}"
        super().__init__(where + message)
        self.path = path
        self.key = key
        self.line = line


def _walk(node, prefix: str, out: dict[str, int]) -> None:
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[key] = k.start_mark.line + 1
            _walk(v, key, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            key = f"{prefix}[{i}]"
            out[key] = v.start_mark.line + 1
            _walk(v, key, out)


class ConfigDoc:
    """A parsed YAML document plus a key-path to line-number index."""

    def __init__(self, data: Any, lines: dict[str, int], path=None):
        self.data = data
        self.lines = lines
        self.path = path

    @classmethod
    def from_text(cls, text: str, path=None) -> "ConfigDoc":
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            raise ConfigError(f"invalid YAML ({getattr(exc, 'problem', exc)})", path, line=line) from None
        lines: dict[str, int] = {}
        if node is not None:
            _walk(node, "", lines)
        return cls(data if data is not None else {}, lines, path)

    @classmethod
    def load(cls, path: str | Path) -> "ConfigDoc":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config ({exc.strerror})", path) from None
        return cls.from_text(text, path)

    def error(self, key: str, message: str) -> ConfigError:
        line = self.lines.get(key)
        # fall back to the closest enclosing key that has a line
        probe = key
        while line is None and "." in probe:
            probe = probe.rsplit(".", 1)[0]
            line = self.lines.get(probe)
        return ConfigError(message, self.path, key, line)
