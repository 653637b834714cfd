from __future__ import annotations

from typing import Any, Iterable

import yaml


class HexWord(int):
    """An int that YAML output shows in hexadecimal (register and port values)."""


class _ReportDumper(yaml.SafeDumper):
    pass


def _represent_hex_word(dumper: yaml.SafeDumper, value: HexWord) -> yaml.ScalarNode:
    return dumper.represent_scalar("tag:yaml.org,2002:int", f"0x{int(value):X}")


_ReportDumper.add_representer(HexWord, _represent_hex_word)


def render_yaml_with_header(
    payload: Any,
    header_lines: Iterable[str],
) -> str:
    lines = [line.strip() for line in header_lines if line and line.strip()]
    header = "".join(f"# {line}\n" for line in lines)
    body = yaml.dump(payload, Dumper=_ReportDumper, sort_keys=False, allow_unicode=True, default_flow_style=False)
    if not header:
        return body
    return f"{header}\n{body}"
