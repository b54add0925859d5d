"""Reader/writer for the structured key-value scenario format.

The format has `[section]` tables (at most one each), `[[section]]` repeated
tables, and `key = value` lines with numbers, quoted strings, booleans and
flat lists.  `#` starts a comment.  See docs/formats.md for the schema.
"""

from __future__ import annotations

__all__ = ["ParseError", "parse_document", "format_document"]


class ParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _strip_comment(line: str) -> str:
    out, in_str = [], False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out).strip()


def _parse_scalar(tok: str, line_no: int):
    tok = tok.strip()
    if not tok:
        raise ParseError(line_no, "empty value")
    if tok.startswith('"'):
        if not tok.endswith('"') or len(tok) < 2:
            raise ParseError(line_no, f"unterminated string {tok!r}")
        return tok[1:-1]
    if tok in ("true", "false"):
        return tok == "true"
    try:
        if any(c in tok for c in ".eE") and not tok.lstrip("+-").isdigit():
            return float(tok)
        return int(tok)
    except ValueError:
        try:
            return float(tok)
        except ValueError:
            raise ParseError(line_no, f"cannot parse value {tok!r}") from None


def _parse_value(text: str, line_no: int):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ParseError(line_no, "unterminated list")
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(tok, line_no) for tok in inner.split(",")]
    return _parse_scalar(text, line_no)


def parse_document(text: str) -> dict:
    """Parse into {section: dict} for single tables and {section: [dict, ...]}
    for repeated `[[section]]` tables."""
    doc: dict = {}
    current: dict | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("[["):
            if not line.endswith("]]"):
                raise ParseError(line_no, f"malformed section header {line!r}")
            name = line[2:-2].strip()
            if not name:
                raise ParseError(line_no, "empty section name")
            doc.setdefault(name, [])
            if not isinstance(doc[name], list):
                raise ParseError(line_no, f"section {name!r} used both as table and list")
            current = {}
            doc[name].append(current)
        elif line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(line_no, f"malformed section header {line!r}")
            name = line[1:-1].strip()
            if not name:
                raise ParseError(line_no, "empty section name")
            if name in doc:
                raise ParseError(line_no, f"duplicate section {name!r}")
            current = {}
            doc[name] = current
        else:
            if "=" not in line:
                raise ParseError(line_no, f"expected key = value, got {line!r}")
            if current is None:
                raise ParseError(line_no, "key outside of any section")
            key, _, value = line.partition("=")
            key = key.strip()
            if not key:
                raise ParseError(line_no, "empty key")
            if key in current:
                raise ParseError(line_no, f"duplicate key {key!r}")
            current[key] = _parse_value(value, line_no)
    return doc


def _format_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _format_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_format_scalar(x) for x in v) + "]"
    return _format_scalar(v)


def format_document(doc: dict) -> str:
    """Serialize; parse_document(format_document(d)) == d for valid docs."""
    lines = []
    for name, content in doc.items():
        if isinstance(content, list):
            for entry in content:
                lines.append(f"[[{name}]]")
                for k, v in entry.items():
                    lines.append(f"{k} = {_format_value(v)}")
                lines.append("")
        else:
            lines.append(f"[{name}]")
            for k, v in content.items():
                lines.append(f"{k} = {_format_value(v)}")
            lines.append("")
    return "\n".join(lines)
