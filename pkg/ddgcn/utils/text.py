"""Small text formats: ``key=value`` headers and ``;``-joined label lists."""

from collections.abc import Iterable, Mapping

from ddgcn.errors import DataFormatError


def format_header(fields: Mapping[str, object]) -> str:
    """Render ``{"C": 3, "source": "random"}`` as ``C=3 source=random``."""
    return " ".join(f"{key}={val}" for key, val in fields.items())


def parse_header(line: str, required: Iterable[str] = ()) -> dict[str, str]:
    """Parse a whitespace separated ``key=value`` header line.

    Raises:
        DataFormatError: If a token lacks ``=`` or a required key is missing.
    """
    fields: dict[str, str] = {}
    for token in line.split():
        key, sep, val = token.partition("=")
        if not sep or not key:
            raise DataFormatError(f"bad header token {token!r}", line=1)
        fields[key] = val
    missing = [key for key in required if key not in fields]
    if missing:
        raise DataFormatError(f"header is missing {', '.join(missing)}", line=1)
    return fields


def join_labels(labels: Iterable[str]) -> str:
    return ";".join(labels)


def split_labels(text: str) -> list[str]:
    return [item.strip() for item in text.split(";") if item.strip()]
