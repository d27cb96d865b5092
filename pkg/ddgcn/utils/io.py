"""Filesystem helpers: atomic writes, TSV matrices, platform info."""

import os
import platform
import sys
import tempfile
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from ddgcn.errors import DataFormatError


def platform_info() -> str:
    """Return a multi-line string describing the runtime environment."""
    nl = "\n"
    return f"""Running ddgcn\
    \nPython {sys.version.replace(nl, "")}\
    \nnumpy {np.__version__}\
    \nOS {os.name}\
    \nPlatform {platform.system()} {platform.release()}"""


def atomic_write_text(path: str | Path, data: str) -> None:
    """Write ``data`` to ``path`` through a temporary file and ``os.replace``.

    Args:
        path: Destination file; its parent directory is created if needed.
        data: Text to write, UTF-8 encoded with ``\\n`` line endings.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        mode="w",
        encoding="utf8",
        newline="\n",
        dir=path.parent,
        delete=False,
        suffix=".tmp",
    ) as tmp:
        tmp.write(data)
        tmp.flush()
        os.fsync(tmp.fileno())

    os.replace(tmp.name, path)


def read_text(path: str | Path) -> str:
    """Read a whole UTF-8 file.

    Raises:
        DataFormatError: If the bytes are not valid UTF-8.
    """
    with open(path, encoding="utf8") as file:
        try:
            return file.read()
        except UnicodeDecodeError as err:
            raise DataFormatError(f"{path} is not valid UTF-8: {err.reason}") from err


def format_real(value: float) -> str:
    """Shortest decimal that reads back to the same float64."""
    return repr(float(value))


def write_matrix_tsv(
    path: str | Path, matrix: np.ndarray, header: Sequence[str] | None = None
) -> None:
    """Write a 2-D array as tab-separated decimals, optionally with a header row."""
    lines = []
    if header is not None:
        lines.append("\t".join(header))
    for row in np.atleast_2d(matrix):
        lines.append("\t".join(format_real(val) for val in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_matrix_tsv(path: str | Path, header: bool = False) -> np.ndarray:
    """Read a tab-separated decimal matrix written by ``write_matrix_tsv``.

    Raises:
        DataFormatError: On ragged rows or non-numeric cells.
    """
    rows: list[list[float]] = []
    for lineno, line in enumerate(read_text(path).splitlines(), start=1):
        if header and lineno == 1:
            continue
        if not line.strip():
            continue
        try:
            rows.append([float(cell) for cell in line.split("\t")])
        except ValueError as err:
            raise DataFormatError(str(err), line=lineno) from err
        if len(rows[-1]) != len(rows[0]):
            raise DataFormatError(
                f"expected {len(rows[0])} columns, got {len(rows[-1])}", line=lineno
            )
    if not rows:
        raise DataFormatError(f"{path} holds no rows")
    return np.asarray(rows, dtype=np.float64)
