"""
File helpers for reports, CSV tables and JSON summaries.

Every writer emits ``\\n`` newlines and UTF-8 so repeated runs produce
byte-identical files. Write failures surface as
:class:`~ewsn_retrieval.errors.OutputError`, which the command line maps to
its I/O exit code.
"""

import json
from pathlib import Path
from typing import Any, Union

import pandas as pd

from ewsn_retrieval.errors import OutputError

PathLike = Union[str, Path]


def read_text(filepath: PathLike) -> str:
    return Path(filepath).read_text(encoding="utf-8")


def ensure_parent_dir(filepath: PathLike) -> Path:
    """
    Create the parent directory of ``filepath`` if needed.

    Raises:
        OutputError: when the directory cannot be created, e.g. a regular
            file already sits on the path
    """
    parent = Path(filepath).parent
    try:
        parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f"cannot create directory '{parent}': {e}") from e
    return parent


def write_text(filepath: PathLike, content: str) -> Path:
    """Write ``content`` to ``filepath``, creating parent directories; returns the path."""
    path = Path(filepath)
    ensure_parent_dir(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
    except OSError as e:
        raise OutputError(f"cannot write '{path}': {e}") from e
    return path


def frame_to_csv(frame: pd.DataFrame, float_format: str) -> str:
    """
    Render a table as comma-separated text with a header row.

    No index column is written, ``float_format`` fixes the significant digits
    and missing values become empty fields.
    """
    return frame.to_csv(index=False, float_format=float_format, lineterminator="\n", na_rep="")


def read_json(filepath: PathLike) -> Any:
    return json.loads(read_text(filepath))


def write_json(filepath: PathLike, data: Any) -> Path:
    """Write ``data`` as indented JSON with sorted keys and a trailing newline."""
    content = json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True)
    return write_text(filepath, content + "\n")
