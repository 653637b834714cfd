from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Union


def ensure_dir(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)


def _atomic_write(path: Path, content: Union[str, bytes]) -> None:
    ensure_dir(path.parent)
    fd, tmp_path = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        if isinstance(content, bytes):
            with os.fdopen(fd, "wb") as f:
                f.write(content)
        else:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(content)
        os.replace(tmp_path, path)
    finally:
        try:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)
        except OSError:
            pass


def atomic_write_text(path: Path, content: str) -> None:
    _atomic_write(path, content)


def atomic_write_bytes(path: Path, content: bytes) -> None:
    """Images and ROM dumps are replaced whole, never left half written."""
    _atomic_write(path, content)
