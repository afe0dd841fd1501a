"""Atomic file writing: write to a temp file in place, then rename.

No command or library call in hopjam leaves a partial output behind on
failure; consumers either see the previous contents or the complete new
file.
"""

from __future__ import annotations

import os


def atomic_write_bytes(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
