"""Canonical JSON encoding used for timelines, digests, and the wire API.

Sorted keys and compact separators make the encoding byte-stable across
runs, which is what replay determinism and the golden files rely on.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def canonical_line(obj: Any) -> bytes:
    return (canonical_json(obj) + "\n").encode("utf-8")


def digest(obj: Any, length: int = 16) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:length]
