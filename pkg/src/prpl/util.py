"""Small shared helpers."""

from __future__ import annotations

import json


def canonical_dumps(obj) -> str:
    """Stable JSON encoding used for every machine-readable artifact.

    Key order follows construction order, floats use repr round-tripping,
    and non-finite numbers are refused, so identical values always produce
    identical bytes.
    """
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"
