"""Deterministic seed derivation and content fingerprints.

Every stochastic component takes an integer seed. Sub-seeds are derived by
hashing the parent seed together with a string scope, so independent
components never share an RNG stream and runs are reproducible from a single
root seed.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

_MASK63 = (1 << 63) - 1


def derive_seed(root: int, *scope: Any) -> int:
    """Derive a stable 63-bit sub-seed from ``root`` and a scope path."""
    h = hashlib.sha256()
    h.update(str(int(root)).encode())
    for part in scope:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "big") & _MASK63


def stable_json(obj: Any) -> str:
    """Canonical JSON used for fingerprinting (sorted keys, no whitespace)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def fingerprint(obj: Any, nbytes: int = 8) -> str:
    """Hex content fingerprint of any JSON-serializable object."""
    return hashlib.sha256(stable_json(obj).encode()).hexdigest()[: 2 * nbytes]


def fingerprint_bytes(data: bytes, nbytes: int = 8) -> str:
    return hashlib.sha256(data).hexdigest()[: 2 * nbytes]


def _jsonable(obj: Any) -> Any:
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "__dict__"):
        return vars(obj)
    return str(obj)
