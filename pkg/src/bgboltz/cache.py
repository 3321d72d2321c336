"""Content-addressed on-disk cache for assembled matrices.

Each entry is a ``.npz`` container holding the arrays plus a JSON header
with the hashed payload, a format version and creation metadata.  The
location defaults to ``~/.cache/bgboltz`` and can be moved with the
``BGBOLTZ_CACHE`` environment variable.
"""
from __future__ import annotations

import json
import os
import time
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def cache_dir():
    root = os.environ.get("BGBOLTZ_CACHE") or os.path.join(Path.home(), ".cache", "bgboltz")
    p = Path(root)
    p.mkdir(parents=True, exist_ok=True)
    return p


def load(key):
    path = cache_dir() / f"{key}.npz"
    if not path.exists():
        return None
    try:
        with np.load(path, allow_pickle=False) as z:
            header = json.loads(str(z["__header__"]))
            if header.get("format") != FORMAT_VERSION:
                return None
            return {k: z[k] for k in z.files if k != "__header__"}
    except (OSError, ValueError, KeyError):
        return None


def save(key, arrays, payload):
    header = {"format": FORMAT_VERSION, "payload": payload, "created": time.time()}
    path = cache_dir() / f"{key}.npz"
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, __header__=json.dumps(header, sort_keys=True), **arrays)
    os.replace(tmp, path)
