"""Versioned binary checkpoints shared by the reward model and the agent."""

from __future__ import annotations

import json

import numpy as np

from .errors import ContractError

CHECKPOINT_VERSION = 1


def save_checkpoint(path, kind, meta, arrays):
    """Write a single .npz file: format version, a kind tag, a JSON metadata
    blob, and named float arrays."""
    np.savez_compressed(
        path,
        __version__=np.int64(CHECKPOINT_VERSION),
        __kind__=np.str_(kind),
        __meta__=np.str_(json.dumps(meta)),
        **arrays,
    )


def load_checkpoint(path, expect_kind=None):
    with np.load(path) as z:
        version = int(z["__version__"])
        if version != CHECKPOINT_VERSION:
            raise ContractError(f"checkpoint version {version} unsupported")
        kind = str(z["__kind__"])
        if expect_kind is not None and kind != expect_kind:
            raise ContractError(f"expected {expect_kind!r} checkpoint, found {kind!r}")
        meta = json.loads(str(z["__meta__"]))
        arrays = {k: z[k].copy() for k in z.files if not k.startswith("__")}
    return kind, meta, arrays
