"""SNOEMB01 embedding file writer.

Layout (integers little-endian): magic b"SNOEMB01", dim u32, count u64,
then per record: id length u16, UTF-8 id bytes, dim float32 values.
Vectors are written raw; normalization is the consumer's job, so there
is exactly one normalization authority.
"""

from __future__ import annotations

import struct
from typing import Sequence

import numpy as np

MAGIC = b"SNOEMB01"


def write_emb(records: Sequence[tuple[str, np.ndarray]], path) -> int:
    """Write (id, vector) records; returns the vector dimension."""
    dim = None
    seen = set()
    for rid, vec in records:
        if rid in seen:
            raise ValueError(f"duplicate id {rid}")
        seen.add(rid)
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise ValueError(f"inconsistent dimension for id {rid}")
    if dim is None:
        dim = 0
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", dim, len(records)))
        for rid, vec in records:
            rid_bytes = rid.encode("utf-8")
            fh.write(struct.pack("<H", len(rid_bytes)))
            fh.write(rid_bytes)
            fh.write(np.asarray(vec, dtype="<f4").tobytes())
    return dim
