"""Flat binary persistence of one repository.

Layout (big-endian)::

    4s    magic b"SIFR"
    u16   format version (1)
    u16   L = byte length of the field modulus
    L     field modulus
    u32   repo_id
    u64   x (the repository's coordinate)
    u32   N
    u32   k
    ...   shares, W = max(8, L) bytes each, in row order

With the default 33-bit modulus every share is 8 bytes. The share count is
implied by the file length.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Sequence

from sif.archive import RepositoryState, ShareVector
from sif.errors import DecodeError
from sif.field import FieldElement, FieldParams
from sif.shamir import SharingPolicy

MAGIC = b"SIFR"
VERSION = 1
_TAIL = struct.Struct(">IQII")


def dumps(repo: RepositoryState) -> bytes:
    p = repo.modulus
    mod_bytes = p.to_bytes((p.bit_length() + 7) // 8, "big")
    width = max(8, len(mod_bytes))
    head = MAGIC + struct.pack(">HH", VERSION, len(mod_bytes)) + mod_bytes + _TAIL.pack(
        repo.repo_id, repo.coordinate, repo.policy.n, repo.policy.k
    )
    if width == 8:
        body = struct.pack(f">{len(repo.shares)}Q", *repo.shares.entries)
    else:
        body = b"".join(s.to_bytes(width, "big") for s in repo.shares.entries)
    return head + body


def loads(data: bytes, x_coords: Sequence[int] | None = None, **state_kwargs) -> RepositoryState:
    """Rebuild a repository. ``x_coords`` is needed only for non-default coordinates."""
    if data[:4] != MAGIC:
        raise DecodeError("not a repository state file", 0)
    if len(data) < 8:
        raise DecodeError("truncated header", len(data))
    version, mlen = struct.unpack_from(">HH", data, 4)
    if version != VERSION:
        raise DecodeError(f"unsupported state file version {version}", 4)
    pos = 8 + mlen
    if len(data) < pos + _TAIL.size:
        raise DecodeError("truncated header", len(data))
    modulus = int.from_bytes(data[8:pos], "big")
    repo_id, x, n, k = _TAIL.unpack_from(data, pos)
    pos += _TAIL.size
    width = max(8, mlen)
    body = data[pos:]
    if len(body) % width:
        raise DecodeError(f"share section is not a multiple of {width} bytes", pos)
    count = len(body) // width
    if width == 8:
        shares = struct.unpack(f">{count}Q", body)
    else:
        shares = [int.from_bytes(body[i:i + width], "big") for i in range(0, len(body), width)]
    field = FieldParams(modulus)
    policy = SharingPolicy(n, k, field, tuple(x_coords) if x_coords else ())
    return RepositoryState(
        repo_id=repo_id,
        x=FieldElement(x, field),
        shares=ShareVector(field, shares),
        policy=policy,
        **state_kwargs,
    )


def save(repo: RepositoryState, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(repo))
    os.replace(tmp, path)


def load(path: str | Path, x_coords: Sequence[int] | None = None, **state_kwargs) -> RepositoryState:
    return loads(Path(path).read_bytes(), x_coords, **state_kwargs)
