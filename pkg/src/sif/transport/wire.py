"""Bit-exact frame encoding.

Frame layout (all integers big-endian)::

    u32   length of everything that follows
    4s    magic b"SIF1"
    u8    message type
    16s   transaction id
    u8    scheme tag (0 = SIF field vectors, 1 = cSIF group vectors)
    ...   body

Bodies:

    CHAIN          vector gamma, coords S
    QUERY_TERM     vector Q
    RESULT         u8 (0/1)
    INSERT         scalar modulus, u64 index, scalar share
    ERROR          u16 code, u16 len, utf-8 detail
    QUERY_REQUEST  scalar modulus, scalar Z, coords S
    STATUS_REQUEST (empty)
    STATUS_REPLY   u64 count, scalar modulus, u64 x

    vector  = u32 count, then count scalars
    coords  = u16 count, then count u64
    scalar  = u64 under the SIF tag; u16 byte length + magnitude under the cSIF tag

So a SIF chain message over |D| elements and k repositories is exactly
``26 + 4 + 8*|D| + 2 + 8*k`` bytes.
"""

from __future__ import annotations

import struct

from sif.errors import DecodeError
from sif.transport.messages import (
    TXN_BYTES,
    ChainMessage,
    ErrorMessage,
    InsertMessage,
    Message,
    MsgType,
    QueryRequest,
    QueryTermMessage,
    ResultMessage,
    Scheme,
    StatusReply,
    StatusRequest,
)

MAGIC = b"SIF1"
HEADER = struct.Struct(">I4sB16sB")
HEADER_SIZE = HEADER.size  # 26
MAX_FRAME = 1 << 28
_U64_MAX = (1 << 64) - 1


def _u64_vector(values) -> bytes:
    try:
        return struct.pack(f">I{len(values)}Q", len(values), *values)
    except struct.error:
        raise ValueError("SIF vector entries must fit in 64 bits") from None


def _lp_int(v: int) -> bytes:
    if v < 0:
        raise ValueError("negative magnitude")
    raw = v.to_bytes((v.bit_length() + 7) // 8, "big")
    if len(raw) > 0xFFFF:
        raise ValueError("integer too large for wire encoding")
    return struct.pack(">H", len(raw)) + raw


def _scalar(v: int, scheme: Scheme) -> bytes:
    if scheme == Scheme.SIF:
        if not 0 <= v <= _U64_MAX:
            raise ValueError("SIF scalar must fit in 64 bits")
        return struct.pack(">Q", v)
    return _lp_int(v)


def _vector(values, scheme: Scheme) -> bytes:
    if scheme == Scheme.SIF:
        return _u64_vector(values)
    return struct.pack(">I", len(values)) + b"".join(_lp_int(v) for v in values)


def _coords(S) -> bytes:
    return struct.pack(f">H{len(S)}Q", len(S), *S)


def encode_body(msg: Message) -> bytes:
    scheme = Scheme(msg.scheme)
    if isinstance(msg, ChainMessage):
        return _vector(msg.gamma, scheme) + _coords(msg.S)
    if isinstance(msg, QueryTermMessage):
        return _vector(msg.Q, scheme)
    if isinstance(msg, ResultMessage):
        return b"\x01" if msg.result else b"\x00"
    if isinstance(msg, InsertMessage):
        return _scalar(msg.modulus, scheme) + struct.pack(">Q", msg.index) + _scalar(msg.share, scheme)
    if isinstance(msg, ErrorMessage):
        text = msg.detail.encode("utf-8")[:0xFFFF]
        return struct.pack(">HH", msg.code, len(text)) + text
    if isinstance(msg, QueryRequest):
        return _scalar(msg.modulus, scheme) + _scalar(msg.Z, scheme) + _coords(msg.S)
    if isinstance(msg, StatusRequest):
        return b""
    if isinstance(msg, StatusReply):
        return struct.pack(">Q", msg.count) + _scalar(msg.modulus, scheme) + struct.pack(">Q", msg.x)
    raise TypeError(f"cannot encode {type(msg).__name__}")


def encode(msg: Message) -> bytes:
    if len(msg.txn) != TXN_BYTES:
        raise ValueError(f"transaction id must be {TXN_BYTES} bytes")
    body = encode_body(msg)
    length = HEADER_SIZE - 4 + len(body)
    return HEADER.pack(length, MAGIC, int(msg.msg_type), msg.txn, int(msg.scheme)) + body


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes, pos: int):
        self.buf = buf
        self.pos = pos

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise DecodeError(f"truncated frame: need {n} bytes", self.pos)
        out = self.buf[self.pos:end]
        self.pos = end
        return out

    def unpack(self, fmt: str):
        s = struct.calcsize(fmt)
        if self.pos + s > len(self.buf):
            raise DecodeError(f"truncated frame: need {s} bytes", self.pos)
        out = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += s
        return out

    def lp_int(self) -> int:
        (n,) = self.unpack(">H")
        return int.from_bytes(self.take(n), "big")

    def scalar(self, scheme: Scheme) -> int:
        if scheme == Scheme.SIF:
            return self.unpack(">Q")[0]
        return self.lp_int()

    def vector(self, scheme: Scheme) -> tuple[int, ...]:
        (n,) = self.unpack(">I")
        if scheme == Scheme.SIF:
            if self.pos + 8 * n > len(self.buf):
                raise DecodeError(f"truncated vector of {n} entries", self.pos)
            return self.unpack(f">{n}Q")
        return tuple(self.lp_int() for _ in range(n))

    def coords(self) -> tuple[int, ...]:
        (n,) = self.unpack(">H")
        return self.unpack(f">{n}Q")


def decode(frame: bytes) -> Message:
    """Decode exactly one frame; trailing bytes are an error."""
    frame = bytes(frame)
    if len(frame) < HEADER_SIZE:
        raise DecodeError("frame shorter than header", len(frame))
    length, magic, mtype, txn, scheme_tag = HEADER.unpack_from(frame, 0)
    if magic != MAGIC:
        raise DecodeError(f"bad magic {magic!r}", 4)
    if length + 4 != len(frame):
        raise DecodeError(f"declared length {length} disagrees with frame size {len(frame) - 4}",
                          0 if length + 4 > len(frame) else length + 4)
    try:
        mtype = MsgType(mtype)
    except ValueError:
        raise DecodeError(f"unknown message type {mtype}", 8) from None
    try:
        scheme = Scheme(scheme_tag)
    except ValueError:
        raise DecodeError(f"unknown scheme tag {scheme_tag}", 25) from None
    r = _Reader(frame, HEADER_SIZE)
    if mtype == MsgType.CHAIN:
        gamma = r.vector(scheme)
        msg = ChainMessage(txn, gamma, r.coords(), scheme)
    elif mtype == MsgType.QUERY_TERM:
        msg = QueryTermMessage(txn, r.vector(scheme), scheme)
    elif mtype == MsgType.RESULT:
        (flag,) = r.unpack(">B")
        if flag > 1:
            raise DecodeError(f"bad result flag {flag}", r.pos - 1)
        msg = ResultMessage(txn, bool(flag), scheme)
    elif mtype == MsgType.INSERT:
        modulus = r.scalar(scheme)
        (index,) = r.unpack(">Q")
        msg = InsertMessage(txn, index, r.scalar(scheme), modulus, scheme)
    elif mtype == MsgType.ERROR:
        code, n = r.unpack(">HH")
        start = r.pos
        try:
            detail = r.take(n).decode("utf-8")
        except UnicodeDecodeError:
            raise DecodeError("error detail is not utf-8", start) from None
        msg = ErrorMessage(txn, code, detail, scheme)
    elif mtype == MsgType.QUERY_REQUEST:
        modulus = r.scalar(scheme)
        Z = r.scalar(scheme)
        msg = QueryRequest(txn, modulus, Z, r.coords(), scheme)
    elif mtype == MsgType.STATUS_REQUEST:
        msg = StatusRequest(txn, scheme)
    else:
        (count,) = r.unpack(">Q")
        modulus = r.scalar(scheme)
        (x,) = r.unpack(">Q")
        msg = StatusReply(txn, count, modulus, x, scheme)
    if r.pos != len(frame):
        raise DecodeError(f"{len(frame) - r.pos} trailing bytes", r.pos)
    return msg


def read_frame(recv_exactly) -> bytes:
    """Read one frame using ``recv_exactly(n) -> bytes`` (must return n bytes or raise)."""
    head = recv_exactly(4)
    (length,) = struct.unpack(">I", head)
    if length > MAX_FRAME:
        raise DecodeError(f"frame length {length} exceeds limit", 0)
    return head + recv_exactly(length)
