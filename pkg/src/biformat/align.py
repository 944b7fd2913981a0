"""Byte-aligned fast target type and the bit/byte equivalence contract.

The fast interpreters run over a fixed-capacity byte buffer with a
bit-granular cursor (a generalization of a next-byte index, so sub-byte
fields run on the fast path too).  Encoders report absence exactly at the
first write that would exceed capacity — the buffer must be treated as
garbage after a failed encode.  Decoders never mutate the buffer.

`equivalence_check` is the executable contract tying the fast interpreters
to the reference bit-level ones: same emitted bits, same decoded values and
consumed bit counts, and agreement on every failure — including overflow.
"""

from __future__ import annotations

from typing import Any, Iterable, List, NamedTuple, Optional, Tuple

from .bitqueue import BitString, from_bytes
from .errors import (
    DecodeError,
    EncodeError,
    CodecError,
    REASON_OVERFLOW,
    REASON_SHORT_INPUT,
)

__all__ = [
    "ByteBuffer",
    "BitCursor",
    "set_current_byte",
    "get_current_byte",
    "write_bits",
    "read_bits",
    "equivalence_check",
    "EquivalenceReport",
    "Divergence",
]


class BitCursor(NamedTuple):
    """Position inside a ByteBuffer: next byte index plus 0-7 bit offset."""

    byte_index: int
    bit_offset: int = 0

    @property
    def bits(self) -> int:
        return (self.byte_index << 3) | self.bit_offset

    @classmethod
    def at_bit(cls, bit: int) -> "BitCursor":
        return cls(bit >> 3, bit & 7)


class ByteBuffer:
    """Fixed-capacity byte array; capacity is set at creation and never grows."""

    __slots__ = ("data",)

    def __init__(self, capacity: int):
        self.data = bytearray(capacity)

    @classmethod
    def wrap(cls, data: bytes) -> "ByteBuffer":
        buf = cls.__new__(cls)
        buf.data = bytearray(data)
        return buf

    @property
    def capacity(self) -> int:
        return len(self.data)

    def __bytes__(self) -> bytes:
        return bytes(self.data)


# ----------------------------------------------------------------------
# Raw span helpers shared by every fast interpreter.  These assume the
# caller has already bounds-checked; the public ops below add the checks.
# ----------------------------------------------------------------------

def _read_span(buf, bit: int, n: int) -> int:
    """Read n bits MSB-first starting at absolute bit position."""
    if n == 0:
        return 0
    first = bit >> 3
    off = bit & 7
    if off == 0 and n & 7 == 0:
        return int.from_bytes(buf[first : first + (n >> 3)], "big")
    last = (bit + n + 7) >> 3
    chunk = int.from_bytes(buf[first:last], "big")
    return (chunk >> (((last - first) << 3) - off - n)) & ((1 << n) - 1)


def _write_span(buf, bit: int, value: int, n: int) -> None:
    """Write n bits MSB-first at absolute bit position (read-modify-write)."""
    if n == 0:
        return
    first = bit >> 3
    off = bit & 7
    if off == 0 and n & 7 == 0:
        buf[first : first + (n >> 3)] = value.to_bytes(n >> 3, "big")
        return
    last = (bit + n + 7) >> 3
    span_bits = (last - first) << 3
    shift = span_bits - off - n
    mask = ((1 << n) - 1) << shift
    chunk = int.from_bytes(buf[first:last], "big")
    chunk = (chunk & ~mask) | ((value << shift) & mask)
    buf[first:last] = chunk.to_bytes(last - first, "big")


# ----------------------------------------------------------------------
# Public byte/bit cursor operations.
# ----------------------------------------------------------------------

def set_current_byte(buffer: ByteBuffer, cursor: BitCursor, b: int) -> BitCursor:
    """Write one byte at the cursor and advance a byte; cursor must be
    byte-aligned.  Raises EncodeError(overflow) when the buffer is full."""
    if cursor.bit_offset:
        raise ValueError("set_current_byte requires a byte-aligned cursor")
    if cursor.byte_index >= len(buffer.data):
        raise EncodeError(REASON_OVERFLOW, cursor.bits, "buffer full")
    buffer.data[cursor.byte_index] = b & 0xFF
    return BitCursor(cursor.byte_index + 1, 0)


def get_current_byte(buffer: ByteBuffer, cursor: BitCursor) -> Tuple[int, BitCursor]:
    """Read one byte at the cursor and advance; cursor must be byte-aligned.
    Raises DecodeError(short-input) at the end of the buffer."""
    if cursor.bit_offset:
        raise ValueError("get_current_byte requires a byte-aligned cursor")
    if cursor.byte_index >= len(buffer.data):
        raise DecodeError(REASON_SHORT_INPUT, len(buffer.data) << 3, "end of buffer")
    return buffer.data[cursor.byte_index], BitCursor(cursor.byte_index + 1, 0)


def write_bits(buffer: ByteBuffer, cursor: BitCursor, v: int, n: int) -> BitCursor:
    """Write the low n bits of v MSB-first at the cursor (any alignment)."""
    if n < 0 or (n and (v < 0 or v >> n)):
        raise ValueError("value does not fit in %d bits" % n)
    bit = cursor.bits
    if bit + n > len(buffer.data) << 3:
        raise EncodeError(REASON_OVERFLOW, len(buffer.data) << 3, "write past capacity")
    _write_span(buffer.data, bit, v, n)
    return BitCursor.at_bit(bit + n)


def read_bits(buffer: ByteBuffer, cursor: BitCursor, n: int) -> Tuple[int, BitCursor]:
    """Read n bits MSB-first from the cursor (any alignment)."""
    if n < 0:
        raise ValueError("negative width")
    bit = cursor.bits
    if bit + n > len(buffer.data) << 3:
        raise DecodeError(REASON_SHORT_INPUT, len(buffer.data) << 3, "read past end")
    return _read_span(buffer.data, bit, n), BitCursor.at_bit(bit + n)


# ----------------------------------------------------------------------
# Differential equivalence harness.
# ----------------------------------------------------------------------

class Divergence(NamedTuple):
    side: str        # "encode" or "decode"
    clause: str      # "same-prefix" | "overflow" | "failure-agreement" | "same-value" | "same-consumed"
    sample: Any      # the source value or input buffer
    detail: str


class EquivalenceReport:
    """Outcome of a differential run; falsy when any divergence was found."""

    def __init__(self) -> None:
        self.encode_checked = 0
        self.decode_checked = 0
        self.divergences: List[Divergence] = []

    @property
    def ok(self) -> bool:
        return not self.divergences

    def __bool__(self) -> bool:
        return self.ok

    def add(self, side: str, clause: str, sample: Any, detail: str) -> None:
        self.divergences.append(Divergence(side, clause, sample, detail))

    def __repr__(self) -> str:
        status = "ok" if self.ok else "%d divergences" % len(self.divergences)
        return "<EquivalenceReport %s (enc %d, dec %d)%s>" % (
            status,
            self.encode_checked,
            self.decode_checked,
            ("; first: %s" % (self.divergences[0],)) if self.divergences else "",
        )


def _try(fn, *args):
    try:
        return fn(*args), None
    except CodecError as err:
        return None, err


def equivalence_check(
    format,  # duck-typed Format: needs enc_bits/dec_bits/enc_fast/dec_fast
    sources: Iterable[Any] = (),
    buffers: Iterable[bytes] = (),
    ctx: Any = None,
    capacity: Optional[int] = None,
) -> EquivalenceReport:
    """Differentially test the fast interpreters against the reference ones.

    Encode clauses per source: (1) on success both paths produce the same
    leading bit sequence; (2) when the reference encoding does not fit the
    buffer, the fast encoder reports absence (overflow); (3) whenever the
    reference encoder fails, the fast encoder fails.  Decode clauses per
    buffer: same value and same number of consumed bits on success; failure
    agreement otherwise.  Findings are collected, not raised.
    """
    report = EquivalenceReport()

    for s in sources:
        report.encode_checked += 1
        ref, ref_err = _try(format.enc_bits, s, ctx)
        if ref is None:
            # clause 3: reference absent -> fast must be absent too
            cap = capacity if capacity is not None else 4096
            fast, fast_err = _try(format.enc_fast, s, bytearray(cap), 0, ctx)
            if fast is not None:
                report.add("encode", "failure-agreement", s,
                           "reference failed (%s) but fast path succeeded" % ref_err)
            continue
        t = ref[0]
        nbytes = (t.length_bits + 7) // 8
        caps = [capacity] if capacity is not None else [nbytes, max(nbytes - 1, 0)]
        for cap in caps:
            buf = bytearray(cap)
            fast, fast_err = _try(format.enc_fast, s, buf, 0, ctx)
            if t.length_bits > cap << 3:
                # clause 2: must overflow
                if fast is not None:
                    report.add("encode", "overflow", s,
                               "needs %d bits, capacity %d, fast path did not fail"
                               % (t.length_bits, cap << 3))
                continue
            if fast is None:
                report.add("encode", "failure-agreement", s,
                           "reference succeeded but fast path failed: %s" % fast_err)
                continue
            end_bit = fast[0]
            got = BitString(_read_span(buf, 0, end_bit), end_bit) if end_bit else BitString(0, 0)
            if got != t:
                report.add("encode", "same-prefix", s,
                           "reference %r != fast %r" % (t, got))

    for data in buffers:
        report.decode_checked += 1
        ref, ref_err = _try(format.dec_bits, from_bytes(data), ctx)
        fast, fast_err = _try(format.dec_fast, data, 0, ctx)
        if (ref is None) != (fast is None):
            report.add("decode", "failure-agreement", bytes(data),
                       "reference %s, fast %s"
                       % (ref_err or "succeeded", fast_err or "succeeded"))
            continue
        if ref is None:
            continue
        v_ref, rest, _ = ref
        v_fast, end_bit, _ = fast
        if v_ref != v_fast:
            report.add("decode", "same-value", bytes(data),
                       "reference %r != fast %r" % (v_ref, v_fast))
        consumed_ref = (len(data) << 3) - rest.length_bits
        if consumed_ref != end_bit:
            report.add("decode", "same-consumed", bytes(data),
                       "reference consumed %d bits, fast %d" % (consumed_ref, end_bit))

    return report
