"""Reference bit-level target type: an immutable queue of bits.

This is the slow, obviously-correct target that the reference interpreters
and the relational oracle work over.  It is a monoid (``empty``/``append``)
with single-bit enqueue (``snoc``) at the back and dequeue (``unfold``) at
the front.  Bit order is MSB-first within a byte and big-endian across bytes
(network bit order); ``from_bytes``/``to_bytes`` are the only boundary with
byte-oriented code.

Representation: a Python int holding the bits (first bit written = most
significant) plus an explicit length, so equality is structural and all
operations return fresh values.  Performance is deliberately not a goal here;
the byte-aligned path in :mod:`biformat.align` is the fast one.
"""

from __future__ import annotations

from typing import Optional, Tuple

__all__ = [
    "Bit",
    "BitString",
    "empty",
    "append",
    "snoc",
    "unfold",
    "from_bytes",
    "to_bytes",
    "bits",
]

#: A bit is the int 0 or 1.
Bit = int


class BitString:
    """An immutable sequence of bits; front = first bit written."""

    __slots__ = ("_value", "length_bits")

    def __init__(self, value: int, length_bits: int):
        if length_bits < 0 or value < 0 or value >> length_bits:
            raise ValueError("value does not fit in length_bits")
        self._value = value
        self.length_bits = length_bits

    # -- structural equality / hashing (used by the oracle's sample sets) --

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, BitString)
            and self.length_bits == other.length_bits
            and self._value == other._value
        )

    def __hash__(self) -> int:
        return hash((self.length_bits, self._value))

    def __len__(self) -> int:
        return self.length_bits

    def to01(self) -> str:
        return format(self._value, "0%db" % self.length_bits) if self.length_bits else ""

    def __repr__(self) -> str:
        if self.length_bits <= 64:
            return "bits(%r)" % self.to01()
        return "<BitString of %d bits>" % self.length_bits


_EMPTY = BitString(0, 0)


def empty() -> BitString:
    """The zero-length bitstring; identity for :func:`append`."""
    return _EMPTY


def append(a: BitString, b: BitString) -> BitString:
    """Concatenation: all of ``a``'s bits, then all of ``b``'s."""
    if not a.length_bits:
        return b
    if not b.length_bits:
        return a
    return BitString((a._value << b.length_bits) | b._value, a.length_bits + b.length_bits)


def snoc(bs: BitString, b: Bit) -> BitString:
    """Append one bit at the back."""
    if b not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    return BitString((bs._value << 1) | b, bs.length_bits + 1)


def unfold(bs: BitString) -> Optional[Tuple[Bit, BitString]]:
    """Pop the front bit, or None when empty."""
    n = bs.length_bits
    if not n:
        return None
    front = bs._value >> (n - 1)
    return front, BitString(bs._value - (front << (n - 1)), n - 1)


def from_bytes(data: bytes) -> BitString:
    """Enqueue each byte MSB-first, bytes in sequence order."""
    return BitString(int.from_bytes(data, "big"), 8 * len(data))


def to_bytes(bs: BitString) -> Tuple[bytes, int]:
    """Inverse of :func:`from_bytes` on byte-aligned strings.

    Returns ``(data, trailing_bit_count)``; a final partial byte is
    zero-padded at the low end and ``trailing_bit_count`` reports the residue.
    """
    trailing = bs.length_bits % 8
    nbytes = (bs.length_bits + 7) // 8
    value = bs._value << (-bs.length_bits % 8)
    return value.to_bytes(nbytes, "big"), trailing


def bits(s: str) -> BitString:
    """Build a BitString from a literal like ``"1011"`` (spaces ignored)."""
    s = s.replace(" ", "").replace("_", "")
    if not s:
        return _EMPTY
    if set(s) - {"0", "1"}:
        raise ValueError("bit literal may only contain 0 and 1")
    return BitString(int(s, 2), len(s))


def _make(value: int, length_bits: int) -> BitString:
    """Internal unchecked-ish constructor for interpreters that already
    masked their value; still validates via BitString.__init__."""
    return BitString(value, length_bits)
