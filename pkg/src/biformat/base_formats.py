"""Primitive formats: fixed-width words, constants, padding, enums,
naturals, booleans, small lists and byte strings.

The bit-level interpreters here are written against the bit-queue ADT one
bit at a time — slow on purpose, so they stay an independent reference
for the fused byte-buffer interpreters to be tested against.
"""

from __future__ import annotations

from typing import Dict, Optional

from .align import _read_span, _write_span
from .bitqueue import BitString, append as bs_append, empty as bs_empty, unfold
from .errors import (
    CodecError,
    DecodeError,
    EncodeError,
    REASON_BAD_CONSTANT,
    REASON_CONSTRAINT,
    REASON_OVERFLOW,
    REASON_SHORT_INPUT,
    REASON_UNKNOWN_ENUM,
)
from .format_core import Format, FormatMeta, dep_bytes  # noqa: F401  (re-export)

__all__ = [
    "word",
    "nat",
    "const",
    "unused",
    "bool_bit",
    "enum_format",
    "fixed_list",
    "bytes_exact",
    "rest_bytes",
    "dep_bytes",
]


def _take_bits(bits: BitString, n: int):
    """Reference read: peel n bits off the front one unfold at a time."""
    if bits.length_bits < n:
        raise DecodeError(REASON_SHORT_INPUT, bits.length_bits,
                          "need %d bits, have %d" % (n, bits.length_bits))
    v = 0
    rest = bits
    for _ in range(n):
        b, rest = unfold(rest)
        v = (v << 1) | b
    return v, rest


def word(n: int) -> Format:
    """Unsigned big-endian integer in exactly n bits (0 <= n <= 64).

    Encoding a value outside [0, 2^n) is a constraint-violation; decoding
    always succeeds given n bits of input.
    """
    if not 0 <= n <= 64:
        raise ValueError("word width must be within 0..64, got %d" % n)
    mask = (1 << n) - 1

    def enc_bits(s, ctx):
        if s < 0 or s > mask:
            raise EncodeError(REASON_CONSTRAINT, 0,
                              "value %r does not fit in %d bits" % (s, n))
        out = bs_empty()
        for i in range(n - 1, -1, -1):
            out = bs_append(out, BitString((s >> i) & 1, 1))
        return out, ctx

    def dec_bits(bits, ctx):
        v, rest = _take_bits(bits, n)
        return v, rest, ctx

    def enc_fast(s, buf, bit, ctx):
        if s < 0 or s > mask:
            raise EncodeError(REASON_CONSTRAINT, bit,
                              "value %r does not fit in %d bits" % (s, n))
        if bit + n > len(buf) << 3:
            raise EncodeError(REASON_OVERFLOW, len(buf) << 3, "write past capacity")
        _write_span(buf, bit, s, n)
        return bit + n, ctx

    def dec_fast(buf, bit, ctx):
        if bit + n > len(buf) << 3:
            raise DecodeError(REASON_SHORT_INPUT, len(buf) << 3, "need %d bits" % n)
        return _read_span(buf, bit, n), bit + n, ctx

    def relate(s, ctx):
        if 0 <= s <= mask:
            yield BitString(s, n), ctx

    return Format(enc_bits, dec_bits, enc_fast, dec_fast,
                  FormatMeta("word%d" % n, n, n, ("word", n)),
                  relate, fuse=("int", n, None))


def nat(n: int) -> Format:
    """Natural number in n bits, truncating: any s >= 0 encodes as
    s mod 2^n.  Non-injective by design — the usual length-prefix trap —
    so pair it with restrict() when the value can exceed the width."""
    if not 0 <= n <= 64:
        raise ValueError("nat width must be within 0..64, got %d" % n)
    mask = (1 << n) - 1

    def enc_bits(s, ctx):
        if s < 0:
            raise EncodeError(REASON_CONSTRAINT, 0, "negative natural %r" % (s,))
        v = s & mask
        out = bs_empty()
        for i in range(n - 1, -1, -1):
            out = bs_append(out, BitString((v >> i) & 1, 1))
        return out, ctx

    def dec_bits(bits, ctx):
        v, rest = _take_bits(bits, n)
        return v, rest, ctx

    def enc_fast(s, buf, bit, ctx):
        if s < 0:
            raise EncodeError(REASON_CONSTRAINT, bit, "negative natural %r" % (s,))
        if bit + n > len(buf) << 3:
            raise EncodeError(REASON_OVERFLOW, len(buf) << 3, "write past capacity")
        _write_span(buf, bit, s & mask, n)
        return bit + n, ctx

    def dec_fast(buf, bit, ctx):
        if bit + n > len(buf) << 3:
            raise DecodeError(REASON_SHORT_INPUT, len(buf) << 3, "need %d bits" % n)
        return _read_span(buf, bit, n), bit + n, ctx

    def relate(s, ctx):
        if s >= 0:
            yield BitString(s & mask, n), ctx

    return Format(enc_bits, dec_bits, enc_fast, dec_fast,
                  FormatMeta("nat%d" % n, n, n, ("nat", n)),
                  relate, fuse=("nat", n, None))


def const(n: int, value: int) -> Format:
    """Fixed n-bit constant.  A unit format: it encodes from nothing
    (source ignored) and its decoded value is None; reading anything else
    is a bad-constant error at the field start."""
    if not 0 <= n <= 64:
        raise ValueError("const width must be within 0..64, got %d" % n)
    if value < 0 or value >> n:
        raise ValueError("constant %r does not fit in %d bits" % (value, n))
    t = BitString(value, n)

    def enc_bits(s, ctx):
        out = bs_empty()
        for i in range(n - 1, -1, -1):
            out = bs_append(out, BitString((value >> i) & 1, 1))
        return out, ctx

    def dec_bits(bits, ctx):
        v, rest = _take_bits(bits, n)
        if v != value:
            raise DecodeError(REASON_BAD_CONSTANT, 0,
                              "read %d, expected %d" % (v, value))
        return None, rest, ctx

    def enc_fast(s, buf, bit, ctx):
        if bit + n > len(buf) << 3:
            raise EncodeError(REASON_OVERFLOW, len(buf) << 3, "write past capacity")
        _write_span(buf, bit, value, n)
        return bit + n, ctx

    def dec_fast(buf, bit, ctx):
        if bit + n > len(buf) << 3:
            raise DecodeError(REASON_SHORT_INPUT, len(buf) << 3, "need %d bits" % n)
        v = _read_span(buf, bit, n)
        if v != value:
            raise DecodeError(REASON_BAD_CONSTANT, bit,
                              "read %d, expected %d" % (v, value))
        return None, bit + n, ctx

    def relate(s, ctx):
        yield t, ctx

    return Format(enc_bits, dec_bits, enc_fast, dec_fast,
                  FormatMeta("const%d=0x%X" % (n, value), n, n, ("const", n, value)),
                  relate, fuse=("const", n, value))


def unused(n: int) -> Format:
    """n reserved bits: the encoder writes zeros, the decoder accepts and
    discards any filling.  Unit format (value None).  The relation pairs
    every source with all 2^n fillings, and the round-trip consequently
    only holds up to these bits — see the oracle module."""
    if not 0 <= n <= 64:
        raise ValueError("unused width must be within 0..64, got %d" % n)

    def enc_bits(s, ctx):
        out = bs_empty()
        for _ in range(n):
            out = bs_append(out, BitString(0, 1))
        return out, ctx

    def dec_bits(bits, ctx):
        _, rest = _take_bits(bits, n)
        return None, rest, ctx

    def enc_fast(s, buf, bit, ctx):
        if bit + n > len(buf) << 3:
            raise EncodeError(REASON_OVERFLOW, len(buf) << 3, "write past capacity")
        _write_span(buf, bit, 0, n)
        return bit + n, ctx

    def dec_fast(buf, bit, ctx):
        if bit + n > len(buf) << 3:
            raise DecodeError(REASON_SHORT_INPUT, len(buf) << 3, "need %d bits" % n)
        return None, bit + n, ctx

    def relate(s, ctx):
        for v in range(1 << n):
            yield BitString(v, n), ctx

    return Format(enc_bits, dec_bits, enc_fast, dec_fast,
                  FormatMeta("unused%d" % n, n, n, ("unused", n)),
                  relate, fuse=("pad", n, None))


def bool_bit() -> Format:
    """One bit holding a boolean (1 = True)."""

    def enc_bits(s, ctx):
        return BitString(1 if s else 0, 1), ctx

    def dec_bits(bits, ctx):
        v, rest = _take_bits(bits, 1)
        return v == 1, rest, ctx

    def enc_fast(s, buf, bit, ctx):
        if bit + 1 > len(buf) << 3:
            raise EncodeError(REASON_OVERFLOW, len(buf) << 3, "write past capacity")
        _write_span(buf, bit, 1 if s else 0, 1)
        return bit + 1, ctx

    def dec_fast(buf, bit, ctx):
        if bit + 1 > len(buf) << 3:
            raise DecodeError(REASON_SHORT_INPUT, len(buf) << 3, "need 1 bit")
        return _read_span(buf, bit, 1) == 1, bit + 1, ctx

    def relate(s, ctx):
        yield BitString(1 if s else 0, 1), ctx

    return Format(enc_bits, dec_bits, enc_fast, dec_fast,
                  FormatMeta("bool", 1, 1, ("bool",)),
                  relate, fuse=("bool", 1, None))


def enum_format(n: int, table: Dict[str, int], name: Optional[str] = None) -> Format:
    """n-bit code <-> symbolic name, by an explicit injective table.

    Encoding a name outside the table and decoding a code outside it are
    both unknown-enum errors.
    """
    if not 0 <= n <= 64:
        raise ValueError("enum width must be within 0..64, got %d" % n)
    by_name = dict(table)
    by_code: Dict[int, str] = {}
    for key, code in by_name.items():
        if code < 0 or code >> n:
            raise ValueError("enum code %r does not fit in %d bits" % (code, n))
        if code in by_code:
            raise ValueError("enum codes must be distinct, %d repeats" % code)
        by_code[code] = key

    def enc_bits(s, ctx):
        code = by_name.get(s)
        if code is None:
            raise EncodeError(REASON_UNKNOWN_ENUM, 0, "%r not in table" % (s,))
        out = bs_empty()
        for i in range(n - 1, -1, -1):
            out = bs_append(out, BitString((code >> i) & 1, 1))
        return out, ctx

    def dec_bits(bits, ctx):
        v, rest = _take_bits(bits, n)
        key = by_code.get(v)
        if key is None:
            raise DecodeError(REASON_UNKNOWN_ENUM, 0, "code %d not in table" % v)
        return key, rest, ctx

    def enc_fast(s, buf, bit, ctx):
        code = by_name.get(s)
        if code is None:
            raise EncodeError(REASON_UNKNOWN_ENUM, bit, "%r not in table" % (s,))
        if bit + n > len(buf) << 3:
            raise EncodeError(REASON_OVERFLOW, len(buf) << 3, "write past capacity")
        _write_span(buf, bit, code, n)
        return bit + n, ctx

    def dec_fast(buf, bit, ctx):
        if bit + n > len(buf) << 3:
            raise DecodeError(REASON_SHORT_INPUT, len(buf) << 3, "need %d bits" % n)
        v = _read_span(buf, bit, n)
        key = by_code.get(v)
        if key is None:
            raise DecodeError(REASON_UNKNOWN_ENUM, bit, "code %d not in table" % v)
        return key, bit + n, ctx

    def relate(s, ctx):
        code = by_name.get(s)
        if code is not None:
            yield BitString(code, n), ctx

    return Format(enc_bits, dec_bits, enc_fast, dec_fast,
                  FormatMeta(name or "enum%d" % n, n, n,
                             ("enum", n, tuple(sorted(by_name.items())))),
                  relate, fuse=("enum", n, (by_code, by_name)))


def fixed_list(elem: Format, count: int) -> Format:
    """Exactly `count` elements of `elem`, decoded as a tuple."""
    if count < 0:
        raise ValueError("negative element count")
    e_enc, e_dec = elem.enc_bits, elem.dec_bits
    e_ef, e_df = elem.enc_fast, elem.dec_fast

    def enc_bits(s, ctx):
        if len(s) != count:
            raise EncodeError(REASON_CONSTRAINT, 0,
                              "expected %d elements, got %d" % (count, len(s)))
        out = bs_empty()
        try:
            for x in s:
                piece, ctx = e_enc(x, ctx)
                out = bs_append(out, piece)
        except CodecError as err:
            err.bit_offset += out.length_bits
            raise
        return out, ctx

    def dec_bits(bits, ctx):
        out = []
        cur = bits
        try:
            for _ in range(count):
                v, cur, ctx = e_dec(cur, ctx)
                out.append(v)
        except CodecError as err:
            err.bit_offset += bits.length_bits - cur.length_bits
            raise
        return tuple(out), cur, ctx

    def enc_fast(s, buf, bit, ctx):
        if len(s) != count:
            raise EncodeError(REASON_CONSTRAINT, bit,
                              "expected %d elements, got %d" % (count, len(s)))
        for x in s:
            bit, ctx = e_ef(x, buf, bit, ctx)
        return bit, ctx

    def dec_fast(buf, bit, ctx):
        out = []
        for _ in range(count):
            v, bit, ctx = e_df(buf, bit, ctx)
            out.append(v)
        return tuple(out), bit, ctx

    relate = None
    if elem.relate is not None:
        e_rel = elem.relate

        def relate(s, ctx):
            if len(s) != count:
                return

            def prod(i, prefix, c):
                if i == count:
                    yield prefix, c
                    return
                for piece, c2 in e_rel(s[i], c):
                    yield from prod(i + 1, bs_append(prefix, piece), c2)

            yield from prod(0, bs_empty(), ctx)

    em = elem.meta
    meta = FormatMeta("%s[%d]" % (em.name, count),
                      em.min_bits * count,
                      None if em.max_bits is None else em.max_bits * count,
                      ("list", count, em.structure))
    return Format(enc_bits, dec_bits, enc_fast, dec_fast, meta, relate)


def bytes_exact(n: int) -> Format:
    """Exactly n raw bytes.  Works at any bit alignment; byte-aligned
    buffers take the sliced fast path."""
    if n < 0:
        raise ValueError("negative byte count")
    w = 8 * n

    def enc_bits(s, ctx):
        if len(s) != n:
            raise EncodeError(REASON_CONSTRAINT, 0,
                              "expected %d bytes, got %d" % (n, len(s)))
        return BitString(int.from_bytes(s, "big"), w), ctx

    def dec_bits(bits, ctx):
        v, rest = _take_bits(bits, w)
        return v.to_bytes(n, "big"), rest, ctx

    def enc_fast(s, buf, bit, ctx):
        if len(s) != n:
            raise EncodeError(REASON_CONSTRAINT, bit,
                              "expected %d bytes, got %d" % (n, len(s)))
        if bit + w > len(buf) << 3:
            raise EncodeError(REASON_OVERFLOW, len(buf) << 3, "write past capacity")
        if bit & 7 == 0:
            byte = bit >> 3
            buf[byte : byte + n] = s
        else:
            _write_span(buf, bit, int.from_bytes(s, "big"), w)
        return bit + w, ctx

    def dec_fast(buf, bit, ctx):
        end = bit + w
        if end > len(buf) << 3:
            raise DecodeError(REASON_SHORT_INPUT, len(buf) << 3, "need %d bytes" % n)
        if bit & 7 == 0:
            byte = bit >> 3
            return bytes(buf[byte : byte + n]), end, ctx
        return _read_span(buf, bit, w).to_bytes(n, "big"), end, ctx

    def relate(s, ctx):
        if len(s) == n:
            yield BitString(int.from_bytes(s, "big"), w), ctx

    return Format(enc_bits, dec_bits, enc_fast, dec_fast,
                  FormatMeta("bytes%d" % n, w, w, ("bytes", n)), relate,
                  fuse=("bytes", w, n))


def rest_bytes() -> Format:
    """All remaining whole bytes, greedily.

    Greedy by nature: appending whole extra bytes changes what decodes, so
    a format ending in rest_bytes only round-trips on exact buffers.  Up
    to seven trailing bits are left unconsumed, which keeps sub-byte tails
    harmless.
    """

    def enc_bits(s, ctx):
        return BitString(int.from_bytes(s, "big"), 8 * len(s)), ctx

    def dec_bits(bits, ctx):
        n = bits.length_bits >> 3
        v, rest = _take_bits(bits, 8 * n)
        return v.to_bytes(n, "big"), rest, ctx

    def enc_fast(s, buf, bit, ctx):
        n = len(s)
        if bit + 8 * n > len(buf) << 3:
            raise EncodeError(REASON_OVERFLOW, len(buf) << 3, "write past capacity")
        if bit & 7 == 0:
            byte = bit >> 3
            buf[byte : byte + n] = s
        else:
            _write_span(buf, bit, int.from_bytes(s, "big"), 8 * n)
        return bit + 8 * n, ctx

    def dec_fast(buf, bit, ctx):
        n = ((len(buf) << 3) - bit) >> 3
        end = bit + 8 * n
        if bit & 7 == 0:
            byte = bit >> 3
            return bytes(buf[byte : byte + n]), end, ctx
        return _read_span(buf, bit, 8 * n).to_bytes(n, "big"), end, ctx

    def relate(s, ctx):
        yield BitString(int.from_bytes(s, "big"), 8 * len(s)), ctx

    return Format(enc_bits, dec_bits, enc_fast, dec_fast,
                  FormatMeta("rest-bytes", 0, None, ("rest-bytes",)), relate)
