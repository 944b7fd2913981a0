"""Internet-style one's-complement checksums as a derived span field.

A checksum field can't be a plain field: its value is a function of bytes
both before and after it.  It is modelled here as a span — a 16-bit slot
between two runs of ordinary fields.  Encoding writes the slot as zero,
encodes everything else, folds the covered region and patches the slot so
the whole region folds to 0xFFFF.  Decoding verifies the fold over the
covered region *before* decoding any field, so corrupt input is rejected
as bad-checksum rather than as some downstream field error.

The covered region always starts at the span unit's own start (which must
be byte-aligned) and its byte length comes from a coverage function that
may peek at raw undecoded bytes — e.g. IPv4 reads the header-length
nibble, UDP reads its length field.  The default coverage is the unit's
exact size, which requires fixed-width fields on both sides.

An optional pseudo header (an even number of bytes, never emitted) is
folded in before the region, as UDP and TCP require.
"""

from __future__ import annotations

from typing import Callable, Optional, Union

from .align import _write_span
from .bitqueue import BitString, append as bs_append, empty as bs_empty, to_bytes
from .errors import (
    CodecError,
    DecodeError,
    EncodeError,
    REASON_BAD_CHECKSUM,
    REASON_CONSTRAINT,
    REASON_OVERFLOW,
    REASON_SHORT_INPUT,
)
from .format_core import CompiledBody, FieldChain, Format, _relate_seq

__all__ = [
    "ones_complement_fold",
    "ones_add",
    "ChecksumSpan16",
    "ip_checksum_format",
    "pseudoheader_checksum_format",
]

# coverage(buf, base, avail) -> byte length of the covered region, or None
# when it cannot be determined.  buf is raw bytes, base the region's first
# byte index, avail the number of bytes from base to the end of input.
Coverage = Callable[[bytes, int, int], Optional[int]]


def ones_complement_fold(data: bytes) -> int:
    """Fold bytes into a 16-bit one's-complement sum.

    Bytes pair up big-endian into 16-bit words; an odd trailing byte acts
    as the high byte of a zero-padded word.  Summing is end-around-carry,
    computed here in one shot: since 2^16 = 1 modulo 65535, the whole
    region interpreted as one big integer is congruent to the word sum.
    The result is 0 only for all-zero (or empty) input; a nonzero region
    that sums to a multiple of 65535 folds to 0xFFFF.
    """
    n = int.from_bytes(data, "big")
    if len(data) & 1:
        n <<= 8
    if n == 0:
        return 0
    r = n % 0xFFFF
    return 0xFFFF if r == 0 else r


def ones_add(a: int, b: int) -> int:
    """End-around-carry addition of two folded sums."""
    s = a + b
    return (s & 0xFFFF) + (s >> 16)


def _swap16(v: int) -> int:
    return ((v & 0xFF) << 8) | (v >> 8)


def _concat(pieces) -> BitString:
    out = bs_empty()
    for p in pieces:
        out = bs_append(out, p)
    return out


_ZERO16 = BitString(0, 16)


class ChecksumSpan16(object):
    """Span marker for FieldChain.span(): a 16-bit one's-complement
    checksum over a region starting at the unit's start.

    The fields before the slot must have a fixed total width that is a
    whole number of bytes.  When the slot lands on an odd byte offset
    within the folded stream (pseudo header included), the patched value
    is byte-swapped so the region still folds to 0xFFFF.
    """

    field_bits = 16

    def __init__(self, coverage: Optional[Coverage] = None, pseudo: bytes = b"",
                 name: str = "checksum16"):
        self.coverage = coverage
        self.pseudo = bytes(pseudo)
        self.name = name
        if len(self.pseudo) & 1:
            raise ValueError("pseudo header must be an even number of bytes")
        self.pre_sum = ones_complement_fold(self.pseudo)

    def build(self, before: CompiledBody, after: CompiledBody) -> CompiledBody:
        if before.exact_bits is None:
            raise ValueError("%s: fields before a checksum slot must have a "
                             "fixed total width" % self.name)
        if before.exact_bits & 7:
            raise ValueError("%s: checksum slot must start on a byte boundary"
                             % self.name)
        before_bits = before.exact_bits
        parity = (len(self.pseudo) + (before_bits >> 3)) & 1
        pre_sum = self.pre_sum
        name = self.name

        coverage = self.coverage
        if coverage is None:
            if after.exact_bits is None:
                raise ValueError("%s: explicit coverage required when the "
                                 "fields after the slot are variable-width" % name)
            total = before_bits + 16 + after.exact_bits
            if total & 7:
                raise ValueError("%s: covered region must be whole bytes" % name)
            fixed_covered = total >> 3

            def coverage(buf, base, avail, _n=fixed_covered):
                return _n

        def _patch_value(region: bytes) -> int:
            c = 0xFFFF - ones_add(pre_sum, ones_complement_fold(region))
            return _swap16(c) if parity else c

        # -- fast interpreters ---------------------------------------

        before_ef, after_ef = before.enc_fast, after.enc_fast
        before_df, after_df = before.dec_fast, after.dec_fast

        def enc_fast(s, buf, bit, views, ctx):
            if bit & 7:
                raise ValueError("%s: region must start on a byte boundary" % name)
            base = bit >> 3
            for run in before_ef:
                bit, ctx = run(s, buf, bit, views, ctx)
            slot = bit
            if bit + 16 > len(buf) << 3:
                raise EncodeError(REASON_OVERFLOW, len(buf) << 3, "write past capacity")
            _write_span(buf, bit, 0, 16)
            bit += 16
            for run in after_ef:
                bit, ctx = run(s, buf, bit, views, ctx)
            if (bit - (base << 3)) & 7:
                raise EncodeError(REASON_CONSTRAINT, base << 3,
                                  "%s: covered region must be whole bytes" % name)
            written = (bit >> 3) - base
            covered = coverage(buf, base, written)
            if covered is None or covered < 0 or covered > written:
                raise EncodeError(REASON_CONSTRAINT, base << 3,
                                  "%s: coverage %r outside encoded region (%d bytes)"
                                  % (name, covered, written))
            _write_span(buf, slot, _patch_value(bytes(buf[base : base + covered])), 16)
            return bit, ctx

        def dec_fast(buf, bit, views, ctx):
            if bit & 7:
                raise ValueError("%s: region must start on a byte boundary" % name)
            base = bit >> 3
            avail = len(buf) - base
            covered = coverage(buf, base, avail)
            if covered is None or covered < 0 or covered > avail:
                raise DecodeError(REASON_BAD_CHECKSUM, bit,
                                  "%s: cannot verify, region %r not within input"
                                  % (name, covered))
            region = int.from_bytes(buf[base : base + covered], "big")
            if covered & 1:
                region <<= 8
            fold = region % 0xFFFF
            if region and not fold:
                fold = 0xFFFF
            total = pre_sum + fold
            if (total & 0xFFFF) + (total >> 16) != 0xFFFF:
                raise DecodeError(REASON_BAD_CHECKSUM, bit + before_bits,
                                  "%s: fold over %d bytes is not 0xFFFF" % (name, covered))
            for run in before_df:
                bit, ctx = run(buf, bit, views, ctx)
            if bit + 16 > len(buf) << 3:
                raise DecodeError(REASON_SHORT_INPUT, len(buf) << 3,
                                  "%s: slot past end of input" % name)
            bit += 16   # slot already verified as part of the fold
            for run in after_df:
                bit, ctx = run(buf, bit, views, ctx)
            return bit, ctx

        # -- reference interpreters ----------------------------------

        before_eb, after_eb = before.enc_bit, after.enc_bit
        before_db, after_db = before.dec_bit, after.dec_bit

        def enc_bit(s, views, pieces, ctx):
            local = []
            try:
                for run in before_eb:
                    ctx = run(s, views, local, ctx)
            except CodecError as err:
                err.bit_offset += sum(p.length_bits for p in local)
                raise
            bp = _concat(local)
            local = []
            try:
                for run in after_eb:
                    ctx = run(s, views, local, ctx)
            except CodecError as err:
                err.bit_offset += bp.length_bits + 16 + sum(p.length_bits for p in local)
                raise
            ap = _concat(local)
            total = bp.length_bits + 16 + ap.length_bits
            if total & 7:
                raise EncodeError(REASON_CONSTRAINT, 0,
                                  "%s: covered region must be whole bytes" % name)
            zeroed, _ = to_bytes(_concat((bp, _ZERO16, ap)))
            covered = coverage(zeroed, 0, len(zeroed))
            if covered is None or covered < 0 or covered > len(zeroed):
                raise EncodeError(REASON_CONSTRAINT, 0,
                                  "%s: coverage %r outside encoded region (%d bytes)"
                                  % (name, covered, len(zeroed)))
            c = _patch_value(zeroed[:covered])
            pieces.append(_concat((bp, BitString(c, 16), ap)))
            return ctx

        def dec_bit(cur, views, ctx):
            avail = cur.length_bits >> 3
            head = cur._value >> (cur.length_bits - 8 * avail) if avail else 0
            data = head.to_bytes(avail, "big")
            covered = coverage(data, 0, avail)
            if covered is None or covered < 0 or covered > avail:
                raise DecodeError(REASON_BAD_CHECKSUM, 0,
                                  "%s: cannot verify, region %r not within input"
                                  % (name, covered))
            if ones_add(pre_sum, ones_complement_fold(data[:covered])) != 0xFFFF:
                raise DecodeError(REASON_BAD_CHECKSUM, before_bits,
                                  "%s: fold over %d bytes is not 0xFFFF" % (name, covered))
            start = cur.length_bits
            try:
                for run in before_db:
                    cur, ctx = run(cur, views, ctx)
                if cur.length_bits < 16:
                    raise DecodeError(REASON_SHORT_INPUT, cur.length_bits,
                                      "%s: slot past end of input" % name)
                slot = cur._value >> (cur.length_bits - 16)
                cur = BitString(cur._value - (slot << (cur.length_bits - 16)),
                                cur.length_bits - 16)
                for run in after_db:
                    cur, ctx = run(cur, views, ctx)
            except CodecError as err:
                err.bit_offset += start - cur.length_bits
                raise
            return cur, ctx

        # -- relation enumeration ------------------------------------

        relate = None
        if before.relate is not None and after.relate is not None:
            before_rel, after_rel = before.relate, after.relate

            def relate(s, views, ctx):
                for bp, c1 in _relate_seq(before_rel, s, views, ctx):
                    for ap, c2 in _relate_seq(after_rel, s, views, c1):
                        total = bp.length_bits + 16 + ap.length_bits
                        if total & 7:
                            continue
                        zeroed, _ = to_bytes(_concat((bp, _ZERO16, ap)))
                        covered = coverage(zeroed, 0, len(zeroed))
                        if covered is None or covered < 0 or covered > len(zeroed):
                            continue
                        c = _patch_value(zeroed[:covered])
                        yield _concat((bp, BitString(c, 16), ap)), c2

        return CompiledBody(
            (enc_bit,), (dec_bit,), (enc_fast,), (dec_fast,),
            (relate,) if relate is not None else None,
            before.min_bits + 16 + after.min_bits,
            None if after.max_bits is None or before.max_bits is None
            else before.max_bits + 16 + after.max_bits,
            None if before.exact_bits is None or after.exact_bits is None
            else before.exact_bits + 16 + after.exact_bits,
        )


def ip_checksum_format(before, after, *, coverage: Optional[Coverage] = None,
                       pseudo: bytes = b"", name: Optional[str] = None
                       ) -> Union[Format, FieldChain]:
    """A 16-bit one's-complement checksum slot between `before` and `after`.

    With FieldChain arguments this returns a longer FieldChain (close it
    with .done()); with Format arguments it returns a pair format whose
    sources are (before_value, after_value) tuples — handy for small
    experiments and the oracle tests.
    """
    span = ChecksumSpan16(coverage=coverage, pseudo=pseudo,
                          name=name or "checksum16")
    if isinstance(before, FieldChain) and isinstance(after, FieldChain):
        chain = FieldChain(name or before.name)
        chain._entries = list(before._entries) + [_span_entry(span)] + list(after._entries)
        return chain
    if isinstance(before, Format) and isinstance(after, Format):
        chain = FieldChain(name or "checksum-pair")
        chain.field("first", before, lambda s: s[0])
        chain.span(span)
        chain.field("second", after, lambda s: s[1])
        return chain.done(assemble=lambda vw: (vw.first, vw.second))
    raise TypeError("before/after must both be FieldChains or both Formats")


def _span_entry(span: ChecksumSpan16):
    from .format_core import _Entry
    return _Entry("span", None, span, None)


def pseudoheader_checksum_format(pseudo: bytes, before, after, *,
                                 coverage: Optional[Coverage] = None,
                                 name: Optional[str] = None):
    """ip_checksum_format with a pseudo header folded in front of the
    covered region (UDP/TCP style)."""
    return ip_checksum_format(before, after, coverage=coverage,
                              pseudo=pseudo, name=name)
