"""Executable correctness oracles for small format instances.

Instead of trusting the combinators, the test suite enumerates a format's
relation outright on small source/input spaces and checks the encoder and
decoder against it:

  * encoder soundness — whatever the encoder emits is in the relation,
    and the encoder reports absence exactly when the source relates to
    nothing;
  * decoder completeness — every related target, followed by arbitrary
    junk, decodes back to its source with the junk untouched;
  * decoder soundness — sweeping *all* inputs up to a size bound, every
    accepted prefix is in the relation with the decoded value.

Formats that are non-injective on purpose (truncating naturals, shared
codes) fail the completeness clause, and check_injectivity pinpoints the
colliding sources.  All checks return lists of counterexamples; an empty
list is a pass.  Everything here drives the bit-level reference
interpreters — the byte-buffer ones are covered by the differential
harness in the align module.
"""

from __future__ import annotations

from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Set, Tuple

from .bitqueue import BitString, append as bs_append
from .errors import CodecError, DecodeError, EncodeError
from .format_core import Format, FormatMeta

__all__ = [
    "RelationSample",
    "enumerate_relation",
    "check_encoder_refines",
    "check_decoder_correct",
    "check_injectivity",
    "relation_format",
    "all_bit_strings",
    "ENUMERATION_LIMIT",
]

ENUMERATION_LIMIT = 1 << 20


class RelationSample(NamedTuple):
    """One enumerated member of a format's relation."""

    source: Any
    ctx_in: Any
    target: BitString
    ctx_out: Any


class Counterexample(NamedTuple):
    clause: str
    source: Any
    detail: str

    def __repr__(self) -> str:
        return "[%s] source=%r: %s" % (self.clause, self.source, self.detail)


def enumerate_relation(format: Format, sources: Iterable[Any],
                       ctx: Any = None) -> List[RelationSample]:
    """Materialize the relation restricted to the given sources.

    Refuses to enumerate more than ENUMERATION_LIMIT members — the guard
    that keeps a stray unused(64) from eating the test run.
    """
    if format.relate is None:
        raise ValueError("format %s cannot enumerate its relation" % format.meta.name)
    out: List[RelationSample] = []
    for s in sources:
        for t, ctx_out in format.relate(s, ctx):
            out.append(RelationSample(s, ctx, t, ctx_out))
            if len(out) > ENUMERATION_LIMIT:
                raise ValueError("relation exceeds %d members; narrow the "
                                 "source space" % ENUMERATION_LIMIT)
    return out


def _targets(format: Format, s: Any, ctx: Any) -> Set[BitString]:
    return {t for t, _ in format.relate(s, ctx)}


def all_bit_strings(max_bits: int) -> Iterable[BitString]:
    """Every bit string of length 0..max_bits, shortest first."""
    for length in range(max_bits + 1):
        for value in range(1 << length):
            yield BitString(value, length)


def check_encoder_refines(format: Format, sources: Iterable[Any],
                          ctx: Any = None) -> List[Counterexample]:
    """Encoder soundness against the enumerated relation: presence lands
    inside the relation, absence means the relation is empty there."""
    if format.relate is None:
        raise ValueError("format %s cannot enumerate its relation" % format.meta.name)
    bad: List[Counterexample] = []
    for s in sources:
        targets = _targets(format, s, ctx)
        if len(targets) > ENUMERATION_LIMIT:
            raise ValueError("relation too large at %r" % (s,))
        try:
            t, _ = format.enc_bits(s, ctx)
        except EncodeError as err:
            if targets:
                bad.append(Counterexample(
                    "encoder-absence", s,
                    "encoder refused (%s) but %d targets exist" % (err, len(targets))))
            continue
        if t not in targets:
            bad.append(Counterexample(
                "encoder-membership", s,
                "emitted %r, not among %d related targets" % (t, len(targets))))
    return bad


def check_decoder_correct(format: Format, sources: Iterable[Any],
                          ctx: Any = None, max_tail_bits: int = 3,
                          sweep_max_bits: Optional[int] = None
                          ) -> List[Counterexample]:
    """Decoder correctness, both directions.

    Completeness: for every source, every related target followed by every
    tail of up to max_tail_bits junk decodes to that source with exactly
    the junk left over.  Soundness: every input up to sweep_max_bits long
    that the decoder accepts must have its consumed prefix related to the
    decoded value.  sweep_max_bits defaults to the format's declared
    maximum plus max_tail_bits and must be given for unbounded formats.
    """
    if format.relate is None:
        raise ValueError("format %s cannot enumerate its relation" % format.meta.name)
    bad: List[Counterexample] = []
    tails = list(all_bit_strings(max_tail_bits))

    total = 0
    for s in sources:
        for t, _ in format.relate(s, ctx):
            for tail in tails:
                total += 1
                if total > ENUMERATION_LIMIT:
                    raise ValueError("completeness sweep exceeds %d cases"
                                     % ENUMERATION_LIMIT)
                padded = bs_append(t, tail)
                try:
                    v, rest, _ = format.dec_bits(padded, ctx)
                except DecodeError as err:
                    bad.append(Counterexample(
                        "decoder-completeness", s,
                        "related target %r + tail %r rejected: %s" % (t, tail, err)))
                    continue
                if v != s or rest != tail:
                    bad.append(Counterexample(
                        "decoder-completeness", s,
                        "target %r + tail %r decoded to %r with rest %r"
                        % (t, tail, v, rest)))

    if sweep_max_bits is None:
        mx = format.meta.max_bits
        if mx is None:
            raise ValueError("sweep_max_bits required for unbounded formats")
        sweep_max_bits = mx + max_tail_bits
    if (1 << (sweep_max_bits + 1)) > ENUMERATION_LIMIT:
        raise ValueError("soundness sweep of %d-bit inputs is too large" % sweep_max_bits)
    for w in all_bit_strings(sweep_max_bits):
        try:
            v, rest, _ = format.dec_bits(w, ctx)
        except CodecError:
            continue
        consumed = w.length_bits - rest.length_bits
        prefix = BitString(w._value >> rest.length_bits, consumed)
        try:
            targets = _targets(format, v, ctx)
        except Exception as err:  # decoded something the relation can't even rate
            bad.append(Counterexample(
                "decoder-soundness", v,
                "accepted %r but relation enumeration failed: %s" % (w, err)))
            continue
        if prefix not in targets:
            bad.append(Counterexample(
                "decoder-soundness", v,
                "accepted %r consuming %r, which is not related" % (w, prefix)))
    return bad


def check_injectivity(format: Format, sources: Iterable[Any],
                      ctx: Any = None) -> List[Counterexample]:
    """Find distinct sources sharing a target — exactly the formats for
    which decode-inverts-encode cannot hold."""
    if format.relate is None:
        raise ValueError("format %s cannot enumerate its relation" % format.meta.name)
    seen: Dict[BitString, Any] = {}
    bad: List[Counterexample] = []
    for s in sources:
        for t, _ in format.relate(s, ctx):
            if t in seen and seen[t] != s:
                bad.append(Counterexample(
                    "injectivity", s,
                    "target %r already reachable from %r" % (t, seen[t])))
            else:
                seen[t] = s
    return bad


def relation_format(pairs: List[Tuple[Any, BitString]], name: str = "relation") -> Format:
    """Build a Format straight from an explicit relation — the fixture for
    testing the oracles themselves (including deliberately broken codecs).

    Encoding emits the first listed target for the source; decoding
    returns the first source whose target prefixes the input.
    """
    from .errors import (REASON_CONSTRAINT, REASON_NO_UNION_BRANCH,
                         REASON_OVERFLOW, REASON_SHORT_INPUT)
    from .align import _read_span, _write_span

    pairs = list(pairs)

    def enc_bits(s, ctx):
        for src, t in pairs:
            if src == s:
                return t, ctx
        raise EncodeError(REASON_CONSTRAINT, 0, "source not in relation")

    def dec_bits(bits, ctx):
        for src, t in pairs:
            n = t.length_bits
            if bits.length_bits >= n and bits._value >> (bits.length_bits - n) == t._value:
                return src, BitString(bits._value - (t._value << (bits.length_bits - n)),
                                      bits.length_bits - n), ctx
        raise DecodeError(REASON_NO_UNION_BRANCH, 0, "no listed target matches")

    def enc_fast(s, buf, bit, ctx):
        t, ctx = enc_bits(s, ctx)
        if bit + t.length_bits > len(buf) << 3:
            raise EncodeError(REASON_OVERFLOW, len(buf) << 3, "write past capacity")
        _write_span(buf, bit, t._value, t.length_bits)
        return bit + t.length_bits, ctx

    def dec_fast(buf, bit, ctx):
        avail = (len(buf) << 3) - bit
        for src, t in pairs:
            n = t.length_bits
            if avail >= n and _read_span(buf, bit, n) == t._value:
                return src, bit + n, ctx
        raise DecodeError(REASON_NO_UNION_BRANCH, bit, "no listed target matches")

    def relate(s, ctx):
        for src, t in pairs:
            if src == s:
                yield t, ctx

    lengths = [t.length_bits for _, t in pairs]
    meta = FormatMeta(name, min(lengths, default=0), max(lengths, default=0),
                      ("relation", name))
    return Format(enc_bits, dec_bits, enc_fast, dec_fast, meta, relate)
