"""Core bidirectional format combinators.

A Format is one declarative value from which both directions of a codec
are derived.  Semantically it stands for a relation between source values
and bit strings; the encoder emits a member of that relation (or reports
absence when the source is outside it), and the decoder accepts exactly
the relation's bit strings, reconstructing the source.  The test suite
checks those properties directly via the oracle module; nothing here is
trusted by construction.

Every Format carries four interpreters:

  enc_bits(s, ctx)        -> (BitString, ctx)        reference encoder
  dec_bits(bits, ctx)     -> (value, rest, ctx)       reference decoder
  enc_fast(s, buf, bit, ctx) -> (bit, ctx)            byte-buffer encoder
  dec_fast(buf, bit, ctx) -> (value, bit, ctx)        byte-buffer decoder

The bit-level pair is deliberately naive and compositional; the fast pair
writes into a caller-provided bytearray at an absolute bit position.  The
two are developed separately and tied together by the equivalence harness
in the align module, so differential tests have real teeth.

Error offsets: the fast interpreters raise with absolute bit positions.
The bit-level interpreters raise with positions relative to their own
input; each combinator adds what it had already consumed while the error
propagates, so the offset is absolute by the time it reaches the caller.

An optional fifth slot, `relate`, enumerates every (target, ctx) pair a
source stands in relation with.  It exists purely for the oracle tests
(exhaustive small-instance checking) and is None for formats that cannot
enumerate their targets.
"""

from __future__ import annotations

from collections import namedtuple
from typing import Any, Callable, List, NamedTuple, Optional, Tuple

from .align import _read_span, _write_span
from .bitqueue import BitString, append as bs_append, empty as bs_empty
from .errors import (
    CodecError,
    DecodeError,
    EncodeError,
    REASON_BAD_CONSTANT,
    REASON_CONSTRAINT,
    REASON_NO_UNION_BRANCH,
    REASON_OVERFLOW,
    REASON_SHORT_INPUT,
    REASON_UNKNOWN_ENUM,
)

__all__ = [
    "Format",
    "FormatMeta",
    "epsilon",
    "seq",
    "project",
    "restrict",
    "union",
    "discriminator",
    "Discriminator",
    "FieldChain",
    "record",
    "dep_count",
    "dep_bytes",
    "Views",
    "derive",
    "DEFAULT_ENCODE_CAPACITY",
]

DEFAULT_ENCODE_CAPACITY = 2048


class FormatMeta(NamedTuple):
    """Name, declared bit-size bounds and a structural fingerprint.

    `structure` is a nested tuple describing the format's shape; sequences
    are kept flattened so that differently associated compositions of the
    same parts share one fingerprint.
    """

    name: str
    min_bits: int
    max_bits: Optional[int]       # None = unbounded
    structure: tuple

    @property
    def exact_bits(self) -> Optional[int]:
        return self.min_bits if self.min_bits == self.max_bits else None


class Format:
    """A bidirectional format: four interpreters plus metadata.

    Instances are built by the combinators in this module and in
    base_formats / checksum / netformats; user code rarely constructs one
    directly.
    """

    __slots__ = ("enc_bits", "dec_bits", "enc_fast", "dec_fast", "relate",
                 "meta", "_fuse")

    def __init__(self, enc_bits, dec_bits, enc_fast, dec_fast, meta,
                 relate=None, fuse=None):
        self.enc_bits = enc_bits
        self.dec_bits = dec_bits
        self.enc_fast = enc_fast
        self.dec_fast = dec_fast
        self.relate = relate
        self.meta = meta
        self._fuse = fuse     # (kind, width, aux) for fixed-width primitives

    # -- convenience wrappers ------------------------------------------

    def encode(self, s, ctx=None) -> BitString:
        """Reference encode; returns the emitted bit string."""
        t, _ = self.enc_bits(s, ctx)
        return t

    def decode(self, bits: BitString, ctx=None) -> Tuple[Any, BitString]:
        """Reference decode; returns (value, remaining bits)."""
        v, rest, _ = self.dec_bits(bits, ctx)
        return v, rest

    def encode_bytes(self, s, capacity: Optional[int] = None, ctx=None) -> Tuple[bytes, int]:
        """Fast encode into a fresh buffer; returns (bytes, bit count).

        The final byte is zero-padded when the bit count is not a multiple
        of eight.  Capacity defaults to the format's declared maximum, or
        DEFAULT_ENCODE_CAPACITY when unbounded.
        """
        if capacity is None:
            mx = self.meta.max_bits
            capacity = (mx + 7) // 8 if mx is not None else DEFAULT_ENCODE_CAPACITY
        buf = bytearray(capacity)
        bit, _ = self.enc_fast(s, buf, 0, ctx)
        return bytes(buf[: (bit + 7) // 8]), bit

    def decode_bytes(self, data, ctx=None) -> Tuple[Any, int]:
        """Fast decode from the start of data; returns (value, bits consumed)."""
        v, bit, _ = self.dec_fast(data, 0, ctx)
        return v, bit

    def derive(self):
        """The point of the whole library: one description, both directions."""
        return self.encode_bytes, self.decode_bytes

    def __repr__(self) -> str:
        m = self.meta
        if m.exact_bits is not None:
            size = "%d bits" % m.min_bits
        elif m.max_bits is None:
            size = ">=%d bits" % m.min_bits
        else:
            size = "%d..%d bits" % (m.min_bits, m.max_bits)
        return "<Format %s (%s)>" % (m.name, size)


def derive(format: Format):
    """Module-level spelling of Format.derive."""
    return format.derive()


# ----------------------------------------------------------------------
# Trivial and structural combinators.
# ----------------------------------------------------------------------

def epsilon() -> Format:
    """The empty format: writes nothing, reads nothing, value is None."""
    e = bs_empty()

    def enc_bits(s, ctx):
        return e, ctx

    def dec_bits(bits, ctx):
        return None, bits, ctx

    def enc_fast(s, buf, bit, ctx):
        return bit, ctx

    def dec_fast(buf, bit, ctx):
        return None, bit, ctx

    def relate(s, ctx):
        yield e, ctx

    return Format(enc_bits, dec_bits, enc_fast, dec_fast,
                  FormatMeta("epsilon", 0, 0, ("epsilon",)), relate)


def _flat_seq(structure: tuple) -> tuple:
    if structure and structure[0] == "seq":
        return structure[1:]
    return (structure,)


def _sum_max(a: Optional[int], b: Optional[int]) -> Optional[int]:
    if a is None or b is None:
        return None
    return a + b


def seq(first: Format, second: Format) -> Format:
    """Concatenation: sources are pairs, targets are first's bits then
    second's.  Nesting associates freely; the structural fingerprint is
    flattened so both associations compare equal."""
    fe, se = first.enc_bits, second.enc_bits
    fd, sd = first.dec_bits, second.dec_bits
    fef, sef = first.enc_fast, second.enc_fast
    fdf, sdf = first.dec_fast, second.dec_fast

    def enc_bits(s, ctx):
        ta, ctx = fe(s[0], ctx)
        try:
            tb, ctx = se(s[1], ctx)
        except CodecError as err:
            err.bit_offset += ta.length_bits
            raise
        return bs_append(ta, tb), ctx

    def dec_bits(bits, ctx):
        va, rest, ctx = fd(bits, ctx)
        try:
            vb, rest2, ctx = sd(rest, ctx)
        except CodecError as err:
            err.bit_offset += bits.length_bits - rest.length_bits
            raise
        return (va, vb), rest2, ctx

    def enc_fast(s, buf, bit, ctx):
        bit, ctx = fef(s[0], buf, bit, ctx)
        return sef(s[1], buf, bit, ctx)

    def dec_fast(buf, bit, ctx):
        va, bit, ctx = fdf(buf, bit, ctx)
        vb, bit, ctx = sdf(buf, bit, ctx)
        return (va, vb), bit, ctx

    relate = None
    if first.relate is not None and second.relate is not None:
        fr, sr = first.relate, second.relate

        def relate(s, ctx):
            for ta, c1 in fr(s[0], ctx):
                for tb, c2 in sr(s[1], c1):
                    yield bs_append(ta, tb), c2

    fm, sm = first.meta, second.meta
    meta = FormatMeta(
        "(%s ++ %s)" % (fm.name, sm.name),
        fm.min_bits + sm.min_bits,
        _sum_max(fm.max_bits, sm.max_bits),
        ("seq",) + _flat_seq(fm.structure) + _flat_seq(sm.structure),
    )
    return Format(enc_bits, dec_bits, enc_fast, dec_fast, meta, relate)


def project(format: Format, fn: Callable[[Any], Any], name: Optional[str] = None) -> Format:
    """Encode through a projection fn : S -> V, then format on V.

    Decoding yields the raw V; reconstructing an S from decoded views is
    the job of record/done.  project(f, lambda v: v) behaves exactly as f.
    """
    inner_enc, inner_ef = format.enc_bits, format.enc_fast

    def enc_bits(s, ctx):
        return inner_enc(fn(s), ctx)

    def enc_fast(s, buf, bit, ctx):
        return inner_ef(fn(s), buf, bit, ctx)

    relate = None
    if format.relate is not None:
        inner_rel = format.relate

        def relate(s, ctx):
            return inner_rel(fn(s), ctx)

    m = format.meta
    meta = FormatMeta(name or ("project(%s)" % m.name), m.min_bits, m.max_bits,
                      ("project", m.structure))
    return Format(enc_bits, format.dec_bits, enc_fast, format.dec_fast, meta, relate)


def restrict(format: Format, pred: Callable[[Any], bool], name: Optional[str] = None) -> Format:
    """Intersect the relation with {s | pred(s)}: the encoder refuses
    sources outside the predicate, the decoder refuses values that decode
    outside it.  Both report constraint-violation at the region start."""
    inner_enc, inner_dec = format.enc_bits, format.dec_bits
    inner_ef, inner_df = format.enc_fast, format.dec_fast

    def enc_bits(s, ctx):
        if not pred(s):
            raise EncodeError(REASON_CONSTRAINT, 0, "restriction rejected value")
        return inner_enc(s, ctx)

    def dec_bits(bits, ctx):
        v, rest, ctx = inner_dec(bits, ctx)
        if not pred(v):
            raise DecodeError(REASON_CONSTRAINT, 0, "restriction rejected decoded value")
        return v, rest, ctx

    def enc_fast(s, buf, bit, ctx):
        if not pred(s):
            raise EncodeError(REASON_CONSTRAINT, bit, "restriction rejected value")
        return inner_ef(s, buf, bit, ctx)

    def dec_fast(buf, bit, ctx):
        v, end, ctx = inner_df(buf, bit, ctx)
        if not pred(v):
            raise DecodeError(REASON_CONSTRAINT, bit, "restriction rejected decoded value")
        return v, end, ctx

    relate = None
    if format.relate is not None:
        inner_rel = format.relate

        def relate(s, ctx):
            if pred(s):
                yield from inner_rel(s, ctx)

    m = format.meta
    meta = FormatMeta(name or ("restrict(%s)" % m.name), m.min_bits, m.max_bits,
                      ("restrict", m.structure))
    return Format(enc_bits, dec_bits, enc_fast, dec_fast, meta, relate)


# ----------------------------------------------------------------------
# Union of two alternatives with an explicit discriminator.
# ----------------------------------------------------------------------

class Discriminator(NamedTuple):
    """Peek-and-classify bundle used by union's decoder.

    `peek` is decoded from the union's start position without consuming
    anything; `classify` maps the peeked value to "left", "right", or
    None, where None means no branch applies.
    """

    peek: "Format"
    classify: Callable[[Any], Optional[str]]


def discriminator(peek: Format, classify: Callable[[Any], Optional[str]]) -> Discriminator:
    return Discriminator(peek, classify)


def union(left: Format, right: Format, index: Callable[[Any], str],
          discriminate: Discriminator, name: Optional[str] = None) -> Format:
    """Union of two formats.  Encoding dispatches on index(s) ("left" or
    "right"); decoding peeks with the discriminator and commits to one
    branch, re-reading from the union's start position."""
    peek_dec, peek_df = discriminate.peek.dec_bits, discriminate.peek.dec_fast
    classify = discriminate.classify
    le, re_ = left.enc_bits, right.enc_bits
    ld, rd = left.dec_bits, right.dec_bits
    lef, ref_ = left.enc_fast, right.enc_fast
    ldf, rdf = left.dec_fast, right.dec_fast

    def enc_bits(s, ctx):
        tag = index(s)
        if tag == "left":
            return le(s, ctx)
        if tag == "right":
            return re_(s, ctx)
        raise EncodeError(REASON_NO_UNION_BRANCH, 0,
                          "union index matched no branch (%r)" % (tag,))

    def enc_fast(s, buf, bit, ctx):
        tag = index(s)
        if tag == "left":
            return lef(s, buf, bit, ctx)
        if tag == "right":
            return ref_(s, buf, bit, ctx)
        raise EncodeError(REASON_NO_UNION_BRANCH, bit,
                          "union index matched no branch (%r)" % (tag,))

    def dec_bits(bits, ctx):
        v, _, _ = peek_dec(bits, ctx)
        tag = classify(v)
        if tag == "left":
            return ld(bits, ctx)
        if tag == "right":
            return rd(bits, ctx)
        raise DecodeError(REASON_NO_UNION_BRANCH, 0,
                          "discriminator matched no branch for %r" % (v,))

    def dec_fast(buf, bit, ctx):
        v, _, _ = peek_df(buf, bit, ctx)
        tag = classify(v)
        if tag == "left":
            return ldf(buf, bit, ctx)
        if tag == "right":
            return rdf(buf, bit, ctx)
        raise DecodeError(REASON_NO_UNION_BRANCH, bit,
                          "discriminator matched no branch for %r" % (v,))

    relate = None
    if left.relate is not None and right.relate is not None:
        lr, rr = left.relate, right.relate

        def relate(s, ctx):
            yield from lr(s, ctx)
            yield from rr(s, ctx)

    lm, rm = left.meta, right.meta
    meta = FormatMeta(
        name or ("(%s | %s)" % (lm.name, rm.name)),
        min(lm.min_bits, rm.min_bits),
        None if (lm.max_bits is None or rm.max_bits is None) else max(lm.max_bits, rm.max_bits),
        ("union", lm.structure, rm.structure),
    )
    return Format(enc_bits, dec_bits, enc_fast, dec_fast, meta, relate)


# ----------------------------------------------------------------------
# Field chains: named fields, dependent fields, records.
# ----------------------------------------------------------------------

class Views:
    """Name-based access to the views bound so far, handed to callable
    count accessors of dependent fields."""

    __slots__ = ("_idx", "_vals")

    def __init__(self, idx, vals):
        self._idx = idx
        self._vals = vals

    def __getattr__(self, name):
        try:
            return self._vals[self._idx[name]]
        except KeyError:
            raise AttributeError(name) from None

    def __getitem__(self, name):
        return self._vals[self._idx[name]]


class _DepCount:
    """Field spec: a list whose element count is an earlier view (by name)
    or a function of the views bound so far."""

    __slots__ = ("count", "elem")

    def __init__(self, count, elem: Format):
        self.count = count
        self.elem = elem


class _DepBytes:
    """Field spec: a byte string whose length is an earlier view or a
    function of the views bound so far."""

    __slots__ = ("count",)

    def __init__(self, count):
        self.count = count


def dep_count(count, elem: Format) -> _DepCount:
    """List field with a dependent element count.

    `count` names an earlier view or is a callable over a Views object.
    Decoding reads exactly that many elements (a negative count is a
    constraint-violation); encoding requires the projected sequence to
    have exactly that length.  Decoded values are tuples.
    """
    return _DepCount(count, elem)


def dep_bytes(count) -> _DepBytes:
    """Byte-string field with a dependent length, same count rules as
    dep_count.  Works at any bit alignment; byte-aligned reads are fast."""
    return _DepBytes(count)


class _Entry:
    __slots__ = ("kind", "name", "spec", "projection")

    def __init__(self, kind, name, spec, projection):
        self.kind = kind          # "field" | "skip" | "span"
        self.name = name
        self.spec = spec
        self.projection = projection


class FieldChain:
    """Ordered, named fields building up to a record format.

    Encode order, decode order and declaration order are one and the same.
    Close the chain with .done(assemble, validate) — or record(chain, ...).
    """

    def __init__(self, name: str):
        self.name = name
        self._entries: List[_Entry] = []

    def field(self, name: str, spec, projection: Callable[[Any], Any]) -> "FieldChain":
        """Named field: spec is a Format or a dep_count/dep_bytes spec;
        projection extracts the field's value from the source record."""
        if not isinstance(spec, (Format, _DepCount, _DepBytes)):
            raise TypeError("field spec must be a Format or dep_count/dep_bytes")
        if not callable(projection):
            raise TypeError("field projection must be callable")
        self._entries.append(_Entry("field", name, spec, projection))
        return self

    def skip(self, format: Format) -> "FieldChain":
        """Unnamed region: encoded from nothing (constants, padding),
        decoded and discarded — binds no view."""
        if not isinstance(format, Format):
            raise TypeError("skip takes a Format")
        self._entries.append(_Entry("skip", None, format, None))
        return self

    def span(self, marker) -> "FieldChain":
        """Insert a region-spanning derived field (see the checksum
        module); at most one per chain."""
        self._entries.append(_Entry("span", None, marker, None))
        return self

    def done(self, assemble=None, validate=None) -> Format:
        return record(self, assemble=assemble, validate=validate)


# -- compilation --------------------------------------------------------

class CompiledBody(NamedTuple):
    """Interpreter bundles for a run of chain entries; the span marker
    protocol receives and returns these."""

    enc_bit: tuple        # runner(s, views, pieces, ctx) -> ctx
    dec_bit: tuple        # runner(cur, views, ctx) -> (cur, ctx)
    enc_fast: tuple       # runner(s, buf, bit, views, ctx) -> (bit, ctx)
    dec_fast: tuple       # runner(buf, bit, views, ctx) -> (bit, ctx)
    relate: Optional[tuple]   # entry(s, views, ctx) -> yields (piece, ctx)
    min_bits: int
    max_bits: Optional[int]
    exact_bits: Optional[int]


def _relate_seq(entries, s, views, ctx):
    """Drive a tuple of relate entries over a shared views list, yielding
    every concatenation of per-entry targets.  Entries append their own
    views before each yield and pop them after."""
    n = len(entries)

    def go(i, prefix, c):
        if i == n:
            yield prefix, c
            return
        for piece, c2 in entries[i](s, views, c):
            yield from go(i + 1, bs_append(prefix, piece), c2)

    yield from go(0, bs_empty(), ctx)


def _resolve_count(count, idx):
    """Turn a count reference (view name, (view name, delta) pair, or
    callable over Views) into a fast accessor over the raw views list."""
    if isinstance(count, str):
        i = idx[count]
        return lambda vals: vals[i]
    if isinstance(count, tuple) and len(count) == 2 and isinstance(count[0], str):
        i = idx[count[0]]
        delta = count[1]
        return lambda vals: vals[i] + delta
    if callable(count):
        new = object.__new__     # sidestep Views.__init__ on the hot path

        def accessor(vals):
            v = new(Views)
            v._idx = idx
            v._vals = vals
            return count(v)

        return accessor
    raise TypeError("count must be a view name or a callable")


def _generic_field_runners(name, fmt: Format, projection, bind: bool):
    enc_b, dec_b = fmt.enc_bits, fmt.dec_bits
    enc_f, dec_f = fmt.enc_fast, fmt.dec_fast

    if bind:
        def enc_bit(s, views, pieces, ctx):
            v = projection(s)
            t, ctx = enc_b(v, ctx)
            pieces.append(t)
            views.append(v)
            return ctx

        def dec_bit(cur, views, ctx):
            v, rest, ctx = dec_b(cur, ctx)
            views.append(v)
            return rest, ctx

        def enc_fast(s, buf, bit, views, ctx):
            v = projection(s)
            bit, ctx = enc_f(v, buf, bit, ctx)
            views.append(v)
            return bit, ctx

        def dec_fast(buf, bit, views, ctx):
            v, bit, ctx = dec_f(buf, bit, ctx)
            views.append(v)
            return bit, ctx
    else:
        def enc_bit(s, views, pieces, ctx):
            t, ctx = enc_b(None, ctx)
            pieces.append(t)
            return ctx

        def dec_bit(cur, views, ctx):
            _, rest, ctx = dec_b(cur, ctx)
            return rest, ctx

        def enc_fast(s, buf, bit, views, ctx):
            return enc_f(None, buf, bit, ctx)

        def dec_fast(buf, bit, views, ctx):
            _, bit, ctx = dec_f(buf, bit, ctx)
            return bit, ctx

    relate = None
    if fmt.relate is not None:
        inner_rel = fmt.relate
        if bind:
            def relate(s, views, ctx):
                v = projection(s)
                for piece, c2 in inner_rel(v, ctx):
                    views.append(v)
                    yield piece, c2
                    views.pop()
        else:
            def relate(s, views, ctx):
                yield from inner_rel(None, ctx)

    return enc_bit, dec_bit, enc_fast, dec_fast, relate


def _dep_count_runners(name, spec: _DepCount, projection, idx):
    accessor = _resolve_count(spec.count, idx)
    elem = spec.elem
    e_enc_b, e_dec_b = elem.enc_bits, elem.dec_bits
    e_enc_f, e_dec_f = elem.enc_fast, elem.dec_fast

    def enc_bit(s, views, pieces, ctx):
        xs = projection(s)
        n = accessor(views)
        if n < 0 or len(xs) != n:
            raise EncodeError(REASON_CONSTRAINT, 0,
                              "%s: %d elements, count says %d" % (name, len(xs), n))
        t = bs_empty()
        try:
            for x in xs:
                piece, ctx = e_enc_b(x, ctx)
                t = bs_append(t, piece)
        except CodecError as err:
            err.bit_offset += t.length_bits
            raise
        pieces.append(t)
        views.append(tuple(xs))
        return ctx

    def dec_bit(cur, views, ctx):
        n = accessor(views)
        if n < 0:
            raise DecodeError(REASON_CONSTRAINT, 0, "%s: negative count %d" % (name, n))
        out = []
        start = cur.length_bits
        try:
            for _ in range(n):
                v, cur, ctx = e_dec_b(cur, ctx)
                out.append(v)
        except CodecError as err:
            err.bit_offset += start - cur.length_bits
            raise
        views.append(tuple(out))
        return cur, ctx

    def enc_fast(s, buf, bit, views, ctx):
        xs = projection(s)
        n = accessor(views)
        if n < 0 or len(xs) != n:
            raise EncodeError(REASON_CONSTRAINT, bit,
                              "%s: %d elements, count says %d" % (name, len(xs), n))
        for x in xs:
            bit, ctx = e_enc_f(x, buf, bit, ctx)
        views.append(tuple(xs))
        return bit, ctx

    def dec_fast(buf, bit, views, ctx):
        n = accessor(views)
        if n < 0:
            raise DecodeError(REASON_CONSTRAINT, bit, "%s: negative count %d" % (name, n))
        out = []
        for _ in range(n):
            v, bit, ctx = e_dec_f(buf, bit, ctx)
            out.append(v)
        views.append(tuple(out))
        return bit, ctx

    relate = None
    if elem.relate is not None:
        e_rel = elem.relate

        def relate(s, views, ctx):
            xs = tuple(projection(s))
            n = accessor(views)
            if n < 0 or len(xs) != n:
                return

            def prod(i, prefix, c):
                if i == n:
                    views.append(xs)
                    yield prefix, c
                    views.pop()
                    return
                for piece, c2 in e_rel(xs[i], c):
                    yield from prod(i + 1, bs_append(prefix, piece), c2)

            yield from prod(0, bs_empty(), ctx)

    em = elem.meta
    min_bits = 0
    max_bits = 0 if em.max_bits == 0 else None
    return (enc_bit, dec_bit, enc_fast, dec_fast, relate), min_bits, max_bits


def _dep_bytes_runners(name, spec: _DepBytes, projection, idx):
    accessor = _resolve_count(spec.count, idx)

    def enc_bit(s, views, pieces, ctx):
        data = projection(s)
        n = accessor(views)
        if n < 0 or len(data) != n:
            raise EncodeError(REASON_CONSTRAINT, 0,
                              "%s: %d bytes, count says %d" % (name, len(data), n))
        pieces.append(BitString(int.from_bytes(data, "big"), 8 * n))
        views.append(bytes(data))
        return ctx

    def dec_bit(cur, views, ctx):
        n = accessor(views)
        if n < 0:
            raise DecodeError(REASON_CONSTRAINT, 0, "%s: negative length %d" % (name, n))
        w = 8 * n
        if cur.length_bits < w:
            raise DecodeError(REASON_SHORT_INPUT, cur.length_bits,
                              "%s: need %d bytes" % (name, n))
        head = cur._value >> (cur.length_bits - w) if w else 0
        views.append(head.to_bytes(n, "big"))
        return BitString(cur._value - (head << (cur.length_bits - w)),
                         cur.length_bits - w), ctx

    def enc_fast(s, buf, bit, views, ctx):
        data = projection(s)
        n = accessor(views)
        if n < 0 or len(data) != n:
            raise EncodeError(REASON_CONSTRAINT, bit,
                              "%s: %d bytes, count says %d" % (name, len(data), n))
        if bit + 8 * n > len(buf) << 3:
            raise EncodeError(REASON_OVERFLOW, len(buf) << 3, "write past capacity")
        if bit & 7 == 0:
            byte = bit >> 3
            buf[byte : byte + n] = data
        else:
            _write_span(buf, bit, int.from_bytes(data, "big"), 8 * n)
        views.append(bytes(data))
        return bit + 8 * n, ctx

    def dec_fast(buf, bit, views, ctx):
        n = accessor(views)
        if n < 0:
            raise DecodeError(REASON_CONSTRAINT, bit, "%s: negative length %d" % (name, n))
        end = bit + 8 * n
        if end > len(buf) << 3:
            raise DecodeError(REASON_SHORT_INPUT, len(buf) << 3,
                              "%s: need %d bytes" % (name, n))
        if bit & 7 == 0:
            byte = bit >> 3
            views.append(bytes(buf[byte : byte + n]))
        else:
            views.append(_read_span(buf, bit, 8 * n).to_bytes(n, "big"))
        return end, ctx

    def relate(s, views, ctx):
        data = bytes(projection(s))
        n = accessor(views)
        if n < 0 or len(data) != n:
            return
        views.append(data)
        yield BitString(int.from_bytes(data, "big"), 8 * n), ctx
        views.pop()

    return (enc_bit, dec_bit, enc_fast, dec_fast, relate), 0, None


# -- fused runs of fixed-width primitives --------------------------------

def _make_fused_runners(items):
    """items: list of (entry, fuse, bind) for consecutive fixed-width
    primitives.  Builds one encode and one decode runner operating on a
    single integer window, plus per-entry relate entries."""
    width = sum(f[1] for _, f, _ in items)
    base = 0
    enc_ops = []
    dec_ops = []
    pos = 0
    for entry, (kind, w, aux), bind in items:
        shift = width - pos - w
        mask = (1 << w) - 1
        field_off = pos
        if kind == "const":
            base |= aux << shift
            dec_ops.append(("c", shift, mask, aux, field_off,
                            entry.name or "constant"))
        elif kind == "pad":
            pass
        elif kind == "int":
            enc_ops.append(("i", shift, mask, entry.projection, None, field_off, entry.name))
            dec_ops.append(("i", shift, mask, None, field_off, entry.name))
        elif kind == "nat":
            enc_ops.append(("n", shift, mask, entry.projection, None, field_off, entry.name))
            dec_ops.append(("i", shift, mask, None, field_off, entry.name))
        elif kind == "bool":
            enc_ops.append(("b", shift, mask, entry.projection, None, field_off, entry.name))
            dec_ops.append(("b", shift, mask, None, field_off, entry.name))
        elif kind == "enum":
            by_code, by_name = aux
            enc_ops.append(("e", shift, mask, entry.projection, by_name, field_off, entry.name))
            dec_ops.append(("e", shift, mask, by_code, field_off, entry.name))
        elif kind == "bytes":
            enc_ops.append(("y", shift, mask, entry.projection, aux, field_off, entry.name))
            dec_ops.append(("y", shift, mask, aux, field_off, entry.name))
        else:
            raise AssertionError("unknown fuse kind %r" % kind)
        pos += w
    return (_gen_fused_encode(width, base, enc_ops),
            _gen_fused_decode(width, dec_ops),
            width)


def _window_expr(shift: int, mask: int) -> str:
    if shift:
        return "(chunk >> %d) & 0x%x" % (shift, mask)
    return "chunk & 0x%x" % mask


def _gen_fused_encode(width, base, enc_ops):
    """Specialize one fused encode window into straight-line code.  The
    generated function validates every field in window order before the
    capacity check, exactly like the per-field path would."""
    ns = {"EncodeError": EncodeError, "_write_span": _write_span,
          "_ifb": int.from_bytes}
    src = ["def enc_fast(s, buf, bit, views, ctx):",
           "    chunk = 0x%x" % base if base else "    chunk = 0"]
    bound = []
    for i, (mode, shift, mask, projection, aux, off, fname) in enumerate(enc_ops):
        ns["P%d" % i] = projection
        src.append("    v%d = P%d(s)" % (i, i))
        v = "v%d" % i
        bound.append(v)
        at = "bit + %d" % off if off else "bit"
        sh = " << %d" % shift if shift else ""
        if mode == "i":
            ns["M%d" % i] = fname + ": %r out of range"
            src += ["    if %s < 0 or %s > 0x%x:" % (v, v, mask),
                    "        raise EncodeError('%s', %s, M%d %% (%s,))"
                    % (REASON_CONSTRAINT, at, i, v),
                    "    chunk |= %s%s" % (v, sh)]
        elif mode == "n":
            src.append("    chunk |= (%s & 0x%x)%s" % (v, mask, sh))
        elif mode == "b":
            src.append("    if %s:" % v)
            src.append("        chunk |= 0x%x" % (1 << shift))
        elif mode == "y":
            ns["M%d" % i] = fname + ": expected %d bytes, got %%d" % aux
            src += ["    if len(%s) != %d:" % (v, aux),
                    "        raise EncodeError('%s', %s, M%d %% (len(%s),))"
                    % (REASON_CONSTRAINT, at, i, v),
                    "    chunk |= _ifb(%s, 'big')%s" % (v, sh)]
        else:  # enum
            ns["T%d" % i] = aux
            ns["M%d" % i] = fname + ": %r not in table"
            src += ["    code = T%d.get(%s)" % (i, v),
                    "    if code is None:",
                    "        raise EncodeError('%s', %s, M%d %% (%s,))"
                    % (REASON_UNKNOWN_ENUM, at, i, v),
                    "    chunk |= code%s" % sh]
    if bound:
        src.append("    views += (%s,)" % ", ".join(bound))
    src += ["    if bit + %d > len(buf) << 3:" % width,
            "        raise EncodeError('%s', len(buf) << 3, 'write past capacity')"
            % REASON_OVERFLOW]
    if width & 7 == 0:
        src += ["    if bit & 7 == 0:",
                "        b0 = bit >> 3",
                "        buf[b0 : b0 + %d] = chunk.to_bytes(%d, 'big')"
                % (width >> 3, width >> 3),
                "    else:",
                "        _write_span(buf, bit, chunk, %d)" % width]
    else:
        src.append("    _write_span(buf, bit, chunk, %d)" % width)
    src.append("    return bit + %d, ctx" % width)
    exec(compile("\n".join(src), "<fused window>", "exec"), ns)
    return ns["enc_fast"]


def _gen_fused_decode(width, dec_ops):
    """Specialize one fused decode window into straight-line code."""
    ns = {"DecodeError": DecodeError, "_read_span": _read_span,
          "_ifb": int.from_bytes}
    src = ["def dec_fast(buf, bit, views, ctx):",
           "    end = bit + %d" % width,
           "    if end > len(buf) << 3:",
           "        raise DecodeError('%s', len(buf) << 3, 'need %d bits')"
           % (REASON_SHORT_INPUT, width)]
    if width & 7 == 0:
        src += ["    if bit & 7 == 0:",
                "        b0 = bit >> 3",
                "        chunk = _ifb(buf[b0 : b0 + %d], 'big')" % (width >> 3),
                "    else:",
                "        chunk = _read_span(buf, bit, %d)" % width]
    else:
        src.append("    chunk = _read_span(buf, bit, %d)" % width)
    bound = []
    for i, (mode, shift, mask, aux, off, fname) in enumerate(dec_ops):
        ex = _window_expr(shift, mask)
        at = "bit + %d" % off if off else "bit"
        if mode == "i":
            bound.append(ex)
        elif mode == "b":
            bound.append("%s == 1" % _window_expr(shift, 1))
        elif mode == "y":
            bound.append("(%s).to_bytes(%d, 'big')" % (ex, aux))
        elif mode == "e":
            # lookups and checks run in field order; values bind at the end
            ns["T%d" % i] = aux
            ns["M%d" % i] = fname + ": code %d not in table"
            src += ["    v%d = T%d.get(%s)" % (i, i, ex),
                    "    if v%d is None:" % i,
                    "        raise DecodeError('%s', %s, M%d %% (%s,))"
                    % (REASON_UNKNOWN_ENUM, at, i, ex)]
            bound.append("v%d" % i)
        else:  # const
            ns["M%d" % i] = fname + ": read %d, expected " + str(aux)
            src += ["    if %s != 0x%x:" % (ex, aux),
                    "        raise DecodeError('%s', %s, M%d %% (%s,))"
                    % (REASON_BAD_CONSTANT, at, i, ex)]
    if bound:
        src.append("    views += (%s,)" % ", ".join(bound))
    src.append("    return end, ctx")
    exec(compile("\n".join(src), "<fused window>", "exec"), ns)
    return ns["dec_fast"]


def _compile_entries(entries, idx) -> CompiledBody:
    """Compile a flat run of field/skip entries (no spans) into runner
    bundles.  The bit-level runners stay strictly compositional; the fast
    runners fuse consecutive fixed-width primitives into integer windows.
    """
    enc_bit: List = []
    dec_bit: List = []
    enc_fast: List = []
    dec_fast: List = []
    relate: List = []
    relate_ok = True
    min_bits = 0
    max_bits: Optional[int] = 0
    exact: Optional[int] = 0

    pending: List = []   # (entry, fuse, bind) awaiting fusion

    def flush():
        if not pending:
            return
        ef, df, _w = _make_fused_runners(pending)
        enc_fast.append(ef)
        dec_fast.append(df)
        pending.clear()

    for entry in entries:
        spec = entry.spec
        if entry.kind == "field" and isinstance(spec, _DepCount):
            flush()
            runners, mn, mx = _dep_count_runners(entry.name, spec, entry.projection, idx)
        elif entry.kind == "field" and isinstance(spec, _DepBytes):
            flush()
            runners, mn, mx = _dep_bytes_runners(entry.name, spec, entry.projection, idx)
        else:
            fmt: Format = spec
            bind = entry.kind == "field"
            runners = _generic_field_runners(entry.name, fmt, entry.projection, bind)
            mn, mx = fmt.meta.min_bits, fmt.meta.max_bits
            if fmt._fuse is not None and (bind or fmt._fuse[0] in ("const", "pad")):
                # fast path: absorb into the current fused run (skips of
                # value-carrying primitives stay generic so nothing lands
                # in the views list)
                pending.append((entry, fmt._fuse, bind))
                enc_bit.append(runners[0])
                dec_bit.append(runners[1])
                if runners[4] is None:
                    relate_ok = False
                else:
                    relate.append(runners[4])
                min_bits += mn
                max_bits = _sum_max(max_bits, mx)
                exact = None if (exact is None or mn != mx) else exact + mn
                continue
            flush()
        eb, db, ef, df, rel = runners
        enc_bit.append(eb)
        dec_bit.append(db)
        enc_fast.append(ef)
        dec_fast.append(df)
        if rel is None:
            relate_ok = False
        else:
            relate.append(rel)
        min_bits += mn
        max_bits = _sum_max(max_bits, mx)
        exact = None if (exact is None or mn != mx) else exact + mn
    flush()

    return CompiledBody(
        tuple(enc_bit), tuple(dec_bit), tuple(enc_fast), tuple(dec_fast),
        tuple(relate) if relate_ok else None,
        min_bits, max_bits, exact,
    )


def record(chain: FieldChain, assemble=None, validate=None) -> Format:
    """Close a FieldChain into a record Format.

    `assemble` turns the tuple of decoded views into the record value; a
    NamedTuple class whose fields match the view names (in order) gets a
    fast positional path, and None means "the views tuple itself".
    `validate` is a predicate over the assembled value, applied on both
    directions; rejection is a constraint-violation at the record start.
    """
    entries = chain._entries
    if not entries:
        raise ValueError("empty field chain: %r" % chain.name)

    names = [e.name for e in entries if e.kind == "field"]
    if len(set(names)) != len(names):
        raise ValueError("duplicate field names in %r" % chain.name)
    idx = {n: i for i, n in enumerate(names)}
    vt = namedtuple("%s_views" % chain.name.replace("-", "_"), names)

    spans = [i for i, e in enumerate(entries) if e.kind == "span"]
    if len(spans) > 1:
        raise ValueError("at most one checksum span per chain")
    if spans:
        at = spans[0]
        before = _compile_entries(entries[:at], idx)
        after = _compile_entries(entries[at + 1 :], idx)
        body = entries[at].spec.build(before, after)
    else:
        body = _compile_entries(entries, idx)

    # Fast assembly: a NamedTuple class matching the view names gets built
    # positionally, skipping the intermediate views tuple.
    if assemble is None:
        make = vt._make
    elif getattr(assemble, "_fields", None) == tuple(names):
        make = assemble._make
    else:
        base_make = vt._make

        def make(vals):
            return assemble(base_make(vals))

    enc_bit_runs = body.enc_bit
    dec_bit_runs = body.dec_bit
    enc_fast_runs = body.enc_fast
    dec_fast_runs = body.dec_fast

    def enc_bits(s, ctx):
        views: List = []
        pieces: List[BitString] = []
        try:
            for run in enc_bit_runs:
                ctx = run(s, views, pieces, ctx)
        except CodecError as err:
            err.bit_offset += sum(p.length_bits for p in pieces)
            raise
        if validate is not None and not validate(make(views)):
            raise EncodeError(REASON_CONSTRAINT, 0,
                              "%s: record predicate rejected value" % chain.name)
        out = bs_empty()
        for p in pieces:
            out = bs_append(out, p)
        return out, ctx

    def dec_bits(bits, ctx):
        views: List = []
        cur = bits
        try:
            for run in dec_bit_runs:
                cur, ctx = run(cur, views, ctx)
        except CodecError as err:
            err.bit_offset += bits.length_bits - cur.length_bits
            raise
        v = make(views)
        if validate is not None and not validate(v):
            raise DecodeError(REASON_CONSTRAINT, 0,
                              "%s: record predicate rejected decoded value" % chain.name)
        return v, cur, ctx

    def enc_fast(s, buf, bit, ctx):
        views: List = []
        start = bit
        for run in enc_fast_runs:
            bit, ctx = run(s, buf, bit, views, ctx)
        if validate is not None and not validate(make(views)):
            raise EncodeError(REASON_CONSTRAINT, start,
                              "%s: record predicate rejected value" % chain.name)
        return bit, ctx

    def dec_fast(buf, bit, ctx):
        views: List = []
        start = bit
        for run in dec_fast_runs:
            bit, ctx = run(buf, bit, views, ctx)
        v = make(views)
        if validate is not None and not validate(v):
            raise DecodeError(REASON_CONSTRAINT, start,
                              "%s: record predicate rejected decoded value" % chain.name)
        return v, bit, ctx

    if len(dec_fast_runs) == 1:
        # single compiled runner (common once fields fuse): drop the loop
        dec_run0 = dec_fast_runs[0]

        def dec_fast(buf, bit, ctx):          # noqa: F811
            views: List = []
            end, ctx = dec_run0(buf, bit, views, ctx)
            v = make(views)
            if validate is not None and not validate(v):
                raise DecodeError(REASON_CONSTRAINT, bit,
                                  "%s: record predicate rejected decoded value"
                                  % chain.name)
            return v, end, ctx

    relate = None
    if body.relate is not None:
        rel_entries = body.relate

        def relate(s, ctx):
            views: List = []
            for piece, c2 in _relate_seq(rel_entries, s, views, ctx):
                if validate is None or validate(make(views)):
                    yield piece, c2

    meta = FormatMeta(chain.name, body.min_bits, body.max_bits,
                      ("record", chain.name))
    return Format(enc_bits, dec_bits, enc_fast, dec_fast, meta, relate)
