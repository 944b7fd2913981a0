"""Shared fixtures for the test suite.

Holds the worked example formats (station telemetry readings, card-suit
codes), random record generators for the network formats, and the small
exhaustively-checkable format suite used by the oracle and differential
tests.  Everything is deterministic: generators take an explicit RNG.
"""

from typing import NamedTuple

from biformat import (
    FieldChain,
    bits,
    bool_bit,
    bytes_exact,
    const,
    dep_count,
    discriminator,
    enum_format,
    epsilon,
    fixed_list,
    nat,
    project,
    restrict,
    seq,
    union,
    unused,
    word,
)
from biformat.netformats import (
    ArpPacket,
    EthernetFrame,
    Ipv4Header,
    PseudoHeader,
    TcpSegment,
    UdpDatagram,
    arp_format,
    ethernet_format,
    ipv4_format,
    tcp_format,
    udp_format,
)
from biformat.oracle import relation_format


# ----------------------------------------------------------------------
# Telemetry readings: the library's worked example, in four stages.
# ----------------------------------------------------------------------

class ReadingPlain(NamedTuple):
    station_id: int
    data: int


class ReadingTagged(NamedTuple):
    station_id: int
    kind: str
    data: int


class ReadingList(NamedTuple):
    station_id: int
    count: int
    data: tuple


KIND_CODES = {"TEMP": 0b00, "HUMIDITY": 0b01}

VERSION_YEAR = 0x7E2


def reading_plain_format():
    """Two 16-bit words: a station id and one measurement."""
    return (
        FieldChain("reading-plain")
        .field("station_id", word(16), lambda r: r.station_id)
        .field("data", word(16), lambda r: r.data)
        .done(assemble=ReadingPlain)
    )


def reading_padded_format():
    """Same record with a reserved byte after the station id.  The
    encoder pins it to 0x00; the decoder accepts anything there."""
    return (
        FieldChain("reading-padded")
        .field("station_id", word(16), lambda r: r.station_id)
        .skip(unused(8))
        .field("data", word(16), lambda r: r.data)
        .done(assemble=ReadingPlain)
    )


def reading_tagged_format():
    """Adds a 16-bit version constant and a 2-bit measurement tag; the
    measurement itself shrinks to 14 bits."""
    return (
        FieldChain("reading-tagged")
        .skip(const(16, VERSION_YEAR))
        .field("station_id", word(16), lambda r: r.station_id)
        .skip(unused(8))
        .field("kind", enum_format(2, KIND_CODES, "kind"), lambda r: r.kind)
        .field("data", word(14), lambda r: r.data)
        .done(assemble=ReadingTagged)
    )


def reading_list_format():
    """A length-prefixed list of 16-bit measurements.  The 8-bit length
    only identifies the list when it is below 2^8, so the record
    predicate rejects anything longer."""
    return (
        FieldChain("reading-list")
        .field("station_id", word(16), lambda r: r.station_id)
        .skip(unused(8))
        .field("count", nat(8), lambda r: len(r.data))
        .field("data", dep_count("count", word(16)), lambda r: r.data)
        .done(assemble=ReadingList,
              validate=lambda r: r.count == len(r.data) and r.count < 256)
    )


def random_reading_plain(rng):
    return ReadingPlain(rng.randrange(1 << 16), rng.randrange(1 << 16))


def random_reading_tagged(rng):
    return ReadingTagged(rng.randrange(1 << 16),
                         rng.choice(("TEMP", "HUMIDITY")),
                         rng.randrange(1 << 14))


def random_reading_list(rng, max_len=8):
    data = tuple(rng.randrange(1 << 16) for _ in range(rng.randrange(max_len + 1)))
    return ReadingList(rng.randrange(1 << 16), len(data), data)


# ----------------------------------------------------------------------
# Card-suit codes: a deliberately ambiguous variable-length format.
# ----------------------------------------------------------------------

CLUB, DIAMOND, HEART, SPADE = "club", "diamond", "heart", "spade"
SUITS = (CLUB, DIAMOND, HEART, SPADE)

SUIT_CODES = {CLUB: "11", DIAMOND: "0", HEART: "1", SPADE: "10"}


def suit_format():
    """Each suit maps to a 1- or 2-bit code.  Prefix-ambiguous on
    purpose: club = heart + spade's first bit, and so on."""
    return relation_format([(s, bits(SUIT_CODES[s])) for s in SUITS],
                           name="suit")


def suit_pair_format():
    """Two suits in sequence — the concatenation collides: (club,
    diamond) and (heart, spade) both produce 110."""
    one = suit_format()
    return seq(one, one)


ALL_SUIT_PAIRS = tuple((a, b) for a in SUITS for b in SUITS)


# ----------------------------------------------------------------------
# Small formats with exhaustively checkable relations (widths <= 4 bits,
# except where noted).  Each entry: (label, format, sources, sweep_bits).
# ----------------------------------------------------------------------

def small_format_suite():
    tag2 = enum_format(2, {"lo": 0, "hi": 3}, "tag2")
    gate = discriminator(word(1), lambda b: "left" if b == 0 else "right")
    pick = union(
        project(word(2), lambda s: s, name="low-half"),
        project(word(2), lambda s: s, name="high-half"),
        lambda s: "left" if s < 2 else "right",
        gate,
        name="halved",
    )
    # the union above is honest: values 0..1 start with bit 0, 2..3 with 1

    suite = [
        ("epsilon", epsilon(), [None], 3),
        ("word0", word(0), [0], 3),
        ("word1", word(1), [0, 1], 4),
        ("word2", word(2), [0, 1, 2, 3], 5),
        ("word3", word(3), list(range(8)), 6),
        ("word4", word(4), list(range(16)), 7),
        ("nat2", nat(2), list(range(4)), 5),
        ("const3", const(3, 5), [None], 6),
        ("unused2", unused(2), [None], 5),
        ("bool", bool_bit(), [False, True], 4),
        ("enum2", tag2, ["lo", "hi"], 5),
        ("bytes1", bytes_exact(1), [bytes([v]) for v in (0, 1, 127, 255)], 11),
        ("pair", seq(word(2), bool_bit()),
         [(w, b) for w in range(4) for b in (False, True)], 6),
        ("projected", project(word(3), lambda s: s & 7, name="low3"),
         list(range(8)), 6),
        ("evens-only", restrict(word(3), lambda v: v % 2 == 0),
         list(range(8)), 6),
        ("list2x2", fixed_list(word(2), 2),
         [(a, b) for a in range(4) for b in range(4)], 7),
        ("halved-union", pick, list(range(4)), 6),
        ("const-then-word", seq(const(2, 1), word(2)),
         [(None, w) for w in range(4)], 7),
        ("padded-flag", seq(unused(2), bool_bit()),
         [(None, False), (None, True)], 6),
    ]
    return suite


# ----------------------------------------------------------------------
# Random network records.  Generators return (format, record) so the
# caller never has to rebuild pseudo headers by hand.
# ----------------------------------------------------------------------

def random_mac(rng):
    return bytes(rng.randrange(256) for _ in range(6))


def random_ip(rng):
    return bytes(rng.randrange(256) for _ in range(4))


def random_ethernet(rng):
    if rng.random() < 0.5:
        n = rng.randrange(0, 120)
        tag = n if n <= 1500 else 1500
    else:
        tag = rng.choice((0x0800, 0x0806, 0x86DD, 1536, 0xFFFF))
        n = rng.randrange(0, 120)
    payload = bytes(rng.randrange(256) for _ in range(n))
    if tag <= 1500:
        tag = len(payload)
    return ethernet_format(), EthernetFrame(random_mac(rng), random_mac(rng),
                                            tag, payload)


def random_arp(rng):
    op = rng.choice((1, 2))
    return arp_format(), ArpPacket(
        rng.choice((1, 6)), 0x0800, 6, 4, op,
        random_mac(rng), random_ip(rng), random_mac(rng), random_ip(rng))


def random_ipv4(rng, max_options=3):
    nopts = rng.randrange(max_options + 1)
    options = tuple(rng.randrange(1 << 32) for _ in range(nopts))
    ihl = 5 + nopts
    return ipv4_format(), Ipv4Header(
        ihl=ihl,
        tos=rng.randrange(256),
        total_length=rng.randrange(4 * ihl, 1 << 16),
        identification=rng.randrange(1 << 16),
        df=rng.random() < 0.5,
        mf=rng.random() < 0.5,
        fragment_offset=rng.randrange(1 << 13),
        ttl=rng.randrange(256),
        protocol=rng.choice(("icmp", "tcp", "udp")),
        source=random_ip(rng),
        destination=random_ip(rng),
        options=options,
    )


def random_udp(rng, max_payload=64):
    payload = bytes(rng.randrange(256) for _ in range(rng.randrange(max_payload + 1)))
    length = 8 + len(payload)
    pseudo = PseudoHeader(random_ip(rng), random_ip(rng), 17, length)
    return udp_format(pseudo), UdpDatagram(
        rng.randrange(1 << 16), rng.randrange(1 << 16), length, payload)


def random_tcp(rng, max_payload=64, max_options=4):
    nopts = rng.randrange(max_options + 1)
    options = tuple(rng.randrange(1 << 32) for _ in range(nopts))
    data_offset = 5 + nopts
    payload = bytes(rng.randrange(256) for _ in range(rng.randrange(max_payload + 1)))
    seg_len = 4 * data_offset + len(payload)
    urg = rng.random() < 0.2
    pseudo = PseudoHeader(random_ip(rng), random_ip(rng), 6, seg_len)
    return tcp_format(pseudo, seg_len), TcpSegment(
        source_port=rng.randrange(1 << 16),
        dest_port=rng.randrange(1 << 16),
        seq_number=rng.randrange(1 << 32),
        ack_number=rng.randrange(1 << 32),
        data_offset=data_offset,
        urg=urg,
        ack=rng.random() < 0.5,
        psh=rng.random() < 0.5,
        rst=rng.random() < 0.5,
        syn=rng.random() < 0.5,
        fin=rng.random() < 0.5,
        window=rng.randrange(1 << 16),
        urgent_pointer=rng.randrange(1 << 16) if urg else 0,
        options=options,
        payload=payload,
    )


RANDOM_RECORD_MAKERS = {
    "ethernet": random_ethernet,
    "arp": random_arp,
    "ipv4": random_ipv4,
    "udp": random_udp,
    "tcp": random_tcp,
}


def fold_oracle(data: bytes) -> int:
    """Straight-loop one's-complement fold: walk 16-bit big-endian words
    (odd tail padded with a zero byte), add with end-around carry.
    Written independently of the library's modular-arithmetic version on
    purpose — the tests compare the two."""
    total = 0
    for i in range(0, len(data) - 1, 2):
        total += (data[i] << 8) | data[i + 1]
        if total > 0xFFFF:
            total = (total & 0xFFFF) + 1
    if len(data) & 1:
        total += data[-1] << 8
        if total > 0xFFFF:
            total = (total & 0xFFFF) + 1
    return total
