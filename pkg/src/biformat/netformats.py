"""The five classic packet formats, written as combinator compositions.

Each format is a single declarative chain — fields, constants, reserved
bits, dependent lengths and (for IPv4/UDP/TCP) a checksum span — from
which both the encoder and the decoder derive.  No hand-written byte
arithmetic appears outside the dependent-count expressions.

Design notes that affect observable behaviour:

  * Reserved/unused bits (IPv4 flag bit 48, TCP bits 100-105) are written
    as zero, accepted as anything, and not stored in the record, so
    re-encoding a decoded packet can differ at exactly those positions —
    and, because those bits sit inside the checksummed region, at the
    16-bit checksum slot as well (MASKED_BITS below covers both).
  * The TCP urgent pointer must be zero when URG is clear — stricter than
    RFC 793, but it keeps the format injective and round-trippable.
  * ARP is pinned to the Ethernet/IPv4 instantiation: the length fields
    drive the address field widths, and anything other than 6/4 decodes
    to absence.
  * UDP/TCP take their IP-layer pseudo header at construction time, so a
    format value is specific to one packet envelope; build one per packet
    (cheap) or per flow.
"""

from __future__ import annotations

from typing import NamedTuple, Optional, Tuple

from .base_formats import (
    bool_bit,
    bytes_exact,
    const,
    enum_format,
    rest_bytes,
    unused,
    word,
)
from .checksum import ip_checksum_format, pseudoheader_checksum_format
from .format_core import (
    FieldChain,
    Format,
    dep_bytes,
    dep_count,
    discriminator,
    union,
)

__all__ = [
    "EthernetFrame",
    "ArpPacket",
    "Ipv4Header",
    "UdpDatagram",
    "TcpSegment",
    "PseudoHeader",
    "ethernet_format",
    "arp_format",
    "ipv4_format",
    "udp_format",
    "tcp_format",
    "IP_PROTOCOL_NAMES",
    "FORMAT_NAMES",
    "FIELD_SCHEMAS",
    "MASKED_BITS",
]


# ----------------------------------------------------------------------
# Record types.  Field order matches wire order (minus derived and
# reserved positions), which also gives the chains their fast assembly.
# ----------------------------------------------------------------------

class EthernetFrame(NamedTuple):
    destination: bytes            # 6 bytes
    source: bytes                 # 6 bytes
    ethertype_or_length: int      # <=1500: payload length; >=1536: protocol
    payload: bytes


class ArpPacket(NamedTuple):
    hardware_type: int
    protocol_type: int
    hardware_len: int             # must be 6 (Ethernet)
    protocol_len: int             # must be 4 (IPv4)
    operation: int
    sender_hardware: bytes
    sender_protocol: bytes
    target_hardware: bytes
    target_protocol: bytes


class Ipv4Header(NamedTuple):
    ihl: int                      # header length in 32-bit words, 5..15
    tos: int
    total_length: int
    identification: int
    df: bool
    mf: bool
    fragment_offset: int
    ttl: int
    protocol: str                 # symbolic, see IP_PROTOCOL_NAMES
    source: bytes                 # 4 bytes
    destination: bytes            # 4 bytes
    options: tuple                # opaque 32-bit words


class UdpDatagram(NamedTuple):
    source_port: int
    dest_port: int
    length: int                   # 8 + len(payload)
    payload: bytes


class TcpSegment(NamedTuple):
    source_port: int
    dest_port: int
    seq_number: int
    ack_number: int
    data_offset: int              # 5 + len(options)
    urg: bool
    ack: bool
    psh: bool
    rst: bool
    syn: bool
    fin: bool
    window: int
    urgent_pointer: int           # must be 0 when urg is clear
    options: tuple                # opaque 32-bit words
    payload: bytes


class PseudoHeader(NamedTuple):
    """IP-layer envelope folded into UDP/TCP checksums, never emitted."""

    source_ip: bytes
    dest_ip: bytes
    protocol: int
    length: int

    def pack(self) -> bytes:
        if len(self.source_ip) != 4 or len(self.dest_ip) != 4:
            raise ValueError("pseudo header addresses must be 4 bytes")
        if not 0 <= self.length < 1 << 16:
            raise ValueError("pseudo header length out of range")
        return (bytes(self.source_ip) + bytes(self.dest_ip)
                + bytes((0, self.protocol))
                + self.length.to_bytes(2, "big"))


IP_PROTOCOL_NAMES = {"icmp": 1, "tcp": 6, "udp": 17}


# ----------------------------------------------------------------------
# Formats.
# ----------------------------------------------------------------------

def ethernet_format() -> Format:
    mac = bytes_exact(6)
    length_branch = (
        FieldChain("ethernet-length")
        .field("destination", mac, lambda f: f.destination)
        .field("source", mac, lambda f: f.source)
        .field("ethertype_or_length", word(16), lambda f: f.ethertype_or_length)
        .field("payload", dep_bytes("ethertype_or_length"), lambda f: f.payload)
        .done(assemble=EthernetFrame,
              validate=lambda f: f.ethertype_or_length == len(f.payload)
                                 and f.ethertype_or_length <= 1500)
    )
    protocol_branch = (
        FieldChain("ethernet-protocol")
        .field("destination", mac, lambda f: f.destination)
        .field("source", mac, lambda f: f.source)
        .field("ethertype_or_length", word(16), lambda f: f.ethertype_or_length)
        .field("payload", rest_bytes(), lambda f: f.payload)
        .done(assemble=EthernetFrame,
              validate=lambda f: f.ethertype_or_length >= 1536)
    )
    peek = (
        FieldChain("ethertype-peek")
        .skip(bytes_exact(12))
        .field("tag", word(16), lambda s: s)
        .done(assemble=lambda vw: vw.tag)
    )

    def branch_of(tag: int) -> Optional[str]:
        if tag <= 1500:
            return "left"
        if tag >= 1536:
            return "right"
        return None     # 1501..1535: the EtherType gap

    return union(length_branch, protocol_branch,
                 index=lambda f: branch_of(f.ethertype_or_length),
                 discriminate=discriminator(peek, branch_of),
                 name="ethernet")


def arp_format() -> Format:
    chain = (
        FieldChain("arp")
        .field("hardware_type", word(16), lambda p: p.hardware_type)
        .field("protocol_type", word(16), lambda p: p.protocol_type)
        .field("hardware_len", word(8), lambda p: p.hardware_len)
        .field("protocol_len", word(8), lambda p: p.protocol_len)
        .field("operation", word(16), lambda p: p.operation)
        .field("sender_hardware", dep_bytes("hardware_len"), lambda p: p.sender_hardware)
        .field("sender_protocol", dep_bytes("protocol_len"), lambda p: p.sender_protocol)
        .field("target_hardware", dep_bytes("hardware_len"), lambda p: p.target_hardware)
        .field("target_protocol", dep_bytes("protocol_len"), lambda p: p.target_protocol)
    )
    return chain.done(assemble=ArpPacket,
                      validate=lambda p: p.hardware_len == 6 and p.protocol_len == 4)


def ipv4_format() -> Format:
    before = (
        FieldChain("ipv4")
        .skip(const(4, 4))
        .field("ihl", word(4), lambda h: h.ihl)
        .field("tos", word(8), lambda h: h.tos)
        .field("total_length", word(16), lambda h: h.total_length)
        .field("identification", word(16), lambda h: h.identification)
        .skip(unused(1))
        .field("df", bool_bit(), lambda h: h.df)
        .field("mf", bool_bit(), lambda h: h.mf)
        .field("fragment_offset", word(13), lambda h: h.fragment_offset)
        .field("ttl", word(8), lambda h: h.ttl)
        .field("protocol", enum_format(8, IP_PROTOCOL_NAMES, name="ip-protocol"),
               lambda h: h.protocol)
    )
    after = (
        FieldChain("ipv4-tail")
        .field("source", bytes_exact(4), lambda h: h.source)
        .field("destination", bytes_exact(4), lambda h: h.destination)
        .field("options", dep_count(("ihl", -5), word(32)), lambda h: h.options)
    )

    def header_bytes(buf, base, avail):
        return 4 * (buf[base] & 0xF) if avail >= 1 else None

    chain = ip_checksum_format(before, after, coverage=header_bytes, name="ipv4")
    return chain.done(assemble=Ipv4Header,
                      validate=lambda h: h.ihl == 5 + len(h.options)
                                         and h.total_length >= 4 * h.ihl)


def udp_format(pseudo: PseudoHeader) -> Format:
    if pseudo.protocol != 17:
        raise ValueError("UDP pseudo header must carry protocol 17")
    before = (
        FieldChain("udp")
        .field("source_port", word(16), lambda d: d.source_port)
        .field("dest_port", word(16), lambda d: d.dest_port)
        .field("length", word(16), lambda d: d.length)
    )
    after = (
        FieldChain("udp-tail")
        .field("payload", dep_bytes(("length", -8)), lambda d: d.payload)
    )

    def datagram_bytes(buf, base, avail):
        return (buf[base + 4] << 8) | buf[base + 5] if avail >= 6 else None

    chain = pseudoheader_checksum_format(pseudo.pack(), before, after,
                                         coverage=datagram_bytes, name="udp")
    return chain.done(assemble=UdpDatagram,
                      validate=lambda d: d.length == 8 + len(d.payload)
                                         and d.length == pseudo.length)


def tcp_format(pseudo: PseudoHeader, segment_length: int) -> Format:
    if pseudo.protocol != 6:
        raise ValueError("TCP pseudo header must carry protocol 6")
    if pseudo.length != segment_length:
        raise ValueError("pseudo header length must equal segment_length")
    before = (
        FieldChain("tcp")
        .field("source_port", word(16), lambda t: t.source_port)
        .field("dest_port", word(16), lambda t: t.dest_port)
        .field("seq_number", word(32), lambda t: t.seq_number)
        .field("ack_number", word(32), lambda t: t.ack_number)
        .field("data_offset", word(4), lambda t: t.data_offset)
        .skip(unused(6))
        .field("urg", bool_bit(), lambda t: t.urg)
        .field("ack", bool_bit(), lambda t: t.ack)
        .field("psh", bool_bit(), lambda t: t.psh)
        .field("rst", bool_bit(), lambda t: t.rst)
        .field("syn", bool_bit(), lambda t: t.syn)
        .field("fin", bool_bit(), lambda t: t.fin)
        .field("window", word(16), lambda t: t.window)
    )
    after = (
        FieldChain("tcp-tail")
        .field("urgent_pointer", word(16), lambda t: t.urgent_pointer)
        .field("options", dep_count(("data_offset", -5), word(32)),
               lambda t: t.options)
        .field("payload", dep_bytes(lambda v: segment_length - 4 * v.data_offset),
               lambda t: t.payload)
    )
    chain = pseudoheader_checksum_format(pseudo.pack(), before, after,
                                         coverage=lambda buf, base, avail: segment_length,
                                         name="tcp")
    return chain.done(assemble=TcpSegment,
                      validate=lambda t: t.data_offset == 5 + len(t.options)
                                         and (t.urg or t.urgent_pointer == 0))


# ----------------------------------------------------------------------
# CLI-facing registry: stable field names/kinds and masked bit positions.
# ----------------------------------------------------------------------

FORMAT_NAMES = ("ethernet", "arp", "ipv4", "udp", "tcp")

# kind tags drive the CLI's text rendering/parsing:
#   int, bool, str, bytes (hex blob), mac (aa:bb:..), ip (dotted quad),
#   words (comma-separated 32-bit hex words)
FIELD_SCHEMAS = {
    "ethernet": (
        ("destination", "mac"), ("source", "mac"),
        ("ethertype_or_length", "int"), ("payload", "bytes"),
    ),
    "arp": (
        ("hardware_type", "int"), ("protocol_type", "int"),
        ("hardware_len", "int"), ("protocol_len", "int"), ("operation", "int"),
        ("sender_hardware", "mac"), ("sender_protocol", "ip"),
        ("target_hardware", "mac"), ("target_protocol", "ip"),
    ),
    "ipv4": (
        ("ihl", "int"), ("tos", "int"), ("total_length", "int"),
        ("identification", "int"), ("df", "bool"), ("mf", "bool"),
        ("fragment_offset", "int"), ("ttl", "int"), ("protocol", "str"),
        ("source", "ip"), ("destination", "ip"), ("options", "words"),
    ),
    "udp": (
        ("source_port", "int"), ("dest_port", "int"),
        ("length", "int"), ("payload", "bytes"),
    ),
    "tcp": (
        ("source_port", "int"), ("dest_port", "int"), ("seq_number", "int"),
        ("ack_number", "int"), ("data_offset", "int"),
        ("urg", "bool"), ("ack", "bool"), ("psh", "bool"),
        ("rst", "bool"), ("syn", "bool"), ("fin", "bool"),
        ("window", "int"), ("urgent_pointer", "int"),
        ("options", "words"), ("payload", "bytes"),
    ),
}

RECORD_TYPES = {
    "ethernet": EthernetFrame,
    "arp": ArpPacket,
    "ipv4": Ipv4Header,
    "udp": UdpDatagram,
    "tcp": TcpSegment,
}

# Bit positions (from format start) where re-encoding a decoded packet
# may legitimately differ from the wire: reserved fills the decoder
# accepts but does not store, plus the checksum slots, whose canonical
# re-encoded value shifts with those fills (and which have two accepted
# faces — 0x0000/0xFFFF — when the rest of the region sums to zero).
MASKED_BITS = {
    "ethernet": (),
    "arp": (),
    "ipv4": (48,) + tuple(range(80, 96)),            # reserved flag + slot
    "udp": tuple(range(48, 64)),                      # slot only
    "tcp": tuple(range(100, 106)) + tuple(range(128, 144)),
}
