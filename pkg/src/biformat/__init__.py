"""biformat: bidirectional binary-format combinators.

One declarative format value yields both a correct encoder and decoder.
Formats denote relations between source values and bit strings; the
shipped interpreters are checked against that relational meaning by
exhaustive small-instance oracles, randomized round-trip properties and
a bit-level/byte-level differential harness — see the tests.
"""

from .errors import (
    CodecError,
    DecodeError,
    EncodeError,
    ALL_REASONS,
    REASON_BAD_CHECKSUM,
    REASON_BAD_CONSTANT,
    REASON_CONSTRAINT,
    REASON_NO_UNION_BRANCH,
    REASON_OVERFLOW,
    REASON_SHORT_INPUT,
    REASON_UNKNOWN_ENUM,
)
from .bitqueue import BitString, bits, empty, append, snoc, unfold, from_bytes, to_bytes
from .align import (
    BitCursor,
    ByteBuffer,
    EquivalenceReport,
    equivalence_check,
    get_current_byte,
    read_bits,
    set_current_byte,
    write_bits,
)
from .format_core import (
    FieldChain,
    Format,
    FormatMeta,
    Views,
    dep_bytes,
    dep_count,
    derive,
    discriminator,
    epsilon,
    project,
    record,
    restrict,
    seq,
    union,
)
from .base_formats import (
    bool_bit,
    bytes_exact,
    const,
    enum_format,
    fixed_list,
    nat,
    rest_bytes,
    unused,
    word,
)
from .checksum import (
    ChecksumSpan16,
    ip_checksum_format,
    ones_add,
    ones_complement_fold,
    pseudoheader_checksum_format,
)
from .netformats import (
    ArpPacket,
    EthernetFrame,
    FIELD_SCHEMAS,
    FORMAT_NAMES,
    Ipv4Header,
    MASKED_BITS,
    PseudoHeader,
    TcpSegment,
    UdpDatagram,
    arp_format,
    ethernet_format,
    ipv4_format,
    tcp_format,
    udp_format,
)
from .oracle import (
    RelationSample,
    all_bit_strings,
    check_decoder_correct,
    check_encoder_refines,
    check_injectivity,
    enumerate_relation,
    relation_format,
)

__version__ = "0.1.0"
