"""Error types shared by every interpreter path.

Encoders and decoders are partial: an input outside the format is signalled
by raising :class:`EncodeError` / :class:`DecodeError`.  Every failure carries
a machine-readable ``reason`` string (one of the ``REASON_*`` constants) and
the bit offset at which it was detected, counted from the start of the
encode/decode call.  The CLI surfaces both verbatim.
"""

from __future__ import annotations

REASON_SHORT_INPUT = "short-input"
REASON_CONSTRAINT = "constraint-violation"
REASON_BAD_CONSTANT = "bad-constant"
REASON_BAD_CHECKSUM = "bad-checksum"
REASON_UNKNOWN_ENUM = "unknown-enum"
REASON_NO_UNION_BRANCH = "no-union-branch"
REASON_OVERFLOW = "overflow"

ALL_REASONS = (
    REASON_SHORT_INPUT,
    REASON_CONSTRAINT,
    REASON_BAD_CONSTANT,
    REASON_BAD_CHECKSUM,
    REASON_UNKNOWN_ENUM,
    REASON_NO_UNION_BRANCH,
    REASON_OVERFLOW,
)


class CodecError(Exception):
    """Base class for encode/decode absences."""

    def __init__(self, reason: str, bit_offset: int = 0, detail: str = ""):
        self.reason = reason
        self.bit_offset = bit_offset
        self.detail = detail
        super().__init__(reason)

    def __str__(self) -> str:
        msg = "%s at bit %d" % (self.reason, self.bit_offset)
        if self.detail:
            msg += " (%s)" % self.detail
        return msg


class EncodeError(CodecError):
    """The source value is not in the format (or did not fit the buffer)."""


class DecodeError(CodecError):
    """The input is not an encoding of any source value."""
