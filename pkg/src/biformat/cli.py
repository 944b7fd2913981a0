"""Command-line packet tool over the netformats codecs.

Subcommands: decode, encode, roundtrip, bench.  Exit codes: 0 success,
1 codec absence (the reason and bit offset go to stderr), 2 usage or
input-syntax errors.
"""

from __future__ import annotations

import argparse
import ipaddress
import json
import os
import sys
from typing import List, Optional, Tuple

from .errors import ALL_REASONS, CodecError, DecodeError, EncodeError
from .netformats import (
    FIELD_SCHEMAS,
    FORMAT_NAMES,
    IP_PROTOCOL_NAMES,
    MASKED_BITS,
    PseudoHeader,
    RECORD_TYPES,
    arp_format,
    ethernet_format,
    ipv4_format,
    tcp_format,
    udp_format,
)

DEFAULT_BUFFER_SIZE = 2048
ENV_BUFFER_SIZE = "BIFORMAT_BUFFER_SIZE"


class UsageError(Exception):
    """Bad flags or malformed structured input: exit code 2."""


# ----------------------------------------------------------------------
# Value rendering and parsing, keyed by the schema kinds in netformats.
# ----------------------------------------------------------------------

def _render(kind: str, v):
    if kind == "int":
        return str(v)
    if kind == "bool":
        return "true" if v else "false"
    if kind == "str":
        return str(v)
    if kind == "bytes":
        return v.hex()
    if kind == "mac":
        return ":".join("%02x" % b for b in v)
    if kind == "ip":
        return str(ipaddress.IPv4Address(bytes(v)))
    if kind == "words":
        return ",".join("0x%08x" % w for w in v)
    raise AssertionError(kind)


def _render_json(kind: str, v):
    if kind in ("int", "bool", "str"):
        return v
    if kind == "words":
        return list(v)
    return _render(kind, v)


def _parse(kind: str, s: str):
    s = s.strip()
    try:
        if kind == "int":
            return int(s, 0)
        if kind == "bool":
            low = s.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError("expected true/false")
        if kind == "str":
            return s
        if kind == "bytes":
            return bytes.fromhex(s)
        if kind == "mac":
            raw = bytes.fromhex(s.replace(":", "").replace("-", ""))
            if len(raw) != 6:
                raise ValueError("MAC addresses are 6 bytes")
            return raw
        if kind == "ip":
            return ipaddress.IPv4Address(s).packed
        if kind == "words":
            if not s:
                return ()
            return tuple(int(part, 0) for part in s.split(","))
    except ValueError as err:
        raise UsageError("bad %s value %r: %s" % (kind, s, err)) from None
    raise AssertionError(kind)


def _parse_json_value(kind: str, v):
    if isinstance(v, str):
        return _parse(kind, v)
    if kind == "int" and isinstance(v, int) and not isinstance(v, bool):
        return v
    if kind == "bool" and isinstance(v, bool):
        return v
    if kind == "words" and isinstance(v, list):
        return tuple(int(x) for x in v)
    raise UsageError("bad JSON value for %s field: %r" % (kind, v))


# ----------------------------------------------------------------------
# Input plumbing.
# ----------------------------------------------------------------------

def _input_bytes(args) -> bytes:
    if args.raw is not None and args.hex is not None:
        raise UsageError("give hex on the command line or --raw FILE, not both")
    if args.raw is not None:
        with open(args.raw, "rb") as fh:
            return fh.read()
    if args.hex is None:
        raise UsageError("no input: pass hex on the command line or --raw FILE")
    cleaned = args.hex.replace("0x", "").replace("0X", "")
    cleaned = "".join(cleaned.split())
    try:
        return bytes.fromhex(cleaned)
    except ValueError as err:
        raise UsageError("bad hex input: %s" % err) from None


def _buffer_size(args) -> int:
    if getattr(args, "buffer_size", None) is not None:
        size = args.buffer_size
    else:
        env = os.environ.get(ENV_BUFFER_SIZE)
        if env is not None:
            try:
                size = int(env)
            except ValueError:
                raise UsageError("%s must be an integer, got %r" % (ENV_BUFFER_SIZE, env))
        else:
            size = DEFAULT_BUFFER_SIZE
    if size <= 0:
        raise UsageError("buffer size must be positive")
    return size


def _require_ips(args) -> Tuple[bytes, bytes]:
    if args.src_ip is None or args.dst_ip is None:
        raise UsageError("udp/tcp need --src-ip and --dst-ip (or --stacked)")
    return _parse("ip", args.src_ip), _parse("ip", args.dst_ip)


def _build_plain_format(name: str, args, data: Optional[bytes], record=None):
    """Format for the unstacked case.  For udp/tcp the pseudo header comes
    from --src-ip/--dst-ip plus either the wire bytes (decoding: udp reads
    its length field, tcp assumes the input is exactly one segment) or the
    record being encoded."""
    if name == "ethernet":
        return ethernet_format()
    if name == "arp":
        return arp_format()
    if name == "ipv4":
        return ipv4_format()
    src, dst = _require_ips(args)
    if name == "udp":
        if record is not None:
            length = record.length
        elif data is not None and len(data) >= 6:
            length = int.from_bytes(data[4:6], "big")
        else:
            length = len(data) if data is not None else 0
        return udp_format(PseudoHeader(src, dst, 17, length))
    if name == "tcp":
        if record is not None:
            seg_len = 4 * record.data_offset + len(record.payload)
        else:
            seg_len = len(data) if data is not None else 0
        return tcp_format(PseudoHeader(src, dst, 6, seg_len), seg_len)
    raise AssertionError(name)


def _stacked_inner(name: str, data: bytes):
    """Decode the enclosing IPv4 header, slice out the inner bytes and
    build the inner format from the header's addressing."""
    if name not in ("udp", "tcp"):
        raise UsageError("--stacked applies to udp and tcp only")
    outer_fmt = ipv4_format()
    outer, outer_bits = outer_fmt.decode_bytes(data)
    hdr = outer_bits // 8
    if outer.protocol != name:
        raise DecodeError("constraint-violation", outer_bits,
                          "enclosing ipv4 carries %s, not %s" % (outer.protocol, name))
    seg_len = outer.total_length - hdr
    inner = data[hdr : outer.total_length]
    proto = IP_PROTOCOL_NAMES[name]
    pseudo = PseudoHeader(outer.source, outer.destination, proto, seg_len)
    fmt = udp_format(pseudo) if name == "udp" else tcp_format(pseudo, seg_len)
    return outer, hdr, fmt, inner


# ----------------------------------------------------------------------
# Record <-> structured text.
# ----------------------------------------------------------------------

def _record_block(name: str, rec, consumed: int, leftover: bytes) -> str:
    lines = ["format=%s" % name]
    for field, kind in FIELD_SCHEMAS[name]:
        lines.append("%s=%s" % (field, _render(kind, getattr(rec, field))))
    lines.append("consumed_bytes=%d" % consumed)
    lines.append("leftover=%s" % leftover.hex())
    return "\n".join(lines)


def _record_json(name: str, rec, consumed: int, leftover: bytes) -> dict:
    return {
        "format": name,
        "fields": {field: _render_json(kind, getattr(rec, field))
                   for field, kind in FIELD_SCHEMAS[name]},
        "consumed_bytes": consumed,
        "leftover": leftover.hex(),
    }


def _read_record(name: str, text: str, as_json: bool):
    schema = dict(FIELD_SCHEMAS[name])
    values = {}
    if as_json:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as err:
            raise UsageError("bad JSON input: %s" % err) from None
        if isinstance(obj, dict) and isinstance(obj.get("fields"), dict):
            obj = obj["fields"]
        if not isinstance(obj, dict):
            raise UsageError("JSON input must be an object of fields")
        for key, raw in obj.items():
            if key not in schema:
                raise UsageError("unknown field %r for %s" % (key, name))
            values[key] = _parse_json_value(schema[key], raw)
    else:
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError("line %d: expected key=value" % lineno)
            key, _, raw = line.partition("=")
            key = key.strip()
            if key == "format":
                continue
            if key in ("consumed_bytes", "leftover"):
                continue    # allow feeding decode output straight back in
            if key not in schema:
                raise UsageError("line %d: unknown field %r for %s" % (lineno, key, name))
            values[key] = _parse(schema[key], raw)
    missing = [f for f, _ in FIELD_SCHEMAS[name] if f not in values]
    if missing:
        raise UsageError("missing fields for %s: %s" % (name, ", ".join(missing)))
    return RECORD_TYPES[name](**values)


# ----------------------------------------------------------------------
# Subcommands.
# ----------------------------------------------------------------------

def cmd_decode(args) -> int:
    data = _input_bytes(args)
    outer = None
    if args.stacked:
        outer, hdr, fmt, inner = _stacked_inner(args.format, data)
    else:
        fmt, inner = _build_plain_format(args.format, args, data), data
    rec, bits = fmt.dec_fast(inner, 0, None)[0:2]
    consumed = (bits + 7) // 8
    leftover = inner[consumed:]
    if args.json:
        obj = _record_json(args.format, rec, consumed, leftover)
        if outer is not None:
            obj["outer"] = _record_json("ipv4", outer, hdr, b"")["fields"]
        print(json.dumps(obj, indent=2, sort_keys=True))
    else:
        if outer is not None:
            print(_record_block("ipv4", outer, hdr, b""))
            print()
        print(_record_block(args.format, rec, consumed, leftover))
    return 0


def cmd_encode(args) -> int:
    capacity = _buffer_size(args)
    text = sys.stdin.read()
    rec = _read_record(args.format, text, args.json)
    fmt = _build_plain_format(args.format, args, None, record=rec)
    buf = bytearray(capacity)
    bits, _ = fmt.enc_fast(rec, buf, 0, None)
    out = bytes(buf[: (bits + 7) // 8])
    if args.out is not None:
        with open(args.out, "wb") as fh:
            fh.write(out)
    else:
        print(out.hex())
    return 0


def _bit_diff_positions(a: bytes, b: bytes) -> List[int]:
    x = int.from_bytes(a, "big") ^ int.from_bytes(b, "big")
    total = 8 * len(a)
    out = []
    while x:
        low = x & -x
        out.append(total - low.bit_length())
        x ^= low
    out.sort()
    return out


def cmd_roundtrip(args) -> int:
    data = _input_bytes(args)
    if args.stacked:
        _, _, fmt, inner = _stacked_inner(args.format, data)
    else:
        fmt, inner = _build_plain_format(args.format, args, data), data
    rec, bits = fmt.dec_fast(inner, 0, None)[0:2]
    consumed = (bits + 7) // 8
    buf = bytearray(max(_buffer_size(args), consumed))
    bits2, _ = fmt.enc_fast(rec, buf, 0, None)
    redone = bytes(buf[: (bits2 + 7) // 8])
    original = inner[:consumed]
    if len(redone) != len(original):
        print("mismatch: re-encode is %d bytes, input was %d" % (len(redone), len(original)))
        return 1
    masked = set(MASKED_BITS[args.format])
    diffs = _bit_diff_positions(original, redone)
    hard = [d for d in diffs if d not in masked]
    soft = [d for d in diffs if d in masked]
    if hard:
        print("mismatch at bit%s %s" % ("s" if len(hard) > 1 else "",
                                        ", ".join(map(str, hard))))
        return 1
    if soft:
        print("match (masked differences at bits: %s)" % ", ".join(map(str, soft)))
    else:
        print("match")
    return 0


def cmd_bench(args) -> int:
    from .bench import run_bench, write_report

    if args.iters <= 0:
        raise UsageError("--iters must be positive")
    rows = run_bench(args.format, args.size, args.iters)
    print("format=%s size=%d iters=%d" % (args.format, args.size, args.iters))
    for op, ns, iters in rows:
        note = "" if iters == args.iters else "  (iters=%d)" % iters
        print("%-18s %12.1f ns/packet%s" % (op, ns, note))
    if args.report_dir is not None:
        for path in write_report(rows, args.format, args.size, args.report_dir):
            print("wrote %s" % path)
    return 0


# ----------------------------------------------------------------------
# Argument parsing and dispatch.
# ----------------------------------------------------------------------

_EPILOG = """\
exit codes:
  0  success
  1  codec reported absence (reason and bit offset on stderr)
  2  usage or input-syntax error

absence reasons:
  %s
""" % "\n  ".join(ALL_REASONS)


def _add_io_flags(p, decode_side: bool):
    p.add_argument("hex", nargs="?", help="packet bytes as hex (whitespace and 0x ok)")
    p.add_argument("--raw", metavar="FILE", help="read packet bytes from a file instead")
    p.add_argument("--src-ip", help="pseudo-header source address (udp/tcp)")
    p.add_argument("--dst-ip", help="pseudo-header destination address (udp/tcp)")
    if decode_side:
        p.add_argument("--stacked", action="store_true",
                       help="input is an ipv4 packet; decode the enclosed udp/tcp")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="biformat",
        description="Encode, decode and benchmark classic network packets "
                    "using bidirectional format definitions.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decode", help="bytes -> structured text",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    d.add_argument("format", choices=FORMAT_NAMES)
    _add_io_flags(d, decode_side=True)
    d.add_argument("--json", action="store_true", help="emit a JSON object")
    d.set_defaults(fn=cmd_decode)

    e = sub.add_parser("encode", help="structured text on stdin -> bytes",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    e.add_argument("format", choices=FORMAT_NAMES)
    e.add_argument("--json", action="store_true", help="stdin holds a JSON object")
    e.add_argument("--out", metavar="FILE", help="write raw bytes here instead of hex stdout")
    e.add_argument("--buffer-size", type=int, default=None,
                   help="encode buffer capacity in bytes (default %d, or $%s)"
                        % (DEFAULT_BUFFER_SIZE, ENV_BUFFER_SIZE))
    e.add_argument("--src-ip", help="pseudo-header source address (udp/tcp)")
    e.add_argument("--dst-ip", help="pseudo-header destination address (udp/tcp)")
    e.set_defaults(fn=cmd_encode)

    r = sub.add_parser("roundtrip", help="decode then re-encode; compare bytes",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    r.add_argument("format", choices=FORMAT_NAMES)
    _add_io_flags(r, decode_side=True)
    r.add_argument("--buffer-size", type=int, default=None, help=argparse.SUPPRESS)
    r.set_defaults(fn=cmd_roundtrip)

    b = sub.add_parser("bench", help="time the interpreters on one packet shape",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    b.add_argument("format", choices=FORMAT_NAMES)
    b.add_argument("--size", type=int, default=64, help="target packet size in bytes")
    b.add_argument("--iters", type=int, default=100_000,
                   help="iterations for the fast path (reference is scaled down)")
    b.add_argument("--report-dir", metavar="DIR",
                   help="also write bench_<format>.csv and bench_<format>.png here")
    b.set_defaults(fn=cmd_bench)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        # Two-stage parse: argparse cannot match an optional positional that
        # appears after a flag ("decode udp --stacked <hex>"), so leftover
        # non-flag tokens are folded into the hex argument by hand.
        args, extra = ap.parse_known_args(argv)
    except SystemExit as err:
        return 2 if err.code not in (0, None) else 0
    if any(t.startswith("-") for t in extra) or (extra and not hasattr(args, "hex")):
        print("usage error: unrecognized arguments: %s" % " ".join(extra),
              file=sys.stderr)
        return 2
    if extra:
        args.hex = " ".join(([args.hex] if args.hex else []) + extra)
    try:
        return args.fn(args)
    except UsageError as err:
        print("usage error: %s" % err, file=sys.stderr)
        return 2
    except DecodeError as err:
        print("decode failed: reason=%s bit_offset=%d (%s)"
              % (err.reason, err.bit_offset, err.detail), file=sys.stderr)
        return 1
    except EncodeError as err:
        print("encode failed: reason=%s bit_offset=%d (%s)"
              % (err.reason, err.bit_offset, err.detail), file=sys.stderr)
        return 1
    except CodecError as err:
        print("codec failure: %s" % err, file=sys.stderr)
        return 1
    except OSError as err:
        print("io error: %s" % err, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
