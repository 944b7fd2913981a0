"""Timing helpers and sample-packet builders for the bench subcommand.

Measurements are ns/packet medians over batched loops; the reference
bit-level decoder is orders of magnitude slower by design, so it runs a
scaled-down iteration count (still >= 3 batches) to keep wall time sane.
"""

from __future__ import annotations

import time
from typing import Callable, List, Tuple

from .netformats import (
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

__all__ = ["median_ns_per_op", "build_bench_packet", "run_bench", "REFERENCE_SCALE"]

# The reference interpreter runs iters // REFERENCE_SCALE iterations
# (minimum MIN_REFERENCE_ITERS) — it exists to be correct, not fast.
REFERENCE_SCALE = 100
MIN_REFERENCE_ITERS = 3


def median_ns_per_op(op: Callable[[], None], iters: int, batches: int = 5) -> float:
    """Median over `batches` timed loops of iters/batches calls each."""
    per = max(1, iters // batches)
    samples: List[float] = []
    for _ in range(batches):
        t0 = time.perf_counter_ns()
        for _ in range(per):
            op()
        samples.append((time.perf_counter_ns() - t0) / per)
    samples.sort()
    return samples[len(samples) // 2]


def build_bench_packet(format_name: str, size: int):
    """A representative (format, record) pair.  `size` is the on-wire byte
    count where the format allows it; fixed-size formats ignore it."""
    if format_name == "ethernet":
        n = max(0, min(size - 14, 1500))
        rec = EthernetFrame(b"\x52\x54\x00\x12\x34\x56", b"\x52\x54\x00\x65\x43\x21",
                            n, bytes(i & 0xFF for i in range(n)))
        return ethernet_format(), rec
    if format_name == "arp":
        rec = ArpPacket(1, 0x0800, 6, 4, 1,
                        b"\x52\x54\x00\x12\x34\x56", b"\x0a\x00\x00\x01",
                        b"\x00\x00\x00\x00\x00\x00", b"\x0a\x00\x00\x02")
        return arp_format(), rec
    if format_name == "ipv4":
        rec = Ipv4Header(5, 0, max(20, size), 0x1C46, True, False, 0, 64, "tcp",
                         b"\xac\x10\x0a\x63", b"\xac\x10\x0a\x0c", ())
        return ipv4_format(), rec
    if format_name == "udp":
        n = max(0, min(size - 8, 65507))
        pseudo = PseudoHeader(b"\x0a\x00\x00\x01", b"\x0a\x00\x00\x02", 17, 8 + n)
        rec = UdpDatagram(40000, 53, 8 + n, bytes(i & 0xFF for i in range(n)))
        return udp_format(pseudo), rec
    if format_name == "tcp":
        seg_len = max(20, size)
        n = seg_len - 20
        pseudo = PseudoHeader(b"\x0a\x00\x00\x01", b"\x0a\x00\x00\x02", 6, seg_len)
        rec = TcpSegment(443, 51000, 0x11223344, 0x55667788, 5,
                         False, True, False, False, False, False,
                         65535, 0, (), bytes(i & 0xFF for i in range(n)))
        return tcp_format(pseudo, seg_len), rec
    raise ValueError("unknown format %r" % format_name)


def run_bench(format_name: str, size: int, iters: int,
              batches: int = 5) -> List[Tuple[str, float, int]]:
    """Time fast encode, fast decode and reference decode.

    Returns [(op, ns_per_packet, iters_used)] rows.
    """
    from .bitqueue import from_bytes

    fmt, rec = build_bench_packet(format_name, size)
    wire, nbits = fmt.encode_bytes(rec)
    capacity = max(64, len(wire) + 16)
    buf = bytearray(capacity)

    enc_fast, dec_fast = fmt.enc_fast, fmt.dec_fast
    dec_bits = fmt.dec_bits
    wire_bits = from_bytes(wire)

    rows: List[Tuple[str, float, int]] = []
    rows.append(("encode-fast",
                 median_ns_per_op(lambda: enc_fast(rec, buf, 0, None), iters, batches),
                 iters))
    rows.append(("decode-fast",
                 median_ns_per_op(lambda: dec_fast(wire, 0, None), iters, batches),
                 iters))
    ref_iters = max(MIN_REFERENCE_ITERS, iters // REFERENCE_SCALE)
    rows.append(("decode-reference",
                 median_ns_per_op(lambda: dec_bits(wire_bits, None), ref_iters,
                                  min(batches, ref_iters)),
                 ref_iters))
    return rows


def write_report(rows, format_name: str, size: int, report_dir: str) -> List[str]:
    """Write the delimited table and a bar-chart figure; returns paths."""
    import csv
    import os

    os.makedirs(report_dir, exist_ok=True)
    csv_path = os.path.join(report_dir, "bench_%s.csv" % format_name)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["format", "size_bytes", "op", "ns_per_packet", "iters"])
        for op, ns, iters in rows:
            w.writerow([format_name, size, op, "%.1f" % ns, iters])

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ops = [r[0] for r in rows]
    values = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(ops, values, color=["#4477aa", "#66ccee", "#ee6677"])
    ax.set_ylabel("ns / packet")
    ax.set_yscale("log")
    ax.set_title("%s, %d-byte packet" % (format_name, size))
    for i, v in enumerate(values):
        ax.text(i, v, "%.0f" % v, ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    png_path = os.path.join(report_dir, "bench_%s.png" % format_name)
    fig.savefig(png_path, dpi=110)
    plt.close(fig)
    return [csv_path, png_path]
