"""Top-level acceptance gate.

Each test covers one numbered shipping criterion and prints a single
PASS/FAIL line (visible under plain pytest via addopts = -s).  The
criteria pull their machinery from the per-module tests: the bit-level
laws from test_bitqueue, the fixture formats and random record makers
from conftest.
"""

import csv
import inspect
import random
import re
import time
from pathlib import Path

from biformat import DecodeError, EncodeError, equivalence_check
from biformat.checksum import ones_complement_fold
from biformat.cli import main as cli_main
from biformat.errors import (
    CodecError,
    REASON_BAD_CHECKSUM,
    REASON_NO_UNION_BRANCH,
)
from biformat.netformats import (
    FORMAT_NAMES,
    ArpPacket,
    EthernetFrame,
    PseudoHeader,
    ethernet_format,
    tcp_format,
    udp_format,
)
from biformat.oracle import (
    check_decoder_correct,
    check_encoder_refines,
    check_injectivity,
)
import biformat.netformats as netformats_module
from conftest import (
    ALL_SUIT_PAIRS,
    CLUB,
    DIAMOND,
    HEART,
    RANDOM_RECORD_MAKERS,
    ReadingList,
    ReadingPlain,
    ReadingTagged,
    SPADE,
    VERSION_YEAR,
    fold_oracle,
    random_ip,
    random_reading_list,
    random_reading_plain,
    random_reading_tagged,
    reading_list_format,
    reading_padded_format,
    reading_plain_format,
    reading_tagged_format,
    small_format_suite,
    suit_pair_format,
)
from test_bitqueue import ALL_LAWS

REPO_ROOT = Path(__file__).resolve().parent.parent


def report(number, label, ok, detail):
    print()
    print("ACCEPTANCE %d [%s]: %s — %s"
          % (number, label, "PASS" if ok else "FAIL", detail))
    assert ok, "criterion %d (%s): %s" % (number, label, detail)


# ----------------------------------------------------------------------
# 1. Bit-string axioms: eight laws, >= 10^4 cases each, under 10 s.
# ----------------------------------------------------------------------

def test_criterion_1_bitstring_axioms():
    started = time.perf_counter()
    cases = 10_000
    for seed, (name, law) in enumerate(ALL_LAWS, start=0xACC1):
        law(random.Random(seed), cases)
    elapsed = time.perf_counter() - started
    names = ", ".join(name for name, _ in ALL_LAWS)
    report(1, "bitstring axioms", elapsed < 10.0 and len(ALL_LAWS) == 8,
           "%d laws (%s) x %d cases in %.2fs (limit 10s)"
           % (len(ALL_LAWS), names, cases, elapsed))


# ----------------------------------------------------------------------
# 2. Oracle checks: every suite format passes both oracle definitions
#    exhaustively, under 30 s.
# ----------------------------------------------------------------------

def test_criterion_2_exhaustive_oracles():
    started = time.perf_counter()
    suite = small_format_suite()
    failures = []
    for label, fmt, sources, sweep_bits in suite:
        bad = check_encoder_refines(fmt, sources)
        bad += check_decoder_correct(fmt, sources, sweep_max_bits=sweep_bits)
        if bad:
            failures.append("%s: %r" % (label, bad[0]))
    elapsed = time.perf_counter() - started
    report(2, "exhaustive oracle checks",
           not failures and len(suite) >= 15 and elapsed < 30.0,
           failures[0] if failures else
           "%d formats, both oracle definitions, %.2fs (limit 30s)"
           % (len(suite), elapsed))


# ----------------------------------------------------------------------
# 3. Non-injectivity: the suit-pair format collides on (club, diamond)
#    vs (heart, spade).
# ----------------------------------------------------------------------

def test_criterion_3_suit_pair_collision():
    f = suit_pair_format()
    bad = check_injectivity(f, ALL_SUIT_PAIRS)
    colliding = {c.source for c in bad}
    expected_pair_found = ((HEART, SPADE) in colliding
                           or (CLUB, DIAMOND) in colliding)
    same_target = f.encode((CLUB, DIAMOND)) == f.encode((HEART, SPADE))
    report(3, "suit-pair non-injectivity",
           bool(bad) and expected_pair_found and same_target,
           "%d collisions; (club,diamond) and (heart,spade) both encode to %s"
           % (len(bad), f.encode((CLUB, DIAMOND)).to01()))


# ----------------------------------------------------------------------
# 4. Telemetry walkthrough: the four reading formats.
# ----------------------------------------------------------------------

def test_criterion_4_reading_walkthrough():
    rng = random.Random(0xACC4)
    n = 10_000
    checks = []

    plain, padded = reading_plain_format(), reading_padded_format()
    tagged, listed = reading_tagged_format(), reading_list_format()

    for fmt, make in ((plain, random_reading_plain),
                      (padded, random_reading_plain),
                      (tagged, random_reading_tagged),
                      (listed, random_reading_list)):
        ok = True
        for _ in range(n):
            rec = make(rng)
            wire, _ = fmt.encode_bytes(rec)
            got, _ = fmt.decode_bytes(wire)
            if got != rec:
                ok = False
                break
        checks.append(("%s round-trips" % fmt.meta.name, ok))

    # padded: every filler accepted, encoder always writes 0x00
    rec = ReadingPlain(0x0102, 0x0304)
    wire, _ = padded.encode_bytes(rec)
    emits_zero = wire[2] == 0x00
    accepted = all(
        padded.decode_bytes(wire[:2] + bytes([filler]) + wire[3:])[0] == rec
        for filler in range(256))
    checks.append(("padding byte: 256 fillers accepted, emits 0x00",
                   emits_zero and accepted))

    # tagged: version constant mismatch rejected
    good, _ = tagged.encode_bytes(
        ReadingTagged(0x0102, "TEMP", 0x0304 & 0x3FFF))
    assert good[:2] == VERSION_YEAR.to_bytes(2, "big")
    bad_version = (VERSION_YEAR + 1).to_bytes(2, "big") + good[2:]
    try:
        tagged.decode_bytes(bad_version)
        version_rejected = False
    except DecodeError as err:
        version_rejected = err.reason == "bad-constant"
    checks.append(("0x7E2 version mismatch rejected", version_rejected))

    # listed: 2^8-element lists have no encoding
    too_long = ReadingList(7, 256, tuple(range(256)))
    try:
        listed.encode_bytes(too_long)
        long_rejected = False
    except EncodeError:
        long_rejected = True
    checks.append(("length >= 2^8 lists rejected", long_rejected))

    failures = [name for name, ok in checks if not ok]
    report(4, "telemetry reading walkthrough", not failures,
           "; ".join(failures) if failures else
           "4 formats x %d round-trips; %s" % (n, "; ".join(
               name for name, _ in checks[4:])))


# ----------------------------------------------------------------------
# 5. Bit/byte differential equivalence: 10^4 random samples per shipped
#    format, plus an exhaustive pass over every fixture format of total
#    width <= 12 bits.
# ----------------------------------------------------------------------

def _refused_sources(name, rec):
    """Records each reference encoder provably refuses, so the encode
    failure-agreement clause runs against the shipped formats too."""
    if name == "ethernet":
        return [EthernetFrame(bytes(6), bytes(6), 1501, b""),
                EthernetFrame(bytes(6), bytes(6), 5, b"mismatch")]
    if name == "arp":
        return [ArpPacket(1, 0x0800, 8, 4, 1, bytes(8), bytes(4),
                          bytes(8), bytes(4))]
    if name == "ipv4":
        return [rec._replace(total_length=0), rec._replace(ihl=rec.ihl + 1)]
    if name == "udp":
        return [rec._replace(length=rec.length + 1)]
    return [rec._replace(urg=False, urgent_pointer=9)]


def test_criterion_5_differential_equivalence():
    rng = random.Random(0xACC5)
    n = 10_000
    divergences = []
    encode_samples = 0
    encode_refusals = 0
    decode_samples = 0
    decode_successes = 0

    for name in FORMAT_NAMES:
        make = RANDOM_RECORD_MAKERS[name]
        records = [make(rng) for _ in range(n // 2)]
        fmt0, rec0 = records[0]

        if name in ("udp", "tcp"):
            # the pseudo header varies per record, so each record is
            # checked under its own format
            for f, s in records:
                rep = equivalence_check(f, [s], [])
                divergences += rep.divergences
                encode_samples += rep.encode_checked
        else:
            rep = equivalence_check(fmt0, [s for _, s in records], [])
            divergences += rep.divergences
            encode_samples += rep.encode_checked

        refused = _refused_sources(name, rec0)
        rep = equivalence_check(fmt0, refused, [])
        divergences += rep.divergences
        encode_refusals += len(refused)

        wire, _ = fmt0.encode_bytes(rec0)
        buffers = [wire]                       # guaranteed decode success
        for _ in range(n // 2):
            k = rng.choice((0, 1, len(wire) - 1, len(wire), len(wire) + 3, 40))
            buffers.append(bytes(rng.randrange(256) for _ in range(k)))
        rep = equivalence_check(fmt0, [], buffers)
        divergences += rep.divergences
        decode_samples += rep.decode_checked
        decode_successes += 1                  # fmt0's own wire decodes

    # exhaustive pass: every fixture format narrow enough to enumerate,
    # against every buffer of zero, one, or two bytes
    all_buffers = [b""]
    all_buffers += [bytes([a]) for a in range(256)]
    all_buffers += [bytes((a, b)) for a in range(256) for b in range(256)]
    exhaustive = 0
    for label, fmt, sources, _sweep in small_format_suite():
        if fmt.meta.max_bits is None or fmt.meta.max_bits > 12:
            continue
        rep = equivalence_check(fmt, sources, all_buffers)
        divergences += rep.divergences
        exhaustive += 1
        # clause coverage probes (the agreement itself is checked above)
        for s in sources:
            try:
                fmt.encode(s)
                encode_samples += 1
            except CodecError:
                encode_refusals += 1
        for probe in (b"", b"\x55", b"\xff\x00"):
            try:
                fmt.decode_bytes(probe)
                decode_successes += 1
            except CodecError:
                decode_samples += 1

    vacuous = [label for label, count in
               (("encode-success", encode_samples),
                ("encode-refusal", encode_refusals),
                ("decode-failure", decode_samples),
                ("decode-success", decode_successes)) if count == 0]
    report(5, "bit/byte differential equivalence",
           not divergences and not vacuous and exhaustive >= 15,
           ("first divergence: %s" % (divergences[0],)) if divergences else
           ("clauses never exercised: %s" % vacuous) if vacuous else
           "0 divergences: %d random samples per shipped format, "
           "%d fixture formats exhausted over all 0/1/2-byte buffers"
           % (n, exhaustive))


# ----------------------------------------------------------------------
# 6 (and the inline half of 8). Network round-trips with the checksum
#    fold identity asserted on every encoder output, and decode of
#    arbitrary buffers never yielding a record that fails to re-encode.
# ----------------------------------------------------------------------

FIXED_SRC_IP = bytes((10, 0, 0, 1))
FIXED_DST_IP = bytes((10, 0, 0, 2))


def _checksum_case(name, rng):
    """(format, record, fold_prefix): fold_prefix is the pseudo-header
    bytes prepended to the wire for the checksum identity, b"" when the
    checksum covers the wire alone, None when there is no checksum."""
    fmt, rec = RANDOM_RECORD_MAKERS[name](rng)
    if name == "udp":
        pseudo = PseudoHeader(random_ip(rng), random_ip(rng), 17, rec.length)
        return udp_format(pseudo), rec, pseudo.pack()
    if name == "tcp":
        seg_len = 4 * rec.data_offset + len(rec.payload)
        pseudo = PseudoHeader(random_ip(rng), random_ip(rng), 6, seg_len)
        return tcp_format(pseudo, seg_len), rec, pseudo.pack()
    return fmt, rec, b"" if name == "ipv4" else None


def _buffer_format(name, shipped, buf):
    """The format a standalone decoder would use for an arbitrary buffer
    (udp and tcp take their pseudo header from out-of-band context)."""
    if name == "udp":
        length = int.from_bytes(buf[4:6], "big") if len(buf) >= 6 else len(buf)
        return udp_format(PseudoHeader(FIXED_SRC_IP, FIXED_DST_IP, 17, length))
    if name == "tcp":
        return tcp_format(
            PseudoHeader(FIXED_SRC_IP, FIXED_DST_IP, 6, len(buf)), len(buf))
    return shipped


def test_criterion_6_and_8_network_round_trips():
    rng = random.Random(0xACC6)
    n = 10_000
    buffer_n = 2_000
    failures = []
    folds_checked = 0
    decoded_buffers = 0

    for name in FORMAT_NAMES:
        for _ in range(n):
            fmt, rec, fold_prefix = _checksum_case(name, rng)
            wire, nbits = fmt.encode_bytes(rec)
            got, consumed = fmt.decode_bytes(wire)
            if got != rec or consumed != nbits:
                failures.append("%s: decode(encode(r)) != r for %r"
                                % (name, rec))
                break
            if fold_prefix is not None:
                region = wire[:4 * rec.ihl] if name == "ipv4" else wire
                if ones_complement_fold(fold_prefix + region) != 0xFFFF:
                    failures.append("%s: fold != 0xFFFF on %s"
                                    % (name, wire.hex()))
                    break
                folds_checked += 1
        if failures:
            break

        # arbitrary buffers: a successful decode must re-encode
        shipped, rec, _ = _checksum_case(name, rng)
        seeds = [shipped.encode_bytes(rec)[0]]
        if name in ("udp", "tcp"):
            # craft one wire the fixed-pseudo buffer format accepts
            if name == "udp":
                known = udp_format(
                    PseudoHeader(FIXED_SRC_IP, FIXED_DST_IP, 17, 12))
                seeds = [known.encode_bytes(
                    netformats_module.UdpDatagram(7, 9, 12, b"pong"))[0]]
            else:
                known = tcp_format(
                    PseudoHeader(FIXED_SRC_IP, FIXED_DST_IP, 6, 20), 20)
                seeds = [known.encode_bytes(netformats_module.TcpSegment(
                    80, 443, 1, 2, 5, False, True, False, False, False,
                    False, 512, 0, (), b""))[0]]
        buffers = seeds + [
            bytes(rng.randrange(256) for _ in range(rng.randrange(0, 80)))
            for _ in range(buffer_n)]
        for buf in buffers:
            fmt = _buffer_format(name, shipped, buf)
            try:
                got, _ = fmt.decode_bytes(buf)
            except CodecError:
                continue
            decoded_buffers += 1
            try:
                fmt.encode_bytes(got)
            except CodecError as err:
                failures.append("%s: decoded %r from %s but re-encode "
                                "raised %r" % (name, got, buf.hex(), err))
                break
        if failures:
            break

    ok = (not failures and folds_checked == 3 * n and decoded_buffers >= 5)
    report(6, "network round-trips", ok,
           failures[0] if failures else
           "%d random records per format decode back exactly; %d encoder "
           "outputs folded to 0xFFFF inline; %d arbitrary-buffer decodes "
           "all re-encoded" % (n, folds_checked, decoded_buffers))


# ----------------------------------------------------------------------
# 7. Strict validation: bit flips and the EtherType gap.
# ----------------------------------------------------------------------

def test_criterion_7_strict_validation():
    rng = random.Random(0xACC7)
    trials = 100
    flips = 100
    problems = []

    for name in ("ipv4", "udp", "tcp"):
        make = RANDOM_RECORD_MAKERS[name]
        for _ in range(trials):
            fmt, rec = make(rng)
            wire, _ = fmt.encode_bytes(rec)
            covered_bytes = 4 * rec.ihl if name == "ipv4" else len(wire)
            for _ in range(flips):
                pos = rng.randrange(covered_bytes * 8)
                flipped = bytearray(wire)
                flipped[pos >> 3] ^= 0x80 >> (pos & 7)
                try:
                    fmt.decode_bytes(bytes(flipped))
                    problems.append("%s: flip at bit %d accepted"
                                    % (name, pos))
                except DecodeError as err:
                    if err.reason != REASON_BAD_CHECKSUM:
                        problems.append("%s: flip at bit %d gave %s"
                                        % (name, pos, err.reason))
                except CodecError as err:
                    problems.append("%s: flip raised %r" % (name, err))
                if problems:
                    break
            if problems:
                break
        if problems:
            break

    gap_ok = True
    f = ethernet_format()
    head = bytes(12)
    for tag in range(1501, 1536):
        try:
            f.decode_bytes(head + tag.to_bytes(2, "big") + b"xy")
            gap_ok = False
        except DecodeError as err:
            if err.reason != REASON_NO_UNION_BRANCH:
                gap_ok = False
        try:
            f.encode_bytes(EthernetFrame(bytes(6), bytes(6), tag, b""))
            gap_ok = False
        except EncodeError:
            pass

    report(7, "strict validation", not problems and gap_ok,
           problems[0] if problems else
           ("EtherType gap leak" if not gap_ok else
            "%dx%d covered-region flips per checksum format all "
            "bad-checksum; all 35 gap tags rejected both ways"
            % (trials, flips)))


# ----------------------------------------------------------------------
# 8. Checksum identity, oracle half (the inline half runs inside 6).
# ----------------------------------------------------------------------

def test_criterion_8_fold_oracle():
    rng = random.Random(0xACC8)
    n = 10_000
    mismatches = 0
    for _ in range(n):
        data = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 64)))
        if ones_complement_fold(data) != fold_oracle(data):
            mismatches += 1
    report(8, "checksum fold oracle", mismatches == 0,
           "%d random strings against the straight-loop oracle, "
           "%d mismatches" % (n, mismatches))


# ----------------------------------------------------------------------
# 9. Performance: cmd_bench medians at >= 10^5 iterations.
# ----------------------------------------------------------------------

def _bench_rows(tmp_path, fmt_name, size, iters):
    rc = cli_main(["bench", fmt_name, "--size", str(size),
                   "--iters", str(iters), "--report-dir", str(tmp_path)])
    assert rc == 0
    with open(tmp_path / ("bench_%s.csv" % fmt_name)) as fh:
        return {row["op"]: float(row["ns_per_packet"])
                for row in csv.DictReader(fh)}


def test_criterion_9_performance(tmp_path):
    iters = 100_000
    tcp_rows = _bench_rows(tmp_path, "tcp", 1500, iters)
    ratio = tcp_rows["decode-reference"] / tcp_rows["decode-fast"]
    ipv4_rows = _bench_rows(tmp_path, "ipv4", 20, iters)
    ipv4_ns = ipv4_rows["decode-fast"]
    report(9, "performance", ratio >= 5.0 and ipv4_ns < 2000.0,
           "tcp-1500 fast decode %.0fns vs reference %.0fns "
           "(%.1fx, need >=5x); ipv4 fast decode %.0fns (need <2000ns)"
           % (tcp_rows["decode-fast"], tcp_rows["decode-reference"],
              ratio, ipv4_ns))


# ----------------------------------------------------------------------
# 10. Each packet format's defining function stays small, and the README
#     documents the counts this test recomputes.
# ----------------------------------------------------------------------

def _body_lines(fn):
    src = inspect.getsource(fn).splitlines()
    lines = iter(src)
    for line in lines:
        if line.lstrip().startswith("def "):
            break
    count = 0
    in_doc = False
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not in_doc and count == 0 and (stripped.startswith('"""')
                                          or stripped.startswith("'''")):
            if not (stripped.endswith(stripped[:3]) and len(stripped) > 3):
                in_doc = True
            continue
        if in_doc:
            if stripped.endswith('"""') or stripped.endswith("'''"):
                in_doc = False
            continue
        count += 1
    return count


def test_criterion_10_declarative_size():
    builders = {
        "ethernet": netformats_module.ethernet_format,
        "arp": netformats_module.arp_format,
        "ipv4": netformats_module.ipv4_format,
        "udp": netformats_module.udp_format,
        "tcp": netformats_module.tcp_format,
    }
    counts = {name: _body_lines(fn) for name, fn in builders.items()}
    oversize = {name: c for name, c in counts.items() if c > 40}

    readme = (REPO_ROOT / "README.md").read_text()
    documented = {m.group(1): int(m.group(2))
                  for m in re.finditer(r"\|\s*(\w+)\s*\|\s*(\d+)\s*\|", readme)}
    stale = {name: (counts[name], documented.get(name))
             for name in counts if documented.get(name) != counts[name]}

    report(10, "declarative definition size", not oversize and not stale,
           ("over 40 lines: %s" % oversize) if oversize else
           ("README counts stale: %s" % stale) if stale else
           "all five definitions <= 40 lines (%s), README table matches"
           % ", ".join("%s=%d" % kv for kv in sorted(counts.items())))
