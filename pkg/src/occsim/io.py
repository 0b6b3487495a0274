"""File formats: chip streams (ASCII and packed binary), frame CSVs, manifests.

ASCII chip streams carry a key=value header followed by 0/1 lines; the
packed format stores the same header fields in a fixed binary layout with
the chips bit-packed MSB-first.  Frame CSVs are one row per sensor row
with a mandatory header, dot-decimal floats.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .camera import FrameSample
from .rll import ChipStream

PACKED_MAGIC = b"OCHP"
PACKED_VERSION = 1
_ASCII_WRAP = 80


class FileFormatError(ValueError):
    pass


def write_chipstream_ascii(path, stream: ChipStream) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"clock_hz={stream.clock_hz!r}\n")
        fh.write(f"chips={len(stream.chips)}\n")
        text = "".join(str(int(c)) for c in stream.chips)
        for i in range(0, len(text), _ASCII_WRAP):
            fh.write(text[i:i + _ASCII_WRAP] + "\n")


def write_chipstream_packed(path, stream: ChipStream) -> None:
    packed = np.packbits(stream.chips.astype(np.uint8))
    with open(path, "wb") as fh:
        fh.write(PACKED_MAGIC)
        fh.write(struct.pack("<IdQ", PACKED_VERSION, stream.clock_hz,
                             len(stream.chips)))
        fh.write(packed.tobytes())


def read_chipstream(path) -> ChipStream:
    """Read either chip-stream format, detected from the leading bytes."""
    raw = Path(path).read_bytes()
    if raw.startswith(PACKED_MAGIC):
        header = struct.Struct("<IdQ")
        version, clock_hz, count = header.unpack_from(raw, len(PACKED_MAGIC))
        if version != PACKED_VERSION:
            raise FileFormatError(f"unsupported packed version {version}")
        payload = np.frombuffer(raw, dtype=np.uint8,
                                offset=len(PACKED_MAGIC) + header.size)
        chips = np.unpackbits(payload)[:count].astype(np.int8)
        if len(chips) != count:
            raise FileFormatError("packed chip stream truncated")
        return ChipStream(chips, clock_hz)

    clock_hz = None
    count = None
    bits: list[str] = []
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            if key == "clock_hz":
                clock_hz = float(value)
            elif key == "chips":
                count = int(value)
            else:
                raise FileFormatError(f"line {lineno}: unknown header {key!r}")
        elif set(line) <= {"0", "1"}:
            bits.append(line)
        else:
            raise FileFormatError(f"line {lineno}: expected 0/1 chips")
    if clock_hz is None or count is None:
        raise FileFormatError("missing clock_hz/chips header")
    chips = np.array([int(c) for c in "".join(bits)], dtype=np.int8)
    if len(chips) != count:
        raise FileFormatError(
            f"chip count mismatch: header says {count}, file has {len(chips)}"
        )
    return ChipStream(chips, clock_hz)


FRAME_CSV_HEADER = ["frame_index", "start_time_s", "row", "luma"]


def write_frames_csv(path, samples: list[FrameSample]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FRAME_CSV_HEADER)
        for sample in samples:
            for row, luma in enumerate(sample.row_luma):
                writer.writerow([sample.index, repr(float(sample.start_time_s)),
                                 row, repr(float(luma))])


def read_frames_csv(path, covered_rows: int | None = None) -> list[FrameSample]:
    """Rebuild frame samples from CSV; coverage defaults to the full sensor."""
    by_frame: dict[int, dict] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FileFormatError("line 1: empty file, expected header") from None
        if header != FRAME_CSV_HEADER:
            raise FileFormatError(
                f"line 1: expected header {','.join(FRAME_CSV_HEADER)}"
            )
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != 4:
                raise FileFormatError(f"line {lineno}: expected 4 columns")
            try:
                index = int(fields[0])
                start = float(fields[1])
                row = int(fields[2])
                luma = float(fields[3])
            except ValueError as exc:
                raise FileFormatError(f"line {lineno}: {exc}") from None
            entry = by_frame.setdefault(index, {"start": start, "rows": {}})
            if row in entry["rows"]:
                raise FileFormatError(f"line {lineno}: duplicate row {row}")
            entry["rows"][row] = luma

    samples = []
    for index in sorted(by_frame):
        entry = by_frame[index]
        rows = entry["rows"]
        if sorted(rows) != list(range(len(rows))):
            raise FileFormatError(f"frame {index}: non-contiguous row numbers")
        luma = np.array([rows[r] for r in range(len(rows))], dtype=np.float64)
        cov = len(luma) if covered_rows is None else min(covered_rows, len(luma))
        samples.append(FrameSample(index, entry["start"], luma, cov))
    return samples


def write_manifest(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_payload_bits(path, payloads: list[np.ndarray]) -> None:
    """Recovered payloads as one hex string per line."""
    from .decoder import bits_to_hex

    with open(path, "w", encoding="utf-8") as fh:
        for payload in payloads:
            fh.write(bits_to_hex(payload) + "\n")


def bytes_to_bits(data: bytes) -> np.ndarray:
    """Raw bytes bit-packed MSB-first."""
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8)).astype(np.int8)


def split_payloads(bits: np.ndarray, payload_bits: int) -> list[np.ndarray]:
    """Cut a bit vector into whole payloads; the tail remainder is dropped."""
    count = len(bits) // payload_bits
    if count == 0:
        raise ValueError(
            f"payload source holds {len(bits)} bits, fewer than one "
            f"{payload_bits}-bit payload"
        )
    return [bits[i * payload_bits:(i + 1) * payload_bits] for i in range(count)]
