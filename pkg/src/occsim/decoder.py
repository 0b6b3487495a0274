"""Receiver chain: row luminance -> chips -> payload fragments -> payloads.

Per frame, the covered rows are de-trended with a centered moving average,
sliced into chips (one chip per ``rows_per_chip`` rows, choosing the row
offset that slices sharpest and still shows a start-frame match), and
decoded forward and backward from every detected SF.  A forward fragment
is a payload prefix of the sub-packet starting at the SF; a backward
fragment is a payload suffix of the sub-packet ending there, so a fragment
read before an SF belongs to the preceding sub-packet.

Fragments are grouped by asynchronous-bit state along the stream, fused
(prefix + suffix) into full payload samples, and majority voted per group.
Under the two-bit structure, consecutive group states also reveal how many
packets were skipped between observations (up to three).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .camera import FrameSample
from .framing import (
    FrameStructure,
    ab_bit_count,
    ab_chip_count,
    ab_state_v2,
    subpacket_chip_length,
)
from .rll import (
    InvalidCodeword,
    RllScheme,
    codeword_chips,
    decode_manchester_pair,
    decode_rll,
    payload_chip_count,
    preamble,
)


class Direction(Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class UnfusablePair(ValueError):
    """Prefix and suffix coverage together fall short of one payload."""


@dataclass(frozen=True)
class DecodedPart:
    """A payload prefix (forward) or suffix (backward) with its Ab state."""

    frame_index: int
    direction: Direction
    ab_state: tuple[int, ...]
    fragment: np.ndarray
    complete: bool
    position: int = 0  # SF chip position inside the frame, for ordering


@dataclass(frozen=True)
class GapReport:
    after_packet_state: tuple[int, ...]
    missed_count: int
    frame_indices: tuple[int, int]


@dataclass
class RecoveredGroup:
    ab_state: tuple[int, ...]
    payload: np.ndarray
    first_frame: int
    last_frame: int
    n_parts: int
    n_samples: int
    tie_positions: tuple[int, ...] = ()
    overlap_flagged: bool = False


@dataclass
class LinkReport:
    """Per-experiment decode statistics and recovered payloads."""

    n_frames: int
    n_frames_with_sf: int
    n_parts: int
    n_complete_parts: int
    groups: list[RecoveredGroup]
    n_unrecovered_groups: int
    gaps: list[GapReport]

    def payloads(self) -> list[np.ndarray]:
        return [g.payload for g in self.groups]

    def to_text(self) -> str:
        lines = [
            f"frames: {self.n_frames} ({self.n_frames_with_sf} with SF)",
            f"parts: {self.n_parts} ({self.n_complete_parts} complete)",
            f"recovered payloads: {len(self.groups)} "
            f"(unrecovered groups: {self.n_unrecovered_groups})",
            f"detected gaps: {len(self.gaps)} "
            f"({sum(g.missed_count for g in self.gaps)} payloads missed)",
        ]
        for i, g in enumerate(self.groups):
            flags = ""
            if g.tie_positions:
                flags += " tie"
            if g.overlap_flagged:
                flags += " overlap"
            lines.append(
                f"  {i:5d} ab={g.ab_state} {bits_to_hex(g.payload)} "
                f"frames {g.first_frame}..{g.last_frame} "
                f"samples={g.n_samples}{flags}"
            )
        for gap in self.gaps:
            lines.append(
                f"  gap: {gap.missed_count} missed after state "
                f"{gap.after_packet_state}, between frames "
                f"{gap.frame_indices[0]} and {gap.frame_indices[1]}"
            )
        return "\n".join(lines)


def bits_to_hex(bits) -> str:
    bits = np.asarray(bits, dtype=np.int8)
    if bits.size == 0:
        return ""
    value = int("".join(str(int(b)) for b in bits), 2)
    return format(value, f"0{math.ceil(len(bits) / 4)}x")


@dataclass(frozen=True)
class DecoderConfig:
    scheme: RllScheme
    version: FrameStructure
    payload_bits: int
    rows_per_chip: float
    fusion: bool = True
    detrend_window_rows: int | None = None

    def window_rows(self) -> int:
        if self.detrend_window_rows is not None:
            window = self.detrend_window_rows
        else:
            # must exceed the longest identical-chip run (the SF's) in rows
            window = round(self.rows_per_chip * (len(preamble(self.scheme)) + 2))
        return window + 1 if window % 2 == 0 else window


def detrend(row_luma, window: int) -> np.ndarray:
    """Subtract a centered moving average (odd window).

    Near the ends the window is truncated to the available rows and
    normalized by the actual count; replicating edge rows instead would
    bias the baseline exactly where fragments start and end.
    """
    signal = np.asarray(row_luma, dtype=np.float64)
    window = min(window, len(signal))
    if window % 2 == 0:
        window -= 1
    if window < 3:
        return signal - signal.mean() if signal.size else signal
    kernel = np.ones(window)
    sums = np.convolve(signal, kernel, mode="same")
    counts = np.convolve(np.ones_like(signal), kernel, mode="same")
    return signal - sums / counts


def _group_means(signal: np.ndarray, rows_per_chip: float) -> np.ndarray:
    n = int(len(signal) / rows_per_chip + 1e-9)
    if n == 0:
        return np.empty(0, dtype=np.float64)
    step = int(round(rows_per_chip))
    if abs(rows_per_chip - step) < 1e-9:
        return signal[:n * step].reshape(n, step).mean(axis=1)
    edges = np.floor(np.arange(n + 1) * rows_per_chip).astype(np.int64)
    return np.add.reduceat(signal, edges[:-1]) / np.diff(edges)


def binarize(signal, rows_per_chip: float) -> np.ndarray:
    """One chip per rows_per_chip rows: sign of the group mean (>0 -> 1)."""
    signal = np.asarray(signal, dtype=np.float64)
    if rows_per_chip <= 0:
        raise ValueError("rows_per_chip must be positive")
    return (_group_means(signal, rows_per_chip) > 0).astype(np.int8)


def find_sf(chips, scheme: RllScheme) -> np.ndarray:
    """Positions of exact start-frame pattern matches."""
    chips = np.asarray(chips, dtype=np.int8)
    pattern = preamble(scheme)
    if len(chips) < len(pattern):
        return np.empty(0, dtype=np.int64)
    windows = sliding_window_view(chips, len(pattern))
    return np.flatnonzero((windows == pattern).all(axis=1))


def frame_to_chips(rows, config: DecoderConfig) -> np.ndarray | None:
    """Detrend and slice a frame's covered rows into chips.

    The chip phase relative to the row grid is unknown, so every row
    offset within one chip is tried.  Among offsets that detect an SF,
    the one with the sharpest slicing (largest mean absolute group mean)
    wins: the best-aligned offset mixes adjacent chips least, while a
    misaligned decode can alias whole spurious SF grids.  None when no
    offset produces an SF.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if len(rows) < 2 * config.rows_per_chip:
        return None
    signal = detrend(rows, config.window_rows())
    candidates = []
    for offset in range(max(1, math.ceil(config.rows_per_chip))):
        means = _group_means(signal[offset:], config.rows_per_chip)
        chips = (means > 0).astype(np.int8)
        margin = float(np.abs(means).mean())
        hits = len(find_sf(chips, config.scheme))
        candidates.append((margin, hits, offset, chips))
    # the best-aligned offset slices sharpest and sees the true chips; an
    # SF appearing only at a worse-margin offset is a phase-mixing alias
    margin, hits, _, chips = max(candidates, key=lambda c: (c[0], c[1]))
    return chips if hits else None


def _decode_ab(chips, n_bits: int) -> tuple[int, ...] | None:
    bits = []
    for k in range(n_bits):
        bit = decode_manchester_pair(chips[2 * k:2 * k + 2])
        if bit is None:
            return None
        bits.append(bit)
    return tuple(bits)


def decode_frame(chips, scheme: RllScheme, version: FrameStructure,
                 payload_bits: int, frame_index: int = 0) -> list[DecodedPart]:
    """Forward and backward fragments from every SF in one frame's chips."""
    chips = np.asarray(chips, dtype=np.int8)
    sf_len = len(preamble(scheme))
    n_ab = ab_bit_count(version)
    ab_chips = ab_chip_count(version)
    pay_chips = payload_chip_count(payload_bits, scheme)
    cw = codeword_chips(scheme)
    ds_chips = subpacket_chip_length(payload_bits, scheme, version)

    positions = find_sf(chips, scheme)
    if len(positions) > 1:
        # keep only the dominant sub-packet grid; stray matches are artifacts
        residues = positions % ds_chips
        keep = residues == np.bincount(residues, minlength=ds_chips).argmax()
        positions = positions[keep]

    parts = []
    for p in (int(q) for q in positions):
        # backward: the sub-packet ending at this SF
        if p >= ab_chips + cw:
            ab = _decode_ab(chips[p - ab_chips:p], n_ab)
            if ab is not None:
                data_end = p - ab_chips
                blocks = []
                for k in range(min(pay_chips, data_end) // cw):
                    lo = data_end - (k + 1) * cw
                    try:
                        blocks.append(decode_rll(chips[lo:lo + cw], scheme))
                    except InvalidCodeword:
                        break
                if blocks:
                    fragment = np.concatenate(blocks[::-1])
                    complete = len(fragment) == payload_bits
                    keep = True
                    if complete and data_end - pay_chips - ab_chips >= 0:
                        lead = _decode_ab(
                            chips[data_end - pay_chips - ab_chips:
                                  data_end - pay_chips], n_ab)
                        if lead is not None and lead != ab:
                            keep = False  # conflicting Ab copies poison grouping
                    if keep:
                        parts.append(DecodedPart(frame_index, Direction.BACKWARD,
                                                 ab, fragment, complete, p))

        # forward: the sub-packet starting at this SF
        ab_lo = p + sf_len
        if ab_lo + ab_chips <= len(chips):
            ab = _decode_ab(chips[ab_lo:ab_lo + ab_chips], n_ab)
            if ab is not None:
                data_start = ab_lo + ab_chips
                avail = min(pay_chips, len(chips) - data_start)
                blocks = []
                for k in range(avail // cw):
                    lo = data_start + k * cw
                    try:
                        blocks.append(decode_rll(chips[lo:lo + cw], scheme))
                    except InvalidCodeword:
                        break
                if blocks:
                    fragment = np.concatenate(blocks)
                    complete = len(fragment) == payload_bits
                    keep = True
                    tail_lo = data_start + pay_chips
                    if complete and tail_lo + ab_chips <= len(chips):
                        tail = _decode_ab(chips[tail_lo:tail_lo + ab_chips], n_ab)
                        if tail is not None and tail != ab:
                            keep = False
                    if keep:
                        parts.append(DecodedPart(frame_index, Direction.FORWARD,
                                                 ab, fragment, complete, p))
    return parts


def fuse_pair(prefix: DecodedPart, suffix: DecodedPart,
              payload_bits: int) -> tuple[np.ndarray, bool]:
    """Overlay a payload prefix and suffix; returns (payload, overlap_flag).

    Where the fragments overlap they must agree; on disagreement the
    forward (earlier-row) fragment wins and the result is flagged.
    """
    fwd, bwd = prefix.fragment, suffix.fragment
    if len(fwd) + len(bwd) < payload_bits:
        raise UnfusablePair(
            f"prefix ({len(fwd)} bits) + suffix ({len(bwd)} bits) "
            f"cannot cover a {payload_bits}-bit payload"
        )
    payload = np.empty(payload_bits, dtype=np.int8)
    payload[:len(fwd)] = fwd
    payload[payload_bits - len(bwd):] = bwd
    lo, hi = payload_bits - len(bwd), len(fwd)
    flagged = False
    if hi > lo:
        overlap_fwd = fwd[lo:hi]
        overlap_bwd = bwd[:hi - lo]
        if not np.array_equal(overlap_fwd, overlap_bwd):
            flagged = True
            payload[lo:hi] = overlap_fwd
    return payload, flagged


def fuse(parts: list[DecodedPart], payload_bits: int
         ) -> tuple[list[np.ndarray], bool]:
    """Payload samples from one group of same-state parts.

    Complete parts pass through; incomplete prefixes and suffixes are
    joined, same-frame pairs first.  Raises UnfusablePair when the parts
    cannot produce a single full payload.
    """
    samples = [p.fragment for p in parts if p.complete]
    prefixes = [p for p in parts
                if not p.complete and p.direction is Direction.FORWARD]
    suffixes = [p for p in parts
                if not p.complete and p.direction is Direction.BACKWARD]
    flagged = False

    # intra-frame fusion first: both halves seen within one image
    used_s: set[int] = set()
    rest_p = []
    for pre in prefixes:
        match = None
        for j, suf in enumerate(suffixes):
            if j not in used_s and suf.frame_index == pre.frame_index \
                    and len(pre.fragment) + len(suf.fragment) >= payload_bits:
                match = j
                break
        if match is None:
            rest_p.append(pre)
        else:
            used_s.add(match)
            payload, flag = fuse_pair(pre, suffixes[match], payload_bits)
            samples.append(payload)
            flagged |= flag

    # inter-frame fusion: longest remaining halves joined pairwise
    rest_s = [s for j, s in enumerate(suffixes) if j not in used_s]
    rest_p.sort(key=lambda p: len(p.fragment), reverse=True)
    rest_s.sort(key=lambda p: len(p.fragment), reverse=True)
    for pre, suf in zip(rest_p, rest_s):
        if len(pre.fragment) + len(suf.fragment) >= payload_bits:
            payload, flag = fuse_pair(pre, suf, payload_bits)
            samples.append(payload)
            flagged |= flag

    if not samples:
        longest_p = max((len(p.fragment) for p in rest_p), default=0)
        longest_s = max((len(s.fragment) for s in rest_s), default=0)
        raise UnfusablePair(
            f"best prefix ({longest_p} bits) + suffix ({longest_s} bits) "
            f"cannot cover a {payload_bits}-bit payload"
        )
    return samples, flagged


def majority_vote(samples: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Per-position majority; ties take the earliest sample and are flagged."""
    if not samples:
        raise ValueError("majority_vote needs at least one sample")
    stack = np.stack([np.asarray(s, dtype=np.int8) for s in samples])
    ones = stack.sum(axis=0)
    n = len(samples)
    voted = (2 * ones > n).astype(np.int8)
    ties = np.flatnonzero(2 * ones == n)
    if len(ties):
        voted[ties] = stack[0][ties]
    return voted, ties


V2_STATE_CYCLE = tuple(ab_state_v2(i) for i in range(4))


def detect_missed(observations, version: FrameStructure = FrameStructure.V2_TWO_AB,
                  cycle: tuple[tuple[int, int], ...] = V2_STATE_CYCLE
                  ) -> list[GapReport]:
    """Missed-packet reports from consecutive (state, payload) observations.

    observations: iterable of (ab_state, payload[, frame_index]) in stream
    order.  The state distance around the four-state cycle gives the gap;
    identical states with identical payloads are a resample of the same
    packet, identical states with different payloads mean a full cycle
    (three packets) was skipped.
    """
    if version is not FrameStructure.V2_TWO_AB:
        raise ValueError("missed-packet detection requires the two-bit structure")
    index_of = {state: i for i, state in enumerate(cycle)}
    reports = []
    prev = None
    for obs in observations:
        state, payload = obs[0], obs[1]
        frame = obs[2] if len(obs) > 2 else -1
        if tuple(state) not in index_of:
            raise ValueError(f"unknown Ab state {state!r}")
        if prev is not None:
            p_state, p_payload, p_frame = prev
            g = (index_of[tuple(state)] - index_of[tuple(p_state)]) % 4
            if g == 0:
                missed = 0 if np.array_equal(payload, p_payload) else 3
            else:
                missed = g - 1
            if missed:
                reports.append(GapReport(tuple(p_state), missed,
                                         (p_frame, frame)))
        prev = (tuple(state), np.asarray(payload), frame)
    return reports


@dataclass
class _Group:
    ab_state: tuple[int, ...]
    parts: list[DecodedPart] = field(default_factory=list)
    known: np.ndarray | None = None  # reference bits from the first complete part

    def conflicts(self, part: DecodedPart) -> bool:
        if self.known is None:
            return False
        frag = part.fragment
        if part.direction is Direction.FORWARD:
            ref = self.known[:len(frag)]
        else:
            ref = self.known[len(self.known) - len(frag):]
        return not np.array_equal(ref, frag)

    def absorb(self, part: DecodedPart):
        self.parts.append(part)
        if self.known is None and part.complete:
            self.known = part.fragment


def group_parts(parts: list[DecodedPart]) -> list[_Group]:
    """Contiguous same-state runs, split when payload evidence conflicts.

    The split on conflicting complete payloads keeps packets four indices
    apart (same two-bit state) from being merged, which is what lets the
    gap detector see a skipped full cycle.
    """
    groups: list[_Group] = []
    current: _Group | None = None
    for part in parts:
        if current is None or part.ab_state != current.ab_state \
                or current.conflicts(part):
            current = _Group(part.ab_state)
            groups.append(current)
        current.absorb(part)
    return groups


def decode_samples(samples: list[FrameSample],
                   config: DecoderConfig) -> LinkReport:
    """Full decode of a frame sequence into a link report."""
    parts: list[DecodedPart] = []
    frames_with_sf = 0
    for sample in samples:
        rows = sample.covered_slice()
        chips = frame_to_chips(rows, config)
        if chips is None:
            continue
        frames_with_sf += 1
        parts.extend(decode_frame(chips, config.scheme, config.version,
                                  config.payload_bits, sample.index))

    groups = group_parts(parts)
    recovered: list[RecoveredGroup] = []
    unrecovered = 0
    for group in groups:
        if config.fusion:
            try:
                group_samples, flagged = fuse(group.parts, config.payload_bits)
            except UnfusablePair:
                unrecovered += 1
                continue
        else:
            group_samples = [p.fragment for p in group.parts if p.complete]
            flagged = False
            if not group_samples:
                unrecovered += 1
                continue
        voted, ties = majority_vote(group_samples)
        frames = [p.frame_index for p in group.parts]
        recovered.append(RecoveredGroup(
            ab_state=group.ab_state,
            payload=voted,
            first_frame=min(frames),
            last_frame=max(frames),
            n_parts=len(group.parts),
            n_samples=len(group_samples),
            tie_positions=tuple(int(t) for t in ties),
            overlap_flagged=flagged,
        ))

    gaps: list[GapReport] = []
    if config.version is FrameStructure.V2_TWO_AB:
        observations = [(g.ab_state, g.payload, g.first_frame)
                        for g in recovered]
        gaps = detect_missed(observations)

    return LinkReport(
        n_frames=len(samples),
        n_frames_with_sf=frames_with_sf,
        n_parts=len(parts),
        n_complete_parts=sum(p.complete for p in parts),
        groups=recovered,
        n_unrecovered_groups=unrecovered,
        gaps=gaps,
    )
