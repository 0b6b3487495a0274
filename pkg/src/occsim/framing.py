"""Transmit-side framing: sub-packets, repetition, and asynchronous bits.

A sub-packet is SF || Ab chips || RLL(payload) || Ab chips, measured from
one SF start to the next.  A packet repeats the same sub-packet back to
back inside its slot of 1/packet_rate seconds; the slot remainder that
cannot hold a whole sub-packet is filled with LED-off chips so the packet
grid stays exact.

Asynchronous bits carry the transmit clock state.  Structure V1 uses one
bit alternating with the packet index; V2 adds a second bit toggling at
half that rate, giving a four-state cycle so a receiver can count up to
three consecutively missed packets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .rll import (
    ChipStream,
    RllScheme,
    encode_manchester_bits,
    encode_rll,
    payload_chip_count,
    preamble,
)


class FrameStructure(Enum):
    V1_ONE_AB = "v1"
    V2_TWO_AB = "v2"


class PlanInfeasible(ValueError):
    """The requested repetitions do not fit the packet slot."""


def ab_bit_count(version: FrameStructure) -> int:
    return 1 if version is FrameStructure.V1_ONE_AB else 2


def ab_chip_count(version: FrameStructure) -> int:
    # each asynchronous bit is sent as its Manchester pair
    return 2 * ab_bit_count(version)


def ab_state_v1(packet_index: int) -> int:
    """Clock-state bit: 1 for odd packet indices, 0 for even."""
    if packet_index < 0:
        raise ValueError("packet index must be non-negative")
    return packet_index % 2


def ab_state_v2(packet_index: int) -> tuple[int, int]:
    """(Ab1, Ab2): Ab1 alternates per packet, Ab2 at half the rate."""
    if packet_index < 0:
        raise ValueError("packet index must be non-negative")
    return packet_index % 2, (packet_index // 2) % 2


def ab_bits(packet_index: int, version: FrameStructure) -> tuple[int, ...]:
    if version is FrameStructure.V1_ONE_AB:
        return (ab_state_v1(packet_index),)
    return ab_state_v2(packet_index)


def repetition_count(t_cam_max_s: float, ds_length_s: float) -> int:
    """Smallest integer repetition count covering the longest frame interval."""
    if t_cam_max_s <= 0 or ds_length_s <= 0:
        raise ValueError("durations must be positive")
    # tolerate float noise so exact ratios stay exact
    return max(1, math.ceil(t_cam_max_s / ds_length_s - 1e-9))


def subpacket_chip_length(payload_bits: int, scheme: RllScheme,
                          version: FrameStructure) -> int:
    return (len(preamble(scheme))
            + 2 * ab_chip_count(version)
            + payload_chip_count(payload_bits, scheme))


def build_subpacket(payload, packet_index: int, scheme: RllScheme,
                    version: FrameStructure) -> np.ndarray:
    """SF || Ab chips || RLL(payload) || Ab chips for one sub-packet."""
    ab = encode_manchester_bits(ab_bits(packet_index, version))
    body = encode_rll(payload, scheme)
    return np.concatenate([preamble(scheme), ab, body, ab]).astype(np.int8)


@dataclass(frozen=True)
class SubPacket:
    packet_index: int
    payload_bits: np.ndarray
    scheme: RllScheme
    version: FrameStructure

    @property
    def ab(self) -> tuple[int, ...]:
        return ab_bits(self.packet_index, self.version)

    def chips(self) -> np.ndarray:
        return build_subpacket(self.payload_bits, self.packet_index,
                               self.scheme, self.version)


@dataclass(frozen=True)
class PacketPlan:
    """Timing of one packet: slot rate, sub-packet duration, repetitions."""

    packet_rate: float
    ds_length_s: float
    repetitions: int
    optical_clock_hz: float

    def __post_init__(self):
        if self.packet_rate <= 0 or self.ds_length_s <= 0:
            raise ValueError("packet_rate and ds_length_s must be positive")
        if self.optical_clock_hz <= 0:
            raise ValueError("optical_clock_hz must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.repetitions * self.ds_chips > self.slot_chips:
            raise PlanInfeasible(
                f"{self.repetitions} sub-packets of {self.ds_chips} chips "
                f"exceed the {self.slot_chips}-chip packet slot"
            )

    @property
    def ds_chips(self) -> int:
        chips = self.ds_length_s * self.optical_clock_hz
        rounded = round(chips)
        if abs(chips - rounded) > 1e-6:
            raise ValueError("ds_length_s must be a whole number of chips")
        return rounded

    @property
    def slot_chips(self) -> int:
        return math.floor(self.optical_clock_hz / self.packet_rate + 1e-9)

    @property
    def pad_chips(self) -> int:
        return self.slot_chips - self.repetitions * self.ds_chips

    @classmethod
    def fill_slot(cls, packet_rate: float, ds_length_s: float,
                  optical_clock_hz: float) -> "PacketPlan":
        """Plan with as many whole sub-packet repetitions as the slot holds."""
        slot = math.floor(optical_clock_hz / packet_rate + 1e-9)
        ds = round(ds_length_s * optical_clock_hz)
        return cls(packet_rate, ds_length_s, max(1, slot // ds), optical_clock_hz)


def build_packet_stream(payloads, plan: PacketPlan, scheme: RllScheme,
                        version: FrameStructure) -> ChipStream:
    """Chip stream for a payload sequence on the plan's exact packet grid."""
    payloads = [np.asarray(p, dtype=np.int8) for p in payloads]
    if not payloads:
        return ChipStream(np.empty(0, dtype=np.int8), plan.optical_clock_hz)
    lengths = {len(p) for p in payloads}
    if len(lengths) != 1:
        raise ValueError("all payloads must have the same bit length")
    ds_chips = subpacket_chip_length(lengths.pop(), scheme, version)
    if ds_chips != plan.ds_chips:
        raise ValueError(
            f"plan expects {plan.ds_chips}-chip sub-packets, payloads "
            f"produce {ds_chips}"
        )

    pad = np.zeros(plan.pad_chips, dtype=np.int8)
    slots = []
    for index, payload in enumerate(payloads):
        sub = build_subpacket(payload, index, scheme, version)
        slots.append(np.tile(sub, plan.repetitions))
        slots.append(pad)
    return ChipStream(np.concatenate(slots), plan.optical_clock_hz)
