"""Run-length limited line codes for on-off keyed LED transmission.

Three codes are supported: Manchester (1 data bit -> 2 chips), 4B6B
(4 -> 6) and 8B10B (8 -> 10, with running-disparity tracking).  A "chip"
is one binary LED state at the optical clock rate.  Each code carries a
fixed start-frame (SF) chip pattern whose internal run of identical chips
is longer than any run the code can produce, so an exact pattern match
never fires inside coded data.

The 4B6B and 8B10B codebooks are loaded from plain-text files in
``occsim/data`` so the mappings can be audited line by line.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np


class RllScheme(Enum):
    MANCHESTER = "manchester"
    FOUR_B_SIX_B = "4b6b"
    EIGHT_B_TEN_B = "8b10b"


class InvalidCodeword(ValueError):
    """A chip block matched no codebook entry (channel corruption)."""

    def __init__(self, position: int, chips):
        self.position = position
        self.chips = tuple(int(c) for c in chips)
        super().__init__(f"invalid codeword at symbol {position}: {self.chips}")


_EFFICIENCY = {
    RllScheme.MANCHESTER: Fraction(1, 2),
    RllScheme.FOUR_B_SIX_B: Fraction(4, 6),
    RllScheme.EIGHT_B_TEN_B: Fraction(8, 10),
}

_PREAMBLE = {
    RllScheme.MANCHESTER: "011100",
    RllScheme.FOUR_B_SIX_B: "0011111000",
    RllScheme.EIGHT_B_TEN_B: "0000111111111100000",
}

_BLOCK_BITS = {
    RllScheme.MANCHESTER: 1,
    RllScheme.FOUR_B_SIX_B: 4,
    RllScheme.EIGHT_B_TEN_B: 8,
}

_CODEWORD_CHIPS = {
    RllScheme.MANCHESTER: 2,
    RllScheme.FOUR_B_SIX_B: 6,
    RllScheme.EIGHT_B_TEN_B: 10,
}

# Longest run of identical chips codewords can produce, including across
# codeword boundaries and adjacent Manchester-coded asynchronous bits.
# Each preamble contains a strictly longer run (3 / 5 / 10), which is what
# makes exact preamble matches unambiguous.
MAX_DATA_RUN = {
    RllScheme.MANCHESTER: 2,
    RllScheme.FOUR_B_SIX_B: 4,
    RllScheme.EIGHT_B_TEN_B: 5,
}

# Manchester convention used everywhere, including asynchronous bits.
MANCHESTER_PAIRS = {1: (1, 0), 0: (0, 1)}


def _load_codebook(name: str, columns: int):
    table = []
    text = importlib.resources.files("occsim.data").joinpath(name).read_text()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != columns:
            raise ValueError(f"{name}: malformed line {line!r}")
        table.append(fields)
    return table


def _bits(text: str):
    return tuple(int(c) for c in text)


_RAW_4B6B = _load_codebook("codebook_4b6b.txt", 2)
ENCODE_4B6B = {int(v, 2): _bits(w) for v, w in _RAW_4B6B}
DECODE_4B6B = {w: v for v, w in ENCODE_4B6B.items()}

_RAW_8B10B = _load_codebook("codebook_8b10b.txt", 3)
# keyed by (byte, running disparity in {-1, +1})
ENCODE_8B10B = {}
DECODE_8B10B = {}
for _value, _neg, _pos in _RAW_8B10B:
    _byte = int(_value, 2)
    for _rd, _word in ((-1, _bits(_neg)), (+1, _bits(_pos))):
        ENCODE_8B10B[(_byte, _rd)] = _word
        _prev = DECODE_8B10B.setdefault(_word, _byte)
        if _prev != _byte:
            raise ValueError(f"8B10B codebook collision on {_word}")

if len(ENCODE_4B6B) != 16 or len(ENCODE_8B10B) != 512:
    raise ValueError("incomplete line-code codebook data")


@dataclass(frozen=True)
class ChipStream:
    """A timed binary LED waveform: chip values at a fixed optical clock."""

    chips: np.ndarray
    clock_hz: float

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=np.int8)
        if chips.ndim != 1:
            raise ValueError("chips must be one-dimensional")
        if chips.size and not np.isin(chips, (0, 1)).all():
            raise ValueError("chips must be 0/1 valued")
        if not self.clock_hz > 0:
            raise ValueError("clock_hz must be positive")
        object.__setattr__(self, "chips", chips)

    @property
    def duration_s(self) -> float:
        return len(self.chips) / self.clock_hz


def efficiency(scheme: RllScheme) -> Fraction:
    """Data-rate efficiency of the code (payload bits per chip)."""
    return _EFFICIENCY[scheme]


def preamble(scheme: RllScheme) -> np.ndarray:
    """Start-frame chip pattern marking each sub-packet boundary."""
    return np.array(_bits(_PREAMBLE[scheme]), dtype=np.int8)


def block_bits(scheme: RllScheme) -> int:
    return _BLOCK_BITS[scheme]


def codeword_chips(scheme: RllScheme) -> int:
    return _CODEWORD_CHIPS[scheme]


def payload_chip_count(payload_bits: int, scheme: RllScheme) -> int:
    """Chips occupied by an RLL-coded payload of the given bit length."""
    block = _BLOCK_BITS[scheme]
    if payload_bits % block:
        raise ValueError(
            f"{scheme.value} payload length must be a multiple of {block} bits"
        )
    return payload_bits // block * _CODEWORD_CHIPS[scheme]


def _pack_bits_msb(bits: np.ndarray, width: int) -> np.ndarray:
    weights = 1 << np.arange(width - 1, -1, -1)
    return bits.reshape(-1, width) @ weights


def encode_rll(bits, scheme: RllScheme) -> np.ndarray:
    """Encode payload bits into line-coded chips.

    8B10B starts at running disparity -1; the disparity carried across
    codewords keeps any encoded stream balanced within +/-2 chips.
    """
    bits = np.asarray(bits, dtype=np.int8)
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("payload bits must be 0/1 valued")
    block = _BLOCK_BITS[scheme]
    if len(bits) % block:
        raise ValueError(
            f"{scheme.value} requires a payload length divisible by {block}, "
            f"got {len(bits)}"
        )
    if len(bits) == 0:
        return np.empty(0, dtype=np.int8)

    if scheme is RllScheme.MANCHESTER:
        out = np.empty(2 * len(bits), dtype=np.int8)
        out[0::2] = bits
        out[1::2] = 1 - bits
        return out

    if scheme is RllScheme.FOUR_B_SIX_B:
        values = _pack_bits_msb(bits, 4)
        return np.concatenate([ENCODE_4B6B[int(v)] for v in values]).astype(np.int8)

    values = _pack_bits_msb(bits, 8)
    rd = -1
    words = []
    for v in values:
        word = ENCODE_8B10B[(int(v), rd)]
        words.append(word)
        if sum(word) != 5:  # unbalanced codeword flips the running disparity
            rd = -rd
    return np.concatenate(words).astype(np.int8)


def _unpack_bits_msb(value: int, width: int):
    return [(value >> k) & 1 for k in range(width - 1, -1, -1)]


def decode_rll(chips, scheme: RllScheme) -> np.ndarray:
    """Invert :func:`encode_rll`; raises :class:`InvalidCodeword` on corruption."""
    chips = np.asarray(chips, dtype=np.int8)
    width = _CODEWORD_CHIPS[scheme]
    if len(chips) % width:
        raise ValueError(
            f"{scheme.value} chip count must be a multiple of {width}, "
            f"got {len(chips)}"
        )
    bits: list[int] = []
    for pos in range(len(chips) // width):
        word = tuple(int(c) for c in chips[pos * width:(pos + 1) * width])
        if scheme is RllScheme.MANCHESTER:
            if word == (1, 0):
                bits.append(1)
            elif word == (0, 1):
                bits.append(0)
            else:
                raise InvalidCodeword(pos, word)
        elif scheme is RllScheme.FOUR_B_SIX_B:
            value = DECODE_4B6B.get(word)
            if value is None:
                raise InvalidCodeword(pos, word)
            bits.extend(_unpack_bits_msb(value, 4))
        else:
            value = DECODE_8B10B.get(word)
            if value is None:
                raise InvalidCodeword(pos, word)
            bits.extend(_unpack_bits_msb(value, 8))
    return np.array(bits, dtype=np.int8)


def encode_manchester_bits(bits) -> np.ndarray:
    """Manchester chip pairs for raw bits (used for asynchronous bits)."""
    return encode_rll(np.asarray(bits, dtype=np.int8), RllScheme.MANCHESTER)


def decode_manchester_pair(chips) -> int | None:
    """Decode one Manchester pair; None when the pair is not a valid symbol."""
    pair = tuple(int(c) for c in chips)
    if pair == (1, 0):
        return 1
    if pair == (0, 1):
        return 0
    return None


def chips_to_ascii(chips) -> str:
    return "".join(str(int(c)) for c in np.asarray(chips).ravel())


def ascii_to_chips(text: str) -> np.ndarray:
    cleaned = "".join(text.split())
    if cleaned and set(cleaned) - {"0", "1"}:
        raise ValueError("chip text must contain only 0/1")
    return np.array([int(c) for c in cleaned], dtype=np.int8)
