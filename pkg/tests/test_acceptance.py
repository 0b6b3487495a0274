"""Acceptance suite: one test per release criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
pass lines.
"""

import csv
import itertools
from fractions import Fraction

import numpy as np
import pytest

from occsim.analysis import (
    FusionStudyConfig,
    bit_rate_limit,
    der,
    fusion_gain_experiment,
    scheme_overhead,
    sweep_frequency,
    symbols_per_image,
    throughput_packet,
)
from occsim.camera import CameraConfig, sample_frames
from occsim.cli import main as cli_main
from occsim.configs import PRESETS
from occsim.experiment import gap_accounting, random_payloads, run_link
from occsim.framing import (
    FrameStructure,
    PacketPlan,
    build_packet_stream,
    repetition_count,
    subpacket_chip_length,
)
from occsim.rll import (
    DECODE_8B10B,
    ENCODE_4B6B,
    ENCODE_8B10B,
    MANCHESTER_PAIRS,
    ChipStream,
    RllScheme,
    chips_to_ascii,
    decode_rll,
    efficiency,
    encode_rll,
    preamble,
)

V1 = FrameStructure.V1_ONE_AB
V2 = FrameStructure.V2_TWO_AB
MAN = RllScheme.MANCHESTER


def ok(criterion: str, detail: str):
    print(f"PASS {criterion}: {detail}")


def test_criterion_01_rll_constants():
    assert efficiency(RllScheme.MANCHESTER) == Fraction(1, 2)
    assert efficiency(RllScheme.FOUR_B_SIX_B) == Fraction(4, 6)
    assert efficiency(RllScheme.EIGHT_B_TEN_B) == Fraction(8, 10)
    assert chips_to_ascii(preamble(RllScheme.MANCHESTER)) == "011100"
    assert chips_to_ascii(preamble(RllScheme.FOUR_B_SIX_B)) == "0011111000"
    assert chips_to_ascii(preamble(RllScheme.EIGHT_B_TEN_B)) == \
        "0000111111111100000"
    ok("criterion 1", "efficiencies {1/2, 4/6, 8/10} and preamble patterns exact")


def _rd_words(rd):
    out = []
    for byte in range(256):
        word = ENCODE_8B10B[(byte, rd)]
        out.append((word, rd if sum(word) == 5 else -rd))
    return out


def test_criterion_02_codec_soundness():
    # exhaustive roundtrips
    for value in range(16):
        bits = [int(c) for c in format(value, "04b")]
        assert decode_rll(encode_rll(bits, RllScheme.FOUR_B_SIX_B),
                          RllScheme.FOUR_B_SIX_B).tolist() == bits
    for value in range(256):
        bits = [int(c) for c in format(value, "08b")]
        assert decode_rll(encode_rll(bits, RllScheme.EIGHT_B_TEN_B),
                          RllScheme.EIGHT_B_TEN_B).tolist() == bits
    rng = np.random.default_rng(2024)
    payload = rng.integers(0, 2, size=10_000).astype(np.int8)
    assert np.array_equal(decode_rll(encode_rll(payload, MAN), MAN), payload)

    # preamble uniqueness over codeword pairs/triples plus Ab chips
    ab_syms = [tuple(MANCHESTER_PAIRS[0]), tuple(MANCHESTER_PAIRS[1])]
    false_hits = 0

    sf = chips_to_ascii(preamble(MAN))
    for combo in itertools.product(ab_syms, repeat=3):
        false_hits += sf in "".join("".join(map(str, s)) for s in combo)

    sf = chips_to_ascii(preamble(RllScheme.FOUR_B_SIX_B))
    symbols = list(ENCODE_4B6B.values()) + ab_syms
    for combo in itertools.product(symbols, repeat=3):
        false_hits += sf in "".join("".join(map(str, s)) for s in combo)

    sf = chips_to_ascii(preamble(RllScheme.EIGHT_B_TEN_B))
    for rd0 in (-1, 1):
        for w1, rd1 in _rd_words(rd0):
            t1 = "".join(map(str, w1))
            for w2, _ in _rd_words(rd1):
                false_hits += sf in t1 + "".join(map(str, w2))
    # windows spanning three codewords contain one whole codeword, and no
    # interior SF slice is a valid codeword
    for a in range(1, 9):
        assert tuple(int(c) for c in sf[a:a + 10]) not in DECODE_8B10B
    # Ab adjacency cannot complete an SF either
    words = {w for rd in (-1, 1) for w, _ in _rd_words(rd)}
    for word in words:
        t = "".join(map(str, word))
        for ab in ab_syms:
            s = "".join(map(str, ab))
            false_hits += (sf in t + s) + (sf in s + t)

    assert false_hits == 0
    ok("criterion 2", "roundtrips exhaustive and zero false SF matches")


def _oversampling_run(clock, payload_bits, rows, packets, distinct, seed):
    ds_chips = subpacket_chip_length(payload_bits, MAN, V1)
    plan = PacketPlan.fill_slot(10.0, ds_chips / clock, clock)
    # repetition count from the longest frame interval at the 20 fps floor
    assert plan.repetitions >= repetition_count(1 / 20.0, ds_chips / clock)
    payloads = random_payloads(packets, payload_bits, seed, distinct=distinct)
    camera = CameraConfig(rows=rows, row_period_s=1 / (2 * clock),
                          row_exposure_s=1 / (2 * clock),
                          mean_fps=27.5, delta_fps=7.5, seed=seed + 1)
    outcome = run_link(payloads, plan, MAN, V1, camera, rows_per_chip=2)
    sent = [p.tolist() for p in outcome.transmitted]
    got = [g.payload.tolist() for g in outcome.report.groups]
    return sent, got


def test_criterion_03_oversampling_end_to_end():
    # 20-35 fps, 10 packets/s, Manchester at 1 kHz and 2 kHz, zero noise
    sent1, got1 = _oversampling_run(1000.0, 5, 56, 500, False, 101)
    assert got1 == sent1
    sent2, got2 = _oversampling_run(2000.0, 15, 112, 500, True, 202)
    assert got2 == sent2
    ok("criterion 3",
       f"{len(sent1)} payloads at 1 kHz and {len(sent2)} at 2 kHz decoded "
       "with zero payload errors")


DEEP_FUSION = FusionStudyConfig(
    payload_bits_grid=(175,),
    distance_ratios=(1.8,),
    packet_rate=0.2,
    optical_clock_hz=8640.0,
    camera_rows=490,
    mean_fps=27.5,
    delta_fps=7.5,
    packets=100,
    seed=11,
)

SPAN_FUSION = FusionStudyConfig(
    payload_bits_grid=(20, 30, 40, 50),
    distance_ratios=(0.94, 0.97, 1.00, 1.03, 1.06),
    packets=30,
    seed=17,
)


def test_criterion_04_fusion_gain():
    deep = fusion_gain_experiment(DEEP_FUSION)
    fused = {r.fusion: r.recovered_fraction for r in deep}
    assert fused[True] >= 0.99
    assert fused[False] <= 0.10

    # no-fusion maximum distance proportional to 1/ds_length: with fixed
    # optics the reference distance already scales as 1/ds_length, so the
    # measured maximum distance ratios must agree across the grid
    span = fusion_gain_experiment(SPAN_FUSION)
    ratio_max = {}
    for row in span:
        if row.fusion:
            continue
        if row.recovered_fraction >= 0.5:
            ratio_max[row.ds_length_s] = max(
                ratio_max.get(row.ds_length_s, 0.0), row.distance_ratio)
    assert len(ratio_max) == 4
    spread = max(ratio_max.values()) / min(ratio_max.values())
    assert spread <= 1.10
    ok("criterion 4",
       f"fusion {fused[True]:.3f} vs {fused[False]:.3f} at 1.8x reference "
       f"distance; max-distance spread x{spread:.3f} over 4 sub-packet lengths")


def test_criterion_05_detection_completeness():
    # V2 at 20 packets/s; nominal 20-35 fps with random drops capped at 3
    # consecutive keeps the realized floor at or above 5 fps
    packets = 10_000
    payloads = random_payloads(packets, 18, seed=9, distinct=True)
    plan = PacketPlan.fill_slot(20.0, 50 / 4000, 4000.0)
    camera = CameraConfig(rows=200, row_period_s=1 / 8000,
                          row_exposure_s=1 / 8000,
                          mean_fps=27.5, delta_fps=7.5, seed=21)
    outcome = run_link(payloads, plan, MAN, V2, camera, rows_per_chip=2,
                       keep_probability=0.45, max_consecutive_drops=3)
    accounting = gap_accounting(outcome)
    assert accounting.corrupt_observations == 0
    mismatched = [(t, r) for t, r in accounting.pairs if t != r]
    assert mismatched == []
    assert accounting.true_missed() > 0
    ok("criterion 5",
       f"{packets} packets, {accounting.true_missed()} missed payloads all "
       "reported exactly (zero undetected, zero spurious)")


def test_criterion_06_formula_arithmetic():
    assert symbols_per_image(1000) == 32
    assert symbols_per_image(2000) == 63
    assert symbols_per_image(8000) == 249
    assert bit_rate_limit(efficiency(MAN), 63, 8, 20) == 550
    assert der(20, 10) == Fraction(10, 9600)
    ok("criterion 6", "symbol budgets, 550 bps limit, and 10/9600 DER exact")


def test_criterion_07_repetition_invariance():
    clock = 1000.0
    payload_bits = 5
    ds = subpacket_chip_length(payload_bits, MAN, V1) / clock
    payloads = random_payloads(4, payload_bits, seed=3)
    throughputs = set()
    for reps in range(1, 9):
        plan = PacketPlan(5.0, ds, reps, clock)
        stream = build_packet_stream(payloads, plan, MAN, V1)
        assert stream.duration_s == pytest.approx(len(payloads) / plan.packet_rate)
        net_bits = payload_bits * len(payloads)
        throughputs.add(net_bits / stream.duration_s)
        assert throughput_packet(efficiency(MAN), plan.ds_chips, 8,
                                 plan.packet_rate) == 30
    assert len(throughputs) == 1
    ok("criterion 7", "net throughput identical for N in 1..8")


def test_criterion_08_sweep_shape():
    rows = sweep_frequency()
    for f in (4000, 5000, 6000, 7000, 8000):
        at_f = {r.scheme: r.bitrate_bps for r in rows if r.f_hz == f}
        assert at_f["8b10b"] > at_f["4b6b"]
        assert at_f["8b10b"] > at_f["manchester"]
    both = sorted(f for f in {r.f_hz for r in rows}
                  if all(r.bitrate_bps is not None for r in rows
                         if r.f_hz == f and r.scheme in ("4b6b", "8b10b")))
    lowest = {r.scheme: r.bitrate_bps for r in rows if r.f_hz == both[0]}
    assert lowest["4b6b"] >= lowest["8b10b"]
    for scheme in ("manchester", "4b6b", "8b10b"):
        rates = [r.bitrate_bps for r in rows
                 if r.scheme == scheme and r.bitrate_bps is not None]
        assert all(b >= a for a, b in zip(rates, rates[1:]))
    ok("criterion 8",
       f"8B10B leads from 4 kHz, 4B6B leads at {both[0]:g} Hz, all curves "
       "non-decreasing")


def test_criterion_09_reference_throughput_caveat(tmp_path):
    # the bundled hardware reference numbers are measurements, not model
    # outputs; the computed ceilings must land in the same decade band and
    # be documented beside them in the sweep report
    computed = {}
    for name, preset in PRESETS.items():
        if preset.reported_limit_bps is None:
            continue
        value = bit_rate_limit(
            efficiency(preset.rll_scheme),
            symbols_per_image(preset.optical_clock_hz),
            scheme_overhead(preset.rll_scheme, preset.frame_structure), 20)
        computed[name] = value
        assert 100 <= value <= 10_000
    assert len(computed) == 3

    out = tmp_path / "sweep.csv"
    assert cli_main(["sweep", "--out", str(out)]) == 0
    with open(tmp_path / "sweep_reference.csv") as fh:
        reference = list(csv.DictReader(fh))
    assert {r["config"] for r in reference} == set(computed)
    for row in reference:
        assert float(row["computed_limit_bps"]) == float(computed[row["config"]])
        assert float(row["reported_limit_bps"]) > 0
    ok("criterion 9",
       "computed ceilings " +
       ", ".join(f"{k}={float(v):g} bps" for k, v in computed.items()) +
       " within 100 bps-10 kbps, documented beside reported values")


def test_criterion_10_conservation_and_determinism(tmp_path):
    rng = np.random.default_rng(77)
    for _ in range(10):
        chips = rng.integers(0, 2, size=200).astype(np.int8)
        stream = ChipStream(chips, 1000.0)
        camera = CameraConfig(rows=100, row_period_s=0.002,
                              row_exposure_s=0.002, mean_fps=2.5,
                              delta_fps=0.0, seed=1)
        frames = sample_frames(stream, camera)
        assert len(frames) == 1
        assert abs(frames[0].row_luma.mean() - chips.mean()) < 1e-9

    config = PRESETS["table8_manchester_1k"]
    import dataclasses
    config = dataclasses.replace(config, trials=10)
    config_path = tmp_path / "config.json"
    config_path.write_text(config.to_json())
    stream_path = tmp_path / "stream.chips"
    assert cli_main(["encode", "--config", str(config_path),
                     "--out", str(stream_path)]) == 0
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert cli_main(["simulate", "--config", str(config_path),
                         "--stream", str(stream_path), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    ok("criterion 10",
       "duty-cycle conservation within 1e-9 and byte-identical reruns")
