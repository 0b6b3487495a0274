#!/usr/bin/env python3
"""Bit-rate ceiling sweep over the usable optical-clock band.

Writes sweep.csv (per scheme and clock) and sweep_reference.csv (computed
ceilings beside previously reported hardware numbers) into results/.
"""

from pathlib import Path

from occsim.cli import main

RESULTS = Path(__file__).resolve().parent.parent / "results"


if __name__ == "__main__":
    RESULTS.mkdir(exist_ok=True)
    raise SystemExit(main(["sweep", "--out", str(RESULTS / "sweep.csv")]))
