#!/usr/bin/env python3
"""Pre-train the long benchmark runs the acceptance suite scores.

Sequentially trains everything under runs/acceptance/ that is missing or
stale (several CPU-hours in total), so a later `pytest tests/test_acceptance.py`
only has to read the artifacts. Safe to re-run; finished runs are skipped.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from acceptance_runs import ensure_all

if __name__ == "__main__":
    ensure_all()
    print("all acceptance runs complete")
