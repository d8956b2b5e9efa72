"""
Probe-position error and loose support
======================================

The true probe positions are jittered; reconstruction only knows the
nominal ones. Quality drops as the error grows. Dilating the per-position
support ("loose support") gives the update room to place content the
misplaced probe actually saw. A few pixels of slack help, while too much
slack lets the object drift.

The error percentage refers to the probe radius here (see ``shift_reference``).
Two seeds over the full sweep take about four minutes on one core.
"""

from dataclasses import replace

from ptychoii.config import ExperimentConfig
from ptychoii.experiments import run_loose_support, run_shift_error

cfg = ExperimentConfig(n_seeds=2, shift=(0.0, 10.0, 25.0, 50.0))

res = run_shift_error(cfg, out=False)
for pct, q in res.summary.items():
    print(f"shift {pct:>3s}%   median quality {q:.3f}")

res = run_loose_support(replace(cfg, loose=(0, 5, 10)), out=False)
for pct, row in res.summary.items():
    print(f"shift {pct}%:  " + "  ".join(f"loose {l}: {q:.3f}" for l, q in row.items()))
