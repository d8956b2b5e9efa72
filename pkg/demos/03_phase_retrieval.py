"""
ER, HIO and ptychographic retrieval
===================================

ER and HIO see one far-field measurement of the whole scanned area; the
ptychographic engine (PII) sees one measurement per overlapping probe
position. Sixteen overlapping views pin the object down where a single
view leaves the iterative solvers stagnating.

The scan is the default desk-scale one: 128 x 128 grid, 40 px probe,
16 steps of 4 px. ER and HIO run 1000 iterations each; the whole script
takes about half a minute.
"""

from ptychoii.config import ExperimentConfig
from ptychoii.experiments import run_compare_algorithms

cfg = ExperimentConfig(n_seeds=1, frames=1000)
res = run_compare_algorithms(cfg, out=False)
for r in res.records:
    print(f"{r.params['algorithm']:4s} quality {r.quality:.3f}   final residual {r.final_residual:.4f}"
          f"   ({r.runtime_s:.1f} s)")
