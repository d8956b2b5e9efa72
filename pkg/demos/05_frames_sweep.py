"""
How many speckle frames are needed?
===================================

The correlation estimate, and with it the reconstruction, improves with the
number of frames. Even ten frames carry enough of the spectrum to beat a
noise image by a wide margin.
"""

from ptychoii.config import ExperimentConfig
from ptychoii.experiments import run_frames_sweep

cfg = ExperimentConfig(n_seeds=1, frame_counts=(10, 100, 1000))
res = run_frames_sweep(cfg, out=False)
print(f"noise baseline {res.summary['noise_baseline']:.3f}")
for n, q in res.summary["quality"].items():
    print(f"N = {n:>5s}   quality {q:.3f}   spectrum RMSE {res.summary['spectrum_rmse'][n]:.4f}")
