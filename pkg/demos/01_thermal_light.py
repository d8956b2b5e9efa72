"""
Pseudothermal light on a grid
=============================

A delta-correlated circular complex Gaussian field stands in for laser
light scattered by a rotating ground glass. Its intensity is exponential
with unit mean, and a single pixel recorded over many frames shows photon
bunching: <I^2> / <I>^2 = 2.
"""

import numpy as np
from scipy import stats

from ptychoii.objects import make_object
from ptychoii.optics import gen_thermal_field, simulate_ensemble
from ptychoii.correlation import g2_point
from ptychoii.scan import probe_mask

# one frame of the source: 256 x 256 independent pixels
e = gen_thermal_field((256, 256), seed=1).data
inten = np.abs(e) ** 2
print(f"mean |E|^2       {inten.mean():.4f}   (1 expected)")
print(f"KS vs exponential p = {stats.kstest(inten.ravel(), 'expon').pvalue:.3f}")

ph = np.angle(e).ravel()
counts, _ = np.histogram(ph, bins=24, range=(-np.pi, np.pi))
print(f"phase chi^2      p = {stats.chisquare(counts).pvalue:.3f}")

# the same light through an object and a probe, seen in the far field
obj = make_object("two-disk", (64, 64))
probe = probe_mask(24, (64, 64))
ens = simulate_ensemble(obj, probe, (0, 0), n_frames=2000, master_seed=7)
print(f"g2 at pixel (10, 20) over {ens.n_frames} frames: {g2_point(ens, (10, 20)):.3f}")

# every frame can be regenerated alone from (seed, position, frame)
again = simulate_ensemble(obj, probe, (0, 0), n_frames=3, master_seed=7)
print("first frames reproduce exactly:", np.array_equal(again.frames, ens.frames[:3]))
