"""
From speckle to Fourier modulus
===============================

Averaging the spatial autocorrelation of intensity fluctuations over many
frames gives the power spectrum of the illuminated object, |F{O * P}|^2.
Its square root is the per-position data the reconstruction uses. The
estimate gets closer to the directly computed spectrum as frames accumulate.
"""

import numpy as np

from ptychoii.correlation import amplitude_from_correlation, analytic_spectrum, fluct_autocorr
from ptychoii.metrics import spectrum_rmse
from ptychoii.objects import make_object
from ptychoii.scan import probe_mask
from ptychoii.optics import simulate_ensemble

g = 128
obj = make_object("two-disk", (g, g))
probe = probe_mask(40, (g, g), center=(64, 46))
truth = analytic_spectrum(obj.data * probe.mask)

ens = simulate_ensemble(obj, probe, (0, 0), 2000, master_seed=3)
for n in (10, 100, 1000, 2000):
    cmap = fluct_autocorr(ens.subset(n))
    print(f"N = {n:5d}   RMSE vs analytic spectrum {spectrum_rmse(cmap.normalized().data, truth):.4f}")

# raw maps keep the absolute scale: the zero-lag value is (sum O P)^2 / (h w)
cmap = fluct_autocorr(ens)
o = obj.data * probe.mask
print(f"zero lag {cmap.peak:.2f}, expected about {o.sum() ** 2 / o.size:.2f}")

# negative bins are estimator noise; a floor of 2 sigma removes most of it
amp = amplitude_from_correlation(cmap, normalize=False, noise_floor=2.0)
print(f"amplitude bins set to zero: {np.mean(amp.data == 0):.1%}")
