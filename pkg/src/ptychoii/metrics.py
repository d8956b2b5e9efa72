"""Reconstruction quality up to the trivial ambiguities of Fourier-modulus data."""

from __future__ import annotations

import numpy as np

__all__ = ["registered_quality", "spectrum_rmse", "noise_baseline"]


def _ncc_all_shifts(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # circular cross-correlation of zero-mean unit-norm images, every shift at once
    fa = np.fft.fft2(a)
    fb = np.fft.fft2(b)
    return np.real(np.fft.ifft2(fa * np.conj(fb)))


def registered_quality(recon, truth) -> float:
    """Best zero-mean normalised cross-correlation over registrations.

    The maximum is taken over every circular translation of ``recon`` and of
    its 180-degree rotation, so translated or point-reflected solutions
    score the same as the truth. Positive scaling does not change the value.
    """
    r = np.real(np.asarray(getattr(recon, "data", recon), dtype=np.complex128))
    t = np.asarray(getattr(truth, "data", truth), dtype=np.float64)
    if r.shape != t.shape:
        raise ValueError(f"shape mismatch {r.shape} vs {t.shape}")
    r = r - r.mean()
    t = t - t.mean()
    nr, nt = np.linalg.norm(r), np.linalg.norm(t)
    if nr == 0 or nt == 0:
        raise ValueError("quality is undefined for a constant image")
    r /= nr
    t /= nt
    best = max(_ncc_all_shifts(t, r).max(), _ncc_all_shifts(t, r[::-1, ::-1]).max())
    return float(np.clip(best, -1.0, 1.0))


def spectrum_rmse(estimate, reference) -> float:
    """Root-mean-square difference between two maps."""
    e = np.asarray(estimate, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    return float(np.sqrt(np.mean((e - r) ** 2)))


def noise_baseline(truth, n: int = 10, seed: int = 0) -> float:
    """Median quality of uniform-noise images against ``truth`` (chance level).

    Noise image ``i`` is drawn from ``PCG64(seed + i)``.
    """
    t = np.asarray(getattr(truth, "data", truth), dtype=np.float64)
    scores = []
    for i in range(n):
        rng = np.random.Generator(np.random.PCG64((int(seed) + i) & ((1 << 64) - 1)))
        scores.append(registered_quality(rng.random(t.shape), t))
    return float(np.median(scores))
