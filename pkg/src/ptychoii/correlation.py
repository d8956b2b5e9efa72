"""Intensity-fluctuation correlation and Fourier-modulus extraction.

The estimator averages the circular spatial autocorrelation of the
fluctuation frames ``I_k - <I>`` over the ensemble (Wiener-Khinchin: the
autocorrelation is the inverse transform of the power spectrum). For a
delta-correlated thermal source behind a transmittance ``O`` and a far-field
detector, the raw map at lag ``d`` equals ``|F{O * mask}|^2(d)`` up to the
``(N - 1)/N`` factor from subtracting the sample mean, with ``F`` the unitary
DFT. Lag bin ``d`` is therefore read directly as object-frequency bin ``d``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .optics import SpeckleEnsemble

__all__ = [
    "CorrelationMap",
    "AmplitudeMap",
    "fluct_autocorr",
    "g2_point",
    "amplitude_from_correlation",
    "noise_sigma",
    "analytic_spectrum",
]

_CHUNK = 64


@dataclass
class CorrelationMap:
    """Correlation over lag space, zero lag at ``(h//2, w//2)``."""

    data: np.ndarray
    n_frames_used: int
    normalization: str = "raw"

    @property
    def center(self) -> tuple[int, int]:
        return (self.data.shape[0] // 2, self.data.shape[1] // 2)

    @property
    def peak(self) -> float:
        return float(self.data[self.center])

    def normalized(self) -> "CorrelationMap":
        p = self.peak
        if not p > 0:
            raise ValueError(f"zero-lag correlation is {p}; ensemble has no fluctuation")
        return CorrelationMap(self.data / p, self.n_frames_used, "peak-normalized")


@dataclass
class AmplitudeMap:
    """Fourier modulus on the centred frequency grid of the object."""

    data: np.ndarray
    position_index: int = 0

    @property
    def shape(self):
        return self.data.shape


def fluct_autocorr(ensemble: SpeckleEnsemble) -> CorrelationMap:
    """Ensemble-averaged circular autocorrelation of intensity fluctuations.

    Returns ``(1/N) sum_k sum_x dI_k(x) dI_k(x + d)`` with ``dI_k = I_k - mean_k I``.
    Frames are reduced in fixed-size chunks in index order, so the result
    does not depend on how the ensemble was produced.
    """
    frames = ensemble.frames
    n = frames.shape[0]
    if n < 2:
        raise ValueError("fluctuation correlation needs at least 2 frames")
    mean = frames.mean(axis=0)
    h, w = frames.shape[1:]
    power = np.zeros((h, w // 2 + 1))
    for i in range(0, n, _CHUNK):
        spec = sfft.rfft2(frames[i:i + _CHUNK] - mean)
        power += np.sum(spec.real ** 2 + spec.imag ** 2, axis=0)
    acf = sfft.irfft2(power / n, s=(h, w))
    # exact lag symmetry: acf(d) and acf(-d) averaged bitwise-identically
    acf = 0.5 * (acf + np.roll(acf[::-1, ::-1], (1, 1), axis=(0, 1)))
    return CorrelationMap(sfft.fftshift(acf), n, "raw")


def g2_point(ensemble: SpeckleEnsemble, pixel) -> float:
    """Normalised zero-delay intensity correlation ``<I^2> / <I>^2`` at one pixel."""
    if ensemble.n_frames < 2:
        raise ValueError("g2 needs at least 2 frames")
    r, c = int(pixel[0]), int(pixel[1])
    h, w = ensemble.shape
    if not (0 <= r < h and 0 <= c < w):
        raise IndexError(f"pixel {pixel} outside {h}x{w} frame")
    v = ensemble.frames[:, r, c]
    m = v.mean()
    if m == 0:
        raise ValueError(f"mean intensity at pixel {pixel} is zero")
    return float(np.mean(v * v) / (m * m))


def noise_sigma(cmap: CorrelationMap) -> float:
    """Estimator noise level, the RMS of the negative map entries.

    The true map is non-negative, so negative entries are pure estimator
    noise; for symmetric noise their RMS estimates its standard deviation.
    """
    neg = cmap.data[cmap.data < 0]
    return float(np.sqrt(np.mean(neg * neg))) if neg.size else 0.0


def amplitude_from_correlation(cmap: CorrelationMap, position_index: int = 0,
                               normalize: bool = True, noise_floor: float = 0.0) -> AmplitudeMap:
    """Fourier modulus from a correlation map: clamp at 0, peak-normalise, square root.

    ``noise_floor = c > 0`` first subtracts ``c * noise_sigma(cmap)`` from
    every entry, which removes the positive bias the clamp leaves in bins
    that hold only noise. With ``normalize=False`` the raw map is used; it
    keeps the absolute scale ``|F{O * mask}|`` shared across scan positions.
    """
    if noise_floor < 0:
        raise ValueError("noise_floor must be non-negative")
    d = cmap.data
    if noise_floor > 0:
        d = d - noise_floor * noise_sigma(cmap)
    peak = float(d[cmap.center])
    if not peak > 0:
        raise ValueError(f"zero-lag correlation is {peak}; cannot normalise")
    d = np.clip(d, 0.0, None)
    if normalize:
        d = d / peak
    return AmplitudeMap(np.sqrt(d), position_index)


def analytic_spectrum(transmittance: np.ndarray, normalize: bool = True) -> np.ndarray:
    """``|F{t}|^2`` of a real transmittance on the centred, unitary frequency grid.

    Brute-force direct DFT by separable matrix products, independent of the
    FFT path; used as the reference the estimator is checked against.
    """
    t = np.asarray(transmittance, dtype=np.float64)
    h, w = t.shape
    # centred frequencies, centred coordinates
    kr = np.arange(h) - h // 2
    kc = np.arange(w) - w // 2
    wr = np.exp(-2j * np.pi * np.outer(kr, kr) / h)
    wc = np.exp(-2j * np.pi * np.outer(kc, kc) / w)
    spec = wr @ t @ wc.T / np.sqrt(h * w)
    p = np.abs(spec) ** 2
    if normalize:
        p = p / p[h // 2, w // 2]
    return p
