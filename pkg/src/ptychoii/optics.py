"""Pseudothermal speckle simulation.

Thermal illumination is modelled as a delta-correlated circular complex
Gaussian field on the object grid. The field passes through the object
(amplitude transmittance ``sqrt(O)``) and a translated probe aperture, is
propagated to the far field with a unitary centred DFT, and recorded as
intensity.

Seeds
-----
Every frame is drawn from its own generator, seeded with::

    seed_k = mix64(mix64(mix64(master_seed) ^ position_index) ^ frame_index)

where ``mix64`` is the SplitMix64 step (add the golden-ratio increment
``0x9E3779B97F4A7C15`` then apply the Stafford variant-13 finaliser with
multipliers ``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``). The
generator is ``numpy.random.Generator(PCG64(seed_k))`` and one frame
consumes ``standard_normal((2, height, width))`` (real part first).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

__all__ = [
    "ComplexField",
    "ObjectSample",
    "ProbeAperture",
    "IntensityFrame",
    "SpeckleEnsemble",
    "mix64",
    "frame_seed",
    "check_dims",
    "gen_thermal_field",
    "apply_transmission",
    "propagate_farfield",
    "inverse_farfield",
    "centered_fft2",
    "centered_ifft2",
    "record_intensity",
    "simulate_ensemble",
]

_MASK64 = (1 << 64) - 1


def mix64(x: int) -> int:
    """One SplitMix64 step: increment by the golden gamma, then finalise."""
    z = (int(x) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def frame_seed(master_seed: int, position_index: int, frame_index: int) -> int:
    """64-bit seed of one speckle frame; a pure function of its three indices."""
    s = mix64(int(master_seed) & _MASK64)
    s = mix64(s ^ (int(position_index) & _MASK64))
    return mix64(s ^ (int(frame_index) & _MASK64))


def _is_pow2(n) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def check_dims(dims) -> tuple[int, int]:
    """Validate ``(height, width)`` and return it as a tuple of ints."""
    try:
        h, w = dims
    except (TypeError, ValueError):
        raise ValueError(f"dims must be a (height, width) pair, got {dims!r}") from None
    if not (_is_pow2(h) and _is_pow2(w)):
        raise ValueError(f"grid dimensions must be powers of two, got {h}x{w}")
    return int(h), int(w)


@dataclass
class ComplexField:
    """Complex amplitude on a power-of-two grid.

    ``pitch`` is the length of one pixel in grid units; after far-field
    propagation it becomes the DFT-conjugate pitch ``1 / (n * pitch)``
    along each axis (stored as the row-axis value).
    """

    data: np.ndarray
    pitch: float = 1.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2:
            raise ValueError("field data must be two-dimensional")
        check_dims(self.data.shape)
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field contains NaN or Inf")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass
class ObjectSample:
    """Intensity transmittance ``O(r) >= 0`` of the sample."""

    data: np.ndarray
    name: str = "object"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("object must be two-dimensional")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("object contains NaN or Inf")
        if np.any(self.data < 0):
            raise ValueError("object transmittance must be non-negative")
        if not np.any(self.data > 0):
            raise ValueError("object must have at least one positive pixel")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass
class ProbeAperture:
    """Probe mask on the full grid, centred at ``center`` before translation."""

    mask: np.ndarray
    diameter: float
    center: tuple[int, int]

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.float64)
        if np.any(self.mask < 0) or np.any(self.mask > 1):
            raise ValueError("probe mask values must lie in [0, 1]")
        self.center = (int(self.center[0]), int(self.center[1]))

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def bbox(self) -> tuple[int, int, int, int]:
        """Inclusive (row_min, row_max, col_min, col_max) of the non-zero support."""
        rows, cols = np.nonzero(self.mask)
        if rows.size == 0:
            return (0, -1, 0, -1)
        return int(rows.min()), int(rows.max()), int(cols.min()), int(cols.max())

    def fits(self, offset) -> bool:
        r0, r1, c0, c1 = self.bbox()
        dr, dc = int(offset[0]), int(offset[1])
        h, w = self.shape
        return r0 + dr >= 0 and c0 + dc >= 0 and r1 + dr < h and c1 + dc < w

    def translated(self, offset) -> np.ndarray:
        """Mask moved by a whole-pixel ``(drow, dcol)`` offset.

        Raises ``ValueError`` when any part of the support would leave the grid.
        """
        if not self.fits(offset):
            raise ValueError(
                f"probe translated by {tuple(int(o) for o in offset)} leaves the "
                f"{self.shape[0]}x{self.shape[1]} grid"
            )
        return np.roll(self.mask, (int(offset[0]), int(offset[1])), axis=(0, 1))


@dataclass
class IntensityFrame:
    data: np.ndarray
    pitch: float = 1.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if np.any(self.data < 0):
            raise ValueError("intensity must be non-negative")


@dataclass
class SpeckleEnsemble:
    """Stack of speckle frames recorded at one probe position.

    ``frames`` is a ``(n_frames, height, width)`` float64 array; frame ``k``
    is reproducible from ``(master_seed, position_index, k)``.
    """

    frames: np.ndarray
    position_index: int = 0
    master_seed: int = 0
    position: tuple[int, int] = (0, 0)
    pitch: float = 1.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim == 2:
            self.frames = self.frames[None]
        if self.frames.ndim != 3 or self.frames.shape[0] < 1:
            raise ValueError("ensemble needs at least one 2-D frame")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1:]

    def subset(self, n: int) -> "SpeckleEnsemble":
        """The first ``n`` frames; identical to simulating ``n`` frames directly."""
        if not 1 <= n <= self.n_frames:
            raise ValueError(f"cannot take {n} of {self.n_frames} frames")
        return SpeckleEnsemble(self.frames[:n], self.position_index,
                               self.master_seed, self.position, self.pitch)

    def frame(self, k: int) -> IntensityFrame:
        return IntensityFrame(self.frames[k], self.pitch)


def gen_thermal_field(dims, seed: int, variance: float = 1.0, pitch: float = 1.0) -> ComplexField:
    """Delta-correlated circular complex Gaussian field with ``E|E|^2 = variance``."""
    h, w = check_dims(dims)
    if variance < 0:
        raise ValueError("variance must be non-negative")
    rng = np.random.Generator(np.random.PCG64(int(seed) & _MASK64))
    z = rng.standard_normal((2, h, w))
    z *= np.sqrt(variance / 2.0)
    return ComplexField(z[0] + 1j * z[1], pitch)


def apply_transmission(field: ComplexField, obj: ObjectSample, probe: ProbeAperture,
                       position=(0, 0)) -> ComplexField:
    """Field just behind the object: ``E * sqrt(O) * P(r - R)``.

    ``obj`` may also be a plain non-negative array (an all-dark screen is
    allowed here, though not as an :class:`ObjectSample`).
    """
    o = obj.data if isinstance(obj, ObjectSample) else np.asarray(obj, dtype=np.float64)
    if field.shape != o.shape or field.shape != probe.shape:
        raise ValueError(
            f"shape mismatch: field {field.shape}, object {o.shape}, probe {probe.shape}"
        )
    if np.any(o < 0):
        raise ValueError("object transmittance must be non-negative")
    mask = probe.translated(position)
    return ComplexField(field.data * np.sqrt(o) * mask, field.pitch)


def centered_fft2(x, axes=(-2, -1)):
    """Unitary DFT with the zero frequency at the array centre."""
    return sfft.fftshift(sfft.fft2(sfft.ifftshift(x, axes=axes), axes=axes, norm="ortho"), axes=axes)


def centered_ifft2(x, axes=(-2, -1)):
    return sfft.fftshift(sfft.ifft2(sfft.ifftshift(x, axes=axes), axes=axes, norm="ortho"), axes=axes)


def propagate_farfield(field: ComplexField) -> ComplexField:
    """Fraunhofer propagation as a unitary, centred 2-D DFT."""
    return ComplexField(centered_fft2(field.data), 1.0 / (field.height * field.pitch))


def inverse_farfield(field: ComplexField) -> ComplexField:
    return ComplexField(centered_ifft2(field.data), 1.0 / (field.height * field.pitch))


def record_intensity(field: ComplexField) -> IntensityFrame:
    d = field.data
    return IntensityFrame(d.real * d.real + d.imag * d.imag, field.pitch)


def simulate_ensemble(obj: ObjectSample, probe: ProbeAperture, position, n_frames: int,
                      master_seed: int, position_index: int = 0) -> SpeckleEnsemble:
    """Record ``n_frames`` speckle frames with the probe translated by ``position``.

    Frames are generated one at a time through the public operations, so any
    subset or reordering of frame indices reproduces the same data.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    dims = obj.shape
    # fail early with the offending position
    probe.translated(position)
    frames = np.empty((n_frames, *dims))
    pitch = 1.0
    for k in range(n_frames):
        e = gen_thermal_field(dims, frame_seed(master_seed, position_index, k))
        frame = record_intensity(propagate_farfield(apply_transmission(e, obj, probe, position)))
        frames[k] = frame.data
        pitch = frame.pitch
    return SpeckleEnsemble(frames, int(position_index), int(master_seed),
                           (int(position[0]), int(position[1])), pitch)
