"""Phase retrieval: ER and HIO baselines and the ptychographic engine (PII).

All engines work on the object grid with the centred unitary DFT of
:mod:`ptychoii.optics`. The object is an intensity distribution and is
kept real and non-negative. Where the current transform is exactly zero,
the modulus projection assigns phase 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .correlation import AmplitudeMap
from .optics import ProbeAperture, centered_fft2, centered_ifft2, check_dims
from .scan import ScanPlan

__all__ = [
    "SupportMask",
    "RetrievalState",
    "init_state",
    "modulus_project",
    "er_step",
    "hio_step",
    "dilate_support",
    "probe_supports",
    "reciprocal_residual",
    "pii_reconstruct",
    "run_er",
    "run_hio",
    "object_constraint",
]


@dataclass
class SupportMask:
    mask: np.ndarray
    loose_px: int = 0

    def __post_init__(self):
        self.mask = np.asarray(self.mask).astype(bool)


@dataclass
class RetrievalState:
    object_estimate: np.ndarray
    iteration: int = 0
    residual_history: list = field(default_factory=list)
    rng_seed: int = 0

    def copy(self) -> "RetrievalState":
        return RetrievalState(self.object_estimate.copy(), self.iteration,
                              list(self.residual_history), self.rng_seed)


def _amp(a) -> AmplitudeMap:
    if isinstance(a, AmplitudeMap):
        return a
    return AmplitudeMap(np.asarray(a, dtype=np.float64))


def _support(s) -> np.ndarray:
    return s.mask if isinstance(s, SupportMask) else np.asarray(s).astype(bool)


def init_state(dims, mode: str = "uniform", seed: int = 0) -> RetrievalState:
    """Initial object guess: all ones, or uniform ``[0, 1)`` magnitudes with zero phase."""
    h, w = check_dims(dims)
    if mode == "uniform":
        est = np.ones((h, w), dtype=np.complex128)
    elif mode == "random":
        rng = np.random.Generator(np.random.PCG64(int(seed) & ((1 << 64) - 1)))
        est = rng.random((h, w)).astype(np.complex128)
    else:
        raise ValueError(f"unknown init mode {mode!r}")
    return RetrievalState(est, 0, [], int(seed))


def _project_spectrum(spec: np.ndarray, amp: AmplitudeMap) -> np.ndarray:
    mag = np.abs(spec)
    phase = np.ones_like(spec)
    nz = mag > 0
    phase[nz] = spec[nz] / mag[nz]
    return amp.data * phase


def modulus_project(estimate: np.ndarray, amp) -> np.ndarray:
    """Replace the Fourier modulus of ``estimate`` by ``amp``, keep its phase."""
    a = _amp(amp)
    if a.shape != np.shape(estimate):
        raise ValueError(f"amplitude {a.shape} and estimate {np.shape(estimate)} differ")
    return centered_ifft2(_project_spectrum(centered_fft2(estimate), a))


def object_constraint(x: np.ndarray, support=None) -> np.ndarray:
    """Real, non-negative, and zero outside ``support``."""
    out = np.clip(np.real(x), 0.0, None)
    if support is not None:
        out = np.where(_support(support), out, 0.0)
    return out


def _ls_residual(mags: np.ndarray, amp: AmplitudeMap) -> tuple[float, float]:
    """Numerator and denominator of the scale-optimal modulus mismatch."""
    amps = amp.data
    den = float(np.sum(amps * amps))
    mm = float(np.sum(mags * mags))
    cross = float(np.sum(mags * amps))
    s = cross / mm if mm > 0 else 0.0
    num = den - 2 * s * cross + s * s * mm
    return max(num, 0.0), den


def _single_residual(estimate: np.ndarray, amp: AmplitudeMap) -> float:
    num, den = _ls_residual(np.abs(centered_fft2(estimate)), amp)
    if den == 0:
        raise ValueError("amplitude data are all zero")
    return float(np.sqrt(num / den))


def er_step(state: RetrievalState, amp, support) -> RetrievalState:
    """One error-reduction iteration (modulus then object-domain projection)."""
    a = _amp(amp)
    x = modulus_project(state.object_estimate, a)
    new = object_constraint(x, support).astype(np.complex128)
    hist = state.residual_history + [_single_residual(new, a)]
    return RetrievalState(new, state.iteration + 1, hist, state.rng_seed)


def hio_step(state: RetrievalState, amp, support, beta: float = 0.7) -> RetrievalState:
    """One hybrid input-output iteration.

    Pixels inside the support whose projected value is real non-negative
    take that value; all others get ``previous - beta * projected``. The
    recorded residual is that of the constrained (ER-projected) iterate.
    """
    if not 0 < beta <= 1:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    a = _amp(amp)
    s = _support(support)
    g = state.object_estimate
    xp = np.real(modulus_project(g, a))
    ok = s & (xp >= 0)
    new = np.where(ok, xp, np.real(g) - beta * xp).astype(np.complex128)
    hist = state.residual_history + [_single_residual(object_constraint(new, s), a)]
    return RetrievalState(new, state.iteration + 1, hist, state.rng_seed)


def run_er(amp, support, n_iter: int, state: RetrievalState | None = None,
           seed: int = 0) -> RetrievalState:
    a = _amp(amp)
    st = init_state(a.shape, "random", seed) if state is None else state
    for _ in range(n_iter):
        st = er_step(st, a, support)
    return st


def run_hio(amp, support, n_iter: int, beta: float = 0.7,
            state: RetrievalState | None = None, seed: int = 0):
    """HIO for ``n_iter`` steps.

    Returns ``(state, best)`` where ``best`` is the constrained iterate with
    the lowest residual. ``state.object_estimate`` is the raw HIO iterate;
    use :func:`object_constraint` on it for an image.
    """
    a = _amp(amp)
    s = _support(support)
    st = init_state(a.shape, "random", seed) if state is None else state
    best, best_r = None, np.inf
    for _ in range(n_iter):
        st = hio_step(st, a, s, beta)
        if st.residual_history[-1] < best_r:
            best_r = st.residual_history[-1]
            best = object_constraint(st.object_estimate, s)
    return st, best


def dilate_support(mask, loose_px: int) -> SupportMask:
    """Dilate a binary support by a disk of radius ``loose_px`` (clipped to the grid)."""
    if loose_px < 0:
        raise ValueError("loose_px must be non-negative")
    m = _support(mask)
    if loose_px == 0:
        return SupportMask(m.copy(), 0)
    r = int(loose_px)
    yy, xx = np.ogrid[-r:r + 1, -r:r + 1]
    disk = (yy * yy + xx * xx) <= r * r
    return SupportMask(ndimage.binary_dilation(m, structure=disk), r)


def probe_supports(probe: ProbeAperture, offsets, loose_px: int = 0) -> list[np.ndarray]:
    """Binary footprints of the probe at each offset, dilated by ``loose_px``."""
    base = dilate_support(probe.mask > 0, loose_px).mask.astype(np.float64)
    out = []
    for i, off in enumerate(offsets):
        if not probe.fits(off):
            raise ValueError(f"probe leaves the grid at scan position {i} (offset {tuple(off)})")
        dr, dc = int(off[0]), int(off[1])
        m = np.zeros_like(base)
        h, w = base.shape
        # shift with clipping; the dilated rim may extend past the grid edge
        src = base[max(0, -dr):h - max(0, dr), max(0, -dc):w - max(0, dc)]
        m[max(0, dr):max(0, dr) + src.shape[0], max(0, dc):max(0, dc) + src.shape[1]] = src
        out.append(m)
    return out


def _positions_amps(amps, plan):
    a = [_amp(x) for x in amps]
    offsets = plan.nominal if isinstance(plan, ScanPlan) else [tuple(o) for o in plan]
    if len(a) != len(offsets):
        raise ValueError(f"{len(a)} amplitude maps for {len(offsets)} scan positions")
    return a, offsets


def reciprocal_residual(estimate, amps, probe: ProbeAperture, plan, loose_px: int = 0) -> float:
    """Relative Fourier-modulus mismatch summed over scan positions.

    ``sqrt(sum_R min_s |s |F{O P_R}| - A_R|^2 / sum_R |A_R|^2)``, with the
    least-squares scale ``s`` fitted per position.
    """
    a, offsets = _positions_amps(amps, plan)
    o = np.asarray(estimate)
    num = den = 0.0
    for p, amp in zip(probe_supports(probe, offsets, loose_px), a):
        n, d = _ls_residual(np.abs(centered_fft2(o * p)), amp)
        num += n
        den += d
    if den == 0:
        raise ValueError("amplitude data are all zero")
    return float(np.sqrt(num / den))


def pii_reconstruct(amps, probe: ProbeAperture, plan, loose_px: int = 0, n_iter: int = 20,
                    seed: int = 0, init: str = "uniform", order: str = "shuffle",
                    return_state: bool = False):
    """Ptychographic reconstruction from per-position Fourier moduli.

    Each iteration visits every nominal position once, one after another:
    in plan order (``order="plan"``) or in a fresh permutation drawn from
    ``seed`` (``order="shuffle"``, which converges much faster on a dense
    one-dimensional raster). At position ``R``
    the exit wave ``X = O * P_R`` (``P_R`` the probe footprint dilated by
    ``loose_px``) is modulus-projected onto that position's data and the
    object is updated with
    ``O += P_R (X' - X) / max(P_R^2)`` and clamped to real non-negative
    values. Pixels never covered by any footprint are returned as zero.

    The amplitude maps must share one absolute scale (raw correlation maps
    do; independently peak-normalised maps of several positions do not).

    Returns ``(estimate, residual_history)``.
    """
    a, offsets = _positions_amps(amps, plan)
    if not a:
        raise ValueError("need at least one scan position")
    dims = a[0].shape
    if probe.shape != dims:
        raise ValueError(f"probe grid {probe.shape} does not match data {dims}")
    supports = probe_supports(probe, offsets, loose_px)
    covered = np.zeros(dims, dtype=bool)
    for p in supports:
        covered |= p > 0
    if order not in ("plan", "shuffle"):
        raise ValueError(f"order must be 'plan' or 'shuffle', got {order!r}")
    st = init_state(dims, init, seed)
    rng = np.random.Generator(np.random.PCG64(int(seed) & ((1 << 64) - 1)).jumped())
    o = np.real(st.object_estimate).copy()
    hist = []
    for _ in range(n_iter):
        visit = rng.permutation(len(a)) if order == "shuffle" else range(len(a))
        for i in visit:
            p, amp = supports[i], a[i]
            x = o * p
            xp = centered_ifft2(_project_spectrum(centered_fft2(x), amp))
            o = o + p * np.real(xp - x) / p.max()
            np.clip(o, 0.0, None, out=o)
        hist.append(reciprocal_residual(o, a, probe, offsets, loose_px))
    o = np.where(covered, o, 0.0)
    if return_state:
        return RetrievalState(o.astype(np.complex128), n_iter, hist, int(seed))
    return o, hist
