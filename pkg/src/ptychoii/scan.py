"""Probe aperture, raster scan plans and position-error injection."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .optics import ProbeAperture

__all__ = ["ScanPosition", "ScanPlan", "probe_mask", "make_scan_plan", "inject_shift_error"]

_AXES = ("x", "y", "xy")


def probe_mask(diameter_px: float, dims, center=None) -> ProbeAperture:
    """Binary disk: 1 where the distance to ``center`` is below ``diameter/2``."""
    h, w = int(dims[0]), int(dims[1])
    if diameter_px <= 0 or diameter_px > min(h, w):
        raise ValueError(f"probe diameter {diameter_px} does not fit a {h}x{w} grid")
    if center is None:
        center = (h // 2, w // 2)
    rr, cc = np.ogrid[:h, :w]
    dist = np.hypot(rr - center[0], cc - center[1])
    mask = (dist < diameter_px / 2.0).astype(np.float64)
    if not mask.any():
        raise ValueError(f"probe centre {center} lies outside the grid")
    return ProbeAperture(mask, float(diameter_px), center)


@dataclass(frozen=True)
class ScanPosition:
    nominal: tuple[int, int]
    true_: tuple[int, int]

    @property
    def error(self) -> tuple[int, int]:
        return (self.true_[0] - self.nominal[0], self.true_[1] - self.nominal[1])


@dataclass(frozen=True)
class ScanPlan:
    """Ordered probe offsets.

    Reconstruction uses ``nominal``; simulation uses ``true_``. Offsets are
    whole-pixel ``(row, col)`` translations of the probe from its base centre.
    """

    positions: tuple[ScanPosition, ...]
    step: int
    axis: str = "x"
    shift_error_pct: float = 0.0
    error_seed: int = 0
    # length the error percentage refers to (the step unless stated otherwise)
    error_reference_px: float | None = None

    def __len__(self):
        return len(self.positions)

    @property
    def nominal(self) -> list[tuple[int, int]]:
        return [p.nominal for p in self.positions]

    @property
    def true(self) -> list[tuple[int, int]]:
        return [p.true_ for p in self.positions]

    def max_error_px(self) -> float:
        ref = self.step if self.error_reference_px is None else self.error_reference_px
        return self.shift_error_pct * ref / 100.0


def _check_fit(probe, offset, index, what="probe"):
    if probe is not None and not probe.fits(offset):
        raise ValueError(f"{what} leaves the grid at scan step {index} (offset {offset})")


def make_scan_plan(n_steps: int, step_px: int, axis: str = "x", start=(0, 0),
                   probe: ProbeAperture | None = None) -> ScanPlan:
    """Raster of ``n_steps`` positions spaced ``step_px`` apart.

    For ``axis="xy"`` the raster is ``n_steps x n_steps``, row-major.
    When ``probe`` is given every translated footprint must stay in the grid.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    axis = axis.lower()
    if axis not in _AXES:
        raise ValueError(f"axis must be one of {_AXES}, got {axis!r}")
    r0, c0 = int(start[0]), int(start[1])
    step = int(step_px)
    if axis == "x":
        offs = [(r0, c0 + i * step) for i in range(n_steps)]
    elif axis == "y":
        offs = [(r0 + i * step, c0) for i in range(n_steps)]
    else:
        offs = [(r0 + i * step, c0 + j * step) for i in range(n_steps) for j in range(n_steps)]
    for i, o in enumerate(offs):
        _check_fit(probe, o, i)
    return ScanPlan(tuple(ScanPosition(o, o) for o in offs), step, axis)


def inject_shift_error(plan: ScanPlan, pct: float, seed: int,
                       probe: ProbeAperture | None = None,
                       reference_px: float | None = None) -> ScanPlan:
    """Perturb true positions by uniform whole-pixel jitter.

    Each coordinate along the scan axis is displaced by ``round(u)`` with
    ``u ~ U[-a, a]`` and ``a = pct/100 * reference_px``; the reference
    length defaults to the scan step. Nominal positions are left untouched.
    """
    if not 0 <= pct <= 100:
        raise ValueError(f"shift error percentage must be in [0, 100], got {pct}")
    ref = float(plan.step if reference_px is None else reference_px)
    amp = pct * ref / 100.0
    rng = np.random.Generator(np.random.PCG64(int(seed) & ((1 << 64) - 1)))
    u = rng.uniform(-amp, amp, size=(len(plan), 2))
    delta = np.rint(u).astype(int)
    if plan.axis == "x":
        delta[:, 0] = 0
    elif plan.axis == "y":
        delta[:, 1] = 0
    out = []
    for i, (p, d) in enumerate(zip(plan.positions, delta)):
        t = (p.nominal[0] + int(d[0]), p.nominal[1] + int(d[1]))
        _check_fit(probe, t, i, "perturbed probe")
        out.append(ScanPosition(p.nominal, t))
    return replace(plan, positions=tuple(out), shift_error_pct=float(pct),
                   error_seed=int(seed), error_reference_px=reference_px)
