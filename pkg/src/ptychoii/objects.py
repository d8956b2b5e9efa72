"""Procedural test objects (intensity transmittance, zero background).

Coordinates are fractions of the grid so the objects scale with it;
``h, w`` are the grid height and width, ``(r, c)`` pixel row and column.

two-disk
    disk ``|(r, c) - (h/2, 0.36 w)| < 0.09 w`` with value 1.0, and disk
    ``|(r, c) - (h/2, 0.64 w)| < 0.09 w`` with value 0.6.
three-bar
    bars ``|r - h/2| < 0.11 h`` and ``|c - c_i| < 0.025 w`` for
    ``c_i = 0.3 w, 0.5 w, 0.7 w`` with values 1.0, 0.75, 0.5.
letters
    the glyphs "PII" from a 5x7 bitmap font, each bitmap pixel a
    ``0.03 w`` square block, glyph pitch 6 blocks, centred on the grid;
    strokes of the first letter 1.0, the others 0.7.

Every object takes an optional ``background`` level written into all
pixels the formula leaves at zero (a weakly transmitting substrate).
"""

from __future__ import annotations

import numpy as np

from .optics import ObjectSample, check_dims

__all__ = ["two_disk", "three_bar", "letters", "make_object", "OBJECTS"]

_FONT = {
    "P": ["11110", "10001", "10001", "11110", "10000", "10000", "10000"],
    "I": ["01110", "00100", "00100", "00100", "00100", "00100", "01110"],
}


def _grid(dims):
    h, w = check_dims(dims)
    rr, cc = np.mgrid[:h, :w].astype(np.float64)
    return h, w, rr, cc


def two_disk(dims=(128, 128)) -> ObjectSample:
    h, w, rr, cc = _grid(dims)
    o = np.zeros((h, w))
    rad = 0.09 * w
    o[np.hypot(rr - h / 2, cc - 0.36 * w) < rad] = 1.0
    o[np.hypot(rr - h / 2, cc - 0.64 * w) < rad] = 0.6
    return ObjectSample(o, "two-disk")


def three_bar(dims=(128, 128)) -> ObjectSample:
    h, w, rr, cc = _grid(dims)
    o = np.zeros((h, w))
    for c0, v in zip((0.3, 0.5, 0.7), (1.0, 0.75, 0.5)):
        o[(np.abs(rr - h / 2) < 0.11 * h) & (np.abs(cc - c0 * w) < 0.025 * w)] = v
    return ObjectSample(o, "three-bar")


def letters(dims=(128, 128), text: str = "PII") -> ObjectSample:
    h, w = check_dims(dims)
    block = max(1, int(round(0.03 * w)))
    rows = 7 * block
    cols = (6 * len(text) - 1) * block
    r0 = (h - rows) // 2
    c0 = (w - cols) // 2
    o = np.zeros((h, w))
    for i, ch in enumerate(text):
        glyph = np.array([[int(b) for b in row] for row in _FONT[ch]], dtype=float)
        tile = np.kron(glyph, np.ones((block, block))) * (1.0 if i == 0 else 0.7)
        cs = c0 + 6 * block * i
        o[r0:r0 + rows, cs:cs + 5 * block] = np.maximum(o[r0:r0 + rows, cs:cs + 5 * block], tile)
    return ObjectSample(o, "letters")


OBJECTS = {"two-disk": two_disk, "three-bar": three_bar, "letters": letters}


def make_object(name: str, dims=(128, 128), background: float = 0.0) -> ObjectSample:
    """Built-in object by name, or a ``.npy`` file holding a 2-D array."""
    if not 0.0 <= background <= 1.0:
        raise ValueError(f"background must be in [0, 1], got {background}")
    if name in OBJECTS:
        o = OBJECTS[name](dims)
        if background > 0:
            d = np.where(o.data == 0, background, o.data)
            o = ObjectSample(d, o.name)
        return o
    if name.endswith(".npy"):
        return ObjectSample(np.load(name), name)
    raise ValueError(f"unknown object {name!r}; built-ins are {sorted(OBJECTS)}")
