"""File formats: the PIID binary container, 8-bit PGM images and CSV tables.

PIID layout (little-endian)::

    b"PIID"                      magic
    u16 version = 1
    u32 width, u32 height
    u32 n_positions, u32 n_frames
    u64 master_seed
    n_positions times:
        i32 nominal_row, i32 nominal_col
        i32 true_row,    i32 true_col
        n_frames x (height x width) float64, row-major
    zero or more sections until end of file:
        u32 tag          2 = correlation, 3 = amplitude, 4 = reconstruction
        u32 index        position index (tags 2, 3) or run index (tag 4)
        height x width float64, row-major

A container may hold ``n_frames = 0`` when only derived maps are stored.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "PIIDFile",
    "PIIDWriter",
    "Section",
    "write_piid",
    "read_piid",
    "write_pgm",
    "read_pgm",
    "write_csv",
    "read_csv",
    "SECTION_CORRELATION",
    "SECTION_AMPLITUDE",
    "SECTION_RECONSTRUCTION",
]

MAGIC = b"PIID"
VERSION = 1
SECTION_CORRELATION = 2
SECTION_AMPLITUDE = 3
SECTION_RECONSTRUCTION = 4

_HEADER = struct.Struct("<4sHIIIIQ")
_OFFSETS = struct.Struct("<iiii")
_SECTION = struct.Struct("<II")


@dataclass
class Section:
    tag: int
    index: int
    data: np.ndarray


@dataclass
class PIIDFile:
    width: int
    height: int
    master_seed: int
    nominal: list = field(default_factory=list)
    true: list = field(default_factory=list)
    # (n_positions, n_frames, height, width) array, a list of per-position
    # (n_frames, height, width) arrays, or None when n_frames == 0
    frames: object = None
    sections: list = field(default_factory=list)

    @property
    def n_positions(self) -> int:
        return len(self.nominal)

    @property
    def n_frames(self) -> int:
        if self.frames is None or len(self.frames) == 0:
            return 0
        return int(np.shape(self.frames[0])[0])

    def section(self, tag: int, index: int = 0) -> np.ndarray:
        for s in self.sections:
            if s.tag == tag and s.index == index:
                return s.data
        raise KeyError(f"no section with tag {tag} and index {index}")


class PIIDWriter:
    """Incremental PIID writer, so large ensembles never sit in memory at once.

    Call :meth:`add_position` exactly ``n_positions`` times, then
    :meth:`add_section` any number of times; use as a context manager.
    """

    def __init__(self, path, width: int, height: int, n_positions: int, n_frames: int,
                 master_seed: int):
        self.path = Path(path)
        self.shape = (int(height), int(width))
        self.n_positions, self.n_frames = int(n_positions), int(n_frames)
        self._written = 0
        self._fh = open(self.path, "wb")
        self._fh.write(_HEADER.pack(MAGIC, VERSION, int(width), int(height), self.n_positions,
                                    self.n_frames, int(master_seed) & ((1 << 64) - 1)))

    def add_position(self, nominal, true, frames=None) -> None:
        if self._written >= self.n_positions:
            raise ValueError("all positions already written")
        self._fh.write(_OFFSETS.pack(int(nominal[0]), int(nominal[1]), int(true[0]), int(true[1])))
        if self.n_frames:
            f = np.asarray(frames, dtype="<f8")
            if f.shape != (self.n_frames, *self.shape):
                raise ValueError(f"position {self._written}: frames have shape {f.shape}")
            self._fh.write(np.ascontiguousarray(f).tobytes())
        self._written += 1

    def add_section(self, tag: int, index: int, data) -> None:
        if self._written != self.n_positions:
            raise ValueError("sections follow the last position")
        d = np.asarray(data, dtype="<f8")
        if d.shape != self.shape:
            raise ValueError(f"section tag {tag} has shape {d.shape}")
        self._fh.write(_SECTION.pack(int(tag), int(index)))
        self._fh.write(np.ascontiguousarray(d).tobytes())

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.close()
        if self._written != self.n_positions:
            raise ValueError(f"wrote {self._written} of {self.n_positions} positions")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_piid(path, container: PIIDFile) -> Path:
    c = container
    if len(c.true) != len(c.nominal):
        raise ValueError("nominal and true offset lists differ in length")
    n_frames = c.n_frames
    if c.frames is not None and len(c.frames) != c.n_positions:
        raise ValueError(f"{len(c.frames)} frame stacks for {c.n_positions} positions")
    with PIIDWriter(path, c.width, c.height, c.n_positions, n_frames, c.master_seed) as w:
        for i, (nom, tru) in enumerate(zip(c.nominal, c.true)):
            w.add_position(nom, tru, c.frames[i] if n_frames else None)
        for s in c.sections:
            w.add_section(s.tag, s.index, s.data)
    return Path(path)


def read_piid(path, mmap: bool = False) -> PIIDFile:
    """Read a container.

    With ``mmap=True`` the frames come back as a list of read-only
    memory-mapped ``(n_frames, height, width)`` arrays, one per position.
    """
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError("file too short for a PIID header")
        magic, version, w, h, n_pos, n_frames, seed = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"unsupported PIID version {version}")
        frame_bytes = h * w * 8
        block = n_frames * frame_bytes
        if _HEADER.size + n_pos * (_OFFSETS.size + block) > size:
            raise ValueError("truncated position block")
        nominal, true, frames = [], [], []
        for _ in range(n_pos):
            a, b, c, d = _OFFSETS.unpack(fh.read(_OFFSETS.size))
            nominal.append((a, b))
            true.append((c, d))
            if n_frames:
                if mmap:
                    frames.append(np.memmap(path, dtype="<f8", mode="r", offset=fh.tell(),
                                            shape=(n_frames, h, w)))
                    fh.seek(block, 1)
                else:
                    frames.append(np.fromfile(fh, dtype="<f8", count=n_frames * h * w)
                                  .reshape(n_frames, h, w))
        sections = []
        off = fh.tell()
        while off < size:
            if off + _SECTION.size + frame_bytes > size:
                raise ValueError(f"truncated section at byte {off}")
            tag, index = _SECTION.unpack(fh.read(_SECTION.size))
            data = np.fromfile(fh, dtype="<f8", count=h * w).reshape(h, w)
            sections.append(Section(tag, index, data))
            off = fh.tell()
    if not n_frames or not n_pos:
        stack = None
    elif mmap:
        stack = frames
    else:
        stack = np.stack(frames)
    return PIIDFile(w, h, seed, nominal, true, stack, sections)


def write_pgm(path, image) -> Path:
    """Binary (P5) 8-bit greyscale, min-max scaled; a constant image is written black."""
    path = Path(path)
    a = np.real(np.asarray(image, dtype=np.complex128))
    lo, hi = float(a.min()), float(a.max())
    scaled = np.zeros(a.shape) if hi == lo else (a - lo) / (hi - lo)
    img = np.round(scaled * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while buf[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not buf[end:end + 1].isspace():
            end += 1
        tokens.append(buf[pos:end])
        pos = end
    # exactly one whitespace byte separates the header from the raster
    pos += 1
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    return np.frombuffer(buf, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
