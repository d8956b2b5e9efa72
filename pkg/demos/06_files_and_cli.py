"""
Datasets, artifacts and the command line
========================================

``simulate`` writes a PIID container (frames plus correlation and amplitude
maps), ``reconstruct`` turns it into an image, and ``experiment`` runs a
whole scenario with a JSON manifest. The same steps from Python, on a
small grid so they finish in seconds:
"""

import tempfile
from pathlib import Path

from ptychoii.cli import main
from ptychoii.io import read_piid, SECTION_AMPLITUDE

out = Path(tempfile.mkdtemp())
small = ["--grid", "64", "--probe-px", "20", "--steps", "8", "--step-px", "2",
         "--frames", "200", "--object", "letters", "--out", str(out)]

main(["simulate", *small])
data = read_piid(out / "dataset.piid", mmap=True)
print(f"{data.n_positions} positions x {data.n_frames} frames, seed {data.master_seed}")
print("amplitude map of position 0:", data.section(SECTION_AMPLITUDE, 0).shape)

main(["reconstruct", str(out / "dataset.piid"), *small])
print(sorted(p.name for p in out.iterdir()))

# equivalent shell usage:
#   ptychoii simulate --out run1
#   ptychoii reconstruct run1/dataset.piid --out run1
#   ptychoii experiment shift-error --config demos/default.cfg --out results
