"""Command line: ``ptychoii {simulate, reconstruct, experiment}``.

Every flag mirrors a config key and overrides the value read from
``--config`` (or the built-in default).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCENARIOS, ConfigError, ExperimentConfig, load_config
from .correlation import AmplitudeMap, amplitude_from_correlation, fluct_autocorr
from .experiments import error_reference_px, error_seed, footprint_union, run_scenario, scan_geometry
from .io import (SECTION_AMPLITUDE, SECTION_CORRELATION, SECTION_RECONSTRUCTION, PIIDFile,
                 PIIDWriter, Section, read_piid, write_csv, write_pgm, write_piid)
from .metrics import registered_quality
from .objects import make_object
from .optics import ProbeAperture, SpeckleEnsemble, simulate_ensemble
from .retrieval import dilate_support, pii_reconstruct, run_er, run_hio
from .scan import inject_shift_error

# flag -> (config key, type); list values stay strings for the config parser
_FLAGS = {
    "--seed": ("seed", int),
    "--grid": ("grid", int),
    "--frames": ("frames", int),
    "--steps": ("steps", int),
    "--step-px": ("step_px", int),
    "--probe-px": ("probe_px", int),
    "--algorithm": ("algorithm", str),
    "--iters": ("iters", int),
    "--beta": ("beta", float),
    "--loose": ("loose", str),
    "--shift": ("shift", str),
    "--object": ("object", str),
    "--background": ("background", float),
    "--n-seeds": ("n_seeds", int),
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--out", metavar="DIR", help="output directory")
    for flag, (key, typ) in _FLAGS.items():
        kw = {"choices": ("er", "hio", "pii")} if key == "algorithm" else {}
        p.add_argument(flag, dest=key, type=typ, metavar=key.upper(), **kw)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptychoii", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ptychoii {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a scan and write a PIID dataset")
    _common(s)
    s.add_argument("--full-field", action="store_true",
                   help="one exposure through the union of the probe footprints (ER/HIO input)")

    r = sub.add_parser("reconstruct", help="reconstruct an object from a PIID dataset")
    _common(r)
    r.add_argument("dataset", type=Path)

    e = sub.add_parser("experiment", help="run a scenario and write its artifacts")
    _common(e)
    e.add_argument("scenario", choices=SCENARIOS)
    e.add_argument("--workers", type=int, default=1, help="processes for seeds/sweep points")
    return ap


def _config(args) -> ExperimentConfig:
    over = {key: getattr(args, key) for key, _ in _FLAGS.values()}
    if args.out is not None:
        over["out"] = args.out
    return load_config(args.config, over)


def simulate(cfg: ExperimentConfig, full_field: bool = False, path=None) -> Path:
    """Write one dataset (run seed ``cfg.seed``, shift error ``cfg.shift[0]``) to ``path``.

    Besides the frames, the container carries the raw correlation (tag 2)
    and amplitude (tag 3) map of every position.
    """
    g = cfg.grid
    obj = make_object(cfg.object, (g, g), cfg.background)
    probe, plan = scan_geometry(cfg)
    plan = inject_shift_error(plan, cfg.shift[0], error_seed(cfg.seed), probe, error_reference_px(cfg))
    if path is None:
        path = Path(cfg.out) / ("fullfield.piid" if full_field else "dataset.piid")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if full_field:
        union = footprint_union(probe, plan.true)
        probes = [ProbeAperture(union.astype(float), probe.diameter, probe.center)]
        offsets, nominal, index0 = [(0, 0)], [(0, 0)], len(plan)
    else:
        probes = [probe] * len(plan)
        offsets, nominal, index0 = plan.true, plan.nominal, 0
    maps = []
    with PIIDWriter(path, g, g, len(offsets), cfg.frames, cfg.seed) as w:
        for i, (p, off, nom) in enumerate(zip(probes, offsets, nominal)):
            ens = simulate_ensemble(obj, p, off, cfg.frames, cfg.seed, index0 + i)
            w.add_position(nom, off, ens.frames)
            cmap = fluct_autocorr(ens)
            amp = amplitude_from_correlation(cmap, i, normalize=False, noise_floor=cfg.noise_floor)
            maps.append((i, cmap.data, amp.data))
        for i, c, _ in maps:
            w.add_section(SECTION_CORRELATION, i, c)
        for i, _, a in maps:
            w.add_section(SECTION_AMPLITUDE, i, a)
    return path


def _amplitudes(data: PIIDFile, cfg: ExperimentConfig) -> list[AmplitudeMap]:
    if data.n_frames >= 2:
        return [amplitude_from_correlation(fluct_autocorr(SpeckleEnsemble(np.asarray(data.frames[i]))),
                                           i, normalize=False, noise_floor=cfg.noise_floor)
                for i in range(data.n_positions)]
    try:
        return [AmplitudeMap(data.section(SECTION_AMPLITUDE, i), i) for i in range(data.n_positions)]
    except KeyError:
        raise ValueError("dataset has neither frames nor amplitude sections") from None


def reconstruct(cfg: ExperimentConfig, dataset, out=None) -> dict:
    """Reconstruct ``dataset`` with ``cfg.algorithm``; returns a summary dict.

    PII uses the container's nominal offsets with the configured probe.
    ER and HIO need a single-position (``--full-field``) container and use
    the union of the configured nominal footprints, dilated by
    ``cfg.loose[0]``, as support.
    """
    data = read_piid(dataset, mmap=True)
    g = cfg.grid
    if (data.height, data.width) != (g, g):
        raise ValueError(f"dataset is {data.height}x{data.width} but grid = {g}")
    probe, plan = scan_geometry(cfg)
    amps = _amplitudes(data, cfg)
    loose = int(cfg.loose[0])
    obj = make_object(cfg.object, (g, g), cfg.background).data
    if cfg.algorithm == "pii":
        image, hist = pii_reconstruct(amps, probe, data.nominal, loose_px=loose, n_iter=cfg.iters,
                                      seed=cfg.seed, init=cfg.init, order=cfg.order)
        truth = obj * footprint_union(probe, data.true)
    else:
        if data.n_positions != 1:
            raise ValueError(f"{cfg.algorithm} needs a single-position (full-field) dataset, "
                             f"got {data.n_positions} positions")
        union = footprint_union(probe, plan.nominal)
        support = dilate_support(union, loose)
        if cfg.algorithm == "er":
            st = run_er(amps[0], support, cfg.er_iters, seed=cfg.seed)
            image, hist = np.real(st.object_estimate), st.residual_history
        else:
            st, image = run_hio(amps[0], support, cfg.hio_iters, beta=cfg.beta, seed=cfg.seed)
            hist = st.residual_history
        truth = obj * union
    d = Path(cfg.out if out is None else out)
    d.mkdir(parents=True, exist_ok=True)
    stem = f"recon_{cfg.algorithm}"
    write_pgm(d / f"{stem}.pgm", image)
    write_csv(d / f"{stem}_residuals.csv", ["iteration", "residual"],
              [(k + 1, float(r)) for k, r in enumerate(hist)])
    write_piid(d / f"{stem}.piid", PIIDFile(g, g, data.master_seed, data.nominal, data.true, None,
                                            [Section(SECTION_RECONSTRUCTION, 0, image)]))
    return {"algorithm": cfg.algorithm, "iterations": len(hist), "final_residual": float(hist[-1]),
            "quality_vs_config_object": registered_quality(image, truth),
            "outputs": [str(d / f"{stem}{x}") for x in (".pgm", "_residuals.csv", ".piid")]}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "simulate":
            print(simulate(cfg, args.full_field))
        elif args.command == "reconstruct":
            print(json.dumps(reconstruct(cfg, args.dataset), indent=2))
        else:
            res = run_scenario(cfg, args.scenario, workers=args.workers)
            print(json.dumps(res.summary, indent=2))
            print(res.manifest)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"ptychoii: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
