"""Experiment scenarios: dataset synthesis, sweeps over seeds, artifacts.

A run seed ``s_j = seed + j`` (``j < n_seeds``) drives everything in one
repetition: the speckle frames (master seed ``s_j``), the probe-position
error (``inject_shift_error`` seeded with ``mix64(s_j ^ 0x5348494654)``,
the same draw for every error percentage), the ER/HIO random start and the
PII visiting order. Scenarios are therefore pure functions of the config.

Layout of an output directory::

    <out>/<scenario>/manifest.json
    <out>/<scenario>/quality.csv          (plus scenario-specific tables)
    <out>/<scenario>/runs/<label>/recon.pgm
    <out>/<scenario>/runs/<label>/residuals.csv
    <out>/<scenario>/runs/<label>/run.piid

``run.piid`` stores the offsets of the dataset, the amplitude map of every
position (tag 3) and the float64 reconstruction (tag 4) that ``recon.pgm``
shows.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, parse_config
from .correlation import AmplitudeMap, amplitude_from_correlation, analytic_spectrum, fluct_autocorr
from .io import (SECTION_AMPLITUDE, SECTION_RECONSTRUCTION, PIIDFile, Section, write_csv, write_pgm,
                 write_piid)
from .metrics import noise_baseline, registered_quality, spectrum_rmse
from .objects import make_object
from .optics import ObjectSample, ProbeAperture, mix64, simulate_ensemble
from .retrieval import object_constraint, pii_reconstruct, probe_supports, run_er, run_hio
from .scan import ScanPlan, inject_shift_error, make_scan_plan, probe_mask

__all__ = [
    "ExperimentResult",
    "RunRecord",
    "Dataset",
    "scan_geometry",
    "footprint_union",
    "error_reference_px",
    "build_dataset",
    "build_fullfield",
    "run_seed",
    "error_seed",
    "run_compare_algorithms",
    "run_shift_error",
    "run_loose_support",
    "run_frames_sweep",
    "run_custom",
    "run_scenario",
    "write_manifest",
    "config_from_manifest",
]

_MASK64 = (1 << 64) - 1
_ERROR_SALT = 0x5348494654


@dataclass
class RunRecord:
    params: dict
    quality: float
    final_residual: float
    runtime_s: float
    artifacts: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    scenario: str
    config: ExperimentConfig
    records: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    out_dir: Path | None = None
    manifest: Path | None = None
    version: str = __version__

    def qualities(self, **match) -> list[float]:
        """Qualities of the records whose params contain every ``key=value`` in ``match``."""
        return [r.quality for r in self.records
                if all(r.params.get(k) == v for k, v in match.items())]

    def median_quality(self, **match) -> float:
        q = self.qualities(**match)
        if not q:
            raise KeyError(f"no records match {match}")
        return float(np.median(q))


# -- geometry and datasets ---------------------------------------------------

def run_seed(cfg: ExperimentConfig, j: int) -> int:
    return (int(cfg.seed) + int(j)) & _MASK64


def error_seed(seed: int) -> int:
    return mix64((int(seed) ^ _ERROR_SALT) & _MASK64)


def error_reference_px(cfg: ExperimentConfig) -> float | None:
    """Length the shift-error percentage refers to; ``None`` means the scan step."""
    return {"step": None, "radius": cfg.probe_px / 2.0, "diameter": float(cfg.probe_px)}[
        cfg.shift_reference]


def scan_geometry(cfg: ExperimentConfig) -> tuple[ProbeAperture, ScanPlan]:
    """Probe at its base position and the nominal raster, centred on the grid."""
    g = cfg.grid
    span = (cfg.steps - 1) * cfg.step_px
    r0 = g // 2 - (span // 2 if cfg.axis in ("y", "xy") else 0)
    c0 = g // 2 - (span // 2 if cfg.axis in ("x", "xy") else 0)
    probe = probe_mask(cfg.probe_px, (g, g), center=(r0, c0))
    plan = make_scan_plan(cfg.steps, cfg.step_px, cfg.axis, probe=probe)
    return probe, plan


def footprint_union(probe: ProbeAperture, offsets) -> np.ndarray:
    """Boolean union of the probe footprints at ``offsets``."""
    u = np.zeros(probe.shape, dtype=bool)
    for p in probe_supports(probe, offsets):
        u |= p > 0
    return u


@dataclass(frozen=True)
class _Key:
    """Everything a dataset depends on; hashable so datasets can be cached."""

    object: str
    background: float
    grid: int
    probe_px: int
    steps: int
    step_px: int
    axis: str
    shift_reference: str
    noise_floor: float
    seed: int
    pct: float
    frame_counts: tuple

    @classmethod
    def of(cls, cfg: ExperimentConfig, seed: int, pct: float, frame_counts) -> "_Key":
        return cls(cfg.object, float(cfg.background), cfg.grid, cfg.probe_px, cfg.steps,
                   cfg.step_px, cfg.axis, cfg.shift_reference, float(cfg.noise_floor),
                   int(seed), float(pct), tuple(sorted(set(int(n) for n in frame_counts))))

    def config(self) -> ExperimentConfig:
        return ExperimentConfig(object=self.object, background=self.background, grid=self.grid,
                                probe_px=self.probe_px, steps=self.steps, step_px=self.step_px,
                                axis=self.axis, shift_reference=self.shift_reference,
                                noise_floor=self.noise_floor)


@dataclass
class Dataset:
    """Correlation-derived amplitude maps of one simulated scan.

    ``amps[n]`` holds one map per scan position computed from the first
    ``n`` frames; ``spectrum_rmse[n]`` is the mean over positions of the
    RMSE between the peak-normalised correlation map and the analytic
    spectrum. ``truth`` is the object inside the union of the true probe
    footprints, the reference for quality scores.
    """

    obj: ObjectSample
    probe: ProbeAperture
    plan: ScanPlan
    master_seed: int
    amps: dict
    spectrum_rmse: dict
    truth: np.ndarray


def _object(key: _Key) -> ObjectSample:
    return make_object(key.object, (key.grid, key.grid), key.background)


@lru_cache(maxsize=64)
def _dataset(key: _Key) -> Dataset:
    cfg = key.config()
    obj = _object(key)
    probe, plan = scan_geometry(cfg)
    plan = inject_shift_error(plan, key.pct, error_seed(key.seed), probe, error_reference_px(cfg))
    counts = key.frame_counts
    amps = {n: [] for n in counts}
    rmse = {n: 0.0 for n in counts}
    for i, pos in enumerate(plan.true):
        ens = simulate_ensemble(obj, probe, pos, counts[-1], key.seed, i)
        ref = analytic_spectrum(obj.data * probe.translated(pos))
        for n in counts:
            cmap = fluct_autocorr(ens.subset(n))
            amps[n].append(amplitude_from_correlation(cmap, i, normalize=False,
                                                      noise_floor=key.noise_floor))
            rmse[n] += spectrum_rmse(cmap.normalized().data, ref) / len(plan)
        del ens
    truth = obj.data * footprint_union(probe, plan.true)
    return Dataset(obj, probe, plan, key.seed, amps, rmse, truth)


def build_dataset(cfg: ExperimentConfig, seed: int, pct: float = 0.0,
                  frame_counts=None) -> Dataset:
    """Simulate (or fetch from the in-process cache) one scan dataset."""
    counts = (cfg.frames,) if frame_counts is None else frame_counts
    return _dataset(_Key.of(cfg, seed, pct, counts))


@lru_cache(maxsize=16)
def _fullfield(key: _Key) -> tuple[AmplitudeMap, np.ndarray]:
    cfg = key.config()
    ds = _dataset(key)
    union = footprint_union(ds.probe, ds.plan.true)
    aperture = ProbeAperture(union.astype(np.float64), ds.probe.diameter, ds.probe.center)
    n = key.frame_counts[-1]
    # position index n_positions keeps these frames distinct from the scan's
    ens = simulate_ensemble(ds.obj, aperture, (0, 0), n, key.seed, len(ds.plan))
    amp = amplitude_from_correlation(fluct_autocorr(ens), len(ds.plan), normalize=False,
                                     noise_floor=cfg.noise_floor)
    support = footprint_union(ds.probe, ds.plan.nominal)
    return amp, support


def build_fullfield(cfg: ExperimentConfig, seed: int, pct: float = 0.0):
    """Single-shot data for ER/HIO: the whole scanned area illuminated at once.

    The aperture is the union of the true probe footprints; the returned
    support is the union of the nominal ones. Returns ``(amplitude, support)``.
    """
    return _fullfield(_Key.of(cfg, seed, pct, (cfg.frames,)))


# -- single runs ---------------------------------------------------------------

def _label(params: dict) -> str:
    parts = [f"seed{params['seed']}", params["algorithm"]]
    for k in ("pct", "loose", "frames"):
        if k in params:
            v = params[k]
            parts.append(f"{k}{v:g}" if isinstance(v, float) else f"{k}{v}")
    return "_".join(parts)


def _emit(run_dir: Path, base: Path, ds: Dataset, amps, image, hist) -> dict:
    run_dir.mkdir(parents=True, exist_ok=True)
    write_pgm(run_dir / "recon.pgm", image)
    write_csv(run_dir / "residuals.csv", ["iteration", "residual"],
              [(k + 1, float(r)) for k, r in enumerate(hist)])
    sections = [Section(SECTION_AMPLITUDE, a.position_index, a.data) for a in amps]
    sections.append(Section(SECTION_RECONSTRUCTION, 0, np.real(image)))
    g = ds.probe.shape
    write_piid(run_dir / "run.piid", PIIDFile(g[1], g[0], ds.master_seed, ds.plan.nominal,
                                              ds.plan.true, None, sections))
    return {k: str((run_dir / f).relative_to(base))
            for k, f in (("pgm", "recon.pgm"), ("csv", "residuals.csv"), ("piid", "run.piid"))}


def _run_pii(cfg, ds, n_frames, loose, params, base, iters=None):
    t0 = time.perf_counter()
    amps = ds.amps[n_frames]
    o, hist = pii_reconstruct(amps, ds.probe, ds.plan, loose_px=loose,
                              n_iter=cfg.iters if iters is None else iters,
                              seed=ds.master_seed, init=cfg.init, order=cfg.order)
    q = registered_quality(o, ds.truth)
    dt = time.perf_counter() - t0
    art = _emit(base / "runs" / _label(params), base, ds, amps, o, hist) if base else {}
    return RunRecord(params, q, float(hist[-1]), dt, art)


def _run_single(cfg, ds, algorithm, params, base):
    t0 = time.perf_counter()
    amp, support = build_fullfield(cfg, ds.master_seed, ds.plan.shift_error_pct)
    if algorithm == "er":
        st = run_er(amp, support, cfg.er_iters, seed=ds.master_seed)
        image, hist = np.real(st.object_estimate), st.residual_history
    else:
        st, best = run_hio(amp, support, cfg.hio_iters, beta=cfg.beta, seed=ds.master_seed)
        image, hist = best, st.residual_history
    q = registered_quality(image, ds.truth)
    dt = time.perf_counter() - t0
    art = _emit(base / "runs" / _label(params), base, ds, [amp], image, hist) if base else {}
    # the quoted residual is the last iterate's, not the best one's
    return RunRecord(params, q, float(hist[-1]), dt, art)


# -- scenarios -----------------------------------------------------------------

def _pmap(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _scenario_dir(cfg: ExperimentConfig, name: str, out) -> Path | None:
    if out is False:
        return None
    d = Path(cfg.out if out is None else out) / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def _quality_table(res: ExperimentResult, keys) -> None:
    if res.out_dir is None:
        return
    rows = [[r.params.get(k, "") for k in keys] + [r.quality, r.final_residual]
            for r in res.records]
    res.tables["quality"] = str(write_csv(res.out_dir / "quality.csv",
                                          list(keys) + ["quality", "final_residual"],
                                          rows).relative_to(res.out_dir))


def _compare_task(args):
    cfg, j, base = args
    s = run_seed(cfg, j)
    ds = build_dataset(cfg, s)
    out = []
    for alg in ("er", "hio"):
        out.append(_run_single(cfg, ds, alg, {"seed": s, "algorithm": alg}, base))
    out.append(_run_pii(cfg, ds, cfg.frames, 0, {"seed": s, "algorithm": "pii"}, base))
    return out


def run_compare_algorithms(cfg: ExperimentConfig, out=None, workers: int = 1) -> ExperimentResult:
    """ER, HIO and PII on the same simulated scan, for every run seed.

    ER and HIO see one full-field measurement of the scanned area with the
    union of the nominal footprints as support; PII sees the per-position
    maps. Pass ``out=False`` to skip writing artifacts.
    """
    cfg = cfg.validate()
    base = _scenario_dir(cfg, "compare-algorithms", out)
    res = ExperimentResult("compare-algorithms", cfg, out_dir=base)
    for recs in _pmap(_compare_task, [(cfg, j, base) for j in range(cfg.n_seeds)], workers):
        res.records.extend(recs)
    res.summary = {a: res.median_quality(algorithm=a) for a in ("er", "hio", "pii")}
    _quality_table(res, ("seed", "algorithm"))
    return _finish(res)


def _shift_task(args):
    cfg, j, pct, loose, base = args
    s = run_seed(cfg, j)
    ds = build_dataset(cfg, s, pct)
    return _run_pii(cfg, ds, cfg.frames, loose,
                    {"seed": s, "algorithm": "pii", "pct": float(pct), "loose": int(loose)}, base)


def run_shift_error(cfg: ExperimentConfig, out=None, workers: int = 1) -> ExperimentResult:
    """PII with tight support (loose 0) for every shift-error percentage in ``cfg.shift``."""
    cfg = cfg.validate()
    base = _scenario_dir(cfg, "shift-error", out)
    res = ExperimentResult("shift-error", cfg, out_dir=base)
    tasks = [(cfg, j, p, 0, base) for j in range(cfg.n_seeds) for p in cfg.shift]
    res.records = _pmap(_shift_task, tasks, workers)
    res.summary = {f"{p:g}": res.median_quality(pct=float(p)) for p in cfg.shift}
    _quality_table(res, ("seed", "pct", "loose"))
    return _finish(res)


def run_loose_support(cfg: ExperimentConfig, out=None, workers: int = 1,
                      pcts=(25.0, 50.0)) -> ExperimentResult:
    """PII over the grid ``pcts x cfg.loose``; also writes a median-quality matrix."""
    cfg = cfg.validate()
    base = _scenario_dir(cfg, "loose-support", out)
    res = ExperimentResult("loose-support", cfg, out_dir=base)
    tasks = [(cfg, j, p, l, base) for j in range(cfg.n_seeds) for p in pcts for l in cfg.loose]
    res.records = _pmap(_shift_task, tasks, workers)
    res.summary = {f"{p:g}": {str(l): res.median_quality(pct=float(p), loose=int(l))
                              for l in cfg.loose} for p in pcts}
    _quality_table(res, ("seed", "pct", "loose"))
    if base is not None:
        rows = [[f"{p:g}"] + [res.summary[f"{p:g}"][str(l)] for l in cfg.loose] for p in pcts]
        res.tables["heat"] = str(write_csv(base / "quality_matrix.csv",
                                           ["pct"] + [f"loose{l}" for l in cfg.loose],
                                           rows).relative_to(base))
    return _finish(res)


def _frames_task(args):
    cfg, j, base = args
    s = run_seed(cfg, j)
    ds = build_dataset(cfg, s, 0.0, cfg.frame_counts)
    recs = []
    for n in sorted(set(cfg.frame_counts)):
        r = _run_pii(cfg, ds, n, 0, {"seed": s, "algorithm": "pii", "frames": int(n)}, base)
        r.params["spectrum_rmse"] = ds.spectrum_rmse[n]
        recs.append(r)
    return recs


def run_frames_sweep(cfg: ExperimentConfig, out=None, workers: int = 1) -> ExperimentResult:
    """PII quality and spectrum error against the number of frames.

    Each seed simulates ``max(frame_counts)`` frames per position and every
    smaller count uses the leading frames of the same ensemble. The summary
    carries the median quality per count and the noise baseline (median
    quality of uniform noise against the truth).
    """
    cfg = cfg.validate()
    base = _scenario_dir(cfg, "frames-sweep", out)
    res = ExperimentResult("frames-sweep", cfg, out_dir=base)
    for recs in _pmap(_frames_task, [(cfg, j, base) for j in range(cfg.n_seeds)], workers):
        res.records.extend(recs)
    counts = sorted(set(cfg.frame_counts))
    truth = build_dataset(cfg, run_seed(cfg, 0), 0.0, cfg.frame_counts).truth
    res.summary = {
        "quality": {str(n): res.median_quality(frames=n) for n in counts},
        "spectrum_rmse": {str(n): float(np.median([r.params["spectrum_rmse"] for r in res.records
                                                   if r.params["frames"] == n]))
                          for n in counts},
        "noise_baseline": noise_baseline(truth, n=10, seed=cfg.seed),
    }
    _quality_table(res, ("seed", "frames"))
    if base is not None:
        rows = [(n, res.summary["quality"][str(n)], res.summary["spectrum_rmse"][str(n)])
                for n in counts]
        res.tables["frames"] = str(write_csv(base / "frames.csv",
                                             ["frames", "median_quality", "median_spectrum_rmse"],
                                             rows).relative_to(base))
    return _finish(res)


def _custom_task(args):
    cfg, j, base = args
    s = run_seed(cfg, j)
    pct, loose = float(cfg.shift[0]), int(cfg.loose[0])
    ds = build_dataset(cfg, s, pct)
    params = {"seed": s, "algorithm": cfg.algorithm, "pct": pct, "loose": loose}
    if cfg.algorithm == "pii":
        return _run_pii(cfg, ds, cfg.frames, loose, params, base)
    return _run_single(cfg, ds, cfg.algorithm, params, base)


def run_custom(cfg: ExperimentConfig, out=None, workers: int = 1) -> ExperimentResult:
    """``cfg.algorithm`` at the first ``shift`` and ``loose`` values, for every seed."""
    cfg = cfg.validate()
    base = _scenario_dir(cfg, "custom", out)
    res = ExperimentResult("custom", cfg, out_dir=base)
    res.records = _pmap(_custom_task, [(cfg, j, base) for j in range(cfg.n_seeds)], workers)
    res.summary = {cfg.algorithm: res.median_quality()}
    _quality_table(res, ("seed", "algorithm", "pct", "loose"))
    return _finish(res)


SCENARIO_RUNNERS = {
    "compare-algorithms": run_compare_algorithms,
    "shift-error": run_shift_error,
    "loose-support": run_loose_support,
    "frames-sweep": run_frames_sweep,
    "custom": run_custom,
}


def run_scenario(cfg: ExperimentConfig, scenario: str | None = None, out=None,
                 workers: int = 1) -> ExperimentResult:
    name = cfg.scenario if scenario is None else scenario
    if name not in SCENARIO_RUNNERS:
        raise ValueError(f"unknown scenario {name!r}")
    return SCENARIO_RUNNERS[name](replace(cfg, scenario=name), out=out, workers=workers)


# -- manifest --------------------------------------------------------------------

def _finish(res: ExperimentResult) -> ExperimentResult:
    if res.out_dir is not None:
        res.manifest = write_manifest(res, res.out_dir)
    return res


def write_manifest(result: ExperimentResult, directory) -> Path:
    """JSON description of a finished scenario; artifact paths are relative to ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    artifacts = list(result.tables.values())
    for r in result.records:
        artifacts.extend(r.artifacts.values())
    doc = {
        "toolkit": "ptychoii",
        "version": result.version,
        "scenario": result.scenario,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": result.config.to_dict(),
        "summary": result.summary,
        "tables": result.tables,
        "records": [
            {"params": r.params, "quality": r.quality, "final_residual": r.final_residual,
             "runtime_s": r.runtime_s, "artifacts": r.artifacts}
            for r in result.records
        ],
        "artifacts": artifacts,
    }
    path = d / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def config_from_manifest(path) -> ExperimentConfig:
    """The echoed config of a manifest, ready to re-run the scenario."""
    doc = json.loads(Path(path).read_text())
    return parse_config("", doc["config"])
