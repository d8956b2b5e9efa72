import json

import numpy as np
import pytest

from ptychoii.cli import main, reconstruct, simulate
from ptychoii.config import ExperimentConfig
from ptychoii.experiments import (
    build_dataset,
    config_from_manifest,
    footprint_union,
    run_compare_algorithms,
    run_custom,
    run_frames_sweep,
    run_loose_support,
    run_scenario,
    run_shift_error,
    scan_geometry,
)
from ptychoii.io import SECTION_RECONSTRUCTION, read_csv, read_pgm, read_piid

SMALL = dict(object="letters", grid=64, probe_px=20, steps=8, step_px=2, frames=40, iters=5,
             er_iters=20, hio_iters=20, n_seeds=2, frame_counts=(10, 40), loose=(0, 3),
             shift=(0.0, 50.0))


@pytest.fixture
def cfg(tmp_path):
    return ExperimentConfig(out=str(tmp_path / "out"), **SMALL).validate()


def strip(doc):
    doc = dict(doc)
    doc.pop("created")
    for r in doc["records"]:
        r.pop("runtime_s")
    return doc


def test_geometry_centred(cfg):
    probe, plan = scan_geometry(cfg)
    u = footprint_union(probe, plan.nominal)
    cols = np.nonzero(u.any(axis=0))[0]
    assert abs((cols[0] + cols[-1]) / 2 - 32) <= 1
    assert len(plan) == 8


def test_dataset_cache_and_prefix(cfg):
    a = build_dataset(cfg, 3, 0.0, (10, 40))
    assert build_dataset(cfg, 3, 0.0, (40, 10)) is a
    assert len(a.amps[10]) == len(a.amps[40]) == 8
    assert a.spectrum_rmse[10] > a.spectrum_rmse[40]


def test_compare_algorithms_artifacts(cfg, tmp_path):
    res = run_compare_algorithms(cfg)
    assert len(res.records) == 6
    assert set(res.summary) == {"er", "hio", "pii"}
    doc = json.loads(res.manifest.read_text())
    base = res.manifest.parent
    for rel in doc["artifacts"]:
        assert (base / rel).exists(), rel
    for r in res.records:
        pgm = read_pgm(base / r.artifacts["pgm"])
        raw = read_piid(base / r.artifacts["piid"]).section(SECTION_RECONSTRUCTION)
        lo, hi = raw.min(), raw.max()
        assert np.array_equal(pgm, np.round((raw - lo) / (hi - lo) * 255).astype(np.uint8))
        header, rows = read_csv(base / r.artifacts["csv"])
        assert header == ["iteration", "residual"] and len(rows) in (cfg.iters, cfg.er_iters)
    assert doc["config"] == cfg.to_dict()


def test_determinism_and_manifest_rerun(cfg, tmp_path):
    a = run_compare_algorithms(cfg, out=tmp_path / "a")
    b = run_compare_algorithms(cfg, out=tmp_path / "b")
    da, db = (json.loads(r.manifest.read_text()) for r in (a, b))
    assert strip(da) == strip(db)
    for rel in da["artifacts"]:
        if rel.endswith((".csv", ".piid", ".pgm")):
            assert (a.manifest.parent / rel).read_bytes() == (b.manifest.parent / rel).read_bytes()
    again = run_scenario(config_from_manifest(a.manifest), out=False)
    assert [r.quality for r in again.records] == [r.quality for r in a.records]


def test_shift_zero_matches_compare(cfg):
    cmp_ = run_compare_algorithms(cfg, out=False)
    sh = run_shift_error(cfg, out=False)
    assert sh.qualities(pct=0.0) == cmp_.qualities(algorithm="pii")


def test_loose_grid(cfg):
    res = run_loose_support(cfg)
    assert len(res.records) == 2 * 2 * 2
    assert set(res.summary) == {"25", "50"}
    header, rows = read_csv(res.out_dir / "quality_matrix.csv")
    assert header == ["pct", "loose0", "loose3"] and len(rows) == 2


def test_frames_sweep(cfg):
    res = run_frames_sweep(cfg)
    assert set(res.summary["quality"]) == {"10", "40"}
    assert -1 < res.summary["noise_baseline"] < 0.5
    header, rows = read_csv(res.out_dir / "frames.csv")
    assert header[0] == "frames" and [r[0] for r in rows] == ["10", "40"]


def test_custom(cfg):
    from dataclasses import replace
    res = run_custom(replace(cfg, algorithm="hio"), out=False)
    assert [r.params["algorithm"] for r in res.records] == ["hio", "hio"]


def test_parallel_equals_serial(cfg):
    a = run_shift_error(cfg, out=False)
    b = run_shift_error(cfg, out=False, workers=2)
    assert [r.quality for r in a.records] == [r.quality for r in b.records]


class TestCLI:
    def args(self, cfg):
        return ["--out", cfg.out, "--grid", "64", "--probe-px", "20", "--steps", "8", "--step-px", "2",
                "--frames", "20", "--iters", "4", "--object", "letters", "--shift", "0"]

    def test_simulate_and_reconstruct(self, cfg, capsys):
        assert main(["simulate"] + self.args(cfg)) == 0
        path = capsys.readouterr().out.strip()
        data = read_piid(path)
        assert data.n_positions == 8 and data.n_frames == 20
        assert main(["reconstruct", path] + self.args(cfg)) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["iterations"] == 4
        assert read_piid(out["outputs"][2]).section(SECTION_RECONSTRUCTION).shape == (64, 64)

    def test_full_field_er(self, cfg, capsys):
        assert main(["simulate", "--full-field"] + self.args(cfg)) == 0
        path = capsys.readouterr().out.strip()
        assert read_piid(path).n_positions == 1
        assert main(["reconstruct", path, "--algorithm", "er"] + self.args(cfg)) == 0
        assert json.loads(capsys.readouterr().out)["algorithm"] == "er"

    def test_er_rejects_scan_dataset(self, cfg, capsys):
        main(["simulate"] + self.args(cfg))
        path = capsys.readouterr().out.strip()
        assert main(["reconstruct", path, "--algorithm", "hio"] + self.args(cfg)) == 2
        assert "full-field" in capsys.readouterr().err

    def test_experiment(self, cfg, tmp_path, capsys):
        conf = tmp_path / "run.cfg"
        conf.write_text("er_iters = 10\nhio_iters = 10\nn_seeds = 1\n")
        assert main(["experiment", "compare-algorithms", "--config", str(conf)] + self.args(cfg)) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[-1].endswith("manifest.json")

    def test_bad_config_key(self, tmp_path, capsys):
        conf = tmp_path / "bad.cfg"
        conf.write_text("stepp = 3\n")
        assert main(["experiment", "custom", "--config", str(conf)]) == 2
        assert "stepp" in capsys.readouterr().err

    def test_simulate_function_path(self, cfg, tmp_path):
        from dataclasses import replace
        p = simulate(replace(cfg, frames=5, shift=(0.0,)), path=tmp_path / "x.piid")
        assert read_piid(p, mmap=True).n_frames == 5
        summary = reconstruct(replace(cfg, frames=5, iters=2), p, out=tmp_path / "r")
        assert summary["final_residual"] >= 0
