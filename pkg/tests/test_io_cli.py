import json
import subprocess
import sys

import numpy as np
import pytest

from cslbound import io as fio
from cslbound.cli import EXIT_DATA, EXIT_INPUT, EXIT_OK, EXIT_QUAD, EXIT_STRICT, main, quality_factor
from cslbound.csl_noise import DEFAULT_QUAD_3D, CslParams, csl_psd_quadrature
from cslbound.mass_model import reference_geometry
from cslbound.synth import reference_params
from cslbound.thermal_inference import feldman_cousins_interval

K, PHI_X, F0 = 0.43, 2.38e7, 3532.7


def backaction_floor():
    """Temperature-independent force-noise term carried by the fitted amplitude."""
    p = reference_params()
    e = p.f1 ** 2 - p.f0 ** 2
    return K ** 2 / PHI_X ** 2 * p.C * (e * e / p.f0 ** 4 - 1 / p.Qprime ** 2)


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    return tmp_path


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    assert main(["synth", "--kind", "dataset", "--out", str(root), "--s-inj", "2e-35", "--seed", "3"]) == EXIT_OK
    return root


def _spectrum(work, *extra):
    assert main(["synth", "--out", "s.csv", "--temperature", "0.1", "--seed", "5", *extra]) == EXIT_OK
    return work / "s.csv"


# --- general contract ---------------------------------------------------------------

def test_help_and_usage_errors(capsys):
    assert main(["--help"]) == EXIT_OK
    assert main(["no-such-command"]) == EXIT_INPUT
    assert main(["feldman-cousins", "--sigma", "1"]) == EXIT_INPUT
    assert "--measured is required" in capsys.readouterr().err


def test_module_entry_point(work):
    out = subprocess.run([sys.executable, "-m", "cslbound.cli", "feldman-cousins", "--measured=0", "--sigma", "1"],
                         capture_output=True, text=True, check=True)
    lo, hi = map(float, out.stdout.split())
    assert lo == 0.0 and hi == pytest.approx(1.96, abs=0.006)


# --- csl-noise ------------------------------------------------------------------------

def test_csl_noise_single_point(work):
    assert main(["csl-noise", "--rc", "1e-7"]) == EXIT_OK
    rc, lam, psd = fio.read_table("csl_scan.csv", fio.SCAN_COLUMNS)
    assert rc.size == 1 and lam[0] == 1.0
    expected = csl_psd_quadrature(reference_geometry(), CslParams(1.0, 1e-7), DEFAULT_QUAD_3D)
    assert psd[0] == pytest.approx(expected, rel=1e-8, abs=0)
    man = json.loads((work / "csl_scan.csv.manifest.json").read_text())
    assert man["status"] == "ok" and man["command"] == "csl-noise"
    assert man["outputs"][0]["sha256"] == fio.sha256_file("csl_scan.csv")
    assert man["timestamp"] == "2023-11-14T22:13:20Z"


def test_csl_noise_zero_rate(work):
    assert main(["csl-noise", "--rc", "1e-8", "1e-7", "--lambda", "0"]) == EXIT_OK
    _, _, psd = fio.read_table("csl_scan.csv", fio.SCAN_COLUMNS)
    assert np.all(psd == 0.0)


def test_csl_noise_multilayer_method(work):
    assert main(["csl-noise", "--rc", "1e-7", "--method", "multilayer", "--out", "m.csv"]) == EXIT_OK
    assert main(["csl-noise", "--rc", "1e-7", "--method", "multilayer", "--component", "nope"]) == EXIT_INPUT


def test_malformed_geometry_writes_nothing(work):
    (work / "g.json").write_text('{"components": [{"type": "cuboid", "density": -1}]}')
    assert main(["csl-noise", "--geometry", "g.json", "--rc", "1e-7"]) == EXIT_INPUT
    assert sorted(p.name for p in work.iterdir()) == ["g.json"]


def test_quadrature_failure_names_rc(work, capsys):
    code = main(["csl-noise", "--rc", "2e-7", "--rtol", "1e-12", "--max-evals", "300"])
    assert code == EXIT_QUAD
    assert "rC = 2e-07" in capsys.readouterr().err
    assert not (work / "csl_scan.csv").exists()


def test_worker_cap_does_not_change_output(work, monkeypatch):
    monkeypatch.setenv("CSLBOUND_MAX_WORKERS", "1")
    assert main(["csl-noise", "--rc-num", "4", "--rc-min", "1e-8", "--rc-max", "1e-6", "--out", "a.csv"]) == 0
    monkeypatch.setenv("CSLBOUND_MAX_WORKERS", "4")
    assert main(["csl-noise", "--rc-num", "4", "--rc-min", "1e-8", "--rc-max", "1e-6", "--out", "b.csv"]) == 0
    assert (work / "a.csv").read_bytes() == (work / "b.csv").read_bytes()


# --- config files -----------------------------------------------------------------------

def test_config_file_and_flag_precedence(work):
    (work / "c.json").write_text(json.dumps({"lam": 2.0, "rc": [1e-7], "out": "cfg.csv"}))
    assert main(["csl-noise", "--config", "c.json"]) == EXIT_OK
    assert fio.read_table("cfg.csv", fio.SCAN_COLUMNS)[1][0] == 2.0
    assert main(["csl-noise", "--config", "c.json", "--lambda", "3"]) == EXIT_OK
    assert fio.read_table("cfg.csv", fio.SCAN_COLUMNS)[1][0] == 3.0


def test_config_rejects_unknown_keys(work, capsys):
    (work / "c.json").write_text(json.dumps({"lam": 2.0, "colour": "red"}))
    assert main(["csl-noise", "--config", "c.json"]) == EXIT_INPUT
    assert "colour" in capsys.readouterr().err
    (work / "d.json").write_text("[1, 2]")
    assert main(["csl-noise", "--config", "d.json"]) == EXIT_INPUT


# --- fit-spectrum --------------------------------------------------------------------------

def test_fit_spectrum_recovers_amplitude_and_reports_mask(work, capsys):
    path = _spectrum(work)
    assert main(["fit-spectrum", "--spectrum", str(path), "--mask-report"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("masked 6 bins")
    rec = json.loads((work / "fit.json").read_text())
    assert rec["mask_report"]["count"] == 6
    p = reference_params()
    e = p.f1 ** 2 - p.f0 ** 2
    truth = p.B + p.C * (e * e / p.f0 ** 4 - 1 / p.Qprime ** 2)
    assert abs(rec["lorentzian_amplitude"] - truth) < 3 * rec["lorentzian_sigma"]
    assert rec["temperature_K"] == 0.1 and rec["Q"] == 2.83e6


def test_fit_spectrum_too_few_bins(work):
    path = _spectrum(work, "--band", str(F0 - 0.5), str(F0 + 0.5))
    assert main(["fit-spectrum", "--spectrum", str(path)]) == EXIT_DATA
    assert not (work / "fit.json").exists()


def test_fit_spectrum_missing_metadata(work):
    path = _spectrum(work)
    fio.meta_path_for(path).unlink()
    assert main(["fit-spectrum", "--spectrum", str(path)]) == EXIT_INPUT


def test_fit_spectrum_strict_mode(work):
    path = _spectrum(work)
    f, psd = fio.read_table(path, fio.SPECTRUM_COLUMNS)
    # exaggerate the scatter so the residual distribution check fails
    model = fio.read_spectrum(path)
    noisy = np.where(np.arange(psd.size) % 2 == 0, psd * 3.0, psd / 3.0)
    fio.write_spectrum(path, model.__class__(f, noisy, model.n_av, "blackman", model.sample_rate,
                                             model.n_samples, model.meta))
    assert main(["fit-spectrum", "--spectrum", str(path)]) == EXIT_OK
    assert main(["fit-spectrum", "--spectrum", str(path), "--strict"]) == EXIT_STRICT


def test_outputs_are_byte_identical(work):
    path = _spectrum(work)
    runs = []
    for _ in range(2):
        assert main(["fit-spectrum", "--spectrum", str(path)]) == EXIT_OK
        runs.append(((work / "fit.json").read_bytes(), (work / "fit.json.manifest.json").read_bytes()))
    assert runs[0] == runs[1]


# --- thermal and limits ------------------------------------------------------------------------

def test_fit_thermal(work):
    assert main(["synth", "--kind", "thermal", "--out", "t.csv", "--seed", "1"]) == EXIT_OK
    assert main(["fit-thermal", "--data", "t.csv"]) == EXIT_OK
    rec = json.loads((work / "thermal.json").read_text())
    assert {"saturation", "linear", "nonthermal_psd", "feldman_cousins"} <= set(rec)
    assert rec["feldman_cousins"]["upper"] > 0


def test_feldman_cousins_negative_measurement(work, capsys):
    assert main(["feldman-cousins", "--measured=-1.51e-36", "--sigma", "1.77e-36", "--out", "fc.json"]) == 0
    lo, hi = map(float, capsys.readouterr().out.split())
    assert lo == 0.0
    assert hi == pytest.approx(feldman_cousins_interval(-1.51e-36, 1.77e-36)[1], rel=1e-8, abs=0)
    assert json.loads((work / "fc.json").read_text())["upper"] == pytest.approx(hi, rel=1e-8, abs=0)


def test_feldman_cousins_bad_precision(work):
    assert main(["feldman-cousins", "--measured=0", "--sigma", "1", "--precision", "0.001"]) == EXIT_INPUT


def test_exclusion_command(work):
    assert main(["exclusion", "--s-upper", "2.07e-36", "--rc", "3e-8", "1e-7", "1e-6"]) == EXIT_OK
    rc, lam = fio.read_table("curve.csv", fio.CURVE_COLUMNS)
    assert rc.size == 3 and lam[1] < 4.4e-10
    man = json.loads((work / "curve.csv.manifest.json").read_text())
    assert man["S_upper"] == 2.07e-36 and man["CL"] == 0.95 and len(man["geometry_hash"]) == 64
    assert main(["exclusion", "--rc", "1e-7"]) == EXIT_INPUT


def test_design_scan_command(work, capsys):
    assert main(["design-scan", "--n-lay", *map(str, range(1, 16))]) == EXIT_OK
    assert "minimal n_lay below 4.40000000e-10: 9" in capsys.readouterr().out
    n, lam = fio.read_table("design_scan.csv", fio.DESIGN_COLUMNS)
    assert list(n) == list(range(1, 16)) and np.all(np.diff(lam) < 0)


# --- synth and pipeline ------------------------------------------------------------------------

def test_synth_dataset_layout(dataset):
    spectra = sorted((dataset / "spectra").glob("*.csv"))
    assert len(spectra) == 14
    meta = json.loads(fio.meta_path_for(spectra[4]).read_text())
    assert meta["temperature_K"] == 0.1 and meta["Q"] == pytest.approx(float(quality_factor(0.1)), rel=1e-8)
    assert json.loads((dataset / "resonator.json").read_text())["k"] == K


def test_pipeline_recovers_injected_noise(dataset, tmp_path):
    out = tmp_path / "res"
    assert main(["pipeline", "--dir", str(dataset), "--out-dir", str(out), "--rc", "1e-7",
                 "--rel-sigma-x", "0"]) == EXIT_OK
    rec = json.loads((out / "thermal.json").read_text())
    S, sS = rec["nonthermal_psd"]["value"], rec["nonthermal_psd"]["sigma"]
    assert abs(S - (2e-35 + backaction_floor())) < 3 * sS
    assert rec["linear"]["n_points"] == 10
    man = json.loads((out / "manifest.json").read_text())
    listed = {o["path"] for o in man["outputs"]}
    written = {str(p) for p in out.rglob("*") if p.is_file() and p.name != "manifest.json"}
    assert listed == written and len(listed) == 14 + 3


def test_pipeline_failure_keeps_partial_outputs(dataset, tmp_path):
    out = tmp_path / "res"
    code = main(["pipeline", "--dir", str(dataset), "--out-dir", str(out), "--rc", "1e-7", "--t-restrict", "10"])
    assert code == EXIT_DATA
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "failed" and man["failed_stage"] == "thermal"
    assert len(list((out / "fits").glob("*.json"))) == 14
    assert not (out / "curve.csv").exists()


def test_pipeline_rejects_incomplete_metadata(dataset, tmp_path):
    import shutil

    root = tmp_path / "ds"
    shutil.copytree(dataset, root)
    meta = fio.meta_path_for(next((root / "spectra").glob("*.csv")))
    rec = json.loads(meta.read_text())
    del rec["Q"]
    meta.write_text(json.dumps(rec))
    assert main(["pipeline", "--dir", str(root), "--rc", "1e-7"]) == EXIT_INPUT
    man = json.loads((root / "results" / "manifest.json").read_text())
    assert man["failed_stage"] == "load" and man["outputs"] == []


@pytest.mark.slow
def test_pipeline_null_injection_coverage(tmp_path):
    # with no injected noise the interval must cover the back-action floor
    floor, covered, pulls = backaction_floor(), 0, []
    for seed in range(100):
        root = tmp_path / f"s{seed}"
        assert main(["synth", "--kind", "dataset", "--out", str(root), "--seed", str(seed)]) == EXIT_OK
        assert main(["pipeline", "--dir", str(root), "--rc", "1e-7", "--rel-sigma-x", "0"]) == EXIT_OK
        rec = json.loads((root / "results" / "thermal.json").read_text())
        fc, ns = rec["feldman_cousins"], rec["nonthermal_psd"]
        covered += fc["lower"] <= floor <= fc["upper"]
        pulls.append((ns["value"] - floor) / ns["sigma"])
    assert covered >= 95
    assert abs(np.mean(pulls)) < 0.3 and 0.8 < np.std(pulls) < 1.2
