import csv

import numpy as np
import pytest
import yaml

import migrscatter as mg
from migrscatter.cli import main

BASE_CONFIG = {
    "grid": {"n": 12, "side": 2.0},
    "source": {
        "m": 2.5,
        "mu": {"shape": "gaussian-bump", "radius": 0.6, "amplitude": 1.0},
        "mean": {"shape": "none"},
        "sampler": {"pad": 2.0, "scheme": "cell-mean"},
    },
    "potential": {"shape": "none"},
    "directions": {"count": 8},
    "frequencies": {"dk": 0.25},
    "bands": {"list": [2.0, 4.0]},
    "tau": {"max": 1.0, "spacing_steps": 2},
    "seeds": {"seed": 11, "realizations": 1},
    "estimator": {"kind": "single_realization"},
}


def write_config(tmp_path, overrides=None, name="exp.yaml"):
    cfg = yaml.safe_load(yaml.safe_dump(BASE_CONFIG))
    for path, value in (overrides or {}).items():
        node = cfg
        parts = path.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def test_zero_realizations_is_config_error(tmp_path, capsys):
    cfgp = write_config(tmp_path, {"output": str(tmp_path / "out")})
    rc = main(["sample-source", "--config", str(cfgp), "--realizations", "0"])
    assert rc == 2
    assert "realizations" in capsys.readouterr().err


def test_bad_m_is_config_error(tmp_path, capsys):
    cfgp = write_config(tmp_path, {"source.m": 3.4,
                                   "output": str(tmp_path / "out")})
    rc = main(["sample-source", "--config", str(cfgp)])
    assert rc == 2
    assert "source" in capsys.readouterr().err


def test_band_coverage_beyond_nyquist_is_config_error(tmp_path, capsys):
    cfgp = write_config(tmp_path, {"bands.list": [8.0, 16.0],
                                   "output": str(tmp_path / "out")})
    rc = main(["farfield", "--config", str(cfgp)])
    assert rc == 2
    assert "Nyquist" in capsys.readouterr().err


def test_sample_source_reproducible(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cfgp = write_config(tmp_path)
    assert main(["sample-source", "--config", str(cfgp), "--out", str(out1)]) == 0
    assert main(["sample-source", "--config", str(cfgp), "--out", str(out2)]) == 0
    f1 = (out1 / "f_00000.fld").read_bytes()
    f2 = (out2 / "f_00000.fld").read_bytes()
    assert f1 == f2
    assert (out1 / "mu.fld").exists() and (out1 / "mean.fld").exists()


def test_sample_source_covariance_csv(tmp_path):
    cfgp = write_config(tmp_path, {
        "source.mu": {"shape": "plateau", "amplitude": 1.0},
        "grid": {"n": 16, "side": 4.0},
        "validate": {"covariance_lags": [0.5, 1.0]},
        "seeds": {"seed": 3, "realizations": 64},
    })
    out = tmp_path / "cov"
    rc = main(["sample-source", "--config", str(cfgp), "--out", str(out),
               "--check-covariance"])
    assert rc == 0
    rows = list(csv.reader((out / "covariance.csv").open()))
    assert rows[0] == ["lag", "empirical", "stderr", "oracle"]
    assert len(rows) == 3


def test_farfield_refuses_overwrite(tmp_path):
    cfgp = write_config(tmp_path)
    out = tmp_path / "ff"
    assert main(["farfield", "--config", str(cfgp), "--out", str(out)]) == 0
    assert main(["farfield", "--config", str(cfgp), "--out", str(out)]) == 2
    assert main(["farfield", "--config", str(cfgp), "--out", str(out),
                 "--force"]) == 0


def test_farfield_dataset_provenance_and_recover(tmp_path):
    cfgp = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["farfield", "--config", str(cfgp), "--out", str(out)]) == 0
    ds = mg.read_dataset(out / "dataset.ffd")
    assert len(ds.provenance["source"]) == 64

    rec_out = tmp_path / "rec"
    rc = main(["recover", "--config", str(cfgp), "--out", str(rec_out),
               "--dataset", str(out / "dataset.ffd"),
               "--oracle", str(out.parent / "missing.fld")])
    assert rc == 2   # oracle path missing -> handled as config-level failure

    rc = main(["recover", "--config", str(cfgp), "--out", str(rec_out),
               "--dataset", str(out / "dataset.ffd")])
    assert rc == 0
    assert (rec_out / "mu_recovered.fld").exists()
    rows = list(csv.reader((rec_out / "trajectory.csv").open()))
    assert rows[0] == ["K", "direction", "tau", "re", "im"]

    # tampered model -> provenance mismatch
    cfgp2 = write_config(tmp_path, {"source.mu.radius": 0.5}, name="other.yaml")
    rc = main(["recover", "--config", str(cfgp2), "--out", str(rec_out),
               "--dataset", str(out / "dataset.ffd")])
    assert rc == 2


def test_recover_with_oracle_error_column(tmp_path):
    cfgp = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["farfield", "--config", str(cfgp), "--out", str(out)]) == 0
    assert main(["sample-source", "--config", str(cfgp), "--out",
                 str(out)]) == 0
    rec_out = tmp_path / "rec"
    rc = main(["recover", "--config", str(cfgp), "--out", str(rec_out),
               "--dataset", str(out / "dataset.ffd"),
               "--oracle", str(out / "mu.fld")])
    assert rc == 0
    rows = list(csv.reader((rec_out / "trajectory.csv").open()))
    assert rows[0][-1] == "abs_err"
    assert all(float(r[-1]) >= 0 for r in rows[1:])


def test_recover_zero_mu_dataset(tmp_path):
    cfgp = write_config(tmp_path, {"source.mu.shape": "none"})
    out = tmp_path / "run0"
    assert main(["farfield", "--config", str(cfgp), "--out", str(out)]) == 0
    rec = tmp_path / "rec0"
    assert main(["recover", "--config", str(cfgp), "--out", str(rec),
                 "--dataset", str(out / "dataset.ffd")]) == 0
    fld = mg.read_field(rec / "mu_recovered.fld")
    assert np.abs(fld.values).max() <= 1e-12


def test_study_schema_and_coverage_guard(tmp_path, capsys):
    cfgp = write_config(tmp_path)
    out = tmp_path / "study"
    rc = main(["study", "--config", str(cfgp), "--out", str(out)])
    assert rc == 0
    rows = list(csv.reader((out / "study.csv").open()))
    assert rows[0] == ["K", "tau", "dir", "est_re", "est_im", "oracle_re",
                       "oracle_im", "abs_err"]
    # J = 1 -> single band block
    cfg1 = write_config(tmp_path, {"bands.list": [2.0]}, name="j1.yaml")
    out1 = tmp_path / "study1"
    assert main(["study", "--config", str(cfg1), "--out", str(out1)]) == 0
    rows1 = list(csv.reader((out1 / "study.csv").open()))
    taus = {float(r[1]) for r in rows1[1:]}
    assert len(rows1) == 1 + 8 * len(taus)   # one block: 8 dirs x taus
    assert {float(r[0]) for r in rows1[1:]} == {2.0}

    ds_path = out / "dataset.ffd"
    assert main(["farfield", "--config", str(cfgp), "--out", str(out)]) == 0
    bad = write_config(tmp_path, {"bands.list": [2.0, 4.0, 6.0]},
                       name="bad.yaml")
    rc = main(["study", "--config", str(bad), "--out", str(out),
               "--dataset", str(ds_path)])
    assert rc == 2
    assert "coverage" in capsys.readouterr().err


def test_validate_report_and_exit_codes(tmp_path, capsys):
    cfgp = write_config(tmp_path, {
        "grid": {"n": 16, "side": 2.0},
        "source.mu": {"shape": "gaussian-bump", "radius": 0.6},
        "validate": {"checks": ["leading-term"],
                     "leading_realizations": 40,
                     "k_list": [4.0, 8.0, 16.0],
                     "tau": 0.5},
    })
    out = tmp_path / "val"
    rc = main(["validate", "--config", str(cfgp), "--out", str(out)])
    report = (out / "validate_report.txt").read_text()
    assert "leading-term-limit" in report
    assert "skipped" in report           # disabled checks are marked skipped
    assert rc in (0, 4)


def test_validate_zero_mu_trivially_passes(tmp_path):
    cfgp = write_config(tmp_path, {
        "source.mu.shape": "none",
        "validate": {"checks": ["covariance", "leading-term"]},
    })
    out = tmp_path / "val0"
    rc = main(["validate", "--config", str(cfgp), "--out", str(out)])
    assert rc == 0
    report = (out / "validate_report.txt").read_text()
    assert "PASS" in report


def test_set_override_wins(tmp_path):
    cfgp = write_config(tmp_path)
    out = tmp_path / "ov"
    rc = main(["sample-source", "--config", str(cfgp), "--out", str(out),
               "--set", "seeds.realizations=2"])
    assert rc == 0
    assert (out / "f_00001.fld").exists()


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfgp = write_config(tmp_path, {
        "potential": {"shape": "gaussian", "amplitude": 90.0, "width": 0.5},
        "bands.list": [2.0],
        "solver": {"max_iter": 30},
    })
    out = tmp_path / "num"
    rc = main(["farfield", "--config", str(cfgp), "--out", str(out)])
    assert rc == 3
    assert "k=" in capsys.readouterr().err
