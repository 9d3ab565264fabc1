import json
import warnings

import numpy as np
import pytest

from hypdet import cli, reports
from hypdet.errors import MissingArtifacts


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


@pytest.fixture()
def quick_resonances_cfg(tmp_path):
    return write_config(tmp_path, "res.json", {
        "map": {"id": "cat", "eps": 0.0, "seed": 0},
        "N_det": 8, "n_freq": 8, "seed": 5,
    })


def test_resonances_cat(quick_resonances_cfg, tmp_path):
    out = str(tmp_path / "out")
    rc = cli.main(["resonances", "--config", quick_resonances_cfg,
                   "--out", out, "--quiet"])
    assert rc == 0
    d = reports.read_json(out + "/determinant.json")
    coeffs = np.array(d["coeffs"])
    assert abs(coeffs[1] + 1.0) < 1e-10 and np.max(np.abs(coeffs[2:])) < 1e-10
    m = reports.read_json(out + "/match.json")
    assert m["match"]["pass"]
    lines = open(out + "/traces.csv").read().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert lines[1] == "m,trace"


def test_resonances_perturbed_small(tmp_path):
    cfg = write_config(tmp_path, "res2.json", {
        "map": {"id": "perturbed_cat", "eps": 0.01, "seed": 0},
        "N_det": 6, "n_freq": 8, "seed": 5,
    })
    out = str(tmp_path / "out2")
    rc = cli.main(["resonances", "--config", cfg, "--out", out, "--quiet"])
    assert rc == 0
    m = reports.read_json(out + "/match.json")
    pairs = m["match"]["pairs"]
    assert len(pairs) == 1
    assert abs(pairs[0]["eigenvalue"]["re"] - 1.0) < 1e-6


@pytest.fixture()
def quick_bounds_cfg(tmp_path):
    return write_config(tmp_path, "bounds.json", {
        "map": {"id": "cat"}, "m_max": 6, "mc_samples": 512, "seed": 3,
    })


def test_bounds_cat(quick_bounds_cfg, tmp_path):
    out = str(tmp_path / "outb")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rc = cli.main(["bounds", "--config", quick_bounds_cfg, "--out", out,
                       "--quiet"])
    assert rc == 0
    b = reports.read_json(out + "/bounds.json")
    assert b["kitaev"]["pass"] and b["appendixB"]["pass"]
    assert abs(b["kitaev"]["rho_estimate"] - 0.381966) < 0.01


def test_bounds_negative_control(tmp_path):
    cfg = write_config(tmp_path, "neg.json", {
        "map": {"id": "cat"}, "m_max": 6, "mc_samples": 256, "seed": 3,
        "negative_control": True,
    })
    out = str(tmp_path / "outn")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rc = cli.main(["bounds", "--config", cfg, "--out", out, "--quiet"])
    assert rc == 2


def test_aniso_quick(tmp_path):
    cfg = write_config(tmp_path, "aniso.json", {
        "map": {"eps": 0.0}, "n_max_aniso": 5, "young_trials": 3, "seed": 2,
    })
    out = str(tmp_path / "outa")
    rc = cli.main(["aniso", "--config", cfg, "--out", out, "--quiet"])
    assert rc == 0
    a = reports.read_json(out + "/aniso.json")
    assert all(c["pass"] for c in a["checks"].values())


def test_aniso_zero_weight(tmp_path):
    cfg = write_config(tmp_path, "aniso0.json", {
        "map": {"eps": 0.0}, "weight": {"id": "zero"},
        "n_max_aniso": 5, "young_trials": 2, "seed": 2,
    })
    out = str(tmp_path / "outz")
    rc = cli.main(["aniso", "--config", cfg, "--out", out, "--quiet"])
    assert rc == 0
    a = reports.read_json(out + "/aniso.json")
    assert a["checks"]["flat_trace"]["partial_sum"] == 0.0


def test_report_merge_and_gaps(quick_resonances_cfg, tmp_path):
    out = str(tmp_path / "outr")
    assert cli.main(["resonances", "--config", quick_resonances_cfg,
                     "--out", out, "--quiet"]) == 0
    rc = cli.main(["report", "--out", out, "--quiet"])
    assert rc == 0
    s = reports.read_json(out + "/summary.json")
    assert "bounds.json" in s["gaps"]
    assert "determinant" in s["reports"]
    assert (tmp_path / "outr" / "zeros_scatter.dat").exists()
    assert (tmp_path / "outr" / "traces.dat").exists()
    first = open(str(tmp_path / "outr" / "traces.dat")).readline()
    assert first.startswith("# config_hash=")


def test_report_empty_dir(tmp_path):
    with pytest.raises(MissingArtifacts):
        cli.cmd_report(str(tmp_path / "nothing_here"))
    rc = cli.main(["report", "--out", str(tmp_path / "nothing_here")])
    assert rc == 4


def test_config_error_exit_code(tmp_path):
    bad = write_config(tmp_path, "bad.json", {"p": -1.0, "q": -1.0})
    assert cli.main(["bounds", "--config", bad, "--out", str(tmp_path)]) == 3


def test_finite_r_warning(tmp_path):
    with pytest.warns(UserWarning, match="spectral hypotheses"):
        cli.RunConfig.from_dict({"p": 2.0, "q": -2.0, "r_smoothness": 4.0})


def test_weight_expressions():
    w = cli.build_weight({"id": "expression", "terms": {"one": 0.5, "cos1": 0.25}})
    x = np.array([[0.0, 0.3]])
    assert abs(w(x)[0] - 0.75) < 1e-15
    with pytest.raises(ValueError):
        cli.build_weight({"id": "expression", "terms": {"nope": 1.0}})
    wb = cli.build_weight({"id": "bump", "center": [0.5, 0.5], "width": 0.2})
    assert wb(np.array([[0.5, 0.5]]))[0] == pytest.approx(1.0)
    assert wb(np.array([[0.9, 0.1]]))[0] == 0.0


def test_determinism_byte_identical(tmp_path):
    cfg = write_config(tmp_path, "det.json", {
        "map": {"id": "perturbed_cat", "eps": 0.01, "seed": 0},
        "m_max": 6, "mc_samples": 256, "seed": 9,
    })
    outs = []
    for name in ("d1", "d2"):
        out = str(tmp_path / name)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert cli.main(["bounds", "--config", cfg, "--out", out,
                             "--quiet"]) == 0
        outs.append(out)
    for fname in ("bounds.json", "bounds.csv"):
        a = open(outs[0] + "/" + fname, "rb").read()
        b = open(outs[1] + "/" + fname, "rb").read()
        assert a == b
