import json

import pytest

from turinglines.cli import main
from turinglines.io import read_csv
from turinglines.stability import mode_matrix, mode_spectrum
from turinglines.params import ModelParams

@pytest.fixture()
def params_dict(canonical):
    return canonical.to_dict()


def write_config(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return str(path)


def test_missing_config_file(tmp_path):
    code = main(["stability", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert code == 2


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["stability", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_schema_rejects_unknown_keys(tmp_path, params_dict):
    cfg = write_config(tmp_path, "c.json", {"params": params_dict, "bogus": 1})
    assert main(["stability", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_schema_rejects_bad_parameter(tmp_path, params_dict):
    bad = dict(params_dict)
    bad["tau1"] = -1.0
    cfg = write_config(tmp_path, "c.json", {"params": bad})
    assert main(["stability", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_missing_required_key(tmp_path):
    cfg = write_config(tmp_path, "c.json", {})
    assert main(["stability", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_io_error_on_bad_out_dir(tmp_path, params_dict):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write_config(tmp_path, "c.json", {"params": params_dict})
    code = main(["stability", "--config", cfg, "--out", str(blocker / "sub")])
    assert code == 3


def test_stability_outputs(tmp_path, params_dict, canonical):
    out = tmp_path / "run"
    cfg = write_config(tmp_path, "c.json", {"params": params_dict, "k_max": 5})
    assert main(["stability", "--config", cfg, "--out", str(out)]) == 0
    header, rows = read_csv(out / "stability.csv")
    assert header[0] == "k"
    assert len(rows) == 6
    for row in rows:
        k = int(row[0])
        spec = mode_spectrum(mode_matrix(canonical, k))
        assert row[4] == spec.mu1.real  # 17 significant digits are lossless
        assert row[8] == spec.stability_class
    report = json.loads((out / "stability_report.json").read_text())
    assert report["is_unimodular"] is True
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "stability"
    assert manifest["config"]["k_max"] == 5


def test_construct_params_success_and_failure(tmp_path):
    out_ok = tmp_path / "ok"
    cfg = write_config(tmp_path, "ok.json", {"beta1": 1.3, "beta2": 0.8})
    assert main(["construct-params", "--config", cfg, "--out", str(out_ok)]) == 0
    params = ModelParams.from_json((out_ok / "params.json").read_text())
    assert params.beta1 == 1.3

    out_bad = tmp_path / "bad"
    cfg = write_config(tmp_path, "bad.json", {"beta1": 1.05, "beta2": 0.97})
    assert main(["construct-params", "--config", cfg, "--out", str(out_bad)]) == 1
    report = json.loads((out_bad / "construct_report.json").read_text())
    assert report["is_unimodular"] is False


def test_construct_params_domain_error(tmp_path):
    cfg = write_config(tmp_path, "c.json", {"beta1": 0.9, "beta2": 0.8})
    assert main(["construct-params", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_pde_run(tmp_path, params_dict):
    out = tmp_path / "pde"
    cfg = write_config(
        tmp_path,
        "c.json",
        {"params": params_dict, "t_end": 0.2, "n_modes": 8, "k_list": [0, 1]},
    )
    assert main(["pde", "--config", cfg, "--out", str(out)]) == 0
    header, rows = read_csv(out / "pde.csv")
    assert header == ["t", "k", "re_u1", "im_u1", "re_u2", "im_u2"]
    assert rows[-1][0] == pytest.approx(0.2)


def test_simulate_deterministic(tmp_path, params_dict):
    cfg = write_config(
        tmp_path,
        "c.json",
        {"params": params_dict, "n_sites": 64, "t_end": 1.0, "seed": 5},
    )
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        outs.append((out / "simulate.csv").read_bytes())
    assert outs[0] == outs[1]
    report = json.loads((tmp_path / "a" / "simulate_report.json").read_text())
    assert report["events"] > 0
    assert 0.0 < report["acceptance_ratio"] < 1.0


def test_seed_flag_overrides_config(tmp_path, params_dict):
    cfg = write_config(
        tmp_path,
        "c.json",
        {"params": params_dict, "n_sites": 64, "t_end": 0.5, "seed": 5},
    )
    out1, out2, out3 = tmp_path / "s5", tmp_path / "s9", tmp_path / "s9b"
    assert main(["simulate", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(out2), "--seed", "9"]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(out3), "--seed", "9"]) == 0
    a = (out1 / "simulate.csv").read_bytes()
    b = (out2 / "simulate.csv").read_bytes()
    c = (out3 / "simulate.csv").read_bytes()
    assert a != b
    assert b == c
    manifest = json.loads((out2 / "manifest.json").read_text())
    assert manifest["seed"] == 9


def test_clt_check_run(tmp_path):
    out = tmp_path / "clt"
    cfg = write_config(tmp_path, "c.json", {"n_sites": 500, "n_samples": 400})
    assert main(["clt-check", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "clt_report.json").read_text())
    assert report["target_variance"] == pytest.approx(0.5, abs=1e-8)
    header, rows = read_csv(out / "clt.csv")
    assert len(rows) == 400


def test_critical_run(tmp_path, params_dict):
    out = tmp_path / "crit"
    cfg = write_config(
        tmp_path,
        "c.json",
        {"params": params_dict, "n_sites": 128, "deltas": [0.3, 0.5], "n_replicas": 6},
    )
    assert main(["critical", "--config", cfg, "--out", str(out), "--threads", "2"]) == 0
    report = json.loads((out / "critical_report.json").read_text())
    assert [e["delta"] for e in report["estimates"]] == [0.3, 0.5]
    header, rows = read_csv(out / "critical.csv")
    assert len(rows) == 2


def test_compensator_check_run(tmp_path, params_dict):
    out = tmp_path / "comp"
    cfg = write_config(
        tmp_path,
        "c.json",
        {"params": params_dict, "n_sites": 64, "t": 0.3, "n_replicas": 8},
    )
    assert main(["compensator-check", "--config", cfg, "--out", str(out), "--threads", "2"]) == 0
    report = json.loads((out / "compensator_report.json").read_text())
    assert report["n_replicas"] == 8
    assert report["h_target"] > 0


def test_fluctuations_run(tmp_path, params_dict):
    out = tmp_path / "fluct"
    cfg = write_config(
        tmp_path,
        "c.json",
        {
            "params": params_dict,
            "n_sites": 128,
            "theta": 0.3,
            "n_replicas": 8,
            "k_list": [0, 1, 2],
        },
    )
    assert main(["fluctuations", "--config", cfg, "--out", str(out), "--threads", "2"]) == 0
    report = json.loads((out / "fluctuations_report.json").read_text())
    assert len(report["variance_ratios"]) == 4
    header, rows = read_csv(out / "fluctuations.csv")
    assert len(rows) == 3 * 8
