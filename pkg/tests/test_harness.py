import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osgood_lab import cli
from osgood_lab import config as C
from osgood_lab import harness as H
from osgood_lab import presets as P
from osgood_lab.errors import ConfigError

EXPECTED = ["osgood-certificate", "seminorm-propagation", "local-structure", "sharpness-lipschitz",
            "sharpness-loglipschitz", "lemma-lp", "euler-steady", "euler-perturbed", "euler-two-vortex",
            "euler-breakdown", "lightcone", "interp"]


def test_every_preset_is_registered_with_an_anchor():
    assert P.names() == EXPECTED
    for name in EXPECTED:
        assert P.get(name).anchor


def test_config_text_parsing():
    raw = C.parse_text("# comment\npreset = interp\n\nn_trials = 20   # few\nexponents = 0.5, 1\n")
    cfg = C.resolve("interp", P.get("interp").schema, raw)
    assert cfg.params["n_trials"] == 20
    assert cfg.params["exponents"] == (0.5, 1.0)
    assert cfg.params["k_max"] == 4


@pytest.mark.parametrize("text", ["n_trials 20", "= 3", "n_trials = 1\nn_trials = 2"])
def test_malformed_config_lines(text):
    with pytest.raises(ConfigError):
        C.parse_text(text)


def test_unknown_key_and_bad_value_and_wrong_preset():
    schema = P.get("interp").schema
    with pytest.raises(ConfigError):
        C.resolve("interp", schema, {"n_trails": "10"})
    with pytest.raises(ConfigError):
        C.resolve("interp", schema, {"n_trials": "ten"})
    with pytest.raises(ConfigError):
        C.resolve("interp", schema, {"preset": "lemma-lp"})
    with pytest.raises(ConfigError):
        P.get("no-such-preset")


@settings(max_examples=30)
@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_float_values_roundtrip(x):
    assert C.Param("float", 0.0).parse(repr(x)) == x


def test_pi_shorthand():
    p = C.Param("float", 0.0)
    assert p.parse("pi/4") == pytest.approx(0.7853981633974483)
    assert p.parse("2pi") == pytest.approx(6.283185307179586)


def test_config_file_load(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("preset = lemma-lp\np_max = 64\n")
    cfg = C.load(path, schemas=H.schemas())
    assert cfg.preset == "lemma-lp" and cfg.params["p_max"] == 64.0


def fast_interp(seed=0):
    return H.make_config("interp", ["n_trials=40", "n=16"], seed=seed)


def test_identical_configs_give_identical_outputs(tmp_path):
    a = H.run_preset(fast_interp(), tmp_path / "a")
    b = H.run_preset(fast_interp(), tmp_path / "b")
    assert a.config_hash == b.config_hash
    assert a.outputs == b.outputs
    assert (tmp_path / "a" / "interpolation.csv").read_bytes() == (tmp_path / "b" / "interpolation.csv").read_bytes()
    assert all(v["rel_diff"] == 0 for v in H.compare_runs(a, b).values())


def test_seed_changes_hash_and_samples():
    a = H.run_preset(fast_interp(0))
    b = H.run_preset(fast_interp(1))
    assert a.config_hash != b.config_hash
    assert a.outputs != b.outputs


def test_manifest_roundtrip(tmp_path):
    m = H.run_preset(fast_interp(), tmp_path)
    loaded = H.RunManifest.load(tmp_path / "manifest.json")
    assert loaded.checks == m.checks and loaded.config_hash == m.config_hash
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["passed"] is True
    assert set(doc["versions"]) >= {"numpy", "scipy", "osgood_lab"}
    assert doc["anchor"] == P.get("interp").anchor


def test_compare_rejects_different_presets():
    a = H.run_preset(fast_interp())
    b = H.run_preset(H.make_config("lemma-lp", ["depths=1", "p_max=8"]))
    with pytest.raises(ConfigError):
        H.compare_runs(a, b)


def test_lemma_preset_reports_bounded_ratio_for_first_two_depths(tmp_path):
    m = H.run_preset(H.make_config("lemma-lp", ["depths=1,2"]), tmp_path)
    assert m.passed
    header = (tmp_path / "lp_growth.csv").read_text().splitlines()[0]
    assert header.startswith("n,p,norm,reference,ratio")


def test_euler_steady_drift_decreases_with_resolution():
    runs = [H.run_preset(H.make_config("euler-steady", [f"n={n}", "T=0.5", "n_control=32"])) for n in (128, 256)]
    report = H.compare_runs(*runs)
    assert runs[1].metrics["drift_l2"] < runs[0].metrics["drift_l2"]
    assert report["drift_l2"]["rel_diff"] > 0


def test_stage_is_named_on_failure():
    cfg = H.make_config("seminorm-propagation", ["field=nope"])
    with pytest.raises(ValueError, match=r"\[stage seminorm-propagation:run\]"):
        H.run_preset(cfg)


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["list"]) == 0
    assert "osgood-certificate" in capsys.readouterr().out
    assert cli.main(["interp", "--set", "n_trials=20", "--set", "n=16", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "manifest.json").exists()
    assert cli.main(["interp", "--set", "bogus=1"]) == 2
    assert cli.main(["lemma-lp", "--set", "depths=3", "--set", "p_max=4"]) == 1


def test_cli_tools(tmp_path, capsys):
    assert cli.main(["modulus", "eval", "--z", "0.01"]) == 0
    assert capsys.readouterr().out.startswith("z,L,M,R")
    assert cli.main(["lemma-lp", "--n", "1", "--pmax", "8"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "p,norm,ratio"
    assert cli.main(["flow", "trace", "--x", "1", "-1", "--t", "0.5"]) == 0
    assert capsys.readouterr().out.startswith("t,x1,x2")
    assert cli.main(["flow", "certify", "--pairs", "3", "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "certificates.jsonl").read_text().splitlines()) == 3
    assert cli.main(["stability", "interp", "--trials", "10", "--n", "16", "--k-max", "2"]) == 0
    assert cli.main(["euler", "run", "--set", "n=64", "--set", "T=0.08", "--set", "dt=0.04",
                     "--out", str(tmp_path / "e")]) == 0
    assert (tmp_path / "e" / "vorticity.json").exists()


def test_loglipschitz_sharpness_preset_on_coarse_radii():
    m = H.run_preset(H.make_config("sharpness-loglipschitz", ["k_max=6"]))
    assert m.passed
    assert m.metrics["control_max"] <= m.metrics["lint"] * 1.05
