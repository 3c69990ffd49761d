import json

import pytest

from aar_tilc.cli import main, read_attempts_csv
from aar_tilc.config import default_config_path


@pytest.fixture
def default_toml(tmp_path):
    p = tmp_path / "default.toml"
    p.write_bytes(default_config_path().read_bytes())
    return p


def edit(path, old, new):
    s = path.read_text()
    assert old in s
    path.write_text(s.replace(old, new))
    return path


def test_simulate_writes_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--attempts", "2", "--out", str(out)]) == 0
    for name in ("campaign.json", "attempts.csv", "trajectories.csv"):
        assert (out / name).stat().st_size > 0
    rep = json.loads((out / "campaign.json").read_text())
    assert rep["schema_version"] == 1 and len(rep["attempts"]) == 2
    rows = read_attempts_csv(out / "attempts.csv")
    assert [r["k"] for r in rows] == [1, 2]


def test_same_seed_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["simulate", "--attempts", "2", "--seed", "11", "--out", str(d)]) == 0
    for name in ("campaign.json", "attempts.csv", "trajectories.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_csv_round_trip(tmp_path):
    out = tmp_path / "o"
    main(["simulate", "--attempts", "2", "--out", str(out)])
    rep = json.loads((out / "campaign.json").read_text())
    rows = read_attempts_csv(out / "attempts.csv")
    for att, row in zip(rep["attempts"], rows):
        assert row["radial_error"] == pytest.approx(att["radial_error"], rel=5e-9)
        assert row["T"] == pytest.approx(att["T"], rel=5e-9)
        for i, ax in enumerate("xyz"):
            assert row[f"u_de_{ax}"] == pytest.approx(att["state_after"]["u_de"][i],
                                                      rel=5e-9, abs=1e-12)


def test_montecarlo_single_run_matches_simulate(tmp_path):
    assert main(["montecarlo", "--runs", "1", "--attempts", "2", "--out", str(tmp_path / "m")]) == 0
    assert main(["simulate", "--attempts", "2", "--out", str(tmp_path / "s")]) == 0
    rep = json.loads((tmp_path / "m" / "report.json").read_text())
    sim = json.loads((tmp_path / "s" / "campaign.json").read_text())
    assert rep["per_run"][0]["radial_errors"] == sim["learning_curve"]
    assert (tmp_path / "m" / "attempts.csv").read_bytes() == (tmp_path / "s" / "attempts.csv").read_bytes()


def test_analyze_default_passes(capsys):
    assert main(["analyze"]) == 0
    cert = json.loads(capsys.readouterr().out)
    assert cert["passed"] and cert["spectral_radius"] < 1


def test_analyze_bad_gains_fails(default_toml, capsys):
    edit(default_toml, "k_alpha = [0.3, 0.3, 0.3]", "k_alpha = [1.0, 0.3, 0.3]")
    assert main(["analyze", str(default_toml)]) == 1
    cert = json.loads(capsys.readouterr().out)
    assert not cert["passed"] and cert["gain_violations"]


def test_invalid_config_exit_2(default_toml, capsys):
    edit(default_toml, "[tilc]", "[tilc]\nbogus = 1")
    assert main(["simulate", str(default_toml), "--out", "unused"]) == 2
    assert "tilc.bogus" in capsys.readouterr().err


def test_missing_file_and_bad_args(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.toml")]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["montecarlo", "--runs", "0", "--out", str(tmp_path)]) == 2


def test_simulation_error_exit_3(default_toml, tmp_path, monkeypatch):
    import aar_tilc.cli as cli
    from aar_tilc.errors import NumericalDivergence

    def boom(*a, **k):
        raise NumericalDivergence("state blew up")
    monkeypatch.setattr(cli, "run_campaign", boom)
    assert main(["simulate", "--out", str(tmp_path)]) == 3
