import numpy as np
import pytest

from aar_tilc.config import (SECTIONS, load_default_document, load_scenario, scenario_from_dict)
from aar_tilc.errors import ConfigError
from aar_tilc.sim import DEFAULT_SEED


def doc():
    return load_default_document()


def test_default_loads():
    scn = load_scenario()
    assert scn.seed == DEFAULT_SEED and scn.tier == "physical"
    np.testing.assert_array_equal(scn.tilc.k_alpha, [0.3] * 3)
    assert scn.autopilot.closure_speed == 0.75
    assert scn.R_C == 0.15 and scn.dt == 1e-3


def test_seed_override():
    assert load_scenario(seed=5).seed == 5


def test_unknown_key_named():
    d = doc()
    d["tilc"]["k_beta"] = 0.1
    with pytest.raises(ConfigError) as e:
        scenario_from_dict(d)
    assert e.value.key == "tilc.k_beta"


def test_unknown_section():
    d = doc()
    d["extra"] = {}
    with pytest.raises(ConfigError) as e:
        scenario_from_dict(d)
    assert e.value.key == "extra"


@pytest.mark.parametrize("sec", SECTIONS)
def test_missing_section(sec):
    d = doc()
    del d[sec]
    with pytest.raises(ConfigError) as e:
        scenario_from_dict(d)
    assert e.value.key == sec


@pytest.mark.parametrize("key,value", [("k_alpha", [1.0, 0.3, 0.3]), ("k_p", [0.8, 0.0, 0.8]),
                                       ("k_p", 1.5)])
def test_bad_gains_name_key(key, value):
    d = doc()
    d["tilc"][key] = value
    with pytest.raises(ConfigError) as e:
        scenario_from_dict(d)
    assert e.value.key == f"tilc.{key}"


def test_positive_M1_rejected():
    d = doc()
    d["disturbances"]["M1"] = [[0.2, 0, 0], [0, -0.4, 0], [0, 0, -0.2]]
    with pytest.raises(ConfigError) as e:
        scenario_from_dict(d)
    assert e.value.key.startswith("disturbances.M1")


def test_campaign_value_errors():
    d = doc()
    d["campaign"]["dt"] = 0.1
    with pytest.raises(ConfigError) as e:
        scenario_from_dict(d)
    assert e.value.key == "campaign.dt"


def test_closure_speed_out_of_range():
    d = doc()
    d["autopilot"]["closure_speed"] = 1.5
    with pytest.raises(ConfigError) as e:
        scenario_from_dict(d)
    assert e.value.key.startswith("autopilot")


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[hose\nx=")
    with pytest.raises(ConfigError):
        load_scenario(p)


def test_round_trip_file(tmp_path):
    from aar_tilc.config import default_config_path
    p = tmp_path / "copy.toml"
    p.write_bytes(default_config_path().read_bytes())
    a, b = load_scenario(p), load_scenario()
    assert a.R_C == b.R_C and np.array_equal(a.offset_map.M1, b.offset_map.M1)


def test_warm_start_from_file():
    d = doc()
    d["tilc"]["u_de0"] = [0.0, 0.4, -0.2]
    scn = scenario_from_dict(d)
    np.testing.assert_array_equal(scn.warm_start.u_de, [0.0, 0.4, -0.2])
