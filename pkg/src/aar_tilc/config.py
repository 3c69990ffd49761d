"""Scenario files (TOML).

Six sections are required: ``[hose] [receiver] [autopilot] [disturbances]
[tilc] [campaign]``.  Any key not listed below is rejected, and every error
names the offending ``section.key``.
"""
from dataclasses import fields
from importlib import resources

import numpy as np
import tomli

from .disturbances import BowWaveSurrogate, DrogueOffsetMap, GustSpec, NoiseSpec
from .errors import ConfigError
from .hose import HoseParams
from .receiver import (AutopilotGains, ReceiverLinearModel, clamp_from_closure_speed,
                       default_gains, default_receiver)
from .sim import DEFAULT_SEED, Scenario
from .tilc import TilcGains, TilcState, validate_gains

SECTIONS = ("hose", "receiver", "autopilot", "disturbances", "tilc", "campaign")

RECEIVER_KEYS = {"tau", "mass", "A", "B", "G", "C"}
AUTOPILOT_KEYS = {"pole", "K_P", "K_I", "clamp", "closure_speed"}
DISTURBANCE_KEYS = {
    "tier", "bow_amplitude", "bow_sigma_r", "bow_sigma_x", "bow_c_r", "bow_c_x", "bow_center",
    "m0", "M1", "allow_general_M1", "B_dr", "B_pr", "turbulence_drogue", "turbulence_receiver",
    "corr_time", "measurement", "gust_amplitude", "gust_onset", "gust_ramp", "receiver_gust_gain",
}
TILC_KEYS = {"k_alpha", "k_p", "u_de0", "u_e0"}
CAMPAIGN_KEYS = {"R_C", "standby_offset", "observation_window", "dt", "max_attempt_duration",
                 "attempt_period", "first_attempt_time", "attempts", "seed"}
HOSE_KEYS = {f.name for f in fields(HoseParams)}

ALLOWED = {"hose": HOSE_KEYS, "receiver": RECEIVER_KEYS, "autopilot": AUTOPILOT_KEYS,
           "disturbances": DISTURBANCE_KEYS, "tilc": TILC_KEYS, "campaign": CAMPAIGN_KEYS}


def default_config_path():
    return resources.files("aar_tilc") / "scenarios" / "default.toml"


def load_document(path):
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError:
        raise
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"malformed TOML: {e}") from e


def _check_keys(doc):
    for sec in doc:
        if sec not in ALLOWED:
            raise ConfigError(f"unknown section [{sec}]", sec)
    for sec in SECTIONS:
        if sec not in doc:
            raise ConfigError(f"missing section [{sec}]", sec)
        if not isinstance(doc[sec], dict):
            raise ConfigError(f"[{sec}] must be a table", sec)
        for key in doc[sec]:
            if key not in ALLOWED[sec]:
                raise ConfigError(f"unknown key '{key}' in [{sec}]", f"{sec}.{key}")


def _wrap(sec, fn, *args, **kw):
    """Run a constructor and prefix the section onto any key it reports."""
    try:
        return fn(*args, **kw)
    except ConfigError as e:
        key = f"{sec}.{e.key}" if e.key else sec
        raise ConfigError(f"[{sec}] {e}", key) from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{sec}] {e}", sec) from e


def _arr(sec, d, key, shape=None):
    try:
        a = np.asarray(d[key], dtype=float)
        if shape is not None:
            a = a.reshape(shape)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{sec}] {key}: {e}", f"{sec}.{key}") from e
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"[{sec}] {key} must be finite", f"{sec}.{key}")
    return a


def _receiver(d):
    explicit = {"A", "B", "G", "C"} & set(d)
    if explicit:
        missing = {"A", "B", "G", "C"} - set(d)
        if missing:
            raise ConfigError(f"[receiver] explicit model needs {sorted(missing)}",
                              f"receiver.{sorted(missing)[0]}")
        return _wrap("receiver", ReceiverLinearModel, _arr("receiver", d, "A"),
                     _arr("receiver", d, "B"), _arr("receiver", d, "G"), _arr("receiver", d, "C"))
    tau = float(d.get("tau", 0.5))
    mass = float(d.get("mass", 15000.0))
    if not tau > 0:
        raise ConfigError("[receiver] tau must be > 0", "receiver.tau")
    if not mass > 0:
        raise ConfigError("[receiver] mass must be > 0", "receiver.mass")
    return default_receiver(tau, mass)


def _autopilot(d, tau):
    v = float(d.get("closure_speed", 0.75))
    if "K_P" in d or "K_I" in d:
        if not ("K_P" in d and "K_I" in d):
            raise ConfigError("[autopilot] K_P and K_I must be given together", "autopilot.K_P")
        K_I = _arr("autopilot", d, "K_I")
        clamp = _arr("autopilot", d, "clamp") if "clamp" in d else \
            _wrap("autopilot", clamp_from_closure_speed, K_I, v)
        return _wrap("autopilot", AutopilotGains, _arr("autopilot", d, "K_P"), K_I, clamp, v)
    pole = float(d.get("pole", 1.0))
    if not pole > 0:
        raise ConfigError("[autopilot] pole must be > 0", "autopilot.pole")
    g = _wrap("autopilot", default_gains, tau, pole, v)
    if "clamp" in d:
        g = _wrap("autopilot", AutopilotGains, g.K_P, g.K_I, _arr("autopilot", d, "clamp"), v)
    return g


def _disturbances(d):
    sec = "disturbances"
    bow = None
    if "bow_amplitude" in d:
        center = _arr(sec, d, "bow_center", 3) if "bow_center" in d else (0.0, 0.0, 0.0)
        bow = _wrap(sec, BowWaveSurrogate, float(d["bow_amplitude"]),
                    float(d.get("bow_sigma_r", 3.0)), float(d.get("bow_sigma_x", 1.5)),
                    float(d.get("bow_c_r", -1.0)), float(d.get("bow_c_x", 0.0)), tuple(center))
    omap = None
    if "M1" in d or "m0" in d:
        m0 = _arr(sec, d, "m0", 3) if "m0" in d else np.zeros(3)
        if "M1" not in d:
            raise ConfigError("[disturbances] m0 given without M1", f"{sec}.M1")
        omap = _wrap(sec, DrogueOffsetMap, m0, _arr(sec, d, "M1", (3, 3)),
                     bool(d.get("allow_general_M1", False)))
    gust = _wrap(sec, GustSpec, tuple(_arr(sec, d, "gust_amplitude", 3))
                 if "gust_amplitude" in d else (0.0, 0.0, 0.0),
                 float(d.get("gust_onset", 0.0)), float(d.get("gust_ramp", 2.0)))
    noise = _wrap(sec, NoiseSpec, d.get("B_dr"), d.get("B_pr"),
                  float(d.get("turbulence_drogue", 0.0)), float(d.get("turbulence_receiver", 0.0)),
                  float(d.get("corr_time", 1.0)), float(d.get("measurement", 0.0)), gust)
    return bow, omap, noise


def _tilc(d):
    sec = "tilc"
    for key in ("k_alpha", "k_p"):
        if key not in d:
            raise ConfigError(f"[tilc] missing {key}", f"{sec}.{key}")
    g = _wrap(sec, TilcGains, _arr(sec, d, "k_alpha"), _arr(sec, d, "k_p"))
    bad = validate_gains(g)
    if bad:
        key = "k_alpha" if bad[0].startswith("k_alpha") else "k_p"
        raise ConfigError("[tilc] gains outside 0 <= k_alpha < 1, 0 < k_p <= 1: " + "; ".join(bad),
                          f"{sec}.{key}")
    u_de = _arr(sec, d, "u_de0", 3) if "u_de0" in d else np.zeros(3)
    u_e = _arr(sec, d, "u_e0", 3) if "u_e0" in d else np.zeros(3)
    return g, TilcState(u_de, u_e, 0)


def scenario_from_dict(doc, seed=None):
    _check_keys(doc)
    hose = _wrap("hose", HoseParams, **doc["hose"])
    receiver = _receiver(doc["receiver"])
    tau = float(doc["receiver"].get("tau", 0.5))
    autopilot = _autopilot(doc["autopilot"], tau)
    bow, omap, noise = _disturbances(doc["disturbances"])
    gains, warm = _tilc(doc["tilc"])
    camp = dict(doc["campaign"])
    if seed is not None:
        camp["seed"] = int(seed)
    camp.setdefault("seed", DEFAULT_SEED)
    dist = doc["disturbances"]
    try:
        return Scenario(hose=hose, receiver=receiver, autopilot=autopilot,
                        tier=str(dist.get("tier", "physical")), bow=bow, offset_map=omap,
                        noise=noise, receiver_gust_gain=float(dist.get("receiver_gust_gain", 0.0)),
                        tilc=gains, warm_start=warm, **camp)
    except ConfigError as e:
        sec = _SCENARIO_KEY_SECTION.get(e.key, "campaign")
        raise ConfigError(f"[{sec}] {e}", f"{sec}.{e.key}" if e.key else sec) from e
    except TypeError as e:
        raise ConfigError(f"[campaign] {e}", "campaign") from e


_SCENARIO_KEY_SECTION = {"tier": "disturbances", "receiver_gust_gain": "disturbances",
                         "M1": "disturbances", "C_r": "receiver", "k_alpha": "tilc", "k_p": "tilc"}


def load_scenario(path=None, seed=None):
    """Parse and validate a scenario file (the shipped default if ``path`` is None)."""
    if path is None:
        with default_config_path().open("rb") as fh:
            doc = tomli.load(fh)
    else:
        doc = load_document(path)
    return scenario_from_dict(doc, seed)


def load_default_document():
    with default_config_path().open("rb") as fh:
        return tomli.load(fh)
