"""Command-line entry point: ``aar-tilc {simulate,montecarlo,analyze}``.

Exit codes: 0 ok, 1 certificate failed (analyze only), 2 invalid input,
3 simulation error.
"""
import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .config import load_default_document, load_document, scenario_from_dict, SECTIONS
from .convergence import certify
from .errors import AARError, ConfigError
from .sim import DEFAULT_SEED, monte_carlo, run_campaign
from .tilc import TilcGains

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_SIM = 0, 1, 2, 3

ATTEMPT_HEADER = ["run", "k", "T", "p_dr_T_x", "p_dr_T_y", "p_dr_T_z", "p_pr_T_x", "p_pr_T_y",
                  "p_pr_T_z", "radial_error", "success", "u_de_x", "u_de_y", "u_de_z",
                  "u_e_x", "u_e_y", "u_e_z"]
TRAJ_HEADER = ["run", "k", "t", "phase", "p_dr_x", "p_dr_y", "p_dr_z", "p_pr_x", "p_pr_y",
               "p_pr_z"]


def fmt(v):
    """9 significant digits; empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if not np.isfinite(v):
        return ""
    return f"{v:.9g}"


def attempt_rows(result):
    rows = []
    for a in result.attempts:
        pd = a.p_dr_T if a.p_dr_T is not None else [None] * 3
        pp = a.p_pr_T if a.p_pr_T is not None else [None] * 3
        s = a.state_after
        rows.append([result.run, a.k, None if a.timeout else a.T, *pd, *pp,
                     None if a.timeout else a.radial_error, a.success, *s.u_de, *s.u_e])
    return rows


def trajectory_rows(result):
    rows = []
    for a in result.attempts:
        if a.trajectory is None:
            continue
        for r in a.trajectory:
            rows.append([result.run, a.k, r[0], "standby" if r[7] == 0 else "approach", *r[1:7]])
    return rows


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in r])


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_attempts_csv(path):
    """Parse an attempts CSV back into dicts of floats (``None`` for blanks)."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        return [{k: (float(v) if v != "" else None) for k, v in row.items()} for row in r]


def _load(path, seed):
    doc = load_default_document() if path is None else load_document(path)
    return doc, scenario_from_dict(doc, seed)


def campaign_json(scn, result):
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "campaign",
        "seed": scn.seed,
        "tier": scn.tier,
        "R_C": scn.R_C,
        "success_rate": result.success_rate,
        "first_success": result.first_success,
        "learning_curve": [None if np.isnan(v) else float(v) for v in result.learning_curve],
        "final_state": result.final_state.to_dict(),
        "attempts": [a.summary() for a in result.attempts],
    }


def cmd_simulate(args):
    _, scn = _load(args.config, args.seed)
    result = run_campaign(scn, args.attempts)
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "campaign.json"), campaign_json(scn, result))
    write_csv(os.path.join(args.out, "attempts.csv"), ATTEMPT_HEADER, attempt_rows(result))
    write_csv(os.path.join(args.out, "trajectories.csv"), TRAJ_HEADER, trajectory_rows(result))
    print(f"{len(result.attempts)} attempts, success rate {result.success_rate:.3f}, "
          f"first success {result.first_success}")
    return EXIT_OK


def cmd_montecarlo(args):
    if args.runs < 1:
        raise ConfigError("--runs must be >= 1", "runs")
    _, scn = _load(args.config, args.seed)
    rep = monte_carlo(scn, args.runs, args.attempts, workers=args.workers, keep_logs=True)
    results = rep.pop("_results")
    rep = {"schema_version": SCHEMA_VERSION, "kind": "montecarlo", "seed": scn.seed, **rep}
    os.makedirs(args.out, exist_ok=True)
    write_json(os.path.join(args.out, "report.json"), rep)
    rows = [row for r in results for row in attempt_rows(r)]
    write_csv(os.path.join(args.out, "attempts.csv"), ATTEMPT_HEADER, rows)
    print(f"{rep['runs']} runs, steady-state success rate {rep['success_rate']:.4f} "
          f"(95% CI {rep['success_rate_ci95'][0]:.3f}-{rep['success_rate_ci95'][1]:.3f})")
    return EXIT_OK


def _raw_certificate_inputs(doc):
    """M1 and TILC gains straight from the document, without validators."""
    d = doc.get("disturbances", {})
    t = doc.get("tilc", {})
    if "M1" not in d:
        raise ConfigError("[disturbances] M1 is required for analyze", "disturbances.M1")
    try:
        M1 = np.asarray(d["M1"], dtype=float).reshape(3, 3)
        g = TilcGains(t["k_alpha"], t["k_p"])
    except KeyError as e:
        raise ConfigError(f"[tilc] missing {e.args[0]}", f"tilc.{e.args[0]}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad analyze input: {e}") from e
    return M1, g, d.get("B_pr") or 0.0, d.get("B_dr") or 0.0


def cmd_analyze(args):
    doc = load_default_document() if args.config is None else load_document(args.config)
    for sec in SECTIONS:
        if sec not in doc:
            raise ConfigError(f"missing section [{sec}]", sec)
    M1, g, B_pr, B_dr = _raw_certificate_inputs(doc)
    load_error = None
    try:
        scenario_from_dict(doc)
    except ConfigError as e:
        # gain and M1 problems are what the certificate reports; anything else is fatal
        if not (e.key or "").startswith(("tilc.k_", "disturbances.M1")):
            raise
        load_error = str(e)
    cert = certify(M1, g, B_pr, B_dr)
    out = {"schema_version": SCHEMA_VERSION, "kind": "certificate", **cert.to_dict()}
    if load_error:
        out["config_error"] = load_error
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK if cert.passed and load_error is None else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="aar-tilc",
                                description="Terminal iterative learning control for probe-drogue docking")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", nargs="?", default=None,
                        help="scenario TOML (default: the shipped default scenario)")

    s = sub.add_parser("simulate", help="run one learning campaign")
    common(s)
    s.add_argument("--seed", type=int, default=None,
                   help=f"master seed (default: the file's, else {DEFAULT_SEED})")
    s.add_argument("--attempts", type=int, default=None)
    s.add_argument("--out", default="out")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("montecarlo", help="independent campaigns and success statistics")
    common(m)
    m.add_argument("--runs", type=int, default=100)
    m.add_argument("--attempts", type=int, default=10)
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", default="out")
    m.set_defaults(func=cmd_montecarlo)

    a = sub.add_parser("analyze", help="print the convergence certificate as JSON")
    common(a)
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as e:
        key = f" (key: {e.key})" if e.key else ""
        print(f"error: {e}{key}", file=sys.stderr)
        return EXIT_INVALID
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except AARError as e:
        print(f"simulation error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
