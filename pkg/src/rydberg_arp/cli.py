"""Command-line front end.

Every subcommand reads an optional JSON config (validated against
``data/config.schema.json``), applies command-line overrides, and writes
CSV/JSON files into the output directory. Each file carries a metadata
header with the config hash, the channel-catalog hash and the package
version; nothing time-dependent or path-dependent is written, so equal
configs give equal files wherever they are written.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import re
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from ._ode import StepSizeUnderflow
from .forster import CatalogMismatch, build_catalog, catalog_path, catalog_sha256, load_tables
from .gates import (
    BELL_STATES,
    DEFAULT_T2_CORRECTION,
    QubitRegister,
    bell_fidelities,
    calibrate_t2,
    cnot_sequence,
    cz_sequence,
    distance_sweep,
    fidelity_spread,
    forster_passage,
    timing_sweep,
    truth_table,
)
from .pulses import SHAPES, PassageParams, double_passage
from .stark import TWO_PI, DetuningProfile, NoResonance, OutOfRange, pair_detuning, resonance_field

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

DEFAULTS = {
    "out_dir": "out",
    "gaussian": {"omega0_mhz": 2.0, "width_us": 0.12, "s1_mhz": -10.0},
    "rectangular": {"omega0_mhz": 2.1, "s1_mhz": -10.0, "s2_mhz": -2600.0},
    "shapes": list(SHAPES),
    "sign_flip": False,
    "profile": {"s1_mhz": -10.0, "s2_mhz": -2600.0, "t1_us": 0.45, "t2_us": 1.35, "half_width_us": 0.45},
    "R_um": 25.0,
    "decay": True,
    "t2_correction_us": DEFAULT_T2_CORRECTION,
    "phase_correction": True,
    "coupling_floor": 100.0,
    "state": "all",
    "sweep": {"param": "R", "values": [24.0, 24.85, 25.0, 25.15, 26.0], "delta": "100ps"},
    "stark_map": {"e_max_v_per_cm": 0.06, "points": 601},
    "workers": 1,
    "rtol": 1e-11,
    "atol": 1e-13,
    "dt_us": 1e-3,
}


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


def _schema() -> dict:
    return json.loads((resources.files("rydberg_arp") / "data" / "config.schema.json").read_text())


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(base[k], v) if isinstance(v, dict) and isinstance(base.get(k), dict) else v
    return out


def load_config(path: str | None) -> dict:
    """Defaults overlaid with the validated contents of ``path``."""
    import jsonschema

    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    return _merge(DEFAULTS, raw)


_DELTA_UNITS = {"ps": 1e-6, "ns": 1e-3, "us": 1.0, "μs": 1.0}


def parse_delta(value) -> float:
    """Time offset in μs from a number (μs) or a string like ``"100ps"``."""
    if isinstance(value, (int, float)):
        return float(value)
    m = re.fullmatch(r"\s*([-+]?[0-9.]+(?:e[-+]?\d+)?)\s*(ps|ns|us|μs)?\s*", str(value))
    if m is None:
        raise ConfigError(f"cannot parse time offset {value!r}")
    return float(m.group(1)) * _DELTA_UNITS[m.group(2) or "us"]


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = json.loads(json.dumps(cfg))
    if getattr(args, "out", None):
        cfg["out_dir"] = args.out
    if getattr(args, "distance", None) is not None:
        cfg["R_um"] = args.distance
    if getattr(args, "sign_flip", False):
        cfg["sign_flip"] = True
    if getattr(args, "no_correction", False):
        cfg["t2_correction_us"] = 0.0
        cfg["phase_correction"] = False
    if getattr(args, "no_decay", False):
        cfg["decay"] = False
    if getattr(args, "state", None):
        cfg["state"] = args.state
    if getattr(args, "param", None):
        cfg["sweep"]["param"] = args.param
    if getattr(args, "values", None):
        cfg["sweep"]["values"] = list(args.values)
    if getattr(args, "delta", None) is not None:
        cfg["sweep"]["delta"] = args.delta
    if getattr(args, "workers", None):
        cfg["workers"] = args.workers
    if cfg["R_um"] <= 0:
        raise ConfigError("R must be positive")
    import jsonschema

    try:
        jsonschema.validate(cfg, _schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid override: {exc.message}") from None
    return cfg


class Writer:
    """Writes outputs with a provenance header into one directory."""

    def __init__(self, cfg: dict, command: str):
        self.dir = Path(cfg["out_dir"])
        self.dir.mkdir(parents=True, exist_ok=True)
        cat = cfg.get("catalog") or catalog_path()
        # the output location is not part of the scenario
        scenario = {k: v for k, v in cfg.items() if k != "out_dir"}
        self.meta = {
            "tool": "rydberg-arp",
            "version": __version__,
            "command": command,
            "config_sha256": hashlib.sha256(json.dumps(scenario, sort_keys=True).encode()).hexdigest(),
            "catalog_sha256": catalog_sha256(cat),
        }
        self.written: list[Path] = []

    def csv(self, name: str, header, rows) -> Path:
        path = self.dir / name
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(self.meta, sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(np.asarray(rows).tolist() if isinstance(rows, np.ndarray) else rows)
        self.written.append(path)
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = self.dir / name
        with open(path, "w") as fh:
            json.dump({"metadata": self.meta, **payload}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.written.append(path)
        return path


def _channels(cfg):
    return build_catalog(cfg.get("catalog"), coupling_floor=cfg["coupling_floor"])


def _profile(cfg) -> DetuningProfile:
    p = cfg["profile"]
    return DetuningProfile.from_mhz(p["s1_mhz"], p["s2_mhz"], (p["t1_us"], p["t2_us"]), p["half_width_us"])


def _t2_correction(cfg, channels, profile) -> tuple[float, dict]:
    val = cfg["t2_correction_us"]
    if val == "calibrate":
        cal = calibrate_t2(cfg["R_um"], profile=profile, channels=channels)
        return cal.t2_correction, {"calibrated": True, "calibration_phase_rad": cal.phase,
                                   "calibration_population": cal.population}
    return float(val), {"calibrated": False}


def cmd_two_level(cfg) -> dict:
    out = Writer(cfg, "two-level")
    p = cfg["profile"]
    flips = [False, True] if cfg["sign_flip"] == "both" else [bool(cfg["sign_flip"])]
    results = []
    for shape in cfg["shapes"]:
        if shape == "gaussian_linear_chirp":
            g = cfg["gaussian"]
            params = PassageParams.from_mhz(g["omega0_mhz"], g["s1_mhz"], p["t1_us"], p["t2_us"],
                                            width=g["width_us"])
        else:
            r = cfg["rectangular"]
            params = PassageParams.from_mhz(r["omega0_mhz"], r["s1_mhz"], p["t1_us"], p["t2_us"],
                                            s2_mhz=r["s2_mhz"])
        for flip in flips:
            res = double_passage(shape, params, flip, rtol=cfg["rtol"], atol=cfg["atol"], dt=cfg["dt_us"])
            tr = res.trajectory
            c = tr.amplitudes
            rows = np.column_stack([tr.times, c[:, 0].real, c[:, 0].imag, c[:, 1].real, c[:, 1].imag,
                                    tr.pop1, tr.phase1])
            out.csv(f"two_level_{shape}{'_flip' if flip else ''}.csv",
                    ["t_us", "re_c1", "im_c1", "re_c2", "im_c2", "pop1", "phase1_rad"], rows)
            results.append(res.summary())
            print(f"{shape:24s} sign_flip={flip!s:5s} population_error={res.population_error:.3e} "
                  f"phase={res.phase:.6f} rad")
    out.json("two_level_summary.json", {"runs": results})
    return {"runs": results}


def cmd_forster(cfg) -> dict:
    out = Writer(cfg, "forster")
    channels = _channels(cfg)
    profile = _profile(cfg)
    t2c, info = _t2_correction(cfg, channels, profile)
    run = forster_passage(cfg["R_um"], profile=profile, t2_correction=t2c, channels=channels,
                          dt=cfg["dt_us"], rtol=cfg["rtol"], atol=cfg["atol"])
    labels = [ch.label for ch in channels]
    out.csv("forster_field.csv", ["t_us", "E_V_per_cm", *[f"delta_{x}_MHz" for x in labels]], run.field_table())
    from .dynamics import observables

    obs = observables(run.trajectory, 0)
    out.csv("forster_populations.csv", ["t_us", "pop_SS", *[f"pop_{x}" for x in labels]],
            np.column_stack([obs.times, obs.populations]))
    out.csv("forster_phase.csv", ["t_us", "phase_SS_rad"], np.column_stack([obs.times, obs.phase]))
    summary = {"R_um": cfg["R_um"], "t2_correction_us": t2c, **info, "population_SS": run.population,
               "phase_SS_rad": run.phase, "phase_offset_from_pi_rad": run.phase - math.pi}
    out.json("forster_summary.json", summary)
    print(f"R={cfg['R_um']} um  t2 correction={t2c * 1e3:+.4f} ns  |c_SS|^2={run.population:.6f}  "
          f"phase={run.phase:.6f} rad  (offset from pi {run.phase - math.pi:+.4f})")
    return summary


def _register(cfg, channels):
    return QubitRegister.default(cfg["R_um"], channels)


def cmd_gate(cfg) -> dict:
    out = Writer(cfg, "gate")
    channels = _channels(cfg)
    profile = _profile(cfg)
    t2c, info = _t2_correction(cfg, channels, profile)
    reg = _register(cfg, channels)
    kw = dict(register=reg, profile=profile, t2_correction=t2c, correct_phase=cfg["phase_correction"])
    cnot = truth_table(cnot_sequence(**kw), decay=cfg["decay"], register=reg)
    cz = truth_table(cz_sequence(**kw), decay=cfg["decay"], register=reg)
    out.csv("cnot_truth_table.csv", ["input", "p00", "p01", "p10", "p11"],
            [[lab, *row] for lab, row in zip(("00", "01", "10", "11"), cnot.truth_table.tolist())])
    payload = {"R_um": cfg["R_um"], "decay": cfg["decay"], "t2_correction_us": t2c, **info,
               "cnot": cnot.to_dict(), "cz": cz.to_dict()}
    out.json("gate.json", payload)
    print(f"CNOT truth-table overlap at R={cfg['R_um']} um: {cnot.overlap:.5f}")
    print(f"CZ phase of |11>: {cz.phases['11']:+.5f} rad")
    return payload


def cmd_bell(cfg) -> dict:
    out = Writer(cfg, "bell")
    channels = _channels(cfg)
    profile = _profile(cfg)
    t2c, info = _t2_correction(cfg, channels, profile)
    reg = _register(cfg, channels)
    results = bell_fidelities(reg, decay=cfg["decay"], t2_correction=t2c, profile=profile)
    wanted = list(BELL_STATES) if cfg["state"] == "all" else [cfg["state"]]
    payload = {"R_um": cfg["R_um"], "decay": cfg["decay"], "t2_correction_us": t2c, **info,
               "states": {w: results[w].to_dict() for w in wanted}}
    out.json("bell.json", payload)
    for w in wanted:
        r = results[w]
        print(f"{w:10s} fidelity={r.fidelity:.5f}  reconstructed={r.fidelity_reconstructed:.5f}")
    return payload


def cmd_sweep(cfg) -> dict:
    out = Writer(cfg, "sweep")
    channels = _channels(cfg)
    profile = _profile(cfg)
    t2c, info = _t2_correction(cfg, channels, profile)
    sw = cfg["sweep"]
    if sw["param"] == "R":
        rows = distance_sweep(sw["values"], t2_correction=t2c, decay=cfg["decay"], channels=channels,
                              profile=profile, workers=cfg["workers"])
        key = "R_um"
    else:
        d = parse_delta(sw["delta"])
        rows = timing_sweep([-d, 0.0, d], cfg["R_um"], t2_correction=t2c, decay=cfg["decay"],
                            channels=channels, profile=profile, workers=cfg["workers"])
        key = "t2_correction_us"
    out.csv("sweep.csv", ["R_um", "t2_correction_us", "overlap", *[f"F_{w}" for w in BELL_STATES], "phase_11_rad"],
            [[r.R, r.t2_correction, r.overlap, *[r.bell[w] for w in BELL_STATES], r.phase_11] for r in rows])
    payload = {"param": sw["param"], "base_t2_correction_us": t2c, **info,
               "rows": [r.to_dict() for r in rows]}
    if sw["param"] == "R" and any(abs(r.R - 25.0) <= 0.15 for r in rows):
        payload["spread_overlap_25pm0.15"] = fidelity_spread(rows)
    out.json("sweep.json", payload)
    for r in rows:
        val = r.R if key == "R_um" else (r.t2_correction - t2c) * 1e6
        unit = "um" if key == "R_um" else "ps"
        print(f"{sw['param']}={val:+9.3f} {unit}  overlap={r.overlap:.5f}  min Bell F={r.min_bell:.5f}")
    return payload


def cmd_stark_map(cfg) -> dict:
    out = Writer(cfg, "stark-map")
    channels = _channels(cfg)
    sm = cfg["stark_map"]
    E = np.linspace(0.0, sm["e_max_v_per_cm"], sm["points"])
    cols = [pair_detuning(ch, E) / TWO_PI for ch in channels]
    out.csv("stark_map.csv", ["E_V_per_cm", *[f"delta_{ch.label}_MHz" for ch in channels]],
            np.column_stack([E, *cols]))
    res = {}
    for ch in channels:
        try:
            res[ch.label] = resonance_field(ch) * 1e3
        except NoResonance:
            res[ch.label] = None
    tables = load_tables(cfg.get("catalog"))
    out.json("stark_map.json", {"resonance_field_mV_per_cm": res, "catalog_version": tables.version})
    for lab, e in res.items():
        print(f"{lab}: resonance at {e:.4f} mV/cm" if e is not None else f"{lab}: no resonance")
    return res


COMMANDS = {
    "two-level": cmd_two_level,
    "forster": cmd_forster,
    "gate": cmd_gate,
    "bell": cmd_bell,
    "sweep": cmd_sweep,
    "stark-map": cmd_stark_map,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rydberg-arp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON scenario file")
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--distance", "--R", dest="distance", type=float, help="atom separation, um")
        p.add_argument("--sign-flip", action="store_true", help="flip the Rabi frequency of the second pulse")
        p.add_argument("--no-correction", action="store_true",
                       help="no t2 correction and no laser phase compensation")
        p.add_argument("--no-decay", action="store_true", help="switch Rydberg decay off")
        p.add_argument("--state", choices=[*BELL_STATES, "all"])
        p.add_argument("--param", choices=["R", "t2"])
        p.add_argument("--values", type=float, nargs="+", help="R values for an R sweep, um")
        p.add_argument("--delta", help="t2 offset for a t2 sweep, e.g. 100ps")
        p.add_argument("--workers", type=int)
    return ap


def main(argv=None) -> int:
    import jsonschema

    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if cfg["sweep"]["param"] == "t2":
            parse_delta(cfg["sweep"]["delta"])
        COMMANDS[args.command](cfg)
    except (ConfigError, CatalogMismatch, FileNotFoundError, jsonschema.ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepSizeUnderflow, NoResonance, OutOfRange, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
