"""Batch runner: ``nlteleport {deterministic-sweep,probabilistic-sweep,optimize,validate}``.

Exit codes: 0 success, 1 configuration error, 2 numerical validation failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import validation
from .ancilla import AncillaSpec, build_fock
from .config import (
    ConfigError,
    config_hash,
    load_record,
    parse_config,
    write_csv,
    write_record,
)
from .experiments import (
    REFERENCE_CHI,
    DeterministicObjective,
    UnityGainPreset,
    deterministic_sweep,
    initial_xi_db,
    probabilistic_curves,
    unity_gain_chi,
)
from .fock import TruncationError
from .focksim import prepare
from .gaussian import ClusterParams
from .moments import SchemeConfig
from .optimize import optimize

log = logging.getLogger("nlteleport")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

DETERMINISTIC_COLUMNS = ["scheme", "ancilla", "s_max_db", "n", "xi_db", "z", "initial_xi_db",
                         "restarts", "seed"]
CURVE_COLUMNS = ["source", "db", "eta", "lossy", "scheme", "chi", "mode", "P", "xi", "xi_db",
                 "grid_mass", "prefix_min_step"]
CHI_COLUMNS = ["db", "eta", "lossy", "chi", "mean_xi", "reference_chi"]
LOG_COLUMNS_FIXED = ["index", "value", "status"]


class MissingParameters(ConfigError):
    pass


def _load(args, experiment: str | tuple[str, ...]) -> dict:
    if args.config is None:
        raise ConfigError("--config is required")
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    wanted = (experiment,) if isinstance(experiment, str) else experiment
    cfg = None
    for exp in wanted:
        try:
            cfg = parse_config(text, exp)
            break
        except ConfigError as exc:
            if "but the command runs" not in str(exc) or exp == wanted[-1]:
                raise
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.cutoff is not None:
        cfg["cutoff"] = args.cutoff
    return cfg


def _out(args, default: str) -> Path:
    return Path(args.out or default)


def cmd_deterministic(args) -> int:
    cfg = _load(args, "deterministic-sweep")
    rows = deterministic_sweep(cfg["schemes"], cfg["ancillas"], cfg["s_max_db"], cfg["n"],
                               restarts=cfg["restarts"], seed=cfg["seed"], workers=args.workers,
                               gaussian_ancilla=cfg["gaussian_ancilla"])
    rows.sort(key=lambda r: (r["scheme"], r["ancilla"], r["s_max_db"], r["n"]))
    write_csv(_out(args, "deterministic.csv"), rows, DETERMINISTIC_COLUMNS,
              config_hash(cfg), cfg["seed"])
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _load(args, ("optimize", "unity-gain-chi"))
    h = config_hash(cfg)
    if cfg["experiment"] == "unity-gain-chi":
        rows = []
        for db in cfg["db"]:
            for eta in cfg["eta"]:
                preset = UnityGainPreset(db=db, eta=eta, u=cfg["u"])
                chi, val = unity_gain_chi(preset, cutoff=cfg["cutoff"], n_scan=cfg["n_scan"])
                rows.append({"db": db, "eta": eta, "lossy": preset.lossy, "chi": chi,
                             "mean_xi": val, "reference_chi": REFERENCE_CHI.get((db, eta), math.nan)})
        write_csv(_out(args, "unity_gain_chi.csv"), rows, CHI_COLUMNS, h, cfg["seed"])
        return EXIT_OK

    obj = DeterministicObjective(cfg["scheme"], cfg["ancilla"], cfg["s_max_db"], cfg["n"])
    res = optimize(obj.problem(cfg["restarts"], cfg["seed"]), workers=args.workers)
    cluster, scfg, anc = obj.decode(res.x)
    z, xi = obj.evaluate(res.x)
    record = {"config_hash": h, "scheme": cfg["scheme"], "ancilla": cfg["ancilla"],
              "s_max_db": cfg["s_max_db"], "xi_db": res.fun, "z": z,
              "initial_xi_db": initial_xi_db(anc)}
    record.update({f"cluster.{k}": v for k, v in cluster.to_record().items()})
    record.update({f"scheme.{k}": v for k, v in scfg.to_record().items()})
    if anc is not None:
        record.update({f"ancilla.{k}": v for k, v in anc.to_record().items()})
    out = _out(args, f"optimum_{h}.txt")
    write_record(out, record, h, cfg["seed"])
    names = obj.names
    log_rows = [r.to_record(names) for r in res.log]
    cols = LOG_COLUMNS_FIXED + [f"start_{n}" for n in names] + [f"end_{n}" for n in names]
    write_csv(out.with_suffix(".log.csv"), log_rows, cols, h, cfg["seed"])
    return EXIT_OK


def _replay(path: str, cutoff: int):
    if not path:
        raise MissingParameters("source = stored needs 'params'; run `nlteleport optimize` first")
    p = Path(path)
    if not p.exists():
        raise MissingParameters(f"stored parameters {path!r} not found; run `nlteleport optimize` first")
    rec = load_record(p)
    pick = lambda prefix: {k[len(prefix):]: v for k, v in rec.items() if k.startswith(prefix)}  # noqa: E731
    cluster = ClusterParams.from_record(pick("cluster."))
    scfg = SchemeConfig.from_record(pick("scheme."))
    spec = AncillaSpec.from_record(pick("ancilla."))
    if scfg.scheme == "ideal-cubic":
        raise ConfigError("the ideal cubic projection has no teleportation grid to replay")
    anc_cut = 3 if spec.kind != "cubic-finite" else max(cutoff, 60)
    state = prepare(cluster, build_fock(spec, anc_cut), cutoff)
    return state, scfg, float(rec["z"]), rec.get("config_hash", "")


def cmd_probabilistic(args) -> int:
    cfg = _load(args, "probabilistic-sweep")
    p_grid = np.linspace(1.0 / cfg["p_points"], 1.0, cfg["p_points"])
    rows = []
    if cfg["source"] == "preset":
        cases = [(db, eta) for db in cfg["db"] for eta in cfg["eta"]]
        chis = cfg["chi"] or [REFERENCE_CHI.get(c, math.nan) for c in cases]
        if len(chis) != len(cases) or any(math.isnan(c) for c in chis):
            raise ConfigError("key 'chi' must list one value per (db, eta) pair")
        for (db, eta), chi in zip(cases, chis):
            preset = UnityGainPreset(db=db, eta=eta, u=cfg["u"], chi=chi)
            state = prepare(preset.cluster(), preset.ancilla(), cfg["cutoff"])
            configs = {s: preset.config(s) for s in ("canonical", "nonlinear")}
            for row in probabilistic_curves(state, configs, preset.z, p_grid, cfg["modes"]):
                rows.append({"source": "preset", "db": db, "eta": eta, "lossy": preset.lossy, **row})
    elif cfg["source"] == "stored":
        for path in [s.strip() for s in cfg["params"].split(",")] or [""]:
            state, scfg, z, h = _replay(path, cfg["cutoff"])
            for row in probabilistic_curves(state, {scfg.scheme: scfg}, z, p_grid, cfg["modes"]):
                rows.append({"source": h, "db": math.nan, "eta": 1.0, "lossy": False, **row})
    else:
        raise ConfigError(f"key 'source' must be 'preset' or 'stored', got {cfg['source']!r}")
    rows.sort(key=lambda r: (r["source"], r["db"], r["eta"], r["scheme"], r["mode"], r["P"]))
    write_csv(_out(args, "probabilistic.csv"), rows, CURVE_COLUMNS, config_hash(cfg), cfg["seed"])
    return EXIT_OK


def cmd_validate(args) -> int:
    cutoff = args.cutoff or 30
    seed = 0 if args.seed is None else args.seed
    results = validation.run_all(cutoff=cutoff, seed=seed)
    failed = False
    for check in results:
        print(check.line())
        failed |= check.counts and not check.passed
    return EXIT_NUMERIC if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlteleport", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "deterministic-sweep": cmd_deterministic,
        "probabilistic-sweep": cmd_probabilistic,
        "optimize": cmd_optimize,
        "validate": cmd_validate,
    }
    for name, fn in commands.items():
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="experiment record (key = value)")
        p.add_argument("--out", type=str, default=None, help="output file")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--workers", type=int, default=1, help="worker processes for restarts")
        p.add_argument("--cutoff", type=int, default=None, help="Fock cutoff per mode")
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(func=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TruncationError, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
