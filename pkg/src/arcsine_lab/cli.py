"""Command-line interface: ``arcsine-lab <subcommand> [--config FILE] [--seed U64] [--threads N] [--out DIR]``.

Subcommands
-----------
sample-gas   draw from the generalized arcsine law
simulate     run an occupation-time ensemble
wandering    tabulate exact wandering rates of the chain
fit          recover (alpha, beta) from a CSV of ratios
verify NAME  run a pinned verification experiment

A JSON config file may supply any option (using the long flag name with
``_`` for ``-``); flags given on the command line win.  Unknown keys are
rejected.  Every run writes CSV output and a ``manifest.json`` echoing the
resolved config, seed and package version.

Exit codes: 0 success or pass, 1 statistical failure, 2 usage or config
error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import maps
from ._version import __version__
from .chain import MAX_HORIZON, ChainModel, exact_survival
from .engine import EnsembleSpec, junction_fraction_profile, run_ensemble
from .exceptions import ArcsineLabError, ParameterError, SizeError
from .experiments import EXPERIMENTS, SEEDS
from .gas import GasParams, sample_gas
from .gof import _jsonable
from .inference import fit_gas
from .measures import InitialMeasure

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("arcsine_lab")


class ConfigError(ValueError):
    """Invalid command-line or config-file input."""


COMMON_KEYS = ("seed", "threads", "out")
KIND_KEYS = {
    "sample-gas": ("alpha", "beta", "n_samples"),
    "simulate": ("model", "measure", "checkpoints", "n_traj"),
    "wandering": ("p", "horizon"),
    "fit": ("input", "renormalize", "merge"),
    "verify": ("name",),
}
DEFAULTS = {
    "seed": 0, "threads": 1, "out": ".",
    "alpha": 0.5, "beta": "0.5,0.5", "n_samples": 10_000,
    "model": {"kind": "boole"}, "measure": None, "checkpoints": [1000, 10_000, 100_000],
    "n_traj": 1000,
    "p": "0.5,0.5", "horizon": 10_000,
    "renormalize": True, "merge": None,
}
MODEL_KEYS = {"boole": ("kind",), "cubic3": ("kind", "eps", "c"), "chain": ("kind", "p")}


@dataclass
class ExperimentConfig:
    """Resolved settings of one command; ``values`` holds the validated options."""

    experiment: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def echo(self) -> dict:
        return _jsonable(dict(self.values, experiment=self.experiment))


def _floats(value, what):
    if isinstance(value, str):
        parts = [v for v in value.replace(" ", "").split(",") if v]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = [value]
    try:
        return tuple(float(v) for v in parts)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a comma-separated list of numbers, got {value!r}") from exc


def _int(value, what, lo=None):
    try:
        out = int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be an integer, got {value!r}") from exc
    if out != float(value):
        raise ConfigError(f"{what} must be an integer, got {value!r}")
    if lo is not None and out < lo:
        raise ConfigError(f"{what} must be >= {lo}, got {out}")
    return out


def _parse_model(spec):
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("model must be a name or an object with a 'kind' key")
    kind = spec["kind"]
    if kind not in MODEL_KEYS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {sorted(MODEL_KEYS)}")
    extra = set(spec) - set(MODEL_KEYS[kind])
    if extra:
        raise ConfigError(f"unknown keys for model {kind!r}: {sorted(extra)}")
    if kind == "boole":
        return maps.boole()
    if kind == "cubic3":
        c = _floats(spec.get("c", (18.0, 72.0, 18.0)), "model.c")
        return maps.cubic3(float(spec.get("eps", 0.05)), c)
    if "p" not in spec:
        raise ConfigError("chain model needs 'p'")
    return ChainModel(_floats(spec["p"], "model.p"))


def _model_echo(model) -> dict:
    if isinstance(model, ChainModel):
        return {"kind": "chain", "p": list(model.p)}
    if model.kind == maps.BOOLE:
        return {"kind": "boole"}
    return {"kind": "cubic3", "eps": model.ray_epsilon, "c": list(model.branch_constants)}


def _parse_merge(text):
    if text is None:
        return None
    if isinstance(text, list):
        return [[int(g) for g in grp] for grp in text]
    try:
        return [[int(g) for g in grp.split(",")] for grp in text.split(";")]
    except ValueError as exc:
        raise ConfigError(f"merge must look like '1;2,3;4', got {text!r}") from exc


def resolve_config(experiment, file_values: dict, flag_values: dict) -> ExperimentConfig:
    """Merge defaults, config-file values and flags, then validate everything.

    All model, measure and parameter objects are constructed here, so an
    invalid setting fails before any computation starts.
    """
    allowed = set(COMMON_KEYS) | set(KIND_KEYS[experiment])
    unknown = set(file_values) - allowed - {"experiment"}
    if unknown:
        raise ConfigError(f"unknown config keys for {experiment}: {sorted(unknown)}")
    if "experiment" in file_values and file_values["experiment"].split(":")[0] != experiment:
        raise ConfigError(f"config is for {file_values['experiment']!r}, not {experiment!r}")
    v = {k: DEFAULTS.get(k) for k in allowed}
    v.update(file_values)
    v.update({k: val for k, val in flag_values.items() if val is not None and k in allowed})

    seed = _int(v["seed"], "seed", 0)
    if seed >= 2 ** 64:
        raise ConfigError("seed must fit in 64 bits")
    v["seed"] = seed
    v["threads"] = _int(v["threads"], "threads", 1)
    v["out"] = str(v["out"])

    try:
        if experiment == "sample-gas":
            v["params"] = GasParams(float(v["alpha"]), _floats(v["beta"], "beta"))
            v["alpha"], v["beta"] = v["params"].alpha, list(v["params"].beta)
            v["n_samples"] = _int(v["n_samples"], "n_samples", 1)
        elif experiment == "simulate":
            model = _parse_model(v["model"])
            measure = v["measure"] or ("origin" if isinstance(model, ChainModel) else
                                       "uniform_boole" if model.kind == maps.BOOLE else "uniform01")
            chk = v["checkpoints"]
            chk = [_int(c, "checkpoint", 1) for c in (_floats(chk, "checkpoints"))]
            v["spec"] = EnsembleSpec(model, InitialMeasure.parse(measure), tuple(chk),
                                     _int(v["n_traj"], "n_traj", 1), seed)
            v["model"] = _model_echo(model)
            v["measure"], v["checkpoints"] = v["spec"].measure.id, chk
            v["n_traj"] = v["spec"].n_traj
        elif experiment == "wandering":
            v["chain"] = ChainModel(_floats(v["p"], "p"))
            v["p"] = list(v["chain"].p)
            v["horizon"] = _int(v["horizon"], "horizon", 1)
            if v["horizon"] > MAX_HORIZON:
                raise ConfigError(f"horizon {v['horizon']} exceeds the memory budget ({MAX_HORIZON})")
        elif experiment == "fit":
            if not v.get("input"):
                raise ConfigError("fit needs --input")
            v["merge"] = _parse_merge(v["merge"])
            if isinstance(v["renormalize"], str):
                v["renormalize"] = v["renormalize"].lower() in ("1", "true", "yes")
        elif experiment == "verify":
            if v.get("name") not in EXPERIMENTS:
                raise ConfigError(f"unknown experiment {v.get('name')!r}; "
                                  f"choose from {sorted(EXPERIMENTS)}")
    except (ParameterError, SizeError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(experiment, v)


def _manifest(cfg: ExperimentConfig, extra=None) -> dict:
    echo = {k: val for k, val in cfg.echo().items() if k not in ("params", "spec", "chain")}
    out = {"config": echo, "seed": cfg["seed"], "version": __version__,
           "command": cfg.experiment}
    if extra:
        out.update(extra)
    return _jsonable(out)


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(path, rows):
    if not rows:
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        for r in rows:
            wr.writerow({k: repr(float(val)) if isinstance(val, float) else val
                         for k, val in r.items()})


def cmd_sample_gas(cfg: ExperimentConfig) -> int:
    params = cfg["params"]
    X = sample_gas(params, np.random.default_rng(cfg["seed"]), cfg["n_samples"])
    path = os.path.join(cfg["out"], "samples.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow([f"zeta_{i}" for i in range(1, params.d + 1)])
        wr.writerows([[repr(float(v)) for v in row] for row in X])
    mean = X.mean(axis=0)
    gap = np.abs(mean - params.as_array())
    _write_json(os.path.join(cfg["out"], "manifest.json"),
                _manifest(cfg, {"sample_mean": mean, "abs_mean_minus_beta": gap}))
    print("sample mean:", " ".join(f"{m:.6f}" for m in mean))
    print("|mean - beta|:", " ".join(f"{g:.6f}" for g in gap))
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig) -> int:
    spec = cfg["spec"]
    law = run_ensemble(spec, workers=cfg["threads"])
    law.to_csv(os.path.join(cfg["out"], "occupation.csv"))
    _write_rows(os.path.join(cfg["out"], "junction_profile.csv"), junction_fraction_profile(law))
    _write_json(os.path.join(cfg["out"], "manifest.json"),
                _manifest(cfg, {"ensemble": spec.describe(), "ray_names": list(law.ray_names),
                                "diagnostics": law.diagnostics}))
    print(f"simulated {spec.n_traj} trajectories to n={spec.checkpoints[-1]}; "
          f"rays: {', '.join(law.ray_names)}")
    return EXIT_OK


def cmd_wandering(cfg: ExperimentConfig) -> int:
    table = exact_survival(cfg["chain"], cfg["horizon"])
    table.to_csv(os.path.join(cfg["out"], "wandering.csv"))
    _write_json(os.path.join(cfg["out"], "manifest.json"),
                _manifest(cfg, {"lemma_tail": table.lemma_tail()}))
    print(f"wandering table to N={cfg['horizon']}; w(N) = {table.total_wandering[-1]:.6g}")
    return EXIT_OK


def _read_ratios(path):
    """Ratio matrix from ``samples.csv`` (``zeta_*``) or ``occupation.csv`` (last checkpoint)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path} has no data rows")
    head = list(rows[0])
    cols = [c for c in head if c.startswith(("zeta_", "ratio_"))]
    if not cols:
        raise ConfigError(f"{path} has no zeta_* or ratio_* columns")
    if "n" in head:
        last = max(int(r["n"]) for r in rows)
        rows = [r for r in rows if int(r["n"]) == last]
    return np.array([[float(r[c]) for c in cols] for r in rows])


def cmd_fit(cfg: ExperimentConfig) -> int:
    try:
        X = _read_ratios(cfg["input"])
    except OSError as exc:
        raise ConfigError(f"cannot read {cfg['input']}: {exc}") from exc
    if cfg["merge"]:
        if any(g < 1 or g > X.shape[1] for grp in cfg["merge"] for g in grp):
            raise ConfigError(f"merge groups reference columns outside 1..{X.shape[1]}")
        X = np.column_stack([X[:, [g - 1 for g in grp]].sum(axis=1) for grp in cfg["merge"]])
    try:
        res = fit_gas(X, renormalize=cfg["renormalize"])
    except SizeError as exc:
        raise ConfigError(str(exc)) from exc
    _write_json(os.path.join(cfg["out"], "fit.json"), res.to_dict())
    _write_json(os.path.join(cfg["out"], "manifest.json"), _manifest(cfg, {"n_rows": len(X)}))
    print(f"kind={res.kind} alpha_hat={res.alpha_hat} beta_hat="
          + ",".join(f"{b:.6f}" for b in res.beta_hat))
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, seed_given: bool) -> int:
    name = cfg["name"]
    fn = EXPERIMENTS[name]
    kwargs = {}
    params = fn.__code__.co_varnames[:fn.__code__.co_argcount]
    if "seed" in params:
        kwargs["seed"] = cfg["seed"] if seed_given else SEEDS.get(name)
    if "workers" in params:
        kwargs["workers"] = cfg["threads"]
    verdict = fn(**kwargs)
    _write_json(os.path.join(cfg["out"], "report.json"), verdict.to_dict())
    for art, rows in verdict.artifacts.items():
        _write_rows(os.path.join(cfg["out"], f"{art}.csv"), rows)
    _write_json(os.path.join(cfg["out"], "manifest.json"),
                _manifest(cfg, {"experiment_config": verdict.config}))
    print(verdict.summary())
    return EXIT_OK if verdict.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int, help="worker threads; never changes results")
    common.add_argument("--out", help="output directory (created if missing)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="arcsine-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-gas", parents=[common], help="draw generalized arcsine samples")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", help="comma-separated weights summing to 1")
    p.add_argument("--n-samples", type=int)

    p = sub.add_parser("simulate", parents=[common], help="run an occupation-time ensemble")
    p.add_argument("--model", choices=sorted(MODEL_KEYS))
    p.add_argument("--p", help="chain ray probabilities")
    p.add_argument("--eps", type=float, help="cubic3 ray half-width")
    p.add_argument("--measure", help="initial measure id, e.g. uniform_boole or beta_like:4,4")
    p.add_argument("--checkpoints", help="comma-separated increasing step counts")
    p.add_argument("--n-traj", type=int)

    p = sub.add_parser("wandering", parents=[common], help="exact wandering-rate table")
    p.add_argument("--p", help="chain ray probabilities")
    p.add_argument("--horizon", type=int)

    p = sub.add_parser("fit", parents=[common], help="fit (alpha, beta) to ratio samples")
    p.add_argument("--input", help="samples.csv or occupation.csv")
    p.add_argument("--merge", help="ray groups to merge, e.g. '1;2,3;4'")
    p.add_argument("--no-renormalize", dest="renormalize", action="store_const", const=False)

    p = sub.add_parser("verify", parents=[common], help="run a verification experiment")
    p.add_argument("name", help=", ".join(sorted(EXPERIMENTS)))
    return parser


def _flag_values(args) -> dict:
    vals = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    if args.command == "simulate":
        model = {}
        if vals.pop("p", None) is not None:
            model["p"] = args.p
        if vals.pop("eps", None) is not None:
            model["eps"] = args.eps
        if args.model is not None or model:
            vals["model"] = dict(model, kind=args.model) if args.model else model
        else:
            vals["model"] = None
    return vals


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:           # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_values = _load_config_file(args.config)
        flags = _flag_values(args)
        if args.command == "simulate" and flags.get("model") is not None:
            base = file_values.get("model", DEFAULTS["model"])
            base = {"kind": base} if isinstance(base, str) else dict(base)
            if "kind" in flags["model"] and flags["model"]["kind"] != base.get("kind"):
                base = {}
            flags["model"] = dict(base, **flags["model"])
        cfg = resolve_config(args.command, file_values, flags)
        os.makedirs(cfg["out"], exist_ok=True)
    except ConfigError as exc:
        print(f"arcsine-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"arcsine-lab: error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "sample-gas":
            return cmd_sample_gas(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "wandering":
            return cmd_wandering(cfg)
        if args.command == "fit":
            return cmd_fit(cfg)
        seed_given = args.seed is not None or "seed" in file_values
        return cmd_verify(cfg, seed_given)
    except ConfigError as exc:
        print(f"arcsine-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArcsineLabError, ArithmeticError, OSError, MemoryError) as exc:
        print(f"arcsine-lab: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
