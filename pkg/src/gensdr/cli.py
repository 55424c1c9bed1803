"""``gensdr`` command line: gen, train, bench, sample, oracle-verify.

Exit codes: 0 success, 1 a check or run failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .bench import EnsembleConfig, dataset_table, fit, run_bench, split_table
from .errors import ConfigError, DegenerateEnsembleError, NonFiniteError, ShapeError, TrainingDiverged
from .interpolant import STRAIGHT, TRIG, Schedule
from .io import SCHEMA_VERSION, load_model, read_csv, read_json, save_model, write_csv, write_json
from .metrics import REPORT_COLUMNS, aggregate
from .sampler import generate as sample_model, make_grid
from .simgen import CONVENTIONS, SimSetting, generate
from .trainer import GenSdrModel, TrainConfig
from . import oracle, seeding

log = logging.getLogger("gensdr")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass
class BenchOptions:
    n_reps: int = 20
    n_test: int = 1000
    param_key: Optional[str] = None


@dataclass
class SampleOptions:
    K: int = 100
    n_samples: int = 1000
    x: Optional[list] = None
    tau: Optional[float] = None  # defaults to the model's training tau


@dataclass
class OracleOptions:
    schedule: str = "straight"
    d_y: int = 2
    h: float = 1e-5
    flow_K: int = 1000
    corrupt: bool = False


_SECTIONS = {"setting": SimSetting, "train": TrainConfig, "ensemble": EnsembleConfig,
             "bench": BenchOptions, "sample": SampleOptions, "oracle": OracleOptions}


@dataclass
class RunConfig:
    seed: int = 0
    d: Optional[int] = None
    setting: dict = field(default_factory=lambda: {"tag": "A"})
    train: dict = field(default_factory=dict)
    ensemble: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)
    sample: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        version = raw.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"config schema_version {version!r} is not {SCHEMA_VERSION}")
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**raw)
        for name, kind in _SECTIONS.items():
            section = getattr(cfg, name)
            if not isinstance(section, dict):
                raise ConfigError(f"config section {name!r} must be an object")
            allowed = {f.name for f in fields(kind)}
            bad = set(section) - allowed
            if bad:
                raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
        return cfg

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION}
        out.update({f.name: getattr(self, f.name) for f in fields(self)})
        return out

    def sim_setting(self, **override) -> SimSetting:
        return SimSetting(**{**self.setting, **override})

    def train_config(self, seed: int) -> TrainConfig:
        opts = dict(self.train)
        opts.pop("seed", None)
        setting = self.sim_setting()
        # a 20-dimensional response in setting C gets the longer schedule
        if "epochs" not in opts and setting.tag == "C" and setting.d_y >= 20:
            opts["epochs"] = 100
        return TrainConfig(seed=seed, **opts)

    def ensemble_config(self) -> EnsembleConfig:
        return EnsembleConfig(**self.ensemble)


def _load_config(args) -> RunConfig:
    raw = read_json(args.config) if args.config else {}
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    cfg = RunConfig.from_dict(raw)
    if args.seed is not None:
        cfg.seed = args.seed
    overrides = getattr(args, "set", None) or []
    for item in overrides:
        key, _, value = item.partition("=")
        section, _, name = key.partition(".")
        if not name or section not in _SECTIONS:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        getattr(cfg, section)[name] = _parse_value(value)
    cfg = RunConfig.from_dict(cfg.to_dict())
    if getattr(args, "setting", None):
        cfg.setting = {**cfg.setting, "tag": args.setting}
    return cfg


def _parse_value(text: str):
    try:
        return json.loads(text)
    except ValueError:
        return text


def _out(args) -> Path:
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _data_rng(seed):
    return seeding.derive_rng(seed, "data", "train")


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args, cfg: RunConfig) -> int:
    setting = cfg.sim_setting()
    data = generate(setting, _data_rng(cfg.seed))
    cols, values = dataset_table(data)
    out = _out(args)
    write_csv(out / "data.csv", cols, values)
    write_json(out / "data.json", {"config": cfg.to_dict(), "seed": cfg.seed, "setting": setting.to_dict(),
                                   "d": setting.d, "columns": cols, "conventions": CONVENTIONS})
    print(f"wrote {data.n} rows x {len(cols)} columns to {out / 'data.csv'}")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    fit_seed = seeding.hash64(cfg.seed, "fit")
    if args.data:
        cols, values = read_csv(args.data)
        X, Y, _, spd = split_table(cols, values)
        meta_path = Path(args.data).with_suffix(".json")
        d = cfg.d or (read_json(meta_path)["d"] if meta_path.exists() else None)
        if d is None:
            raise ConfigError("representation dimension d unknown: pass --d or keep the data.json sidecar")
    else:
        setting = cfg.sim_setting()
        data = generate(setting, _data_rng(cfg.seed))
        X, Y, spd = data.X, data.Y, setting.spd
        d = cfg.d or setting.d
    train_cfg = cfg.train_config(fit_seed)
    ens_rng = seeding.derive_rng(cfg.seed, "ensemble")
    model, trace = fit(X, Y, spd, d, train_cfg, cfg.ensemble_config(), ens_rng)
    out = _out(args)
    save_model(out / "model.json", model, {"run": cfg.to_dict(), "train": train_cfg.to_dict()})
    write_csv(out / "loss.csv", ["epoch", "loss"], [(k + 1, v) for k, v in enumerate(trace)])
    final = f"{trace[-1]:.6g}" if trace else "n/a"
    print(f"trained {len(trace)} epochs, final loss {final}; model at {out / 'model.json'}")
    return EXIT_OK


def cmd_bench(args, cfg: RunConfig) -> int:
    opts = BenchOptions(**cfg.bench)
    if args.reps is not None:
        opts.n_reps = args.reps
    setting = cfg.sim_setting()
    train_cfg = cfg.train_config(0)
    records = run_bench(setting, train_cfg, cfg.ensemble_config(), cfg.d, cfg.seed, opts.n_reps,
                        opts.n_test, args.jobs, opts.param_key)
    report = aggregate(records)
    out = _out(args)
    write_csv(out / "reps.csv", REPORT_COLUMNS,
              [(r.setting, r.param_key, r.param_value, r.rep, r.seed, r.dcor, r.wall_ms) for r in records])
    write_json(out / "aggregate.json", {**report.summary(), "setting": setting.to_dict(),
                                        "config": cfg.to_dict(), "base_seed": cfg.seed})
    print(f"setting {setting.tag}: dcor mean {report.mean:.4f} std {report.std:.4f} over {report.n_reps} reps")
    return EXIT_OK


def _sample_points(args, opts: SampleOptions, d_x: int) -> np.ndarray:
    if args.x:
        rows = [[float(v) for v in args.x.split(",")]]
    elif args.x_csv:
        cols, values = read_csv(args.x_csv)
        xs = [i for i, c in enumerate(cols) if c.startswith("x")] or list(range(len(cols)))
        rows = values[:, xs]
    elif opts.x is not None:
        rows = opts.x
    else:
        raise ConfigError("no covariate rows given: use --x, --x-csv or sample.x in the config")
    pts = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if pts.shape[1] != d_x:
        raise ConfigError(f"covariate rows have {pts.shape[1]} entries, the model expects {d_x}")
    return pts


def cmd_sample(args, cfg: RunConfig) -> int:
    if not Path(args.model).is_file():
        raise ConfigError(f"model file {args.model} not found")
    model = load_model(args.model)
    if not isinstance(model, GenSdrModel):
        raise ConfigError("sampling needs a vector-response model, not a kernel ensemble")
    opts = SampleOptions(**cfg.sample)
    if args.K is not None:
        opts.K = args.K
    if args.n_samples is not None:
        opts.n_samples = args.n_samples
    tau = model.tau if opts.tau is None else opts.tau
    grid = make_grid(opts.K, tau)
    pts = _sample_points(args, opts, model.d_x)
    out = _out(args)
    cols = [f"y{j + 1}" for j in range(model.d_y)]
    files = []
    for i, x in enumerate(pts):
        draws = sample_model(model, x, opts.n_samples, grid, seeding.derive_rng(cfg.seed, "sample", i))
        name = f"samples_{i:03d}.csv"
        write_csv(out / name, cols, draws)
        files.append(name)
    write_json(out / "samples.json", {"x": pts, "K": opts.K, "tau": tau, "seed": cfg.seed,
                                      "n_samples": opts.n_samples, "files": files, "model": str(args.model)})
    print(f"wrote {len(files)} sample file(s) of {opts.n_samples} draws to {out}")
    return EXIT_OK


def _zero_schedule(t):
    z = np.zeros_like(t)
    return z, z, z, z, z, z


def cmd_oracle(args, cfg: RunConfig) -> int:
    opts = OracleOptions(**cfg.oracle)
    if args.corrupt_schedule:
        opts.corrupt = True
    if opts.corrupt:
        sched = Schedule("custom", _zero_schedule)
    elif opts.schedule in ("straight", "trig"):
        sched = STRAIGHT if opts.schedule == "straight" else TRIG
    else:
        raise ConfigError(f"unknown schedule {opts.schedule!r}")
    results = oracle.run_checks(sched, opts.d_y, opts.h, opts.flow_K)
    width = max(len(r.name) for r in results)
    print(f"{'check':<{width}}  {'max residual':>12}  {'threshold':>9}  status")
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {r.max_residual:>12.3e}  {r.threshold:>9.0e}  {status}")
        if r.error:
            print(f"    {r.error}")
    if args.out:
        write_json(_out(args) / "oracle.json", {
            "schedule": "corrupt" if opts.corrupt else opts.schedule,
            "checks": [{"name": r.name, "max_residual": r.max_residual if np.isfinite(r.max_residual) else None,
                        "threshold": r.threshold, "passed": r.passed, "error": r.error} for r in results],
        })
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON run configuration")
    shared.add_argument("--seed", type=int, help="base seed (overrides the config)")
    shared.add_argument("--out", default="gensdr_out", help="output directory")
    shared.add_argument("--jobs", type=int, default=1, help="parallel replications (bench)")
    shared.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config entry; VALUE is parsed as JSON when possible")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gensdr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[shared], help="write a simulated dataset")
    p.add_argument("--setting", help="setting tag A-F or W")

    p = sub.add_parser("train", parents=[shared], help="fit a model")
    p.add_argument("--setting", help="setting tag A-F or W")
    p.add_argument("--data", help="dataset CSV written by gen (instead of simulating)")
    p.add_argument("--d", type=int, help="representation dimension")

    p = sub.add_parser("bench", parents=[shared], help="replicated train/evaluate runs")
    p.add_argument("--setting", help="setting tag A-F or W")
    p.add_argument("--reps", type=int, help="number of replications")

    p = sub.add_parser("sample", parents=[shared], help="conditional samples from a fitted model")
    p.add_argument("--model", required=True, help="model.json written by train")
    p.add_argument("--x", help="one covariate row, comma separated")
    p.add_argument("--x-csv", help="CSV of covariate rows")
    p.add_argument("-K", type=int, help="Euler steps (default 100)")
    p.add_argument("--n-samples", type=int)

    p = sub.add_parser("oracle-verify", parents=[shared], help="closed-form Gaussian checks")
    p.add_argument("--corrupt-schedule", action="store_true", help="inject alpha = beta = 0")
    p.set_defaults(out=None)
    return parser


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "bench": cmd_bench, "sample": cmd_sample,
            "oracle-verify": cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "d", None) is not None and args.d < 1:
        print("error: --d must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _load_config(args)
        if getattr(args, "d", None):
            cfg.d = args.d
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ShapeError, DegenerateEnsembleError, FileNotFoundError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, NonFiniteError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
