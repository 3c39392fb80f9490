"""``mvlstm`` command line interface.

Exit codes: 0 success, 1 user/data error, 2 internal invariant violation.
Failures print one line to stderr: ``mvlstm: error[<Kind>]: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import modelio
from .baseline import fit_linear_arx, predict_linear_arx
from .cell import CellShape
from .data import read_csv, write_csv
from .errors import ConfigError, DataError, InvariantError, MvLstmError
from .grad import GRADCHECK_SHAPES, gradcheck_suite
from .granger import DEFAULT_LAG, DEFAULT_LEVEL, granger_rank
from .report import build_report
from .synth import ArxSpec, generate
from .train import TrainConfig, fit, mae, make_windows, predict, rmse

log = logging.getLogger("mvlstm")

GRADCHECK_TOL = 1e-4
MODEL_FILE = "model.mvl"
METRICS_FILE = "metrics.json"
CURVE_FILE = "loss_curve.csv"


@dataclass
class RunConfig:
    input: str | None = None
    target: str | None = None
    output_dir: str = "mvlstm_out"
    format: str = "json"
    bins: int = 20
    granger_lag: int = DEFAULT_LAG
    granger_level: float = DEFAULT_LEVEL
    top_k: int = 4
    train: TrainConfig = field(default_factory=TrainConfig)

    def check(self) -> "RunConfig":
        if self.input is None:
            raise ConfigError("no input CSV given (config key 'input' or --input)")
        if not Path(self.input).is_file():
            raise ConfigError(f"input file {self.input} does not exist")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {self.format!r}")
        if self.bins < 1 or self.granger_lag < 1 or self.top_k < 1:
            raise ConfigError("bins, granger_lag and top_k must be positive")
        if not 0 < self.granger_level < 1:
            raise ConfigError("granger_level must lie in (0, 1)")
        return self


def load_run_config(path: str | None) -> RunConfig:
    """Read a JSON run config; training keys sit at the top level next to run keys.

    Relative paths are resolved against the config file's directory.
    """
    if path is None:
        return RunConfig()
    cfg_path = Path(path)
    try:
        raw = json.loads(cfg_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    run_keys = {f.name for f in fields(RunConfig)} - {"train"}
    train_keys = {f.name for f in fields(TrainConfig)}
    unknown = sorted(set(raw) - run_keys - train_keys)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    base = cfg_path.parent
    run = {k: v for k, v in raw.items() if k in run_keys}
    for key in ("input", "output_dir"):
        if key in run and not Path(run[key]).is_absolute():
            run[key] = str(base / run[key])
    train = TrainConfig.from_dict({k: v for k, v in raw.items() if k in train_keys})
    return RunConfig(train=train, **run)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    pairs = {"input": "input", "target": "target", "output_dir": "out", "format": "format",
             "bins": "bins", "granger_lag": "lag", "granger_level": "level"}
    for key, attr in pairs.items():
        val = getattr(args, attr, None)
        if val is not None:
            setattr(cfg, key, val)
    tpairs = {"window": "window", "per_var_dim": "dim", "learning_rate": "lr", "seed": "seed",
              "max_epochs": "epochs"}
    changes = {k: getattr(args, a) for k, a in tpairs.items() if getattr(args, a, None) is not None}
    if changes:
        cfg.train = TrainConfig(**{**asdict(cfg.train), **changes})
    return cfg


def _run_config(args) -> RunConfig:
    return _apply_overrides(load_run_config(args.config), args).check()


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_train(args) -> int:
    cfg = _run_config(args)
    frame = read_csv(cfg.input, cfg.target)
    tc = cfg.train
    ds = make_windows(frame, tc.window, tc.splits)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        result = fit(ds, tc)
        model = modelio.ModelFile(
            result.params, CellShape(frame.n_vars, tc.per_var_dim, tc.window),
            list(frame.columns), ds.mean, ds.std, meta={"train": asdict(tc)})
        path = out / MODEL_FILE
        written.append(path)
        modelio.save(model, path)

        metrics = {
            "columns": list(frame.columns),
            "target": frame.target,
            "units": "normalized",
            "test_rmse": result.test_rmse,
            "test_mae": result.test_mae,
            "n_train": len(ds.train), "n_val": len(ds.val), "n_test": len(ds.test),
            "best_epoch": result.best_epoch,
            "epochs_run": len(result.val_loss),
        }
        path = out / METRICS_FILE
        written.append(path)
        path.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")

        path = out / CURVE_FILE
        written.append(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss"])
            for k, (a, b) in enumerate(zip(result.train_loss, result.val_loss), 1):
                w.writerow([k, repr(a), repr(b)])
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    print(f"test RMSE {result.test_rmse:.6f}  MAE {result.test_mae:.6f}  -> {out}")
    return 0


def _load_for_model(args, cfg: RunConfig):
    model = modelio.load(args.model)
    frame = read_csv(cfg.input, cfg.target or model.columns[-1])
    if list(frame.columns) != list(model.columns):
        raise DataError(
            f"schema mismatch: model columns {model.columns} vs data columns {frame.columns}"
        )
    return model, frame


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    model, frame = _load_for_model(args, cfg)
    ds = make_windows(frame, model.shape.window, cfg.train.splits, stats=(model.mean, model.std))
    pred, _ = predict(model.params, ds.test.x)
    report = {"mvlstm": {"rmse": rmse(pred, ds.test.y), "mae": mae(pred, ds.test.y)},
              "n_test": len(ds.test), "units": "normalized"}
    for name in args.baseline or []:
        if name == "persistence":
            bp = ds.test.x[:, -1, -1]
        else:
            lag = args.arx_lag or model.shape.window
            bp = predict_linear_arx(fit_linear_arx(ds, lag), ds.test.x)
        report[name] = {"rmse": rmse(bp, ds.test.y), "mae": mae(bp, ds.test.y)}
    _emit(report)
    return 0


def cmd_interpret(args) -> int:
    cfg = _run_config(args)
    model, frame = _load_for_model(args, cfg)
    report = build_report(model, frame, cfg.train.splits, cfg.bins, cfg.granger_lag,
                          cfg.granger_level, args.top_k or cfg.top_k)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.format == "json":
        (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    else:
        with (out / "report.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "variable", "mean", "std", "granger_f", "granger_p_value",
                        "granger_causal"])
            for k, v in enumerate(report["variables"], 1):
                w.writerow([k, v["variable"], repr(v["mean"]), repr(v["std"]), v["granger_f"],
                            v["granger_p_value"], v["granger_causal"]])
        for v in report["variables"]:
            with (out / f"hist_{v['variable']}.csv").open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["bin_lo", "bin_hi", "count"])
                edges = v["bin_edges"]
                for k, c in enumerate(v["counts"]):
                    w.writerow([edges[k], edges[k + 1], c])
    print("attention rank: " + ", ".join(report["attention_rank"]))
    return 0


def cmd_granger(args) -> int:
    cfg = _run_config(args)
    frame = read_csv(cfg.input, cfg.target)
    ranking = granger_rank(frame, cfg.granger_lag, cfg.granger_level)
    out = Path(args.output) if args.output else Path(cfg.output_dir) / "granger.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "F", "p_value", "verdict", "errors"])
        for r in ranking.results:
            w.writerow([r.variable, repr(r.f_stat), repr(r.p_value),
                        "causal" if r.causal else "non-causal", ""])
        for name, msg in ranking.errors.items():
            w.writerow([name, "", "", "", msg])
    if not ranking.results:
        raise DataError("granger test failed for every column: "
                        + "; ".join(f"{k}: {v}" for k, v in ranking.errors.items()))
    return 0


def cmd_synth(args) -> int:
    try:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read spec {args.spec}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"spec {args.spec} is not valid JSON: {exc}") from None
    frame = generate(ArxSpec.from_dict(raw))
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    write_csv(frame, args.output)
    return 0


def cmd_gradcheck(args) -> int:
    results = gradcheck_suite(seed=args.seed or 0)
    worst = 0.0
    for (n, d, t), err in results:
        print(f"N={n} d={d} T={t}  max_rel_err={err:.3e}")
        worst = max(worst, err)
    print(f"max relative error {worst:.3e} over {len(GRADCHECK_SHAPES)} shapes")
    if worst > GRADCHECK_TOL:
        raise InvariantError(f"gradient check failed: {worst:.3e} > {GRADCHECK_TOL:g}")
    return 0


def _data_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--input", help="input CSV (overrides config)")
    p.add_argument("--target", help="target column name")
    p.add_argument("--out", help="output directory")
    p.add_argument("--window", type=int)
    p.add_argument("--dim", type=int, help="per-variable hidden size")
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int, help="maximum epochs")
    p.add_argument("--lag", type=int, help="Granger lag order")
    p.add_argument("--level", type=float, help="Granger significance level")
    p.add_argument("--bins", type=int, help="histogram bins")
    p.add_argument("--format", choices=["json", "csv"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvlstm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write model/metrics/loss curve")
    _data_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="test-split errors of a trained model")
    _data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--baseline", action="append", choices=["persistence", "linear"])
    p.add_argument("--arx-lag", type=int, dest="arx_lag",
                   help="lag order of the linear baseline (default: model window)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("interpret", help="attention report with Granger comparison")
    _data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--top-k", type=int, dest="top_k")
    p.set_defaults(func=cmd_interpret)

    p = sub.add_parser("granger", help="pairwise Granger F-tests against the target")
    _data_flags(p)
    p.add_argument("--output", help="ranking CSV path (default <out>/granger.csv)")
    p.set_defaults(func=cmd_granger)

    p = sub.add_parser("synth", help="generate a synthetic ARX CSV from a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference check of the analytic gradients")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    print(f"mvlstm: error[{kind}]: {' '.join(str(message).split())}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MvLstmError as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    except InvariantError as exc:
        return _fail(type(exc).__name__, str(exc), 2)
    except Exception as exc:  # noqa: BLE001
        return _fail(type(exc).__name__, str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
