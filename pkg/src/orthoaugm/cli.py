"""Command-line entry point: ``orthoaugm <command> [flags]``.

Exit codes: 0 success, 2 usage error, 3 I/O failure, 4 numerical
precondition violated (e.g. rank-deficient regressor), 5 every run of a
study failed.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import ZERO_THRESHOLD, error_report, estimate_covariance
from .augmentation import AugmentedModel, Structure, TrainingContext, predict_test_batch
from .errors import ConfigError, NonFinite, OddLengthD1, RankDeficient, SingularGram
from .experiments import (
    DATASET_KINDS,
    SWEEP_GRID,
    ExperimentConfig,
    MonteCarloResult,
    TrueSystem,
    make_dataset,
    run_consistency_sweep,
    run_monte_carlo,
)
from .mlp import MlpSpec, forward_batch, xavier_init
from .optimize import TrainSchedule, train
from .regressor import BaselineBasis, build_states, read_dataset_csv, write_dataset_csv
from . import svg

log = logging.getLogger("orthoaugm")

CONFIG_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC, EXIT_STUDY_FAILED = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# Output files with provenance sidecars
# --------------------------------------------------------------------------

class OutputWriter:
    """Writes outputs one at a time and pairs each with ``<file>.meta.json``."""

    def __init__(self, command: str, flags: dict, seeds: dict):
        self.command = command
        self.flags = {k: _jsonable(v) for k, v in flags.items() if k != "func"}
        self.seeds = {k: _jsonable(v) for k, v in seeds.items()}
        self.written: list[Path] = []

    def write_text(self, path, text: str, extra: dict | None = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        meta = {
            "tool": "orthoaugm",
            "version": __version__,
            "command": self.command,
            "flags": self.flags,
            "seeds": self.seeds,
            "created": datetime.now(timezone.utc).isoformat(),
        }
        if extra:
            meta.update({k: _jsonable(v) for k, v in extra.items()})
        Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        self.written.append(path)
        return path

    def write_json(self, path, obj, extra=None) -> Path:
        return self.write_text(path, json.dumps(_jsonable(obj), indent=2) + "\n", extra)

    def write_csv(self, path, header, rows, extra=None) -> Path:
        lines = [",".join(header)]
        lines += [",".join(_cell(v) for v in row) for row in rows]
        return self.write_text(path, "\n".join(lines) + "\n", extra)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, Path):
        return str(v)
    if dataclasses.is_dataclass(v) and not isinstance(v, type):
        return _jsonable(dataclasses.asdict(v))
    return v


# --------------------------------------------------------------------------
# Flag / config parsing helpers
# --------------------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _snr(text: str) -> float | None:
    if text.lower() in ("inf", "+inf", "none", "noiseless"):
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid SNR {text!r}") from exc


def _kind(text: str) -> str:
    k = text.upper()
    if k not in DATASET_KINDS:
        raise argparse.ArgumentTypeError(f"kind must be one of d1, d2, d3; got {text!r}")
    return k


def _default_seed(value):
    if value is not None:
        return value
    env = os.environ.get("ORTHOAUGM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise UsageError(f"ORTHOAUGM_SEED must be an integer, got {env!r}") from exc


def _schedule_from_args(args) -> TrainSchedule:
    try:
        return TrainSchedule(
            adam_epochs=args.adam_epochs,
            adam_lr=args.adam_lr,
            lbfgs_iters=args.lbfgs_iters,
            lbfgs_memory=args.lbfgs_memory,
            grad_tol=args.grad_tol,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


_SCHEDULE_KEYS = {f.name for f in dataclasses.fields(TrainSchedule)}
_CONFIG_KEYS = {
    "version", "dataset_kind", "n_samples", "snr_db", "n_monte_carlo", "data_seed", "seeds",
    "schedule", "theta_b_init", "mlp_sizes", "structures", "n_test", "test_seed", "curve_points",
    "sweep_n_values", "dataset_file", "output_dir",
}


def load_run_config(path) -> tuple[ExperimentConfig, dict]:
    """Parse a versioned study config; returns the experiment config and the path/sweep extras."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if raw.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}, got {raw.get('version')!r}")
    sched_raw = raw.get("schedule", {})
    bad = set(sched_raw) - _SCHEDULE_KEYS
    if bad:
        raise ConfigError(f"unknown schedule keys: {sorted(bad)}")
    if "adam_betas" in sched_raw:
        sched_raw = dict(sched_raw, adam_betas=tuple(sched_raw["adam_betas"]))
    snr = raw.get("snr_db")
    if isinstance(snr, str):
        snr = _snr(snr)
    kwargs = {k: raw[k] for k in ("dataset_kind", "n_samples", "n_monte_carlo", "data_seed",
                                  "n_test", "test_seed", "curve_points") if k in raw}
    for k in ("seeds", "theta_b_init", "mlp_sizes", "structures"):
        if raw.get(k) is not None:
            kwargs[k] = tuple(raw[k])
    if "data_seed" not in raw and os.environ.get("ORTHOAUGM_SEED"):
        kwargs["data_seed"] = _default_seed(None)
    try:
        cfg = ExperimentConfig(snr_db=snr, schedule=TrainSchedule(**sched_raw), **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    extras = {k: raw.get(k) for k in ("sweep_n_values", "dataset_file", "output_dir")}
    return cfg, extras


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    seed = _default_seed(args.seed)
    try:
        ds, sigma = make_dataset(args.kind, args.n, seed, args.snr_db)
    except OddLengthD1:
        raise UsageError("D1 requires even N")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(out, ds)
    writer = OutputWriter("gen-data", vars(args), {"data_seed": seed})
    meta = {
        "tool": "orthoaugm", "version": __version__, "command": "gen-data",
        "flags": writer.flags, "seeds": writer.seeds,
        "kind": args.kind, "n": args.n, "snr_db": _jsonable(args.snr_db if args.snr_db is not None else math.inf),
        "sigma_e": sigma, "theta_star": list(TrueSystem().theta_star),
        "generator_version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} ({ds.n_raw} samples, sigma_e={sigma:.6g})")
    return EXIT_OK


def _load_dataset(args):
    path = Path(args.data)
    if not path.exists():
        raise FileNotFoundError(f"dataset file {path} does not exist")
    return read_dataset_csv(path, n_a=args.n_a, n_b=args.n_b)


def cmd_train(args) -> int:
    ds = _load_dataset(args)
    seed = _default_seed(args.seed)
    basis = BaselineBasis.from_names(args.basis, ds.lag)
    theta_b_init = args.theta_b_init or [0.0] * basis.n_theta_b
    if len(theta_b_init) != basis.n_theta_b:
        raise UsageError(f"--theta-b-init needs {basis.n_theta_b} values")
    ctx = TrainingContext.from_dataset(ds, basis)
    spec = MlpSpec((ds.lag.n_x, *args.hidden, ds.lag.n_y))
    model0 = AugmentedModel(args.structure, theta_b_init, xavier_init(spec, seed), basis, ds.lag)
    result = train(ctx, model0, _schedule_from_args(args))
    out = Path(args.out_dir)
    writer = OutputWriter("train", vars(args), {"model_seed": seed})
    writer.write_json(out / "model.json", result.model.to_dict(), {"final_loss": result.final_loss})
    writer.write_csv(out / "history.csv", ["iter", "phase", "loss"], result.history)
    msg = f"final loss {result.final_loss:.6e}, theta_b = {result.model.theta_b.tolist()}"
    if args.theta_star is not None:
        if len(args.theta_star) != 4 or basis.names != ["u", "u^3"]:
            raise UsageError("--theta-star takes the four NFIR coefficients and needs basis u,u^3")
        system = TrueSystem(tuple(args.theta_star))
        x = ctx.states
        f_ann = forward_batch(result.model.mlp, x) if result.model.structure is Structure.STANDARD else None
        report = error_report(result.model, ctx.fact, system.delta(x[:, 0]), system.theta_b_star, f_ann)
        writer.write_json(out / "error_report.json", report.to_dict())
        msg += f", theta_b error {report.theta_b_error:.3e}"
    print(msg)
    return EXIT_OK


def _load_model(path) -> AugmentedModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file {path} does not exist")
    try:
        return AugmentedModel.from_dict(json.loads(path.read_text()))
    except (KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: not a model file ({exc})") from exc


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    ds = _load_dataset(args)
    x, y = build_states(ds)
    pred = predict_test_batch(model, x)
    rmse = float(np.sqrt(np.mean((pred - y) ** 2)))
    out = Path(args.out_dir)
    writer = OutputWriter("eval", vars(args), {})
    writer.write_json(out / "eval.json", {"rmse": rmse, "n_samples": int(x.shape[0])})
    n_y = model.lag.n_y
    header = ["k"] + [f"y_{i}" for i in range(n_y)] + [f"yhat_{i}" for i in range(n_y)]
    offset = ds.lag.max_lag
    rows = [[k + offset, *y[k], *pred[k]] for k in range(x.shape[0])]
    writer.write_csv(out / "predictions.csv", header, rows)
    print(f"one-step-ahead RMSE {rmse:.6e} over {x.shape[0]} samples")
    return EXIT_OK


def cmd_analyze(args) -> int:
    model = _load_model(args.model)
    ds = _load_dataset(args)
    report = estimate_covariance(model, ds, strict=args.strict)
    out = Path(args.out_dir)
    writer = OutputWriter("analyze", vars(args), {})
    writer.write_json(out / "covariance.json", report.to_dict())
    n = report.p_hat.shape[0]
    writer.write_csv(out / "covariance.csv", [f"c{j}" for j in range(n)], report.p_hat.tolist())
    writer.write_text(out / "covariance.svg", svg.heatmap(
        report.p_hat.tolist(), ZERO_THRESHOLD, title="asymptotic covariance |P_hat|", n_split=report.n_theta_b))
    verdict = "numerically zero" if report.max_cross_block < ZERO_THRESHOLD else "NOT numerically zero"
    print(f"max |cross block| = {report.max_cross_block:.3e} ({verdict})")
    return EXIT_OK


RESULT_HEADER_PREFIX = ["run_id", "structure", "dataset", "N", "snr_db", "seed", "test_rmse", "theta_b_err"]


def _results_rows(runs, n_theta_b):
    header = RESULT_HEADER_PREFIX + [f"theta_b_{i}" for i in range(n_theta_b)] + ["final_loss", "wall_ms", "status"]
    rows = []
    for r in runs:
        snr = "inf" if r.snr_db is None else r.snr_db
        thetas = r.theta_b if r.theta_b else [float("nan")] * n_theta_b
        status = "ok" if r.ok else "failed: " + r.message.replace(",", ";").replace("\n", " ")
        rows.append([r.run_id, r.structure, r.dataset, r.n_samples, snr, r.seed, r.test_rmse, r.theta_b_err,
                     *thetas, r.final_loss, int(round(r.wall_ms)), status])
    return header, rows


def _write_study_outputs(writer: OutputWriter, out: Path, mc: MonteCarloResult, sweep_points) -> None:
    cfg = mc.config
    header, rows = _results_rows(mc.runs, 2)
    writer.write_csv(out / "results.csv", header, rows, {"sigma_e": mc.sigma_e})
    for r in mc.runs:
        if r.curve is not None:
            writer.write_csv(out / "curves" / f"run{r.run_id:03d}_{r.structure}.csv",
                             ["u", "f_ann_projected", "delta_true"], r.curve.tolist())
    cov_summary = [
        {"run_id": r.run_id, "structure": r.structure, "seed": r.seed,
         "max_cross_block": r.covariance.max_cross_block, "gram_rank_a": r.covariance.gram_rank_a}
        for r in mc.runs if r.ok and r.covariance is not None
    ]
    reports = [{"run_id": r.run_id, "structure": r.structure, **r.errors.to_dict()}
               for r in mc.runs if r.ok and r.errors is not None]
    writer.write_json(out / "reports.json", {"error_reports": reports, "covariance": cov_summary,
                                             "sigma_e": mc.sigma_e})
    structures = list(cfg.structures)
    groups = {}
    for s in structures:
        groups[f"{s} test RMSE"] = [r.test_rmse for r in mc.by_structure(s)]
    for s in structures:
        groups[f"{s} theta_b err"] = [r.theta_b_err for r in mc.by_structure(s)]
    writer.write_text(out / "errors_boxplot.svg", svg.box_plot(
        groups, title=f"{cfg.dataset_kind}, N={cfg.n_samples}: test RMSE and baseline error", ylabel="value"))
    t_star = TrueSystem().theta_b_star
    writer.write_text(out / "theta_b_scatter.svg", svg.scatter(
        {s: [tuple(r.theta_b) for r in mc.by_structure(s)] for s in structures},
        title="estimated baseline parameters", xlabel="theta_1", ylabel="theta_3",
        hlines={"theta_3*": float(t_star[1])}))
    curves, colors = {}, {}
    palette = {s: svg.PALETTE[i] for i, s in enumerate(structures)}
    for r in mc.runs:
        if r.ok and r.curve is not None:
            key = f"{r.structure}#{r.run_id}"
            curves[key] = (r.curve[:, 0].tolist(), r.curve[:, 1].tolist())
            colors[key] = palette[r.structure]
            grid, delta = r.curve[:, 0].tolist(), r.curve[:, 2].tolist()
    if curves:
        curves["true unmodeled terms"] = (grid, delta)
        colors["true unmodeled terms"] = "#000"
    writer.write_text(out / "learning_component.svg", svg.lines(
        curves, title="learning component vs unmodeled terms", xlabel="u", ylabel="output",
        colors=colors, opacity=0.7))
    if sweep_points:
        _write_sweep_outputs(writer, out, sweep_points, cfg)
    else:
        series = {s: ([cfg.n_samples], [mc.median(s, "theta_b_err")]) for s in structures}
        writer.write_text(out / "error_vs_n.svg", svg.lines(
            series, title="baseline error vs N (single N, median)", xlabel="N", ylabel="||theta_b* - theta_b||",
            xlog=True, ylog=True))


def _write_sweep_outputs(writer: OutputWriter, out: Path, points, cfg: ExperimentConfig) -> None:
    rows = [[p.n_samples, p.structure, p.mean_error, p.std_error, len(p.errors), p.n_failed] for p in points]
    writer.write_csv(out / "sweep.csv", ["N", "structure", "mean_error", "std_error", "n_ok", "n_failed"], rows)
    series, errs = {}, {}
    for s in dict.fromkeys(p.structure for p in points):
        pts = [p for p in points if p.structure == s and math.isfinite(p.mean_error)]
        series[s] = ([p.n_samples for p in pts], [p.mean_error for p in pts])
        errs[s] = [p.std_error for p in pts]
    snr = "noiseless" if cfg.snr_db is None else f"{cfg.snr_db:g} dB"
    writer.write_text(out / "error_vs_n.svg", svg.lines(
        series, errors=errs, title=f"{cfg.dataset_kind}, {snr}: baseline error vs N",
        xlabel="N", ylabel="mean ||theta_b* - theta_b||", xlog=True, ylog=True))


def cmd_study(args) -> int:
    cfg, extras = load_run_config(args.config)
    out = Path(args.out_dir or extras.get("output_dir") or "study_out")
    writer = OutputWriter("study", {**vars(args), "config_resolved": dataclasses.asdict(cfg)},
                          {"data_seed": cfg.data_seed, "model_seeds": list(cfg.model_seeds)})
    if extras.get("dataset_file"):
        ds = read_dataset_csv(extras["dataset_file"])
        mc = _monte_carlo_on(cfg, ds, args.jobs)
    else:
        mc = run_monte_carlo(cfg, jobs=args.jobs)
    sweep_points = None
    if extras.get("sweep_n_values"):
        sweep_points = run_consistency_sweep(cfg, extras["sweep_n_values"], jobs=args.jobs)
    _write_study_outputs(writer, out, mc, sweep_points)
    n_ok = sum(r.ok for r in mc.runs)
    for s in cfg.structures:
        print(f"{s:>10}: median theta_b error {mc.median(s, 'theta_b_err'):.4g}, "
              f"median test RMSE {mc.median(s, 'test_rmse'):.4g}")
    print(f"{n_ok}/{len(mc.runs)} runs succeeded; outputs in {out}")
    return EXIT_OK if n_ok else EXIT_STUDY_FAILED


def _monte_carlo_on(cfg: ExperimentConfig, ds, jobs: int) -> MonteCarloResult:
    from .experiments import _map, _train_one

    tasks, run_id = [], 0
    for seed in cfg.model_seeds:
        for structure in cfg.structures:
            tasks.append((cfg, ds, float("nan"), structure, seed, run_id, True))
            run_id += 1
    return MonteCarloResult(cfg, float("nan"), ds, _map(_train_one, tasks, jobs))


def cmd_sweep(args) -> int:
    if args.config:
        cfg, extras = load_run_config(args.config)
        n_values = args.n_values or extras.get("sweep_n_values") or list(SWEEP_GRID)
    else:
        try:
            cfg = ExperimentConfig(dataset_kind=args.kind, snr_db=args.snr_db, structures=tuple(args.structures),
                                   n_monte_carlo=args.n_monte_carlo, data_seed=_default_seed(args.data_seed),
                                   schedule=_schedule_from_args(args))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        n_values = args.n_values or list(SWEEP_GRID)
    points = run_consistency_sweep(cfg, n_values, jobs=args.jobs)
    out = Path(args.out_dir)
    writer = OutputWriter("sweep", {**vars(args), "config_resolved": dataclasses.asdict(cfg)},
                          {"data_seed": cfg.data_seed, "model_seeds": list(cfg.model_seeds)})
    _write_sweep_outputs(writer, out, points, cfg)
    for p in points:
        print(f"N={p.n_samples:>6} {p.structure:>10}: mean {p.mean_error:.4g} +- {p.std_error:.3g}")
    return EXIT_OK if any(p.errors for p in points) else EXIT_STUDY_FAILED


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _add_schedule_flags(p):
    d = TrainSchedule()
    p.add_argument("--adam-epochs", type=int, default=d.adam_epochs)
    p.add_argument("--adam-lr", type=float, default=d.adam_lr)
    p.add_argument("--lbfgs-iters", type=int, default=d.lbfgs_iters)
    p.add_argument("--lbfgs-memory", type=int, default=d.lbfgs_memory)
    p.add_argument("--grad-tol", type=float, default=d.grad_tol)


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="dataset CSV (k,u_0..,y_0..)")
    p.add_argument("--n-a", type=int, default=0, help="output lags")
    p.add_argument("--n-b", type=int, default=0, help="input lags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orthoaugm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate an NFIR training dataset")
    p.add_argument("--kind", type=_kind, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None, help="data seed (fallback: $ORTHOAUGM_SEED, then 0)")
    p.add_argument("--snr-db", type=_snr, default=None, help="SNR in dB, or 'inf' for noiseless")
    p.add_argument("--out", default="data.csv")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train an augmented model")
    _add_data_flags(p)
    p.add_argument("--structure", choices=[s.value for s in Structure], required=True)
    p.add_argument("--basis", type=lambda s: [t.strip() for t in s.split(",")], default=["u", "u^3"])
    p.add_argument("--hidden", type=_int_list, default=[16], help="hidden layer widths")
    p.add_argument("--seed", type=int, default=None, help="network init seed (fallback: $ORTHOAUGM_SEED)")
    p.add_argument("--theta-b-init", type=_float_list, default=[0.8, 0.03])
    p.add_argument("--theta-star", type=_float_list, default=None,
                   help="true NFIR coefficients t0,t1,t2,t3; enables the error report")
    _add_schedule_flags(p)
    p.add_argument("--out-dir", default="train_out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="one-step-ahead prediction with a trained model")
    p.add_argument("--model", required=True)
    _add_data_flags(p)
    p.add_argument("--out-dir", default="eval_out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="asymptotic parameter covariance of a trained model")
    p.add_argument("--model", required=True)
    _add_data_flags(p)
    p.add_argument("--strict", action="store_true", help="fail on a singular learning-component Gram block")
    p.add_argument("--out-dir", default="analyze_out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("study", help="Monte Carlo study (and optional sweep) from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("sweep", help="baseline error versus training data length")
    p.add_argument("--config", default=None)
    p.add_argument("--kind", type=_kind, default="D2")
    p.add_argument("--snr-db", type=_snr, default=None)
    p.add_argument("--structures", type=lambda s: s.split(","), default=["orthogonal"])
    p.add_argument("--n-values", type=_int_list, default=None)
    p.add_argument("--n-monte-carlo", type=int, default=10)
    p.add_argument("--data-seed", type=int, default=None)
    _add_schedule_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default="sweep_out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RankDeficient, SingularGram, NonFinite) as exc:
        print(f"numerical precondition failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
