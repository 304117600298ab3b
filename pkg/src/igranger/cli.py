"""Command-line front end.

Subcommands: ``generate`` (synthetic datasets with ground truth), ``fit``
(linear or neural model to a dataset manifest), ``evaluate`` (score a
checkpoint against truth files), ``recover`` (write the intervention
targets a checkpoint implies), and ``benchmark`` (generate/fit/evaluate
sweeps over experiments and seeds).

Configuration precedence is flags > config file (JSON via ``--config``) >
defaults.  Every run writes a machine-readable ``run_summary.json``.  All
tabular outputs are CSV; report figures (PNG) are rendered next to them
unless ``--no-figures`` is given.

Exit codes: 0 success; 1 benchmark finished with failed cells; 2 config or
usage error; 3 data error; 4 fit did not converge within its budget.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .datatypes import (
    ConfigError,
    DataError,
    FitConfig,
    GrangerGraph,
    InterventionalFamily,
    load_dataset,
    load_family,
    load_graph,
    load_matrix_csv,
    save_dataset,
    save_matrix_csv,
)
from .linear import (
    LinearParams,
    delta_group_norms,
    extract_linear_graph,
    fit_linear,
    load_linear_params,
    save_linear_params,
)
from .metrics import EvalReport, save_curve_csv, score_graph, score_targets
from .neural import (
    NeuralGrangerModel,
    extract_graph,
    fit_igc,
    intervention_score_matrices,
    load_model,
    recover_targets,
    save_model,
)
from .prox import OptimizationError
from .synth import (
    LinearGenConfig,
    LorenzConfig,
    NonlinearGenConfig,
    gen_linear,
    gen_lorenz,
    gen_nonlinear,
)

EXIT_OK = 0
EXIT_CELL_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NOT_CONVERGED = 4

METRIC_NAMES = ["accuracy", "auroc", "auprc", "f1", "recall", "shd",
                "target_f1", "target_detection"]


# ---------------------------------------------------------------------------
# small helpers


def _read_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        loaded = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return loaded


def _merged(file_cfg: dict, flag_values: dict) -> dict:
    """Flags (when explicitly given) override file values override defaults."""
    out = dict(file_cfg)
    for key, value in flag_values.items():
        if value is not None:
            out[key] = value
    return out


def _build_dataclass(cls, values: dict, context: str):
    field_names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - field_names
    if unknown:
        raise ConfigError(f"unknown {context} options: {sorted(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {context} configuration: {exc}") from exc


def _write_summary(out_dir: Path, command: str, config: dict, seed,
                   started: float, outputs: list) -> None:
    summary = {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": {
            "igranger": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": round(time.monotonic() - started, 3),
        "outputs": sorted(str(o) for o in outputs),
    }
    (out_dir / "run_summary.json").write_text(json.dumps(summary, indent=2) + "\n")


def _jsonable_config(cfg) -> dict:
    return {k: (v if not isinstance(v, tuple) else list(v))
            for k, v in dataclasses.asdict(cfg).items()}


# ---------------------------------------------------------------------------
# generate


GEN_FAMILIES = ("linear", "nonlinear", "lorenz")


def _generator_config(family: str, values: dict):
    if family == "linear":
        return _build_dataclass(LinearGenConfig, values, "linear generator")
    if family == "nonlinear":
        return _build_dataclass(NonlinearGenConfig, values, "nonlinear generator")
    if family == "lorenz":
        return _build_dataclass(LorenzConfig, values, "Lorenz generator")
    raise ConfigError(
        f"unknown family {family!r}; valid families: {', '.join(GEN_FAMILIES)}")


def _run_generator(family: str, cfg):
    if family == "linear":
        return gen_linear(cfg)
    if family == "nonlinear":
        return gen_nonlinear(cfg)
    return gen_lorenz(cfg)


def _write_truth(out_dir: Path, graph: GrangerGraph,
                 family: InterventionalFamily) -> list:
    written = []
    path = out_dir / "truth_graph.csv"
    save_matrix_csv(path, graph.adjacency, integer=True)
    written.append(path)
    for k, t in enumerate(family.targets):
        path = out_dir / f"targets_env{k}.csv"
        save_matrix_csv(path, t, integer=True)
        written.append(path)
    return written


def cmd_generate(args) -> int:
    started = time.monotonic()
    file_cfg = _read_config_file(args.config)
    family = args.family or file_cfg.pop("family", None)
    if family not in GEN_FAMILIES:
        raise ConfigError(
            f"unknown family {family!r}; valid families: {', '.join(GEN_FAMILIES)}")
    flag_map = {
        "seed": args.seed,
        "T": args.T,
        "n_nodes": args.d,
        "n_envs": args.envs,
        "edge_prob": args.p,
        "interv_time": args.interv_time,
        "interv_low": args.interv_low,
        "interv_high": args.interv_high,
        "targets_per_env": args.targets_per_env,
        "n_intervened": args.n_intervened,
        "noise_scale": args.noise,
        "m": args.m,
        "F_base": args.F_base,
        "F_interv": args.F_interv,
        "switch_time": args.switch_time,
        "dt": args.dt,
        "subsample": args.subsample,
        "split_at_switch": True if args.split_at_switch else None,
    }
    cfg = _generator_config(family, _merged(file_cfg, flag_map))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    data, graph, targets = _run_generator(family, cfg)
    manifest = save_dataset(data, out_dir)
    written = [manifest] + _write_truth(out_dir, graph, targets)
    config_echo = {"family": family, **_jsonable_config(cfg)}
    (out_dir / "generator_config.json").write_text(
        json.dumps(config_echo, indent=2) + "\n")
    _write_summary(out_dir, "generate", config_echo, cfg.seed, started, written)
    print(f"wrote {len(data.environments)} environment(s) of d={data.d} to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit


FIT_FLAG_FIELDS = ("lam", "alpha", "lag", "hidden", "step_size", "max_iters",
                   "tol", "edge_threshold", "target_threshold", "seed",
                   "warmup_iters")


def _fit_config_from_args(args, file_cfg: dict) -> FitConfig:
    flags = {name: getattr(args, name) for name in FIT_FLAG_FIELDS}
    return _build_dataclass(FitConfig, _merged(file_cfg, flags), "fit")


def _write_trace(traces, path: Path) -> None:
    lines = ["node,iteration,objective"]
    for i, trace in enumerate(traces):
        for m, value in enumerate(trace):
            lines.append(f"{i},{m},{value!r}")
    path.write_text("\n".join(lines) + "\n")


def cmd_fit(args) -> int:
    started = time.monotonic()
    file_cfg = _read_config_file(args.config)
    model_kind = args.model or file_cfg.pop("model", "igc")
    if model_kind not in ("linear", "igc"):
        raise ConfigError(f"unknown model {model_kind!r}; use 'linear' or 'igc'")
    standardize_data = not args.no_standardize and file_cfg.pop("standardize", True)
    cfg = _fit_config_from_args(args, file_cfg)
    data = load_dataset(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out_dir / "checkpoint"
    if model_kind == "linear":
        fitted = fit_linear(data, cfg, standardize_data=standardize_data)
        save_linear_params(fitted, ckpt_dir, cfg)
        traces = fitted.traces
        converged = fitted.converged
        zero_groups = int((delta_group_norms(fitted) == 0).sum())
    else:
        fitted = fit_igc(data, cfg, standardize_data=standardize_data)
        save_model(fitted, ckpt_dir)
        traces = fitted.traces
        converged = fitted.converged
        zero_groups = int((intervention_score_matrices(fitted) == 0).sum())
    trace_path = out_dir / "trace.csv"
    _write_trace(traces, trace_path)
    outputs = [ckpt_dir, trace_path]
    if not args.no_figures:
        from .plots import save_trace_figure
        outputs.append(save_trace_figure(traces, out_dir / "trace.png"))
    config_echo = {"model": model_kind, "manifest": str(args.manifest),
                   "standardize": standardize_data, **_jsonable_config(cfg)}
    config_echo["converged"] = converged
    config_echo["zero_intervention_groups"] = zero_groups
    _write_summary(out_dir, "fit", config_echo, cfg.seed, started, outputs)
    if not converged:
        print(f"warning: fit did not converge within {cfg.max_iters} iterations; "
              f"checkpoint holds the best iterate ({ckpt_dir})", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    print(f"fitted {model_kind} model -> {ckpt_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def _load_checkpoint(path: str | Path):
    path = Path(path)
    manifest_path = path / "checkpoint.json"
    if not manifest_path.exists():
        raise DataError(f"missing checkpoint manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    kind = manifest.get("model")
    if kind == "linear":
        return "linear", load_linear_params(path), manifest
    if kind == "igc":
        return "igc", load_model(path), manifest
    raise DataError(f"unrecognized checkpoint kind {kind!r} in {manifest_path}")


def _thresholds_from(manifest: dict, args) -> tuple:
    edge = args.edge_threshold if args.edge_threshold is not None else \
        float(manifest.get("edge_threshold", 1e-3))
    target = args.target_threshold if args.target_threshold is not None else \
        float(manifest.get("target_threshold", 1e-3))
    return edge, target


def _extract_from_checkpoint(kind, fitted, edge_threshold, target_threshold):
    cfg = FitConfig(edge_threshold=edge_threshold,
                    target_threshold=target_threshold,
                    lag=fitted.lag if isinstance(fitted, LinearParams)
                    else fitted.layout.lag)
    if kind == "linear":
        graph, family = extract_linear_graph(fitted, cfg)
        scores = delta_group_norms(fitted)
    else:
        graph = extract_graph(fitted, cfg)
        family = recover_targets(fitted, cfg)
        scores = intervention_score_matrices(fitted)
    return graph, family, scores


def _aggregate_rows(reports: list, keys: list) -> dict:
    row = {}
    for key in keys:
        values = [r.get(key) for r in reports]
        values = [v for v in values if v is not None]
        if not values:
            row[f"{key}_mean"] = ""
            row[f"{key}_std"] = ""
        else:
            arr = np.asarray(values, dtype=float)
            row[f"{key}_mean"] = repr(float(arr.mean()))
            row[f"{key}_std"] = repr(float(arr.std()))
    return row


def _report_metrics(report: EvalReport, target_report=None) -> dict:
    out = {
        "accuracy": report.accuracy,
        "auroc": report.auroc,
        "auprc": report.auprc,
        "f1": report.f1,
        "recall": report.recall,
        "shd": report.shd,
    }
    if target_report is not None:
        out["target_f1"] = target_report.pooled.f1
        out["target_detection"] = target_report.env_detection_accuracy
    return out


def cmd_evaluate(args) -> int:
    started = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    truth_path = Path(args.truth)
    if not truth_path.exists():
        raise DataError(f"missing truth graph file: {truth_path}")
    truth = load_graph(truth_path)
    include_diag = not args.no_diagonal
    checkpoints = [Path(c) for c in args.checkpoint]
    rows = []
    outputs = []
    for idx, ckpt in enumerate(checkpoints):
        kind, fitted, manifest = _load_checkpoint(ckpt)
        edge_t, target_t = _thresholds_from(manifest, args)
        graph, family, scores = _extract_from_checkpoint(kind, fitted,
                                                         edge_t, target_t)
        report = score_graph(graph, truth, include_diagonal=include_diag)
        tag = f"_{idx}" if len(checkpoints) > 1 else ""
        report.to_json(out_dir / f"report{tag}.json")
        outputs.append(out_dir / f"report{tag}.json")
        if report.curve:
            save_curve_csv(report, out_dir / f"curve{tag}.csv")
            outputs.append(out_dir / f"curve{tag}.csv")
        target_report = None
        if args.targets_truth:
            truth_family = load_family(args.targets_truth)
            target_report = score_targets(family, truth_family,
                                          scores=list(scores),
                                          include_diagonal=include_diag)
            target_report.to_json(out_dir / f"targets_report{tag}.json")
            outputs.append(out_dir / f"targets_report{tag}.json")
        if not args.no_figures:
            from .plots import save_adjacency_figure, save_curve_figures
            outputs.extend(save_curve_figures(report, out_dir, stem=f"graph{tag}"))
            outputs.append(save_adjacency_figure(
                graph.adjacency, truth.adjacency,
                out_dir / f"adjacency{tag}.png"))
        rows.append(_report_metrics(report, target_report))
    keys = [k for k in METRIC_NAMES if any(k in r for r in rows)]
    lines = ["metric," + ",".join(f"{k}_mean,{k}_std" for k in keys)]
    agg = _aggregate_rows(rows, keys)
    lines.append("value," + ",".join(f"{agg[f'{k}_mean']},{agg[f'{k}_std']}"
                                     for k in keys))
    (out_dir / "aggregate.csv").write_text("\n".join(lines) + "\n")
    outputs.append(out_dir / "aggregate.csv")
    per_seed = out_dir / "per_checkpoint.csv"
    header = ["checkpoint"] + keys
    body = [",".join([str(checkpoints[i])] +
                     ["" if rows[i].get(k) is None else repr(float(rows[i][k]))
                      for k in keys])
            for i in range(len(rows))]
    per_seed.write_text("\n".join([",".join(header)] + body) + "\n")
    outputs.append(per_seed)
    config_echo = {"checkpoints": [str(c) for c in checkpoints],
                   "truth": str(truth_path), "include_diagonal": include_diag}
    _write_summary(out_dir, "evaluate", config_echo, None, started, outputs)
    print(f"evaluated {len(checkpoints)} checkpoint(s) -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# recover


def cmd_recover(args) -> int:
    started = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind, fitted, manifest = _load_checkpoint(args.checkpoint)
    edge_t, target_t = _thresholds_from(manifest, args)
    _, family, scores = _extract_from_checkpoint(kind, fitted, edge_t, target_t)
    outputs = []
    for k, t in enumerate(family.targets):
        path = out_dir / f"targets_env{k}.csv"
        save_matrix_csv(path, t, integer=True)
        outputs.append(path)
        path = out_dir / f"target_scores_env{k}.csv"
        save_matrix_csv(path, scores[k])
        outputs.append(path)
    flags = {f"env{k}": ("intervened" if family.is_intervened(k)
                         else "non-intervened")
             for k in range(family.n_envs)}
    summary = {"target_threshold": target_t, "environments": flags}
    (out_dir / "recover_summary.json").write_text(
        json.dumps(summary, indent=2) + "\n")
    outputs.append(out_dir / "recover_summary.json")
    if not args.no_figures:
        from .plots import save_adjacency_figure
        for k in range(family.n_envs):
            outputs.append(save_adjacency_figure(
                scores[k], None, out_dir / f"targets_env{k}.png",
                title=f"intervention scores env {k}"))
    _write_summary(out_dir, "recover", {"checkpoint": str(args.checkpoint),
                                        "target_threshold": target_t},
                   None, started, outputs)
    print(f"recovered targets for {family.n_envs} environment(s) -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark


def _cell_seeds(master: int, exp_idx: int, seed_idx: int) -> tuple:
    seq = np.random.SeedSequence(master, spawn_key=(exp_idx, seed_idx))
    gen_seed, fit_seed = (int(s) for s in seq.generate_state(2))
    return gen_seed, fit_seed


def _run_cell(exp: dict, exp_idx: int, seed_idx: int, master: int,
              out_dir: Path) -> dict:
    family_name = exp.get("family")
    model_kind = exp.get("model", "igc")
    if family_name not in GEN_FAMILIES:
        raise ConfigError(f"experiment {exp.get('name')!r}: unknown family "
                          f"{family_name!r}")
    if model_kind not in ("linear", "igc"):
        raise ConfigError(f"experiment {exp.get('name')!r}: unknown model "
                          f"{model_kind!r}")
    gen_seed, fit_seed = _cell_seeds(master, exp_idx, seed_idx)
    gen_values = dict(exp.get("generator", {}))
    gen_values["seed"] = gen_seed
    gen_cfg = _generator_config(family_name, gen_values)
    fit_values = dict(exp.get("fit", {}))
    fit_values["seed"] = fit_seed
    fit_cfg = _build_dataclass(FitConfig, fit_values, "fit")
    include_diag = bool(exp.get("include_diagonal", True))
    standardize_data = bool(exp.get("standardize", True))

    cell_dir = out_dir / str(exp.get("name", f"exp{exp_idx}")) / f"seed{seed_idx}"
    cell_dir.mkdir(parents=True, exist_ok=True)
    data, truth_graph, truth_family = _run_generator(family_name, gen_cfg)
    save_dataset(data, cell_dir / "data")
    _write_truth(cell_dir / "data", truth_graph, truth_family)
    if model_kind == "linear":
        fitted = fit_linear(data, fit_cfg, standardize_data=standardize_data)
        save_linear_params(fitted, cell_dir / "checkpoint", fit_cfg)
        graph, family = extract_linear_graph(fitted, fit_cfg)
        scores = delta_group_norms(fitted)
        converged = fitted.converged
    else:
        fitted = fit_igc(data, fit_cfg, standardize_data=standardize_data)
        save_model(fitted, cell_dir / "checkpoint")
        graph = extract_graph(fitted, fit_cfg)
        family = recover_targets(fitted, fit_cfg)
        scores = intervention_score_matrices(fitted)
        converged = fitted.converged
    report = score_graph(graph, truth_graph, include_diagonal=include_diag)
    target_report = score_targets(family, truth_family, scores=list(scores),
                                  include_diagonal=include_diag)
    report.to_json(cell_dir / "report.json")
    target_report.to_json(cell_dir / "targets_report.json")
    metrics = _report_metrics(report, target_report)
    metrics["converged"] = converged
    return metrics


def _format_table(rows: list, keys: list) -> str:
    header = ["dataset", "model", "seeds", "status", "converged"]
    for key in keys:
        header += [f"{key}_mean", f"{key}_std"]
    lines = [",".join(header)]
    for row in rows:
        cells = [row["dataset"], row["model"], str(row["seeds"]), row["status"],
                 str(row["converged"])]
        for key in keys:
            cells += [str(row.get(f"{key}_mean", "")),
                      str(row.get(f"{key}_std", ""))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_benchmark(args) -> int:
    started = time.monotonic()
    config = _read_config_file(args.config)
    experiments = config.get("experiments", [])
    if not experiments:
        raise ConfigError("benchmark config lists no experiments")
    seeds = config.get("seeds", 3)
    n_seeds = len(seeds) if isinstance(seeds, list) else int(seeds)
    if n_seeds < 1:
        raise ConfigError("benchmark needs at least one seed")
    master = args.seed if args.seed is not None else int(config.get("seed", 0))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = max(1, args.jobs)

    cells = [(e_idx, s_idx) for e_idx in range(len(experiments))
             for s_idx in range(n_seeds)]

    def run(cell):
        e_idx, s_idx = cell
        try:
            return cell, _run_cell(experiments[e_idx], e_idx, s_idx, master,
                                   out_dir), None
        except Exception as exc:  # cell failures must not kill the sweep
            return cell, None, f"{type(exc).__name__}: {exc}"

    results = {}
    if jobs == 1:
        for cell in cells:
            key, metrics, err = run(cell)
            results[key] = (metrics, err)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for key, metrics, err in pool.map(run, cells):
                results[key] = (metrics, err)

    rows = []
    any_failed = False
    for e_idx, exp in enumerate(experiments):
        per_seed = [results[(e_idx, s_idx)] for s_idx in range(n_seeds)]
        errors = [err for _, err in per_seed if err]
        metrics = [m for m, err in per_seed if not err]
        row = {"dataset": str(exp.get("name", f"exp{e_idx}")),
               "model": exp.get("model", "igc"),
               "seeds": n_seeds}
        if errors:
            any_failed = True
            row["status"] = "failed: " + errors[0].replace(",", ";")
            row["converged"] = ""
        else:
            row["status"] = "ok"
            row["converged"] = f"{sum(m['converged'] for m in metrics)}/{n_seeds}"
            row.update(_aggregate_rows(metrics, METRIC_NAMES))
        rows.append(row)
    table = _format_table(rows, METRIC_NAMES)
    table_path = out_dir / "benchmark_table.csv"
    table_path.write_text(table)
    outputs = [table_path]
    if not args.no_figures:
        from .plots import save_benchmark_figure
        ok_rows = [r for r in rows if r["status"] == "ok"]
        if ok_rows:
            outputs.append(save_benchmark_figure(
                ok_rows, ["accuracy", "auroc", "f1"],
                out_dir / "benchmark_metrics.png"))
    _write_summary(out_dir, "benchmark",
                   {"config": str(args.config), "jobs": jobs,
                    "experiments": [e.get("name") for e in experiments],
                    "n_seeds": n_seeds},
                   master, started, outputs)
    print(table, end="")
    return EXIT_CELL_FAILURE if any_failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="igranger",
        description="Granger causal structure learning from heterogeneous "
                    "interventional time series",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset with truth")
    p.add_argument("--family", choices=GEN_FAMILIES)
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--d", type=int, help="number of series (linear/nonlinear)")
    p.add_argument("--envs", type=int, help="number of environments")
    p.add_argument("--T", type=int, help="series length")
    p.add_argument("--p", type=float, help="edge probability")
    p.add_argument("--interv-time", type=int, dest="interv_time")
    p.add_argument("--interv-low", type=float, dest="interv_low")
    p.add_argument("--interv-high", type=float, dest="interv_high")
    p.add_argument("--targets-per-env", type=int, dest="targets_per_env")
    p.add_argument("--n-intervened", type=int, dest="n_intervened")
    p.add_argument("--noise", type=float)
    p.add_argument("--m", type=int, help="variable count (lorenz)")
    p.add_argument("--F-base", type=float, dest="F_base")
    p.add_argument("--F-interv", type=float, dest="F_interv")
    p.add_argument("--switch-time", type=int, dest="switch_time")
    p.add_argument("--dt", type=float)
    p.add_argument("--subsample", type=int)
    p.add_argument("--split-at-switch", action="store_true", dest="split_at_switch")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit a model to a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", choices=("linear", "igc"))
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--out", required=True)
    p.add_argument("--lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--lag", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--step-size", type=float, dest="step_size")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--tol", type=float)
    p.add_argument("--warmup-iters", type=int, dest="warmup_iters")
    p.add_argument("--edge-threshold", type=float, dest="edge_threshold")
    p.add_argument("--target-threshold", type=float, dest="target_threshold")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="score checkpoints against truth")
    p.add_argument("--checkpoint", action="append", required=True,
                   help="checkpoint directory; repeat for multiple seeds")
    p.add_argument("--truth", required=True, help="truth adjacency CSV")
    p.add_argument("--targets-truth", nargs="*", dest="targets_truth",
                   help="per-environment truth target CSVs")
    p.add_argument("--edge-threshold", type=float, dest="edge_threshold")
    p.add_argument("--target-threshold", type=float, dest="target_threshold")
    p.add_argument("--no-diagonal", action="store_true",
                   help="exclude self-loops from the metrics")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("recover", help="write recovered intervention targets")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--edge-threshold", type=float, dest="edge_threshold")
    p.add_argument("--target-threshold", type=float, dest="target_threshold")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("benchmark", help="generate/fit/evaluate sweeps")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OptimizationError as exc:
        print(f"optimization error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
