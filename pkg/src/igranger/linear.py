"""Linear estimator: a lag-stacked autoregression with one shared
coefficient matrix plus a per-environment additive delta, fitted by
proximal gradient descent under the two-level group penalty.

Edges are read off the shared matrix (a lag group that survives the
penalty is an edge); a per-environment delta group that survives marks the
corresponding edge as intervened in that environment.  Doubles as the
repository's baseline method.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datatypes import (
    DataError,
    FitConfig,
    GrangerGraph,
    InterventionalFamily,
    MultiEnvDataset,
    load_matrix_csv,
    save_matrix_csv,
    standardize,
)
from .prox import LoopResult, hierarchical_prox_batch, penalty_value, prox_gradient_loop


@dataclass(frozen=True)
class LinearParams:
    """Fitted coefficients: shared W0 and per-environment deltas.

    W0 and each delta are d x (d * lag); the lag block for the pair
    (effect i, cause j) occupies columns j*lag .. (j+1)*lag - 1.
    Intercepts are per (environment, node) and unpenalized.
    """

    W0: np.ndarray
    deltas: tuple
    intercepts: np.ndarray
    lag: int
    converged: bool = True
    traces: tuple = ()

    @property
    def d(self) -> int:
        return self.W0.shape[0]

    @property
    def n_envs(self) -> int:
        return len(self.deltas)


def build_designs(data: MultiEnvDataset, lag: int) -> tuple:
    """Lagged design matrices and next-step targets per environment.

    Feature j*lag + q of a row for time t holds X[t - (q + 1), j]; targets
    are X[t] for t = lag .. T_k - 1.
    """
    data.require_lag(lag)
    designs, targets = [], []
    for env in data.environments:
        T_k = env.shape[0]
        cols = [env[lag - 1 - q: T_k - 1 - q, :] for q in range(lag)]
        Z = np.stack(cols, axis=2).reshape(T_k - lag, data.d * lag)
        designs.append(Z)
        targets.append(env[lag:, :])
    return designs, targets


def _node_callbacks(designs, ys, d, lag, n_envs, cfg, freeze_deltas):
    D = d * lag
    n_total = sum(Z.shape[0] for Z in designs)
    scale = 1.0 / n_total

    def split(x):
        w0 = x[:D]
        deltas = [x[D * (1 + k): D * (2 + k)] for k in range(n_envs)]
        c = x[D * (1 + n_envs):]
        return w0, deltas, c

    def smooth(x):
        w0, deltas, c = split(x)
        total = 0.0
        for k, (Z, y) in enumerate(zip(designs, ys)):
            r = Z @ (w0 + deltas[k]) + c[k] - y
            total += float(r @ r)
        return scale * total

    def grad(x):
        w0, deltas, c = split(x)
        g = np.zeros_like(x)
        for k, (Z, y) in enumerate(zip(designs, ys)):
            r = Z @ (w0 + deltas[k]) + c[k] - y
            gk = (2.0 * scale) * (Z.T @ r)
            g[:D] += gk
            if not freeze_deltas:
                g[D * (1 + k): D * (2 + k)] = gk
            g[D * (1 + n_envs) + k] = 2.0 * scale * float(r.sum())
        return g

    def families(x):
        u = np.empty((d, n_envs + 1, lag))
        u[:, 0, :] = x[:D].reshape(d, lag)
        for k in range(n_envs):
            u[:, k + 1, :] = x[D * (1 + k): D * (2 + k)].reshape(d, lag)
        return u

    def write_back(x, u):
        out = x.copy()
        out[:D] = u[:, 0, :].ravel()
        for k in range(n_envs):
            out[D * (1 + k): D * (2 + k)] = u[:, k + 1, :].ravel()
        return out

    def prox(v, step):
        u = hierarchical_prox_batch(families(v), cfg.alpha * cfg.lam * step,
                                    (1.0 - cfg.alpha) * cfg.lam * step)
        return write_back(v, u)

    def penalty(x):
        return penalty_value(families(x), cfg.alpha, cfg.lam)

    return smooth, grad, prox, penalty


def fit_linear(data: MultiEnvDataset, cfg: FitConfig, *,
               standardize_data: bool = True,
               init_scale: float = 0.0) -> LinearParams:
    """Fit the shared-plus-delta autoregression by proximal gradient descent.

    A warmup phase holds every delta at zero so the shared matrix absorbs
    the structure common to all environments before the deltas are
    released; this also pins down the shared/delta split that the data
    alone cannot (only their sum enters the loss).  Non-convergence within
    the budget returns the best iterate with ``converged=False``.
    """
    if standardize_data:
        data = standardize(data)
    data.require_lag(cfg.lag)
    designs, targets = build_designs(data, cfg.lag)
    d, n_envs, D = data.d, data.n_envs, data.d * cfg.lag
    size = D * (1 + n_envs) + n_envs
    rng = np.random.default_rng(cfg.seed)

    W0 = np.zeros((d, D))
    deltas = np.zeros((n_envs, d, D))
    intercepts = np.zeros((n_envs, d))
    traces = []
    all_converged = True
    for i in range(d):
        ys = [y[:, i] for y in targets]
        x0 = np.zeros(size)
        if init_scale > 0:
            x0 = init_scale * rng.standard_normal(size)
        trace_parts = []
        if cfg.effective_warmup > 0:
            smooth, grad, prox, penalty = _node_callbacks(
                designs, ys, d, cfg.lag, n_envs, cfg, freeze_deltas=True)
            warm = prox_gradient_loop(smooth, grad, prox,
                                      _zero_deltas(x0, D, n_envs),
                                      cfg.step_size, cfg.effective_warmup,
                                      cfg.tol, penalty)
            x0 = warm.params
            trace_parts.append(warm.trace)
        smooth, grad, prox, penalty = _node_callbacks(
            designs, ys, d, cfg.lag, n_envs, cfg, freeze_deltas=False)
        res = prox_gradient_loop(smooth, grad, prox, x0, cfg.step_size,
                                 cfg.max_iters, cfg.tol, penalty)
        trace_parts.append(res.trace[1:] if trace_parts else res.trace)
        traces.append(np.concatenate(trace_parts))
        all_converged = all_converged and res.converged
        W0[i] = res.params[:D]
        for k in range(n_envs):
            deltas[k, i] = res.params[D * (1 + k): D * (2 + k)]
            intercepts[k, i] = res.params[D * (1 + n_envs) + k]
    return LinearParams(W0=W0, deltas=tuple(deltas), intercepts=intercepts,
                        lag=cfg.lag, converged=all_converged,
                        traces=tuple(traces))


def _zero_deltas(x: np.ndarray, D: int, n_envs: int) -> np.ndarray:
    out = x.copy()
    out[D: D * (1 + n_envs)] = 0.0
    return out


def objective_value(params: LinearParams, data: MultiEnvDataset,
                    cfg: FitConfig, *, standardize_data: bool = True) -> float:
    """Composite objective of the fit, for diagnostics and tests."""
    if standardize_data:
        data = standardize(data)
    designs, targets = build_designs(data, cfg.lag)
    n_total = sum(Z.shape[0] for Z in designs)
    total = 0.0
    for k, (Z, Y) in enumerate(zip(designs, targets)):
        R = Z @ (params.W0 + params.deltas[k]).T + params.intercepts[k] - Y
        total += float((R * R).sum())
    total /= n_total
    d = params.d
    u = np.empty((d, d, params.n_envs + 1, params.lag))
    u[:, :, 0, :] = params.W0.reshape(d, d, params.lag)
    for k in range(params.n_envs):
        u[:, :, k + 1, :] = params.deltas[k].reshape(d, d, params.lag)
    return total + penalty_value(u, cfg.alpha, cfg.lam)


def causal_group_norms(params: LinearParams) -> np.ndarray:
    d = params.d
    return np.linalg.norm(params.W0.reshape(d, d, params.lag), axis=2)


def delta_group_norms(params: LinearParams) -> np.ndarray:
    d = params.d
    return np.stack([
        np.linalg.norm(dk.reshape(d, d, params.lag), axis=2)
        for dk in params.deltas
    ])


def extract_linear_graph(params: LinearParams, cfg: FitConfig) -> tuple:
    """Threshold group norms into the causal graph and the target family."""
    scores = causal_group_norms(params)
    graph = GrangerGraph.from_scores(scores, cfg.edge_threshold)
    delta_norms = delta_group_norms(params)
    family = InterventionalFamily(
        targets=tuple((dn > cfg.target_threshold).astype(np.int8)
                      for dn in delta_norms))
    return graph, family


# ---------------------------------------------------------------------------
# checkpoint I/O


def save_linear_params(params: LinearParams, out_dir: str | Path,
                       cfg: FitConfig | None = None) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_matrix_csv(out_dir / "W0.csv", params.W0)
    for k, dk in enumerate(params.deltas):
        save_matrix_csv(out_dir / f"delta_env{k}.csv", dk)
    save_matrix_csv(out_dir / "intercepts.csv", params.intercepts)
    manifest = {
        "model": "linear",
        "d": params.d,
        "n_envs": params.n_envs,
        "lag": params.lag,
        "converged": params.converged,
    }
    if cfg is not None:
        manifest.update({
            "edge_threshold": cfg.edge_threshold,
            "target_threshold": cfg.target_threshold,
            "lam": cfg.lam,
            "alpha": cfg.alpha,
            "seed": cfg.seed,
        })
    (out_dir / "checkpoint.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_linear_params(in_dir: str | Path) -> LinearParams:
    in_dir = Path(in_dir)
    manifest_path = in_dir / "checkpoint.json"
    if not manifest_path.exists():
        raise DataError(f"missing checkpoint manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("model") != "linear":
        raise DataError(f"{in_dir} is not a linear checkpoint")
    W0 = load_matrix_csv(in_dir / "W0.csv")
    deltas = []
    for k in range(int(manifest["n_envs"])):
        path = in_dir / f"delta_env{k}.csv"
        if not path.exists():
            raise DataError(
                f"checkpoint {in_dir} lacks the per-environment deltas "
                f"(missing {path.name}); it cannot support target recovery"
            )
        deltas.append(load_matrix_csv(path))
    intercepts = load_matrix_csv(in_dir / "intercepts.csv")
    if intercepts.ndim == 1:
        intercepts = intercepts.reshape(len(deltas), -1)
    return LinearParams(W0=W0, deltas=tuple(deltas), intercepts=intercepts,
                        lag=int(manifest["lag"]),
                        converged=bool(manifest.get("converged", True)))
