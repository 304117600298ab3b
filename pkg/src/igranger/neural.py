"""Per-node neural estimator with hand-written forward and reverse passes.

For each effect node i the prediction in environment k is

    P_i( C_i(window) + I_{k,i}(window) )

where C_i is a causal component shared by all environments, I_{k,i} is the
environment's intervention component (initialised so it contributes
nothing), both map the flattened lag window to an h-vector through two
leaky-rectifier layers, the two h-vectors are aggregated by summation, and
P_i is a dense head producing the next-step scalar.

Only the first-layer weights are penalized: the rows belonging to source
series j form the coefficient group for the pair (i, j), with the shared
block and the per-environment blocks coupled by the two-level penalty from
:mod:`igranger.prox`.  A causal block that survives the penalty is an edge
j -> i; an environment block that survives marks that edge as intervened
in that environment.
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
from .linear import build_designs
from .prox import hierarchical_prox_batch, penalty_value, prox_gradient_loop


def leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z >= 0, z, slope * z)


def dleaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z >= 0, 1.0, slope)


@dataclass(frozen=True)
class NodeLayout:
    """Offsets into one node's flat parameter vector.

    Components are stored as [causal | env 0 | ... | env n-1 | predictor];
    a component is [W1 (D x h) | b1 (h) | W2 (h x h) | b2 (h)] with
    D = d * lag input features ordered source-major, so the penalized block
    of source j is the contiguous run of W1 rows j*lag .. (j+1)*lag - 1.
    """

    d: int
    n_envs: int
    lag: int
    h: int

    @property
    def D(self) -> int:
        return self.d * self.lag

    @property
    def comp_size(self) -> int:
        return self.D * self.h + self.h + self.h * self.h + self.h

    @property
    def size(self) -> int:
        return self.comp_size * (1 + self.n_envs) + self.h + 1

    def comp_offset(self, index: int) -> int:
        """0 is the causal component, 1 + k is environment k."""
        return self.comp_size * index

    def comp_views(self, x: np.ndarray, index: int) -> tuple:
        o, D, h = self.comp_offset(index), self.D, self.h
        W1 = x[o: o + D * h].reshape(D, h)
        b1 = x[o + D * h: o + D * h + h]
        W2 = x[o + D * h + h: o + D * h + h + h * h].reshape(h, h)
        b2 = x[o + D * h + h + h * h: o + self.comp_size]
        return W1, b1, W2, b2

    def predictor_views(self, x: np.ndarray) -> tuple:
        o = self.comp_size * (1 + self.n_envs)
        return x[o: o + self.h], x[o + self.h: o + self.h + 1]

    def env_block(self) -> slice:
        """Slice covering every environment component (for warmup freezing)."""
        return slice(self.comp_size, self.comp_size * (1 + self.n_envs))

    def family_tensor(self, x: np.ndarray) -> np.ndarray:
        """Penalized blocks as (d, n_envs + 1, lag * h), index 0 shared."""
        u = np.empty((self.d, self.n_envs + 1, self.lag * self.h))
        span = self.lag * self.h
        for c in range(self.n_envs + 1):
            o = self.comp_offset(c)
            for j in range(self.d):
                u[j, c, :] = x[o + j * span: o + (j + 1) * span]
        return u

    def write_family(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        out = x.copy()
        span = self.lag * self.h
        for c in range(self.n_envs + 1):
            o = self.comp_offset(c)
            for j in range(self.d):
                out[o + j * span: o + (j + 1) * span] = u[j, c, :]
        return out


@dataclass(frozen=True)
class NeuralGrangerModel:
    """Fitted per-node networks plus the config they were fitted with."""

    params: tuple              # d flat parameter vectors
    layout: NodeLayout
    cfg: FitConfig
    negative_slope: float = 0.1
    converged: bool = True
    traces: tuple = ()

    def __post_init__(self):
        frozen = []
        for p in self.params:
            arr = np.asarray(p, dtype=float)
            if arr.shape != (self.layout.size,):
                raise DataError("parameter vector does not match the layout")
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "params", tuple(frozen))

    @property
    def d(self) -> int:
        return self.layout.d

    @property
    def n_envs(self) -> int:
        return self.layout.n_envs


@dataclass(frozen=True)
class ForwardTape:
    """Cached activations from one forward evaluation."""

    node: int
    env: int
    params: np.ndarray
    feats: np.ndarray
    z1c: np.ndarray
    a1c: np.ndarray
    z2c: np.ndarray
    out_c: np.ndarray
    z1g: np.ndarray
    a1g: np.ndarray
    z2g: np.ndarray
    out_g: np.ndarray
    agg: np.ndarray
    prediction: float


def window_features(window: np.ndarray, lag: int, d: int) -> np.ndarray:
    """Flatten a lag x d window (rows oldest to newest) into the source-major
    feature order: feature j*lag + q holds the value of series j at offset
    t - (q + 1)."""
    window = np.asarray(window, dtype=float)
    if window.shape != (lag, d):
        raise DataError(f"window must be lag x d = {(lag, d)}, got {window.shape}")
    return window[::-1].T.ravel()


def _component_forward(feats, W1, b1, W2, b2, slope):
    z1 = feats @ W1 + b1
    a1 = leaky(z1, slope)
    z2 = a1 @ W2 + b2
    return z1, a1, z2, leaky(z2, slope)


def forward(model: NeuralGrangerModel, window: np.ndarray, env: int,
            node: int) -> tuple:
    """Predict the next value of ``node`` in ``env`` from a lag x d window.

    Returns (prediction, tape); the tape feeds :func:`backward`.
    """
    lay = model.layout
    if not (0 <= node < lay.d):
        raise DataError(f"node index {node} out of range [0, {lay.d})")
    if not (0 <= env < lay.n_envs):
        raise DataError(f"environment index {env} out of range [0, {lay.n_envs})")
    x = model.params[node]
    feats = window_features(window, lay.lag, lay.d)
    s = model.negative_slope
    z1c, a1c, z2c, out_c = _component_forward(feats, *lay.comp_views(x, 0), s)
    z1g, a1g, z2g, out_g = _component_forward(feats, *lay.comp_views(x, 1 + env), s)
    agg = out_c + out_g
    wp, bp = lay.predictor_views(x)
    pred = float(agg @ wp + bp[0])
    return pred, ForwardTape(node=node, env=env, params=x, feats=feats,
                             z1c=z1c, a1c=a1c, z2c=z2c, out_c=out_c,
                             z1g=z1g, a1g=a1g, z2g=z2g, out_g=out_g,
                             agg=agg, prediction=pred)


def backward(model: NeuralGrangerModel, tape: ForwardTape,
             residual: float) -> np.ndarray:
    """Gradient of 0.5 * residual**2 with respect to the node's parameters.

    ``residual`` is prediction minus target.  The returned vector follows
    the node's flat layout; components of environments other than the
    tape's are zero.
    """
    lay = model.layout
    x = model.params[tape.node]
    if tape.params is not x:
        raise DataError(
            "stale tape: it was recorded from a different model or parameter "
            "state than the one passed to backward"
        )
    s = model.negative_slope
    g = np.zeros(lay.size)
    wp, _ = lay.predictor_views(x)
    gwp, gbp = lay.predictor_views(g)
    gwp += residual * tape.agg
    gbp += residual
    dagg = residual * wp
    _component_backward(g, lay, 0, x, tape.feats, tape.z1c, tape.a1c,
                        tape.z2c, dagg, s)
    _component_backward(g, lay, 1 + tape.env, x, tape.feats, tape.z1g,
                        tape.a1g, tape.z2g, dagg, s)
    return g


def _component_backward(g, lay, index, x, feats, z1, a1, z2, dout, slope):
    _, _, W2, _ = lay.comp_views(x, index)
    gW1, gb1, gW2, gb2 = lay.comp_views(g, index)
    dz2 = dout * dleaky(z2, slope)
    gW2 += np.outer(a1, dz2)
    gb2 += dz2
    da1 = dz2 @ W2.T
    dz1 = da1 * dleaky(z1, slope)
    gW1 += np.outer(feats, dz1)
    gb1 += dz1


# ---------------------------------------------------------------------------
# fitting


def _init_node(lay: NodeLayout, rng: np.random.Generator) -> np.ndarray:
    """Causal and predictor weights uniform in [-0.1, 0.1]; intervention
    first-layer weights exactly zero so each environment starts as
    non-intervened and must earn its blocks against the penalty.

    Intervention first-layer biases (unpenalized) get small nonzero values:
    with the weights at zero every pre-activation would otherwise sit
    exactly on the rectifier kink, where the gradient misleads the line
    search.  A nonzero bias only shifts the component by a constant.
    """
    x = np.zeros(lay.size)
    W1, b1, W2, b2 = lay.comp_views(x, 0)
    W1[:] = rng.uniform(-0.1, 0.1, W1.shape)
    W2[:] = rng.uniform(-0.1, 0.1, W2.shape)
    for k in range(lay.n_envs):
        _, b1g, W2g, _ = lay.comp_views(x, 1 + k)
        b1g[:] = rng.uniform(-0.1, 0.1, b1g.shape)
        W2g[:] = rng.uniform(-0.1, 0.1, W2g.shape)
    wp, _ = lay.predictor_views(x)
    wp[:] = rng.uniform(-0.1, 0.1, wp.shape)
    return x


def _node_callbacks(designs, ys, lay: NodeLayout, cfg: FitConfig,
                    slope: float, freeze_envs: bool):
    n_total = sum(A.shape[0] for A in designs)
    scale = 1.0 / n_total
    env_block = lay.env_block()

    def batch_forward(x, k, A):
        z1c, a1c, z2c, oc = _component_forward(A, *lay.comp_views(x, 0), slope)
        z1g, a1g, z2g, og = _component_forward(A, *lay.comp_views(x, 1 + k), slope)
        agg = oc + og
        wp, bp = lay.predictor_views(x)
        pred = agg @ wp + bp[0]
        return pred, (z1c, a1c, z2c, z1g, a1g, z2g, agg)

    def smooth(x):
        total = 0.0
        for k, A in enumerate(designs):
            pred, _ = batch_forward(x, k, A)
            r = pred - ys[k]
            total += float(r @ r)
        return scale * total

    def grad(x):
        g = np.zeros(lay.size)
        wp, _ = lay.predictor_views(x)
        gwp, gbp = lay.predictor_views(g)
        for k, A in enumerate(designs):
            pred, act = batch_forward(x, k, A)
            z1c, a1c, z2c, z1g, a1g, z2g, agg = act
            dpred = (2.0 * scale) * (pred - ys[k])
            gwp += agg.T @ dpred
            gbp += dpred.sum()
            dagg = np.outer(dpred, wp)
            _batch_component_backward(g, lay, 0, x, A, z1c, a1c, z2c, dagg, slope)
            _batch_component_backward(g, lay, 1 + k, x, A, z1g, a1g, z2g, dagg,
                                      slope)
        if freeze_envs:
            g[env_block] = 0.0
        return g

    def prox(v, step):
        u = hierarchical_prox_batch(lay.family_tensor(v),
                                    cfg.alpha * cfg.lam * step,
                                    (1.0 - cfg.alpha) * cfg.lam * step)
        return lay.write_family(v, u)

    def penalty(x):
        return penalty_value(lay.family_tensor(x), cfg.alpha, cfg.lam)

    return smooth, grad, prox, penalty


def _batch_component_backward(g, lay, index, x, A, z1, a1, z2, dout, slope):
    _, _, W2, _ = lay.comp_views(x, index)
    gW1, gb1, gW2, gb2 = lay.comp_views(g, index)
    dz2 = dout * dleaky(z2, slope)
    gW2 += a1.T @ dz2
    gb2 += dz2.sum(axis=0)
    da1 = dz2 @ W2.T
    dz1 = da1 * dleaky(z1, slope)
    gW1 += A.T @ dz1
    gb1 += dz1.sum(axis=0)


def fit_igc(data: MultiEnvDataset, cfg: FitConfig, *,
            standardize_data: bool = True,
            negative_slope: float = 0.1) -> NeuralGrangerModel:
    """Fit the per-node networks by proximal gradient descent.

    The d per-node subproblems are independent and solved one after the
    other.  Each runs an optional warmup with every intervention component
    frozen at its zero initialisation (the shared component absorbs what is
    common), then releases them under the full two-level penalty.
    """
    if standardize_data:
        data = standardize(data)
    data.require_lag(cfg.lag)
    designs, targets = build_designs(data, cfg.lag)
    lay = NodeLayout(d=data.d, n_envs=data.n_envs, lag=cfg.lag, h=cfg.hidden)
    rng = np.random.default_rng(cfg.seed)
    params, traces = [], []
    all_converged = True
    for i in range(data.d):
        ys = [y[:, i] for y in targets]
        x0 = _init_node(lay, rng)
        trace_parts = []
        if cfg.effective_warmup > 0:
            smooth, grad, prox, penalty = _node_callbacks(
                designs, ys, lay, cfg, negative_slope, freeze_envs=True)
            warm = prox_gradient_loop(smooth, grad, prox, x0, cfg.step_size,
                                      cfg.effective_warmup, cfg.tol, penalty)
            x0 = warm.params
            trace_parts.append(warm.trace)
        smooth, grad, prox, penalty = _node_callbacks(
            designs, ys, lay, cfg, negative_slope, freeze_envs=False)
        res = prox_gradient_loop(smooth, grad, prox, x0, cfg.step_size,
                                 cfg.max_iters, cfg.tol, penalty)
        trace_parts.append(res.trace[1:] if trace_parts else res.trace)
        traces.append(np.concatenate(trace_parts))
        all_converged = all_converged and res.converged
        params.append(res.params)
    return NeuralGrangerModel(params=tuple(params), layout=lay, cfg=cfg,
                              negative_slope=negative_slope,
                              converged=all_converged, traces=tuple(traces))


# ---------------------------------------------------------------------------
# structure extraction


def causal_score_matrix(model: NeuralGrangerModel) -> np.ndarray:
    """scores[i, j] = Euclidean norm of the shared first-layer block (i, j)."""
    lay = model.layout
    scores = np.empty((lay.d, lay.d))
    for i in range(lay.d):
        u = lay.family_tensor(model.params[i])
        scores[i] = np.linalg.norm(u[:, 0, :], axis=1)
    return scores


def intervention_score_matrices(model: NeuralGrangerModel) -> np.ndarray:
    """scores[k, i, j] = norm of environment k's first-layer block (i, j)."""
    lay = model.layout
    scores = np.empty((lay.n_envs, lay.d, lay.d))
    for i in range(lay.d):
        u = lay.family_tensor(model.params[i])
        for k in range(lay.n_envs):
            scores[k, i] = np.linalg.norm(u[:, 1 + k, :], axis=1)
    return scores


def lag_score_tensor(model: NeuralGrangerModel) -> np.ndarray:
    """Per-lag sub-norms of the shared blocks, shape (d, d, lag), so the
    pair (effect now, cause p steps back) can be scored at each offset p."""
    lay = model.layout
    out = np.empty((lay.d, lay.d, lay.lag))
    for i in range(lay.d):
        W1, _, _, _ = lay.comp_views(model.params[i], 0)
        blocks = W1.reshape(lay.d, lay.lag, lay.h)
        out[i] = np.linalg.norm(blocks, axis=2)
    return out


def extract_graph(model: NeuralGrangerModel,
                  cfg: FitConfig | None = None) -> GrangerGraph:
    cfg = cfg or model.cfg
    return GrangerGraph.from_scores(causal_score_matrix(model),
                                    cfg.edge_threshold)


def recover_targets(model: NeuralGrangerModel,
                    cfg: FitConfig | None = None) -> InterventionalFamily:
    cfg = cfg or model.cfg
    scores = intervention_score_matrices(model)
    return InterventionalFamily(
        targets=tuple((s > cfg.target_threshold).astype(np.int8)
                      for s in scores))


# ---------------------------------------------------------------------------
# checkpoint I/O


def save_model(model: NeuralGrangerModel, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lay = model.layout
    for i, x in enumerate(model.params):
        for c in range(1 + lay.n_envs):
            W1, b1, W2, b2 = lay.comp_views(x, c)
            tag = "causal" if c == 0 else f"env{c - 1}"
            save_matrix_csv(out_dir / f"node{i}_{tag}_in.csv",
                            np.vstack([W1, b1]))
            save_matrix_csv(out_dir / f"node{i}_{tag}_hidden.csv",
                            np.vstack([W2, b2]))
        wp, bp = lay.predictor_views(x)
        save_matrix_csv(out_dir / f"node{i}_predictor.csv",
                        np.concatenate([wp, bp])[:, None])
    manifest = {
        "model": "igc",
        "d": lay.d,
        "n_envs": lay.n_envs,
        "lag": lay.lag,
        "hidden": lay.h,
        "negative_slope": model.negative_slope,
        "converged": model.converged,
        "edge_threshold": model.cfg.edge_threshold,
        "target_threshold": model.cfg.target_threshold,
        "lam": model.cfg.lam,
        "alpha": model.cfg.alpha,
        "seed": model.cfg.seed,
    }
    (out_dir / "checkpoint.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_model(in_dir: str | Path) -> NeuralGrangerModel:
    in_dir = Path(in_dir)
    manifest_path = in_dir / "checkpoint.json"
    if not manifest_path.exists():
        raise DataError(f"missing checkpoint manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("model") != "igc":
        raise DataError(f"{in_dir} is not a neural checkpoint")
    lay = NodeLayout(d=int(manifest["d"]), n_envs=int(manifest["n_envs"]),
                     lag=int(manifest["lag"]), h=int(manifest["hidden"]))
    params = []
    for i in range(lay.d):
        x = np.zeros(lay.size)
        for c in range(1 + lay.n_envs):
            tag = "causal" if c == 0 else f"env{c - 1}"
            in_path = in_dir / f"node{i}_{tag}_in.csv"
            hid_path = in_dir / f"node{i}_{tag}_hidden.csv"
            if not in_path.exists() or not hid_path.exists():
                raise DataError(f"checkpoint {in_dir} lacks {in_path.name}")
            stacked_in = load_matrix_csv(in_path)
            stacked_hid = load_matrix_csv(hid_path)
            W1, b1, W2, b2 = lay.comp_views(x, c)
            W1[:] = stacked_in[:-1]
            b1[:] = stacked_in[-1]
            W2[:] = stacked_hid[:-1]
            b2[:] = stacked_hid[-1]
        head = load_matrix_csv(in_dir / f"node{i}_predictor.csv").ravel()
        wp, bp = lay.predictor_views(x)
        wp[:] = head[:-1]
        bp[:] = head[-1:]
        params.append(x)
    cfg = FitConfig(
        lam=float(manifest.get("lam", 0.1)),
        alpha=float(manifest.get("alpha", 0.5)),
        lag=lay.lag,
        hidden=lay.h,
        edge_threshold=float(manifest.get("edge_threshold", 1e-3)),
        target_threshold=float(manifest.get("target_threshold", 1e-3)),
        seed=int(manifest.get("seed", 0)),
    )
    return NeuralGrangerModel(params=tuple(params), layout=lay, cfg=cfg,
                              negative_slope=float(manifest["negative_slope"]),
                              converged=bool(manifest.get("converged", True)))
