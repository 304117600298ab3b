"""Ground-truth-annotated interventional time series generators.

Three families:

* linear: order-1 autoregression on a random graph with self-loops;
  interventions add per-edge weight deltas to the incoming edges of the
  chosen target nodes from a fixed onset step onward.
* nonlinear: each node's next value comes from a small leaky-rectifier
  network applied to its parent vector; interventions add a random vector
  to the network's second layer.
* Lorenz-96: the cyclic forced system integrated with fixed-step RK4; an
  intervention raises the forcing constant midway through the series.

All generators are pure functions of their config (the seed included), so
identical configs reproduce identical outputs byte for byte.  Other scalar
function families (tanh, sinc, cubic) are a documented extension point,
not implemented.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .datatypes import (
    ConfigError,
    DataError,
    GrangerGraph,
    InterventionalFamily,
    MultiEnvDataset,
)

SPECTRAL_LIMIT = 0.95
REDRAW_TRIES = 50
DIVERGENCE_GUARD = 1e8


@dataclass(frozen=True)
class LinearGenConfig:
    n_nodes: int = 5
    edge_prob: float = 0.4
    n_envs: int = 5
    T: int = 500
    weight_low: float = 0.4
    weight_high: float = 0.6
    interv_low: float = 0.0
    interv_high: float = 0.15
    interv_time: int = 200
    noise_scale: float = 1.0
    seed: int = 0
    targets_per_env: int = 1
    n_intervened: int | None = None  # None: every environment except the first
    self_loops: bool = True
    distinct_targets: bool = False  # no node targeted by two environments
    noise_dist: str = "normal"      # "normal" or "uniform" (U(-0.5, 0.5))

    def __post_init__(self):
        if not (0.0 <= self.edge_prob <= 1.0):
            raise ConfigError("edge_prob must lie in [0, 1]")
        if self.n_nodes < 1 or self.n_envs < 1 or self.T < 3:
            raise ConfigError("need n_nodes >= 1, n_envs >= 1, T >= 3")
        if not (0 < self.weight_low <= self.weight_high):
            raise ConfigError("weight band must satisfy 0 < low <= high")
        if not (0 <= self.interv_low <= self.interv_high) or self.interv_high <= 0:
            raise ConfigError("intervention band must satisfy 0 <= low <= high, high > 0")
        if self.interv_time <= 0:
            raise ConfigError("interv_time must be positive")
        if self.intervened_envs() and not self.interv_time < self.T:
            raise ConfigError("interv_time must lie strictly inside (0, T)")
        if self.targets_per_env < 0 or self.targets_per_env > self.n_nodes:
            raise ConfigError("targets_per_env must lie in [0, n_nodes]")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be non-negative")
        if self.noise_dist not in ("normal", "uniform"):
            raise ConfigError("noise_dist must be 'normal' or 'uniform'")

    def intervened_envs(self) -> tuple:
        n = self.n_envs - 1 if self.n_intervened is None else self.n_intervened
        if n < 0 or n >= self.n_envs + 1 or n > self.n_envs:
            raise ConfigError("n_intervened must lie in [0, n_envs]")
        n = min(n, self.n_envs)
        return tuple(range(self.n_envs - n, self.n_envs))


@dataclass(frozen=True)
class NonlinearGenConfig(LinearGenConfig):
    leaky_slope: float = 0.1
    layers: int = 2
    hidden_width: int = 10

    def __post_init__(self):
        super().__post_init__()
        if self.layers != 2:
            raise ConfigError("only 2-layer generation networks are supported")
        if self.hidden_width < 1:
            raise ConfigError("hidden_width must be at least 1")


@dataclass(frozen=True)
class LorenzConfig:
    m: int = 20
    T: int = 500
    F_base: float = 40.0
    F_interv: float = 50.0
    switch_time: int = 250
    dt: float = 0.01
    subsample: int = 5
    noise_scale: float = 0.0
    seed: int = 0
    burn_in: int = 1000  # integration steps discarded before recording
    split_at_switch: bool = False

    def __post_init__(self):
        if self.m < 4:
            raise ConfigError("the cyclic system needs at least 4 variables")
        if self.T < 3 or not (0 < self.switch_time < self.T):
            raise ConfigError("need T >= 3 and 0 < switch_time < T")
        if self.dt <= 0 or self.subsample < 1 or self.burn_in < 0:
            raise ConfigError("dt > 0, subsample >= 1, burn_in >= 0 required")


# ---------------------------------------------------------------------------
# shared graph machinery


@dataclass(frozen=True)
class LinearMechanism:
    adjacency: np.ndarray       # d x d support, entry (i, j): j drives i
    W: np.ndarray               # d x d base weights, zero off the support
    deltas: tuple               # per-environment d x d additive shifts
    targets: tuple              # per-environment d x d 0/1 intervened-edge masks
    intervened_envs: tuple


@dataclass(frozen=True)
class NodeNet:
    """One node's generation network: v -> w2 @ leaky(W1 @ v + b1) + b2."""

    parents: tuple
    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    slope: float

    def response(self, v: np.ndarray) -> float:
        z = self.W1 @ v + self.b1 if len(self.parents) else self.b1
        return float(self.w2 @ _leaky(z, self.slope) + self.b2)


@dataclass(frozen=True)
class NonlinearMechanism:
    adjacency: np.ndarray
    nets: tuple                 # d NodeNets
    shifts: dict                # (env, node) -> second-layer shift vector
    targets: tuple
    intervened_envs: tuple


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z >= 0, z, slope * z)


def _sample_adjacency(cfg: LinearGenConfig, rng: np.random.Generator) -> np.ndarray:
    d = cfg.n_nodes
    adj = (rng.random((d, d)) < cfg.edge_prob).astype(np.int8)
    np.fill_diagonal(adj, 1 if cfg.self_loops else 0)
    return adj


def _band_sample(rng: np.random.Generator, low: float, high: float,
                 size) -> np.ndarray:
    """Magnitudes uniform on (low, high], random sign; exact zeros resampled."""
    mag = rng.uniform(low, high, size=size)
    while np.any(mag == 0.0):
        mag = np.where(mag == 0.0, rng.uniform(low, high, size=size), mag)
    sign = rng.choice((-1.0, 1.0), size=size)
    return mag * sign


def _spectral_radius(W: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(W))))


def _noise(cfg: LinearGenConfig, rng: np.random.Generator, shape) -> np.ndarray:
    if cfg.noise_dist == "uniform":
        return cfg.noise_scale * rng.uniform(-0.5, 0.5, size=shape)
    return cfg.noise_scale * rng.standard_normal(shape)


def _pick_targets(cfg: LinearGenConfig, rng: np.random.Generator,
                  adjacency: np.ndarray) -> dict:
    """Choose target nodes per intervened environment.

    With distinct_targets no node is targeted by two environments (requires
    enough nodes to go around).
    """
    envs = cfg.intervened_envs()
    chosen = {}
    if cfg.distinct_targets:
        need = len(envs) * cfg.targets_per_env
        if need > cfg.n_nodes:
            raise ConfigError(
                f"distinct_targets needs {need} target slots but only "
                f"{cfg.n_nodes} nodes exist"
            )
        pool = rng.permutation(cfg.n_nodes)[:need]
        for idx, k in enumerate(envs):
            nodes = pool[idx * cfg.targets_per_env:(idx + 1) * cfg.targets_per_env]
            chosen[k] = tuple(int(i) for i in np.sort(nodes))
    else:
        for k in envs:
            nodes = rng.choice(cfg.n_nodes, size=cfg.targets_per_env,
                               replace=False)
            chosen[k] = tuple(int(i) for i in np.sort(nodes))
    return chosen


# ---------------------------------------------------------------------------
# linear family


def sample_linear_mechanism(cfg: LinearGenConfig,
                            rng: np.random.Generator) -> LinearMechanism:
    d = cfg.n_nodes
    adjacency = _sample_adjacency(cfg, rng)
    W = None
    for _ in range(REDRAW_TRIES):
        cand = _band_sample(rng, cfg.weight_low, cfg.weight_high, (d, d)) * adjacency
        if _spectral_radius(cand) < SPECTRAL_LIMIT - cfg.interv_high:
            W = cand
            break
    if W is None:
        # The weight band cannot give a stable system at this density (typical
        # beyond ~8 nodes); keep the support and shrink uniformly instead.
        rho = _spectral_radius(cand)
        W = cand * ((SPECTRAL_LIMIT - cfg.interv_high - 0.05) / rho)
    chosen = _pick_targets(cfg, rng, adjacency)
    deltas, targets = [], []
    for k in range(cfg.n_envs):
        delta = np.zeros((d, d))
        mask = np.zeros((d, d), dtype=np.int8)
        if k in chosen:
            for _ in range(REDRAW_TRIES):
                delta[:] = 0.0
                mask[:] = 0
                for i in chosen[k]:
                    parents = np.flatnonzero(adjacency[i])
                    if parents.size == 0:
                        continue
                    delta[i, parents] = _band_sample(
                        rng, cfg.interv_low, cfg.interv_high, parents.size)
                    mask[i, parents] = 1
                if _spectral_radius(W + delta) < SPECTRAL_LIMIT:
                    break
            else:
                raise DataError(
                    f"could not keep environment {k} stable after intervention; "
                    "reduce interv_high or edge_prob"
                )
        deltas.append(delta)
        targets.append(mask)
    return LinearMechanism(adjacency=adjacency, W=W, deltas=tuple(deltas),
                           targets=tuple(targets),
                           intervened_envs=cfg.intervened_envs())


def simulate_linear(mech: LinearMechanism, cfg: LinearGenConfig,
                    rng: np.random.Generator) -> list:
    envs = []
    for k in range(cfg.n_envs):
        x = np.empty((cfg.T, cfg.n_nodes))
        x[0] = rng.standard_normal(cfg.n_nodes)
        noise = _noise(cfg, rng, (cfg.T - 1, cfg.n_nodes))
        W_post = mech.W + mech.deltas[k]
        for t in range(1, cfg.T):
            W_t = W_post if t >= cfg.interv_time else mech.W
            x[t] = W_t @ x[t - 1] + noise[t - 1]
        if np.max(np.abs(x)) > DIVERGENCE_GUARD:
            raise DataError(f"environment {k} diverged during simulation")
        envs.append(x)
    return envs


def gen_linear_detailed(cfg: LinearGenConfig):
    rng = np.random.default_rng(cfg.seed)
    mech = sample_linear_mechanism(cfg, rng)
    envs = simulate_linear(mech, cfg, rng)
    data = MultiEnvDataset(environments=tuple(envs), d=cfg.n_nodes)
    graph = GrangerGraph(adjacency=mech.adjacency)
    family = InterventionalFamily(targets=mech.targets)
    return data, graph, family, mech


def gen_linear(cfg: LinearGenConfig):
    """Linear interventional series; returns (dataset, truth graph, targets)."""
    return gen_linear_detailed(cfg)[:3]


# ---------------------------------------------------------------------------
# nonlinear family


def sample_nonlinear_mechanism(cfg: NonlinearGenConfig,
                               rng: np.random.Generator) -> NonlinearMechanism:
    d, H = cfg.n_nodes, cfg.hidden_width
    adjacency = _sample_adjacency(cfg, rng)
    nets = []
    for i in range(d):
        parents = tuple(int(j) for j in np.flatnonzero(adjacency[i]))
        W1 = _band_sample(rng, cfg.weight_low, cfg.weight_high, (H, len(parents)))
        b1 = _band_sample(rng, cfg.weight_low, cfg.weight_high, H)
        w2 = _band_sample(rng, cfg.weight_low, cfg.weight_high, H)
        b2 = float(_band_sample(rng, cfg.weight_low, cfg.weight_high, ()))
        nets.append(NodeNet(parents=parents, W1=W1, b1=b1, w2=w2, b2=b2,
                            slope=cfg.leaky_slope))
    chosen = _pick_targets(cfg, rng, adjacency)
    shifts = {}
    targets = []
    for k in range(cfg.n_envs):
        mask = np.zeros((d, d), dtype=np.int8)
        if k in chosen:
            for i in chosen[k]:
                shifts[(k, i)] = rng.standard_normal(H)
                parents = np.flatnonzero(adjacency[i])
                mask[i, parents] = 1
        targets.append(mask)
    return NonlinearMechanism(adjacency=adjacency, nets=tuple(nets),
                              shifts=shifts, targets=tuple(targets),
                              intervened_envs=cfg.intervened_envs())


def _nonlinear_step(nets: Sequence[NodeNet], x_prev: np.ndarray,
                    shifted: dict) -> np.ndarray:
    out = np.empty(len(nets))
    for i, net in enumerate(nets):
        v = x_prev[list(net.parents)]
        z = net.W1 @ v + net.b1 if net.parents else net.b1
        w2 = shifted.get(i, net.w2)
        out[i] = w2 @ _leaky(z, net.slope) + net.b2
    return out


def simulate_nonlinear(mech: NonlinearMechanism, cfg: NonlinearGenConfig,
                       rng: np.random.Generator,
                       guard: float = DIVERGENCE_GUARD) -> list:
    envs = []
    for k in range(cfg.n_envs):
        shifted = {i: mech.nets[i].w2 + mech.shifts[(k, i)]
                   for (env, i) in mech.shifts if env == k}
        x = np.empty((cfg.T, cfg.n_nodes))
        x[0] = rng.standard_normal(cfg.n_nodes)
        noise = _noise(cfg, rng, (cfg.T - 1, cfg.n_nodes))
        for t in range(1, cfg.T):
            active = shifted if t >= cfg.interv_time else {}
            x[t] = _nonlinear_step(mech.nets, x[t - 1], active) + noise[t - 1]
            if np.max(np.abs(x[t])) > guard:
                raise DataError(f"environment {k} diverged during simulation")
        envs.append(x)
    return envs


# Trajectories the generator accepts must stay inside this band; plain
# band-sampled networks often have feedback gain above one, so second
# layers are shrunk geometrically until the simulated system holds.
STABLE_BOUND = 100.0
SHRINK_FACTOR = 0.8
SHRINK_STEPS = 14


def _scaled_mechanism(mech: NonlinearMechanism, factor: float) -> NonlinearMechanism:
    nets = tuple(
        NodeNet(parents=net.parents, W1=net.W1, b1=net.b1,
                w2=net.w2 * factor, b2=net.b2, slope=net.slope)
        for net in mech.nets
    )
    shifts = {key: vec * factor for key, vec in mech.shifts.items()}
    return NonlinearMechanism(adjacency=mech.adjacency, nets=nets,
                              shifts=shifts, targets=mech.targets,
                              intervened_envs=mech.intervened_envs)


def gen_nonlinear_detailed(cfg: NonlinearGenConfig):
    rng = np.random.default_rng(cfg.seed)
    last_err = None
    for _ in range(REDRAW_TRIES):
        mech = sample_nonlinear_mechanism(cfg, rng)
        for step in range(SHRINK_STEPS):
            scaled = _scaled_mechanism(mech, SHRINK_FACTOR ** step)
            try:
                envs = simulate_nonlinear(scaled, cfg, rng, guard=STABLE_BOUND)
            except DataError as exc:
                last_err = exc
                continue
            data = MultiEnvDataset(environments=tuple(envs), d=cfg.n_nodes)
            graph = GrangerGraph(adjacency=scaled.adjacency)
            family = InterventionalFamily(targets=scaled.targets)
            return data, graph, family, scaled
    raise DataError(f"nonlinear generation kept diverging: {last_err}")


def gen_nonlinear(cfg: NonlinearGenConfig):
    """Network-generated interventional series; returns (dataset, graph, targets)."""
    return gen_nonlinear_detailed(cfg)[:3]


# ---------------------------------------------------------------------------
# Lorenz-96


def lorenz_derivative(x: np.ndarray, F: float) -> np.ndarray:
    """Right-hand side (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F with cyclic indices."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 4:
        raise DataError("state must be a vector with at least 4 components")
    return (np.roll(x, -1) - np.roll(x, 2)) * np.roll(x, 1) - x + F


def rk4_step(x: np.ndarray, dt: float, F: float) -> np.ndarray:
    k1 = lorenz_derivative(x, F)
    k2 = lorenz_derivative(x + 0.5 * dt * k1, F)
    k3 = lorenz_derivative(x + 0.5 * dt * k2, F)
    k4 = lorenz_derivative(x + dt * k3, F)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def lorenz_stencil(m: int) -> np.ndarray:
    """Ground truth adjacency: node i is driven by i-2, i-1, i, i+1 (mod m)."""
    adj = np.zeros((m, m), dtype=np.int8)
    for i in range(m):
        for j in (i - 2, i - 1, i, i + 1):
            adj[i, j % m] = 1
    return adj


def gen_lorenz(cfg: LorenzConfig):
    """Integrate the forced cyclic system; the forcing constant switches from
    F_base to F_interv for recorded samples past switch_time.

    Returns (dataset, truth graph, targets).  The dataset has a single
    environment unless split_at_switch is set, in which case the recorded
    series is split into a pre-switch and a post-switch environment.  The
    forcing change alters every node's mechanism, so the target annotation
    marks all existing incoming edges.
    """
    rng = np.random.default_rng(cfg.seed)
    x = np.full(cfg.m, cfg.F_base) + 0.01 * rng.standard_normal(cfg.m)
    for _ in range(cfg.burn_in):
        x = rk4_step(x, cfg.dt, cfg.F_base)
        _guard_state(x, cfg.dt)
    recorded = np.empty((cfg.T, cfg.m))
    recorded[0] = x
    for rec in range(1, cfg.T):
        F = cfg.F_interv if rec >= cfg.switch_time else cfg.F_base
        for _ in range(cfg.subsample):
            x = rk4_step(x, cfg.dt, F)
            _guard_state(x, cfg.dt)
        recorded[rec] = x
    if cfg.noise_scale > 0:
        recorded = recorded + cfg.noise_scale * rng.standard_normal(recorded.shape)
    adjacency = lorenz_stencil(cfg.m)
    if cfg.split_at_switch:
        envs = (recorded[:cfg.switch_time], recorded[cfg.switch_time:])
        targets = (np.zeros((cfg.m, cfg.m), dtype=np.int8), adjacency.copy())
    else:
        envs = (recorded,)
        targets = (adjacency.copy(),)
    data = MultiEnvDataset(environments=envs, d=cfg.m)
    return data, GrangerGraph(adjacency=adjacency), InterventionalFamily(targets=targets)


def _guard_state(x: np.ndarray, dt: float) -> None:
    if np.max(np.abs(x)) > 1e6:
        raise DataError(
            f"integration blew up (|x| > 1e6); use a smaller dt than {dt}"
        )
