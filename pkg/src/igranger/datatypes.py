"""Domain types shared across the package: multi-environment datasets,
causal graphs, intervention target families, and fit configuration.

Conventions fixed here and used everywhere else:

* ``adjacency[i][j] == 1`` means series j drives series i.  Self-loops are
  allowed and evaluated.
* Adjacency and target matrices serialize as d x d CSVs of 0/1 integers
  with row index = effect and column index = cause.
* A dataset manifest is a JSON object with fields ``d``,
  ``environments`` (list of CSV paths, relative to the manifest) and
  optional ``names``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Invalid input data: malformed files, shape mismatches, bad values."""


class ConfigError(ValueError):
    """Invalid configuration values."""


_FLOAT_FMT = "%.17g"


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MultiEnvDataset:
    """Per-environment series matrices, each T_k x d, sharing the same d."""

    environments: tuple
    d: int
    names: tuple | None = None

    def __post_init__(self):
        if len(self.environments) == 0:
            raise DataError("dataset needs at least one environment")
        envs = []
        for k, env in enumerate(self.environments):
            arr = np.asarray(env, dtype=float)
            if arr.ndim != 2:
                raise DataError(f"environment {k} is not a 2-D matrix")
            if arr.shape[1] != self.d:
                raise DataError(
                    f"environment {k} has {arr.shape[1]} columns, expected d={self.d}"
                )
            if arr.shape[0] < 3:
                raise DataError(
                    f"environment {k} has only {arr.shape[0]} rows; too short "
                    "to form a supervised prediction pair"
                )
            if not np.all(np.isfinite(arr)):
                r, c = np.argwhere(~np.isfinite(arr))[0]
                raise DataError(
                    f"environment {k} contains a non-finite value at row {r}, column {c}"
                )
            envs.append(_freeze(arr))
        object.__setattr__(self, "environments", tuple(envs))
        if self.names is not None:
            names = tuple(str(n) for n in self.names)
            if len(names) != self.d:
                raise DataError(f"expected {self.d} names, got {len(names)}")
            object.__setattr__(self, "names", names)

    @property
    def n_envs(self) -> int:
        return len(self.environments)

    @property
    def lengths(self) -> tuple:
        return tuple(env.shape[0] for env in self.environments)

    def require_lag(self, lag: int) -> None:
        """Check every environment supports at least two windows of this lag."""
        for k, T_k in enumerate(self.lengths):
            if T_k < lag + 2:
                raise DataError(
                    f"environment {k} has {T_k} rows, too short for lag {lag} "
                    f"(needs at least {lag + 2})"
                )


@dataclass(frozen=True)
class GrangerGraph:
    """Binary d x d adjacency, optionally with non-negative edge scores."""

    adjacency: np.ndarray
    scores: np.ndarray | None = None

    def __post_init__(self):
        adj = np.asarray(self.adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise DataError("adjacency must be a square matrix")
        if not np.isin(adj, (0, 1)).all():
            raise DataError("adjacency entries must be 0 or 1")
        object.__setattr__(self, "adjacency", _freeze(adj.astype(np.int8)))
        if self.scores is not None:
            sc = np.asarray(self.scores, dtype=float)
            if sc.shape != adj.shape:
                raise DataError("scores must match adjacency shape")
            if not np.all(np.isfinite(sc)) or (sc < 0).any():
                raise DataError("scores must be finite and non-negative")
            object.__setattr__(self, "scores", _freeze(sc))

    @property
    def d(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())

    @classmethod
    def from_scores(cls, scores: np.ndarray, threshold: float) -> "GrangerGraph":
        sc = np.asarray(scores, dtype=float)
        return cls(adjacency=(sc > threshold).astype(np.int8), scores=sc)


@dataclass(frozen=True)
class InterventionalFamily:
    """Per-environment d x d binary matrices of intervened edges.

    targets[k][i][j] == 1 iff the edge j -> i was intervened in environment
    k; an all-zero matrix marks a non-intervened environment.
    """

    targets: tuple

    def __post_init__(self):
        if len(self.targets) == 0:
            raise DataError("family needs at least one environment")
        mats = []
        d = None
        for k, t in enumerate(self.targets):
            arr = np.asarray(t)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise DataError(f"target matrix {k} must be square")
            if d is None:
                d = arr.shape[0]
            elif arr.shape[0] != d:
                raise DataError("target matrices must share one dimension")
            if not np.isin(arr, (0, 1)).all():
                raise DataError(f"target matrix {k} entries must be 0 or 1")
            mats.append(_freeze(arr.astype(np.int8)))
        object.__setattr__(self, "targets", tuple(mats))

    @property
    def n_envs(self) -> int:
        return len(self.targets)

    @property
    def d(self) -> int:
        return self.targets[0].shape[0]

    def is_intervened(self, k: int) -> bool:
        return bool(self.targets[k].any())


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameters shared by the linear and neural estimators.

    lam weights the whole penalty; alpha in (0, 1) splits it between the
    per-environment groups (alpha * lam) and the joint cross-environment
    group ((1 - alpha) * lam).  warmup_iters runs a first phase with the
    environment-specific parameters frozen at zero so the shared component
    absorbs the structure common to all environments; None means "same
    budget as max_iters", 0 disables the phase.
    """

    lam: float = 0.1
    alpha: float = 0.5
    lag: int = 1
    hidden: int = 16
    step_size: float = 1e-2
    max_iters: int = 500
    tol: float = 1e-8
    edge_threshold: float = 1e-3
    target_threshold: float = 1e-3
    seed: int = 0
    warmup_iters: int | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lam must be non-negative")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError("alpha must lie strictly inside (0, 1)")
        if self.lag < 1:
            raise ConfigError("lag must be at least 1")
        if self.hidden < 1:
            raise ConfigError("hidden width must be at least 1")
        if self.step_size <= 0:
            raise ConfigError("step_size must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if self.tol < 0:
            raise ConfigError("tol must be non-negative")
        if self.edge_threshold < 0 or self.target_threshold < 0:
            raise ConfigError("thresholds must be non-negative")
        if self.warmup_iters is not None and self.warmup_iters < 0:
            raise ConfigError("warmup_iters must be non-negative")

    @property
    def effective_warmup(self) -> int:
        return self.max_iters if self.warmup_iters is None else self.warmup_iters


def standardize(data: MultiEnvDataset) -> MultiEnvDataset:
    """Zero-mean, unit-variance per series within each environment.

    Uses the population variance; constant series map to all zeros.
    Idempotent up to floating point.
    """
    out = []
    for env in data.environments:
        mean = env.mean(axis=0)
        std = env.std(axis=0)
        scaled = np.where(std > 0, (env - mean) / np.where(std > 0, std, 1.0), 0.0)
        out.append(scaled)
    return MultiEnvDataset(environments=tuple(out), d=data.d, names=data.names)


# ---------------------------------------------------------------------------
# file I/O


def _read_csv_matrix(path: Path) -> tuple[np.ndarray, list | None]:
    """Read a numeric CSV with an optional single header row.

    Errors name the file, row and column of the offending cell.
    """
    if not path.exists():
        raise DataError(f"missing data file: {path}")
    rows: list[list[float]] = []
    header: list | None = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for r, cells in enumerate(reader):
            if not cells or all(c.strip() == "" for c in cells):
                continue
            parsed = []
            bad = None
            for c, cell in enumerate(cells):
                text = cell.strip()
                try:
                    value = float(text)
                except ValueError:
                    bad = c
                    break
                if not np.isfinite(value):
                    raise DataError(
                        f"non-finite value {text!r} in {path} at row {r + 1}, "
                        f"column {c + 1}"
                    )
                parsed.append(value)
            if bad is not None:
                if r == 0 and not rows:
                    header = [c.strip() for c in cells]
                    continue
                raise DataError(
                    f"non-numeric value {cells[bad].strip()!r} in {path} at "
                    f"row {r + 1}, column {bad + 1}"
                )
            if rows and len(parsed) != len(rows[0]):
                raise DataError(
                    f"inconsistent column count in {path} at row {r + 1}: "
                    f"got {len(parsed)}, expected {len(rows[0])}"
                )
            rows.append(parsed)
    if not rows:
        raise DataError(f"no numeric rows in {path}")
    return np.asarray(rows, dtype=float), header


def save_matrix_csv(path: Path, matrix: np.ndarray, header: list | None = None,
                    integer: bool = False) -> None:
    matrix = np.asarray(matrix)
    fmt = "%d" if integer else _FLOAT_FMT
    head = ",".join(header) if header else ""
    np.savetxt(path, matrix, fmt=fmt, delimiter=",", header=head, comments="")


def load_matrix_csv(path: Path) -> np.ndarray:
    matrix, _ = _read_csv_matrix(Path(path))
    return matrix


def load_dataset(manifest_path: str | Path) -> MultiEnvDataset:
    """Load a dataset from a JSON manifest listing one CSV per environment."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DataError(f"missing manifest: {manifest_path}")
    try:
        spec = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    for key in ("d", "environments"):
        if key not in spec:
            raise DataError(f"manifest {manifest_path} lacks required field {key!r}")
    d = int(spec["d"])
    base = manifest_path.parent
    envs = []
    for rel in spec["environments"]:
        matrix, _ = _read_csv_matrix(base / rel)
        if matrix.shape[1] != d:
            raise DataError(
                f"{base / rel} has {matrix.shape[1]} columns but the manifest "
                f"declares d={d}"
            )
        envs.append(matrix)
    names = spec.get("names")
    return MultiEnvDataset(environments=tuple(envs), d=d, names=names)


def save_dataset(data: MultiEnvDataset, out_dir: str | Path,
                 manifest_name: str = "manifest.json") -> Path:
    """Write per-environment CSVs plus the JSON manifest; returns manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    header = list(data.names) if data.names else None
    for k, env in enumerate(data.environments):
        name = f"env{k}.csv"
        save_matrix_csv(out_dir / name, env, header=header)
        files.append(name)
    manifest = {"d": data.d, "environments": files}
    if data.names:
        manifest["names"] = list(data.names)
    path = out_dir / manifest_name
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def save_graph(graph: GrangerGraph, out_dir: str | Path,
               stem: str = "graph") -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_matrix_csv(out_dir / f"{stem}.csv", graph.adjacency, integer=True)
    if graph.scores is not None:
        save_matrix_csv(out_dir / f"{stem}_scores.csv", graph.scores)


def load_graph(path: str | Path, scores_path: str | Path | None = None) -> GrangerGraph:
    adj = load_matrix_csv(path)
    if not np.isin(adj, (0.0, 1.0)).all():
        raise DataError(f"{path} is not a 0/1 adjacency matrix")
    scores = load_matrix_csv(scores_path) if scores_path else None
    return GrangerGraph(adjacency=adj.astype(np.int8), scores=scores)


def save_family(family: InterventionalFamily, out_dir: str | Path,
                stem: str = "targets") -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, t in enumerate(family.targets):
        save_matrix_csv(out_dir / f"{stem}_env{k}.csv", t, integer=True)


def load_family(paths: list) -> InterventionalFamily:
    mats = []
    for path in paths:
        m = load_matrix_csv(path)
        if not np.isin(m, (0.0, 1.0)).all():
            raise DataError(f"{path} is not a 0/1 target matrix")
        mats.append(m.astype(np.int8))
    return InterventionalFamily(targets=tuple(mats))
