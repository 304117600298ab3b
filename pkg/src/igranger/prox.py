"""Group soft-thresholding, the two-level proximal operator, and the
proximal gradient loop with backtracking.

The penalty handled here couples one shared coefficient block with the
per-environment blocks of the same (effect, cause) pair:

    h(z) = (1 - alpha) * lam * ||z||_2  +  alpha * lam * sum_k ||z_k||_2

where z = (z_0, z_1, ..., z_n), z_0 is the shared block and z_1..z_n are
the environment blocks.  Its exact proximal mapping is the composition
"shrink each z_k (k >= 1) with alpha*lam, then shrink the whole
concatenation with (1 - alpha)*lam"; the shared block is never shrunk on
its own.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class OptimizationError(RuntimeError):
    """Raised when the proximal loop encounters non-finite values or diverges."""


@dataclass(frozen=True)
class GroupFamily:
    """Shared block plus the per-environment blocks of one coefficient group.

    groups[0] is the shared block; groups[1:] are the environment blocks.
    All blocks have the same length.
    """

    groups: tuple

    def __post_init__(self):
        if len(self.groups) < 1:
            raise ValueError("GroupFamily needs at least the shared block")
        sizes = {g.shape for g in self.groups}
        if len(sizes) != 1 or self.groups[0].ndim != 1:
            raise ValueError("all blocks must be 1-D vectors of equal length")
        for g in self.groups:
            if not np.all(np.isfinite(g)):
                raise ValueError("blocks must be finite")

    @property
    def n_envs(self) -> int:
        return len(self.groups) - 1


def soft_threshold_group(u: np.ndarray, t: float) -> np.ndarray:
    """Scale u toward zero by t in Euclidean norm; exactly zero at or below t.

    Returns max(0, 1 - t / ||u||_2) * u, with the 0/0 case resolved to the
    zero vector so downstream support checks can rely on bitwise zeros.
    """
    if t < 0:
        raise ValueError("threshold must be non-negative")
    u = np.asarray(u, dtype=float)
    norm = float(np.linalg.norm(u))
    if norm <= t:
        return np.zeros_like(u)
    return (1.0 - t / norm) * u


def hierarchical_prox(fam: GroupFamily, alpha: float, lam: float) -> GroupFamily:
    """Exact prox of the two-level group penalty on one coefficient family.

    Environment blocks are shrunk with threshold alpha*lam first; the
    concatenation of the (untouched) shared block with the shrunk
    environment blocks is then shrunk jointly with (1 - alpha)*lam.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly inside (0, 1)")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    shrunk = [np.asarray(fam.groups[0], dtype=float)]
    for u_k in fam.groups[1:]:
        shrunk.append(soft_threshold_group(u_k, alpha * lam))
    flat = np.concatenate(shrunk)
    flat = soft_threshold_group(flat, (1.0 - alpha) * lam)
    size = fam.groups[0].size
    out = tuple(flat[i * size:(i + 1) * size] for i in range(len(fam.groups)))
    return GroupFamily(groups=out)


def hierarchical_prox_batch(u: np.ndarray, env_t: float, joint_t: float) -> np.ndarray:
    """Vectorised two-level prox over a stack of families.

    u has shape (..., n_envs + 1, block_len); index 0 along the second-to-last
    axis is the shared block.  env_t and joint_t are the already-scaled
    thresholds (alpha*lam*step and (1-alpha)*lam*step in the gradient loop).
    """
    u = np.asarray(u, dtype=float)
    out = u.copy()
    if env_t > 0:
        env = out[..., 1:, :]
        norms = np.linalg.norm(env, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(norms > env_t, 1.0 - env_t / norms, 0.0)
        out[..., 1:, :] = factor * env
    if joint_t > 0:
        norms = np.linalg.norm(out, axis=(-2, -1))
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(norms > joint_t, 1.0 - joint_t / norms, 0.0)
        out *= factor[..., None, None]
    return out


@dataclass
class LoopResult:
    params: np.ndarray
    trace: np.ndarray  # composite objective, index 0 is the starting point
    converged: bool
    n_iters: int
    final_step: float


def prox_gradient_loop(
    smooth: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    prox: Callable[[np.ndarray, float], np.ndarray],
    x0: np.ndarray,
    step_size: float,
    max_iters: int,
    tol: float,
    penalty: Callable[[np.ndarray], float] | None = None,
) -> LoopResult:
    """Proximal gradient descent with halving backtracking line search.

    Each iteration takes a gradient step on the smooth loss and applies
    ``prox(v, step)``; the step is halved until the standard sufficient
    decrease condition holds, which keeps the composite objective
    non-increasing.  Convergence is declared when the composite objective
    changes by less than tol * max(1, |objective|) between iterations.
    """
    if step_size <= 0:
        raise ValueError("step_size must be positive")
    pen = penalty if penalty is not None else (lambda _: 0.0)
    x = np.array(x0, dtype=float)
    gamma = float(step_size)
    gamma_max = 64.0 * gamma
    f_x = smooth(x)
    _check_finite(f_x, "smooth loss at the initial point")
    obj = f_x + pen(x)
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        g = grad(x)
        if not np.all(np.isfinite(g)):
            raise OptimizationError("gradient callback returned non-finite values")
        while True:
            z = prox(x - gamma * g, gamma)
            dz = z - x
            f_z = smooth(z)
            _check_finite(f_z, "smooth loss during line search")
            bound = f_x + float(g @ dz) + float(dz @ dz) / (2.0 * gamma)
            if f_z <= bound + 1e-12 * (1.0 + abs(f_x)):
                break
            gamma *= 0.5
            if gamma < 1e-16:
                raise OptimizationError(
                    "line search failed: objective increases even at the "
                    "minimum step size; the gradient is likely inconsistent "
                    "with the loss"
                )
        x = z
        f_x = f_z
        new_obj = f_x + pen(x)
        trace.append(new_obj)
        if abs(obj - new_obj) <= tol * max(1.0, abs(obj)):
            converged = True
            obj = new_obj
            break
        obj = new_obj
        gamma = min(gamma * 1.25, gamma_max)
    return LoopResult(
        params=x,
        trace=np.asarray(trace),
        converged=converged,
        n_iters=it,
        final_step=gamma,
    )


def penalty_value(families: Sequence[np.ndarray] | np.ndarray, alpha: float, lam: float) -> float:
    """Composite penalty value over a stack of families shaped (..., n+1, L)."""
    u = np.asarray(families, dtype=float)
    per_env = np.linalg.norm(u[..., 1:, :], axis=-1).sum()
    joint = np.linalg.norm(u, axis=(-2, -1)).sum()
    return lam * (alpha * float(per_env) + (1.0 - alpha) * float(joint))


def _check_finite(value: float, where: str) -> None:
    if not np.isfinite(value):
        raise OptimizationError(f"{where} is non-finite; aborting")
