"""Independent numerical oracles used by the test suite.

Everything here recomputes expected values from first principles (brute
force, finite differences, subgradient descent) without touching the
implementation paths under test.
"""

from __future__ import annotations

import numpy as np


def prox_objective(z: np.ndarray, u: np.ndarray, alpha: float,
                   lam: float) -> float:
    """0.5 ||z - u||^2 + (1-alpha)*lam*||z|| + alpha*lam*sum_{k>=1} ||z_k||.

    z and u are stacked (n_blocks, block_len); block 0 is the shared block.
    """
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    val = 0.5 * float(((z - u) ** 2).sum())
    val += (1.0 - alpha) * lam * float(np.linalg.norm(z))
    val += alpha * lam * float(np.linalg.norm(z[1:], axis=1).sum())
    return val


def prox_numerical_minimizer(u: np.ndarray, alpha: np.ndarray, lam: np.ndarray,
                             subgrad_iters: int = 2000,
                             sweeps: int = 80) -> np.ndarray:
    """Minimize the prox objective numerically for a batch of instances.

    u has shape (B, K, L); zero-padded blocks/coordinates stay exactly zero
    throughout.  A projected subgradient phase with decreasing steps gets
    near the optimum; exact blockwise minimization (1-D bisection along
    each block's input direction) then polishes to high precision.
    """
    u = np.asarray(u, dtype=float)
    B, K, L = u.shape
    alpha = np.asarray(alpha, dtype=float).reshape(B, 1, 1)
    lam = np.asarray(lam, dtype=float).reshape(B, 1, 1)
    joint_w = (1.0 - alpha) * lam
    env_w = alpha * lam

    z = u.copy()
    for m in range(1, subgrad_iters + 1):
        g = z - u
        znorm = np.linalg.norm(z, axis=(1, 2), keepdims=True)
        g = g + joint_w * np.divide(z, znorm, out=np.zeros_like(z),
                                    where=znorm > 0)
        bnorm = np.linalg.norm(z[:, 1:, :], axis=2, keepdims=True)
        g[:, 1:, :] += env_w * np.divide(
            z[:, 1:, :], bnorm, out=np.zeros_like(z[:, 1:, :]), where=bnorm > 0)
        z -= g / (m + 1.0)

    joint_w = joint_w.reshape(B)
    env_w = env_w.reshape(B)
    a_blocks = np.linalg.norm(u, axis=2)  # (B, K)
    for _ in range(sweeps):
        max_change = 0.0
        for k in range(K):
            a = a_blocks[:, k]
            lam_k = env_w if k >= 1 else np.zeros(B)
            rest_sq = (z ** 2).sum(axis=(1, 2)) - (z[:, k, :] ** 2).sum(axis=1)
            rest_sq = np.maximum(rest_sq, 0.0)
            # block optimum is 0 when the pull cannot beat the penalties
            zero_at = lam_k + np.where(rest_sq > 0, 0.0, joint_w)
            dead = a <= zero_at + 1e-300
            lo = np.zeros(B)
            hi = a.copy()
            for _ in range(70):
                mid = 0.5 * (lo + hi)
                slope = mid - a + lam_k + joint_w * np.divide(
                    mid, np.sqrt(rest_sq + mid ** 2),
                    out=np.zeros_like(mid), where=(rest_sq + mid ** 2) > 0)
                hi = np.where(slope > 0, mid, hi)
                lo = np.where(slope > 0, lo, mid)
            s = np.where(dead, 0.0, 0.5 * (lo + hi))
            scale = np.divide(s, a, out=np.zeros_like(s), where=a > 0)
            new_block = scale[:, None] * u[:, k, :]
            max_change = max(max_change,
                             float(np.abs(new_block - z[:, k, :]).max()))
            z[:, k, :] = new_block
        if max_change < 1e-14:
            break
    return z


def brute_confusion(pred: np.ndarray, truth: np.ndarray,
                    include_diagonal: bool = True) -> dict:
    """Confusion-matrix metrics by explicit loops over matrix entries."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    rows, cols = pred.shape
    tp = fp = fn = tn = 0
    for i in range(rows):
        for j in range(cols):
            if i == j and not include_diagonal:
                continue
            p, t = int(pred[i, j]), int(truth[i, j])
            if p == 1 and t == 1:
                tp += 1
            elif p == 1 and t == 0:
                fp += 1
            elif p == 0 and t == 1:
                fn += 1
            else:
                tn += 1
    n = tp + fp + fn + tn
    out = {
        "tp": tp, "fp": fp, "fn": fn, "tn": tn,
        "accuracy": (tp + tn) / n,
        "shd": fp + fn,
    }
    out["precision"] = tp / (tp + fp) if tp + fp else (1.0 if fn == 0 else 0.0)
    out["recall"] = tp / (tp + fn) if tp + fn else (1.0 if fp == 0 else 0.0)
    out["f1"] = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 1.0
    return out


def pairwise_auroc(scores: np.ndarray, truth: np.ndarray) -> float:
    """AUROC as the probability a positive outranks a negative (ties half)."""
    scores = np.asarray(scores, dtype=float).ravel()
    truth = np.asarray(truth).ravel()
    pos = scores[truth == 1]
    neg = scores[truth == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def central_difference(fn, x: np.ndarray, idx: int, eps: float) -> float:
    xp = x.copy()
    xp[idx] += eps
    xm = x.copy()
    xm[idx] -= eps
    return (fn(xp) - fn(xm)) / (2.0 * eps)


def lorenz_rhs_reference(x, F):
    """Direct per-component evaluation of the cyclic forced system."""
    m = len(x)
    out = np.empty(m)
    for i in range(m):
        out[i] = (x[(i + 1) % m] - x[(i - 2) % m]) * x[(i - 1) % m] - x[i] + F
    return out
