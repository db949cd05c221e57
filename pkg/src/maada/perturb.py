"""Split a loss gradient into tangent and normal parts and step along each."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .manifold import TangentChart

NORM_FLOOR = 1e-12


@dataclass
class PerturbationPair:
    x: np.ndarray
    delta_on: np.ndarray
    delta_off: np.ndarray
    x_on: np.ndarray
    x_off: np.ndarray
    on_skipped: bool
    off_skipped: bool


def decompose(g, chart):
    """Return ``(delta_on, delta_off)`` with delta_on the tangent projection
    of ``g`` and delta_off the remainder, so their sum is ``g`` exactly."""
    U = chart.basis if isinstance(chart, TangentChart) else np.asarray(chart, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (U.shape[0],):
        raise DimensionError(f"gradient of shape {g.shape} vs chart dimension {U.shape[0]}")
    on = U @ (U.T @ g)
    return on, g - on


def decompose_batch(G, bases):
    """Row-wise :func:`decompose` for G (b, d) and bases (b, d, m)."""
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or bases.shape[:2] != G.shape:
        raise DimensionError(f"gradients {G.shape} do not match bases {bases.shape}")
    coef = np.einsum("bdm,bd->bm", bases, G)
    on = np.einsum("bdm,bm->bd", bases, coef)
    return on, G - on


def _step(x, delta, size, floor):
    norm = np.linalg.norm(delta)
    if norm < floor or norm == 0.0:
        return x.copy(), True
    return x + size * (delta / norm), False


def make_pair(x, delta_on, delta_off, alpha, beta, norm_floor=NORM_FLOOR) -> PerturbationPair:
    if alpha < 0 or beta < 0:
        raise ConfigError(f"step sizes must be nonnegative, got alpha={alpha}, beta={beta}")
    x = np.asarray(x, dtype=np.float64)
    delta_on = np.asarray(delta_on, dtype=np.float64)
    delta_off = np.asarray(delta_off, dtype=np.float64)
    x_on, on_skip = _step(x, delta_on, alpha, norm_floor)
    x_off, off_skip = _step(x, delta_off, beta, norm_floor)
    return PerturbationPair(x.copy(), delta_on, delta_off, x_on, x_off, on_skip, off_skip)


def _step_rows(X, D, size, floor):
    norms = np.linalg.norm(D, axis=1)
    skip = (norms < floor) | (norms == 0.0)
    safe = np.where(skip, 1.0, norms)
    out = X + size * (D / safe[:, None])
    out[skip] = X[skip]
    return out, skip


def make_pairs(X, delta_on, delta_off, alpha, beta, norm_floor=NORM_FLOOR):
    """Batch form of :func:`make_pair`: ``(x_on, x_off, on_skipped, off_skipped)``."""
    if alpha < 0 or beta < 0:
        raise ConfigError(f"step sizes must be nonnegative, got alpha={alpha}, beta={beta}")
    X = np.asarray(X, dtype=np.float64)
    x_on, on_skip = _step_rows(X, delta_on, alpha, norm_floor)
    x_off, off_skip = _step_rows(X, delta_off, beta, norm_floor)
    return x_on, x_off, on_skip, off_skip


def perturb_batch(X, G, bases, alpha, beta, norm_floor=NORM_FLOOR):
    on, off = decompose_batch(G, bases)
    return make_pairs(X, on, off, alpha, beta, norm_floor)
