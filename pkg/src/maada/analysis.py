"""Empirical versions of the quantities in the transfer bound.

Everything here is a finite-sample surrogate: risks are measured on the
datasets at hand, the joint-hypothesis risk is an upper estimate from pooled
ERM, and the constant-laden generalization term is reported symbolically.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import model
from .data import Dataset
from .errors import DataError
from .losses import loss_adv
from .manifold import GeoDBreakdown, build_graph, geo_discrepancy, tangent_bases
from .perturb import NORM_FLOOR, perturb_batch
from .trainer import TrainConfig, evaluate, train_erm


@dataclass
class RiskSplit:
    on_manifold_error: float
    off_manifold_sensitivity: float

    def as_dict(self):
        return asdict(self)


@dataclass
class BoundReport:
    r_hat_s: float
    epsilon_c_mean: float
    epsilon_c_max: float
    geod: GeoDBreakdown
    c_over_eps2n: str
    rhs_partial: float
    lambda_star_upper: float | None = None

    def as_dict(self):
        d = {
            "r_hat_s": self.r_hat_s,
            "epsilon_c": {"mean": self.epsilon_c_mean, "max": self.epsilon_c_max},
            "geod": self.geod.as_dict(),
            "c_over_eps2n": self.c_over_eps2n,
            "rhs_partial": self.rhs_partial,
        }
        if self.lambda_star_upper is not None:
            d["lambda_star_upper"] = self.lambda_star_upper
        return d

    def components(self):
        parts = [self.r_hat_s, self.epsilon_c_mean, self.geod.total]
        if self.lambda_star_upper is not None:
            parts.append(self.lambda_star_upper)
        return parts


def _charts(X, k, m):
    return tangent_bases(X, build_graph(X, k), m)


def _gradients(params, ds: Dataset):
    """Cross-entropy gradients where a label exists, entropy gradients elsewhere."""
    G = model.entropy_input_gradients(params, ds.X)
    lab = ds.y >= 0
    if lab.any():
        G[lab] = model.input_gradients(params, ds.X[lab], ds.y[lab])
    return G


def risk_split(params, target_test: Dataset, beta, k, m, norm_floor=NORM_FLOOR) -> RiskSplit:
    """Mean loss on the raw target points and on their off-manifold steps."""
    if len(target_test) == 0 or not target_test.labeled:
        raise DataError("risk_split needs labeled target points")
    X, y = target_test.X, target_test.y
    on = model.cross_entropy(params, X, y)
    if beta == 0:
        x_off = X
    else:
        G = model.input_gradients(params, X, y)
        _, x_off, _, _ = perturb_batch(X, G, _charts(X, k, m), 0.0, beta, norm_floor)
    return RiskSplit(on, loss_adv(params, X, y, x_off))


def epsilon_c_values(params, points: Dataset, alpha, k, m, norm_floor=NORM_FLOOR) -> np.ndarray:
    """Per-point ||f(x) - f(x_on)|| on softmax outputs."""
    if len(points) == 0:
        raise DataError("no points to measure")
    X = points.X
    if alpha == 0:
        return np.zeros(len(points))
    x_on, _, _, _ = perturb_batch(X, _gradients(params, points), _charts(X, k, m), alpha, 0.0, norm_floor)
    return np.linalg.norm(model.predict_proba(params, x_on) - model.predict_proba(params, X), axis=1)


def measure_epsilon_c(params, points: Dataset, alpha, k, m, norm_floor=NORM_FLOOR):
    vals = epsilon_c_values(params, points, alpha, k, m, norm_floor)
    return float(np.mean(vals)), float(np.max(vals))


def estimate_lambda_star(config: TrainConfig, source: Dataset, target_oracle: Dataset) -> float:
    """Source + target error of an ERM model trained on both labeled sets.

    This upper-bounds the ideal joint risk; it is never the true minimum.
    """
    if not target_oracle.labeled:
        raise DataError("lambda* needs oracle labels for every target point")
    if not source.labeled:
        raise DataError("source must be labeled")
    pooled = Dataset(np.vstack([source.X, target_oracle.X]), np.concatenate([source.y, target_oracle.y]),
                     np.array(["source"] * (len(source) + len(target_oracle)), dtype=object), "pooled")
    cfg = TrainConfig.baseline(layer_sizes=config.layer_sizes, learning_rate=config.learning_rate,
                               epochs=config.epochs, batch_size=config.batch_size, seed=config.seed,
                               k=config.k, m=config.m)
    params, _ = train_erm(cfg, pooled, pooled)
    return (1.0 - evaluate(params, source)[0]) + (1.0 - evaluate(params, target_oracle)[0])


def symbolic_term(eps, n) -> str:
    return f"C/(eps^2*n) with eps={eps:g}, n={n}; not computable (unknown constant C)"


def bound_report(params, source: Dataset, target: Dataset, config: TrainConfig,
                 target_test_oracle: Dataset | None = None) -> BoundReport:
    """Assemble the empirical right-hand side of the transfer bound.

    ``r_hat_s`` is the 0-1 source error, epsilon_c is measured on the
    source manifold at step ``config.alpha``, and GeoD compares the raw
    source and target clouds.
    """
    r_hat_s = 1.0 - evaluate(params, source)[0]
    eps_mean, eps_max = measure_epsilon_c(params, source, config.alpha, config.k, config.m, config.norm_floor)
    geod = geo_discrepancy(source.X, target.X, config.k, config.m)
    lam = None
    if target_test_oracle is not None:
        lam = estimate_lambda_star(config, source, target_test_oracle)
    report = BoundReport(r_hat_s, eps_mean, eps_max, geod, symbolic_term(config.beta, len(source)), 0.0, lam)
    report.rhs_partial = float(sum(report.components()))
    return report
