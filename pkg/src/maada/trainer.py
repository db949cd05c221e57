"""MAADA training loop, the plain ERM baseline, and evaluation."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import model
from .data import Dataset
from .errors import ConfigError, DataError, TrainingError
from .losses import LossBreakdown, LossWeights, build_objective, loss_align, objective, objective_inputs
from .manifold import build_graph, tangent_bases
from .perturb import NORM_FLOOR, perturb_batch


@dataclass
class TrainConfig:
    layer_sizes: list | None = None  # None -> [d, 64, 64, C]
    alpha: float = 0.1
    beta: float = 0.1
    weights: LossWeights = field(default_factory=LossWeights)
    k: int = 10
    m: int = 1
    chart_refresh_every: int = 1
    learning_rate: float = 0.05
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    norm_floor: float = NORM_FLOOR

    def __post_init__(self):
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be >= 0", )
        if not (self.k >= self.m >= 1):
            raise ConfigError(f"need k >= m >= 1, got k={self.k}, m={self.m}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1 or self.chart_refresh_every < 1:
            raise ConfigError("batch_size and chart_refresh_every must be >= 1")
        if self.norm_floor < 0:
            raise ConfigError("norm_floor must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        d = dict(d)
        if "weights" in d:
            w = d["weights"]
            if not isinstance(w, dict):
                raise ConfigError("weights must be an object with lambda_adv, lambda_cons, lambda_align")
            extra = set(w) - {"lambda_adv", "lambda_cons", "lambda_align"}
            if extra:
                raise ConfigError(f"unknown weights fields: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def baseline(cls, **overrides) -> "TrainConfig":
        """ERM settings: no perturbation, all regularizers off."""
        base = dict(alpha=0.0, beta=0.0, weights=LossWeights(0.0, 0.0, 0.0))
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = asdict(self.weights)
        return d

    def resolved_sizes(self, d: int, n_classes: int) -> list:
        if self.layer_sizes is None:
            return [d, 64, 64, n_classes]
        sizes = [int(s) for s in self.layer_sizes]
        if len(sizes) < 2 or sizes[0] != d or sizes[-1] != n_classes:
            raise ConfigError(f"layer_sizes {sizes} must start at d={d} and end at C={n_classes}")
        return sizes


@dataclass
class MetricsLog:
    records: list = field(default_factory=list)

    def append(self, record: dict):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def deterministic_view(self):
        """Records without the wall-clock field, for reproducibility checks."""
        return [{k: v for k, v in r.items() if k != "wall_clock_s"} for r in self.records]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "MetricsLog":
        return cls([json.loads(line) for line in text.splitlines() if line.strip()])


def evaluate(params: model.ModelParams, ds: Dataset):
    """Argmax accuracy (ties go to the lowest class index) and mean CE."""
    if len(ds) == 0 or not ds.labeled:
        raise DataError(f"evaluation needs a fully labeled dataset ({ds.name})")
    z = model.logits(params, ds.X)
    acc = float(np.mean(np.argmax(z, axis=1) == ds.y))
    return acc, model.cross_entropy(params, ds.X, ds.y)


def _check_inputs(config, source, target):
    if not source.labeled:
        raise DataError("source dataset must be fully labeled")
    if len(target) == 0:
        raise DataError("target dataset is empty")
    if source.dim != target.dim:
        raise ConfigError(f"source has d={source.dim}, target has d={target.dim}")
    n_classes = source.n_classes
    return config.resolved_sizes(source.dim, n_classes)


def _streams(seed):
    init_ss, batch_ss = np.random.SeedSequence(seed).spawn(2)
    return int(init_ss.generate_state(1)[0]), np.random.Generator(np.random.PCG64(batch_ss))


def _batches(rng, n_s, n_t, batch_size):
    """One epoch of (source_idx, target_idx) pairs; the target permutation
    is cycled so every source batch has a same-sized target batch."""
    perm_s = rng.permutation(n_s)
    perm_t = rng.permutation(n_t)
    for it in range(math.ceil(n_s / batch_size)):
        idx_s = perm_s[it * batch_size:(it + 1) * batch_size]
        idx_t = perm_t[(it * batch_size + np.arange(idx_s.size)) % n_t]
        yield idx_s, idx_t


def _epoch_record(epoch, sums, count, params, source, target_eval, t0):
    rec = {"epoch": epoch}
    rec.update({k: v / count for k, v in sums.items()})
    rec["source_accuracy"] = evaluate(params, source)[0]
    rec["target_accuracy"] = evaluate(params, target_eval)[0] if target_eval is not None and target_eval.labeled else None
    rec["wall_clock_s"] = time.perf_counter() - t0
    return rec


def train(config: TrainConfig, source: Dataset, target: Dataset, target_eval: Dataset | None = None):
    """Run MAADA; returns ``(params, MetricsLog)``.

    Target labels are never used for training. They (or those of
    ``target_eval`` when given) only feed the per-epoch target accuracy.
    """
    sizes = _check_inputs(config, source, target)
    if target_eval is None and target.labeled:
        target_eval = target
    init_seed, rng = _streams(config.seed)
    params = model.init_mlp(sizes, init_seed)
    tape = build_objective(params.n_layers, config.weights)
    perturbing = config.alpha > 0 or config.beta > 0

    log = MetricsLog()
    t0 = time.perf_counter()
    bases_s = bases_t = None
    for epoch in range(config.epochs):
        if perturbing and epoch % config.chart_refresh_every == 0:
            bases_s = tangent_bases(source.X, build_graph(source.X, config.k), config.m)
            bases_t = tangent_bases(target.X, build_graph(target.X, config.k), config.m)
        sums = dict.fromkeys(LossBreakdown.__dataclass_fields__, 0.0)
        count = 0
        for idx_s, idx_t in _batches(rng, len(source), len(target), config.batch_size):
            xs, ys, xt = source.X[idx_s], source.y[idx_s], target.X[idx_t]
            if perturbing:
                gs = model.input_gradients(params, xs, ys)
                x_on_s, x_off, _, _ = perturb_batch(xs, gs, bases_s[idx_s], config.alpha, config.beta, config.norm_floor)
                gt = model.entropy_input_gradients(params, xt)
                x_on_t, _, _, _ = perturb_batch(xt, gt, bases_t[idx_t], config.alpha, config.beta, config.norm_floor)
            else:
                x_on_s, x_off, x_on_t = xs, xs, xt
            inputs = objective_inputs(params, xs, ys, x_off, xt, x_on_s, x_on_t)
            try:
                breakdown, grads = objective(params, tape, inputs, config.weights)
            except TrainingError as exc:
                raise TrainingError("non-finite loss", term=exc.term, epoch=epoch) from None
            params = params.apply_update(grads, config.learning_rate)
            for k, v in breakdown.as_dict().items():
                sums[k] += v
            count += 1
        log.append(_epoch_record(epoch, sums, count, params, source, target_eval, t0))
    return params, log


def train_erm(config: TrainConfig, source: Dataset, target: Dataset, target_eval: Dataset | None = None):
    """Baseline: gradient descent on the source cross-entropy only.

    Uses the same initialization and minibatch stream as :func:`train`, so
    for a degenerate MAADA config the two trajectories coincide.
    """
    sizes = _check_inputs(config, source, target)
    if target_eval is None and target.labeled:
        target_eval = target
    init_seed, rng = _streams(config.seed)
    params = model.init_mlp(sizes, init_seed)
    log = MetricsLog()
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        sums = dict.fromkeys(LossBreakdown.__dataclass_fields__, 0.0)
        count = 0
        for idx_s, idx_t in _batches(rng, len(source), len(target), config.batch_size):
            xs = source.X[idx_s]
            try:
                values, grads = model.ce_param_gradient(params, xs, source.y[idx_s])
            except TrainingError:
                raise TrainingError("non-finite loss", term="l_src", epoch=epoch) from None
            # monitoring only: what the regularizers read at zero perturbation
            l_src = float(values["result"])
            sums["l_src"] += l_src
            sums["l_adv"] += l_src
            sums["l_align"] += loss_align(params, xs, target.X[idx_t])
            sums["l_total"] += l_src
            params = params.apply_update(grads, config.learning_rate)
            count += 1
        log.append(_epoch_record(epoch, sums, count, params, source, target_eval, t0))
    return params, log
