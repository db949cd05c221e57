"""Synthetic domain-shift datasets and their CSV form.

CSV layout: header ``x0,...,x{d-1},label,domain``; ``label`` is an integer
(-1 = unlabeled) and ``domain`` is ``source`` or ``target``. Floats are
written with 17 significant digits so a save/load round trip is exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, ParseError

PRNG_ALGORITHM = "numpy.random.PCG64"
DOMAINS = ("source", "target")


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    domain: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.domain = np.asarray(self.domain, dtype=object)
        if self.X.ndim != 2:
            raise DataError(f"X must be 2-D, got shape {self.X.shape}")
        n = self.X.shape[0]
        if self.y.shape != (n,) or self.domain.shape != (n,):
            raise DataError(f"{n} points but {self.y.shape[0]} labels and {self.domain.shape[0]} domain tags")
        if np.any(self.y < -1):
            raise DataError("labels must be -1 (unlabeled) or nonnegative")
        bad = set(self.domain.tolist()) - set(DOMAINS)
        if bad:
            raise DataError(f"unknown domain tags {sorted(bad)}")

    def __len__(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def labeled(self):
        return bool(len(self)) and bool(np.all(self.y >= 0))

    @property
    def n_classes(self):
        return int(self.y.max()) + 1 if len(self) and self.y.max() >= 0 else 0

    def subset(self, idx):
        return Dataset(self.X[idx], self.y[idx], self.domain[idx], self.name)

    def with_labels(self, y):
        return Dataset(self.X.copy(), np.asarray(y).copy(), self.domain.copy(), self.name)

    def equals(self, other, tol=0.0):
        return (self.X.shape == other.X.shape and np.allclose(self.X, other.X, rtol=0.0, atol=tol)
                and np.array_equal(self.y, other.y) and np.array_equal(self.domain, other.domain))


def gen_two_moons(n: int, noise: float, seed, domain="source") -> Dataset:
    """Two interleaved half circles of radius 1 (label 0 outer, 1 inner)."""
    if n < 2:
        raise ConfigError(f"two moons needs n >= 2, got {n}")
    if noise < 0:
        raise ConfigError(f"noise must be nonnegative, got {noise}")
    rng = make_rng(seed)
    n_out = n // 2
    n_in = n - n_out
    t_out = np.linspace(0.0, np.pi, n_out)
    t_in = np.linspace(0.0, np.pi, n_in)
    X = np.vstack([
        np.column_stack([np.cos(t_out), np.sin(t_out)]),
        np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)]),
    ])
    y = np.concatenate([np.zeros(n_out, dtype=np.int64), np.ones(n_in, dtype=np.int64)])
    perm = rng.permutation(n)
    X, y = X[perm], y[perm]
    if noise > 0:
        X = X + rng.normal(0.0, noise, size=X.shape)
    return Dataset(X, y, np.full(n, domain, dtype=object), f"two-moons(n={n},noise={noise},seed={seed})")


def gen_circle(n: int, radius: float = 1.0, seed=0, domain="source") -> Dataset:
    """``n`` equally spaced points on a circle with a seeded random phase."""
    if n < 3:
        raise ConfigError(f"circle needs n >= 3, got {n}")
    phase = make_rng(seed).uniform(0.0, 2.0 * np.pi)
    theta = phase + 2.0 * np.pi * np.arange(n) / n
    X = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    return Dataset(X, np.full(n, -1), np.full(n, domain, dtype=object), f"circle(n={n},r={radius},seed={seed})")


def rotate(ds: Dataset, theta: float, retag=None, drop_labels=False) -> Dataset:
    """Rotate a 2-D dataset about the origin by ``theta`` radians."""
    if ds.dim != 2:
        raise ConfigError(f"rotation needs 2-D points, got d={ds.dim}")
    if theta == 0.0:
        X = ds.X.copy()
    else:
        c, s = np.cos(theta), np.sin(theta)
        X = ds.X @ np.array([[c, s], [-s, c]])
    y = np.full(len(ds), -1) if drop_labels else ds.y.copy()
    domain = np.full(len(ds), retag, dtype=object) if retag else ds.domain.copy()
    return Dataset(X, y, domain, f"{ds.name}|rot({theta:.6g})")


def save_csv(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(ds.dim)] + ["label", "domain"])
        for x, y, dom in zip(ds.X, ds.y, ds.domain):
            w.writerow([format(v, ".17g") for v in x] + [int(y), dom])


def load_csv(path, name=None) -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if len(header) < 3 or header[-2:] != ["label", "domain"]:
            raise ParseError("header must end with 'label,domain'", line=1)
        d = len(header) - 2
        if header[:d] != [f"x{j}" for j in range(d)]:
            raise ParseError(f"feature columns must be named x0..x{d - 1}", line=1)
        X, y, dom = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise ParseError(f"expected {d + 2} fields, got {len(row)}", line=lineno)
            try:
                X.append([float(v) for v in row[:d]])
                y.append(int(row[d]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if row[d + 1] not in DOMAINS:
                raise ParseError(f"domain must be source or target, got {row[d + 1]!r}", line=lineno)
            if y[-1] < -1:
                raise ParseError(f"invalid label {y[-1]}", line=lineno)
            if not np.all(np.isfinite(X[-1])):
                raise ParseError("non-finite feature value", line=lineno)
            dom.append(row[d + 1])
    X = np.array(X, dtype=np.float64).reshape(-1, d)
    return Dataset(X, np.array(y, dtype=np.int64), np.array(dom, dtype=object), name or str(path))
