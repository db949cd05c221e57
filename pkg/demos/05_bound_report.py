"""
Reading the bound report
========================

Train once, then collect the empirical pieces of the transfer bound:
source error, consistency gap, GeoD and (with oracle labels) a pooled-ERM
estimate of the joint risk.
"""

import json

import numpy as np

from maada.analysis import bound_report, risk_split
from maada.data import gen_two_moons, rotate
from maada.trainer import TrainConfig, train

angle = np.deg2rad(30)
src = gen_two_moons(400, 0.1, 0)
tgt = rotate(gen_two_moons(400, 0.1, 1000), angle, retag="target", drop_labels=True)
oracle = rotate(gen_two_moons(400, 0.1, 2000), angle, retag="target")

cfg = TrainConfig(epochs=100)
params, _ = train(cfg, src, tgt)

split = risk_split(params, oracle, cfg.beta, cfg.k, cfg.m)
print("risk split:", split.as_dict())

report = bound_report(params, src, tgt, cfg, target_test_oracle=oracle)
print(json.dumps(report.as_dict(), indent=2))
print("sum of components:", sum(report.components()))
