"""Noisy scene with outliers: plain 8pa against the optimal (S, K) normalisation."""
import numpy as np

from sphere8 import NoiseModel, SceneConfig, eight_point, make_trial, opt_sk, pose_errors
from sphere8.optim import sk_objective

trial = make_trial(4, SceneConfig(200), NoiseModel(kappa=500.0, outlier_ratio=0.2), seed=0)
corrs = trial.corrs

E, pose = eight_point(corrs)
print("8pa     rot %.5f  tran %.5f" % pose_errors(trial.pose, pose))

res = opt_sk(corrs)
print("opt-sk  rot %.5f  tran %.5f" % pose_errors(trial.pose, res.pose))
print(f"S* = {res.S:.4f}, K* = {res.K:.4f}, LM evaluations {res.lm.evaluations}")
print(f"objective at (1,1) {sk_objective(corrs, 1.0, 1.0):.4f} -> {res.objective:.4f}")

# only K/S matters; a slice along K with S = 1
for K in np.geomspace(0.25, 4.0, 9):
    print(f"  K={K:6.3f}  sum eps = {sk_objective(corrs, 1.0, K):.4f}")
