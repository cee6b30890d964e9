"""Pose refinement on one contaminated scene: GSM, weighted GSM and IRLS."""
import time

from sphere8 import NoiseModel, SceneConfig, make_trial, pose_errors, run_method

trial = make_trial(7, SceneConfig(200), NoiseModel(kappa=500.0, outlier_ratio=0.2), seed=0)

for tag in ["8pa", "opt-sk", "gsm", "wgsm-xi", "wgsm-sk", "wgsm-sk:t", "irls-gauss", "irls-t"]:
    t0 = time.perf_counter()
    out = run_method(trial.corrs, tag)
    ms = (time.perf_counter() - t0) * 1e3
    rot, tran = pose_errors(trial.pose, out.pose)
    print(f"{tag:>11}  rot {rot:.5f}  tran {tran:.5f}  {ms:7.2f} ms  converged={out.converged}")
