"""RANSAC with different thresholds on a half-outlier scene."""
import numpy as np

from sphere8 import NoiseModel, RansacConfig, SceneConfig, make_trial, pose_errors, ransac_essential
from sphere8.robust import adaptive_iterations

print("adaptive budget at 50% inliers, confidence 0.9:", adaptive_iterations(0.5, 0.9))

trial = make_trial(0, SceneConfig(400), NoiseModel(kappa=2000.0, outlier_ratio=0.5), seed=3)
inliers = ~trial.outlier_labels
for thr in (0.01, 0.03, 0.1):
    res = ransac_essential(trial.corrs, RansacConfig(threshold=thr, seed=1), final_estimator="wgsm-sk")
    hit = np.count_nonzero(res.inlier_mask & inliers)
    line = f"threshold {thr:<5} iterations {res.iterations_run:5d}  consensus {res.inlier_mask.sum():3d}"
    line += f"  recall {hit / inliers.sum():.3f}"
    if res.success:
        line += "  rot %.5f  tran %.5f" % pose_errors(trial.pose, res.pose)
    print(line)
