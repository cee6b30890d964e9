"""A small outlier sweep; the CLI's synth-sweep runs the same thing at full size."""
from sphere8.experiments import sweep_outliers

report = sweep_outliers(["8pa", "opt-sk", "gsm", "wgsm-sk"], trials_per_point=40,
                        ratios=(0.0, 0.2, 0.4), seed=0, diagnostics=False)
print(f"{'ratio':>5} {'method':>14} {'Q50 rot':>9} {'Q50 tran':>9} {'ms':>7}")
for v in report.values:
    for m in report.methods:
        c = report.cell(v, m)
        print(f"{v:5.1f} {m:>14} {c.q50_rot:9.5f} {c.q50_tran:9.5f} {c.mean_time * 1e3:7.2f}")
