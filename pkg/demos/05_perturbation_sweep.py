"""Walkthrough: a small perturbation-robustness sweep.

Rotating digit images at training time garbles a growing fraction of the
training contexts.  A softmax-like extractor stays confident when wrong, so
the noise keeps full example weight; an uncertainty-aware extractor collapses
its confidence, so the weighting pushes the learner back toward the clean
examples.  This runs a reduced sweep (2 folds, 3 fractions) and prints the
aggregate table; the CLI `nsl sweep` runs the full protocol.
"""
from nsl.bench import SweepConfig, emit_report, run_sweep

for profile in ("softmax_sim", "edl_sim"):
    cfg = SweepConfig(task="sudoku", fractions=(0.0, 0.4, 0.8), folds=2,
                      profile=profile, seed=0, mc_samples=1500,
                      max_nodes=100_000)
    report = run_sweep(cfg)
    print(f"=== {profile} ===")
    for agg in report.aggregates:
        print(f"  fraction {agg.fraction:.1f}: "
              f"gt accuracy {agg.acc_gt_mean:.3f} ± {agg.acc_gt_se:.3f}, "
              f"perturbed-test accuracy {agg.acc_pert_mean:.3f}, "
              f"prob. accuracy {agg.prob_acc_mean:.3f}, "
              f"interpretability {agg.interp_mean:.1f}")
    print()

print("markdown/csv/json reports via nsl.bench.emit_report or the CLI:")
print("  nsl sweep --task sudoku --profiles edl_sim,softmax_sim --baseline \\")
print("            --fractions 0:0.8:0.1 --out-dir reports --format csv,markdown")
