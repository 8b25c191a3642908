"""A short Monte-Carlo comparison of local, label-marginalised and label-wise fusion.

Run with ``python demos/05_monte_carlo.py [runs]``.  The same study is
available from the command line as ``rfs-fusion simulate``.
"""
# %%
import sys

from rfs_fusion.sim import bundled_scenario, load_scenario, monte_carlo

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 3

# %%
for name in ("scenario1_prior", "scenario1_adaptive"):
    sc = load_scenario(bundled_scenario(name))
    res = monte_carlo(sc, runs, base_seed=0)
    print(f"{name} ({runs} runs)")
    for est in sc.estimators:
        print(f"  {est:14s} post-transient OSPA {res.mean_ospa(est):7.2f}   "
              f"cardinality MAE (steps 20-60) {res.cardinality_mae(est, steps=range(20, 61)):.3f}")
