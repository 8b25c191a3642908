"""How the labeled yes-object probability falls as the indicator grows.

Run with ``python demos/04_indicator_threshold.py``.
"""
# %%
import numpy as np

from rfs_fusion.diagnostics import indicator_threshold, yes_probability_from_indicator

# %%
for p_unlabeled in (0.9, 0.99, 0.999):
    d_half = indicator_threshold(p_unlabeled, 0.5)
    # the indicator never exceeds -log(1 - P_y), where the labeled probability reaches zero
    d_max = -np.log(1.0 - p_unlabeled)
    curve = [yes_probability_from_indicator(d, p_unlabeled) for d in np.linspace(0, d_max, 7)]
    print(f"P_y(unlabeled)={p_unlabeled}: labeled P_y drops to 0.5 at d_G={d_half:.4f}; "
          f"on [0, {d_max:.3f}]: {np.round(np.clip(curve, 0.0, 1.0), 3).tolist()}")
