"""A Gaussian-mixture LMB filter on one sensor, scored with OSPA.

Run with ``python demos/02_single_sensor_filter.py``.
"""
# %%
import numpy as np

from rfs_fusion import OspaParams, ospa_distance
from rfs_fusion.sim import bundled_scenario, generate_measurements, generate_truth, load_scenario, stream
from rfs_fusion.lmb_filter import LmbFilter

# %%
sc = load_scenario(bundled_scenario("scenario1_adaptive"))
truth = generate_truth(sc)
flt = LmbFilter(sc.motion, sc.sensors[0], sc.birth, sc.filter_params)
params = OspaParams(100.0, 1.0)

# %%
for k in range(1, sc.duration + 1):
    states = [x for _, x in truth[k - 1]]
    Z = generate_measurements(states, sc.sensors[0], stream(0, 0, 0, k, "detection"),
                              stream(0, 0, 0, k, "clutter"), stream(0, 0, 0, k, "order"))
    flt.step(k, Z)
    est = flt.estimates()
    if k % 5 == 0:
        d = ospa_distance([x for _, x in est], states, params)
        labels = ", ".join(str(lab) for lab, _ in est)
        print(f"k={k:2d} true={len(states)} est={len(est)} ospa={d:6.2f}  labels: {labels}")
