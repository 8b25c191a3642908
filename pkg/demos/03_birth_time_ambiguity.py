"""Two sensors that disagree on when an object was born.

Both sensors track the same object, but after pruning each keeps a single
label for it, and the labels differ.  Label-wise fusion then concludes that
nothing is there, while marginalising the labels before fusing keeps the
object.  The diagnostics show the label inconsistency indicator sitting at
its upper bound.

Run with ``python demos/03_birth_time_ambiguity.py``; add ``--write DIR`` to
regenerate the bundled fixture files into ``DIR``.
"""
# %%
import argparse
from pathlib import Path

from rfs_fusion import serialization
from rfs_fusion.diagnostics import DiscreteSpace, discretize, label_inconsistency_indicator
from rfs_fusion.fusion import FusionConfig, classical_gci_lmb_fuse, r_gci_glmb_fuse
from rfs_fusion.labeled_rfs import glmb_to_lmb, no_object_probability
from rfs_fusion.sim import example1_fixture

parser = argparse.ArgumentParser()
parser.add_argument("--write", type=Path, help="directory to write example1_sensor{1,2}.json into")
args = parser.parse_args()

# %%
g1, g2 = example1_fixture()
for name, g in (("sensor 1", g1), ("sensor 2", g2)):
    print(name, [(tuple(str(lab) for lab in s), round(w, 6)) for s, _, w in g.hypotheses()])

# %%
half = FusionConfig(weights=(0.5, 0.5))
robust = r_gci_glmb_fuse([g1, g2], half)
classical = classical_gci_lmb_fuse(glmb_to_lmb(g1), glmb_to_lmb(g2), half)
print("yes-object probability, label-marginalised fusion:", 1 - no_object_probability(robust))
print("yes-object probability, label-wise fusion:        ", 1 - no_object_probability(classical))

# %%
space = DiscreteSpace.covering([g1, g2], axes=(0,), n_cells=40, max_cardinality=2)
rep = label_inconsistency_indicator([(discretize(g1, space), 0.5), (discretize(g2, space), 0.5)])
print(f"d_G = {rep.d_G:.6f}, upper bound -log pi(empty) = {rep.d_G_upper:.6f}")

# %%
if args.write:
    args.write.mkdir(parents=True, exist_ok=True)
    for i, g in enumerate((g1, g2), start=1):
        serialization.save(g, args.write / f"example1_sensor{i}.json")
    print("wrote fixtures to", args.write)
