"""
Reading an evaluation report
============================

Two independent draws from the same process are the best "synthetic"
data anyone could hope for, so scoring one draw against the other shows
what near-perfect looks like on every metric. A deliberately corrupted
copy (labels shuffled, one column shifted) then shows each metric
catching the damage it is built to catch.
"""

import numpy as np

from tabsynth.data import (Categorical, ColumnSpec, Continuous, Schema,
                           Table, TargetSpec, stratified_split)
from tabsynth.evaluate import build_report

SCHEMA = Schema((
    ColumnSpec("x1", Continuous()),
    ColumnSpec("x2", Continuous()),
    ColumnSpec("group", Categorical()),
    ColumnSpec("y", Categorical(), target=True),
))


def draw(n, seed):
    rng = np.random.default_rng(seed)
    x1 = rng.normal(0.0, 1.0, n)
    group = rng.choice(["a", "b", "c"], size=n, p=[0.5, 0.3, 0.2])
    x2 = x1 * 0.8 + rng.normal(0.0, 0.6, n) + (group == "a")
    y = np.where(x1 + x2 > 0.5, "hi", "lo")
    return Table.from_values(["x1", "x2", "group", "y"],
                             [x1, x2, group, list(y)])


target = TargetSpec("y", "multiclass")
real = draw(2000, seed=0)
real_train, real_test = stratified_split(real, target, 0.25, seed=0)
twin = draw(1500, seed=1)


def show(tag, report):
    sim, priv, util = (report["similarity"], report["privacy"],
                       report["utility"])
    print(tag)
    print("  avg JSD %.4f   avg scaled WD %.4f   diff_corr %.4f"
          % (sim["avg_jsd"], sim["avg_wasserstein_scaled"],
             sim["diff_corr"]))
    print("  DCR synth->real %.4f (within real %.4f)   NNDR %.4f"
          % (priv["dcr"]["real_synthetic"], priv["dcr"]["within_real"],
             priv["nndr"]["real_synthetic"]))
    for name, entry in util["models"].items():
        print("  %-20s real acc %.3f  synth acc %.3f  diff %+.3f"
              % (name, entry["real"]["accuracy"],
                 entry["synthetic"]["accuracy"],
                 entry["difference"]["accuracy"]))


show("twin draw (honest synthetic)",
     build_report(real_train, twin, SCHEMA, target, real_test))

# corrupt it: shuffle labels, shift one marginal
rng = np.random.default_rng(2)
y = twin.column_tokens("y")
rng.shuffle(y)
bad = Table.from_values(
    ["x1", "x2", "group", "y"],
    [twin.column_numeric("x1") + 1.5, twin.column_numeric("x2"),
     twin.column_tokens("group"), y])

show("corrupted copy", build_report(real_train, bad, SCHEMA, target,
                                    real_test))
