"""How parameter counts grow with the number of domains.

One ensemble member per domain (encoder + decoder + critic) gives a count
that is exactly linear in m. Translating between every ordered pair instead
needs m(m-1) generators, which overtakes the shared-feature ensemble as m
grows. The counts below are closed-form; `test_param_table_agrees_with_built_
networks` pins them to actually-built networks.
"""

import numpy as np

from jointmatch.metrics import param_scale_table
from jointmatch.nets import ArchConfig

ms = range(2, 7)
rows = param_scale_table(ArchConfig(), ms)

by_model = {}
for r in rows:
    by_model.setdefault(r.model, {})[r.m] = int(r.value)

models = ["ali_ensemble", "ali_ensemble_shared", "cyclegan_analytic",
          "stargan_analytic"]
print(f"{'m':>3s} " + " ".join(f"{name:>20s}" for name in models))
for m in ms:
    print(f"{m:3d} " + " ".join(f"{by_model[name][m]:20d}" for name in models))

ali = np.array([by_model["ali_ensemble"][m] for m in ms], dtype=float)
cyc = np.array([by_model["cyclegan_analytic"][m] for m in ms], dtype=float)
pair_generators = (cyc - 257 * np.asarray(list(ms))) / 322
print(f"\nali_ensemble second differences: {np.diff(ali, n=2)} (exactly linear)")
print(f"cyclegan generator blocks: {[round(v) for v in pair_generators]}"
      f"  == m(m-1) = {[m * (m - 1) for m in ms]}")

crossover = next(m for m in ms
                 if by_model["cyclegan_analytic"][m] > by_model["ali_ensemble_shared"][m])
print(f"pairwise translation overtakes the shared ensemble at m = {crossover}")
