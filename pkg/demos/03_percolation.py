"""Largest-component trends and the good-cube lattice.

Fixed degree k: the giant component appears as k grows. Degrees in {1, 2}:
components are paths and cycles and the largest one vanishes relative to the
window.
"""
import numpy as np

from stubmatch import (Deterministic, Explicit, SimParams, Window, components, renormalize,
                       run_greedy, sample_config)


def largest(params):
    cfg = sample_config(params)
    return components(cfg, run_greedy(cfg))


# %% degree sweep at L = 50
for k in (1, 2, 3, 5, 8):
    values = [largest(SimParams(Window(2, 50.0), 1.0, 1.0, Deterministic(k), Deterministic(k), s)).largest_fraction
              for s in range(5)]
    print(f"k={k:2d}  median largest fraction {np.median(values):.4f}")

# %% degrees one or two
law = Explicit((0.5, 0.5))
for side in (25.0, 50.0, 100.0):
    reps = [largest(SimParams(Window(2, side), 1.0, 1.0, law, law, s)) for s in range(5)]
    print(f"L={side:5.0f}  largest {np.median([r.largest_fraction for r in reps]):.4f}  "
          f"other shapes {sum(r.other for r in reps)}")

# %% renormalization cubes
cfg = sample_config(SimParams(Window(2, 120.0), 1.0, 1.0, Deterministic(1), Deterministic(1), seed=11))
for a, n in ((1.0, 9), (2.0, 20), (3.0, 33), (4.0, 48)):
    lat = renormalize(cfg, a, n)
    print(f"a={a:.0f} n={n:2d}  m={lat.m} k={lat.k}  good {lat.good_fraction:.3f}  spans {lat.percolates}")
