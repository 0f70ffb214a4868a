"""The finite-component and percolating schemes on the same configuration."""
import numpy as np

from stubmatch import (Deterministic, SimParams, Window, components, finite_component_scheme,
                       percolating_scheme, sample_config)

params = SimParams(Window(2, 40.0), 1.0, 1.0, Deterministic(3), Deterministic(3), seed=2)
cfg = sample_config(params)

# %% groups of three red and three blue points, each joined as K_{3,3}
finite = finite_component_scheme(cfg, params.red_law, params.blue_law)
comp = components(cfg, finite.matching)
print(f"{len(finite.groups)} groups, {len(finite.leftovers)} leftover points of {cfg.n}")
print("component sizes:", comp.histogram)

# %% one alternating path through the matched points, then the spare stubs
perc = percolating_scheme(cfg)
comp = components(cfg, perc.matching)
colors = cfg.colors[perc.path]
print(f"path length {len(perc.path)}, colors alternate: {bool(np.all(colors[1:] != colors[:-1]))}")
print(f"largest component holds {comp.largest_fraction:.3%} of the points")
print("metadata:", perc.metadata)
