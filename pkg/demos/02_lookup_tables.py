# coding: utf-8

# # How the lookup tables cut continuous values into bins
#
# The training values are the neighbour distances and angles measured across
# the whole reference model. A Gaussian KDE smooths them and every local
# minimum of the density becomes a bin edge.

# %%
import numpy as np

from macroloc.binning import KdeModel, build_lookup_table, quantize
from macroloc.descriptor import collect_training_values
from macroloc.scenegen import SceneSpec, generate_reference

reference = generate_reference(SceneSpec(door_count=40, window_count=20, extent=(120.0, 8.0, 3.0)))
distances, angles = collect_training_values(reference)
print(len(distances), "distances,", len(angles), "angles")

# %%
for name, values in (("distance", distances), ("angle", angles)):
    kde = KdeModel.fit(values)
    table = build_lookup_table(values, name)
    print(f"{name}: bandwidth {kde.bandwidth:.3f}, {table.bin_count} bins, edges {table.boundaries}")
    counts = np.bincount([quantize(table, v) for v in values], minlength=table.bin_count)
    print("   values per bin:", counts.tolist())

# %% [markdown]
# A coarse text plot of the distance density with the bin edges marked.

# %%
kde = KdeModel.fit(distances)
table = build_lookup_table(distances, "distance")
grid = np.linspace(min(distances), max(distances), 40)
dens = kde(grid)
for x, d in zip(grid, dens):
    edge = " <- edge" if any(abs(x - b) < (grid[1] - grid[0]) / 2 for b in table.boundaries) else ""
    print(f"{x:6.2f} {'#' * int(60 * d / dens.max())}{edge}")
