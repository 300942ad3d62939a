# coding: utf-8

# # From a detection box and a depth image to a 3D door
#
# We render one door of a synthetic corridor from a camera standing in front
# of it, then rebuild its corners from the detection box, the two vertical
# edge segments and the depth image.

# %%
import numpy as np

from macroloc.geometry import Kind
from macroloc.reconstruction import join_segments, reconstruct_feature
from macroloc.scenegen import SceneSpec, default_intrinsics, generate_reference, look_at_pose, render_depth_scene

door = next(f for f in generate_reference(SceneSpec()) if f.kind is Kind.DOOR)
K = default_intrinsics()
pose = look_at_pose(door.centroid + (0.8, 3.0, 0.3), door.centroid)
depth, box, segments = render_depth_scene(door, K, pose, split_pieces=3)
print("box:", box)
print(len(segments), "edge pieces before joining")

# %%
joined = join_segments(segments)
print(len(joined), "segments after joining")
rebuilt = reconstruct_feature(box, joined, depth, K, pose, feature_id=door.id)
print(np.round(rebuilt.corners, 4))
err = max(np.linalg.norm(door.corners - c, axis=1).min() for c in rebuilt.corners)
print(f"largest corner error {err:.2e} m")

# %% [markdown]
# Punch a hole in the depth image over the left edge: with fewer than 8 of
# the 20 samples left, the side can no longer be fitted.

# %%
left = min(joined, key=lambda s: s.midpoint[0])
col = int(round(left.midpoint[0]))
depth.depth[:, col - 5:col + 6] = 0.0
try:
    reconstruct_feature(box, joined, depth, K, pose)
except ValueError as exc:
    print("reconstruction refused:", exc)
