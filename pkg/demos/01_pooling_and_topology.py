# %% [markdown]
# # Multi-scale max pooling as a topology signal
#
# Max pooling keeps the strongest response in each window. Comparing the
# pooled pyramids of a prediction and its target penalises structures that
# appear or vanish at coarse scales, even when the pixel overlap looks fine.

# %%
import numpy as np

from tiuloss import build_pyramid, generate, maxpool2d, normalize, one_hot, topo_loss

grid = np.array([[0.1, 0.2], [0.3, 0.4]])
print(maxpool2d(grid, 2))

# %% [markdown]
# Windows never overlap and the last ones may be ragged: a 7x5 grid pooled
# with k=3 gives a 3x2 result.

# %%
x = np.arange(35.0).reshape(7, 5)
print(maxpool2d(x, 3))

# %% [markdown]
# Build the pyramid of a phantom's one-hot encoding. Each level is still
# binary, since the max of 0/1 values is 0 or 1.

# %%
mask = generate().mask
g = one_hot(mask, 4)
for k, level in build_pyramid(g).items():
    print(f"k={k:2d}  level shape {level.shape}  pupil present in {int(level[3].sum())} cells")

# %% [markdown]
# A prediction that misses the pupil entirely pays at every scale.

# %%
logits = 8.0 * g
logits[3] = -8.0
p = normalize(logits)
loss, grad = topo_loss(p, g)
print(f"L1 = {loss:.4f}; gradient nonzero at {int((grad != 0).sum())} coordinates")
print(f"L1 against itself = {topo_loss(g, g)[0]}")
