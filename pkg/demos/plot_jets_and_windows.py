"""
Derivative jets and partition-of-unity windows
==============================================

A sine network carries its value, gradient and pure second derivatives
forward in one pass.  Here we compare those jets with finite differences,
then look at the four cosine windows that glue the subdomain networks of an
FBPINN together.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from helmpinn.checks import fd_jet
from helmpinn.decomposition import grid_decomposition, window_jets
from helmpinn.diffnet import Architecture, forward_jet, init_params

# a random 3x16 network and a handful of points
arch = Architecture(3, 16)
params = init_params(arch, seed=1, omega0=3.0)
rng = np.random.default_rng(0)
pts = rng.uniform(-1, 1, size=(8, 2))

jet = forward_jet(params, pts)
fd = fd_jet(lambda q: forward_jet(params, q).value, pts, h=1e-3, order=4)
for name, exact, approx in zip(["dx", "dy", "dxx", "dyy"], jet.data[1:], fd):
    err = np.max(np.abs(exact - approx)) / np.max(np.abs(exact))
    print(f"{name:>4}: max relative deviation from finite differences {err:.1e}")

# windows of the 2x2 decomposition with overlap 1.5 over [-6, 6]^2
dec = grid_decomposition(6.0, grid=(2, 2), overlap=1.5)
t = np.linspace(-6, 6, 241)
xx, yy = np.meshgrid(t, t)
grid_pts = np.column_stack([xx.ravel(), yy.ravel()])
phi = window_jets(grid_pts, dec)[:, 0]
print("max |sum of windows - 1| =", np.max(np.abs(phi.sum(axis=0) - 1)))

fig, axes = plt.subplots(1, 4, figsize=(12, 3))
for j, ax in enumerate(axes):
    ax.imshow(phi[j].reshape(xx.shape), origin="lower", extent=(-6, 6, -6, 6), vmin=0, vmax=1)
    ax.plot(*dec.centers[j], "r+")
    ax.set_title(f"window {j}")
fig.tight_layout()
fig.savefig("windows.svg")
print("wrote windows.svg")
