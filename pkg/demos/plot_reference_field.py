"""
Finite-difference reference and the effect of the PML strength
==============================================================

The reference field comes from a second-order stencil on the computational
square, PML included.  For a Gaussian source the unbounded-domain solution
is available as a one-dimensional radial integral, which gives an
independent yardstick.  We measure how far the truncated problem is from it
for a few PML widths and strengths.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from helmpinn.loss import SourceSpec, source
from helmpinn.metrics import eval_grid, relative_l2
from helmpinn.oracle import free_space_gaussian, interpolate, reference_solution
from helmpinn.pml import PmlConfig
from helmpinn.problem import HelmholtzProblem, pml_width_from_lambda

k = 1.59
problem = HelmholtzProblem(k)
pts = eval_grid(problem.L, 81)
exact = free_space_gaussian(pts, k)

print("width   sigma0   rel. error (real)   rel. error (imag)")
for width in (0.25, 0.5, 1.0):
    for sigma0 in (1.0, 2.0, 5.0):
        cfg = PmlConfig(problem.L, pml_width_from_lambda(problem, width), sigma0, k)
        ref = reference_solution(cfg, lambda q: source(q, SourceSpec(k)))
        u = interpolate(ref, pts)
        print(f"{width:5.2f}λ  {sigma0:6.1f}   {relative_l2(u.real, exact.real):17.2e}"
              f"   {relative_l2(u.imag, exact.imag):17.2e}")

# the full computational field for the widest layer
cfg = PmlConfig(problem.L, pml_width_from_lambda(problem, 1.0), 2.0, k)
ref = reference_solution(cfg, lambda q: source(q, SourceSpec(k)))
g = ref.grid
fig, axes = plt.subplots(1, 2, figsize=(9, 4))
for ax, vals, title in zip(axes, (ref.re, ref.im), ("real part", "imaginary part")):
    im = ax.imshow(vals, origin="lower", extent=(g.x0, g.x1, g.y0, g.y1), cmap="RdBu_r")
    ax.add_patch(plt.Rectangle((-problem.L, -problem.L), 2 * problem.L, 2 * problem.L,
                               fill=False, ls="--", color="k"))
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8)
fig.tight_layout()
fig.savefig("reference_field.svg")
print("wrote reference_field.svg")
