"""
Energy natural gradient against Adam
====================================

On a small PINN both optimizers see the same residuals.  ENGD solves a
damped Gauss-Newton system per step, so it takes far fewer steps, each of
them more expensive.  We print loss against wall time for both.
"""

import time

import numpy as np

from helmpinn.diffnet import Architecture
from helmpinn.loss import PmlLoss, SourceSpec, sample_collocation
from helmpinn.models import init_pinn
from helmpinn.optimizers import OptimizerConfig, train
from helmpinn.pml import PmlConfig
from helmpinn.problem import HelmholtzProblem, pml_width_from_lambda

problem = HelmholtzProblem(1.0, L=2.0)
cfg = PmlConfig(problem.L, pml_width_from_lambda(problem, 0.5), 2.0, problem.k)
colloc = sample_collocation(1000, cfg.half_width, sampler="grid")
loss = PmlLoss(colloc, SourceSpec(problem.k), cfg)
model = init_pinn(Architecture(2, 16), cfg.half_width, seed=0, omega0=problem.k * cfg.half_width)

for kind, epochs in (("adam", 1500), ("engd", 40)):
    t0 = time.perf_counter()
    _, trace = train(model, loss, OptimizerConfig(kind, total_epochs=epochs))
    wall = np.cumsum(trace.wall_times)
    print(f"{kind}: {epochs} epochs in {time.perf_counter() - t0:.1f}s")
    for frac in (0.1, 0.5, 1.0):
        i = int(frac * (len(trace) - 1))
        print(f"    t = {wall[i]:6.2f}s   loss {trace.losses[i]:.3e}")
    print(f"    final loss {trace.final_loss:.3e}")
