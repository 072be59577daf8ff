"""PINN and FBPINN solvers for the 2D Helmholtz equation with perfectly matched layers."""
