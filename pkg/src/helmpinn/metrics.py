"""Error metrics and loss-curve normalisation."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .oracle import ComplexGridField, interpolate


def relative_l2(approx, ref) -> float:
    approx = np.asarray(approx, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if approx.shape != ref.shape:
        raise ValueError("approx and ref must have the same length")
    norm = np.linalg.norm(ref)
    if norm == 0.0:
        raise ValueError("relative L2 error is undefined for a zero reference")
    return float(np.linalg.norm(approx - ref) / norm)


@dataclass(frozen=True)
class ErrorReport:
    rel_l2_real: float
    rel_l2_imag: float
    eval_points: int
    method: str = ""
    optimizer: str = ""
    k: float = float("nan")
    L_pml: float = float("nan")
    seed: int = -1

    def as_dict(self) -> dict:
        return asdict(self)


def eval_grid(L: float, n: int = 201) -> np.ndarray:
    """Uniform ``n x n`` points over the physical square ``[-L, L]^2``."""
    t = np.linspace(-L, L, n)
    xx, yy = np.meshgrid(t, t, indexing="xy")
    return np.column_stack([xx.ravel(), yy.ravel()])


def evaluate_model(model, reference: ComplexGridField, L: float, n: int = 201,
                   **tags) -> ErrorReport:
    """Relative L2 errors of real and imaginary parts on the physical domain only."""
    pts = eval_grid(L, n)
    ref = interpolate(reference, pts)
    u = model.jet(pts).value
    return ErrorReport(
        rel_l2_real=relative_l2(u[:, 0], ref.real),
        rel_l2_imag=relative_l2(u[:, 1], ref.imag),
        eval_points=len(pts),
        **tags,
    )


def normalize_trace(losses) -> np.ndarray:
    """Losses divided by the first one."""
    losses = np.asarray(getattr(losses, "losses", losses), dtype=np.float64)
    if losses.size == 0:
        raise ValueError("empty trace")
    if losses[0] == 0.0:
        raise ValueError("cannot normalise a trace whose first loss is zero")
    return losses / losses[0]
