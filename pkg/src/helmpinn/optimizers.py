"""Adam, L-BFGS, Adam followed by L-BFGS, and energy natural gradient descent.

Every optimizer works on the flat parameter vector of a model
(``model.values`` / ``model.with_values``).  ``train`` runs one of the
schedules against a ``PmlLoss`` and records the loss at the start of every
epoch.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import line_search

log = logging.getLogger(__name__)

KINDS = ("adam", "lbfgs", "adam_then_lbfgs", "engd")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam_then_lbfgs"
    learning_rate: float = 1e-3
    total_epochs: int = 5000
    switch_ratio: float = 0.7
    lbfgs_history: int = 50
    engd_damping: float | None = None
    engd_line_search: str = "backtracking"
    engd_learning_rate: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not 0 < self.switch_ratio < 1:
            raise ValueError("switch_ratio must lie in (0, 1)")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.engd_damping is not None and self.engd_damping < 0:
            raise ValueError("engd_damping must be >= 0")
        if self.engd_line_search not in ("none", "backtracking"):
            raise ValueError(f"unknown line search {self.engd_line_search!r}")
        if self.total_epochs < 0:
            raise ValueError("total_epochs must be >= 0")

    @property
    def switch_epoch(self) -> int:
        """First L-BFGS epoch of the ``adam_then_lbfgs`` schedule."""
        return int(np.floor(self.switch_ratio * self.total_epochs))

    def phase(self, epoch: int) -> str:
        if self.kind == "adam_then_lbfgs":
            return "adam" if epoch < self.switch_epoch else "lbfgs"
        return self.kind


# -- Adam -------------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grad, state: AdamState, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update; returns new params and new state."""
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    return params - lr * mhat / (np.sqrt(vhat) + eps), AdamState(m, v, t)


# -- L-BFGS -----------------------------------------------------------------

class _Memo:
    """Caches joint value/gradient evaluations keyed on the parameter bytes."""

    def __init__(self, fun):
        self.fun = fun
        self.key = None
        self.val = None
        self.calls = 0

    def __call__(self, x):
        key = x.tobytes()
        if key != self.key:
            self.val = self.fun(x)
            self.key = key
            self.calls += 1
        return self.val

    def f(self, x):
        return self(x)[0]

    def g(self, x):
        return self(x)[1]


class Lbfgs:
    """Limited-memory BFGS with a strong-Wolfe line search.

    ``value_and_grad(x) -> (f, g)``.  Call :meth:`step` repeatedly; each call
    performs one iteration and returns the new iterate with its value and
    gradient.
    """

    def __init__(self, value_and_grad, history: int = 50, c1: float = 1e-4, c2: float = 0.9):
        self.memo = _Memo(value_and_grad)
        self.history = history
        self.c1, self.c2 = c1, c2
        self.s: list[np.ndarray] = []
        self.y: list[np.ndarray] = []
        self.failed = False

    def reset(self):
        self.s.clear()
        self.y.clear()

    def direction(self, g):
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(self.s), reversed(self.y)):
            rho = 1.0 / (y @ s)
            a = rho * (s @ q)
            q -= a * y
            alphas.append((rho, a))
        if self.s:
            s, y = self.s[-1], self.y[-1]
            q *= (s @ y) / (y @ y)
        else:
            q *= min(1.0, 1.0 / max(np.abs(g).sum(), 1e-300))
        for (s, y), (rho, a) in zip(zip(self.s, self.y), reversed(alphas)):
            b = rho * (y @ q)
            q += s * (a - b)
        return -q

    def _search(self, x, f, g, d):
        res = line_search(self.memo.f, self.memo.g, x, d, gfk=g, old_fval=f,
                          c1=self.c1, c2=self.c2, maxiter=25)
        return res[0]

    def step(self, x, f, g):
        d = self.direction(g)
        if g @ d >= 0:
            self.reset()
            d = self.direction(g)
        with np.errstate(over="ignore", invalid="ignore"):
            alpha = self._search(x, f, g, d)
        if alpha is None and self.s:
            # stale curvature pairs; retry along the scaled steepest descent
            self.reset()
            d = self.direction(g)
            with np.errstate(over="ignore", invalid="ignore"):
                alpha = self._search(x, f, g, d)
        if alpha is None:
            self.failed = True
            return x, f, g
        x_new = x + alpha * d
        f_new, g_new = self.memo(x_new)
        if not f_new <= f:
            self.failed = True
            return x, f, g
        s, y = x_new - x, g_new - g
        if s @ y > 1e-10 * (y @ y):
            self.s.append(s)
            self.y.append(y)
            if len(self.s) > self.history:
                self.s.pop(0)
                self.y.pop(0)
        return x_new, f_new, g_new


@dataclass
class LbfgsResult:
    losses: list
    iterations: int
    converged: bool
    line_search_failed: bool


def lbfgs_run(params, loss_fn, grad_fn=None, max_iters: int = 100, history: int = 50,
              gtol: float = 1e-9):
    """Minimise ``loss_fn`` from ``params``.

    ``grad_fn`` may be omitted when ``loss_fn`` returns ``(value, grad)``.
    Returns ``(params, LbfgsResult)``; the result never has a higher loss
    than the input.
    """
    if grad_fn is None:
        vg = loss_fn
    else:
        def vg(x):
            return loss_fn(x), grad_fn(x)
    x = np.asarray(params, dtype=np.float64).copy()
    opt = Lbfgs(vg, history)
    f, g = opt.memo(x)
    losses = [f]
    it = 0
    converged = np.linalg.norm(g) < gtol
    while not converged and it < max_iters:
        x, f, g = opt.step(x, f, g)
        if opt.failed:
            break
        it += 1
        losses.append(f)
        converged = np.linalg.norm(g) < gtol
    return x, LbfgsResult(losses, it, bool(converged), opt.failed)


# -- ENGD -------------------------------------------------------------------

class EngdSolveError(RuntimeError):
    pass


def energy_matrix(jacobian: np.ndarray) -> np.ndarray:
    """Gram matrix ``(2/N) J^T J`` matching the ``(1/N) |r|^2`` loss scaling."""
    n = jacobian.shape[0] // 2
    return (2.0 / n) * (jacobian.T @ jacobian)


def default_damping(gram: np.ndarray) -> float:
    return 1e-6 * np.trace(gram) / gram.shape[0]


def engd_direction(residuals, jacobian, damping: float | None = None, rcond: float = 1e-12):
    """Natural gradient direction ``(G + damping I)^{-1} grad L`` and ``grad L``.

    Uses a Cholesky solve when ``damping > 0`` and an eigenvalue-truncated
    pseudo-inverse when ``damping == 0`` or the factorisation fails.  The
    undamped pseudo-inverse is taken through the SVD of ``J`` rather than
    the eigendecomposition of ``G``, which avoids squaring the condition
    number; eigenvalues of ``G`` below ``rcond * max`` are dropped.
    """
    r = np.asarray(residuals, dtype=np.float64).ravel()
    jac = np.asarray(jacobian, dtype=np.float64)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(jac))):
        raise EngdSolveError("non-finite residuals or Jacobian")
    n = r.size // 2
    grad = (2.0 / n) * (jac.T @ r)
    if damping == 0:
        # G = (2/n) J^T J and grad = (2/n) J^T r, so G^+ grad = J^+ r
        u, sv, vt = np.linalg.svd(jac, full_matrices=False)
        keep = sv ** 2 > rcond * sv.max(initial=0.0) ** 2
        delta = vt[keep].T @ ((u[:, keep].T @ r) / sv[keep])
        if not np.all(np.isfinite(delta)):
            raise EngdSolveError("natural gradient solve produced non-finite values")
        return delta, grad
    gram = energy_matrix(jac)
    if damping is None:
        damping = default_damping(gram)
    a = gram + damping * np.eye(gram.shape[0])
    delta = None
    if damping > 0:
        try:
            c = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
            delta = scipy.linalg.cho_solve(c, grad, check_finite=False)
        except np.linalg.LinAlgError:
            pass
    if delta is None:
        w, v = np.linalg.eigh(a)
        keep = w > rcond * w.max()
        delta = v[:, keep] @ ((v[:, keep].T @ grad) / w[keep])
    if not np.all(np.isfinite(delta)):
        raise EngdSolveError("natural gradient solve produced non-finite values")
    return delta, grad


def engd_step(params, residuals, jacobian, damping: float | None = None, lr: float = 1.0,
              loss_fn=None, max_halvings: int = 20):
    """One energy natural gradient update.

    With ``loss_fn`` the step ``lr`` is halved until the loss decreases
    (at most ``max_halvings`` times); if it never does, ``params`` are
    returned unchanged.
    """
    params = np.asarray(params, dtype=np.float64)
    delta, _ = engd_direction(residuals, jacobian, damping)
    if loss_fn is None:
        return params - lr * delta
    r = np.asarray(residuals).ravel()
    f0 = float(r @ r) / (r.size // 2)
    t = lr
    for _ in range(max_halvings + 1):
        cand = params - t * delta
        f = loss_fn(cand)
        if np.isfinite(f) and f < f0:
            return cand
        t *= 0.5
    return params


# -- training loop ----------------------------------------------------------

@dataclass
class TrainingTrace:
    losses: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    phases: list = field(default_factory=list)
    final_params: np.ndarray | None = None
    final_loss: float = float("nan")
    diverged: bool = False
    stalled: bool = False

    def __len__(self) -> int:
        return len(self.losses)

    def record(self, loss, wall, phase):
        self.losses.append(float(loss))
        self.wall_times.append(float(wall))
        self.phases.append(phase)

    def phase_times(self) -> dict:
        out: dict = {}
        for p, t in zip(self.phases, self.wall_times):
            out[p] = out.get(p, 0.0) + t
        return out


def train(model, loss, config: OptimizerConfig, seed: int = 0, callback=None):
    """Run ``config``'s schedule on ``loss`` (a ``PmlLoss``) starting from ``model``.

    ``losses[e]`` is the loss at the parameters entering epoch ``e`` and
    ``final_loss`` the loss after the last epoch.  Training is deterministic;
    ``seed`` is recorded for bookkeeping only.  Returns ``(model, trace)``.
    """
    trace = TrainingTrace()
    x = model.values.copy()
    adam = AdamState.zeros(x.size)
    lbfgs = None
    lbfgs_key = None

    def vg(epoch):
        def fun(v):
            return loss.value_and_grad(model.with_values(v), epoch)
        return fun

    epoch = 0
    for epoch in range(config.total_epochs):
        phase = config.phase(epoch)
        t0 = time.perf_counter()
        if phase == "adam":
            f, g = loss.value_and_grad(model.with_values(x), epoch)
            if not np.all(np.isfinite(g)) or not np.isfinite(f):
                trace.record(f, time.perf_counter() - t0, phase)
                trace.diverged = True
                break
            x, adam = adam_step(x, g, adam, config.learning_rate)
        elif phase == "lbfgs":
            key = loss.spec.active_curriculum(epoch)
            if lbfgs is None or key != lbfgs_key:
                lbfgs = Lbfgs(vg(epoch), config.lbfgs_history)
                lbfgs_key = key
            f, g = lbfgs.memo(x)
            if not np.isfinite(f):
                trace.record(f, time.perf_counter() - t0, phase)
                trace.diverged = True
                break
            if lbfgs.failed or np.linalg.norm(g) < 1e-9:
                trace.stalled = lbfgs.failed
            else:
                x, _, _ = lbfgs.step(x, f, g)
        else:
            m = model.with_values(x)
            r, jac = loss.residuals_and_jacobian(m, epoch)
            f = float(r @ r) / (r.size // 2)
            if not np.isfinite(f):
                trace.record(f, time.perf_counter() - t0, phase)
                trace.diverged = True
                break
            ls = None
            if config.engd_line_search == "backtracking":
                def ls(v, epoch=epoch):
                    return loss.value(model.with_values(v), epoch)
            try:
                x = engd_step(x, r, jac, config.engd_damping, config.engd_learning_rate, ls)
            except EngdSolveError:
                log.exception("ENGD solve failed at epoch %d", epoch)
                trace.record(f, time.perf_counter() - t0, phase)
                trace.diverged = True
                break
        trace.record(f, time.perf_counter() - t0, phase)
        if callback is not None:
            callback(epoch, f, phase)
    final = model.with_values(x)
    trace.final_params = x
    trace.final_loss = loss.value(final, config.total_epochs)
    if not np.isfinite(trace.final_loss):
        trace.diverged = True
    return final, trace
