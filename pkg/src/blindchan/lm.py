"""Damped least-squares (Levenberg-Marquardt) minimizer.

Normal equations are damped with the scaled-diagonal variant, so angle and
delay coordinates with very different curvature share one damping factor.
Steps are accepted only on strict cost decrease; the damping factor grows
on rejection and shrinks on acceptance.  An optional ``wrap`` callback is
applied to every accepted iterate so periodic coordinates stay in range.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

FArray = NDArray[np.float64]

_MAX_CONSECUTIVE_REJECTIONS = 20


class LmStallError(RuntimeError):
    """No acceptable step found after repeated damping escalations."""


@dataclass(frozen=True)
class LmOptions:
    max_iterations: int = 200
    damping_init: float = 1e-3
    damping_increase: float = 10.0
    damping_decrease: float = 0.1
    gradient_tol: float = 1e-8
    step_tol: float = 1e-10
    cost_tol: float = 1e-12

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        for name in ("damping_init", "gradient_tol", "step_tol", "cost_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.damping_increase <= 1.0:
            raise ValueError("damping_increase must be > 1")
        if not 0.0 < self.damping_decrease < 1.0:
            raise ValueError("damping_decrease must be in (0, 1)")


@dataclass
class LmResult:
    x: FArray
    cost: float
    iterations: int
    reason: str  # gradient | step | cost | max_iter
    cost_trace: list[float] = field(default_factory=list)


def central_difference_jacobian(fn, x0: FArray, steps) -> FArray:
    """Column-wise central differences of a vector-valued function."""
    x0 = np.asarray(x0, dtype=float)
    steps = np.broadcast_to(np.asarray(steps, dtype=float), x0.shape)
    cols = []
    for i, h in enumerate(steps):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((fn(xp) - fn(xm)) / (2.0 * h))
    return np.column_stack(cols)


def minimize(residual_fn, jacobian_fn, x0, opts: LmOptions = LmOptions(), wrap=None) -> LmResult:
    """Minimize ||residual_fn(x)||^2 starting from ``x0``.

    ``residual_fn`` maps a real vector to a real residual vector and
    ``jacobian_fn`` to its (m x n) Jacobian.  The gradient test is relative
    to max(1, cost), which makes the iterate sequence invariant to uniform
    residual rescaling.  Raises ``ValueError`` if the initial residual is
    not finite and :class:`LmStallError` if residuals stay non-finite
    through 20 consecutive damping escalations.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(residual_fn(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual is not finite at the initial point")
    cost = float(r @ r)
    trace = [cost]
    lam = opts.damping_init
    reason = "max_iter"
    iterations = 0

    for _ in range(opts.max_iterations):
        jac = np.asarray(jacobian_fn(x), dtype=float)
        grad = jac.T @ r
        if np.max(np.abs(grad), initial=0.0) <= opts.gradient_tol * max(1.0, cost):
            reason = "gradient"
            break
        jtj = jac.T @ jac
        diag = np.diag(jtj).copy()
        diag[diag <= 0.0] = 1.0  # dead coordinate: plain damping, zero gradient

        # Escalate damping until a strictly improving finite step appears.
        # Finite candidates that fail to improve shrink the step until the
        # step tolerance declares convergence at the current point; only
        # repeated non-finite evaluations are a hard failure.
        bad_evals = 0
        accepted = False
        while True:
            a = jtj + lam * np.diag(diag)
            try:
                delta = np.linalg.solve(a, -grad)
            except np.linalg.LinAlgError:
                delta = None
            finite_step = delta is not None and bool(np.all(np.isfinite(delta)))
            step_norm = float(np.linalg.norm(delta)) if finite_step else np.inf
            if finite_step and step_norm <= opts.step_tol * (float(np.linalg.norm(x)) + opts.step_tol):
                reason = "step"
                break
            if finite_step:
                x_new = x + delta
                if wrap is not None:
                    x_new = wrap(x_new)
                r_new = np.asarray(residual_fn(x_new), dtype=float)
                finite_eval = bool(np.all(np.isfinite(r_new)))
                cost_new = float(r_new @ r_new) if finite_eval else np.inf
            else:
                finite_eval = False
                cost_new = np.inf
            if cost_new < cost:
                accepted = True
                break
            lam *= opts.damping_increase
            bad_evals = bad_evals + 1 if not finite_eval else 0
            if bad_evals >= _MAX_CONSECUTIVE_REJECTIONS:
                raise LmStallError(
                    f"residual stayed non-finite through {bad_evals} damping "
                    f"escalations (cost {cost:.6g})"
                )

        if not accepted:
            break  # step-tolerance exit: no improving move within resolution

        decrease = cost - cost_new
        x, r, cost = x_new, r_new, cost_new
        trace.append(cost)
        iterations += 1
        lam *= opts.damping_decrease
        if decrease <= opts.cost_tol * cost:
            reason = "cost"
            break
        if step_norm <= opts.step_tol * (float(np.linalg.norm(x)) + opts.step_tol):
            reason = "step"
            break

    return LmResult(x=x, cost=cost, iterations=iterations, reason=reason, cost_trace=trace)
