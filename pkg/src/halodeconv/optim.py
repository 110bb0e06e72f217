"""Projected gradient descent with Barzilai-Borwein steps.

Used by both the object and the PSF solvers: the feasible sets are simple
boxes (``x >= lower``, optionally a support mask) whose projection is a
pixel-wise clamp.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class SolveInfo:
    n_iter: int = 0
    n_eval: int = 0
    costs: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    def to_dict(self):
        return {
            "n_iter": self.n_iter,
            "n_eval": self.n_eval,
            "cost_init": self.costs[0] if self.costs else None,
            "cost_final": self.costs[-1] if self.costs else None,
            "converged": self.converged,
            "reason": self.reason,
        }


def projected_gradient(fun, x0, project, max_iter=500, tol=1e-6, patience=5,
                       armijo=1e-4, max_backtrack=40, step0=None):
    """Minimize ``fun`` over the set described by ``project``.

    ``fun(x)`` returns ``(cost, grad)``.  Steps alternate between the two
    Barzilai-Borwein lengths and are shortened by Armijo backtracking along
    the projection arc, so accepted costs never increase.  Iteration stops
    when the relative decrease stays below ``tol`` for ``patience``
    consecutive iterations, when backtracking fails, or at ``max_iter``.

    Returns ``(x, info)``; ``info.costs`` is the accepted-cost trace.
    """
    x = project(np.array(x0, dtype=np.float64))
    f, g = fun(x)
    info = SolveInfo(n_eval=1, costs=[float(f)])
    if not np.isfinite(f):
        raise FloatingPointError(f"non-finite initial cost {f}")
    if step0 is None:
        gmax = float(np.max(np.abs(g)))
        xmax = float(np.max(np.abs(x)))
        step0 = (0.1 * xmax / gmax if xmax > 0 else 1.0 / gmax) if gmax > 0 else 1.0
    step = step0
    stall = 0
    for it in range(1, max_iter + 1):
        info.n_iter = it
        t = step
        accepted = False
        for _ in range(max_backtrack):
            x_new = project(x - t * g)
            dx = x_new - x
            decrease = float(np.vdot(g, dx))
            if decrease >= 0.0:
                # projected step is not a descent direction: stationary
                break
            f_new, g_new = fun(x_new)
            info.n_eval += 1
            if not np.isfinite(f_new):
                raise FloatingPointError(
                    f"non-finite cost at iteration {it}; "
                    f"trace tail {info.costs[-5:]}")
            if f_new <= f + armijo * decrease:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            info.converged = True
            info.reason = "no descent step"
            break
        dg = g_new - g
        sy = float(np.vdot(dx, dg))
        if sy > 0:
            if it % 2:
                step = float(np.vdot(dx, dx)) / sy
            else:
                step = sy / float(np.vdot(dg, dg))
        else:
            step = 2.0 * t
        rel = (f - f_new) / max(abs(f), 1e-300)
        x, f, g = x_new, f_new, g_new
        info.costs.append(float(f))
        stall = stall + 1 if rel < tol else 0
        if stall >= patience:
            info.converged = True
            info.reason = "relative decrease below tol"
            break
    else:
        info.reason = "max_iter"
    log.debug("projected gradient: %d iters, %d evals, cost %.6g (%s)",
              info.n_iter, info.n_eval, f, info.reason)
    return x, info
