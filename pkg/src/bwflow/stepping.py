"""Shared adaptive integration driver.

All matrix ODEs in the package run through a Dormand-Prince 5(4) embedded
pair (scipy's RK45) on a stacked real representation of the state.  The
per-step error control keeps the local error below tol * (1 + |y_i|) in
every component, which is at least as strict as tol * (1 + ||y||).

The driver exposes two hooks per accepted step:

* ``project`` receives the state and returns a structurally cleaned copy
  (re-hermitized / re-symmetrized); the stored derivative is refreshed so
  the FSAL property of the pair stays consistent.
* ``on_step`` receives (t, y) for recording and event checks; returning
  False stops the integration early.

Step-size underflow (proposed step below h_min, or a failed scipy step)
raises StepSizeUnderflow; callers classify it further.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import RK45

from .errors import StepSizeUnderflow


def drive_rk45(fun, t0, y0, t_bound, rtol, atol, h_min=1e-12,
               project=None, on_step=None, max_step=np.inf, first_step=None):
    """Run RK45 from t0 to t_bound with projection and event hooks.

    Returns the solver in its final state ('finished' or stopped early by
    ``on_step``).  Raises StepSizeUnderflow when the step size collapses.
    """
    if t_bound < t0:
        raise ValueError("backward integration not supported")
    solver = RK45(fun, t0, np.asarray(y0, dtype=float), t_bound,
                  max_step=max_step, rtol=rtol, atol=atol, first_step=first_step)
    while solver.status == "running":
        solver.step()
        if solver.status == "failed":
            raise StepSizeUnderflow(
                f"integration stalled at t = {solver.t:.6g}")
        if project is not None:
            y_clean = project(solver.y.copy())
            solver.y = y_clean
            solver.f = fun(solver.t, y_clean)
        if on_step is not None:
            keep_going = on_step(solver.t, solver.y.copy())
            if keep_going is False:
                return solver
        if solver.status == "running" and solver.h_abs < h_min:
            raise StepSizeUnderflow(
                f"step size {solver.h_abs:.3e} fell below h_min = {h_min:.3e} "
                f"at t = {solver.t:.6g}")
    return solver
