"""Segmented adaptive integration shared by the propagators."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp

DEFAULT_RTOL = 1e-11
DEFAULT_ATOL = 1e-13


class StepSizeUnderflow(RuntimeError):
    """The adaptive integrator could not meet its tolerance."""


def left_limit(b: float) -> float:
    # piecewise drives switch at t >= boundary, so a segment ending at b is
    # evaluated just below it
    return float(np.nextafter(b, -np.inf))


def sample_grid(a: float, b: float, dt: float) -> np.ndarray:
    n = max(2, int(math.ceil((b - a) / dt - 1e-9)) + 1)
    return np.linspace(a, b, n)


def segment_points(t_span, breakpoints=()) -> list[float]:
    a, b = float(t_span[0]), float(t_span[1])
    if not b > a:
        raise ValueError("t_span must be increasing")
    inner = sorted({float(x) for x in breakpoints if a < x < b})
    return [a, *inner, b]


def integrate_segments(rhs, y0, t_span, breakpoints=(), t_eval=None, *, rtol=DEFAULT_RTOL,
                       atol=DEFAULT_ATOL, method="DOP853"):
    """Integrate ``rhs(t, y)`` piecewise, restarting at each breakpoint.

    Inside a segment ``[a, b)`` the right-hand side is never evaluated at or
    beyond ``b``. Returns the sample times and states (shape ``(n, len(y0))``);
    when ``t_eval`` is None only the final state is returned as a single
    sample. Breakpoints that fall inside ``t_eval`` appear once.
    """
    pts = segment_points(t_span, breakpoints)
    y = np.asarray(y0, dtype=float)
    if t_eval is not None:
        t_eval = np.unique(np.clip(np.asarray(t_eval, dtype=float), pts[0], pts[-1]))
    times, states = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        edge = left_limit(b)

        def f(t, yy, edge=edge):
            return rhs(min(t, edge), yy)

        grid = None
        if t_eval is not None:
            grid = t_eval[(t_eval >= a) & (t_eval <= b)]
            if times and grid.size and grid[0] == a:
                grid = grid[1:]
            if grid.size == 0 or grid[-1] != b:
                grid = np.append(grid, b)
                drop_last = b not in t_eval
            else:
                drop_last = False
        sol = solve_ivp(f, (a, b), y, method=method, t_eval=grid, rtol=rtol, atol=atol)
        if sol.status != 0:
            raise StepSizeUnderflow(f"integration failed on [{a}, {b}]: {sol.message}")
        y = sol.y[:, -1]
        if t_eval is not None:
            keep = slice(None, -1) if drop_last else slice(None)
            times.append(sol.t[keep])
            states.append(sol.y.T[keep])
    if t_eval is None:
        return np.array([pts[-1]]), y[None, :]
    return np.concatenate(times), np.concatenate(states)
