"""Shared great-circle line search used by the sphere-constrained optimizers.

All three projected-gradient schemes move along

    x(t) = cos(t) * x + sin(t) * radius * u,   t in [0, pi/2],

with u the unit tangent direction.  Because <x, u> = 0 and ||x|| = radius,
every candidate stays on the sphere, and t = 0 (the current iterate) is
always on the grid, so an accepted step never worsens the objective.
"""

from __future__ import annotations

import numpy as np

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def sphere_line_search(
    objective_batch,
    x: np.ndarray,
    direction: np.ndarray,
    radius: float,
    n_grid: int = 64,
    refine_iters: int = 20,
):
    """Minimize objective over the great-circle arc from x toward direction.

    objective_batch maps a (B, K) candidate array to (B,) values.  Coarse
    uniform grid on [0, pi/2] first, then one golden-section refinement pass
    on the bracketing interval.  Returns (x_new, f_new, t_best).
    """
    u = direction / np.linalg.norm(direction)

    def candidates(ts):
        ts = np.asarray(ts, dtype=float)
        return np.cos(ts)[:, None] * x[None, :] + np.sin(ts)[:, None] * (radius * u)[None, :]

    ts = np.linspace(0.0, np.pi / 2.0, n_grid)
    vals = np.asarray(objective_batch(candidates(ts)), dtype=float)
    k = int(np.argmin(vals))
    t_best = float(ts[k])
    f_best = float(vals[k])

    a = float(ts[max(k - 1, 0)])
    b = float(ts[min(k + 1, n_grid - 1)])

    def probe(t: float) -> float:
        nonlocal t_best, f_best
        v = float(objective_batch(candidates([t]))[0])
        if v < f_best:
            t_best, f_best = float(t), v
        return v

    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = probe(c), probe(d)
    for _ in range(refine_iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = probe(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = probe(d)

    x_new = np.cos(t_best) * x + np.sin(t_best) * radius * u
    return x_new, f_best, t_best
