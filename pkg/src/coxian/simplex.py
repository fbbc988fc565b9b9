"""Nelder-Mead downhill simplex minimiser."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    converged: bool
    n_iterations: int
    n_evaluations: int


def nelder_mead(
    func,
    x0,
    step=0.5,
    fatol: float = 1e-8,
    xatol: float = 1e-8,
    max_evals: int | None = None,
    alpha: float = 1.0,
    gamma: float = 2.0,
    rho: float = 0.5,
    sigma: float = 0.5,
) -> SimplexResult:
    """Minimise ``func`` starting from ``x0``.

    Parameters
    ----------
    func : callable
        Objective taking a 1-d array.  Non-finite values are treated as
        ``+inf`` (the point is simply never preferred).
    x0 : array_like
        Starting vertex.
    step : float or array_like
        Offset along each coordinate used to build the initial simplex.
    fatol, xatol : float
        Stop when the spread of function values over the simplex is below
        ``fatol`` *and* every vertex lies within ``xatol`` (max-norm) of the
        best one.
    max_evals : int, optional
        Evaluation budget; defaults to ``5000 * len(x0)``.
    alpha, gamma, rho, sigma : float
        Reflection, expansion, contraction and shrink coefficients.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    if max_evals is None:
        max_evals = 5000 * dim
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        value = float(func(x))
        return value if np.isfinite(value) else np.inf

    steps = np.broadcast_to(np.asarray(step, dtype=float), (dim,))
    sim = np.vstack([x0, x0 + np.diag(steps)])
    fsim = np.array([f(x) for x in sim])
    iterations = 0
    converged = False

    while evals < max_evals:
        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
        if (
            np.isfinite(fsim[0])
            and fsim[-1] - fsim[0] <= fatol
            and np.max(np.abs(sim[1:] - sim[0])) <= xatol
        ):
            converged = True
            break
        iterations += 1
        centroid = sim[:-1].mean(axis=0)
        worst = sim[-1]

        xr = centroid + alpha * (centroid - worst)
        fr = f(xr)
        if fr < fsim[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                sim[-1], fsim[-1] = xe, fe
            else:
                sim[-1], fsim[-1] = xr, fr
            continue
        if fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
            continue

        if fr < fsim[-1]:
            xc = centroid + rho * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                sim[-1], fsim[-1] = xc, fc
                continue
        else:
            xc = centroid + rho * (worst - centroid)
            fc = f(xc)
            if fc < fsim[-1]:
                sim[-1], fsim[-1] = xc, fc
                continue

        sim[1:] = sim[0] + sigma * (sim[1:] - sim[0])
        fsim[1:] = [f(x) for x in sim[1:]]

    order = np.argsort(fsim, kind="stable")
    sim, fsim = sim[order], fsim[order]
    return SimplexResult(
        x=sim[0].copy(),
        fun=float(fsim[0]),
        converged=converged,
        n_iterations=iterations,
        n_evaluations=evals,
    )
