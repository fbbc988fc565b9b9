"""Maximum-likelihood fitting of Coxian models to duration data."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import linalg
from .model import CoxianError, CoxianParams, build_generator, density
from .sampler import stream
from .simplex import nelder_mead

#: Offset letting interior absorption rates reach zero in log coordinates.
MU_OFFSET = 1e-10


class InvalidDataError(CoxianError):
    pass


@dataclass(frozen=True)
class FitOptions:
    n_starts: int = 10
    max_evals: int | None = None  # default 5000 * (2n - 1)
    fatol: float = 1e-8
    xatol: float = 1e-8
    init_low: float = 0.01
    init_high: float = 100.0
    step: float = 0.5
    seed: int = 0
    n_jobs: int = 1
    standard_errors: bool = True

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.fatol <= 0 or self.xatol <= 0:
            raise ValueError("tolerances must be > 0")
        if not 0 < self.init_low < self.init_high:
            raise ValueError("need 0 < init_low < init_high")


@dataclass(frozen=True)
class FitResult:
    params: CoxianParams
    loglik: float
    converged: bool
    n_iterations: int
    aic: float
    start_index: int
    standard_errors: np.ndarray | None = None
    n_evaluations: int = 0
    x0: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.params.n


def aic(loglik: float, n: int) -> float:
    return 2.0 * (2 * n - 1) - 2.0 * loglik


def check_data(data) -> np.ndarray:
    data = np.asarray(data, dtype=float).reshape(-1)
    if data.size == 0:
        raise InvalidDataError("no observations")
    if not np.all(np.isfinite(data)):
        raise InvalidDataError("observations must be finite")
    bad = np.nonzero(data <= 0)[0]
    if bad.size:
        raise InvalidDataError(f"observations must be > 0 (first offending index {bad[0]})")
    return data


def _loglik(p: CoxianParams, data: np.ndarray) -> float:
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        f = density(build_generator(p), data)
    if not np.all(f > 0) or not np.all(np.isfinite(f)):
        return -np.inf
    return float(np.sum(np.log(f)))


def loglik(p: CoxianParams, data) -> float:
    """Sum of log densities; ``-inf`` if any density underflows to zero."""
    return _loglik(p, check_data(data))


def to_free(p: CoxianParams) -> np.ndarray:
    n = p.n
    return np.concatenate([np.log(p.lam), np.log(p.mu[: n - 1] + MU_OFFSET), [np.log(p.mu[-1])]])


def from_free(z, n: int) -> CoxianParams:
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        lam = np.exp(z[: n - 1])
        mu_inner = np.maximum(np.exp(z[n - 1 : 2 * n - 2]) - MU_OFFSET, 0.0)
        mu_last = np.exp(z[-1:])
    return CoxianParams(lam, np.concatenate([mu_inner, mu_last]))


class _Bidiag(NamedTuple):
    diag: np.ndarray
    superdiag: np.ndarray


def _objective(z, n, data):
    # Hot path of the simplex search: same map as from_free, no validation objects.
    with np.errstate(over="ignore"):
        rates = np.exp(z)
    lam = rates[: n - 1]
    mu = rates[n - 1 :].copy()
    mu[: n - 1] = np.maximum(mu[: n - 1] - MU_OFFSET, 0.0)
    if not (np.all(np.isfinite(rates)) and np.all(lam > 0) and mu[-1] > 0):
        return np.inf
    Q = _Bidiag(-(np.append(lam, 0.0) + mu), lam)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        f = linalg.first_row_action(Q, data, mu)
        if not np.all(f > 0) or not np.all(np.isfinite(f)):
            return np.inf
        return -float(np.sum(np.log(f)))


def initial_points(data: np.ndarray, n: int, opts: FitOptions) -> list[np.ndarray]:
    """Start 0 replicates the exponential moment estimate across all rates;
    start ``k >= 1`` draws log-rates uniformly from stream ``k`` of the seed,
    so the first ``k`` starts never depend on ``n_starts``."""
    rate = 1.0 / float(np.mean(data))
    dim = 2 * n - 1
    points = [np.full(dim, np.log(rate))]
    if n > 1:
        points[0][n - 1 : 2 * n - 2] = np.log(rate + MU_OFFSET)
    lo, hi = np.log(opts.init_low * rate), np.log(opts.init_high * rate)
    for k in range(1, opts.n_starts):
        points.append(stream(opts.seed, k).uniform(lo, hi, size=dim))
    return points


def standard_errors(p: CoxianParams, data) -> np.ndarray | None:
    """Square roots of the diagonal of the inverse observed information.

    The Hessian of the log-likelihood in ``theta = (lam, mu)`` is taken by
    central differences with steps ``max(1e-5, 1e-4 |theta_i|)``.  Returns
    ``None`` when a step leaves the parameter space (an estimate on the
    boundary) or the information matrix is not positive definite.
    """
    data = check_data(data)
    theta = p.theta
    n = p.n
    k = theta.size
    h = np.maximum(1e-5, 1e-4 * np.abs(theta))

    def ll(th):
        try:
            q = CoxianParams.from_theta(th, n)
        except CoxianError:
            raise _OutOfDomain from None
        if np.any(th < 0):
            raise _OutOfDomain
        return _loglik(q, data)

    try:
        f0 = ll(theta)
        H = np.empty((k, k))
        for i in range(k):
            ei = np.zeros(k)
            ei[i] = h[i]
            H[i, i] = (ll(theta + ei) - 2.0 * f0 + ll(theta - ei)) / h[i] ** 2
            for j in range(i):
                ej = np.zeros(k)
                ej[j] = h[j]
                H[i, j] = H[j, i] = (
                    ll(theta + ei + ej) - ll(theta + ei - ej) - ll(theta - ei + ej) + ll(theta - ei - ej)
                ) / (4.0 * h[i] * h[j])
    except _OutOfDomain:
        return None
    info = -H
    if not np.all(np.isfinite(info)):
        return None
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        return None
    cov = np.linalg.inv(info)
    diag = np.diag(cov)
    if np.any(diag <= 0):
        return None
    return np.sqrt(diag)


class _OutOfDomain(Exception):
    pass


def _run_start(args) -> FitResult:
    data, n, x0, index, opts = args
    max_evals = opts.max_evals or 5000 * (2 * n - 1)
    res = nelder_mead(
        lambda z: _objective(z, n, data),
        x0,
        step=opts.step,
        fatol=opts.fatol,
        xatol=opts.xatol,
        max_evals=max_evals,
    )
    params = from_free(res.x, n)
    ll = _loglik(params, data)
    converged = res.converged and np.isfinite(ll)
    se = standard_errors(params, data) if (opts.standard_errors and converged) else None
    return FitResult(
        params=params,
        loglik=ll,
        converged=converged,
        n_iterations=res.n_iterations,
        aic=aic(ll, n),
        start_index=index,
        standard_errors=se,
        n_evaluations=res.n_evaluations,
        x0=x0,
    )


def fit_mle(data, n: int, opts: FitOptions | None = None) -> list[FitResult]:
    """Fit an ``n``-phase model from ``opts.n_starts`` starting points.

    One result per start, best log-likelihood first (ties broken by start
    index).  Equal-likelihood modes are all kept; no representation is
    preferred over another.
    """
    opts = opts or FitOptions()
    data = check_data(data)
    if n < 1:
        raise ValueError(f"number of phases must be >= 1, got {n}")
    jobs = [(data, n, x0, i, opts) for i, x0 in enumerate(initial_points(data, n, opts))]
    if opts.n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=opts.n_jobs) as pool:
            results = list(pool.map(_run_start, jobs))
    else:
        results = [_run_start(job) for job in jobs]
    return sorted(results, key=lambda r: (-r.loglik, r.start_index))


def best_result(results: list[FitResult]) -> FitResult | None:
    ok = [r for r in results if r.converged]
    return ok[0] if ok else None


def select_order(data, n_max: int, opts: FitOptions | None = None):
    """Fit ``n = 1..n_max`` and pick the order with the smallest AIC.

    Returns ``(best_n, table)`` where ``table[n]`` is the best converged fit
    of order ``n`` or ``None`` if no start converged.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    data = check_data(data)
    table = {n: best_result(fit_mle(data, n, opts)) for n in range(1, n_max + 1)}
    fitted = {n: r for n, r in table.items() if r is not None}
    if not fitted:
        return None, table
    best_n = min(fitted, key=lambda n: (fitted[n].aic, n))
    return best_n, table


def distinct_modes(results: list[FitResult], rtol: float = 1e-4) -> list[FitResult]:
    """Converged results with near-identical parameter vectors merged.

    Two fits are the same mode when ``max|theta_a - theta_b|`` is below
    ``rtol * max|theta_a|``.  The best-likelihood member of each group is kept.
    """
    modes: list[FitResult] = []
    for r in sorted(results, key=lambda r: (-r.loglik, r.start_index)):
        if not r.converged:
            continue
        th = r.params.theta
        if any(
            np.max(np.abs(th - m.params.theta)) < rtol * np.max(np.abs(m.params.theta)) for m in modes
        ):
            continue
        modes.append(r)
    return modes
