"""Coxian phase-type parameters, generators and closed-form summaries.

A Coxian model of order ``n`` starts in phase 1, leaves phase ``k`` either
forward (rate ``lam[k]``) or to absorption (rate ``mu[k]``), and always
absorbs from the last phase.  The generator restricted to the transient
phases is upper bidiagonal and is stored compactly as ``(diag, superdiag)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import linalg

#: Absolute slack applied when checking rate constraints.
RATE_SLACK = 1e-12

DEFAULT_MAX_ORDER = 20
MAX_ORDER_ENV = "COXIAN_MAX_ORDER"


class CoxianError(ValueError):
    """Base class for validation failures."""


class InvalidParamsError(CoxianError):
    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (index {index})")
        self.index = index


class InvalidGeneratorError(CoxianError):
    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (index {index})")
        self.index = index


class OrderTooLargeError(CoxianError):
    pass


def max_order() -> int:
    """Order cap, overridable through ``COXIAN_MAX_ORDER``."""
    raw = os.environ.get(MAX_ORDER_ENV)
    if raw is None:
        return DEFAULT_MAX_ORDER
    try:
        value = int(raw)
    except ValueError as exc:
        raise CoxianError(f"{MAX_ORDER_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise CoxianError(f"{MAX_ORDER_ENV} must be >= 1, got {value}")
    return value


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class CoxianParams:
    """Rate vector ``(lam_1..lam_{n-1}, mu_1..mu_n)`` of an ``n``-phase model.

    Interior absorption rates may be exactly zero; the last one must be
    strictly positive so that the distribution is proper.
    """

    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        lam = _frozen(self.lam)
        mu = _frozen(self.mu)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)
        n = mu.size
        if n < 1:
            raise InvalidParamsError("at least one phase is required")
        if lam.size != n - 1:
            raise InvalidParamsError(f"lam must have length {n - 1}, got {lam.size}")
        for i, v in enumerate(lam):
            if not math.isfinite(v):
                raise InvalidParamsError("lam must be finite", i)
            if v <= 0.0:
                raise InvalidParamsError(f"lam must be > 0, got {v!r}", i)
        for i, v in enumerate(mu):
            if not math.isfinite(v):
                raise InvalidParamsError("mu must be finite", i)
            if v < -RATE_SLACK:
                raise InvalidParamsError(f"mu must be >= 0, got {v!r}", i)
        if mu[-1] <= 0.0:
            raise InvalidParamsError(f"last absorption rate must be > 0, got {mu[-1]!r}", n - 1)
        if np.any(mu < 0.0):
            snapped = np.maximum(mu, 0.0)
            snapped.flags.writeable = False
            object.__setattr__(self, "mu", snapped)

    @property
    def n(self) -> int:
        return int(self.mu.size)

    @property
    def theta(self) -> np.ndarray:
        """Flat parameter vector ``(lam..., mu...)`` of length ``2n - 1``."""
        return np.concatenate([self.lam, self.mu])

    @classmethod
    def from_theta(cls, theta, n: int) -> CoxianParams:
        theta = np.asarray(theta, dtype=float)
        if theta.size != 2 * n - 1:
            raise InvalidParamsError(f"theta must have length {2 * n - 1}, got {theta.size}")
        return cls(theta[: n - 1], theta[n - 1 :])

    def los(self) -> np.ndarray:
        """Expected sojourn in each phase, ``1 / (lam_k + mu_k)``."""
        lam = np.append(self.lam, 0.0)
        return 1.0 / (lam + self.mu)

    def __eq__(self, other):
        if not isinstance(other, CoxianParams):
            return NotImplemented
        return np.array_equal(self.lam, other.lam) and np.array_equal(self.mu, other.mu)

    def __hash__(self):
        return hash((self.lam.tobytes(), self.mu.tobytes()))

    def __repr__(self):
        return f"CoxianParams(lam={self.lam.tolist()}, mu={self.mu.tolist()})"


@dataclass(frozen=True, eq=False)
class Generator:
    """Upper-bidiagonal sub-generator in compact storage.

    ``exit_rates`` (the absorbing vector ``q = -Q 1``) is carried alongside
    the two diagonals.  When omitted it is derived by subtraction; when the
    generator comes from :func:`build_generator` it holds the original
    absorption rates, so converting back loses nothing to rounding.
    """

    diag: np.ndarray
    superdiag: np.ndarray
    exit_rates: np.ndarray = field(default=None)

    def __post_init__(self):
        diag = _frozen(self.diag)
        sup = _frozen(self.superdiag)
        n = diag.size
        if n < 1:
            raise InvalidGeneratorError("generator must have at least one phase")
        if sup.size != n - 1:
            raise InvalidGeneratorError(f"superdiag must have length {n - 1}, got {sup.size}")
        if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(sup))):
            raise InvalidGeneratorError("generator entries must be finite")
        for i, v in enumerate(diag):
            if v >= 0.0:
                raise InvalidGeneratorError(f"diagonal must be < 0, got {v!r}", i)
        for i, v in enumerate(sup):
            if v <= 0.0:
                raise InvalidGeneratorError(f"superdiagonal must be > 0, got {v!r}", i)
            if v > -diag[i] + RATE_SLACK:
                raise InvalidGeneratorError(
                    f"superdiagonal {v!r} exceeds -diag {-diag[i]!r} (negative absorption)", i
                )
        if self.exit_rates is None:
            q = -diag - np.append(sup, 0.0)
            q = np.maximum(q, 0.0)
        else:
            q = np.array(self.exit_rates, dtype=float).reshape(-1)
            if q.size != n:
                raise InvalidGeneratorError(f"exit_rates must have length {n}, got {q.size}")
            if np.any(q < 0.0):
                raise InvalidGeneratorError("exit rates must be >= 0")
        q.flags.writeable = False
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "superdiag", sup)
        object.__setattr__(self, "exit_rates", q)

    @property
    def n(self) -> int:
        return int(self.diag.size)

    def dense(self) -> np.ndarray:
        """Materialize the ``n x n`` matrix (for diagnostics and oracles)."""
        return np.diag(self.diag) + np.diag(self.superdiag, 1)

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.diag) + np.append(np.abs(self.superdiag), 0.0)))

    def __eq__(self, other):
        if not isinstance(other, Generator):
            return NotImplemented
        return np.array_equal(self.diag, other.diag) and np.array_equal(self.superdiag, other.superdiag)

    def __hash__(self):
        return hash((self.diag.tobytes(), self.superdiag.tobytes()))

    def __repr__(self):
        return f"Generator(diag={self.diag.tolist()}, superdiag={self.superdiag.tolist()})"


@dataclass(frozen=True)
class SummaryStats:
    los: np.ndarray
    exit_probs: np.ndarray
    moments: np.ndarray


def build_generator(p: CoxianParams) -> Generator:
    lam = np.append(p.lam, 0.0)
    return Generator(-(lam + p.mu), p.lam, exit_rates=p.mu)


def params_from_generator(Q: Generator) -> CoxianParams:
    return CoxianParams(Q.superdiag, Q.exit_rates)


def absorbing_vector(Q: Generator) -> np.ndarray:
    return Q.exit_rates.copy()


def moments(Q: Generator, m: int) -> np.ndarray:
    """First ``m`` raw moments ``E[T^r] = r! p (-Q)^{-r} 1``.

    Each order costs one back-substitution; the factorial is folded into
    the iteration so no intermediate ``r!`` is formed.
    """
    if m < 1:
        raise ValueError(f"number of moments must be >= 1, got {m}")
    x = np.ones(Q.n)
    out = np.empty(m)
    for r in range(1, m + 1):
        with np.errstate(over="ignore"):
            x = r * linalg.solve_neg(Q, x)
        if not np.all(np.isfinite(x)):
            raise OverflowError(f"moment of order {r} overflows double precision")
        out[r - 1] = x[0]
    return out


def moment(Q: Generator, r: int) -> float:
    if r < 1:
        raise ValueError(f"moment order must be >= 1, got {r}")
    return float(moments(Q, r)[-1])


def density(Q: Generator, t):
    """``f(t) = p exp(Qt) q``; accepts a scalar or an array of times."""
    return linalg.first_row_action(Q, t, Q.exit_rates)


def survival(Q: Generator, t):
    """``S(t) = p exp(Qt) 1``, clipped to ``[0, 1]``."""
    s = linalg.first_row_action(Q, t, np.ones(Q.n))
    return np.clip(s, 0.0, 1.0) if np.ndim(s) else float(min(max(s, 0.0), 1.0))


def laplace(Q: Generator, s: float) -> float:
    if not s > 0:
        raise ValueError(f"Laplace argument must be > 0, got {s}")
    x = linalg.solve_shifted(Q, float(s), Q.exit_rates)
    return float(x[0])


def exit_probabilities(p: CoxianParams) -> np.ndarray:
    lam = np.append(p.lam, 0.0)
    total = lam + p.mu
    reach = np.concatenate([[1.0], np.cumprod(lam[:-1] / total[:-1])])
    return reach * p.mu / total


def summary(p: CoxianParams, m: int = 3) -> SummaryStats:
    return SummaryStats(
        los=p.los(),
        exit_probs=exit_probabilities(p),
        moments=moments(build_generator(p), m),
    )
