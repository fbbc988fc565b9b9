"""Transformation matrices between two Coxian representations of one order.

Two representations ``(e_1, Qa)`` and ``(e_1, Qb)`` describe the same
distribution exactly when some non-singular ``M`` has first row ``e_1``,
satisfies ``M Qb = Qa M`` and maps ``qb`` to ``qa``.  For bidiagonal
generators such an ``M`` is lower triangular with unit row sums, and equating
entries of ``M Qb = Qa M`` gives a recurrence producing row ``i + 1`` from
row ``i``::

    a[i, i+1] m[i+1, j] = m[i, j] (b[j, j] - a[i, i]) + m[i, j-1] b[j-1, j]

Row ``n + 1`` of that recurrence must vanish; that terminal condition is what
separates genuine transforms from mere bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import CoxianError, Generator, moments

DEFAULT_TOL = 1e-8
ROW_SUM_TOL = 1e-10


class DimensionMismatchError(CoxianError):
    pass


@dataclass(frozen=True)
class TransformMatrix:
    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"transform must be square, got shape {m.shape}")
        if np.any(np.triu(m, 1) != 0):
            raise ValueError("transform must be lower triangular")
        e1 = np.zeros(m.shape[1])
        e1[0] = 1.0
        if not np.array_equal(m[0], e1):
            raise ValueError("first row of transform must be e_1")
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    def row_sums(self) -> np.ndarray:
        return self.m.sum(axis=1)


@dataclass(frozen=True)
class EquivalenceReport:
    equivalent: bool
    m: TransformMatrix | None
    max_residual: float
    mu1_gap: float
    moment_gaps: np.ndarray
    row_sum_gap: float = np.nan
    absorb_gap: float = np.nan
    spectrum_gap: float = np.nan
    reasons: tuple = field(default_factory=tuple)


def _check_orders(Qa: Generator, Qb: Generator):
    if Qa.n != Qb.n:
        raise DimensionMismatchError(f"orders differ: {Qa.n} vs {Qb.n}")


def transform_recurrence(Qa: Generator, Qb: Generator):
    """Rows of ``M`` from the recurrence, plus the terminal row ``n + 1``.

    Returns ``(m, terminal)`` where ``m`` is ``n x n`` lower triangular and
    ``terminal[j]`` is ``a[n, n+1] m[n+1, j]`` (zero for a consistent pair).
    """
    _check_orders(Qa, Qb)
    n = Qa.n
    a_diag, a_sup = Qa.diag, Qa.superdiag
    b_diag, b_sup = Qb.diag, Qb.superdiag
    m = np.zeros((n, n))
    m[0, 0] = 1.0
    terminal = np.zeros(n)
    for i in range(n):
        nxt = np.zeros(n)
        width = min(i + 2, n)
        nxt[:width] = m[i, :width] * (b_diag[:width] - a_diag[i])
        nxt[1:width] += m[i, : width - 1] * b_sup[: width - 1]
        if i < n - 1:
            m[i + 1] = nxt / a_sup[i]
        else:
            terminal = nxt
    return m, terminal


def similarity_residual(Qa: Generator, Qb: Generator, m: np.ndarray) -> float:
    """``||M Qb - Qa M||_inf`` using the bidiagonal structure."""
    n = Qa.n
    mqb = m * Qb.diag[None, :]
    mqb[:, 1:] += m[:, :-1] * Qb.superdiag[None, :]
    qam = Qa.diag[:, None] * m
    qam[:-1] += Qa.superdiag[:, None] * m[1:]
    diff = mqb - qam
    return float(np.max(np.abs(diff).sum(axis=1))) if n else 0.0


def _scale(Qa: Generator, Qb: Generator) -> float:
    return max(Qa.norm_inf(), Qb.norm_inf())


def build_transform(Qa: Generator, Qb: Generator, tol: float = DEFAULT_TOL) -> TransformMatrix | None:
    """The lower-triangular ``M`` with ``M Qb = Qa M``, or ``None`` if infeasible.

    Infeasible means the terminal row of the recurrence does not vanish, or
    the rows of ``M`` do not sum to one, within ``tol`` (rates are compared
    relative to the larger generator norm).
    """
    m, terminal = transform_recurrence(Qa, Qb)
    scale = _scale(Qa, Qb) * max(1.0, float(np.max(np.abs(m))))
    if not np.all(np.isfinite(m)) or np.max(np.abs(terminal)) > tol * scale:
        return None
    if np.max(np.abs(m.sum(axis=1) - 1.0)) > max(tol, ROW_SUM_TOL):
        return None
    return TransformMatrix(m)


def mu1(Q: Generator) -> float:
    """Absorption rate out of the first phase."""
    return float(Q.exit_rates[0])


def moment_gaps(Qa: Generator, Qb: Generator, count: int | None = None) -> np.ndarray:
    """Relative differences of the first ``count`` moments (default ``2n - 1``)."""
    _check_orders(Qa, Qb)
    count = count or 2 * Qa.n - 1
    ma = moments(Qa, count)
    mb = moments(Qb, count)
    return np.abs(ma - mb) / np.abs(ma)


def check_equivalent(Qa: Generator, Qb: Generator, tol: float = DEFAULT_TOL) -> EquivalenceReport:
    """Test whether two representations define the same distribution.

    All of the following must hold within ``tol``: the similarity residual
    ``||M Qb - Qa M||`` and ``||M qb - qa||`` (relative to the generator
    norm), unit row sums of ``M``, equal first-phase absorption rates, and
    equal moments of orders ``1..2n-1`` (relative).
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    _check_orders(Qa, Qb)
    scale = _scale(Qa, Qb)
    m, terminal = transform_recurrence(Qa, Qb)
    finite = bool(np.all(np.isfinite(m)))
    residual = similarity_residual(Qa, Qb, m) if finite else np.inf
    row_gap = float(np.max(np.abs(m.sum(axis=1) - 1.0))) if finite else np.inf
    absorb_gap = float(np.max(np.abs(m @ Qb.exit_rates - Qa.exit_rates))) if finite else np.inf
    gap1 = abs(mu1(Qa) - mu1(Qb))
    mgaps = moment_gaps(Qa, Qb)
    spectrum = float(np.max(np.abs(np.sort(Qa.diag) - np.sort(Qb.diag))))

    reasons = []
    if residual > tol * scale * max(1.0, float(np.max(np.abs(m))) if finite else 1.0):
        reasons.append("similarity residual M Qb - Qa M too large")
    if row_gap > max(tol, ROW_SUM_TOL):
        reasons.append("rows of M do not sum to one")
    if absorb_gap > tol * scale:
        reasons.append("M qb != qa")
    if gap1 > tol * scale:
        reasons.append("first-phase absorption rates differ")
    if np.any(mgaps > tol):
        reasons.append("moments differ")
    if spectrum > tol * scale:
        reasons.append("diagonals are not permutations of each other")

    equivalent = not reasons
    transform = build_transform(Qa, Qb, tol) if equivalent else None
    if equivalent and transform is None:
        equivalent = False
        reasons.append("terminal row of the recurrence does not vanish")
    return EquivalenceReport(
        equivalent=equivalent,
        m=transform,
        max_residual=residual,
        mu1_gap=gap1,
        moment_gaps=mgaps,
        row_sum_gap=row_gap,
        absorb_gap=absorb_gap,
        spectrum_gap=spectrum,
        reasons=tuple(reasons),
    )
