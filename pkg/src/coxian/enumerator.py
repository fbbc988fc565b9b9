"""All Coxian representations equivalent to a given one.

Equivalent representations share the diagonal of the generator up to
permutation.  For each distinct permutation ``V`` of the diagonal the
superdiagonal ``b`` is determined (if it exists at all) by the transform
recurrence between the source generator ``Qa`` and the unknown ``Qb``: row
``i + 1`` of the transform depends on ``b[:i+1]`` linearly through
``b[i]`` alone, so forcing that row to sum to one yields ``b[i]``.  The first
step reduces to ``b[0] = a[0,0] + a[0,1] - V[0]``.

A candidate is kept when every ``b[i]`` lies in ``(0, -V[i]]`` (otherwise the
representation is not Markovian), the terminal row of the recurrence
vanishes, and the low-order moments match.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .equivalence import DEFAULT_TOL, check_equivalent
from .model import CoxianParams, Generator, OrderTooLargeError, max_order, params_from_generator

#: Diagonal entries closer than this (relative) are treated as equal.
DUPLICATE_RTOL = 1e-10
#: Diagonal entries closer than this (relative) are flagged in the output.
NEAR_DUPLICATE_RTOL = 1e-6
#: Orders above this enumerate with a warning (the count grows as n!).
WARN_ORDER = 10
#: Relative slack for snapping ``b`` onto its upper bound ``-V[i]``.
SNAP_RTOL = 1e-12

NEGATIVE_B = "negative_b"
B_EXCEEDS_BOUND = "b_exceeds_bound"
CONSISTENCY_FAILURE = "consistency_failure"
MOMENT_MISMATCH = "moment_mismatch"


@dataclass(frozen=True)
class PermutationCandidate:
    perm_index: int
    V: np.ndarray
    b: np.ndarray | None
    feasible: bool
    rejection_reason: str | None = None
    order: tuple = ()  # source phase index feeding each position of V
    terminal_residual: float = np.nan
    moment_residual: float = np.nan

    @property
    def generator(self) -> Generator | None:
        if not self.feasible:
            return None
        return Generator(self.V, self.b, exit_rates=_exit_rates(self.V, self.b))


@dataclass(frozen=True)
class RepresentationSet:
    source: CoxianParams
    candidates: list
    representations: list
    generators: list = field(default_factory=list)
    perm_indices: list = field(default_factory=list)
    notes: tuple = ()

    def __len__(self):
        return len(self.representations)


def _exit_rates(V, b):
    return np.maximum(-np.asarray(V) - np.append(b, 0.0), 0.0)


def _classes(diag) -> list[int]:
    """Class label per entry; entries equal within ``DUPLICATE_RTOL`` share one."""
    d = np.asarray(diag, dtype=float)
    order = np.argsort(d, kind="stable")
    labels = [0] * d.size
    current = 0
    for pos, idx in enumerate(order):
        if pos:
            prev = d[order[pos - 1]]
            if abs(d[idx] - prev) > DUPLICATE_RTOL * max(abs(d[idx]), abs(prev)):
                current += 1
        labels[idx] = current
    return labels


def iter_index_permutations(diag):
    """Index orders giving each distinct rearrangement of ``diag`` once.

    Orders are lexicographic in the indices, identity first.  Of several
    interchangeable (equal) entries only the lowest unused index is ever
    placed next, which yields exactly the first occurrence of every distinct
    vector without storing the ones already seen.
    """
    labels = _classes(diag)
    n = len(labels)
    used = [False] * n
    prefix: list[int] = []

    def rec():
        if len(prefix) == n:
            yield tuple(prefix)
            return
        placed = set()
        for i in range(n):
            if used[i] or labels[i] in placed:
                continue
            placed.add(labels[i])
            used[i] = True
            prefix.append(i)
            yield from rec()
            prefix.pop()
            used[i] = False

    yield from rec()


def _check_order(n: int):
    cap = max_order()
    if n > cap:
        raise OrderTooLargeError(f"order {n} exceeds the cap of {cap}")
    if n > WARN_ORDER:
        warnings.warn(
            f"enumerating order {n}: up to {math.factorial(n)} permutations",
            RuntimeWarning,
            stacklevel=3,
        )


def diag_permutations(Q: Generator) -> list[np.ndarray]:
    """Distinct rearrangements of ``diag(Q)``, identity first."""
    _check_order(Q.n)
    return [Q.diag[list(p)] for p in iter_index_permutations(Q.diag)]


def moment_residual(Qa: Generator, Qb: Generator) -> float:
    """Largest relative gap in ``p (-Q)^-k 1`` over ``k = 1..max(n-2, 1)``."""
    if Qa.n != Qb.n:
        raise ValueError(f"orders differ: {Qa.n} vs {Qb.n}")
    xa = np.ones(Qa.n)
    xb = np.ones(Qb.n)
    worst = 0.0
    for _ in range(max(Qa.n - 2, 1)):
        xa = linalg.solve_neg(Qa, xa)
        xb = linalg.solve_neg(Qb, xb)
        worst = max(worst, abs(xa[0] - xb[0]) / abs(xa[0]))
    return worst


def candidate_superdiag(
    Qa: Generator,
    V,
    tol: float = DEFAULT_TOL,
    perm_index: int = 0,
    order: tuple = (),
) -> PermutationCandidate:
    """Derive the superdiagonal that pairs with the diagonal ``V``.

    Returns a candidate carrying ``b`` when feasible, or the reason it was
    rejected: ``negative_b`` / ``b_exceeds_bound`` (first offending step;
    later entries are not computed), ``consistency_failure`` (terminal row
    of the recurrence is non-zero) or ``moment_mismatch``.
    """
    V = np.asarray(V, dtype=float)
    n = Qa.n
    if V.shape != (n,):
        raise ValueError(f"V must have length {n}, got {V.shape}")
    a = Qa.diag
    s = Qa.superdiag
    slack = SNAP_RTOL * float(np.max(np.abs(V)))

    def reject(reason, b=None, **extra):
        return PermutationCandidate(perm_index, V, b, False, reason, order, **extra)

    b = np.zeros(n - 1)
    row = np.zeros(n)
    row[0] = 1.0
    for i in range(n - 1):
        nxt = np.zeros(n)
        nxt[: i + 1] = row[: i + 1] * (V[: i + 1] - a[i])
        nxt[1 : i + 1] += row[:i] * b[:i]
        # the only unknown term is row[i] * b[i], sitting in column i + 1
        bi = (s[i] - nxt.sum()) / row[i]
        if not math.isfinite(bi) or bi <= 0.0:
            return reject(NEGATIVE_B)
        if bi > -V[i]:
            if bi > -V[i] + slack:
                return reject(B_EXCEEDS_BOUND)
            bi = -V[i]
        b[i] = bi
        nxt[i + 1] = row[i] * bi
        row = nxt / s[i]

    terminal = row * (V - a[n - 1])
    terminal[1:] += row[:-1] * b
    scale = max(Qa.norm_inf(), float(np.max(np.abs(V) + np.append(b, 0.0))))
    term_res = float(np.max(np.abs(terminal))) / scale
    if term_res > tol * max(1.0, float(np.max(np.abs(row)))):
        return reject(CONSISTENCY_FAILURE, b, terminal_residual=term_res)

    Qb = Generator(V, b, exit_rates=_exit_rates(V, b))
    mres = moment_residual(Qa, Qb)
    if mres > tol:
        return reject(MOMENT_MISMATCH, b, terminal_residual=term_res, moment_residual=mres)
    return PermutationCandidate(perm_index, V, b, True, None, order, term_res, mres)


def _candidate_job(args):
    return candidate_superdiag(*args)


def _same_generator(g: Generator, h: Generator, rtol: float) -> bool:
    scale = max(g.norm_inf(), h.norm_inf())
    return bool(
        np.max(np.abs(g.diag - h.diag)) <= rtol * scale
        and np.max(np.abs(g.superdiag - h.superdiag), initial=0.0) <= rtol * scale
    )


def enumerate_representations(Qa: Generator, tol: float = DEFAULT_TOL, n_jobs: int = 1) -> RepresentationSet:
    """Every Markovian Coxian representation equivalent to ``Qa``.

    Candidates come back in permutation order (identity first) whether they
    are evaluated serially or in worker processes.  Each feasible candidate
    is cross-checked against ``Qa`` with :func:`check_equivalent`.
    """
    _check_order(Qa.n)
    jobs = [
        (Qa, Qa.diag[list(p)], tol, r, p)
        for r, p in enumerate(iter_index_permutations(Qa.diag), start=1)
    ]
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            candidates = list(pool.map(_candidate_job, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))
    else:
        candidates = [_candidate_job(job) for job in jobs]

    notes = []
    sep = linalg.min_separation(Qa.diag)
    if sep < NEAR_DUPLICATE_RTOL:
        notes.append(
            f"diagonal entries within {sep:.1e} relative of each other: the representation "
            "is close to redundant and permutations of near-equal rates are ill-conditioned"
        )

    generators: list[Generator] = []
    indices: list[int] = []
    checked = []
    for cand in candidates:
        if cand.feasible:
            Qb = cand.generator
            report = check_equivalent(Qa, Qb, tol)
            if not report.equivalent:
                cand = PermutationCandidate(
                    cand.perm_index, cand.V, cand.b, False, CONSISTENCY_FAILURE, cand.order,
                    cand.terminal_residual, cand.moment_residual,
                )
            elif not any(_same_generator(Qb, g, tol) for g in generators):
                generators.append(Qb)
                indices.append(cand.perm_index)
        checked.append(cand)

    return RepresentationSet(
        source=params_from_generator(Qa),
        candidates=checked,
        representations=[params_from_generator(g) for g in generators],
        generators=generators,
        perm_indices=indices,
        notes=tuple(notes),
    )
