"""Kernels for upper-bidiagonal generators stored as ``(diag, superdiag)``.

Two routes to ``exp(Qt)`` are provided:

* a closed form, valid when the diagonal entries are pairwise separated,
  which writes every entry as a combination of ``exp(diag[k] t)`` through
  divided differences;
* scaling and squaring of a truncated Taylor series.

:func:`expm` picks the closed form when it is available and falls back to the
series otherwise.
"""

from __future__ import annotations

import math

import numpy as np

#: Minimum relative gap between any two diagonal entries for the closed form.
CLOSED_FORM_SEPARATION = 1e-4

_TAYLOR_TERMS = 18
_TAYLOR_NORM = 0.5
_SINGULAR = 1e-300


def solve_shifted(Q, shift: float, rhs, out=None) -> np.ndarray:
    """Solve ``(shift*I - Q) x = rhs`` by back-substitution from the last row.

    ``out`` may be a caller-owned buffer of length ``n`` that is reused
    across calls.
    """
    d = Q.diag
    s = Q.superdiag
    n = d.size
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (n,):
        raise ValueError(f"rhs must have shape ({n},), got {rhs.shape}")
    pivots = shift - d
    if np.any(np.abs(pivots) < _SINGULAR):
        raise np.linalg.LinAlgError("bidiagonal system is singular")
    x = np.empty(n) if out is None else out
    x[n - 1] = rhs[n - 1] / pivots[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (rhs[i] + s[i] * x[i + 1]) / pivots[i]
    return x


def solve_neg(Q, rhs, out=None) -> np.ndarray:
    """Solve ``(-Q) x = rhs``."""
    return solve_shifted(Q, 0.0, rhs, out=out)


def min_separation(diag) -> float:
    """Smallest pairwise gap ``|d_i - d_j| / max(|d_i|, |d_j|)``."""
    d = np.sort(np.asarray(diag, dtype=float))
    if d.size < 2:
        return math.inf
    gaps = np.diff(d) / np.maximum(np.abs(d[:-1]), np.abs(d[1:]))
    return float(np.min(gaps))


def closed_form_available(Q, threshold: float = CLOSED_FORM_SEPARATION) -> bool:
    return min_separation(Q.diag) > threshold


def expm_closed_form(Q, t: float, threshold: float = CLOSED_FORM_SEPARATION):
    """``exp(Qt)`` as a dense upper-triangular matrix, or ``None``.

    Entry ``(i, j)`` equals ``prod(superdiag[i:j])`` times the divided
    difference of ``x -> exp(x t)`` over ``diag[i..j]``.  Returns ``None``
    when two diagonal entries are closer than ``threshold`` (relative), where
    the divided differences cancel catastrophically.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if not closed_form_available(Q, threshold):
        return None
    d = Q.diag
    s = Q.superdiag
    n = d.size
    if t == 0:
        return np.eye(n)
    # dd[i, j]: divided difference of exp(. t) over d[i..j]
    dd = np.zeros((n, n))
    dd[np.arange(n), np.arange(n)] = np.exp(d * t)
    for width in range(1, n):
        for i in range(n - width):
            j = i + width
            dd[i, j] = (dd[i, j - 1] - dd[i + 1, j]) / (d[i] - d[j])
    out = np.zeros((n, n))
    for i in range(n):
        prod = 1.0
        for j in range(i, n):
            out[i, j] = prod * dd[i, j]
            if j < n - 1:
                prod *= s[j]
    return out


def expm_series(Q, t):
    """Scaling and squaring of a truncated Taylor series.

    ``t`` may be a scalar (returns ``n x n``) or a 1-d array (returns
    ``len(t) x n x n``).  Each ``t`` is scaled so that ``||Q t / 2^k|| <= 1/2``
    before the series is summed, then squared ``k`` times.  Because ``Q`` is
    bidiagonal, the diagonal and first superdiagonal of every intermediate
    power are known in closed form and are reset after each squaring, which
    keeps stiff generators (widely spread rates) accurate.
    """
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    d = Q.diag
    n = d.size
    A0 = np.diag(d) + np.diag(Q.superdiag, 1)
    norm = float(np.max(np.abs(A0).sum(axis=1)))
    with np.errstate(divide="ignore"):
        raw = np.ceil(np.log2(norm) + np.log2(t_arr) - np.log2(_TAYLOR_NORM))
    squarings = np.maximum(np.nan_to_num(raw, neginf=0.0), 0.0).astype(int)
    out = np.empty((t_arr.size, n, n))
    eye = np.eye(n)
    for k in np.unique(squarings):
        idx = np.nonzero(squarings == k)[0]
        tau = t_arr[idx] / 2.0**k
        A = A0[None, :, :] * tau[:, None, None]
        P = np.broadcast_to(eye, A.shape).copy()
        for m in range(_TAYLOR_TERMS, 0, -1):
            P = eye + (A @ P) / m
        _reset_bands(P, d, Q.superdiag, tau)
        for _ in range(k):
            P = P @ P
            tau = 2.0 * tau
            _reset_bands(P, d, Q.superdiag, tau)
        out[idx] = P
    return out[0] if scalar else out


def _reset_bands(P, d, s, tau):
    n = d.size
    rows = np.arange(n)
    P[:, rows, rows] = np.exp(np.multiply.outer(tau, d))
    if n > 1:
        a = np.multiply.outer(tau, d[:-1])
        b = np.multiply.outer(tau, d[1:])
        gap = np.abs(a - b)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(gap < 1e-12, 1.0 - 0.5 * gap, -np.expm1(-gap) / gap)
        # (e^a - e^b) / (a - b) without overflow or cancellation
        P[:, rows[:-1], rows[1:]] = s * tau[:, None] * np.exp(np.maximum(a, b)) * ratio


def expm(Q, t: float) -> np.ndarray:
    """``exp(Qt)``: closed form when available, series otherwise."""
    E = expm_closed_form(Q, t)
    return expm_series(Q, t) if E is None else E


def expm_action(Q, t: float, v, side: str = "right") -> np.ndarray:
    """``exp(Qt) v`` for a column vector, or ``v exp(Qt)`` with ``side="left"``."""
    v = np.asarray(v, dtype=float)
    if t == 0:
        return v.copy()
    E = expm(Q, t)
    if side == "right":
        return E @ v
    if side == "left":
        return v @ E
    raise ValueError(f"side must be 'right' or 'left', got {side!r}")


def mixture_weights(Q, v) -> np.ndarray:
    """Weights ``w`` with ``p exp(Qt) v = sum_k w[k] exp(diag[k] t)``.

    Requires separated diagonal entries (see :func:`closed_form_available`).
    """
    d = Q.diag
    s = Q.superdiag
    n = d.size
    v = np.asarray(v, dtype=float)
    path = np.concatenate([[1.0], np.cumprod(s)])
    w = np.zeros(n)
    for k in range(n):
        denom = 1.0
        for l in range(k):
            denom *= d[k] - d[l]
        for j in range(k, n):
            if j > k:
                denom *= d[k] - d[j]
            w[k] += v[j] * path[j] / denom
    return w


def first_row_action(Q, t, v):
    """``p exp(Qt) v`` with ``p = e_1``, vectorised over ``t``.

    Returns a float for scalar ``t``.  ``t = 0`` returns ``v[0]`` exactly.
    """
    v = np.asarray(v, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if np.any(t_arr < 0):
        raise ValueError("t must be >= 0")
    if closed_form_available(Q):
        w = mixture_weights(Q, v)
        out = np.zeros(t_arr.size)
        for rate, weight in zip(Q.diag, w):
            out += weight * np.exp(rate * t_arr)
    else:
        out = expm_series(Q, t_arr)[:, 0, :] @ v
    out[t_arr == 0] = v[0]
    return float(out[0]) if scalar else out
