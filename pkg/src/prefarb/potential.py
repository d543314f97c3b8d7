"""Least-squares projection of pairwise preferences onto utility differences.

The consistent preference closest (in Euclidean norm) to an arbitrary
pairwise vector ``rho`` is ``B u`` where ``B`` is the incidence matrix of the
complete graph and ``u`` the zero-sum utility vector ``B^T rho / n``. Neither
routine here materializes ``B``: ``B^T rho`` is a row sum minus a column sum
of the upper-triangular store.
"""

from __future__ import annotations

import numpy as np

from .signal import PreferenceMatrix, n_pairs, pair_arrays


def _potentials(values: np.ndarray, n: int) -> np.ndarray:
    # values has shape (..., n_pairs); leading axes are independent problems
    I, J = pair_arrays(n)
    upper = np.zeros(values.shape[:-1] + (n, n))
    upper[..., I, J] = values
    return (upper.sum(axis=-1) - upper.sum(axis=-2)) / n


def solve_utilities(rho) -> np.ndarray:
    """Zero-sum utilities ``u[i] = (1/n) * sum_{j != i} rho(i, j)``.

    Accepts a :class:`PreferenceMatrix`, or an ``(n_pairs,)`` / batched
    ``(k, n_pairs)`` array of upper-triangular values (``n`` is inferred).
    Non-scoreable pairs hold 0 and so contribute nothing, while the divisor
    stays the full security count.
    """
    if isinstance(rho, PreferenceMatrix):
        if rho.n < 2:
            raise ValueError("need at least two securities")
        return _potentials(rho.values, rho.n)
    values = np.asarray(rho, dtype=float)
    n = _n_from_pairs(values.shape[-1])
    return _potentials(values, n)


def _n_from_pairs(p: int) -> int:
    n = int(round((1 + np.sqrt(1 + 8 * p)) / 2))
    if n < 2 or n_pairs(n) != p:
        raise ValueError(f"{p} is not a pair count n(n-1)/2 with n >= 2")
    return n


def consistent_preferences(u) -> PreferenceMatrix:
    """Pairwise differences ``u[i] - u[j]`` for all i < j."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("utilities must be finite")
    I, J = pair_arrays(len(u))
    return PreferenceMatrix.from_values(len(u), u[I] - u[J])

