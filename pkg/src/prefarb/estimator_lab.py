"""Monte Carlo checks of the potential method as a noisy-utility estimator.

Pairwise inputs are ``rho = B u_true + eps`` with equicorrelated Gaussian
noise, stored in i < j orientation: every stored pair has variance
``sigma2`` and any two stored pairs have covariance ``cov``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .potential import solve_utilities
from .signal import pair_arrays

# keeps one chunk's dense (chunk, n, n) scatter buffer near 80 MB
_CHUNK_CELLS = 10_000_000


@dataclass(frozen=True)
class NoiseModel:
    sigma2: float = 1.0
    cov: float = 0.0
    n_securities: int = 100
    n_trials: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if not 0 <= self.cov <= self.sigma2:
            raise ValueError("cov must lie in [0, sigma2] for the shared-factor construction")
        if self.n_securities < 2 or self.n_trials < 1:
            raise ValueError("need n_securities >= 2 and n_trials >= 1")


def theoretical_var_u(n: int, sigma2: float = 1.0, cov: float = 0.0) -> float:
    """Utility-estimator variance averaged over securities, for the noise generated here.

    With uncorrelated noise this is ``(n - 1) sigma2 / n^2``. With a shared
    factor, security ``i`` picks it up with net multiplicity ``n - 1 - 2i``
    (pairs stored as (i, j) enter u_i with +, pairs (j, i) with -), and the
    average of its square is ``(n^2 - 1)/3``.
    """
    return ((n - 1) * (sigma2 - cov) + cov * (n * n - 1) / 3.0) / (n * n)


def covariance_floor(n: int, cov: float) -> float:
    """Part of :func:`theoretical_var_u` due to ``cov``; tends to ``cov / 3``, not 0."""
    return cov * (n * n - 1) / (3.0 * n * n)


def theoretical_var_rho(n: int, sigma2: float = 1.0) -> float:
    """``2 (n - 1) sigma2 / n^2`` for uncorrelated noise.

    This ignores that the pair's own noise term enters both utilities; the
    exact per-pair value is ``2 sigma2 / n``, larger by a factor n/(n - 1).
    """
    return 2.0 * (n - 1) * sigma2 / (n * n)


@dataclass(frozen=True)
class EstimatorStats:
    n_trials: int
    mean_err_u: np.ndarray  # per security
    var_u: np.ndarray  # per security
    mean_err_rho: np.ndarray  # per pair
    var_rho: np.ndarray  # per pair

    @property
    def bias(self) -> np.ndarray:
        return self.mean_err_u

    @property
    def empirical_var_u(self) -> float:
        return float(self.var_u.mean())

    @property
    def empirical_var_rho(self) -> float:
        return float(self.var_rho.mean())

    def standardized_bias_u(self) -> np.ndarray:
        se = np.sqrt(self.var_u / self.n_trials)
        return np.divide(np.abs(self.mean_err_u), se, out=np.zeros_like(se), where=se > 0)

    def standardized_bias_rho(self) -> np.ndarray:
        se = np.sqrt(self.var_rho / self.n_trials)
        return np.divide(np.abs(self.mean_err_rho), se, out=np.zeros_like(se), where=se > 0)


def chunk_size(n: int) -> int:
    return max(1, min(2000, _CHUNK_CELLS // (n * n)))


def _chunk_moments(true_u: np.ndarray, noise: NoiseModel, index: int, size: int):
    n = len(true_u)
    I, J = pair_arrays(n)
    rng = np.random.default_rng([noise.seed, index])
    z = rng.standard_normal((size, len(I)))
    eps = math.sqrt(noise.sigma2 - noise.cov) * z
    if noise.cov > 0:
        eps += math.sqrt(noise.cov) * rng.standard_normal((size, 1))
    rho_true = true_u[I] - true_u[J]
    u = solve_utilities(rho_true + eps)
    err_u = u - true_u
    err_rho = (u[:, I] - u[:, J]) - rho_true
    return (
        err_u.sum(axis=0),
        (err_u**2).sum(axis=0),
        err_rho.sum(axis=0),
        (err_rho**2).sum(axis=0),
    )


def simulate_estimator(true_u, noise: NoiseModel, threads: int = 1) -> EstimatorStats:
    """Run ``noise.n_trials`` independent trials of the utility estimator.

    Trials are grouped in fixed-size chunks, each with its own stream derived
    from ``(seed, chunk index)``, and reduced in chunk order, so the result is
    the same for any ``threads``.
    """
    u0 = np.asarray(true_u, dtype=float)
    if len(u0) != noise.n_securities:
        raise ValueError(f"{len(u0)} utilities for {noise.n_securities} securities")
    if abs(u0.sum()) > 1e-9 * len(u0):
        raise ValueError("true utilities must sum to zero")

    size = chunk_size(len(u0))
    sizes = [min(size, noise.n_trials - start) for start in range(0, noise.n_trials, size)]

    def job(k: int):
        return _chunk_moments(u0, noise, k, sizes[k])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(k) for k in range(len(sizes))]

    n_t = noise.n_trials
    s1u = sum(p[0] for p in parts)
    s2u = sum(p[1] for p in parts)
    s1r = sum(p[2] for p in parts)
    s2r = sum(p[3] for p in parts)

    def moments(s1, s2):
        mean = s1 / n_t
        if n_t < 2:
            return mean, np.zeros_like(mean)
        return mean, np.maximum(s2 - n_t * mean**2, 0.0) / (n_t - 1)

    mu_u, var_u = moments(s1u, s2u)
    mu_r, var_r = moments(s1r, s2r)
    return EstimatorStats(n_t, mu_u, var_u, mu_r, var_r)


def bias_test(true_u, noise: NoiseModel, threads: int = 1) -> float:
    """Largest ``|mean error| / standard error`` over securities."""
    return float(simulate_estimator(true_u, noise, threads).standardized_bias_u().max())


def random_true_utilities(n: int, seed: int = 0, scale: float = 1.0) -> np.ndarray:
    u = scale * np.random.default_rng([seed, n]).standard_normal(n)
    return u - u.mean()


def default_trials(n: int, cov: float, rel_se: float = 0.01, cap: int = 100_000) -> int:
    """Trials for a relative standard error ``rel_se`` on the averaged variance.

    Uncorrelated noise gives roughly independent per-security variance
    estimates, so the error shrinks with ``n * trials``; a shared factor makes
    them move together and only ``trials`` counts.
    """
    target = 2.0 / rel_se**2
    if cov == 0:
        target /= n
    return int(min(cap, max(1000, math.ceil(target))))


def variance_study(
    ns,
    covs,
    sigma2: float = 1.0,
    n_trials: int | None = None,
    seed: int = 0,
    threads: int = 1,
) -> list[dict]:
    """Empirical vs theoretical utility-estimator variance over a grid of (n, cov)."""
    rows = []
    for cov in covs:
        for n in ns:
            trials = n_trials if n_trials is not None else default_trials(n, cov)
            noise = NoiseModel(sigma2, cov, n, trials, seed)
            est = simulate_estimator(random_true_utilities(n, seed), noise, threads)
            rows.append(
                {
                    "n": n,
                    "cov": cov,
                    "theoretical_var": theoretical_var_u(n, sigma2, cov),
                    "empirical_var": est.empirical_var_u,
                }
            )
    return rows

