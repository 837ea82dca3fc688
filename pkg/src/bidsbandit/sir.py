"""Single-index direction estimation.

Sliced average derivative estimation (SADE) per arm, fusion of per-arm
estimates through their projection matrices, and angle utilities.  Directions
are plain unit-norm numpy vectors whose first non-negligible component is
non-negative.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateDirection, InsufficientData, InvalidParameter

_SIGN_TOL = 1e-12
_EIG_TOL = 1e-10


def normalize_direction(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    nrm = np.linalg.norm(v)
    if not np.isfinite(nrm) or nrm == 0:
        raise InvalidParameter("direction must be a finite nonzero vector")
    v = v / nrm
    big = np.flatnonzero(np.abs(v) > _SIGN_TOL)
    if big.size and v[big[0]] < 0:
        v = -v
    return v


class GaussianScore:
    """Score ``Sigma^{-1} (x - mu)`` of a Gaussian covariate law.

    Also used for a Gaussian truncated to a box: the log-density gradient is
    unchanged on the interior, which is where samples live.
    """

    kind = "gaussian"

    def __init__(self, mean, cov, box=None):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 0:
            cov = cov * np.eye(self.mean.size)
        self.cov = cov
        self.precision = np.linalg.inv(cov)
        self.box = box
        if box is not None:
            self.kind = "truncated_gaussian"

    @classmethod
    def fit(cls, X) -> "GaussianScore":
        """Moment-matched Gaussian score for covariates of unknown law."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cov = np.atleast_2d(np.cov(X, rowvar=False))
        cov = cov + 1e-9 * np.trace(cov) / cov.shape[0] * np.eye(cov.shape[0])
        return cls(X.mean(axis=0), cov)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (X - self.mean) @ self.precision.T


def _top_eigenpair(A):
    A = 0.5 * (A + A.T)
    vals, vecs = np.linalg.eigh(A)
    return vals, vecs


def sade_estimate(X, y, score=None, n_slices: int = 10, return_diagnostics: bool = False):
    """Estimate the index direction of ``y ~ f(X @ beta)`` by SADE.

    The observed range of ``y`` is cut into ``n_slices`` equal slices.  With
    scores ``S_i = score(x_i)``, the estimator is the top eigenvector of
    ``mean(S S^T) - sum_h p_h Cov_h(S)``; slices holding fewer than two points
    add nothing to the correction.  ``score`` defaults to a moment-matched
    Gaussian fitted on ``X``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if y.size != n:
        raise InvalidParameter("X and y lengths differ")
    if n_slices < 2:
        raise InvalidParameter("need at least two slices")
    if n < 2 * n_slices:
        raise InsufficientData(f"{n} observations for {n_slices} slices")
    lo, hi = float(y.min()), float(y.max())
    if not hi - lo > 1e-12 * max(1.0, abs(lo), abs(hi)):
        raise DegenerateDirection("response is constant")
    if d == 1:
        v = np.ones(1)
        return (v, {"eigenvalues": [1.0], "slice_counts": [n]}) if return_diagnostics else v

    S = (GaussianScore.fit(X) if score is None else score)(X)
    h = np.minimum(((y - lo) / (hi - lo) * n_slices).astype(np.int64), n_slices - 1)
    V = S.T @ S / n
    counts = np.bincount(h, minlength=n_slices)
    for s in np.flatnonzero(counts >= 2):
        Sh = S[h == s]
        C = Sh - Sh.mean(axis=0)
        V -= (counts[s] / n) * (C.T @ C) / (counts[s] - 1)
    vals, vecs = _top_eigenpair(V)
    if vals[-1] <= _EIG_TOL:
        raise DegenerateDirection(f"top eigenvalue {vals[-1]:.3g} carries no signal")
    v = normalize_direction(vecs[:, -1])
    if return_diagnostics:
        return v, {"eigenvalues": vals[::-1].tolist(), "slice_counts": counts.tolist()}
    return v


def combine_directions(directions, weights=None) -> np.ndarray:
    """Top eigenvector of ``sum_k w_k b_k b_k^T``."""
    B = np.atleast_2d(np.asarray(directions, dtype=float))
    K, d = B.shape
    w = np.full(K, 1.0 / K) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (K,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InvalidParameter("weights must be nonnegative and sum to one")
    B = B / np.linalg.norm(B, axis=1, keepdims=True)
    P = (B.T * w) @ B
    vals, vecs = _top_eigenpair(P)
    if d > 1 and vals[-1] - vals[-2] <= _EIG_TOL:
        raise DegenerateDirection("leading eigenvalues of the fused projection tie")
    return normalize_direction(vecs[:, -1])


def sin_angle(u, v) -> float:
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise InvalidParameter("dimension mismatch")
    c = float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.sqrt(max(0.0, 1.0 - c * c)))


def perturb_direction(beta, theta: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate ``beta`` by ``theta`` radians towards a uniformly random orthogonal direction."""
    beta = np.asarray(beta, dtype=float).ravel()
    beta = beta / np.linalg.norm(beta)
    if not 0 <= theta <= np.pi / 2 + 1e-12:
        raise InvalidParameter("theta must lie in [0, pi/2]")
    if theta == 0:
        return normalize_direction(beta)
    if beta.size == 1:
        raise InvalidParameter("cannot perturb a one-dimensional direction")
    while True:
        w = rng.standard_normal(beta.size)
        w -= (w @ beta) * beta
        nrm = np.linalg.norm(w)
        if nrm > 1e-8:
            break
    w /= nrm
    return normalize_direction(np.cos(theta) * beta + np.sin(theta) * w)


def cyclic_arms(n: int, n_arms: int = 2, start: int = 0) -> np.ndarray:
    """Round-robin arm sequence for rounds ``start .. start + n - 1``."""
    return (start + np.arange(n)) % n_arms


def estimate_from_arms(X, arms, y, n_arms: int, score=None, n_slices: int = 10, weights=None) -> np.ndarray:
    """Run SADE on each arm's observations and fuse the estimates."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    arms = np.asarray(arms)
    y = np.asarray(y, dtype=float)
    dirs = [sade_estimate(X[arms == k], y[arms == k], score, n_slices) for k in range(n_arms)]
    return combine_directions(dirs, weights)


def initial_phase(env, t_init: int, rng: np.random.Generator, n_slices: int = 10, score=None):
    """Pull arms cyclically for ``t_init`` rounds and estimate the index.

    Returns the fused direction and the regret accrued during the phase.
    """
    K = env.n_arms
    if t_init < 4 * n_slices * K:
        raise InvalidParameter(f"t_init={t_init} below 4*H*K={4 * n_slices * K}")
    X = env.sample_covariates(t_init, rng)
    arms = cyclic_arms(t_init, K)
    y = env.rewards(X, arms, rng)
    regret = float(env.oracle_regret(X, arms).sum())
    score = env.score() if score is None else score
    return estimate_from_arms(X, arms, y, K, score, n_slices), regret
