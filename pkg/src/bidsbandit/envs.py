"""Synthetic environments with a shared single index.

Each arm's mean reward is a link function of the projection ``x @ beta``.
Links are vectorized callables of the projected value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from .errors import AcceptanceTooLow, InvalidParameter
from .sir import GaussianScore, normalize_direction

MAX_CONSECUTIVE_REJECTIONS = 100_000


# ---------------------------------------------------------------------------
# covariate samplers


def _box(box, d):
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (d,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (d,)).copy()
    if np.any(lo >= hi):
        raise InvalidParameter("empty box")
    return lo, hi


def sample_truncated_mvn(mean, cov, box, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Rejection sampler for ``N(mean, cov)`` restricted to an axis-aligned box.

    Raises :class:`AcceptanceTooLow` after ``MAX_CONSECUTIVE_REJECTIONS``
    proposals in a row fall outside the box.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    d = mean.size
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = cov * np.eye(d)
    chol = np.linalg.cholesky(cov)
    lo, hi = _box(box, d)
    n = 1 if size is None else int(size)
    out = np.empty((n, d))
    filled, streak, proposed, accepted = 0, 0, 0, 0
    while filled < n:
        rate = max(accepted / proposed, 1e-3) if proposed else 0.5
        chunk = int(min(max(256, 1.2 * (n - filled) / rate), 4_000_000))
        Z = mean + rng.standard_normal((chunk, d)) @ chol.T
        idx = np.flatnonzero(np.all((Z >= lo) & (Z <= hi), axis=1))
        proposed += chunk
        accepted += idx.size
        runs = np.diff(np.r_[-1, idx]) - 1
        if idx.size == 0:
            streak += chunk
        elif max(streak + runs[0], runs.max()) >= MAX_CONSECUTIVE_REJECTIONS:
            streak = MAX_CONSECUTIVE_REJECTIONS
        else:
            streak = chunk - 1 - idx[-1]
        if streak >= MAX_CONSECUTIVE_REJECTIONS:
            raise AcceptanceTooLow(f"{MAX_CONSECUTIVE_REJECTIONS} consecutive proposals rejected; check the box")
        take = idx[: n - filled]
        out[filled : filled + take.size] = Z[take]
        filled += take.size
    return out[0] if size is None else out


@dataclass(frozen=True)
class TruncatedNormalCovariates:
    mean: np.ndarray
    cov: np.ndarray
    box: tuple

    kind = "truncated_normal"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample_truncated_mvn(self.mean, self.cov, self.box, rng, size=n)

    @property
    def support_box(self):
        return self.box

    def score(self) -> GaussianScore:
        return GaussianScore(self.mean, self.cov, box=self.box)

    def describe(self) -> dict:
        return {"kind": self.kind, "mean": self.mean.tolist(), "cov_diag": np.diag(self.cov).tolist(),
                "box": [np.asarray(b).tolist() for b in self.box]}


@dataclass(frozen=True)
class NormalCovariates:
    mean: np.ndarray
    cov: np.ndarray

    kind = "normal"
    support_box = None

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.multivariate_normal(self.mean, self.cov, size=n, method="cholesky")

    def score(self) -> GaussianScore:
        return GaussianScore(self.mean, self.cov)

    def describe(self) -> dict:
        return {"kind": self.kind, "mean": self.mean.tolist(), "cov_diag": np.diag(self.cov).tolist()}


@dataclass(frozen=True)
class UniformCovariates:
    d: int
    half_width: float = 3.0

    kind = "uniform"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size=(n, self.d))

    @property
    def support_box(self):
        return (-self.half_width, self.half_width)

    def score(self) -> GaussianScore:
        # the uniform law has a zero score on its interior; match two moments instead
        return GaussianScore(np.zeros(self.d), self.half_width**2 / 3.0 * np.eye(self.d))

    def describe(self) -> dict:
        return {"kind": self.kind, "d": self.d, "half_width": self.half_width}


def make_covariates(kind: str, d: int):
    if kind == "truncated_normal":
        return TruncatedNormalCovariates(np.zeros(d), 25.0 * np.eye(d), (-3.0, 3.0))
    if kind == "normal":
        return NormalCovariates(np.zeros(d), 5.0 * np.eye(d))
    if kind == "uniform":
        return UniformCovariates(d, 3.0)
    raise InvalidParameter(f"unknown covariate law {kind!r}")


# ---------------------------------------------------------------------------
# link functions


def tent(x):
    """``(1 - |x|)`` on ``[-1, 1]``, zero elsewhere."""
    return np.maximum(0.0, 1.0 - np.abs(x))


@dataclass(frozen=True)
class BumpLink:
    """Baseline ``a`` plus ``floor(B/2)`` signed tents of height ``2/B``."""

    a: float
    B: int
    lower: float
    upper: float
    signs: tuple[int, ...]

    def __post_init__(self):
        if len(self.signs) != self.B // 2:
            raise InvalidParameter(f"need {self.B // 2} signs, got {len(self.signs)}")

    @property
    def centers(self) -> np.ndarray:
        j = np.arange(1, self.B // 2 + 1)
        return self.lower + (2 * j - 1) * (self.upper - self.lower) / self.B

    @property
    def domain(self):
        return (self.lower, self.upper)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        scale = self.B / (self.upper - self.lower)
        z = scale * (u[..., None] - self.centers)
        return self.a + (2.0 / self.B) * (tent(z) @ np.asarray(self.signs, dtype=float))

    def describe(self) -> dict:
        return {"kind": "bump", "a": self.a, "B": self.B, "lower": self.lower, "upper": self.upper,
                "signs": list(self.signs)}


def make_bump_link(a: float, B: int, lower: float, upper: float, rng: np.random.Generator) -> BumpLink:
    signs = tuple(int(s) for s in rng.choice([-1, 1], size=B // 2))
    return BumpLink(a, B, lower, upper, signs)


@dataclass(frozen=True)
class LinearLink:
    intercept: float = 0.5
    slope: float = 1.0
    domain: tuple = (-1.0, 1.0)

    def __call__(self, u):
        return self.intercept + self.slope * np.asarray(u, dtype=float)

    def describe(self) -> dict:
        return {"kind": "linear", "intercept": self.intercept, "slope": self.slope}


@dataclass(frozen=True)
class ConstantLink:
    value: float
    domain: tuple = (-1.0, 1.0)

    def __call__(self, u):
        return np.full(np.shape(u), float(self.value))

    def describe(self) -> dict:
        return {"kind": "constant", "value": self.value}


def hard_kernel(u):
    """``(1 - |2u|)`` on ``[-1/2, 1/2]``, zero elsewhere."""
    return np.maximum(0.0, 1.0 - np.abs(2.0 * np.asarray(u, dtype=float)))


@dataclass(frozen=True)
class HardInstance:
    """Lower-bound link ``1/2 + C_f h sum_j (2 v_j - 3) K((u - u_j) / h)`` on ``[-1/2, 1/2]``.

    ``[-1/2, 1/2]`` is cut into ``1/h`` cells with centers ``u_j``; the first
    ``D = ceil(h^-(1 - alpha))`` carry a bump whose sign is set by ``v_j in {1, 2}``.
    """

    h: float
    alpha: float
    bits: tuple[int, ...]
    C_f: float = 0.25

    def __post_init__(self):
        if not 0 < self.h <= 1:
            raise InvalidParameter("h must lie in (0, 1]")
        if len(self.bits) != self.n_bumps or any(b not in (1, 2) for b in self.bits):
            raise InvalidParameter(f"need {self.n_bumps} bits in {{1, 2}}")

    @property
    def n_bumps(self) -> int:
        return hard_instance_bumps(self.h, self.alpha)

    @property
    def centers(self) -> np.ndarray:
        return -0.5 + (np.arange(self.n_bumps) + 0.5) * self.h

    domain = (-0.5, 0.5)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        k = hard_kernel((u[..., None] - self.centers) / self.h)
        return 0.5 + self.C_f * self.h * (k @ (2.0 * np.asarray(self.bits, dtype=float) - 3.0))

    def describe(self) -> dict:
        return {"kind": "hard_instance", "h": self.h, "alpha": self.alpha, "bits": list(self.bits), "C_f": self.C_f}


def hard_instance_bumps(h: float, alpha: float) -> int:
    return max(1, math.ceil(h ** -(1.0 - alpha) - 1e-12))


def eval_bump_link(link: BumpLink, u):
    return link(u)


def eval_hard_instance(inst: HardInstance, u):
    return inst(u)


# ---------------------------------------------------------------------------
# environments


@dataclass(frozen=True)
class Environment:
    """Arms whose mean rewards are links of ``x @ beta`` plus Gaussian noise."""

    links: tuple
    beta: np.ndarray
    covariates: object
    sigma: float = 0.0
    clip: tuple | None = None
    domain: tuple | None = None
    info: dict = field(default_factory=dict)

    @property
    def n_arms(self) -> int:
        return len(self.links)

    @property
    def dim(self) -> int:
        return self.beta.size

    def sample_covariates(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.covariates.sample(n, rng)

    def mean_rewards(self, X) -> np.ndarray:
        u = np.atleast_2d(np.asarray(X, dtype=float)) @ self.beta
        return np.column_stack([f(u) for f in self.links])

    def mean_reward(self, arm: int, x) -> float:
        return float(self.links[arm](np.asarray(x, dtype=float) @ self.beta))

    def noise(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, self.sigma, size=n) if self.sigma > 0 else np.zeros(n)

    def observe(self, means, noise) -> np.ndarray:
        y = means + noise
        return np.clip(y, *self.clip) if self.clip is not None else y

    def rewards(self, X, arms, rng: np.random.Generator) -> np.ndarray:
        G = self.mean_rewards(X)
        means = G[np.arange(G.shape[0]), np.asarray(arms)]
        return self.observe(means, self.noise(means.size, rng))

    def oracle_regret(self, X, arms) -> np.ndarray:
        G = self.mean_rewards(X)
        return G.max(axis=1) - G[np.arange(G.shape[0]), np.asarray(arms)]

    def score(self):
        return self.covariates.score()

    def describe(self) -> dict:
        return {
            **self.info,
            "d": self.dim,
            "sigma": self.sigma,
            "beta0": self.beta.tolist(),
            "links": [f.describe() for f in self.links],
            "covariates": self.covariates.describe(),
        }


def oracle_regret(env: Environment, x, arm: int) -> float:
    """``max_k g_k(x) - g_arm(x)``."""
    return float(env.oracle_regret(np.atleast_2d(x), [arm])[0])


def oracle_gap(env: Environment, x) -> np.ndarray:
    """Per-arm regret ``max_k g_k(x) - g_a(x)`` at one covariate."""
    g = env.mean_rewards(np.atleast_2d(x))[0]
    return g.max() - g


def random_direction(d: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.standard_normal(d)
    return u / np.linalg.norm(u)


def make_setting(setting: int, d: int = 5, sigma: float = 0.1, rng: np.random.Generator | None = None,
                 covariates: str = "truncated_normal", beta=None, clip=None) -> Environment:
    """Two-armed bump environments.

    Setting 1 pairs a bump link (a=0.5, B=8) with the line ``1/2 + u``;
    setting 2 pairs it with a second bump link (a=0.75, B=5).  Links live on
    ``[-3 sqrt(d), 3 sqrt(d)]``.  The index is drawn first, then the signs of
    arm 1 and arm 2.
    """
    if d < 1 or sigma < 0:
        raise InvalidParameter("need d >= 1 and sigma >= 0")
    rng = np.random.default_rng() if rng is None else rng
    b = random_direction(d, rng)
    b = b if beta is None else np.asarray(beta, dtype=float) / np.linalg.norm(beta)
    lo, hi = -3.0 * math.sqrt(d), 3.0 * math.sqrt(d)
    arm1 = make_bump_link(0.5, 8, lo, hi, rng)
    if setting == 1:
        arm2 = LinearLink(0.5, 1.0, (lo, hi))
    elif setting == 2:
        arm2 = make_bump_link(0.75, 5, lo, hi, rng)
    else:
        raise InvalidParameter(f"unknown setting {setting!r}")
    return Environment((arm1, arm2), b, make_covariates(covariates, d), float(sigma), clip, (lo, hi),
                       {"setting": setting})


def make_hard_env(h: float = 0.1, alpha: float = 1.0, d: int = 1, sigma: float = 0.0,
                  rng: np.random.Generator | None = None, bits=None, C_f: float = 0.25) -> Environment:
    """Hard instance against the constant arm 1/2, index ``e_1``.

    Covariates are ``N(0, I)`` truncated to ``[-1/2, 1/2]^d``.
    """
    rng = np.random.default_rng() if rng is None else rng
    D = hard_instance_bumps(h, alpha)
    bits = tuple(int(b) for b in (rng.integers(1, 3, size=D) if bits is None else bits))
    inst = HardInstance(h, alpha, bits, C_f)
    beta = np.zeros(d)
    beta[0] = 1.0
    cov = TruncatedNormalCovariates(np.zeros(d), np.eye(d), (-0.5, 0.5))
    return Environment((inst, ConstantLink(0.5, (-0.5, 0.5))), beta, cov, float(sigma), None, (-0.5, 0.5),
                       {"setting": "hard", "projected_density_bound": hard_density_bound()})


def hard_density_bound() -> float:
    """Peak density of a standard normal truncated to ``[-1/2, 1/2]``."""
    return float(norm.pdf(0.0) / (norm.cdf(0.5) - norm.cdf(-0.5)))


def margin_envelope(deltas, C_f: float, alpha: float, density_bound: float) -> np.ndarray:
    """``2 cbar (delta / C_f)^alpha`` bound on the hard-instance margin mass."""
    return 2.0 * density_bound * (np.asarray(deltas, dtype=float) / C_f) ** alpha


def margin_probe(env: Environment, deltas, n_samples: int, rng: np.random.Generator):
    """Monte Carlo ``P(0 < gap(X) <= delta)`` for the top-two arm gap."""
    if n_samples < 1000:
        raise InvalidParameter("n_samples must be at least 1000")
    G = np.sort(env.mean_rewards(env.sample_covariates(n_samples, rng)), axis=1)
    gap = G[:, -1] - G[:, -2]
    return [(float(dl), float(np.mean((gap > 0) & (gap <= dl)))) for dl in deltas]


def lipschitz_probe(link: Callable, n_pairs: int, rng: np.random.Generator, domain=None) -> float:
    """Largest difference quotient over random pairs; half of them are close pairs."""
    if n_pairs < 1000:
        raise InvalidParameter("n_pairs must be at least 1000")
    lo, hi = link.domain if domain is None else domain
    n_far = n_pairs // 2
    u1 = rng.uniform(lo, hi, n_pairs)
    u2 = np.empty(n_pairs)
    u2[:n_far] = rng.uniform(lo, hi, n_far)
    u2[n_far:] = np.clip(u1[n_far:] + rng.normal(0, 1e-3 * (hi - lo), n_pairs - n_far), lo, hi)
    du = np.abs(u1 - u2)
    keep = du > 1e-12 * (hi - lo)
    ratio = np.abs(link(u1[keep]) - link(u2[keep])) / du[keep]
    return float(ratio.max())


def single_index_pairs(env: Environment, n: int, rng: np.random.Generator):
    """Pairs of covariates sharing the projection ``x @ beta``."""
    X1 = env.sample_covariates(n, rng)
    w = rng.standard_normal((n, env.dim))
    w -= np.outer(w @ env.beta, env.beta)
    return X1, X1 + w
