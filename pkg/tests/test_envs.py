import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bidsbandit.envs import (
    BumpLink,
    ConstantLink,
    Environment,
    HardInstance,
    LinearLink,
    NormalCovariates,
    eval_bump_link,
    eval_hard_instance,
    hard_density_bound,
    lipschitz_probe,
    make_covariates,
    make_hard_env,
    make_setting,
    margin_envelope,
    margin_probe,
    oracle_gap,
    oracle_regret,
    sample_truncated_mvn,
    single_index_pairs,
)
from bidsbandit.errors import AcceptanceTooLow, InvalidParameter
from bidsbandit.sir import perturb_direction


def test_truncated_mvn_inside_box():
    X = sample_truncated_mvn(np.zeros(5), 25 * np.eye(5), (-3, 3), np.random.default_rng(0), size=2000)
    assert X.shape == (2000, 5)
    assert np.all(np.abs(X) <= 3)


def test_truncated_mvn_single_draw():
    x = sample_truncated_mvn(np.zeros(2), np.eye(2), (-1, 1), np.random.default_rng(0))
    assert x.shape == (2,)


def test_truncated_mvn_huge_box_is_plain_normal():
    a = sample_truncated_mvn(np.zeros(3), np.eye(3), (-1e9, 1e9), np.random.default_rng(1), size=500)
    b = np.random.default_rng(1).standard_normal((a.shape[0] * 2, 3))
    assert np.allclose(a, b[:500])


def test_truncated_mvn_means_symmetric():
    X = sample_truncated_mvn(np.zeros(5), 25 * np.eye(5), (-3, 3), np.random.default_rng(2), size=100_000)
    assert np.all(np.abs(X.mean(axis=0)) < 0.05)


def test_truncated_mvn_misconfigured_box():
    with pytest.raises(AcceptanceTooLow):
        sample_truncated_mvn(np.zeros(1), np.eye(1), (40, 41), np.random.default_rng(0), size=1)


def test_truncated_mvn_empty_box():
    with pytest.raises(InvalidParameter):
        sample_truncated_mvn(np.zeros(2), np.eye(2), (1, -1), np.random.default_rng(0), size=1)


def test_bump_link_peaks_and_baseline():
    link = BumpLink(0.5, 8, -3.0, 3.0, (1, -1, 1, 1))
    for q, v in zip(link.centers, link.signs):
        assert eval_bump_link(link, q) == pytest.approx(0.5 + 2 / 8 * v, abs=1e-15)
    assert eval_bump_link(link, 10.0) == 0.5
    assert link.centers.tolist() == pytest.approx([-2.25, -0.75, 0.75, 2.25])


def test_bump_link_matches_formula_pointwise():
    rng = np.random.default_rng(0)
    link = BumpLink(0.75, 5, -2.0, 4.0, (1, -1))
    u = rng.uniform(-3, 5, 200)
    phi = lambda x: (1 - abs(x)) * (abs(x) <= 1)
    want = [0.75 + 2 / 5 * sum(v * phi(5 / 6 * (x - q)) for v, q in zip(link.signs, link.centers)) for x in u]
    assert np.allclose(link(u), want, atol=1e-14)


def test_bump_link_sign_count():
    with pytest.raises(InvalidParameter):
        BumpLink(0.5, 8, -1, 1, (1, 1))


def test_linear_link():
    assert LinearLink(0.5, 1.0)(0.25) == 0.75


def test_setting1_line_at_zero():
    env = make_setting(1, 5, 0.1, np.random.default_rng(0), beta=np.eye(5)[0])
    assert env.mean_reward(1, np.zeros(5)) == 0.5


def test_setting2_second_bump_peak():
    env = make_setting(2, 5, 0.1, np.random.default_rng(3))
    link = env.links[1]
    assert (link.a, link.B, len(link.signs)) == (0.75, 5, 2)
    plus = BumpLink(link.a, link.B, link.lower, link.upper, (1, 1))
    assert plus(plus.centers[0]) == pytest.approx(1.15, abs=1e-15)


@pytest.mark.parametrize("setting", [1, 2])
def test_setting_layout(setting):
    env = make_setting(setting, 5, 0.1, np.random.default_rng(setting))
    assert np.linalg.norm(env.beta) == pytest.approx(1.0, abs=1e-12)
    assert env.domain == pytest.approx((-3 * math.sqrt(5), 3 * math.sqrt(5)))
    assert env.covariates.kind == "truncated_normal"
    assert np.allclose(env.covariates.cov, 25 * np.eye(5))
    json.dumps(env.describe())


def test_setting_rejects_bad_input():
    with pytest.raises(InvalidParameter):
        make_setting(3)
    with pytest.raises(InvalidParameter):
        make_setting(1, 0)
    with pytest.raises(InvalidParameter):
        make_setting(1, 5, -0.1)


def test_setting_reproducible():
    a = make_setting(1, 5, 0.1, np.random.default_rng(9)).describe()
    b = make_setting(1, 5, 0.1, np.random.default_rng(9)).describe()
    assert a == b


def test_hard_instance_values():
    h = 0.1
    inst = HardInstance(h, 1.0, (2,))
    assert inst.n_bumps == 1
    u0 = inst.centers[0]
    assert eval_hard_instance(inst, u0) == pytest.approx(0.5 + 0.25 * h, abs=1e-15)
    assert HardInstance(h, 1.0, (1,))(u0) == pytest.approx(0.5 - 0.25 * h, abs=1e-15)
    assert inst(u0 + h / 2) == pytest.approx(0.5, abs=1e-15)
    assert inst(u0 - h / 2) == pytest.approx(0.5, abs=1e-15)


def test_hard_instance_bump_count():
    assert HardInstance(0.1, 0.5, (1,) * 4).n_bumps == math.ceil(0.1 ** -0.5)
    with pytest.raises(InvalidParameter):
        HardInstance(0.1, 0.5, (1, 2))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.02, 1.0), st.floats(0.05, 1.0), st.integers(0, 2**31 - 1))
def test_hard_instance_range(h, alpha, seed):
    rng = np.random.default_rng(seed)
    D = max(1, math.ceil(h ** -(1 - alpha) - 1e-12))
    inst = HardInstance(h, alpha, tuple(rng.integers(1, 3, D)))
    u = rng.uniform(-0.5, 0.5, 200)
    f = inst(u)
    assert np.all(f >= 0.5 - 0.25 * h - 1e-15) and np.all(f <= 0.5 + 0.25 * h + 1e-15)


def test_oracle_regret_examples():
    cov = NormalCovariates(np.zeros(2), np.eye(2))
    same = Environment((LinearLink(), LinearLink()), np.array([1.0, 0.0]), cov)
    assert oracle_regret(same, [0.3, 0.1], 0) == 0 and oracle_regret(same, [0.3, 0.1], 1) == 0
    const = Environment((ConstantLink(1.0), ConstantLink(0.0)), np.array([1.0, 0.0]), cov)
    assert oracle_regret(const, [5.0, 5.0], 1) == 1.0
    assert oracle_gap(const, [0, 0]).tolist() == [0.0, 1.0]


def test_oracle_regret_setting1_peak():
    env = make_setting(1, 5, 0.1, np.random.default_rng(0), beta=np.eye(5)[0])
    bump = env.links[0]
    # pick a positive bump lying below u = 0 so the line is lower there
    js = [j for j, (q, v) in enumerate(zip(bump.centers, bump.signs)) if v == 1 and bump.a + 0.25 > 0.5 + q]
    if not js:
        bump = BumpLink(0.5, 8, *bump.domain, (1, 1, 1, 1))
        env = Environment((bump, env.links[1]), env.beta, env.covariates)
        js = [0]
    x = np.zeros(5)
    x[0] = bump.centers[js[0]]
    assert oracle_regret(env, x, 1) > 0 and oracle_regret(env, x, 0) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_oracle_regret_nonnegative(seed):
    rng = np.random.default_rng(seed)
    env = make_setting(int(rng.integers(1, 3)), 3, 0.1, rng)
    X = rng.uniform(-6, 6, (50, 3))
    G = env.mean_rewards(X)
    for a in (0, 1):
        r = env.oracle_regret(X, np.full(50, a))
        assert np.all(r >= 0)
    assert np.all(env.oracle_regret(X, G.argmax(axis=1)) == 0)


def test_margin_probe_trivial_cases():
    rng = np.random.default_rng(0)
    cov = NormalCovariates(np.zeros(2), np.eye(2))
    same = Environment((LinearLink(), LinearLink()), np.array([1.0, 0.0]), cov)
    assert all(p == 0 for _, p in margin_probe(same, [0.1, 0.5, 1.0], 1000, rng))
    const = Environment((ConstantLink(1.0), ConstantLink(0.0)), np.array([1.0, 0.0]), cov)
    assert margin_probe(const, [0.5], 1000, rng) == [(0.5, 0.0)]
    with pytest.raises(InvalidParameter):
        margin_probe(const, [0.5], 999, rng)


def test_margin_probe_hard_envelope():
    rng = np.random.default_rng(1)
    env = make_hard_env(0.1, 1.0, rng=rng)
    n = 100_000
    deltas = np.linspace(0.001, 0.025, 10)
    env_bound = margin_envelope(deltas, 0.25, 1.0, hard_density_bound())
    for (dl, p), bound in zip(margin_probe(env, deltas, n, rng), env_bound):
        assert p <= bound + 3 * math.sqrt(max(p, 1e-12) * (1 - p) / n)


def test_lipschitz_probe_examples():
    rng = np.random.default_rng(0)
    assert lipschitz_probe(LinearLink(), 2000, rng) == pytest.approx(1.0, abs=1e-9)
    inst = HardInstance(0.1, 1.0, (2,))
    assert lipschitz_probe(inst, 5000, rng) <= 1 + 1e-9
    link = BumpLink(0.5, 8, -3.0, 3.0, (1, -1, 1, -1))
    assert lipschitz_probe(link, 5000, rng) <= 2 / 6 + 1e-9
    with pytest.raises(InvalidParameter):
        lipschitz_probe(link, 10, rng)


@pytest.mark.parametrize("setting", [1, 2])
def test_single_index_consistency(setting):
    rng = np.random.default_rng(setting)
    env = make_setting(setting, 5, 0.1, rng)
    X1, X2 = single_index_pairs(env, 500, rng)
    assert np.allclose(X1 @ env.beta, X2 @ env.beta, atol=1e-12)
    assert np.allclose(env.mean_rewards(X1), env.mean_rewards(X2), atol=1e-12)


def test_projected_density_positive():
    rng = np.random.default_rng(0)
    env = make_setting(1, 5, 0.1, rng)
    X = env.sample_covariates(100_000, rng)
    v = perturb_direction(env.beta, math.asin(0.2), rng)
    u = X @ v
    counts, _ = np.histogram(u, bins=20, range=(u.min(), u.max()))
    assert np.all(counts[1:-1] > 0)


@pytest.mark.parametrize("kind", ["normal", "uniform", "truncated_normal"])
def test_alternate_samplers_plug_in(kind):
    rng = np.random.default_rng(0)
    env = make_setting(1, 4, 0.1, rng, covariates=kind)
    X = env.sample_covariates(100, rng)
    assert X.shape == (100, 4)
    assert env.score()(X).shape == (100, 4)
    if kind == "uniform":
        assert np.all(np.abs(X) <= 3)
    with pytest.raises(InvalidParameter):
        make_covariates("cauchy", 3)


def test_clip_is_optional():
    rng = np.random.default_rng(0)
    env = make_setting(1, 3, 1.0, rng, clip=(-0.5, 0.5))
    X = env.sample_covariates(500, rng)
    y = env.rewards(X, np.zeros(500, dtype=int), rng)
    assert y.min() >= -0.5 and y.max() <= 0.5
    raw = make_setting(1, 3, 1.0, np.random.default_rng(0))
    assert raw.clip is None
