import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesbai.core import (
    ArmStats,
    BanditInstance,
    DimensionError,
    EmpiricalRewards,
    GaussianPrior,
    GaussianRewards,
    allocation,
    best_arm,
    draw_instance,
    elimination_schedule,
    posterior,
    prior_density,
    sample_reward,
)

finite = st.floats(-50, 50, allow_nan=False)
positive = st.floats(1e-3, 1e3, allow_nan=False)


def test_prior_validation():
    with pytest.raises(ValueError):
        GaussianPrior((1.0,), 1.0)
    with pytest.raises(ValueError):
        GaussianPrior((0.0, 1.0), 0.0)
    with pytest.raises(ValueError):
        GaussianPrior((0.0, math.nan), 1.0)
    with pytest.raises(ValueError):
        GaussianRewards((1.0, -1.0))


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        draw_instance(GaussianPrior((0, 1), 1), GaussianRewards((1, 1, 1)),
                      np.random.default_rng(0))
    with pytest.raises(DimensionError):
        BanditInstance((0.0, 1.0), GaussianRewards((1.0,) * 3))


def test_posterior_with_no_data_is_prior():
    p = posterior(0.3, 2.0, 1.5, ArmStats())
    assert p.mean == 0.3 and p.variance == 2.0


def test_posterior_hand_case():
    # one observation x=1, sigma0^2 = sigma^2 = 1: precision doubles, mean halfway
    p = posterior(0.0, 1.0, 1.0, ArmStats(1, 1.0))
    assert p.mean == pytest.approx(0.5) and p.variance == pytest.approx(0.5)


def test_zero_reward_variance_is_point_mass():
    p = posterior(5.0, 1.0, 0.0, ArmStats(3, 1.5))
    assert p.mean == 0.5 and p.variance == 0.0
    with pytest.raises(ValueError):
        posterior(5.0, 1.0, 0.0, ArmStats())


def test_posterior_rejects_degenerate_prior():
    with pytest.raises(ValueError):
        posterior(0.0, 0.0, 1.0, ArmStats(1, 1.0))


def _fold(nu, s0, s2, xs):
    """One observation at a time: the posterior becomes the next prior."""
    mean, var = nu, s0
    for x in xs:
        p = posterior(mean, var, s2, ArmStats(1, x))
        mean, var = p.mean, p.variance
    return mean, var


@settings(max_examples=300, deadline=None)
@given(finite, positive, positive, st.lists(finite, min_size=1, max_size=40))
def test_batch_posterior_equals_sequential_folding(nu, s0, s2, xs):
    batch = posterior(nu, s0, s2, ArmStats(len(xs), math.fsum(xs)))
    mean, var = _fold(nu, s0, s2, xs)
    assert var == pytest.approx(batch.variance, rel=1e-12)
    assert mean == pytest.approx(batch.mean, rel=1e-9, abs=1e-9 * (abs(nu) + max(map(abs, xs))))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 64), st.data())
def test_allocation_equalizes_posterior_variance(K, data):
    v = data.draw(st.lists(st.floats(1e-3, 1e3), min_size=K, max_size=K))
    n, R = 10 ** 4, 3
    shares, pulls = allocation(n, R, v)
    assert math.fsum(shares) == pytest.approx(n / R, rel=1e-12)
    assert np.all(pulls <= shares) and np.all(pulls > shares - 1)
    # posterior variance of the mean of share_i draws with noise v_i is v_i / share_i
    ratio = np.asarray(v) / shares
    assert np.max(ratio) == pytest.approx(np.min(ratio), rel=1e-12)


def test_allocation_uniform_for_equal_or_zero_variances():
    shares, pulls = allocation(12, 2, [0.0, 0.0, 0.0])
    assert shares.tolist() == [2.0, 2.0, 2.0] and pulls.tolist() == [2, 2, 2]
    _, pulls = allocation(10, 3, [1.0, 1.0])
    assert pulls.tolist() == [1, 1]
    with pytest.raises(ValueError):
        allocation(0, 1, [1.0])


@pytest.mark.parametrize("K,R,survivors", [(2, 1, (1,)), (3, 2, (2, 1)), (8, 3, (4, 2, 1)),
                                           (5, 3, (3, 2, 1)), (9, 4, (5, 3, 2, 1))])
def test_elimination_schedule(K, R, survivors):
    sch = elimination_schedule(K, 60)
    assert sch.rounds == R and sch.survivor_counts == survivors
    assert sch.per_round_budget == 60 / R


def test_best_arm_ties_go_to_lowest_index():
    assert best_arm([1.0, 3.0, 3.0]) == 1
    with pytest.raises(ValueError):
        best_arm([])


def test_draw_instance_moments():
    prior = GaussianPrior((1.0, -2.0), 0.25)
    rng = np.random.default_rng(1)
    mus = np.array([draw_instance(prior, GaussianRewards((1, 1)), rng).mu for _ in range(20000)])
    assert np.allclose(mus.mean(0), [1.0, -2.0], atol=0.02)
    assert np.allclose(mus.var(0), [0.25, 0.25], rtol=0.05)


def test_gaussian_rewards_noiseless_and_batch():
    inst = BanditInstance((0.7, 0.1), GaussianRewards((0.0, 4.0)))
    rng = np.random.default_rng(2)
    assert sample_reward(inst, 0, rng) == 0.7
    assert np.all(sample_reward(inst, 0, rng, 5) == 0.7)
    x = sample_reward(inst, 1, rng, 40000)
    assert abs(x.mean() - 0.1) < 0.05 and abs(x.var() - 4.0) < 0.15
    with pytest.raises(IndexError):
        sample_reward(inst, 2, rng)


def test_empirical_rewards_resample_and_recenter():
    pools = [np.array([0.0, 2.0]), np.array([5.0])]
    model = EmpiricalRewards(pools, (1.0, 1.0))
    assert model.pool_means == (1.0, 5.0) and model.sigma_sq == (1.0, 1.0)
    rng = np.random.default_rng(3)
    inst = BanditInstance((0.0, 0.0), model)
    assert set(sample_reward(inst, 0, rng, 100).tolist()) == {0.0, 2.0}
    rec = BanditInstance((10.0, -1.0), EmpiricalRewards(pools, (1.0, 1.0), recenter=True))
    assert set(sample_reward(rec, 0, rng, 100).tolist()) == {9.0, 11.0}
    assert sample_reward(rec, 1, rng) == -1.0
    with pytest.raises(ValueError):
        EmpiricalRewards([np.array([])], (1.0,))
    with pytest.raises(DimensionError):
        EmpiricalRewards(pools, (1.0,))


def test_prior_density_matches_product_of_normals():
    from scipy.stats import norm
    prior = GaussianPrior((0.0, 1.0), 0.5)
    want = norm.pdf(0.3, 0, math.sqrt(0.5)) * norm.pdf(-0.2, 1, math.sqrt(0.5))
    assert prior_density(prior, (0.3, -0.2)) == pytest.approx(want, rel=1e-12)
