import math

import numpy as np
import pytest

from srsearch import controller
from srsearch.controller import (
    ControllerParams,
    EmaBaseline,
    Trajectory,
    assign_terminal_reward,
    forward,
    init_params,
    load_params,
    params_from_json,
    params_to_json,
    policy_gradient,
    reinforce_update,
    sample,
    save_params,
    trajectory_loss,
)
from srsearch.genome import decode, encode, macro_length


def zero_params(n=3, d_e=4, d_h=4, fc_width=8) -> ControllerParams:
    p = init_params(n, d_e, d_h, fc_width, np.random.default_rng(0))
    for arr in p.arrays().values():
        arr[:] = 0.0
    return p


def random_trajectory(params, seed=0) -> Trajectory:
    rng = np.random.default_rng(seed)
    traj = sample(params, rng)
    rewards = np.random.default_rng(seed + 1).normal(size=params.n)
    conn = np.random.default_rng(seed + 2).normal(size=params.n_connections)
    traj.cell_rewards[:] = rewards
    traj.conn_rewards[:] = conn
    return traj


def flatten(params: ControllerParams) -> np.ndarray:
    return np.concatenate([arr.ravel() for arr in params.arrays().values()])


def test_zero_params_give_uniform_distributions():
    p = zero_params()
    probs, o_mac = forward(p)
    np.testing.assert_allclose(probs, 1.0 / 192, atol=1e-15)
    np.testing.assert_allclose(o_mac, 0.5, atol=1e-15)


def test_forward_rows_are_distributions():
    p = init_params(7, 8, 8, 16, np.random.default_rng(1))
    probs, o_mac = forward(p)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    assert o_mac.shape == (28,)  # n(n+1)/2 output units for n=7
    assert np.all((o_mac > 0) & (o_mac < 1))


def test_sample_is_deterministic_per_seed():
    p = init_params(4, 8, 8, 16, np.random.default_rng(2))
    t1 = sample(p, np.random.default_rng(99))
    t2 = sample(p, np.random.default_rng(99))
    assert t1.cells == t2.cells
    assert t1.bits == t2.bits
    assert t1.chromosome == t2.chromosome


def test_sampled_chromosomes_are_valid():
    p = init_params(5, 8, 8, 16, np.random.default_rng(3))
    rng = np.random.default_rng(4)
    for _ in range(50):
        traj = sample(p, rng)
        c = traj.chromosome
        assert decode(encode(c)) == c
        assert len(traj.bits) == macro_length(5)


def test_dominant_logit_wins():
    p = zero_params(n=1, d_e=4, d_h=4, fc_width=8)
    p.b_out[17] = 50.0  # overwhelming logit for operator 17
    rng = np.random.default_rng(5)
    hits = sum(sample(p, rng).cells[0] == 17 for _ in range(2000))
    assert hits == 2000


def test_zero_rewards_give_zero_gradient():
    p = init_params(3, 8, 8, 16, np.random.default_rng(6))
    traj = sample(p, np.random.default_rng(7))  # rewards default to zero
    g = policy_gradient(p, traj)
    for arr in g.arrays().values():
        assert np.all(arr == 0.0)


def test_unused_embedding_rows_have_zero_gradient():
    p = init_params(3, 8, 8, 16, np.random.default_rng(8))
    traj = random_trajectory(p, seed=9)
    g = policy_gradient(p, traj)
    used = set(traj.cells) | {controller.START_TOKEN}
    for row in range(g.embed.shape[0]):
        if row not in used:
            assert np.all(g.embed[row] == 0.0)


def finite_difference(params, traj, h=1e-6):
    grads = params.zeros_like()
    for name, arr in params.arrays().items():
        garr = grads.arrays()[name]
        flat = arr.ravel()
        gflat = garr.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = trajectory_loss(params, traj)
            flat[i] = orig - h
            minus = trajectory_loss(params, traj)
            flat[i] = orig
            gflat[i] = (plus - minus) / (2 * h)
    return grads


def gradient_relative_error(params, traj) -> float:
    analytic = flatten(policy_gradient(params, traj))
    numeric = flatten(finite_difference(params, traj))
    denom = max(np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)


def test_gradient_matches_finite_differences_small():
    p = init_params(3, 8, 8, 16, np.random.default_rng(10))
    traj = random_trajectory(p, seed=11)
    assert gradient_relative_error(p, traj) <= 1e-6


def test_gradient_scales_linearly_with_reward():
    p = init_params(3, 8, 8, 16, np.random.default_rng(12))
    traj = random_trajectory(p, seed=13)
    g1 = flatten(policy_gradient(p, traj))
    traj.cell_rewards *= 4.0
    traj.conn_rewards *= 4.0
    g4 = flatten(policy_gradient(p, traj))
    np.testing.assert_allclose(g4, 4.0 * g1, rtol=1e-12)


def test_reinforce_zero_rewards_noop():
    p = init_params(3, 8, 8, 16, np.random.default_rng(14))
    trajs = [sample(p, np.random.default_rng(15)) for _ in range(4)]
    updated = reinforce_update(p, trajs, lr=1e-2)
    for name, arr in updated.arrays().items():
        np.testing.assert_array_equal(arr, p.arrays()[name])


def test_reinforce_positive_reward_increases_log_probs():
    p = init_params(3, 8, 8, 16, np.random.default_rng(16))
    traj = sample(p, np.random.default_rng(17))
    assign_terminal_reward(traj, 1.0)

    def chosen_log_prob(params):
        probs, o_mac = forward(params, cells=traj.cells)
        total = sum(math.log(probs[t][a]) for t, a in enumerate(traj.cells))
        total += float(
            np.sum(
                np.asarray(traj.bits) * np.log(o_mac)
                + (1 - np.asarray(traj.bits)) * np.log(1 - o_mac)
            )
        )
        return total

    before = chosen_log_prob(p)
    updated = reinforce_update(p, [traj], lr=1e-4)
    assert chosen_log_prob(updated) > before


def test_reinforce_aborts_on_nonfinite_gradient():
    p = init_params(2, 4, 4, 8, np.random.default_rng(18))
    traj = sample(p, np.random.default_rng(19))
    assign_terminal_reward(traj, 1.0)
    traj.cell_rewards[0] = np.nan
    updated = reinforce_update(p, [traj], lr=1e-3)
    assert updated is p  # untouched


def test_saturated_probabilities_are_clamped_before_log():
    p = zero_params(n=1, d_e=4, d_h=4, fc_width=8)
    p.b_out[3] = 1000.0  # softmax saturates to exactly 1.0 in float64
    p.b3[:] = 1000.0  # sigmoids saturate to 1.0
    traj = sample(p, np.random.default_rng(0))
    assign_terminal_reward(traj, 1.0)
    loss = trajectory_loss(p, traj)
    assert math.isfinite(loss)
    g = policy_gradient(p, traj)
    for arr in g.arrays().values():
        assert np.all(np.isfinite(arr))


def test_ema_baseline_converges_to_constant():
    baseline = EmaBaseline(decay=0.95)
    for _ in range(500):
        baseline.update(1.0)
    assert baseline.value == pytest.approx(1.0, abs=1e-10)


def test_params_checkpoint_round_trip(tmp_path):
    p = init_params(4, 8, 8, 16, np.random.default_rng(20))
    path = tmp_path / "controller.json"
    save_params(p, str(path))
    q = load_params(str(path))
    assert q.n == p.n and q.d_e == p.d_e
    for name, arr in p.arrays().items():
        np.testing.assert_array_equal(arr, q.arrays()[name])
    # bit-exact through JSON text as well
    assert params_to_json(params_from_json(params_to_json(p))) == params_to_json(p)
