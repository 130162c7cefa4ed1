import numpy as np
import pytest

from aoisim import agents as ag
from aoisim import nn
from aoisim.config import make_config
from aoisim.errors import AggregationGroupError, PreconditionError


def _tiny_train_cfg(**kw):
    base = dict(episodes=4, actor_hidden=(8,), critic_hidden=(8,),
                warmup=4, batch_size=4, buffer_capacity=16)
    base.update(kw)
    return ag.TrainConfig(**base)


def _buffer(obs_dims=(3, 2), act_dims=(2, 1), capacity=4):
    return ag.ReplayBuffer(capacity, list(obs_dims), list(act_dims))


def test_buffer_fifo_eviction():
    buf = _buffer(capacity=3)
    for k in range(5):
        buf.add([np.full(3, k), np.full(2, k)],
                [np.zeros(2), np.zeros(1)], float(k),
                [np.zeros(3), np.zeros(2)], False)
    assert len(buf) == 3
    assert buf.count == 5
    # slots hold transitions 3, 4, 2 (ring positions 0, 1, 2)
    assert sorted(buf.rew.tolist()) == [2.0, 3.0, 4.0]
    assert buf.rew[(5 - 1) % 3] == 4.0


def test_buffer_split_roundtrip():
    buf = _buffer()
    o = [np.array([1.0, 2, 3]), np.array([4.0, 5])]
    a = [np.array([0.1, 0.2]), np.array([0.3])]
    buf.add(o, a, 1.0, o, True)
    obs, acts, rew, nxt, done = buf.sample(np.random.default_rng(0), 2)
    so = buf.split_obs(obs)
    sa = buf.split_act(acts)
    assert np.array_equal(so[0][0], o[0]) and np.array_equal(so[1][0], o[1])
    assert np.array_equal(sa[0][0], a[0]) and np.array_equal(sa[1][0], a[1])
    assert done[0] == 1.0


def test_buffer_state_roundtrip():
    buf = _buffer(capacity=3)
    rng = np.random.default_rng(2)
    for _ in range(5):
        buf.add([rng.normal(size=3), rng.normal(size=2)],
                [rng.normal(size=2), rng.normal(size=1)],
                rng.normal(), [rng.normal(size=3), rng.normal(size=2)], False)
    buf2 = ag.ReplayBuffer.from_state_dict(buf.state_dict())
    assert buf2.count == buf.count
    assert np.array_equal(buf2.obs[:3], buf.obs[:3])
    assert np.array_equal(buf2.rew[:3], buf.rew[:3])


def _one_agent(obs=3, act=2, joint=10, seed=0, lr=1e-3):
    rng = np.random.default_rng(seed)
    actor = nn.Mlp([obs, 8, act], out_act="tanh", rng=rng)
    critic = nn.Mlp([joint, 8, 1], out_act="identity", rng=rng)
    return ag.AgentModel("uav", actor, critic, actor.clone(), critic.clone(),
                         nn.Adam(lr), nn.Adam(lr), noise_std=0.2)


def test_act_greedy_deterministic_and_clipped():
    agent = _one_agent()
    obs = np.array([0.3, -0.5, 1.0])
    a1 = ag.act(agent, obs, explore=False)
    a2 = ag.act(agent, obs, explore=False)
    assert np.array_equal(a1, a2)
    assert np.all(np.abs(a1) <= 1.0)
    with pytest.raises(PreconditionError):
        ag.act(agent, obs, explore=True)  # rng required


def test_act_noise_stays_in_range():
    agent = _one_agent()
    agent.noise_std = 5.0
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = ag.act(agent, np.zeros(3), explore=True, rng=rng)
        assert np.all(a >= -1.0) and np.all(a <= 1.0)


def test_soft_update_tau_one_copies():
    a, b = _one_agent(seed=1), _one_agent(seed=2)
    ag.soft_update(a.actor, b.actor, tau=1.0)
    for p, q in zip(a.actor.parameters(), b.actor.parameters()):
        assert np.allclose(p, q)


def test_soft_update_half_mix():
    a, b = _one_agent(seed=1), _one_agent(seed=2)
    before = [p.copy() for p in b.actor.parameters()]
    ag.soft_update(a.actor, b.actor, tau=0.5)
    for p, q0, q in zip(a.actor.parameters(), before, b.actor.parameters()):
        assert np.allclose(q, 0.5 * p + 0.5 * q0)


def test_soft_update_contraction():
    a, b = _one_agent(seed=1), _one_agent(seed=2)
    def gap():
        return sum(np.abs(p - q).sum() for p, q in
                   zip(a.actor.parameters(), b.actor.parameters()))
    g0 = gap()
    ag.soft_update(a.actor, b.actor, tau=0.1)
    assert gap() < g0
    with pytest.raises(PreconditionError):
        ag.soft_update(a.actor, b.actor, tau=0.0)


def _joint_setup(seed=0):
    obs_dims, act_dims = [3, 2], [2, 1]
    joint = sum(obs_dims) + sum(act_dims)
    rng = np.random.default_rng(seed)
    agents = []
    for od, ad in zip(obs_dims, act_dims):
        actor = nn.Mlp([od, 8, ad], out_act="tanh", rng=rng)
        critic = nn.Mlp([joint, 8, 1], out_act="identity", rng=rng)
        agents.append(ag.AgentModel(
            "uav", actor, critic, actor.clone(), critic.clone(),
            nn.Adam(1e-3), nn.Adam(1e-2)))
    return agents, obs_dims, act_dims


def test_train_step_requires_warmup():
    agents, od, ad = _joint_setup()
    buf = ag.ReplayBuffer(8, od, ad)
    tc = _tiny_train_cfg(warmup=4, batch_size=2)
    assert ag.train_step_maddpg(agents, buf, tc, np.random.default_rng(0)) is None


def test_gamma_zero_td_target_is_reward():
    """With gamma=0 and a single repeated transition, the critic regresses
    exactly onto the reward; loss must shrink toward zero."""
    agents, od, ad = _joint_setup(seed=3)
    buf = ag.ReplayBuffer(8, od, ad)
    rng = np.random.default_rng(4)
    o = [rng.normal(size=3), rng.normal(size=2)]
    a = [rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 1)]
    buf.add(o, a, -2.5, o, True)
    tc = _tiny_train_cfg(warmup=1, batch_size=4, gamma=0.0)
    losses = []
    for _ in range(800):
        stats = ag.train_step_maddpg(agents, buf, tc, rng)
        losses.append(stats[0][0])
    assert losses[-1] < 1e-3
    assert losses[-1] < losses[0]
    # Q(s, a) is now ~= the reward
    x = np.concatenate([np.concatenate(o), np.concatenate(a)])
    q = agents[0].critic.forward(x)[0, 0]
    assert q == pytest.approx(-2.5, abs=0.05)


def test_actor_update_moves_toward_higher_q():
    agents, od, ad = _joint_setup(seed=7)
    buf = ag.ReplayBuffer(8, od, ad)
    rng = np.random.default_rng(8)
    o = [rng.normal(size=3), rng.normal(size=2)]
    a = [rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 1)]
    buf.add(o, a, 1.0, o, True)
    tc = _tiny_train_cfg(warmup=1, batch_size=2, gamma=0.0,
                         lr_actor=1e-3)
    objs = [ag.train_step_maddpg(agents, buf, tc, rng)[0][1]
            for _ in range(400)]
    # the actor objective (mean Q under the current policy) trends up
    assert np.mean(objs[-50:]) > np.mean(objs[:50])


def test_frl_aggregate_is_mean():
    agents, _, _ = _joint_setup(seed=1)
    # same shapes -> one group of 2
    p0 = [p.copy() for p in agents[0].actor.parameters()]
    p1 = [p.copy() for p in agents[1].actor.parameters()]
    # make the shapes identical so both agents form one group
    agents[1].actor = agents[0].actor.clone()
    rng = np.random.default_rng(9)
    agents[1].actor.set_parameters(
        [rng.normal(size=p.shape) for p in agents[0].actor.parameters()])
    a0 = [p.copy() for p in agents[0].actor.parameters()]
    a1 = [p.copy() for p in agents[1].actor.parameters()]
    n = ag.frl_aggregate(agents)
    assert n == 2
    for got0, got1, x, y in zip(agents[0].actor.parameters(),
                                agents[1].actor.parameters(), a0, a1):
        assert np.allclose(got0, (x + y) / 2)
        assert np.array_equal(got0, got1)


def test_frl_aggregate_idempotent():
    agents, _, _ = _joint_setup(seed=2)
    agents[1].actor = agents[0].actor.clone()
    agents[1].actor.set_parameters(
        [p + 1.0 for p in agents[0].actor.parameters()])
    ag.frl_aggregate(agents)
    after_once = [p.copy() for p in agents[0].actor.parameters()]
    ag.frl_aggregate(agents)
    for p, q in zip(agents[0].actor.parameters(), after_once):
        assert np.array_equal(p, q)


def test_frl_singleton_group_untouched():
    agents, _, _ = _joint_setup(seed=3)  # two different shapes -> singletons
    before = [[p.copy() for p in a.actor.parameters()] for a in agents]
    n = ag.frl_aggregate(agents)
    assert n == 2
    for a, ps in zip(agents, before):
        for p, q in zip(a.actor.parameters(), ps):
            assert np.array_equal(p, q)


def test_frl_explicit_weights():
    agents, _, _ = _joint_setup(seed=4)
    agents[1].actor = agents[0].actor.clone()
    agents[1].actor.set_parameters(
        [p + 4.0 for p in agents[0].actor.parameters()])
    base = [p.copy() for p in agents[0].actor.parameters()]
    ag.frl_aggregate(agents, weights=[0.75, 0.25])
    for p, q in zip(agents[0].actor.parameters(), base):
        assert np.allclose(p, q + 1.0)  # 0.75*q + 0.25*(q+4)


def test_frl_weight_shape_error():
    agents, _, _ = _joint_setup(seed=5)
    agents[1].actor = agents[0].actor.clone()
    with pytest.raises(AggregationGroupError):
        ag.frl_aggregate(agents, weights=[1.0])


def test_overhead_counters():
    assert ag.p2p_exchange_count(3) == 3
    assert ag.maddpg_share_count(3) == 6
    assert ag.maddpg_share_count(1) == 0


def _mini_scenario():
    return make_config("desk", num_uavs=1, num_users=2, num_subchannels=2,
                       max_tasks_per_user=1, task_size=1e5, horizon=12,
                       d_min=1.0)


def test_trainer_modes_and_overhead():
    cfg = _mini_scenario()
    tc = _tiny_train_cfg(episodes=3, t_fl=1, warmup=2, batch_size=2)
    res_p2p, tr_p2p = ag.run_training(cfg, tc, mode=ag.MODE_P2P_VFRL, seed=1)
    # p2p: one aggregation per episode, N exchanges each, no critic sharing
    n_agents = len(tr_p2p.agents)
    assert res_p2p.comm_overhead == 3 * ag.p2p_exchange_count(n_agents)
    res_m, tr_m = ag.run_training(cfg, tc, mode=ag.MODE_MADDPG, seed=1)
    # maddpg overhead: share count per executed train step
    steps_trained = tr_m.global_step - (tc.warmup - 1)
    assert res_m.comm_overhead == steps_trained * ag.maddpg_share_count(n_agents)


def test_trainer_invalid_mode():
    with pytest.raises(PreconditionError):
        ag.Trainer(_mini_scenario(), _tiny_train_cfg(), mode="nope")


def test_trainer_checkpoint_resume_equality(tmp_path):
    cfg = _mini_scenario()
    tc = _tiny_train_cfg(episodes=4, warmup=2, batch_size=2)

    # uninterrupted run
    tr_full = ag.Trainer(cfg, tc, seed=5)
    tr_full.train()

    # interrupted at episode 2, checkpointed, resumed
    tr_a = ag.Trainer(cfg, tc, seed=5)
    tr_a.train(stop_after=2)
    path = tmp_path / "ckpt.json"
    tr_a.save_checkpoint(path)
    tr_b = ag.Trainer.resume(cfg, tc, str(path))
    tr_b.train()

    for a, b in zip(tr_full.agents, tr_b.agents):
        for p, q in zip(a.actor.parameters(), b.actor.parameters()):
            assert np.array_equal(p, q)
        for p, q in zip(a.critic.parameters(), b.critic.parameters()):
            assert np.array_equal(p, q)
    assert [r["mean_reward"] for r in tr_full.metrics] == \
        [r["mean_reward"] for r in tr_b.metrics]
    assert tr_full.comm_overhead == tr_b.comm_overhead


def test_noise_anneals_linearly():
    cfg = _mini_scenario()
    tc = _tiny_train_cfg(episodes=10, noise_start=0.3, noise_end=0.1)
    tr = ag.Trainer(cfg, tc, seed=0)
    # anneals linearly over the first half of the episode budget
    tr.episode = 0
    assert tr._noise_std() == pytest.approx(0.3)
    tr.episode = 2
    assert tr._noise_std() == pytest.approx(0.3 + 0.4 * (0.1 - 0.3))
    tr.episode = 5
    assert tr._noise_std() == pytest.approx(0.1)
    tr.episode = 20
    assert tr._noise_std() == pytest.approx(0.1)  # clamped past the schedule
