"""Multi-agent DDPG machinery: replay, centralized critics, soft targets,
and the peer-to-peer federated aggregation branch.

Two training modes share one loop: "maddpg" (FRL off) and "p2p_vfrl",
which additionally averages actor parameters within same-shape agent
groups every `t_fl` episodes.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import env as env_mod
from . import nn
from .errors import AggregationGroupError, PreconditionError

MODE_MADDPG = "maddpg"
MODE_P2P_VFRL = "p2p_vfrl"


@dataclass
class TrainConfig:
    episodes: int = 200
    actor_hidden: tuple = (128, 64)
    critic_hidden: tuple = (64, 32)
    lr_actor: float = 1e-5
    lr_critic: float = 1e-4
    gamma: float = 0.99
    tau: float = 5e-4
    buffer_capacity: int = 50_000
    warmup: int = 8          # B in the training guard: train only once count >= B
    batch_size: int = 8      # D, the sampled mini-batch
    t_fl: int = 10           # episodes between federated aggregation rounds
    t_up: int = 1            # steps between target soft updates
    noise_start: float = 0.3
    noise_end: float = 0.05
    checkpoint_every: int = 0   # episodes; 0 disables periodic checkpoints

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


class ReplayBuffer:
    """Fixed-capacity FIFO ring of joint transitions."""

    def __init__(self, capacity, obs_dims, act_dims):
        self.capacity = int(capacity)
        self.obs_dims = list(obs_dims)
        self.act_dims = list(act_dims)
        self.obs = np.zeros((self.capacity, sum(obs_dims)))
        self.act = np.zeros((self.capacity, sum(act_dims)))
        self.rew = np.zeros(self.capacity)
        self.next_obs = np.zeros((self.capacity, sum(obs_dims)))
        self.done = np.zeros(self.capacity)
        self.count = 0   # total writes ever

    def __len__(self):
        return min(self.count, self.capacity)

    def add(self, obs_list, act_list, rew, next_obs_list, done):
        i = self.count % self.capacity
        self.obs[i] = np.concatenate(obs_list)
        self.act[i] = np.concatenate(act_list)
        self.rew[i] = rew
        self.next_obs[i] = np.concatenate(next_obs_list)
        self.done[i] = float(done)
        self.count += 1

    def ready(self, warmup):
        return len(self) >= warmup

    def sample(self, rng, batch_size):
        idx = rng.integers(0, len(self), size=batch_size)
        return (self.obs[idx], self.act[idx], self.rew[idx],
                self.next_obs[idx], self.done[idx])

    def split_obs(self, obs):
        return np.split(obs, np.cumsum(self.obs_dims)[:-1], axis=1)

    def split_act(self, act):
        return np.split(act, np.cumsum(self.act_dims)[:-1], axis=1)

    def state_dict(self):
        n = len(self)
        return {
            "capacity": self.capacity, "obs_dims": self.obs_dims,
            "act_dims": self.act_dims, "count": self.count,
            "obs": self.obs[:n].tolist(), "act": self.act[:n].tolist(),
            "rew": self.rew[:n].tolist(), "next_obs": self.next_obs[:n].tolist(),
            "done": self.done[:n].tolist(),
        }

    @classmethod
    def from_state_dict(cls, state):
        buf = cls(state["capacity"], state["obs_dims"], state["act_dims"])
        n = min(state["count"], state["capacity"])
        buf.obs[:n] = np.array(state["obs"])
        buf.act[:n] = np.array(state["act"])
        buf.rew[:n] = np.array(state["rew"])
        buf.next_obs[:n] = np.array(state["next_obs"])
        buf.done[:n] = np.array(state["done"])
        buf.count = state["count"]
        return buf


@dataclass
class AgentModel:
    agent_type: str          # "uav" | "hap"
    actor: nn.Mlp
    critic: nn.Mlp
    target_actor: nn.Mlp
    target_critic: nn.Mlp
    actor_opt: nn.Adam
    critic_opt: nn.Adam
    noise_std: float = 0.0

    def state_dict(self):
        return {
            "agent_type": self.agent_type,
            "actor": nn.net_to_dict(self.actor),
            "critic": nn.net_to_dict(self.critic),
            "target_actor": nn.net_to_dict(self.target_actor),
            "target_critic": nn.net_to_dict(self.target_critic),
            "actor_opt": self.actor_opt.state_dict(),
            "critic_opt": self.critic_opt.state_dict(),
            "noise_std": self.noise_std,
        }

    @classmethod
    def from_state_dict(cls, state):
        return cls(
            agent_type=state["agent_type"],
            actor=nn.net_from_dict(state["actor"]),
            critic=nn.net_from_dict(state["critic"]),
            target_actor=nn.net_from_dict(state["target_actor"]),
            target_critic=nn.net_from_dict(state["target_critic"]),
            actor_opt=nn.Adam.from_state_dict(state["actor_opt"]),
            critic_opt=nn.Adam.from_state_dict(state["critic_opt"]),
            noise_std=state["noise_std"],
        )


def make_agents(cfg, train_cfg, rng):
    """One DDPG agent per UAV plus one HAP agent, centralized critics."""
    obs_dims = [env_mod.uav_obs_size(cfg)] * cfg.num_uavs + [env_mod.hap_obs_size(cfg)]
    act_dims = [env_mod.uav_action_size(cfg)] * cfg.num_uavs + [env_mod.hap_action_size(cfg)]
    joint = sum(obs_dims) + sum(act_dims)
    agents = []
    for i, (od, ad) in enumerate(zip(obs_dims, act_dims)):
        actor = nn.Mlp([od, *train_cfg.actor_hidden, ad], out_act="tanh", rng=rng)
        critic = nn.Mlp([joint, *train_cfg.critic_hidden, 1], out_act="identity", rng=rng)
        agents.append(AgentModel(
            agent_type="hap" if i == len(obs_dims) - 1 else "uav",
            actor=actor, critic=critic,
            target_actor=actor.clone(), target_critic=critic.clone(),
            actor_opt=nn.Adam(train_cfg.lr_actor),
            critic_opt=nn.Adam(train_cfg.lr_critic),
            noise_std=train_cfg.noise_start,
        ))
    return agents, obs_dims, act_dims


def act(agent, observation, explore, rng=None):
    """Actor forward pass; optionally Gaussian-perturbed and clipped."""
    a = agent.actor.forward(observation)[0]
    if explore:
        if rng is None:
            raise PreconditionError("exploration requires an rng")
        a = a + rng.normal(0.0, 1.0, size=a.shape) * agent.noise_std
    return np.clip(a, -1.0, 1.0)


def soft_update(primary, target, tau):
    """target <- tau * primary + (1 - tau) * target, parameter-wise."""
    if not 0.0 < tau <= 1.0:
        raise PreconditionError(f"tau must be in (0, 1], got {tau}")
    for p, t in zip(primary.parameters(), target.parameters()):
        t *= 1.0 - tau
        t += tau * p
    return target


def train_step_maddpg(agents, buffer, train_cfg, rng):
    """One gradient step for every agent's critic and actor.

    Returns a list of (critic_loss, actor_objective) per agent, or None if
    the buffer has not reached the warm-up count (explicit no-op).
    """
    if not buffer.ready(train_cfg.warmup):
        return None
    obs, acts, rew, next_obs, done = buffer.sample(rng, train_cfg.batch_size)
    D = len(rew)
    next_obs_split = buffer.split_obs(next_obs)
    next_actions = [ag.target_actor.forward(o) for ag, o in zip(agents, next_obs_split)]
    next_joint = np.concatenate([next_obs, np.concatenate(next_actions, axis=1)], axis=1)
    obs_split = buffer.split_obs(obs)
    act_split = buffer.split_act(acts)
    stats = []
    for i, agent in enumerate(agents):
        # critic regression on the TD target through the target networks
        q_next = agent.target_critic.forward(next_joint)[:, 0]
        y = rew + train_cfg.gamma * (1.0 - done) * q_next
        x = np.concatenate([obs, acts], axis=1)
        q = agent.critic.forward(x)[:, 0]
        diff = q - y
        critic_loss = float((diff ** 2).mean())
        grads, _ = agent.critic.backward((2.0 * diff / D)[:, None])
        agent.critic_opt.step(agent.critic.parameters(), grads)
        # actor ascent on Q with own action substituted into the joint input
        a_i = agent.actor.forward(obs_split[i])
        acts_sub = list(act_split)
        acts_sub[i] = a_i
        x_pi = np.concatenate([obs] + acts_sub, axis=1)
        q_pi = agent.critic.forward(x_pi)
        actor_obj = float(q_pi.mean())
        _, dx = agent.critic.backward(np.full_like(q_pi, 1.0 / D))
        start = obs.shape[1] + sum(buffer.act_dims[:i])
        da = dx[:, start:start + buffer.act_dims[i]]
        agrads, _ = agent.actor.backward(-da)  # minimize -Q
        agent.actor_opt.step(agent.actor.parameters(), agrads)
        stats.append((critic_loss, actor_obj))
    return stats


def frl_aggregate(agents, weights=None):
    """Peer-to-peer federated averaging of actor parameters.

    Agents are grouped by identical actor layer shapes (cross-shape
    averaging is ill-defined); within each group every actor is replaced by
    the weight-combined parameters. Default weights are uniform (1/N per
    the uniform-weight rule), which makes the aggregation a plain mean.
    Critics are untouched. Returns the number of participating agents.
    """
    groups = {}
    for agent in agents:
        groups.setdefault(tuple(agent.actor.sizes), []).append(agent)
    for shape, members in groups.items():
        n = len(members)
        if n == 1:
            continue
        if weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != (n,):
                raise AggregationGroupError(
                    f"need {n} weights for group {shape}, got {w.shape}")
        params = [m.actor.parameters() for m in members]
        combined = [sum(w[k] * params[k][j] for k in range(n))
                    for j in range(len(params[0]))]
        for m in members:
            m.actor.set_parameters([c.copy() for c in combined])
    return len(agents)


def p2p_exchange_count(n_agents):
    """Parameter exchanges per P2P aggregation round."""
    return n_agents


def maddpg_share_count(n_agents):
    """Observation/action shares per centralized-critic training step."""
    return n_agents * (n_agents - 1)


@dataclass
class TrainingResult:
    episodes: list = field(default_factory=list)   # per-episode metric dicts
    agents: list = field(default_factory=list)
    comm_overhead: int = 0


class Trainer:
    """Owns env, agents, replay buffer, and one RNG stream for the run."""

    def __init__(self, scenario_cfg, train_cfg, mode=MODE_MADDPG, seed=None,
                 policy_overlay=None):
        if mode not in (MODE_MADDPG, MODE_P2P_VFRL):
            raise PreconditionError(f"unknown training mode {mode!r}")
        self.cfg = scenario_cfg
        self.train_cfg = train_cfg
        self.mode = mode
        self.policy_overlay = policy_overlay
        self.rng = np.random.default_rng(
            scenario_cfg.rng_seed if seed is None else seed)
        self.env = env_mod.AerialEnv(scenario_cfg, rng=self.rng)
        self.agents, obs_dims, act_dims = make_agents(
            scenario_cfg, train_cfg, self.rng)
        self.buffer = ReplayBuffer(train_cfg.buffer_capacity, obs_dims, act_dims)
        self.episode = 0
        self.global_step = 0
        self.comm_overhead = 0
        self.metrics = []

    def _noise_std(self):
        half = max(1, self.train_cfg.episodes // 2)
        frac = min(1.0, self.episode / half)
        return self.train_cfg.noise_start + frac * (
            self.train_cfg.noise_end - self.train_cfg.noise_start)

    def run_episode(self, explore=True, train=True):
        cfg, tc = self.cfg, self.train_cfg
        std = self._noise_std()
        for agent in self.agents:
            agent.noise_std = std
        obs = self.env.reset()
        done = False
        rewards, closses, aobjs = [], [], []
        while not done:
            raws = [act(a, o, explore, self.rng) for a, o in zip(self.agents, obs)]
            joint = env_mod.decode_action(raws, self.env.world, cfg)
            if self.policy_overlay is not None:
                joint = self.policy_overlay(joint, cfg)
            next_obs, r, done, info = self.env.step(joint)
            if train:
                self.buffer.add(obs, raws, r, next_obs, done)
                stats = train_step_maddpg(self.agents, self.buffer, tc, self.rng)
                if stats is not None:
                    if self.mode == MODE_MADDPG:
                        self.comm_overhead += maddpg_share_count(len(self.agents))
                    closses.extend(s[0] for s in stats)
                    aobjs.extend(s[1] for s in stats)
                self.global_step += 1
                if self.global_step % tc.t_up == 0:
                    for a in self.agents:
                        soft_update(a.actor, a.target_actor, tc.tau)
                        soft_update(a.critic, a.target_critic, tc.tau)
            obs = next_obs
            rewards.append(r)
        tracker = self.env.world.tracker
        slots = self.env.world.t
        return {
            "episode": self.episode,
            "slots": slots,
            "mean_reward": float(np.mean(rewards)) if rewards else 0.0,
            "avg_aoi": tracker.cumulative / (max(slots, 1) * cfg.num_users),
            "critic_loss": float(np.mean(closses)) if closses else float("nan"),
            "actor_obj": float(np.mean(aobjs)) if aobjs else float("nan"),
            "noise_std": std,
            "comm_overhead": self.comm_overhead,
        }

    def train(self, checkpoint_dir=None, stop_after=None):
        """Run episodes until the configured budget, or `stop_after` episodes
        (same noise schedule), for interrupt-and-resume workflows."""
        tc = self.train_cfg
        limit = tc.episodes if stop_after is None else min(tc.episodes, stop_after)
        while self.episode < limit:
            self.episode += 1
            row = self.run_episode(explore=True, train=True)
            self.metrics.append(row)
            if self.mode == MODE_P2P_VFRL and self.episode % tc.t_fl == 1 % tc.t_fl:
                n = frl_aggregate(self.agents)
                self.comm_overhead += p2p_exchange_count(n)
                row["comm_overhead"] = self.comm_overhead
            if (checkpoint_dir and tc.checkpoint_every
                    and self.episode % tc.checkpoint_every == 0):
                self.save_checkpoint(
                    f"{checkpoint_dir}/checkpoint_ep{self.episode:06d}.json")
        return TrainingResult(episodes=self.metrics, agents=self.agents,
                              comm_overhead=self.comm_overhead)

    def evaluate(self, episodes):
        """Greedy rollouts without learning; returns per-episode avg AoI."""
        out = []
        for _ in range(episodes):
            row = self.run_episode(explore=False, train=False)
            out.append(row["avg_aoi"])
        return out

    # ---------- full-state checkpointing ----------
    def state_dict(self):
        return {
            "mode": self.mode,
            "episode": self.episode,
            "global_step": self.global_step,
            "comm_overhead": self.comm_overhead,
            "metrics": self.metrics,
            "rng_state": self.rng.bit_generator.state,
            "agents": [a.state_dict() for a in self.agents],
            "buffer": self.buffer.state_dict(),
        }

    def save_checkpoint(self, path):
        nn.save_checkpoint(path, self.state_dict())

    def load_state(self, state):
        self.mode = state["mode"]
        self.episode = state["episode"]
        self.global_step = state["global_step"]
        self.comm_overhead = state["comm_overhead"]
        self.metrics = list(state["metrics"])
        self.rng.bit_generator.state = state["rng_state"]
        self.agents = [AgentModel.from_state_dict(s) for s in state["agents"]]
        self.buffer = ReplayBuffer.from_state_dict(state["buffer"])

    @classmethod
    def resume(cls, scenario_cfg, train_cfg, path):
        state = nn.load_checkpoint(path)
        trainer = cls(scenario_cfg, train_cfg, mode=state["mode"])
        trainer.load_state(state)
        return trainer


def run_training(scenario_cfg, train_cfg, mode=MODE_MADDPG, seed=None,
                 checkpoint_dir=None):
    """Algorithm-level entry point: build a trainer and run all episodes."""
    trainer = Trainer(scenario_cfg, train_cfg, mode=mode, seed=seed)
    result = trainer.train(checkpoint_dir=checkpoint_dir)
    return result, trainer
