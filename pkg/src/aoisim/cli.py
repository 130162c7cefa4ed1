"""Run orchestration: simulate / train / evaluate / sweep entry points.

Outputs are a pure function of the manifest: one RNG stream per (seed,
episode loop), repr-formatted floats, and sorted aggregation keys.
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import click
import numpy as np

from . import agents as agents_mod
from . import baselines, env as env_mod, metrics
from .config import load_config, make_config
from .errors import ConfigurationError, PreconditionError

SWEEP_AXES = {
    "uav_cpu": "C_max_uav",
    "hap_cpu": "C_max_hap",
    "user_power": "p_max_user",
    "uav_power": "p_max_uav",
    "subchannels": "num_subchannels",
    "task_size": "task_size",
    "uncertainty": "csi_uncertainty_bound",
    "num_users": "num_users",
}
_INT_AXES = {"subchannels", "num_users"}


@dataclass
class RunManifest:
    mode: str = "simulate"                 # simulate | train | evaluate | sweep
    profile: str = "desk"
    config_path: str | None = None
    policy: str = "random_feasible"
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = "runs"
    episodes: int = 10
    axis: str | None = None
    values: list = field(default_factory=list)
    train_mode: str = agents_mod.MODE_MADDPG
    checkpoint: str | None = None
    resume: str | None = None
    workers: int = 1
    overrides: dict = field(default_factory=dict)

    def validate(self):
        if not self.seeds:
            raise ConfigurationError("seed list must be nonempty")
        if self.mode not in ("simulate", "train", "evaluate", "sweep"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.policy not in baselines.POLICY_KINDS:
            raise ConfigurationError(f"unknown policy {self.policy!r}")
        if self.mode == "sweep":
            if self.axis not in SWEEP_AXES:
                raise ConfigurationError(
                    f"sweep axis must be one of {sorted(SWEEP_AXES)}")
            if not self.values:
                raise ConfigurationError("sweep needs at least one axis value")


def build_config(manifest):
    if manifest.config_path:
        cfg = load_config(manifest.config_path)
    else:
        cfg = make_config(manifest.profile)
    if manifest.overrides:
        cfg = cfg.replace(**manifest.overrides)
    return cfg


def _policy_step_action(policy, world, cfg, rng, learned_agents=None):
    if policy == "learned":
        obs = [env_mod.encode_state(world, a, cfg)
               for a in list(range(cfg.num_uavs)) + [env_mod.HAP_AGENT]]
        raws = [agents_mod.act(ag, o, explore=False)
                for ag, o in zip(learned_agents, obs)]
        return env_mod.decode_action(raws, world, cfg)
    action = baselines.random_feasible_policy(world, cfg, rng)
    if policy == "full_power":
        action = baselines.full_power_policy(action, cfg)
    return action


def run_policy_episodes(cfg, policy, seed, episodes, collect_trace=False,
                        learned_agents=None, check=False):
    """Roll out `episodes` episodes under one RNG stream.

    Returns (episode_rows, trace_rows). The fixed_task policy swaps in the
    non-separable scheduler; action sampling stays random_feasible.
    """
    if policy == "learned" and learned_agents is None:
        raise PreconditionError("learned policy needs loaded agents")
    rng = np.random.default_rng(seed)
    fixed = policy == "fixed_task"
    environment = env_mod.AerialEnv(cfg, rng=rng, fixed_task=fixed)
    ep_rows, trace_rows = [], []
    for ep in range(episodes):
        environment.reset()
        done = False
        while not done:
            action = _policy_step_action(policy, environment.world, cfg, rng,
                                         learned_agents)
            _, r, done, info = environment.step(action, check=check)
            w = environment.world
            if collect_trace:
                row = [seed, ep, w.t, r]
                row.extend(int(a) for a in w.tracker.age)
                user_rates = info["rates"].sum(axis=(1, 2))
                row.extend(float(x) for x in user_rates)
                row.extend(float(x) for x in w.uav_cpu_usage)
                row.append(float(w.hap_cpu_usage))
                for u in range(cfg.num_uavs):
                    row.extend(float(x) for x in w.uav_pos[u])
                for m in range(cfg.num_users):
                    row.extend(float(x) for x in w.user_xy[m])
                trace_rows.append(row)
        w = environment.world
        ep_rows.append([
            seed, ep, w.t,
            w.tracker.cumulative / (max(w.t, 1) * cfg.num_users),
            int(w.ledger.completed.sum()),
            baselines.has_transmission_fail(w.ledger, cfg),
        ])
    return ep_rows, trace_rows


def trace_header(cfg):
    h = ["seed", "episode", "t", "reward"]
    h += [f"aoi_{m}" for m in range(cfg.num_users)]
    h += [f"rate_{m}" for m in range(cfg.num_users)]
    h += [f"uav_cpu_{u}" for u in range(cfg.num_uavs)]
    h += ["hap_cpu"]
    for u in range(cfg.num_uavs):
        h += [f"uav{u}_x", f"uav{u}_y", f"uav{u}_z"]
    for m in range(cfg.num_users):
        h += [f"user{m}_x", f"user{m}_y"]
    return h

EPISODE_HEADER = ["seed", "episode", "slots", "avg_aoi", "completed_tasks",
                  "transmission_fail"]
CURVE_HEADER = ["episode", "slots", "mean_reward", "avg_aoi", "critic_loss",
                "actor_obj", "noise_std", "comm_overhead"]
SWEEP_HEADER = ["axis", "value", "num_users", "n_seeds", "mean_avg_aoi",
                "ci_lo", "ci_hi", "transmission_fail_frac"]


def cmd_simulate(manifest):
    manifest.validate()
    cfg = build_config(manifest)
    os.makedirs(manifest.out_dir, exist_ok=True)
    learned = _load_learned(manifest) if manifest.policy == "learned" else None
    ep_rows, trace_rows = [], []
    for seed in manifest.seeds:
        er, tr = run_policy_episodes(cfg, manifest.policy, seed,
                                     manifest.episodes, collect_trace=True,
                                     learned_agents=learned)
        ep_rows.extend(er)
        trace_rows.extend(tr)
    trace_path = os.path.join(manifest.out_dir, "trace.csv")
    episodes_path = os.path.join(manifest.out_dir, "episodes.csv")
    metrics.write_metrics(trace_path, trace_header(cfg), trace_rows)
    metrics.write_metrics(episodes_path, EPISODE_HEADER, ep_rows)
    avg = (float(np.mean([r[3] for r in ep_rows])) if ep_rows else None)
    summary = {
        "manifest": asdict(manifest),
        "num_episodes": len(ep_rows),
        "mean_avg_aoi": avg,
        "files": {"trace": "trace.csv", "episodes": "episodes.csv"},
    }
    metrics.write_summary(os.path.join(manifest.out_dir, "summary.json"), summary)
    return summary


def cmd_train(manifest, train_cfg=None):
    manifest.validate()
    if manifest.train_mode not in (agents_mod.MODE_MADDPG, agents_mod.MODE_P2P_VFRL):
        raise ConfigurationError(f"unknown training mode {manifest.train_mode!r}")
    cfg = build_config(manifest)
    os.makedirs(manifest.out_dir, exist_ok=True)
    tc = train_cfg or agents_mod.TrainConfig(episodes=manifest.episodes)
    summaries = []
    for seed in manifest.seeds:
        seed_dir = os.path.join(manifest.out_dir, f"seed_{seed}")
        os.makedirs(seed_dir, exist_ok=True)
        if manifest.resume:
            trainer = agents_mod.Trainer.resume(cfg, tc, manifest.resume)
        else:
            trainer = agents_mod.Trainer(cfg, tc, mode=manifest.train_mode,
                                         seed=seed)
        result = trainer.train(checkpoint_dir=seed_dir)
        rows = [[r["episode"], r["slots"], r["mean_reward"], r["avg_aoi"],
                 r["critic_loss"], r["actor_obj"], r["noise_std"],
                 r["comm_overhead"]] for r in result.episodes]
        metrics.write_metrics(os.path.join(seed_dir, "learning_curve.csv"),
                              CURVE_HEADER, rows)
        trainer.save_checkpoint(os.path.join(seed_dir, "checkpoint_final.json"))
        summaries.append({
            "seed": seed,
            "episodes": len(rows),
            "final_avg_aoi": rows[-1][3] if rows else None,
            "comm_overhead": trainer.comm_overhead,
        })
    summary = {"manifest": asdict(manifest), "seeds": summaries}
    metrics.write_summary(os.path.join(manifest.out_dir, "summary.json"), summary)
    return summary


def cmd_evaluate(manifest):
    """Greedy rollouts of a trained checkpoint, logged like simulate."""
    manifest = RunManifest(**{**asdict(manifest), "policy": "learned"})
    return cmd_simulate(manifest)


def _load_learned(manifest):
    if not manifest.checkpoint:
        raise ConfigurationError("learned policy requires --checkpoint")
    from .nn import load_checkpoint
    state = load_checkpoint(manifest.checkpoint)
    return [agents_mod.AgentModel.from_state_dict(s) for s in state["agents"]]


def _sweep_point(args):
    profile, config_path, overrides, axis, value, policy, seeds, episodes = args
    manifest_cfg = RunManifest(profile=profile, config_path=config_path,
                               overrides=overrides)
    cfg = build_config(manifest_cfg)
    field_name = SWEEP_AXES[axis]
    cast = int if axis in _INT_AXES else float
    cfg = cfg.replace(**{field_name: cast(value)})
    per_seed = []
    fails = 0
    total_eps = 0
    for seed in seeds:
        rows, _ = run_policy_episodes(cfg, policy, seed, episodes)
        per_seed.append(float(np.mean([r[3] for r in rows])))
        fails += sum(1 for r in rows if r[5])
        total_eps += len(rows)
    return value, per_seed, fails / max(total_eps, 1), cfg.num_users


def bootstrap_ci(values, n_resamples=1000, alpha=0.05, seed=1234):
    """Percentile bootstrap CI of the mean over per-seed values."""
    values = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    means = rng.choice(values, size=(n_resamples, len(values)), replace=True).mean(axis=1)
    return (float(np.quantile(means, alpha / 2)),
            float(np.quantile(means, 1 - alpha / 2)))


def cmd_sweep(manifest):
    manifest.validate()
    os.makedirs(manifest.out_dir, exist_ok=True)
    jobs = [(manifest.profile, manifest.config_path, manifest.overrides,
             manifest.axis, v, manifest.policy, list(manifest.seeds),
             manifest.episodes) for v in manifest.values]
    if manifest.workers > 1:
        with ProcessPoolExecutor(max_workers=manifest.workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    rows = []
    for value, per_seed, fail_frac, num_users in sorted(results, key=lambda r: r[0]):
        lo, hi = bootstrap_ci(per_seed)
        rows.append([manifest.axis, float(value), num_users, len(per_seed),
                     float(np.mean(per_seed)), lo, hi, fail_frac])
    sweep_path = os.path.join(manifest.out_dir, "sweep.csv")
    metrics.write_metrics(sweep_path, SWEEP_HEADER, rows)
    summary = {"manifest": asdict(manifest),
               "points": [{"value": r[1], "mean_avg_aoi": r[4]} for r in rows],
               "files": {"sweep": "sweep.csv"}}
    metrics.write_summary(os.path.join(manifest.out_dir, "summary.json"), summary)
    return summary


def run_manifest(manifest):
    dispatch = {"simulate": cmd_simulate, "train": cmd_train,
                "evaluate": cmd_evaluate, "sweep": cmd_sweep}
    return dispatch[manifest.mode](manifest)


def _parse_list(text, cast):
    return [cast(x) for x in text.split(",") if x.strip() != ""]


@click.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML scenario config overriding the profile.")
@click.option("--mode", default="simulate",
              type=click.Choice(["simulate", "train", "evaluate", "sweep"]))
@click.option("--policy", default="random_feasible",
              type=click.Choice(list(baselines.POLICY_KINDS)))
@click.option("--seeds", default="0", help="Comma-separated seed list.")
@click.option("--episodes", default=10, type=int)
@click.option("--axis", default=None, type=click.Choice(sorted(SWEEP_AXES)))
@click.option("--values", default="", help="Comma-separated sweep axis values.")
@click.option("--out", "out_dir", default="runs", type=click.Path())
@click.option("--profile", default="desk", type=click.Choice(["paper", "desk"]))
@click.option("--train-mode", default=agents_mod.MODE_MADDPG,
              type=click.Choice([agents_mod.MODE_MADDPG, agents_mod.MODE_P2P_VFRL]))
@click.option("--checkpoint", default=None, type=click.Path(),
              help="Checkpoint for the learned policy / evaluate mode.")
@click.option("--resume", default=None, type=click.Path(),
              help="Resume training from a full-state checkpoint.")
@click.option("--workers", default=1, type=int, help="Parallel sweep workers.")
def main(config_path, mode, policy, seeds, episodes, axis, values, out_dir,
         profile, train_mode, checkpoint, resume, workers):
    """Seeded simulation, training, and sweep runs with delimited metrics."""
    manifest = RunManifest(
        mode=mode, profile=profile, config_path=config_path, policy=policy,
        seeds=_parse_list(seeds, int), out_dir=out_dir, episodes=episodes,
        axis=axis, values=_parse_list(values, float), train_mode=train_mode,
        checkpoint=checkpoint, resume=resume, workers=workers)
    summary = run_manifest(manifest)
    click.echo(json.dumps({"out_dir": out_dir,
                           "mode": mode,
                           "ok": True,
                           "summary_keys": sorted(summary)}))


if __name__ == "__main__":
    main()
