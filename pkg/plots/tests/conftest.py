import json
import subprocess

import pytest

SCHEMA = "# aoisim-metrics v1"

CURVE_HEADER = "episode,slots,mean_reward,avg_aoi,critic_loss,actor_obj,noise_std,comm_overhead"
SWEEP_HEADER = "axis,value,num_users,n_seeds,mean_avg_aoi,ci_lo,ci_hi,transmission_fail_frac"


def write_curve(path, rows):
    lines = [SCHEMA, CURVE_HEADER]
    for ep, rew, aoi in rows:
        lines.append(f"{ep},10,{rew},{aoi},0.1,0.0,0.3,0")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_sweep(path, rows):
    """rows: (value, num_users, mean, lo, hi, fail_frac)"""
    lines = [SCHEMA, SWEEP_HEADER]
    for v, users, m, lo, hi, f in rows:
        lines.append(f"uncertainty,{v},{users},5,{m},{lo},{hi},{f}")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_trace(path, steps, uavs=1, users=2):
    header = ["seed", "episode", "t", "reward"]
    header += [f"aoi_{m}" for m in range(users)]
    header += [f"rate_{m}" for m in range(users)]
    header += [f"uav_cpu_{u}" for u in range(uavs)]
    header += ["hap_cpu"]
    for u in range(uavs):
        header += [f"uav{u}_x", f"uav{u}_y", f"uav{u}_z"]
    for m in range(users):
        header += [f"user{m}_x", f"user{m}_y"]
    lines = [SCHEMA, ",".join(header)]
    for t in range(steps):
        row = [0, 0, t + 1, -1.0]
        row += [t + 1] * users          # ages
        row += [1e6] * users            # rates
        row += [0.0] * uavs + [0.0]     # cpu
        for u in range(uavs):
            row += [100.0 * t + 10 * u, 50.0 * t, 400.0]
        for m in range(users):
            row += [1000.0 + m, 2000.0 - m]
        lines.append(",".join(str(x) for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def make_spec(path, kind, inputs, output, **extra):
    doc = {"kind": kind, "inputs": inputs, "output": output, **extra}
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="session")
def sim_outputs(tmp_path_factory):
    """Real desk-profile runs produced through the simulator's CLI."""
    root = tmp_path_factory.mktemp("sim")
    base = ["aoisim", "--profile", "desk", "--seeds", "0,1"]
    cmds = [
        base + ["--mode", "simulate", "--episodes", "2",
                "--out", str(root / "sim")],
        base + ["--mode", "sweep", "--axis", "uncertainty",
                "--values", "0,0.1,0.2", "--episodes", "2",
                "--out", str(root / "sweep")],
        base + ["--mode", "train", "--episodes", "3",
                "--out", str(root / "train")],
    ]
    for cmd in cmds:
        subprocess.run(cmd, check=True, capture_output=True, text=True)
    return {
        "trace": root / "sim" / "trace.csv",
        "sweep": root / "sweep" / "sweep.csv",
        "curve0": root / "train" / "seed_0" / "learning_curve.csv",
        "curve1": root / "train" / "seed_1" / "learning_curve.csv",
        "root": root,
    }
