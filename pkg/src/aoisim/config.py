"""Scenario configuration: dataclass, validation, profiles, YAML loading."""

import dataclasses
import math
from dataclasses import dataclass

import yaml

from .errors import ConfigurationError


@dataclass
class ScenarioConfig:
    # topology counts
    num_uavs: int = 2
    num_users: int = 4
    num_subchannels: int = 4
    max_tasks_per_user: int = 2
    horizon: int = 100
    # geometry (meters)
    area_x: float = 100e3
    area_y: float = 100e3
    h_min: float = 200.0
    h_max: float = 600.0
    h_hap: float = 20e3
    hap_x: float = 50e3
    hap_y: float = 50e3
    d_min: float = 100.0
    v_max: float = 50.0
    # tasks
    task_size: float = 4e6            # bits
    task_gen_prob: float = 0.5
    # radio
    bandwidth: float = 10e6           # Hz, shared by all subchannels of a UAV
    uav_hap_bandwidth: float = 20e6   # Hz, per UAV backhaul
    p_max_user: float = 0.2           # W
    p_max_uav: float = 0.5            # W
    beta0: float = 1e-3               # linear gain at 1 m
    noise_psd: float = 10 ** (-174 / 10) * 1e-3   # W/Hz (-174 dBm/Hz)
    k_B: float = 1.38e-23             # J/K
    T_temp: float = 1000.0            # K
    antenna_gain: float = 10 ** 1.5   # linear (15 dB)
    line_loss: float = 1.0            # linear
    carrier_freq: float = 2.4e9       # Hz
    R_min: float = 1e5                # bit/s
    epsilon_outage: float = 0.05
    csi_uncertainty_bound: float = 0.0   # err_std as a fraction of the estimated gain
    # compute
    c_u: float = 200.0                # cycles/bit
    c_hap: float = 500.0              # cycles/bit
    C_max_uav: float = 1e9            # cycles/slot
    C_max_hap: float = 5e9            # cycles/slot
    # assignment caps
    sc_per_user_cap: int = 1
    users_per_sc_cap: int = 2
    # mobility
    user_speed_std: float = 50.0      # m per slot, per axis
    # rng
    rng_seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        counts = {
            "num_uavs": self.num_uavs,
            "num_users": self.num_users,
            "num_subchannels": self.num_subchannels,
            "max_tasks_per_user": self.max_tasks_per_user,
            "horizon": self.horizon,
            "sc_per_user_cap": self.sc_per_user_cap,
            "users_per_sc_cap": self.users_per_sc_cap,
        }
        for name, val in counts.items():
            if int(val) != val or val < 1:
                raise ConfigurationError(f"{name} must be an integer >= 1, got {val}")
        if not (self.h_min <= self.h_max < self.h_hap):
            raise ConfigurationError(
                f"need h_min <= h_max < h_hap, got {self.h_min}, {self.h_max}, {self.h_hap}")
        if not 0.0 <= self.task_gen_prob <= 1.0:
            raise ConfigurationError(f"task_gen_prob must be in [0,1], got {self.task_gen_prob}")
        if not 0.0 < self.epsilon_outage < 1.0:
            raise ConfigurationError(
                f"epsilon_outage must be in (0,1), got {self.epsilon_outage}")
        positive = {
            "area_x": self.area_x, "area_y": self.area_y,
            "task_size": self.task_size, "bandwidth": self.bandwidth,
            "uav_hap_bandwidth": self.uav_hap_bandwidth,
            "p_max_user": self.p_max_user, "p_max_uav": self.p_max_uav,
            "beta0": self.beta0, "noise_psd": self.noise_psd,
            "c_u": self.c_u, "c_hap": self.c_hap,
            "C_max_uav": self.C_max_uav, "C_max_hap": self.C_max_hap,
            "k_B": self.k_B, "T_temp": self.T_temp,
            "antenna_gain": self.antenna_gain, "line_loss": self.line_loss,
            "carrier_freq": self.carrier_freq,
        }
        for name, val in positive.items():
            if not val > 0:
                raise ConfigurationError(f"{name} must be > 0, got {val}")
        for name, val in {"v_max": self.v_max, "d_min": self.d_min,
                          "user_speed_std": self.user_speed_std,
                          "csi_uncertainty_bound": self.csi_uncertainty_bound,
                          "R_min": self.R_min}.items():
            if val < 0 or not math.isfinite(val):
                raise ConfigurationError(f"{name} must be finite and >= 0, got {val}")

    @property
    def subchannel_bandwidth(self):
        return self.bandwidth / self.num_subchannels

    @property
    def noise_power(self):
        """AWGN power over one subchannel, W."""
        return self.noise_psd * self.subchannel_bandwidth

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)

    def to_dict(self):
        return dataclasses.asdict(self)


# Published network scale: 2 UAVs at 400 m over a 200 km x 200 km area, 40 users,
# 8 subchannels, 10 Mbit tasks, each subchannel shared by up to 4 users and each
# user on up to 2 subchannels.
PAPER_PROFILE = dict(
    num_uavs=2,
    num_users=40,
    num_subchannels=8,
    max_tasks_per_user=5,
    horizon=1000,
    area_x=200e3,
    area_y=200e3,
    h_min=400.0,
    h_max=400.0,
    h_hap=20e3,
    hap_x=100e3,
    hap_y=100e3,
    d_min=500.0,
    v_max=50.0,
    task_size=1e7,
    task_gen_prob=0.5,
    bandwidth=10e6,
    uav_hap_bandwidth=20e6,
    p_max_user=0.2,
    p_max_uav=0.5,
    c_u=200.0,
    c_hap=500.0,
    C_max_uav=1e9,
    C_max_hap=5e9,
    sc_per_user_cap=2,
    users_per_sc_cap=4,
    user_speed_std=50.0,
)

# CI-sized scenario: same physics, small topology, tasks sized so that elastic
# scheduling matters (a task rarely fits a single slot's rate).
DESK_PROFILE = dict(
    num_uavs=2,
    num_users=4,
    num_subchannels=4,
    max_tasks_per_user=2,
    horizon=100,
    area_x=100e3,
    area_y=100e3,
    h_min=200.0,
    h_max=600.0,
    h_hap=20e3,
    hap_x=50e3,
    hap_y=50e3,
    d_min=100.0,
    v_max=50.0,
    task_size=1.6e7,
    task_gen_prob=0.5,
    sc_per_user_cap=1,
    users_per_sc_cap=2,
    user_speed_std=50.0,
)

PROFILES = {"paper": PAPER_PROFILE, "desk": DESK_PROFILE}

_FIELD_NAMES = {f.name for f in dataclasses.fields(ScenarioConfig)}


def make_config(profile="desk", **overrides):
    if profile not in PROFILES:
        raise ConfigurationError(f"unknown profile {profile!r}, expected one of {sorted(PROFILES)}")
    params = dict(PROFILES[profile])
    unknown = set(overrides) - _FIELD_NAMES
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    params.update(overrides)
    return ScenarioConfig(**params)


def load_config(path):
    """Load a ScenarioConfig from a YAML file.

    Layout: optional top-level `profile: paper|desk` selecting the base
    profile, plus a `scenario:` mapping of field overrides. Unknown keys
    anywhere are an error.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigurationError(f"config file {path} must contain a mapping")
    unknown_top = set(doc) - {"profile", "scenario"}
    if unknown_top:
        raise ConfigurationError(f"unknown top-level config keys: {sorted(unknown_top)}")
    profile = doc.get("profile", "desk")
    scenario = doc.get("scenario") or {}
    if not isinstance(scenario, dict):
        raise ConfigurationError("'scenario' must be a mapping of field overrides")
    # YAML 1.1 reads `2.0e6` (no exponent sign) as a string; accept it anyway.
    for key, val in scenario.items():
        if isinstance(val, str):
            try:
                scenario[key] = float(val)
            except ValueError:
                pass
    return make_config(profile=profile, **scenario)
