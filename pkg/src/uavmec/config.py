"""Network and training configuration.

One flat :class:`NetworkConfig` carries every physical constant, environment
setting, and learning hyperparameter.  Configs load from INI-style files
(``key = value`` grouped in named sections), can be overridden through
``UAVMEC_<FIELDNAME>`` environment variables, and hash to a stable digest so
checkpoints can verify they are evaluated under the config they were trained
with.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import math
import os
from dataclasses import dataclass, field, fields
from importlib import resources

ENV_PREFIX = "UAVMEC_"


class ConfigError(ValueError):
    """Raised for unknown keys, malformed values, or violated invariants."""


@dataclass
class NetworkConfig:
    # --- sub-THz link and hardware constants -------------------------------
    noise_psd_dbm_per_hz: float = -175.0   # AWGN power spectral density
    p_ul_watt: float = 0.5                 # uplink transmit power per user
    p_max_watt: float = 5.0                # downlink power budget per UAV
    absorption_a: float = 0.005            # molecular absorption, 1/m
    bandwidth_hz: float = 0.2e12           # total band per UAV per direction
    r_min_bps: float = 0.05e12             # QoS floor on achievable rate
    gain_ref_db: float = -40.0             # channel gain at 1 m reference
    altitude_m: float = 50.0               # fixed UAV flight altitude

    # --- computation model --------------------------------------------------
    eta: float = 0.5                       # energy/delay trade-off weight
    beta_mu: float = 1000.0                # CPU cycles per bit at users
    beta_uav: float = 1000.0               # CPU cycles per bit at UAV servers
    q_mu: float = 1e-28                    # chip constant at users
    q_uav: float = 1e-28                   # chip constant at UAV servers
    delta_prog: float = 0.1                # result-size shrink factor
    c_mu_min: float = 1e8                  # cycle-rate bounds, cycles/s
    c_mu_max: float = 1e9
    c_uav_max: float = 1e10

    # --- flight model -------------------------------------------------------
    c1: float = 9.26e-4                    # airframe drag constant
    c2: float = 2250.0                     # induced-power constant
    slot_duration_s: float = 1.0
    v_max_mps: float = 25.0
    l_min_m: float = 20.0                  # minimum inter-UAV separation
    flight_time_s: float = 0.0             # 0 means "full slot duration"
    hover_speed_mps: float = 1.0           # below this, treat as hovering

    # --- world layout and tasks ---------------------------------------------
    n_uavs: int = 3
    n_mus: int = 50
    n_slots: int = 100
    region_m: float = 500.0
    task_bits_min: float = 1e5
    task_bits_max: float = 1e6
    max_users: int = 0                     # 0 means "n_mus" (worst case)
    uav_spawn: str = "auto"                # "auto" or "x:y; x:y; ..."

    # --- reward shaping -----------------------------------------------------
    zeta_ul: float = 1.0                   # uplink-bandwidth slack bonus
    zeta_dl: float = 1.0                   # downlink-bandwidth slack bonus
    nu: float = 0.1                        # downlink power-budget slack bonus
    xi: float = 10.0                       # separation-violation penalty
    infeasible_delay_s: float = 10.0       # stand-in delay for dead links
    reward_sign_paper: bool = False        # raw +(u_now - u_prev) variant
    p11_resolve_per_slot: bool = True      # re-solve CPU split every slot

    # --- networks -----------------------------------------------------------
    hidden_units: int = 256
    hidden_layers: int = 2
    hidden_layers_gmappo: int = 3
    att_dim: int = 16                      # per-user attention output width
    log_std_init: float = -0.5

    # --- PPO ----------------------------------------------------------------
    learning_rate: float = 3e-4
    clip_eps: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    ppo_epochs: int = 10
    minibatch_size: int = 256
    max_env_steps: int = 200000
    episodes: int = 2000
    update_every_episodes: int = 10
    normalize_advantages: bool = True
    kl_stop: float = 0.0                   # 0 disables approx-KL early stop

    def __post_init__(self):
        self.validate()

    # Effective values -------------------------------------------------------

    @property
    def noise_psd_w_per_hz(self) -> float:
        return 10.0 ** ((self.noise_psd_dbm_per_hz - 30.0) / 10.0)

    @property
    def gain_ref_linear(self) -> float:
        return 10.0 ** (self.gain_ref_db / 10.0)

    @property
    def t_fly_s(self) -> float:
        return self.flight_time_s if self.flight_time_s > 0 else self.slot_duration_s

    @property
    def effective_max_users(self) -> int:
        return self.max_users if self.max_users > 0 else self.n_mus

    def spawn_points(self) -> list[tuple[float, float]]:
        """UAV spawn positions: parsed from config or evenly spread."""
        if self.uav_spawn.strip().lower() != "auto":
            pts = []
            for chunk in self.uav_spawn.split(";"):
                chunk = chunk.strip()
                if not chunk:
                    continue
                x, y = chunk.split(":")
                pts.append((float(x), float(y)))
            if len(pts) != self.n_uavs:
                raise ConfigError(
                    f"uav_spawn lists {len(pts)} points but n_uavs = {self.n_uavs}"
                )
            return pts
        return [
            (self.region_m * (i + 1) / (self.n_uavs + 1), self.region_m / 2.0)
            for i in range(self.n_uavs)
        ]

    # Validation --------------------------------------------------------------

    def validate(self) -> None:
        positive = [
            "p_ul_watt", "p_max_watt", "bandwidth_hz", "r_min_bps",
            "beta_mu", "beta_uav", "q_mu", "q_uav", "c_mu_min", "c_mu_max",
            "c_uav_max", "c1", "c2", "slot_duration_s", "v_max_mps",
            "l_min_m", "region_m", "task_bits_min", "task_bits_max",
            "infeasible_delay_s", "altitude_m",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be strictly positive")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError("eta must lie in [0, 1]")
        if not 0.0 < self.delta_prog < 1.0:
            raise ConfigError("delta_prog must lie in (0, 1)")
        if self.absorption_a < 0:
            raise ConfigError("absorption_a must be non-negative")
        if self.c_mu_min > self.c_mu_max:
            raise ConfigError("c_mu_min must not exceed c_mu_max")
        if self.task_bits_min > self.task_bits_max:
            raise ConfigError("task_bits_min must not exceed task_bits_max")
        if min(self.n_uavs, self.n_mus, self.n_slots) < 1:
            raise ConfigError("n_uavs, n_mus, n_slots must all be at least 1")
        if self.max_users and self.max_users < math.ceil(self.n_mus / self.n_uavs):
            raise ConfigError(
                "max_users too small: a UAV can end up serving more users"
            )
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError("clip_eps must lie in (0, 1)")
        for name in ("gamma", "gae_lambda"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1]")

    # Serialization -----------------------------------------------------------

    _SECTIONS = {
        "physics": (
            "noise_psd_dbm_per_hz", "p_ul_watt", "p_max_watt", "absorption_a",
            "bandwidth_hz", "r_min_bps", "gain_ref_db", "altitude_m", "eta",
            "beta_mu", "beta_uav", "q_mu", "q_uav", "delta_prog", "c_mu_min",
            "c_mu_max", "c_uav_max", "c1", "c2", "slot_duration_s",
            "v_max_mps", "l_min_m", "flight_time_s", "hover_speed_mps",
        ),
        "environment": (
            "n_uavs", "n_mus", "n_slots", "region_m", "task_bits_min",
            "task_bits_max", "max_users", "uav_spawn", "zeta_ul", "zeta_dl",
            "nu", "xi", "infeasible_delay_s", "reward_sign_paper",
            "p11_resolve_per_slot",
        ),
        "learning": (
            "hidden_units", "hidden_layers", "hidden_layers_gmappo",
            "att_dim", "log_std_init", "learning_rate", "clip_eps", "gamma",
            "gae_lambda", "value_coef", "entropy_coef", "ppo_epochs",
            "minibatch_size", "max_env_steps", "episodes",
            "update_every_episodes", "normalize_advantages", "kl_stop",
        ),
    }

    def to_ini(self) -> str:
        out = io.StringIO()
        for section, names in self._SECTIONS.items():
            out.write(f"[{section}]\n")
            for name in names:
                out.write(f"{name} = {getattr(self, name)!r}\n")
            out.write("\n")
        return out.getvalue()

    def replace(self, **overrides) -> "NetworkConfig":
        return dataclasses.replace(self, **overrides)

    def config_hash(self) -> str:
        """Digest of everything a trained checkpoint depends on.

        Physics, world layout, reward shaping, and network architecture are
        covered; pure run-budget knobs (episode counts, optimizer settings)
        are not, so a checkpoint stays loadable for evaluation under any
        training budget.
        """
        arch = ("hidden_units", "hidden_layers", "hidden_layers_gmappo",
                "att_dim")
        names = self._SECTIONS["physics"] + self._SECTIONS["environment"] \
            + arch
        lines = sorted(f"{name}={getattr(self, name)!r}" for name in names)
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def _field_types() -> dict[str, type]:
    return {f.name: f.type for f in fields(NetworkConfig)}


_PY_TYPES = {"float": float, "int": int, "bool": bool, "str": str}


def _parse_value(name: str, raw: str):
    kinds = _field_types()
    if name not in kinds:
        raise ConfigError(f"unknown config key: {name}")
    kind = _PY_TYPES.get(str(kinds[name]).replace("<class '", "").replace("'>", ""), None)
    if kind is None:
        kind = kinds[name] if isinstance(kinds[name], type) else str
    raw = raw.strip().strip("'\"")
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(float(raw)) if ("e" in raw or "." in raw) else int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for config key {name}: {raw!r}") from exc


def load_config(
    path: str | None = None,
    profile: str | None = None,
    overrides: dict[str, object] | None = None,
    apply_env: bool = True,
) -> NetworkConfig:
    """Build a config from an optional profile, file, env vars, and overrides.

    Precedence, lowest to highest: dataclass defaults, named profile, config
    file, ``UAVMEC_*`` environment variables, explicit ``overrides``.
    """
    values: dict[str, object] = {}
    if profile is not None:
        values.update(_read_profile(profile))
    if path is not None:
        values.update(_read_ini_file(path))
    if apply_env:
        for key, raw in sorted(os.environ.items()):
            if key.startswith(ENV_PREFIX):
                name = key[len(ENV_PREFIX):].lower()
                values[name] = _parse_value(name, raw)
    if overrides:
        for name, val in overrides.items():
            if name not in _field_types():
                raise ConfigError(f"unknown config key: {name}")
            values[name] = val
    try:
        return NetworkConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _read_ini_text(text: str, origin: str) -> dict[str, object]:
    parser = configparser.ConfigParser()
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {origin}: {exc}") from exc
    values: dict[str, object] = {}
    for section in parser.sections():
        for name, raw in parser.items(section):
            values[name] = _parse_value(name, raw)
    return values


def _read_ini_file(path: str) -> dict[str, object]:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return _read_ini_text(fh.read(), path)


def available_profiles() -> list[str]:
    pkg = resources.files("uavmec").joinpath("profiles")
    return sorted(p.name[:-4] for p in pkg.iterdir() if p.name.endswith(".cfg"))


def _read_profile(profile: str) -> dict[str, object]:
    name = {"table2-full": "table2_full"}.get(profile, profile).replace("-", "_")
    res = resources.files("uavmec").joinpath(f"profiles/{name}.cfg")
    if not res.is_file():
        raise ConfigError(
            f"unknown profile {profile!r}; available: {', '.join(available_profiles())}"
        )
    return _read_ini_text(res.read_text(encoding="utf-8"), f"profile:{profile}")
