"""Training orchestration: the five-agent resource learner, the single-agent
baseline, deterministic evaluation with fairness and fixed-offloading
overlays, checkpointing, and run logs.

Centralized training, distributed execution: every actor consumes only its
own UAV's encoded observation; every critic sees all UAVs' observations,
rotated so the acting UAV comes first (the rotation keeps one shared critic
meaningful across UAV streams).  One parameter set per agent role is shared
across UAVs.  The per-user attention encoder is shared by all agents and
receives gradients from each agent's update in role order.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import envsim as env
from .autodiff import Tensor, concat, no_grad
from .config import NetworkConfig
from .nn import MLP, Adam, GaussianHead, MhaEncoder, MhaEncoderSpec
from .ppo import PpoHyper, RolloutBuffer, Transition, update

ROLES = ("omega_ul", "omega_dl", "p", "alpha", "l")
GMAPPO_ROLE = "g"
CHECKPOINT_MAGIC = b"UMECNET1"


@dataclass(frozen=True)
class Segment:
    """One block of an agent's action vector and how it maps to env units."""

    name: str
    dim: int
    squash: str
    scale: float


def role_segments(cfg: NetworkConfig) -> dict[str, list[Segment]]:
    m = cfg.effective_max_users
    hop = cfg.v_max_mps * cfg.slot_duration_s
    return {
        "omega_ul": [Segment("omega_ul", m, "unit", 1.0)],
        "omega_dl": [Segment("omega_dl", m, "unit", 1.0)],
        "p": [Segment("p", m, "unit", cfg.p_max_watt)],
        "alpha": [Segment("alpha", m, "unit", 1.0)],
        "l": [Segment("l", 2, "symmetric", hop)],
    }


class CompositeHead:
    """Per-segment Gaussian heads acting as one head over the concatenation."""

    def __init__(self, segments: list[Segment], log_std_init: float):
        self.segments = segments
        self.heads = [
            GaussianHead(s.dim, log_std_init=log_std_init, squash=s.squash,
                         scale=s.scale)
            for s in segments
        ]
        self.offsets = np.cumsum([0] + [s.dim for s in segments])
        self.dim = int(self.offsets[-1])

    def _split(self, arr):
        return [arr[..., lo:hi]
                for lo, hi in zip(self.offsets[:-1], self.offsets[1:])]

    def sample_raw(self, mean: np.ndarray, rng: np.random.Generator
                   ) -> np.ndarray:
        return np.concatenate(
            [h.sample_raw(part, rng)
             for h, part in zip(self.heads, self._split(mean))], axis=-1)

    def to_action(self, raw: np.ndarray) -> np.ndarray:
        return np.concatenate(
            [h.to_action(part)
             for h, part in zip(self.heads, self._split(raw))], axis=-1)

    def log_prob(self, mean: Tensor, raw: np.ndarray) -> Tensor:
        parts = []
        for i, h in enumerate(self.heads):
            lo, hi = self.offsets[i], self.offsets[i + 1]
            mean_part = _cols(mean, int(lo), int(hi))
            parts.append(h.log_prob(mean_part, raw[..., lo:hi]))
        total = parts[0]
        for p in parts[1:]:
            total = total + p
        return total

    def entropy(self) -> Tensor:
        total = self.heads[0].entropy()
        for h in self.heads[1:]:
            total = total + h.entropy()
        return total

    def parameters(self):
        return [h.log_std for h in self.heads]


def _cols(t: Tensor, lo: int, hi: int) -> Tensor:
    """Column slice with gradient support via a selection matrix."""
    n = t.shape[-1]
    if lo == 0 and hi == n:
        return t
    sel = np.zeros((n, hi - lo))
    sel[lo:hi] = np.eye(hi - lo)
    return t @ Tensor(sel)


class RoleAgent:
    """Actor, composite head, and centralized critic for one agent role."""

    def __init__(self, role: str, segments: list[Segment], obs_dim: int,
                 critic_dim: int, cfg: NetworkConfig,
                 rng: np.random.Generator, hidden_layers: int):
        hidden = [cfg.hidden_units] * hidden_layers
        self.role = role
        self.head = CompositeHead(segments, cfg.log_std_init)
        self.actor = MLP([obs_dim] + hidden + [self.head.dim], rng,
                         out_scale=0.01)
        self.critic = MLP([critic_dim] + hidden + [1], rng)

    def parameters(self):
        return (self.actor.parameters() + self.critic.parameters()
                + self.head.parameters())


class PolicyBundle:
    """Shared encoder plus one agent per role, with optimizer state."""

    def __init__(self, cfg: NetworkConfig, seed: int, kind: str = "rmappo"):
        if kind not in ("rmappo", "gmappo"):
            raise ValueError(f"unknown bundle kind {kind!r}")
        self.cfg = cfg
        self.kind = kind
        self.version = 1
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=seed, spawn_key=(0xA11,)))
        spec = MhaEncoderSpec(cfg.effective_max_users, env.MEMBER_FEATURES,
                              cfg.att_dim)
        self.encoder = MhaEncoder(spec, rng)
        self.obs_dim = 2 + spec.output_dim
        self.critic_dim = cfg.n_uavs * self.obs_dim
        segments = role_segments(cfg)
        self.agents: dict[str, RoleAgent] = {}
        if kind == "rmappo":
            for role in ROLES:
                self.agents[role] = RoleAgent(
                    role, segments[role], self.obs_dim, self.critic_dim,
                    cfg, rng, cfg.hidden_layers)
        else:
            flat = [seg for role in ROLES for seg in segments[role]]
            self.agents[GMAPPO_ROLE] = RoleAgent(
                GMAPPO_ROLE, flat, self.obs_dim, self.critic_dim, cfg, rng,
                cfg.hidden_layers_gmappo)
        self.optimizers = {
            role: Adam(agent.parameters() + self.encoder.parameters(),
                       lr=cfg.learning_rate)
            for role, agent in self.agents.items()
        }

    @property
    def roles(self) -> tuple[str, ...]:
        return tuple(self.agents.keys())

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = [("encoder.wq", self.encoder.wq),
               ("encoder.wk", self.encoder.wk),
               ("encoder.wv", self.encoder.wv)]
        for role, agent in self.agents.items():
            for net_name, net in (("actor", agent.actor),
                                  ("critic", agent.critic)):
                for i, layer in enumerate(net.layers):
                    out.append((f"{role}.{net_name}.{i}.w", layer.w))
                    out.append((f"{role}.{net_name}.{i}.b", layer.b))
            for i, head in enumerate(agent.head.heads):
                out.append((f"{role}.log_std.{i}", head.log_std))
        return out

    # -- observation plumbing ---------------------------------------------------

    def observe(self, state: env.WorldState):
        """Raw padded features for every UAV: positions and member states."""
        return (env.position_features(state, self.cfg),
                env.member_state_features(state, self.cfg))

    def _rotations(self) -> np.ndarray:
        v_count = self.cfg.n_uavs
        return np.array([[v] + [w for w in range(v_count) if w != v]
                         for v in range(v_count)])

    def actor_inputs(self, pos: np.ndarray, members: np.ndarray) -> Tensor:
        enc = self.encoder.encode(members)
        return concat([Tensor(pos), enc], axis=1)

    def critic_inputs(self, world_pos: np.ndarray,
                      world_members: np.ndarray) -> Tensor:
        """(B, V, ...) rotated world observations -> (B, V * obs_dim)."""
        b, v_count = world_pos.shape[:2]
        spec = self.encoder.spec
        enc = self.encoder.encode(
            world_members.reshape(b * v_count, spec.max_users, spec.d_u))
        blocks = concat(
            [Tensor(world_pos.reshape(b * v_count, 2)), enc], axis=1)
        return blocks.reshape(b, v_count * self.obs_dim)

    def act(self, state: env.WorldState, rng: np.random.Generator,
            deterministic: bool = False):
        """Sample (or take the mean of) every agent's action for one slot.

        Returns the environment ActionSet plus everything the buffers need:
        per-role raw samples, log-probs, values, and the rotated world
        observations.
        """
        pos, members = self.observe(state)
        rot = self._rotations()
        world_pos = pos[rot]              # (V, V, 2), own UAV first
        world_members = members[rot]      # (V, V, mu, d_u)
        record = {}
        with no_grad():
            actor_in = self.actor_inputs(pos, members)
            critic_in = self.critic_inputs(world_pos, world_members)
            for role, agent in self.agents.items():
                mean = agent.actor(actor_in).data
                raw = mean if deterministic else \
                    agent.head.sample_raw(mean, rng)
                action = agent.head.to_action(raw)
                logp = agent.head.log_prob(Tensor(mean), raw).data
                values = agent.critic(critic_in).data[:, 0]
                record[role] = {
                    "raw": raw, "action": action, "log_prob": logp,
                    "value": values,
                }
        actions = self._assemble(record)
        return actions, record, pos, members, world_pos, world_members

    def _assemble(self, record: dict) -> env.ActionSet:
        cfg = self.cfg
        m = cfg.effective_max_users
        if self.kind == "rmappo":
            return env.ActionSet(
                omega_ul=record["omega_ul"]["action"],
                omega_dl=record["omega_dl"]["action"],
                p_dl=record["p"]["action"],
                alpha=record["alpha"]["action"],
                delta_xy=record["l"]["action"],
            )
        flat = record[GMAPPO_ROLE]["action"]
        return env.ActionSet(
            omega_ul=flat[:, 0:m],
            omega_dl=flat[:, m:2 * m],
            p_dl=flat[:, 2 * m:3 * m],
            alpha=flat[:, 3 * m:4 * m],
            delta_xy=flat[:, 4 * m:4 * m + 2],
        )

    def bootstrap_values(self, state: env.WorldState) -> dict[str, np.ndarray]:
        pos, members = self.observe(state)
        rot = self._rotations()
        with no_grad():
            critic_in = self.critic_inputs(pos[rot], members[rot])
            return {role: agent.critic(critic_in).data[:, 0]
                    for role, agent in self.agents.items()}


class _ActorAdapter:
    def __init__(self, bundle: PolicyBundle, role: str):
        self.bundle = bundle
        self.agent = bundle.agents[role]

    def log_prob_entropy(self, batch):
        x = self.bundle.actor_inputs(batch["obs_pos"], batch["obs_members"])
        mean = self.agent.actor(x)
        return self.agent.head.log_prob(mean, batch["raw_action"]), \
            self.agent.head.entropy()


class _CriticAdapter:
    def __init__(self, bundle: PolicyBundle, role: str):
        self.bundle = bundle
        self.agent = bundle.agents[role]

    def values(self, batch):
        x = self.bundle.critic_inputs(batch["world_pos"],
                                      batch["world_members"])
        return self.agent.critic(x).reshape(-1)


def role_rewards(rew: env.RewardSet, kind: str) -> dict[str, np.ndarray]:
    """Reward stream per agent role; the single-agent baseline folds every
    bonus and penalty into one scalar on top of the shared base term."""
    by_role = rew.by_role()
    if kind == "rmappo":
        return by_role
    shaped = rew.delta.copy()
    for role in ROLES:
        shaped = shaped + (by_role[role] - rew.delta)
    return {GMAPPO_ROLE: shaped}


@dataclass
class TrainLog:
    episodes: list[dict] = field(default_factory=list)
    updates: list[dict] = field(default_factory=list)

    def returns_by_role(self, role: str) -> np.ndarray:
        return np.array([ep[f"return_{role}"] for ep in self.episodes])

    def total_returns(self) -> np.ndarray:
        return np.array([ep["return_total"] for ep in self.episodes])


@dataclass
class TrainRunState:
    global_steps: int = 0
    episode: int = 0
    updates_done: int = 0
    config_hash: str = ""


def _train(cfg: NetworkConfig, seed: int, kind: str,
           progress=None) -> tuple[PolicyBundle, TrainLog]:
    bundle = PolicyBundle(cfg, seed, kind=kind)
    hyper = PpoHyper.from_config(cfg)
    root = np.random.SeedSequence(entropy=seed)
    action_rng = np.random.default_rng(root.spawn(1)[0])
    shuffle_rng = np.random.default_rng(root.spawn(1)[0])
    episode_seed_rng = np.random.default_rng(root.spawn(1)[0])

    buffers = {role: RolloutBuffer() for role in bundle.roles}
    log = TrainLog()
    run = TrainRunState(config_hash=cfg.config_hash())

    for episode in range(cfg.episodes):
        if run.global_steps + cfg.n_slots > cfg.max_env_steps:
            break
        ep_seed = int(episode_seed_rng.integers(0, 2 ** 62))
        state = env.reset(ep_seed, cfg)
        returns = {role: 0.0 for role in bundle.roles}
        utility_sum = 0.0
        for _ in range(cfg.n_slots):
            slot = state.slot
            actions, record, pos, members, wpos, wmembers = \
                bundle.act(state, action_rng)
            state, rew, metrics = env.step(state, actions, cfg)
            rewards = role_rewards(rew, kind)
            for role in bundle.roles:
                for v in range(cfg.n_uavs):
                    buffers[role].add(Transition(
                        obs_pos=pos[v], obs_members=members[v],
                        world_pos=wpos[v], world_members=wmembers[v],
                        uav=v, raw_action=record[role]["raw"][v],
                        log_prob_old=float(record[role]["log_prob"][v]),
                        value_old=float(record[role]["value"][v]),
                        reward=float(rewards[role][v]),
                        done=state.slot >= cfg.n_slots, slot=slot,
                    ))
                returns[role] += float(np.mean(rewards[role]))
            utility_sum += float(np.mean(metrics.utility))
            run.global_steps += 1
        boot = bundle.bootstrap_values(state)
        for role in bundle.roles:
            buffers[role].finish_episode(
                {v: float(boot[role][v]) for v in range(cfg.n_uavs)},
                hyper.gamma, hyper.lam)
        row = {"episode": episode, "seed": ep_seed,
               "mean_utility": utility_sum / cfg.n_slots}
        for role in bundle.roles:
            row[f"return_{role}"] = returns[role]
        row["return_total"] = sum(returns.values())
        log.episodes.append(row)
        run.episode = episode + 1

        last = (episode == cfg.episodes - 1
                or run.global_steps + cfg.n_slots > cfg.max_env_steps)
        if (episode + 1) % cfg.update_every_episodes == 0 or last:
            for role in bundle.roles:
                if len(buffers[role]) == 0:
                    continue
                stats = update(
                    buffers[role], _ActorAdapter(bundle, role),
                    _CriticAdapter(bundle, role), bundle.optimizers[role],
                    hyper, shuffle_rng)
                stats.update({"update": run.updates_done, "agent": role,
                              "episode": episode})
                log.updates.append(stats)
            run.updates_done += 1
        if progress is not None:
            progress(episode, log)
    return bundle, log


def train_rmappo(cfg: NetworkConfig, seed: int,
                 progress=None) -> tuple[PolicyBundle, TrainLog]:
    """Per-resource multi-agent training over the configured episode budget."""
    return _train(cfg, seed, "rmappo", progress)


def train_gmappo(cfg: NetworkConfig, seed: int,
                 progress=None) -> tuple[PolicyBundle, TrainLog]:
    """Single-agent baseline: one policy over the concatenated action space."""
    return _train(cfg, seed, "gmappo", progress)


@dataclass
class EvalReport:
    label: str
    episodes: int
    mean_utility: float
    mean_episode_cost: float
    utility_by_slot: np.ndarray          # (n_slots,) averaged over episodes/UAVs
    slot_rows: list[dict]
    per_mu_rows: list[dict]
    violation_counts: dict[str, int]

    def summary(self) -> dict:
        return {
            "label": self.label, "episodes": self.episodes,
            "mean_utility": self.mean_utility,
            "mean_episode_cost": self.mean_episode_cost,
            "violations": dict(self.violation_counts),
        }


def evaluate(bundle: PolicyBundle | None, cfg: NetworkConfig,
             episodes: int, seed: int, baseline: str | None = None,
             fixed_alpha: float | None = None,
             label: str | None = None) -> EvalReport:
    """Deterministic rollouts (mean actions, no sampling) with optional
    fairness or fixed-offloading overlays."""
    if baseline not in (None, "fairness_all", "fairness_w", "fairness_p"):
        raise ValueError(f"unknown baseline {baseline!r}")
    if baseline != "fairness_all" and bundle is None:
        raise ValueError("this evaluation needs a policy bundle")
    rng = np.random.default_rng(seed)   # unused by mean actions; kept for API
    slot_rows: list[dict] = []
    per_mu_rows: list[dict] = []
    utility_curve = np.zeros(cfg.n_slots)
    violation_counts: dict[str, int] = {}
    total_utility = 0.0
    episode_costs = []

    for ep in range(episodes):
        state = env.reset(seed + ep, cfg)
        ep_cost = 0.0
        for _ in range(cfg.n_slots):
            if baseline == "fairness_all":
                actions = env.fairness_policy("all", state, cfg)
            else:
                actions, *_ = bundle.act(state, rng, deterministic=True)
                if baseline == "fairness_w":
                    actions = env.fairness_policy("w", state, cfg,
                                                  base=actions)
                elif baseline == "fairness_p":
                    actions = env.fairness_policy("p", state, cfg,
                                                  base=actions)
            if fixed_alpha is not None:
                actions.alpha[:, :] = fixed_alpha
            state, _, metrics = env.step(state, actions, cfg)
            mean_u = float(np.mean(metrics.utility))
            utility_curve[metrics.slot] += mean_u
            total_utility += mean_u
            ep_cost += float(np.sum(metrics.utility))
            for row in metrics.uav_rows(extra={"episode": ep}):
                slot_rows.append(row)
                for key, val in row.items():
                    if key.startswith("viol_") and val:
                        violation_counts[key] = \
                            violation_counts.get(key, 0) + 1
            for row in metrics.per_mu:
                row = dict(row)
                row["episode"] = ep
                per_mu_rows.append(row)
        episode_costs.append(ep_cost)

    n = episodes * cfg.n_slots
    return EvalReport(
        label=label or baseline or "learned",
        episodes=episodes,
        mean_utility=total_utility / n,
        mean_episode_cost=float(np.mean(episode_costs)),
        utility_by_slot=utility_curve / episodes,
        slot_rows=slot_rows,
        per_mu_rows=per_mu_rows,
        violation_counts=violation_counts,
    )


def sweep_alpha_fixed(bundle: PolicyBundle, cfg: NetworkConfig,
                      alphas: list[float], seed: int,
                      episodes: int = 1) -> list[EvalReport]:
    """Fixed-offloading baselines next to the learned offloading agent."""
    reports = []
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"fixed offloading ratio {a} outside [0, 1]")
        reports.append(evaluate(bundle, cfg, episodes, seed, fixed_alpha=a,
                                label=f"alpha={a:g}"))
    reports.append(evaluate(bundle, cfg, episodes, seed, label="learned"))
    return reports


# -- checkpointing ---------------------------------------------------------------


def checkpoint_save(bundle: PolicyBundle, path: str) -> None:
    """Versioned binary dump: header with layer names/shapes, then raw
    float64 little-endian buffers.  Bit-stable for identical parameters."""
    named = bundle.named_parameters()
    header = {
        "version": bundle.version,
        "kind": bundle.kind,
        "config_hash": bundle.cfg.config_hash(),
        "layers": [{"name": name, "shape": list(p.data.shape)}
                   for name, p in named],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, p in named:
            fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    os.replace(tmp, path)


class CheckpointError(ValueError):
    """Corrupt checkpoint file or config mismatch on load."""


def checkpoint_load(path: str, cfg: NetworkConfig) -> PolicyBundle:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (blob_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(blob_len).decode())
        if header["config_hash"] != cfg.config_hash():
            raise CheckpointError(
                f"{path}: checkpoint was trained under config hash "
                f"{header['config_hash']}, current config hashes to "
                f"{cfg.config_hash()}"
            )
        bundle = PolicyBundle(cfg, seed=0, kind=header["kind"])
        named = dict(bundle.named_parameters())
        for layer in header["layers"]:
            name, shape = layer["name"], tuple(layer["shape"])
            if name not in named or named[name].data.shape != shape:
                raise CheckpointError(
                    f"{path}: layer {name} with shape {shape} does not "
                    f"match the current architecture"
                )
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise CheckpointError(f"{path}: truncated data for {name}")
            named[name].data = np.frombuffer(buf, dtype="<f8").reshape(
                shape).astype(np.float64)
        bundle.version = header["version"]
    return bundle
