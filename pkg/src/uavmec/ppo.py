"""Clipped-surrogate policy optimization: probability ratios, truncated
generalized advantage estimation, the combined actor/critic/entropy loss,
and shuffled minibatch updates over collected rollouts.

The buffer stores raw (pre-squash) action samples together with the
log-probabilities recorded at collection time; those stored values play the
role of the frozen behavior policy, so "syncing" the old policy after an
update is simply clearing the buffer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .autodiff import Tensor, clip, minimum
from .config import NetworkConfig

__all__ = [
    "PpoHyper", "Transition", "RolloutBuffer", "compute_gae",
    "clipped_surrogate", "ppo_loss", "update",
]


@dataclass
class PpoHyper:
    clip_eps: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    c1: float = 0.5                 # value-loss coefficient
    c2: float = 0.01                # entropy-bonus coefficient
    epochs: int = 10
    minibatch_size: int = 256
    max_env_steps: int = 200000
    normalize_advantages: bool = True
    kl_stop: float = 0.0            # 0 disables early stopping

    def __post_init__(self):
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError("clip_eps must lie in (0, 1)")
        for name in ("gamma", "lam"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")

    @classmethod
    def from_config(cls, cfg: NetworkConfig) -> "PpoHyper":
        return cls(
            clip_eps=cfg.clip_eps, gamma=cfg.gamma, lam=cfg.gae_lambda,
            c1=cfg.value_coef, c2=cfg.entropy_coef, epochs=cfg.ppo_epochs,
            minibatch_size=cfg.minibatch_size,
            max_env_steps=cfg.max_env_steps,
            normalize_advantages=cfg.normalize_advantages,
            kl_stop=cfg.kl_stop,
        )


@dataclass
class Transition:
    """One stored interaction of a single agent stream."""

    obs_pos: np.ndarray          # acting UAV position features, (2,)
    obs_members: np.ndarray      # padded member states, (max_users, d_u)
    world_pos: np.ndarray        # all-UAV position features, (V, 2)
    world_members: np.ndarray    # all-UAV member states, (V, max_users, d_u)
    uav: int
    raw_action: np.ndarray       # pre-squash sample, (act_dim,)
    log_prob_old: float
    value_old: float
    reward: float
    done: bool
    slot: int


class RolloutBuffer:
    """Column store of transitions plus per-episode advantage results."""

    def __init__(self):
        self._cols: dict[str, list] = {}
        self._episode_start = 0
        self.advantages: list[float] = []
        self.returns: list[float] = []

    def __len__(self) -> int:
        return len(self._cols.get("reward", ()))

    def add(self, tr: Transition) -> None:
        for name in ("obs_pos", "obs_members", "world_pos", "world_members",
                     "uav", "raw_action", "log_prob_old", "value_old",
                     "reward", "done", "slot"):
            self._cols.setdefault(name, []).append(getattr(tr, name))

    def finish_episode(self, bootstrap_values: dict[int, float],
                       gamma: float, lam: float) -> None:
        """Run GAE over each UAV stream of the episode just collected.

        ``bootstrap_values`` maps UAV index to the critic's estimate for the
        state one step past the horizon, which truncates the advantage sums
        without assuming the post-horizon value is zero.
        """
        lo, hi = self._episode_start, len(self)
        uavs = np.asarray(self._cols["uav"][lo:hi])
        rewards = np.asarray(self._cols["reward"][lo:hi])
        values = np.asarray(self._cols["value_old"][lo:hi])
        adv = np.empty(hi - lo)
        ret = np.empty(hi - lo)
        for v in sorted(set(uavs.tolist())):
            mask = np.flatnonzero(uavs == v)
            vals = np.append(values[mask], bootstrap_values[v])
            a, r = compute_gae(rewards[mask], vals, gamma, lam)
            adv[mask] = a
            ret[mask] = r
        self.advantages.extend(adv.tolist())
        self.returns.extend(ret.tolist())
        self._episode_start = len(self)

    def stacked(self) -> dict[str, np.ndarray]:
        if len(self) == 0:
            raise ValueError("empty rollout buffer")
        if len(self.advantages) != len(self):
            raise ValueError("finish_episode was not called on the last episode")
        out = {name: np.asarray(col) for name, col in self._cols.items()}
        out["advantage"] = np.asarray(self.advantages)
        out["return"] = np.asarray(self.returns)
        return out

    def clear(self) -> None:
        self._cols.clear()
        self.advantages.clear()
        self.returns.clear()
        self._episode_start = 0


def compute_gae(rewards: np.ndarray, values: np.ndarray, gamma: float,
                lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Truncated advantage estimates and value targets for one trajectory.

    ``values`` must hold one bootstrap entry beyond ``rewards``.  The
    backward recursion is algebraically identical to the direct
    exponentially-weighted sum of TD residuals truncated at the horizon.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape[0] != rewards.shape[0] + 1:
        raise ValueError(
            f"need {rewards.shape[0] + 1} values for {rewards.shape[0]} "
            f"rewards, got {values.shape[0]}"
        )
    deltas = rewards + gamma * values[1:] - values[:-1]
    advantages = np.empty_like(deltas)
    acc = 0.0
    for t in range(deltas.shape[0] - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        advantages[t] = acc
    return advantages, advantages + values[:-1]


def clipped_surrogate(ratio, advantage, eps: float) -> float:
    """Pessimistic clipped policy objective, averaged over the batch."""
    ratio = np.asarray(ratio, dtype=float)
    if np.any(ratio <= 0):
        raise ValueError("probability ratios must be positive")
    advantage = np.asarray(advantage, dtype=float)
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    return float(np.mean(np.minimum(ratio * advantage, clipped * advantage)))


class PolicyLike(Protocol):
    def log_prob_entropy(self, batch: dict) -> tuple[Tensor, Tensor]:
        """New-policy log-probs (B,) of stored raw actions, and entropy."""


class ValueLike(Protocol):
    def values(self, batch: dict) -> Tensor:
        """State-value predictions (B,) for the stored observations."""


def ppo_loss(batch: dict, policy: PolicyLike, value_net: ValueLike,
             hyper: PpoHyper) -> tuple[Tensor, dict[str, float]]:
    """Combined loss: negative clipped surrogate plus weighted value error
    minus the entropy bonus; also returns scalar diagnostics."""
    n = batch["reward"].shape[0]
    if n == 0:
        raise ValueError("empty batch")
    adv = batch["advantage"]
    if hyper.normalize_advantages:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    logp_new, entropy = policy.log_prob_entropy(batch)
    ratio = (logp_new - batch["log_prob_old"]).exp()
    surrogate = minimum(
        ratio * adv,
        clip(ratio, 1.0 - hyper.clip_eps, 1.0 + hyper.clip_eps) * adv,
    ).mean()
    values = value_net.values(batch)
    value_err = ((values - batch["return"]) ** 2).mean()
    loss = -surrogate + hyper.c1 * value_err - hyper.c2 * entropy

    r = ratio.data
    diagnostics = {
        "surrogate": float(surrogate.data),
        "value_loss": float(value_err.data),
        "entropy": float(entropy.data),
        "clip_fraction": float(np.mean(np.abs(r - 1.0) > hyper.clip_eps)),
        "approx_kl": float(np.mean((r - 1.0) - np.log(r))),
    }
    return loss, diagnostics


def update(buffer: RolloutBuffer, policy: PolicyLike, value_net: ValueLike,
           optimizer, hyper: PpoHyper, rng: np.random.Generator
           ) -> dict[str, float]:
    """Shuffled minibatch epochs over the buffer, then clear it.

    Clearing the buffer is what freezes the updated policy as the next
    round's behavior policy: stored log-probs always describe the policy
    that generated them.
    """
    data = buffer.stacked()
    n = data["reward"].shape[0]
    stats: dict[str, float] = {}
    count = 0
    stopped_early = False
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, hyper.minibatch_size):
            idx = order[lo:lo + hyper.minibatch_size]
            batch = {name: col[idx] for name, col in data.items()}
            loss, diag = ppo_loss(batch, policy, value_net, hyper)
            if hyper.kl_stop > 0 and diag["approx_kl"] > hyper.kl_stop:
                stopped_early = True
                break
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            diag["loss"] = float(loss.data)
            for key, val in diag.items():
                stats[key] = stats.get(key, 0.0) + val
            count += 1
        if stopped_early:
            break
    buffer.clear()
    out = {key: val / max(count, 1) for key, val in stats.items()}
    out["minibatches"] = float(count)
    out["stopped_early"] = float(stopped_early)
    return out
