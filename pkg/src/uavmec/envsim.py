"""Time-slotted world: user placement and association, per-slot physics,
coordinator rewards, fairness baselines, and constraint instrumentation.

One episode runs a fixed number of slots.  Users are placed at reset and do
not move; their tasks are resampled every slot.  UAV moves are clamped to
the speed cap and the region, and commanded crawls below the hover threshold
are treated as hovering (no move, no propulsion energy) since the rotary-wing
energy model diverges at vanishing forward speed.

Allocation actions are never renormalized: the coordinator pays bonuses for
respecting the sum caps and the environment merely reports violations, so
the learning signal matches the shaped rewards exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import netmodel as nm
from .alloc import AllocProblem, AllocSolution, solve_p11
from .config import NetworkConfig

__all__ = [
    "ActionSet", "RewardSet", "WorldState", "SlotMetrics", "reset",
    "associate", "step", "rewards", "fairness_policy", "violation_report",
    "zero_actions", "member_state_features", "MEMBER_FEATURES",
]

MEMBER_FEATURES = 4   # task bits, minimum cycles, x, y


@dataclass
class ActionSet:
    """Per-UAV resource and trajectory decisions for one slot.

    Allocation rows are indexed by member slot: entry ``j`` of UAV ``v``
    addresses the ``j``-th user of ``members[v]``; slots beyond the member
    count are ignored.
    """

    omega_ul: np.ndarray     # (V, max_users) uplink bandwidth fractions
    omega_dl: np.ndarray     # (V, max_users) downlink bandwidth fractions
    p_dl: np.ndarray         # (V, max_users) downlink transmit powers, W
    delta_xy: np.ndarray     # (V, 2) commanded move, meters
    alpha: np.ndarray        # (V, max_users) offloading fractions

    def copy(self) -> "ActionSet":
        return ActionSet(*(getattr(self, f).copy() for f in
                           ("omega_ul", "omega_dl", "p_dl", "delta_xy",
                            "alpha")))


@dataclass
class RewardSet:
    """Coordinator rewards per UAV, one entry per resource agent."""

    r_omega_ul: np.ndarray
    r_omega_dl: np.ndarray
    r_p: np.ndarray
    r_alpha: np.ndarray
    r_l: np.ndarray
    delta: np.ndarray        # shared utility-change base term

    def by_role(self) -> dict[str, np.ndarray]:
        return {
            "omega_ul": self.r_omega_ul, "omega_dl": self.r_omega_dl,
            "p": self.r_p, "alpha": self.r_alpha, "l": self.r_l,
        }


@dataclass
class WorldState:
    slot: int
    uav_xy: np.ndarray                 # (V, 2)
    mu_xy: np.ndarray                  # (U, 2)
    members: tuple[np.ndarray, ...]    # per-UAV user indices
    member_of: np.ndarray              # (U,)
    d_pre: np.ndarray                  # (U,) current task bits
    c_min: np.ndarray                  # (U,) per-task minimum cycle rates
    prev_utility: np.ndarray | None    # (V,) cost at the previous slot
    rng: np.random.Generator
    cached_alloc: AllocSolution | None = None

    @property
    def n_uavs(self) -> int:
        return self.uav_xy.shape[0]

    @property
    def n_mus(self) -> int:
        return self.mu_xy.shape[0]


@dataclass
class SlotMetrics:
    """Everything observable about one executed slot."""

    slot: int
    utility: np.ndarray                # (V,)
    energy: dict[str, np.ndarray]      # per-UAV component sums
    delay: dict[str, np.ndarray]       # per-UAV component sums
    uav_xy: np.ndarray                 # (V, 2) positions after the move
    speed: np.ndarray                  # (V,) realized speeds
    slacks: dict[str, np.ndarray]      # constraint slacks per UAV
    per_mu: list[dict] = field(default_factory=list)

    def uav_rows(self, extra: dict | None = None) -> list[dict]:
        rows = []
        for v in range(self.utility.shape[0]):
            row = {
                "slot": self.slot, "uav": v,
                "utility": float(self.utility[v]),
                "x": float(self.uav_xy[v, 0]),
                "y": float(self.uav_xy[v, 1]),
                "speed": float(self.speed[v]),
            }
            for name, arr in self.energy.items():
                row[f"energy_{name}"] = float(arr[v])
            for name, arr in self.delay.items():
                row[f"delay_{name}"] = float(arr[v])
            for name, arr in self.slacks.items():
                row[f"slack_{name}"] = float(arr[v])
                row[f"viol_{name}"] = int(arr[v] < 0)
            if extra:
                row.update(extra)
            rows.append(row)
        return rows


def associate(mu_xy: np.ndarray, uav_xy: np.ndarray
              ) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
    """Assign every user to its planar-nearest UAV; ties go to the lowest index."""
    if len(mu_xy) == 0 or len(uav_xy) == 0:
        raise ValueError("need at least one user and one UAV")
    diff = mu_xy[:, None, :] - uav_xy[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    member_of = np.argmin(dist, axis=1)
    members = tuple(np.flatnonzero(member_of == v)
                    for v in range(uav_xy.shape[0]))
    return members, member_of


def reset(seed: int, cfg: NetworkConfig) -> WorldState:
    """Fresh episode: uniform user placement, configured UAV spawns,
    nearest-UAV association, and the first batch of tasks."""
    rng = np.random.default_rng(seed)
    mu_xy = rng.uniform(0.0, cfg.region_m, size=(cfg.n_mus, 2))
    uav_xy = np.array(cfg.spawn_points(), dtype=float)
    members, member_of = associate(mu_xy, uav_xy)
    if max(len(m) for m in members) > cfg.effective_max_users:
        raise ValueError(
            "association produced more members than max_users slots"
        )
    d_pre = rng.uniform(cfg.task_bits_min, cfg.task_bits_max, size=cfg.n_mus)
    return WorldState(
        slot=0, uav_xy=uav_xy, mu_xy=mu_xy, members=members,
        member_of=member_of, d_pre=d_pre,
        c_min=np.full(cfg.n_mus, cfg.c_mu_min), prev_utility=None, rng=rng,
    )


def zero_actions(cfg: NetworkConfig) -> ActionSet:
    m = cfg.effective_max_users
    return ActionSet(
        omega_ul=np.zeros((cfg.n_uavs, m)),
        omega_dl=np.zeros((cfg.n_uavs, m)),
        p_dl=np.zeros((cfg.n_uavs, m)),
        delta_xy=np.zeros((cfg.n_uavs, 2)),
        alpha=np.zeros((cfg.n_uavs, m)),
    )


def _clip_boxes(actions: ActionSet, cfg: NetworkConfig) -> ActionSet:
    """Enforce the per-entry box constraints; sum caps stay untouched."""
    step_cap = cfg.v_max_mps * cfg.slot_duration_s
    return ActionSet(
        omega_ul=np.clip(actions.omega_ul, 0.0, 1.0),
        omega_dl=np.clip(actions.omega_dl, 0.0, 1.0),
        p_dl=np.clip(actions.p_dl, 0.0, cfg.p_max_watt),
        delta_xy=np.clip(actions.delta_xy, -step_cap, step_cap),
        alpha=np.clip(actions.alpha, 0.0, 1.0),
    )


def _apply_movement(uav_xy: np.ndarray, delta_xy: np.ndarray,
                    cfg: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    """Clamp commanded moves and return (new positions, realized speeds).

    Per-axis clamp, then a norm clamp to the speed cap, then the region
    boundary; moves slower than the hover threshold are dropped entirely.
    """
    step_cap = cfg.v_max_mps * cfg.slot_duration_s
    delta = np.clip(delta_xy, -step_cap, step_cap)
    norm = np.sqrt((delta ** 2).sum(axis=1, keepdims=True))
    over = norm[:, 0] > step_cap
    if np.any(over):
        delta = delta.copy()
        delta[over] *= step_cap / norm[over]
    new_xy = np.clip(uav_xy + delta, 0.0, cfg.region_m)
    realized = new_xy - uav_xy
    speed = np.sqrt((realized ** 2).sum(axis=1)) / cfg.slot_duration_s
    hovering = speed < cfg.hover_speed_mps
    new_xy[hovering] = uav_xy[hovering]
    speed[hovering] = 0.0
    return new_xy, speed


def _build_alloc_problem(state: WorldState, alpha_by_mu: np.ndarray,
                         d_in: np.ndarray, d_mec: np.ndarray,
                         cfg: NetworkConfig) -> AllocProblem:
    return AllocProblem.from_config(
        cfg, d_in=d_in, d_mec=d_mec, members=state.members,
        c_min=state.c_min,
    )


def _alpha_by_mu(state: WorldState, actions: ActionSet) -> np.ndarray:
    alpha = np.zeros(state.n_mus)
    for v, idx in enumerate(state.members):
        for j, u in enumerate(idx):
            alpha[u] = actions.alpha[v, j]
    return alpha


def step(state: WorldState, actions: ActionSet, cfg: NetworkConfig
         ) -> tuple[WorldState, RewardSet, SlotMetrics]:
    """Execute one slot in place and return the state, rewards, and metrics.

    Dead links (positive traffic at zero rate) contribute the configured
    stand-in delay instead of raising, so reward shaping stays finite.
    """
    acts = _clip_boxes(actions, cfg)
    new_xy, speed = _apply_movement(state.uav_xy, acts.delta_xy, cfg)

    alpha = _alpha_by_mu(state, acts)
    d_in, d_mec = np.empty(state.n_mus), np.empty(state.n_mus)
    for u in range(state.n_mus):
        d_in[u], d_mec[u] = nm.split_task(float(alpha[u]), float(state.d_pre[u]))

    if cfg.p11_resolve_per_slot or state.cached_alloc is None:
        alloc = solve_p11(_build_alloc_problem(state, alpha, d_in, d_mec, cfg))
        if not cfg.p11_resolve_per_slot:
            state.cached_alloc = alloc
    else:
        alloc = state.cached_alloc

    v_count = state.n_uavs
    utility = np.empty(v_count)
    energy = {name: np.zeros(v_count)
              for name in ("total", "fly", "local", "uplink", "downlink", "mec")}
    delay = {name: np.zeros(v_count)
             for name in ("total", "local", "uplink", "downlink", "mec")}
    per_mu: list[dict] = []

    for v in range(v_count):
        flight_j = nm.flight_energy(float(speed[v]), cfg.t_fly_s, cfg)
        slot_energy = nm.UavSlotEnergy(flight_j, [], [], [], [])
        delays = []
        leg_sums = {"local": 0.0, "uplink": 0.0, "mec": 0.0, "downlink": 0.0}
        for j, u in enumerate(state.members[v]):
            dist = nm.link_distance(new_xy[v], state.mu_xy[u], cfg)
            rate_ul = nm.uplink_rate(float(acts.omega_ul[v, j]), dist, cfg)
            rate_dl = nm.downlink_rate(float(acts.omega_dl[v, j]),
                                       float(acts.p_dl[v, j]), dist, cfg)
            t_loc = nm.local_delay(d_in[u], float(alloc.c_in[u]), cfg)
            e_loc = nm.local_energy(d_in[u], float(alloc.c_in[u]), cfg)
            try:
                t_ul = nm.uplink_delay(d_mec[u], rate_ul)
            except nm.InfeasibleLinkError:
                t_ul = cfg.infeasible_delay_s
            e_ul = nm.uplink_energy(t_ul, cfg)
            t_mec = nm.mec_delay(d_mec[u], float(alloc.c_mec[u]), cfg)
            e_mec = nm.mec_energy(d_mec[u], float(alloc.c_mec[u]), cfg)
            d_post = nm.post_size(d_mec[u], cfg)
            try:
                t_dl = nm.downlink_delay(d_post, rate_dl)
            except nm.InfeasibleLinkError:
                t_dl = cfg.infeasible_delay_s
            e_dl = nm.downlink_energy(t_dl, float(acts.p_dl[v, j]))

            slot_energy.local_j.append(e_loc)
            slot_energy.uplink_j.append(e_ul)
            slot_energy.downlink_j.append(e_dl)
            slot_energy.mec_j.append(e_mec)
            leg_sums["local"] += t_loc
            leg_sums["uplink"] += t_ul
            leg_sums["mec"] += t_mec
            leg_sums["downlink"] += t_dl
            total_t = nm.total_delay(t_loc, t_ul, t_mec, t_dl)
            delays.append(total_t)
            per_mu.append({
                "slot": state.slot, "uav": v, "mu": int(u),
                "distance": dist, "rate_ul": rate_ul, "rate_dl": rate_dl,
                "omega_ul": float(acts.omega_ul[v, j]),
                "omega_dl": float(acts.omega_dl[v, j]),
                "p_dl": float(acts.p_dl[v, j]), "alpha": float(alpha[u]),
                "c_in": float(alloc.c_in[u]), "c_mec": float(alloc.c_mec[u]),
                "delay_total": total_t,
                "mu_x": float(state.mu_xy[u, 0]),
                "mu_y": float(state.mu_xy[u, 1]),
            })

        energy["fly"][v] = flight_j
        energy["local"][v] = sum(slot_energy.local_j)
        energy["uplink"][v] = sum(slot_energy.uplink_j)
        energy["downlink"][v] = sum(slot_energy.downlink_j)
        energy["mec"][v] = sum(slot_energy.mec_j)
        energy["total"][v] = nm.total_energy(slot_energy)
        for name, val in leg_sums.items():
            delay[name][v] = val
        delay["total"][v] = sum(delays)
        utility[v] = nm.utility(energy["total"][v], delays, cfg)

    u_prev = state.prev_utility if state.prev_utility is not None else utility
    rew = rewards(state, acts, u_prev, utility, cfg, positions=new_xy)

    slacks = _constraint_slacks(state, actions, acts, new_xy, alloc, cfg)
    metrics = SlotMetrics(
        slot=state.slot, utility=utility, energy=energy, delay=delay,
        uav_xy=new_xy.copy(), speed=speed, slacks=slacks, per_mu=per_mu,
    )

    state.uav_xy = new_xy
    state.prev_utility = utility.copy()
    state.slot += 1
    done = state.slot >= cfg.n_slots
    if not done:
        state.d_pre = state.rng.uniform(
            cfg.task_bits_min, cfg.task_bits_max, size=state.n_mus
        )
    return state, rew, metrics


def rewards(state: WorldState, actions: ActionSet, u_prev: np.ndarray,
            u_now: np.ndarray, cfg: NetworkConfig,
            positions: np.ndarray | None = None) -> RewardSet:
    """Differentiated coordinator rewards from utility change and slacks.

    The base term rewards cost decrease; bandwidth and power agents earn
    their slack bonus only while the corresponding cap holds, and the
    trajectory agent pays the separation penalty whenever its UAV crowds
    another.
    """
    pos = positions if positions is not None else state.uav_xy
    if cfg.reward_sign_paper:
        delta = np.asarray(u_now) - np.asarray(u_prev)
    else:
        delta = -(np.asarray(u_now) - np.asarray(u_prev))

    v_count = state.n_uavs
    f_ul = np.empty(v_count)
    f_dl = np.empty(v_count)
    g = np.empty(v_count)
    h = np.zeros(v_count)
    for v in range(v_count):
        m = len(state.members[v])
        f_ul[v] = 1.0 - float(np.sum(actions.omega_ul[v, :m]))
        f_dl[v] = 1.0 - float(np.sum(actions.omega_dl[v, :m]))
        g[v] = cfg.p_max_watt - float(
            np.sum(actions.omega_dl[v, :m] * cfg.bandwidth_hz
                   * actions.p_dl[v, :m])
        )
        for w in range(v_count):
            if w != v and np.linalg.norm(pos[v] - pos[w]) < cfg.l_min_m:
                h[v] = 1.0
                break

    bonus_ul = np.where(f_ul >= 0.0, cfg.zeta_ul * f_ul, 0.0)
    bonus_dl = np.where(f_dl >= 0.0, cfg.zeta_dl * f_dl, 0.0)
    bonus_p = np.where(g >= 0.0, cfg.nu * g, 0.0)
    return RewardSet(
        r_omega_ul=delta + bonus_ul,
        r_omega_dl=delta + bonus_dl,
        r_p=delta + bonus_p,
        r_alpha=delta.copy(),
        r_l=delta - cfg.xi * h,
        delta=delta,
    )


def _constraint_slacks(state: WorldState, raw: ActionSet, acts: ActionSet,
                       new_xy: np.ndarray, alloc: AllocSolution | None,
                       cfg: NetworkConfig) -> dict[str, np.ndarray]:
    v_count = state.n_uavs
    slacks = {
        name: np.empty(v_count)
        for name in ("ul_bw_sum", "ul_bw_box", "dl_bw_sum", "dl_bw_box",
                     "dl_power_budget", "dl_power_box", "alpha_box",
                     "mec_cpu_budget", "cpu_box", "separation", "speed")
    }
    for v in range(v_count):
        m = len(state.members[v])
        idx = state.members[v]
        o_ul = raw.omega_ul[v, :m]
        o_dl = raw.omega_dl[v, :m]
        p = raw.p_dl[v, :m]
        a = raw.alpha[v, :m]
        slacks["ul_bw_sum"][v] = 1.0 - float(np.sum(o_ul))
        slacks["dl_bw_sum"][v] = 1.0 - float(np.sum(o_dl))
        slacks["dl_power_budget"][v] = cfg.p_max_watt - float(
            np.sum(o_dl * cfg.bandwidth_hz * p))
        box = lambda arr, hi: float(np.min(np.minimum(arr, hi - arr))) \
            if arr.size else 0.0
        slacks["ul_bw_box"][v] = box(o_ul, 1.0)
        slacks["dl_bw_box"][v] = box(o_dl, 1.0)
        slacks["dl_power_box"][v] = box(p, cfg.p_max_watt)
        slacks["alpha_box"][v] = box(a, 1.0)
        if alloc is not None and m > 0:
            slacks["mec_cpu_budget"][v] = cfg.c_uav_max - float(
                np.sum(alloc.c_mec[idx]))
            slacks["cpu_box"][v] = float(np.min(np.stack([
                alloc.c_mec[idx] - state.c_min[idx],
                cfg.c_uav_max - alloc.c_mec[idx],
                alloc.c_in[idx] - state.c_min[idx],
                cfg.c_mu_max - alloc.c_in[idx],
            ])))
        else:
            slacks["mec_cpu_budget"][v] = cfg.c_uav_max
            slacks["cpu_box"][v] = cfg.c_uav_max
        others = [np.linalg.norm(new_xy[v] - new_xy[w])
                  for w in range(v_count) if w != v]
        slacks["separation"][v] = (min(others) - cfg.l_min_m) if others \
            else cfg.region_m
        raw_speed = float(np.linalg.norm(raw.delta_xy[v])) / cfg.slot_duration_s
        slacks["speed"][v] = cfg.v_max_mps - raw_speed
    return slacks


def violation_report(state: WorldState, actions: ActionSet,
                     cfg: NetworkConfig) -> dict[str, np.ndarray]:
    """Constraint slacks per UAV for the proposed actions, without stepping.

    Sum caps, boxes, and the requested speed are judged on the raw actions;
    separation is judged on the positions the clamped move would produce;
    CPU rows reflect the allocation the solver would return.
    """
    acts = _clip_boxes(actions, cfg)
    new_xy, _ = _apply_movement(state.uav_xy, acts.delta_xy, cfg)
    alpha = _alpha_by_mu(state, acts)
    d_in, d_mec = np.empty(state.n_mus), np.empty(state.n_mus)
    for u in range(state.n_mus):
        d_in[u], d_mec[u] = nm.split_task(float(alpha[u]), float(state.d_pre[u]))
    alloc = solve_p11(_build_alloc_problem(state, alpha, d_in, d_mec, cfg))
    return _constraint_slacks(state, actions, acts, new_xy, alloc, cfg)


def fairness_policy(kind: str, state: WorldState, cfg: NetworkConfig,
                    base: ActionSet | None = None) -> ActionSet:
    """Equal-share baselines with centroid-seeking trajectories.

    ``all`` builds every decision; ``w`` and ``p`` overwrite only the
    bandwidth or power rows of ``base`` (the other rows must come from a
    learned policy).
    """
    if kind not in ("all", "w", "p"):
        raise ValueError(f"unknown fairness kind {kind!r}")
    if kind in ("w", "p") and base is None:
        raise ValueError(f"fairness_{kind} overlays learned actions; pass base")
    acts = base.copy() if base is not None else zero_actions(cfg)

    for v, idx in enumerate(state.members):
        m = len(idx)
        if kind in ("all", "w"):
            share = 1.0 / m if m else 0.0
            acts.omega_ul[v, :] = 0.0
            acts.omega_dl[v, :] = 0.0
            acts.omega_ul[v, :m] = share
            acts.omega_dl[v, :m] = share
        if kind in ("all", "p"):
            sum_omega = float(np.sum(acts.omega_dl[v, :m]))
            if m and sum_omega > 0:
                fair_p = cfg.p_max_watt / (cfg.bandwidth_hz * sum_omega)
            else:
                fair_p = 0.0
            acts.p_dl[v, :] = 0.0
            acts.p_dl[v, :m] = min(fair_p, cfg.p_max_watt)
        if kind == "all":
            acts.alpha[v, :] = 0.0
            acts.alpha[v, :m] = 0.5
            if m:
                centroid = state.mu_xy[idx].mean(axis=0)
                offset = centroid - state.uav_xy[v]
                dist = float(np.linalg.norm(offset))
                hop = min(cfg.v_max_mps * cfg.slot_duration_s, dist)
                if dist > 0 and hop / cfg.slot_duration_s >= cfg.hover_speed_mps:
                    acts.delta_xy[v] = offset / dist * hop
                else:
                    acts.delta_xy[v] = 0.0
            else:
                acts.delta_xy[v] = 0.0
    return acts


def member_state_features(state: WorldState, cfg: NetworkConfig
                          ) -> np.ndarray:
    """Padded per-user observation blocks, (V, max_users, MEMBER_FEATURES).

    Features are scaled to unit-order magnitudes: task bits by the largest
    task size, cycle floors by the user CPU cap, coordinates by the region
    edge.  Inactive slots stay all-zero.
    """
    out = np.zeros((state.n_uavs, cfg.effective_max_users, MEMBER_FEATURES))
    for v, idx in enumerate(state.members):
        for j, u in enumerate(idx):
            out[v, j, 0] = state.d_pre[u] / cfg.task_bits_max
            out[v, j, 1] = state.c_min[u] / cfg.c_mu_max
            out[v, j, 2] = state.mu_xy[u, 0] / cfg.region_m
            out[v, j, 3] = state.mu_xy[u, 1] / cfg.region_m
    return out


def position_features(state: WorldState, cfg: NetworkConfig) -> np.ndarray:
    """UAV positions scaled by the region edge, (V, 2)."""
    return state.uav_xy / cfg.region_m
