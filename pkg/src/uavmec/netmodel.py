"""Pure evaluation of the per-slot link, computation, and flight formulas.

Every function here is stateless and operates on plain floats (or numpy
arrays where noted), so the environment, the CPU-allocation solver, and the
test oracles all share one source of truth for the physics.

Conventions:

* Rates treat a zero bandwidth share or zero transmit power as a zero rate
  (the limit of the Shannon expression), never as NaN.
* Moving positive traffic over a zero-rate link raises
  :class:`InfeasibleLinkError`; callers that must stay total (the
  environment) convert it into a bounded delay penalty.
* The per-UAV utility is a cost: smaller is better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import NetworkConfig

__all__ = [
    "InfeasibleLinkError", "link_distance", "split_task", "local_delay",
    "local_energy", "uplink_rate", "downlink_rate", "uplink_delay",
    "uplink_energy", "mec_delay", "mec_energy", "post_size",
    "downlink_delay", "downlink_energy", "flight_energy", "UavSlotEnergy",
    "total_energy", "total_delay", "utility",
]


class InfeasibleLinkError(ValueError):
    """Positive traffic requested over a link with zero achievable rate."""


def link_distance(uav_xy: tuple[float, float], mu_xy: tuple[float, float],
                  cfg: NetworkConfig) -> float:
    """Slant range between a UAV at the configured altitude and a ground user."""
    dx = uav_xy[0] - mu_xy[0]
    dy = uav_xy[1] - mu_xy[1]
    if not (math.isfinite(dx) and math.isfinite(dy)):
        raise ValueError("positions must be finite")
    return math.sqrt(cfg.altitude_m ** 2 + dx * dx + dy * dy)


def split_task(alpha: float, d_pre: float) -> tuple[float, float]:
    """Split task bits into a local part and an offloaded part.

    Returns ``(d_in, d_mec)`` with ``d_in + d_mec == d_pre`` exactly: the
    offloaded share is rounded once and the local share is the remainder.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"offloading fraction must lie in [0, 1], got {alpha}")
    d_mec = alpha * d_pre
    return d_pre - d_mec, d_mec


def local_delay(d_in: float, c_in: float, cfg: NetworkConfig) -> float:
    """Seconds to grind ``d_in`` bits through the user's CPU at ``c_in`` cycles/s."""
    if d_in == 0.0:
        return 0.0
    if c_in <= 0.0:
        raise ValueError("cycle rate must be positive for a nonzero workload")
    return cfg.beta_mu * d_in / c_in


def local_energy(d_in: float, c_in: float, cfg: NetworkConfig) -> float:
    """Joules burned computing ``d_in`` bits locally; quadratic in the cycle rate."""
    if d_in == 0.0:
        return 0.0
    if c_in <= 0.0:
        raise ValueError("cycle rate must be positive for a nonzero workload")
    return cfg.q_mu * c_in ** 2 * cfg.beta_mu * d_in


def _shannon_rate(omega: float, power_w: float, dist_m: float,
                  cfg: NetworkConfig) -> float:
    if omega < 0.0 or omega > 1.0:
        raise ValueError(f"bandwidth fraction must lie in [0, 1], got {omega}")
    if power_w < 0.0:
        raise ValueError("transmit power must be non-negative")
    if dist_m < cfg.altitude_m:
        raise ValueError("distance cannot be below the flight altitude")
    if omega == 0.0 or power_w == 0.0:
        return 0.0
    band = omega * cfg.bandwidth_hz
    loss = dist_m ** 2 * math.exp(cfg.absorption_a * dist_m)
    den = band * loss * cfg.noise_psd_w_per_hz
    if den == 0.0:   # bandwidth share so small the noise term underflows
        return 0.0
    num = power_w * cfg.gain_ref_linear
    snr = num / den
    if math.isinf(snr):   # log-domain asymptote: log2(1 + snr) ~ log2(snr)
        return band * (math.log2(num) - math.log2(den))
    return band * math.log2(1.0 + snr)


def uplink_rate(omega_ul: float, dist_m: float, cfg: NetworkConfig) -> float:
    """Achievable user-to-UAV rate over the allocated sub-THz band, bits/s."""
    return _shannon_rate(omega_ul, cfg.p_ul_watt, dist_m, cfg)


def downlink_rate(omega_dl: float, p_dl_watt: float, dist_m: float,
                  cfg: NetworkConfig) -> float:
    """Achievable UAV-to-user rate at downlink power ``p_dl_watt``, bits/s."""
    return _shannon_rate(omega_dl, p_dl_watt, dist_m, cfg)


def _transfer_delay(bits: float, rate_bps: float, label: str) -> float:
    if bits == 0.0:
        return 0.0
    if rate_bps <= 0.0:
        raise InfeasibleLinkError(f"{label}: {bits} bits over a zero-rate link")
    return bits / rate_bps


def uplink_delay(d_mec: float, rate_bps: float) -> float:
    """Seconds to push the offloaded bits up to the UAV."""
    return _transfer_delay(d_mec, rate_bps, "uplink")


def uplink_energy(delay_s: float, cfg: NetworkConfig) -> float:
    """Joules the user radio spends transmitting for ``delay_s`` seconds."""
    return delay_s * cfg.p_ul_watt


def mec_delay(d_mec: float, c_mec: float, cfg: NetworkConfig) -> float:
    """Seconds the UAV server computes on the offloaded bits."""
    if d_mec == 0.0:
        return 0.0
    if c_mec <= 0.0:
        raise ValueError("cycle rate must be positive for a nonzero workload")
    return cfg.beta_uav * d_mec / c_mec


def mec_energy(d_mec: float, c_mec: float, cfg: NetworkConfig) -> float:
    """Joules the UAV server burns on the offloaded bits."""
    if d_mec == 0.0:
        return 0.0
    if c_mec <= 0.0:
        raise ValueError("cycle rate must be positive for a nonzero workload")
    return cfg.q_uav * c_mec ** 2 * cfg.beta_uav * d_mec


def post_size(d_mec: float, cfg: NetworkConfig) -> float:
    """Bits of processed result shipped back to the user."""
    return cfg.delta_prog * d_mec


def downlink_delay(d_post: float, rate_bps: float) -> float:
    """Seconds to return the processed result."""
    return _transfer_delay(d_post, rate_bps, "downlink")


def downlink_energy(delay_s: float, p_dl_watt: float) -> float:
    """Joules the UAV radio spends returning the result."""
    return delay_s * p_dl_watt


def flight_energy(speed_mps: float, t_fly_s: float, cfg: NetworkConfig) -> float:
    """Propulsion energy of a rotary-wing UAV cruising at ``speed_mps``.

    Hovering (speed exactly zero) is excluded by convention and costs
    nothing; the induced-power term diverges as speed approaches zero from
    above, which is the physical cost of very slow forward flight.
    """
    if speed_mps < 0.0:
        raise ValueError("speed must be non-negative")
    if speed_mps == 0.0:
        return 0.0
    squared = speed_mps * speed_mps
    if squared == 0.0:   # subnormal speed: the induced term exceeds float range
        return math.inf
    return t_fly_s * speed_mps * (cfg.c1 * squared + cfg.c2 / squared)


@dataclass
class UavSlotEnergy:
    """Per-slot energy components for one UAV and its member users."""
    flight_j: float
    local_j: list[float]
    uplink_j: list[float]
    downlink_j: list[float]
    mec_j: list[float]


def total_energy(slot: UavSlotEnergy) -> float:
    """Slot energy of one UAV: flight plus every member's computation/radio terms."""
    return slot.flight_j + sum(slot.local_j) + sum(slot.uplink_j) \
        + sum(slot.downlink_j) + sum(slot.mec_j)


def total_delay(local_s: float, uplink_s: float, mec_s: float,
                downlink_s: float) -> float:
    """Slot delay of one user: local, uplink, remote compute, and downlink legs."""
    return local_s + uplink_s + mec_s + downlink_s


def utility(energy_j: float, delays_s, cfg: NetworkConfig) -> float:
    """Per-UAV cost: weighted slot energy plus summed member delays.

    Smaller is better; the environment converts changes of this cost into
    rewards.
    """
    return cfg.eta * energy_j + (1.0 - cfg.eta) * math.fsum(delays_s)
