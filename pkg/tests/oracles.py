"""Independent high-precision re-evaluations of the per-slot formulas.

Everything here is written directly from the closed-form expressions using
mpmath at elevated precision, sharing no code with the package, so the
implementation and the oracle can only agree by computing the same
mathematics.
"""

import mpmath as mp

mp.mp.dps = 30


def dbm_per_hz_to_w(x) -> mp.mpf:
    return mp.mpf(10) ** ((mp.mpf(x) - 30) / 10)


def db_to_linear(x) -> mp.mpf:
    return mp.mpf(10) ** (mp.mpf(x) / 10)


def link_distance(ux, uy, mx, my, altitude) -> mp.mpf:
    return mp.sqrt(mp.mpf(altitude) ** 2 + (mp.mpf(ux) - mx) ** 2
                   + (mp.mpf(uy) - my) ** 2)


def rate(omega, power_w, dist, bandwidth_hz, gain_db, noise_dbm_per_hz,
         absorption) -> mp.mpf:
    omega = mp.mpf(omega)
    if omega == 0 or mp.mpf(power_w) == 0:
        return mp.mpf(0)
    band = omega * mp.mpf(bandwidth_hz)
    loss = mp.mpf(dist) ** 2 * mp.exp(mp.mpf(absorption) * mp.mpf(dist))
    noise = dbm_per_hz_to_w(noise_dbm_per_hz)
    snr = mp.mpf(power_w) * db_to_linear(gain_db) / (band * loss * noise)
    return band * mp.log(1 + snr) / mp.log(2)


def local_delay(beta, d_bits, c) -> mp.mpf:
    return mp.mpf(beta) * mp.mpf(d_bits) / mp.mpf(c)


def local_energy(q, c, beta, d_bits) -> mp.mpf:
    return mp.mpf(q) * mp.mpf(c) ** 2 * mp.mpf(beta) * mp.mpf(d_bits)


def transfer_delay(bits, rate_bps) -> mp.mpf:
    return mp.mpf(bits) / mp.mpf(rate_bps)


def flight_energy(c1, c2, v, t) -> mp.mpf:
    v = mp.mpf(v)
    return mp.mpf(t) * v * (mp.mpf(c1) * v ** 2 + mp.mpf(c2) / v ** 2)


def utility(eta, energy, delays) -> mp.mpf:
    return mp.mpf(eta) * mp.mpf(energy) \
        + (1 - mp.mpf(eta)) * mp.fsum(mp.mpf(d) for d in delays)


def rel_err(value, reference) -> float:
    """Relative error against an mpmath reference, safe at zero."""
    ref = mp.mpf(reference)
    if ref == 0:
        return float(abs(mp.mpf(value)))
    return float(abs((mp.mpf(value) - ref) / ref))


def golden_minimize(fn, lo, hi, iters=200):
    """Golden-section search for the minimizer of a unimodal function."""
    phi = (mp.sqrt(5) - 1) / 2
    a, b = mp.mpf(lo), mp.mpf(hi)
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    for _ in range(iters):
        if fn(c) < fn(d):
            b = d
        else:
            a = c
        c = b - phi * (b - a)
        d = a + phi * (b - a)
    return (a + b) / 2
