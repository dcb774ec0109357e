"""Central finite-difference verification of reverse-mode gradients."""

import numpy as np

from uavmec.autodiff import Tensor


def finite_diff_check(loss_fn, params: list[Tensor], h: float = 1e-5,
                      rtol: float = 1e-4, max_checks_per_param: int = 25,
                      seed: int = 0) -> float:
    """Compare analytic gradients of ``loss_fn()`` against central
    differences on a sampled subset of coordinates; returns the worst
    relative error and asserts it is within ``rtol``.
    """
    rng = np.random.default_rng(seed)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]

    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        n = flat.shape[0]
        if n <= max_checks_per_param:
            picks = np.arange(n)
        else:
            picks = rng.choice(n, size=max_checks_per_param, replace=False)
        for i in picks:
            saved = flat[i]
            flat[i] = saved + h
            f_plus = float(loss_fn().data)
            flat[i] = saved - h
            f_minus = float(loss_fn().data)
            flat[i] = saved
            fd = (f_plus - f_minus) / (2.0 * h)
            a = grad.reshape(-1)[i]
            err = abs(a - fd) / max(abs(a), abs(fd), 1e-6)
            worst = max(worst, err)
            assert err <= rtol, (
                f"gradient mismatch at {p!r}[{i}]: analytic {a}, fd {fd}, "
                f"rel err {err:.3g}"
            )
    return worst
