"""Pure-Python chain kernels.

Reference twin of the compiled ``_kernels`` module.  Every routine consumes
pre-drawn randomness and performs the same floating-point operations in the
same order, so both backends produce identical chains.
"""

import math

import numpy as np


def _log_target(w, prec, shift):
    sq = 0.0
    lin = 0.0
    for j in range(len(w)):
        sq += w[j] * w[j]
        lin += shift[j] * w[j]
    return -0.5 * prec * sq + lin


def mh_quadratic(w0, prec, shift, scale, z, log_u):
    """Random-walk Metropolis on ``-prec/2 |w|^2 + shift . w``.

    Returns the ``(T, d)`` array of states and the number of accepted moves.
    """
    steps, d = z.shape
    cur = [float(x) for x in w0]
    shift = [float(x) for x in shift]
    zl = z.tolist()
    ul = log_u.tolist()
    out = np.empty((steps, d))
    e_cur = _log_target(cur, prec, shift)
    accepted = 0
    for t in range(steps):
        zt = zl[t]
        prop = [cur[j] + scale * zt[j] for j in range(d)]
        e_prop = _log_target(prop, prec, shift)
        if ul[t] < e_prop - e_cur:
            cur = prop
            e_cur = e_prop
            accepted += 1
        out[t] = cur
    return out, accepted


def mh_finite(s0, log_target, r, log_u):
    """Metropolis on a finite state space with a uniform "any other state" proposal."""
    k = len(log_target)
    lt = log_target.tolist()
    rl = r.tolist()
    ul = log_u.tolist()
    cur = int(s0)
    out = np.empty(len(rl), dtype=np.int64)
    accepted = 0
    for t in range(len(rl)):
        prop = (cur + 1 + rl[t]) % k
        if ul[t] < lt[prop] - lt[cur]:
            cur = prop
            accepted += 1
        out[t] = cur
    return out, accepted


def ula_quadratic_path(w0, prec, shift, gamma, noise, noise_scale, max_norm):
    """Unadjusted Langevin on a quadratic target, recording every state.

    Returns ``(draws, diverged_at)`` where ``diverged_at`` is ``-1`` unless
    ``|w|`` exceeded ``max_norm``.
    """
    steps, d = noise.shape
    c = math.sqrt(2.0 * gamma) * noise_scale
    w = [float(x) for x in w0]
    shift = [float(x) for x in shift]
    nl = noise.tolist()
    out = np.empty((steps, d))
    lim = max_norm * max_norm
    for t in range(steps):
        xt = nl[t]
        sq = 0.0
        for j in range(d):
            w[j] = w[j] - gamma * (prec * w[j] - shift[j]) + c * xt[j]
            sq += w[j] * w[j]
        out[t] = w
        if not sq <= lim:
            return out[: t + 1], t
    return out, -1


def ula_quadratic_batch(w, prec, shift, gamma, noise, noise_scale, max_norm):
    """Advance a batch of independent Langevin chains in place.

    ``w`` and ``shift`` have shape ``(B, d)``; ``noise`` has shape
    ``(T, B, d)``.  Returns the first divergent step or ``-1``.
    """
    c = math.sqrt(2.0 * gamma) * noise_scale
    lim = max_norm * max_norm
    for t in range(noise.shape[0]):
        w[...] = w - gamma * (prec * w - shift) + c * noise[t]
        if not np.all(np.einsum("bd,bd->b", w, w) <= lim):
            return t
    return -1
