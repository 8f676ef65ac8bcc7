"""Pure-numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
``opaclab.kernels`` picks one of the two at import time.
"""
from __future__ import annotations

import math

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)
LOG_2 = math.log(2.0)


def adam_update(p, g, m, v, lr, beta1, beta2, eps, t):
    """Bias-corrected Adam step on flat float64 arrays, in place.

    ``t`` is the step count *after* incrementing. Gradients are zeroed.
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    g[...] = 0.0


def polyak(target, main, rho):
    target *= rho
    target += (1.0 - rho) * main


def tanh_gauss_logp(u, mean, log_std):
    """Squashed-Gaussian log density and its partial derivatives.

    Returns ``(logp, d_mean, d_log_std, d_u)`` where the partials treat
    ``u``, ``mean`` and ``log_std`` as independent. ``logp`` has one entry per
    row.
    """
    std = np.exp(log_std)
    z = (u - mean) / std
    x = -2.0 * u
    softplus = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    corr = 2.0 * (LOG_2 - u - softplus)
    per_dim = -0.5 * z * z - log_std - 0.5 * LOG_2PI - corr
    logp = per_dim.sum(axis=-1)
    d_mean = z / std
    d_log_std = z * z - 1.0
    d_u = -d_mean + 2.0 * np.tanh(u)
    return logp, d_mean, d_log_std, d_u


def nav_physics(pos, vel, action, hazards, goal, damping, accel, vmax, dt, half_width):
    """Advance the point mass one step in place. Returns ``(cost, goal_dist)``."""
    vx = damping * vel[0] + accel * action[0]
    vy = damping * vel[1] + accel * action[1]
    speed = math.sqrt(vx * vx + vy * vy)
    if speed > vmax:
        scale = vmax / speed
        vx *= scale
        vy *= scale
    px = min(max(pos[0] + dt * vx, -half_width), half_width)
    py = min(max(pos[1] + dt * vy, -half_width), half_width)
    vel[0] = vx
    vel[1] = vy
    pos[0] = px
    pos[1] = py
    cost = 0.0
    for i in range(hazards.shape[0]):
        dx = px - hazards[i, 0]
        dy = py - hazards[i, 1]
        if dx * dx + dy * dy <= hazards[i, 2] * hazards[i, 2]:
            cost = 1.0
            break
    gx = goal[0] - px
    gy = goal[1] - py
    return cost, math.sqrt(gx * gx + gy * gy)


def nav_observe(pos, vel, goal, hazards, k, out):
    """Fill ``out`` (length 5 + 2k) with the relative observation."""
    px, py = pos[0], pos[1]
    out[0] = vel[0]
    out[1] = vel[1]
    gx = goal[0] - px
    gy = goal[1] - py
    out[2] = gx
    out[3] = gy
    out[4 : 4 + 2 * k] = 0.0
    n = hazards.shape[0]
    if n:
        dx = hazards[:, 0] - px
        dy = hazards[:, 1] - py
        order = np.argsort(dx * dx + dy * dy, kind="stable")[:k]
        for j, i in enumerate(order):
            out[4 + 2 * j] = dx[i]
            out[5 + 2 * j] = dy[i]
    out[4 + 2 * k] = math.sqrt(gx * gx + gy * gy)
    return out
