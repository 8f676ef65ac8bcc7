# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_fallback.py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, log, log1p, fabs, tanh, pow

cnp.import_array()

cdef double LOG_2PI = log(2.0 * 3.141592653589793)
cdef double LOG_2 = log(2.0)


def adam_update(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                double lr, double beta1, double beta2, double eps, long t):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double c1 = 1.0 - pow(beta1, <double>t)
    cdef double c2 = 1.0 - pow(beta2, <double>t)
    cdef double gi
    for i in range(n):
        gi = g[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi
        v[i] = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
        p[i] -= lr * (m[i] / c1) / (sqrt(v[i] / c2) + eps)
        g[i] = 0.0


def polyak(double[::1] target, double[::1] main, double rho):
    cdef Py_ssize_t i, n = target.shape[0]
    cdef double w = 1.0 - rho
    for i in range(n):
        target[i] = target[i] * rho + w * main[i]


def tanh_gauss_logp(u_in, mean_in, log_std_in):
    u_arr = np.ascontiguousarray(u_in, dtype=np.float64)
    if u_arr.ndim == 0:
        u_arr = u_arr.reshape(1)
    shape = u_arr.shape
    cdef Py_ssize_t d = shape[len(shape) - 1]
    cdef Py_ssize_t rows = u_arr.size // d if d else 0
    cdef const double[:, ::1] u = u_arr.reshape(rows, d)
    cdef const double[:, ::1] mu = np.ascontiguousarray(
        np.broadcast_to(mean_in, shape), dtype=np.float64).reshape(rows, d)
    cdef const double[:, ::1] ls = np.ascontiguousarray(
        np.broadcast_to(log_std_in, shape), dtype=np.float64).reshape(rows, d)
    logp_arr = np.empty(rows)
    dm_arr = np.empty((rows, d))
    dls_arr = np.empty((rows, d))
    du_arr = np.empty((rows, d))
    cdef double[::1] logp = logp_arr
    cdef double[:, ::1] dm = dm_arr
    cdef double[:, ::1] dls = dls_arr
    cdef double[:, ::1] du = du_arr
    cdef Py_ssize_t r, j
    cdef double std, z, x, sp, corr, acc, uu
    for r in range(rows):
        acc = 0.0
        for j in range(d):
            uu = u[r, j]
            std = exp(ls[r, j])
            z = (uu - mu[r, j]) / std
            x = -2.0 * uu
            sp = (x if x > 0.0 else 0.0) + log1p(exp(-fabs(x)))
            corr = 2.0 * (LOG_2 - uu - sp)
            acc += -0.5 * z * z - ls[r, j] - 0.5 * LOG_2PI - corr
            dm[r, j] = z / std
            dls[r, j] = z * z - 1.0
            du[r, j] = -(z / std) + 2.0 * tanh(uu)
        logp[r] = acc
    out_shape = shape[:len(shape) - 1]
    return (logp_arr.reshape(out_shape), dm_arr.reshape(shape),
            dls_arr.reshape(shape), du_arr.reshape(shape))


def nav_physics(double[::1] pos, double[::1] vel, const double[::1] action,
                const double[:, ::1] hazards, const double[::1] goal,
                double damping, double accel, double vmax, double dt, double half_width):
    cdef double vx = damping * vel[0] + accel * action[0]
    cdef double vy = damping * vel[1] + accel * action[1]
    cdef double speed = sqrt(vx * vx + vy * vy)
    cdef double scale, px, py, dx, dy, gx, gy, cost = 0.0
    cdef Py_ssize_t i
    if speed > vmax:
        scale = vmax / speed
        vx *= scale
        vy *= scale
    px = pos[0] + dt * vx
    py = pos[1] + dt * vy
    px = -half_width if px < -half_width else (half_width if px > half_width else px)
    py = -half_width if py < -half_width else (half_width if py > half_width else py)
    vel[0] = vx
    vel[1] = vy
    pos[0] = px
    pos[1] = py
    for i in range(hazards.shape[0]):
        dx = px - hazards[i, 0]
        dy = py - hazards[i, 1]
        if dx * dx + dy * dy <= hazards[i, 2] * hazards[i, 2]:
            cost = 1.0
            break
    gx = goal[0] - px
    gy = goal[1] - py
    return cost, sqrt(gx * gx + gy * gy)


def nav_observe(const double[::1] pos, const double[::1] vel, const double[::1] goal,
                const double[:, ::1] hazards, int k, out_arr):
    cdef double[::1] out = out_arr
    cdef double px = pos[0], py = pos[1]
    cdef double gx = goal[0] - px, gy = goal[1] - py
    cdef Py_ssize_t n = hazards.shape[0], i, j, best
    cdef double bestd, d2, dx, dy
    cdef char[64] used
    out[0] = vel[0]
    out[1] = vel[1]
    out[2] = gx
    out[3] = gy
    for j in range(2 * k):
        out[4 + j] = 0.0
    if n > 64:
        raise ValueError("at most 64 hazards supported")
    for i in range(n):
        used[i] = 0
    # k smallest squared distances, lowest index first on ties (stable order)
    for j in range(k if k < n else n):
        best = -1
        bestd = 0.0
        for i in range(n):
            if used[i]:
                continue
            dx = hazards[i, 0] - px
            dy = hazards[i, 1] - py
            d2 = dx * dx + dy * dy
            if best < 0 or d2 < bestd:
                best = i
                bestd = d2
        used[best] = 1
        out[4 + 2 * j] = hazards[best, 0] - px
        out[5 + 2 * j] = hazards[best, 1] - py
    out[4 + 2 * k] = sqrt(gx * gx + gy * gy)
    return out_arr
