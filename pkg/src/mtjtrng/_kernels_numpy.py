"""Vectorized numpy implementation of the coupled midpoint step.

Arrays carry a leading batch axis: magnetization ``(B, N, 3)``, capacitor
voltage ``(B,)``. Same scheme and draw order as the numba kernel; the
fixed-point loop runs until every trial in the batch has converged.
"""

import numpy as np

from .magnetics import FIXED_POINT_MAXITER, FIXED_POINT_TOL, GAMMA0

MS, ALPHA, NX, NY, NZ, AJ, SIGMA, G_ON, G_OFF = range(9)
OK, NOT_CONVERGED = 0, 1


def rhs(m, h, aj, alpha):
    mx, my, mz = m[..., 0], m[..., 1], m[..., 2]
    hx, hy, hz = h[..., 0], h[..., 1], h[..., 2]
    prec = np.empty_like(m)
    prec[..., 0] = -GAMMA0 * ((my * hz - mz * hy) + aj * (-my * my - mz * mz))
    prec[..., 1] = -GAMMA0 * ((mz * hx - mx * hz) + aj * (mx * my))
    prec[..., 2] = -GAMMA0 * ((mx * hy - my * hx) + aj * (mx * mz))
    a = alpha[..., None]
    return (prec + a * np.cross(m, prec)) / (1.0 + a * a)


def currents(m, dev, v, r_series, shared):
    """Per-device currents ``(B, N)`` and total ``(B,)``."""
    c = m[..., 0] / np.linalg.norm(m, axis=-1)
    g = 0.5 * ((1.0 + c) * dev[:, G_ON] + (1.0 - c) * dev[:, G_OFF])
    v = np.asarray(v, dtype=float)
    if shared:
        r_par = 1.0 / g.sum(axis=-1)
        i_tot = v / (r_series + r_par)
        cur = (i_tot * r_par)[..., None] * g
        return cur, i_tot
    cur = v[..., None] / (r_series + 1.0 / g)
    return cur, cur.sum(axis=-1)


@np.errstate(over="ignore", invalid="ignore")
def coupled_step(m0, v0, dev, hth, hext, dt, r_series, shared, cap, coupled=True):
    """One implicit midpoint step; returns (m1, v1, status)."""
    hext = np.asarray(hext, dtype=float)
    demag = dev[:, NX:NZ + 1]
    ms = dev[:, MS, None]
    alpha = dev[:, ALPHA]

    def field(m):
        return -ms * demag * m + hext + hth

    if coupled:
        cur, i_tot = currents(m0, dev, v0, r_series, shared)
        v1 = v0 - dt * i_tot / cap
    else:
        cur = np.zeros(m0.shape[:-1])
        v1 = v0
    m1 = m0 + dt * rhs(m0, field(m0), dev[:, AJ] * cur, alpha)

    v_scale = np.where(np.asarray(v0) != 0.0, np.abs(v0), 1.0)
    for _ in range(FIXED_POINT_MAXITER):
        mm = 0.5 * (m0 + m1)
        if coupled:
            cur, i_tot = currents(mm, dev, 0.5 * (v0 + v1), r_series, shared)
            v_new = v0 - dt * i_tot / cap
            err = np.max(np.abs(v_new - v1) / v_scale)
            v1 = v_new
        else:
            err = 0.0
        m_new = m0 + dt * rhs(mm, field(mm), dev[:, AJ] * cur, alpha)
        err = max(err, np.max(np.abs(m_new - m1)))
        m1 = m_new
        if err < FIXED_POINT_TOL:
            status = OK
            break
        if not np.isfinite(err):
            status = NOT_CONVERGED
            break
    else:
        status = NOT_CONVERGED
    return m1 / np.linalg.norm(m1, axis=-1, keepdims=True), v1, status


def simulate_batch(gens, m, dev, v_init, cap, r_series, shared, field_at,
                   n_burn, n_steps, dt, trace_every=0):
    """Integrate a batch of trials; one generator per trial.

    ``field_at(t)`` returns the applied field vector. Returns
    (m_final, v_final, status, trace) where ``trace`` is ``(B, rows, 2+2N)`` or None.
    """
    b, n, _ = m.shape
    noise = np.empty((b, n, 3))

    def draw():
        for k, g in enumerate(gens):
            noise[k] = g.standard_normal((n, 3))
        return noise * dev[:, SIGMA, None]

    t = -n_burn * dt
    v = np.zeros(b)
    for _ in range(n_burn):
        m, _, status = coupled_step(m, v, dev, draw(), field_at(t + 0.5 * dt), dt,
                                    r_series, shared, cap, coupled=False)
        if status != OK:
            return m, v, status, None
        t += dt

    v = np.full(b, float(v_init))
    rows = []

    def record(t):
        cur, _ = currents(m, dev, v, r_series, shared)
        rows.append(np.concatenate([np.full((b, 1), t), v[:, None], cur, m[..., 0]], axis=1))

    if trace_every:
        record(0.0)
    for k in range(n_steps):
        t = k * dt
        m, v, status = coupled_step(m, v, dev, draw(), field_at(t + 0.5 * dt), dt,
                                    r_series, shared, cap)
        if status != OK:
            return m, v, status, None
        if trace_every and (k + 1) % trace_every == 0:
            record((k + 1) * dt)
    trace = np.stack(rows, axis=1) if trace_every else None
    return m, v, OK, trace
