"""Per-trial Enable-step kernel compiled with numba.

One call integrates the Reset burn-in and the coupled capacitor/LLG Enable
step of a single trial, drawing thermal noise from the numpy ``Generator``
it is handed. The draw order (step, device, axis) matches the numpy backend.
"""

import math

import numba as nb
import numpy as np

from .magnetics import FIXED_POINT_MAXITER, FIXED_POINT_TOL, GAMMA0

# device table columns
MS, ALPHA, NX, NY, NZ, AJ, SIGMA, G_ON, G_OFF = range(9)

OK, NOT_CONVERGED = 0, 1


@nb.njit(cache=True, nogil=True, inline="always")
def _rhs(mx, my, mz, hx, hy, hz, aj, alpha):
    # prec = -g0 (m x h + aj m x (m x x))
    px = -GAMMA0 * ((my * hz - mz * hy) + aj * (-my * my - mz * mz))
    py = -GAMMA0 * ((mz * hx - mx * hz) + aj * (mx * my))
    pz = -GAMMA0 * ((mx * hy - my * hx) + aj * (mx * mz))
    k = 1.0 / (1.0 + alpha * alpha)
    fx = (px + alpha * (my * pz - mz * py)) * k
    fy = (py + alpha * (mz * px - mx * pz)) * k
    fz = (pz + alpha * (mx * py - my * px)) * k
    return fx, fy, fz


@nb.njit(cache=True, nogil=True)
def _field_at(field_kind, field_amp, freq, t):
    if field_kind == 2:
        s = math.sin(2.0 * math.pi * freq * t)
        return field_amp[0] * s, field_amp[1] * s, field_amp[2] * s
    return field_amp[0], field_amp[1], field_amp[2]


@nb.njit(cache=True, nogil=True)
def _currents(mm, dev, vm, r_series, shared, cur):
    """Device currents at state ``mm`` and capacitor voltage ``vm``; returns the total.

    ``shared``: one series resistor feeds the parallel MTJ bank. Otherwise each
    MTJ module carries its own series resistor straight across the capacitor.
    """
    n = mm.shape[0]
    g_par = 0.0
    for i in range(n):
        nrm = math.sqrt(mm[i, 0] ** 2 + mm[i, 1] ** 2 + mm[i, 2] ** 2)
        c = mm[i, 0] / nrm
        g = 0.5 * ((1.0 + c) * dev[i, G_ON] + (1.0 - c) * dev[i, G_OFF])
        cur[i] = g
        g_par += g
    if shared:
        r_par = 1.0 / g_par
        i_tot = vm / (r_series + r_par)
        v_node = i_tot * r_par
        for i in range(n):
            cur[i] = v_node * cur[i]
        return i_tot
    i_tot = 0.0
    for i in range(n):
        cur[i] = vm / (r_series + 1.0 / cur[i])
        i_tot += cur[i]
    return i_tot


@nb.njit(cache=True, nogil=True)
def coupled_step(m0, m1, mm, v0, dev, hth, hext, dt, r_series, shared, cap, coupled, cur):
    """Implicit midpoint step of devices (and capacitor if ``coupled``).

    ``m1`` receives the renormalized result. Returns (v1, status).
    """
    n = m0.shape[0]
    # explicit Euler predictor
    if coupled:
        i_tot = _currents(m0, dev, v0, r_series, shared, cur)
        v1 = v0 - dt * i_tot / cap
    else:
        for i in range(n):
            cur[i] = 0.0
        v1 = v0
    for i in range(n):
        fx, fy, fz = _rhs(
            m0[i, 0], m0[i, 1], m0[i, 2],
            -dev[i, MS] * dev[i, NX] * m0[i, 0] + hext[0] + hth[i, 0],
            -dev[i, MS] * dev[i, NY] * m0[i, 1] + hext[1] + hth[i, 1],
            -dev[i, MS] * dev[i, NZ] * m0[i, 2] + hext[2] + hth[i, 2],
            dev[i, AJ] * cur[i], dev[i, ALPHA],
        )
        m1[i, 0] = m0[i, 0] + dt * fx
        m1[i, 1] = m0[i, 1] + dt * fy
        m1[i, 2] = m0[i, 2] + dt * fz

    status = NOT_CONVERGED
    for _ in range(FIXED_POINT_MAXITER):
        for i in range(n):
            for k in range(3):
                mm[i, k] = 0.5 * (m0[i, k] + m1[i, k])
        if coupled:
            vm = 0.5 * (v0 + v1)
            i_tot = _currents(mm, dev, vm, r_series, shared, cur)
            v_new = v0 - dt * i_tot / cap
            err = abs(v_new - v1) / (abs(v0) + 1e-300) if v0 != 0.0 else 0.0
            v1 = v_new
        else:
            err = 0.0
        for i in range(n):
            mx, my, mz = mm[i, 0], mm[i, 1], mm[i, 2]
            fx, fy, fz = _rhs(
                mx, my, mz,
                -dev[i, MS] * dev[i, NX] * mx + hext[0] + hth[i, 0],
                -dev[i, MS] * dev[i, NY] * my + hext[1] + hth[i, 1],
                -dev[i, MS] * dev[i, NZ] * mz + hext[2] + hth[i, 2],
                dev[i, AJ] * cur[i], dev[i, ALPHA],
            )
            nx_ = m0[i, 0] + dt * fx
            ny_ = m0[i, 1] + dt * fy
            nz_ = m0[i, 2] + dt * fz
            err = max(err, abs(nx_ - m1[i, 0]), abs(ny_ - m1[i, 1]), abs(nz_ - m1[i, 2]))
            m1[i, 0] = nx_
            m1[i, 1] = ny_
            m1[i, 2] = nz_
        if err < FIXED_POINT_TOL:
            status = OK
            break
    for i in range(n):
        nrm = math.sqrt(m1[i, 0] ** 2 + m1[i, 1] ** 2 + m1[i, 2] ** 2)
        m1[i, 0] /= nrm
        m1[i, 1] /= nrm
        m1[i, 2] /= nrm
    return v1, status


@nb.njit(cache=True, nogil=True)
def _record(trace, row, t, v, m, dev, r_series, shared):
    n = m.shape[0]
    cur = np.empty(n)
    _currents(m, dev, v, r_series, shared, cur)
    trace[row, 0] = t
    trace[row, 1] = v
    for i in range(n):
        trace[row, 2 + i] = cur[i]
        trace[row, 2 + n + i] = m[i, 0]


@nb.njit(cache=True, nogil=True)
def simulate_trial(gen, m, dev, v_init, cap, r_series, shared, field_kind, field_amp, freq,
                   n_burn, n_steps, dt, trace_every, trace):
    """Burn-in at zero current, then the coupled Enable step.

    ``m`` holds the initial magnetization and is overwritten with the final
    state. Returns (final capacitor voltage, status).
    """
    n = m.shape[0]
    m1 = np.empty_like(m)
    mm = np.empty_like(m)
    hth = np.empty((n, 3))
    hext = np.empty(3)
    cur = np.empty(n)

    t = -n_burn * dt
    for _ in range(n_burn):
        for i in range(n):
            s = dev[i, SIGMA]
            hth[i, 0] = s * gen.standard_normal()
            hth[i, 1] = s * gen.standard_normal()
            hth[i, 2] = s * gen.standard_normal()
        hext[0], hext[1], hext[2] = _field_at(field_kind, field_amp, freq, t + 0.5 * dt)
        _, status = coupled_step(m, m1, mm, 0.0, dev, hth, hext, dt, r_series, shared, cap, False, cur)
        if status != OK:
            return 0.0, status
        m[:, :] = m1
        t += dt

    v = v_init
    t = 0.0
    if trace_every > 0:
        _record(trace, 0, t, v, m, dev, r_series, shared)
    row = 1
    for k in range(n_steps):
        for i in range(n):
            s = dev[i, SIGMA]
            hth[i, 0] = s * gen.standard_normal()
            hth[i, 1] = s * gen.standard_normal()
            hth[i, 2] = s * gen.standard_normal()
        hext[0], hext[1], hext[2] = _field_at(field_kind, field_amp, freq, t + 0.5 * dt)
        v, status = coupled_step(m, m1, mm, v, dev, hth, hext, dt, r_series, shared, cap, True, cur)
        if status != OK:
            return v, status
        m[:, :] = m1
        t = (k + 1) * dt
        if trace_every > 0 and (k + 1) % trace_every == 0:
            _record(trace, row, t, v, m, dev, r_series, shared)
            row += 1
    return v, OK
