"""Pure-numpy reference kernels.

These define the semantics the numba kernels mirror. Each rollout advances a
pack of N cells with classical fixed-step RK4; the drive (total current or
pack voltage) is held constant over each step (zero-order hold). Per-cell
currents come from the shared-voltage constraint: with
e_k = ocv_k(soc_k) + sum_j x_{j,k}/C_{j,k},

    current-driven: V = (I + sum e_k/R_sk) / sum(1/R_sk),  I_k = (V - e_k)/R_sk
    voltage-driven: I_k = (V - e_k)/R_sk,  I = sum I_k

SOC is clamped to [0, 1] after each step; the number of clamps is returned
so callers can warn.
"""

import numpy as np

KIND_CURRENT = 0
KIND_VOLTAGE = 1


def _deriv(kind, u, q, rs, rc_r, rc_c, rc_mask, ocv_s, ocv_v, ocv_len, soc, rc):
    n = q.shape[0]
    e = np.empty(n)
    for k in range(n):
        m = ocv_len[k]
        e[k] = np.interp(soc[k], ocv_s[k, :m], ocv_v[k, :m])
    if rc.shape[1]:
        e += np.where(rc_mask, rc / rc_c, 0.0).sum(axis=1)
    if kind == KIND_CURRENT:
        v = (u + np.sum(e / rs)) / np.sum(1.0 / rs)
    else:
        v = u
    i_cells = (v - e) / rs
    dsoc = i_cells / q
    if rc.shape[1]:
        drc = np.where(rc_mask, i_cells[:, None] - rc / (rc_r * rc_c), 0.0)
    else:
        drc = np.zeros_like(rc)
    return v, float(i_cells.sum()), i_cells, dsoc, drc


def rollout(kind, drive_t, drive_v, t_end, dt, q, rs, rc_r, rc_c, n_rc,
            ocv_s, ocv_v, ocv_len, soc0, rc0, record_cells=True):
    n = q.shape[0]
    nmax = rc_r.shape[1]
    n_steps = int(round(t_end / dt))
    T = n_steps + 1

    rc_mask = np.arange(nmax)[None, :] < n_rc[:, None] if nmax else np.zeros((n, 0), bool)
    # guard padded slots so the masked divisions stay finite
    rc_r = np.where(rc_mask, rc_r, 1.0)
    rc_c = np.where(rc_mask, rc_c, 1.0)

    t_out = np.empty(T)
    v_out = np.empty(T)
    itot_out = np.empty(T)
    Tc = T if record_cells else 1
    soc_out = np.empty((Tc, n))
    rc_out = np.empty((Tc, n, nmax))
    icell_out = np.empty((Tc, n))

    soc = soc0.copy()
    rc = rc0.copy()
    clamped = 0
    idx = 0
    for i in range(T):
        t = i * dt
        while idx + 1 < drive_t.shape[0] and drive_t[idx + 1] <= t + 1e-9:
            idx += 1
        u = drive_v[idx]

        v, i_tot, i_cells, k1s, k1r = _deriv(
            kind, u, q, rs, rc_r, rc_c, rc_mask, ocv_s, ocv_v, ocv_len, soc, rc)
        t_out[i] = t
        v_out[i] = v
        itot_out[i] = i_tot
        if record_cells or i == n_steps:
            r = i if record_cells else 0
            soc_out[r] = soc
            icell_out[r] = i_cells
            rc_out[r] = rc
        if i == n_steps:
            break

        h = dt
        _, _, _, k2s, k2r = _deriv(kind, u, q, rs, rc_r, rc_c, rc_mask,
                                   ocv_s, ocv_v, ocv_len,
                                   soc + 0.5 * h * k1s, rc + 0.5 * h * k1r)
        _, _, _, k3s, k3r = _deriv(kind, u, q, rs, rc_r, rc_c, rc_mask,
                                   ocv_s, ocv_v, ocv_len,
                                   soc + 0.5 * h * k2s, rc + 0.5 * h * k2r)
        _, _, _, k4s, k4r = _deriv(kind, u, q, rs, rc_r, rc_c, rc_mask,
                                   ocv_s, ocv_v, ocv_len,
                                   soc + h * k3s, rc + h * k3r)
        soc = soc + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        rc = rc + h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        low = soc < 0.0
        high = soc > 1.0
        clamped += int(low.sum() + high.sum())
        if low.any() or high.any():
            soc = np.clip(soc, 0.0, 1.0)

    return t_out, soc_out, rc_out, v_out, itot_out, icell_out, clamped


def filter_rollout(a, b, c, d, l, x_ref, v_ref, x0, t, u, y):
    T = t.shape[0]
    m = x0.shape[0]
    xh = np.empty((T, m))
    yh = np.empty(T)
    x = x0.copy()
    for i in range(T):
        du = u[i] - v_ref
        yhat = float(c @ (x - x_ref) + d * du)
        xh[i] = x
        yh[i] = yhat
        if i == T - 1:
            break
        h = t[i + 1] - t[i]
        f = b * du + l * (y[i] - yhat)
        k1 = a @ (x - x_ref) + f
        k2 = a @ (x + 0.5 * h * k1 - x_ref) + f
        k3 = a @ (x + 0.5 * h * k2 - x_ref) + f
        k4 = a @ (x + h * k3 - x_ref) + f
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return xh, yh
