"""numba-compiled time-stepping kernels.

Same contracts as kernels_numpy; see that module for the reference
semantics. Arrays are padded to the widest RC order / longest OCV table in
the pack, with per-cell valid lengths in n_rc / ocv_len.

Performance notes: reciprocals and OCV segment slopes are precomputed once
per rollout so the inner loops are division-free, and the OCV lookup keeps
a per-cell segment hint (SOC moves slowly, so the search is O(1)).
Voltage-driven rollouts use a cell-outer/step-inner layout -- the inverse
causality decouples the cells, letting each cell's state live in registers
for the whole step loop -- while the coupled current-driven causality runs
step-outer with fused RK4 stage loops, plus a specialized variant for
first-order packs with no RC bookkeeping.
"""

import numpy as np
from numba import njit

KIND_CURRENT = 0
KIND_VOLTAGE = 1


@njit(cache=True, fastmath=True, inline="always")
def _interp1(x, xs, ys, sl, m, hint, k):
    # piecewise-linear lookup with end clamping; xs[k, :m] strictly
    # increasing. hint[k] caches the last segment for this cell: SOC moves
    # slowly, so the search is O(1) per call instead of a fresh binary
    # search. Rows are indexed directly (no per-call row views).
    if x <= xs[k, 0]:
        hint[k] = 0
        return ys[k, 0]
    if x >= xs[k, m - 1]:
        hint[k] = m - 2
        return ys[k, m - 1]
    lo = hint[k]
    if lo > m - 2:
        lo = m - 2
    # branch-free +/-1 drift correction (compiles to selects); x is strictly
    # inside the table here, so lo stays within [0, m-2]
    lo += x >= xs[k, lo + 1]
    lo -= x < xs[k, lo]
    if x < xs[k, lo] or x >= xs[k, lo + 1]:
        # rare: the state jumped more than one segment since the last call
        lo = 0
        hi = m - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if xs[k, mid] <= x:
                lo = mid
            else:
                hi = mid
    hint[k] = lo
    return ys[k, lo] + (x - xs[k, lo]) * sl[k, lo]


@njit(cache=True, fastmath=True, inline="always")
def _interp1_seq(x, xs, ys, sl, m, hint, k):
    # variant tuned for one cell integrated over many consecutive steps
    # (voltage-driven path): the +/-1 walk branches are then almost always
    # perfectly predicted, which beats the select-based correction above
    if x <= xs[k, 0]:
        hint[k] = 0
        return ys[k, 0]
    if x >= xs[k, m - 1]:
        hint[k] = m - 2
        return ys[k, m - 1]
    lo = hint[k]
    if lo > m - 2:
        lo = m - 2
    while x < xs[k, lo]:
        lo -= 1
    while x >= xs[k, lo + 1]:
        lo += 1
    hint[k] = lo
    return ys[k, lo] + (x - xs[k, lo]) * sl[k, lo]


@njit(cache=True, fastmath=True)
def _rollout_voltage(drive_t, drive_v, t_end, dt, q, rs, rc_r, rc_c, n_rc,
                     ocv_s, ocv_v, ocv_len, soc0, rc0, record_cells):
    # voltage-driven cells are fully decoupled, so integrate one cell at a
    # time with the whole step loop inner: the cell state stays in
    # registers, which is several times faster than the step-outer layout
    # needed by the current-driven (coupled) causality
    n = q.shape[0]
    nmax = rc_r.shape[1]
    n_steps = int(round(t_end / dt))
    T = n_steps + 1

    q_inv = 1.0 / q
    rs_inv = 1.0 / rs
    c_inv = 1.0 / rc_c
    tau_inv = 1.0 / (rc_r * rc_c)
    lmax = ocv_s.shape[1]
    ocv_sl = np.zeros((n, lmax))
    for k in range(n):
        for j in range(ocv_len[k] - 1):
            ocv_sl[k, j] = ((ocv_v[k, j + 1] - ocv_v[k, j])
                            / (ocv_s[k, j + 1] - ocv_s[k, j]))
    hint = np.zeros(n, dtype=np.int64)

    # resolve the ZOH drive once; every cell sees the same voltage series
    t_out = np.empty(T)
    v_out = np.empty(T)
    itot_out = np.zeros(T)
    idx = 0
    n_drive = drive_t.shape[0]
    for i in range(T):
        t = i * dt
        while idx + 1 < n_drive and drive_t[idx + 1] <= t + 1e-9:
            idx += 1
        t_out[i] = t
        v_out[i] = drive_v[idx]

    Tc = T if record_cells else 1
    soc_out = np.empty((Tc, n))
    rc_out = np.empty((Tc, n, nmax))
    icell_out = np.empty((Tc, n))

    rcw = np.empty(nmax)
    rcs = np.empty(nmax)
    kr1 = np.empty(nmax); kr2 = np.empty(nmax)
    kr3 = np.empty(nmax); kr4 = np.empty(nmax)
    clamped = 0
    for k in range(n):
        s = soc0[k]
        for j in range(nmax):
            rcw[j] = rc0[k, j]
        qi = q_inv[k]
        ri = rs_inv[k]
        m = ocv_len[k]
        nr = n_rc[k]
        for i in range(T):
            u = v_out[i]
            e = _interp1_seq(s, ocv_s, ocv_v, ocv_sl, m, hint, k)
            for j in range(nr):
                e += rcw[j] * c_inv[k, j]
            ik = (u - e) * ri
            itot_out[i] += ik
            if record_cells or i == n_steps:
                r = i if record_cells else 0
                soc_out[r, k] = s
                icell_out[r, k] = ik
                for j in range(nmax):
                    rc_out[r, k, j] = rcw[j]
            if i == n_steps:
                break

            h = dt
            k1s = ik * qi
            for j in range(nr):
                kr1[j] = ik - rcw[j] * tau_inv[k, j]

            ss = s + 0.5 * h * k1s
            e = _interp1_seq(ss, ocv_s, ocv_v, ocv_sl, m, hint, k)
            for j in range(nr):
                rcs[j] = rcw[j] + 0.5 * h * kr1[j]
                e += rcs[j] * c_inv[k, j]
            ik2 = (u - e) * ri
            k2s = ik2 * qi
            for j in range(nr):
                kr2[j] = ik2 - rcs[j] * tau_inv[k, j]

            ss = s + 0.5 * h * k2s
            e = _interp1_seq(ss, ocv_s, ocv_v, ocv_sl, m, hint, k)
            for j in range(nr):
                rcs[j] = rcw[j] + 0.5 * h * kr2[j]
                e += rcs[j] * c_inv[k, j]
            ik3 = (u - e) * ri
            k3s = ik3 * qi
            for j in range(nr):
                kr3[j] = ik3 - rcs[j] * tau_inv[k, j]

            ss = s + h * k3s
            e = _interp1_seq(ss, ocv_s, ocv_v, ocv_sl, m, hint, k)
            for j in range(nr):
                rcs[j] = rcw[j] + h * kr3[j]
                e += rcs[j] * c_inv[k, j]
            ik4 = (u - e) * ri
            k4s = ik4 * qi
            for j in range(nr):
                kr4[j] = ik4 - rcs[j] * tau_inv[k, j]

            s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
            if s < 0.0:
                s = 0.0
                clamped += 1
            elif s > 1.0:
                s = 1.0
                clamped += 1
            for j in range(nr):
                rcw[j] += h / 6.0 * (kr1[j] + 2.0 * kr2[j]
                                     + 2.0 * kr3[j] + kr4[j])

    return t_out, soc_out, rc_out, v_out, itot_out, icell_out, clamped


@njit(cache=True, fastmath=True)
def _rollout_current_o1(drive_t, drive_v, t_end, dt, q, rs, ocv_s, ocv_v,
                        ocv_len, soc0, record_cells):
    # first-order packs (no RC branches): same algorithm as the generic
    # current-driven rollout below, with all RC bookkeeping stripped
    n = q.shape[0]
    n_steps = int(round(t_end / dt))
    T = n_steps + 1

    q_inv = 1.0 / q
    rs_inv = 1.0 / rs
    inv_rs_sum = rs_inv.sum()
    lmax = ocv_s.shape[1]
    ocv_sl = np.zeros((n, lmax))
    for k in range(n):
        for j in range(ocv_len[k] - 1):
            ocv_sl[k, j] = ((ocv_v[k, j + 1] - ocv_v[k, j])
                            / (ocv_s[k, j + 1] - ocv_s[k, j]))
    hint = np.zeros(n, dtype=np.int64)

    t_out = np.empty(T)
    v_out = np.empty(T)
    itot_out = np.empty(T)
    Tc = T if record_cells else 1
    soc_out = np.empty((Tc, n))
    rc_out = np.empty((Tc, n, 0))
    icell_out = np.empty((Tc, n))

    soc = soc0.copy()
    e_buf = np.empty(n)
    i_buf = np.empty(n)
    ks = np.zeros(n)
    sums = np.empty(n)
    stage_cs = (0.0, 0.5, 0.5, 1.0)
    stage_w = (1.0, 2.0, 2.0, 1.0)

    clamped = 0
    idx = 0
    n_drive = drive_t.shape[0]
    for i in range(T):
        t = i * dt
        while idx + 1 < n_drive and drive_t[idx + 1] <= t + 1e-9:
            idx += 1
        u = drive_v[idx]
        h = dt
        last = i == n_steps

        for k in range(n):
            sums[k] = 0.0
        for st in range(4):
            cs = stage_cs[st] * h
            w = stage_w[st]
            acc = 0.0
            for k in range(n):
                e = _interp1(soc[k] + cs * ks[k], ocv_s, ocv_v, ocv_sl,
                             ocv_len[k], hint, k)
                e_buf[k] = e
                acc += e * rs_inv[k]
            v = (u + acc) / inv_rs_sum
            i_tot = 0.0
            for k in range(n):
                ik = (v - e_buf[k]) * rs_inv[k]
                i_buf[k] = ik
                i_tot += ik
                d = ik * q_inv[k]
                ks[k] = d
                sums[k] += w * d
            if st == 0:
                t_out[i] = t
                v_out[i] = v
                itot_out[i] = i_tot
                if record_cells or last:
                    r = i if record_cells else 0
                    for k in range(n):
                        soc_out[r, k] = soc[k]
                        icell_out[r, k] = i_buf[k]
                if last:
                    break
        if last:
            break

        for k in range(n):
            soc[k] += h / 6.0 * sums[k]
            if soc[k] < 0.0:
                soc[k] = 0.0
                clamped += 1
            elif soc[k] > 1.0:
                soc[k] = 1.0
                clamped += 1

    return t_out, soc_out, rc_out, v_out, itot_out, icell_out, clamped


@njit(cache=True, fastmath=True)
def rollout(kind, drive_t, drive_v, t_end, dt, q, rs, rc_r, rc_c, n_rc,
            ocv_s, ocv_v, ocv_len, soc0, rc0, record_cells=True):
    if kind == KIND_VOLTAGE:
        return _rollout_voltage(drive_t, drive_v, t_end, dt, q, rs, rc_r,
                                rc_c, n_rc, ocv_s, ocv_v, ocv_len, soc0, rc0,
                                record_cells)
    if rc_r.shape[1] == 0:
        return _rollout_current_o1(drive_t, drive_v, t_end, dt, q, rs,
                                   ocv_s, ocv_v, ocv_len, soc0, record_cells)
    n = q.shape[0]
    nmax = rc_r.shape[1]
    n_steps = int(round(t_end / dt))
    T = n_steps + 1

    q_inv = 1.0 / q
    rs_inv = 1.0 / rs
    inv_rs_sum = rs_inv.sum()
    c_inv = 1.0 / rc_c
    tau_inv = 1.0 / (rc_r * rc_c)
    # per-segment OCV slopes, so the inner interpolation is division-free
    lmax = ocv_s.shape[1]
    ocv_sl = np.zeros((n, lmax))
    for k in range(n):
        for j in range(ocv_len[k] - 1):
            ocv_sl[k, j] = ((ocv_v[k, j + 1] - ocv_v[k, j])
                            / (ocv_s[k, j + 1] - ocv_s[k, j]))
    hint = np.zeros(n, dtype=np.int64)

    t_out = np.empty(T)
    v_out = np.empty(T)
    itot_out = np.empty(T)
    Tc = T if record_cells else 1
    soc_out = np.empty((Tc, n))
    rc_out = np.empty((Tc, n, nmax))
    icell_out = np.empty((Tc, n))

    soc = soc0.copy()
    rc = rc0.copy()
    e_buf = np.empty(n)
    i_buf = np.empty(n)
    ks = np.zeros(n)          # derivative of the most recent stage; zeros
    kr = np.zeros((n, nmax))  # make the stage-1 staging (cs=0) exact
    sums = np.empty(n)        # running RK4 weighted sum k1+2k2+2k3+k4
    sumr = np.empty((n, nmax))
    rc_s = np.empty((n, nmax))
    stage_cs = (0.0, 0.5, 0.5, 1.0)   # staging coefficient (times h)
    stage_w = (1.0, 2.0, 2.0, 1.0)    # RK4 quadrature weight

    clamped = 0
    idx = 0
    n_drive = drive_t.shape[0]
    for i in range(T):
        t = i * dt
        while idx + 1 < n_drive and drive_t[idx + 1] <= t + 1e-9:
            idx += 1
        u = drive_v[idx]
        h = dt
        last = i == n_steps

        for k in range(n):
            sums[k] = 0.0
            for j in range(nmax):
                sumr[k, j] = 0.0

        # classical RK4 with the drive held over the step; stage 1 doubles
        # as the sampling point recorded below. Staging, derivative, and
        # quadrature accumulation are fused into two passes per stage (the
        # first builds the cell emfs, the second needs the shared voltage).
        for st in range(4):
            cs = stage_cs[st] * h
            w = stage_w[st]
            acc = 0.0
            for k in range(n):
                sk = soc[k] + cs * ks[k]
                e = _interp1(sk, ocv_s, ocv_v, ocv_sl, ocv_len[k], hint, k)
                for j in range(n_rc[k]):
                    rj = rc[k, j] + cs * kr[k, j]
                    rc_s[k, j] = rj
                    e += rj * c_inv[k, j]
                e_buf[k] = e
                acc += e * rs_inv[k]
            v = (u + acc) / inv_rs_sum
            i_tot = 0.0
            for k in range(n):
                ik = (v - e_buf[k]) * rs_inv[k]
                i_buf[k] = ik
                i_tot += ik
                d = ik * q_inv[k]
                ks[k] = d
                sums[k] += w * d
                for j in range(n_rc[k]):
                    dj = ik - rc_s[k, j] * tau_inv[k, j]
                    kr[k, j] = dj
                    sumr[k, j] += w * dj
            if st == 0:
                t_out[i] = t
                v_out[i] = v
                itot_out[i] = i_tot
                if record_cells or last:
                    r = i if record_cells else 0
                    for k in range(n):
                        soc_out[r, k] = soc[k]
                        icell_out[r, k] = i_buf[k]
                        for j in range(nmax):
                            rc_out[r, k, j] = rc[k, j]
                if last:
                    break
        if last:
            break

        for k in range(n):
            soc[k] += h / 6.0 * sums[k]
            if soc[k] < 0.0:
                soc[k] = 0.0
                clamped += 1
            elif soc[k] > 1.0:
                soc[k] = 1.0
                clamped += 1
            for j in range(n_rc[k]):
                rc[k, j] += h / 6.0 * sumr[k, j]

    return t_out, soc_out, rc_out, v_out, itot_out, icell_out, clamped


@njit(cache=True)
def filter_rollout(a, b, c, d, l, x_ref, v_ref, x0, t, u, y):
    # steady-gain observer: dx/dt = A(x - x_ref) + B(u - v_ref) + L*innov,
    # innovation frozen at the pre-step estimate over each RK4 step
    T = t.shape[0]
    m = x0.shape[0]
    xh = np.empty((T, m))
    yh = np.empty(T)
    x = x0.copy()
    f = np.empty(m)
    k1 = np.empty(m); k2 = np.empty(m); k3 = np.empty(m); k4 = np.empty(m)
    xs = np.empty(m)
    for i in range(T):
        du = u[i] - v_ref
        yhat = d * du
        for p in range(m):
            yhat += c[p] * (x[p] - x_ref[p])
        for p in range(m):
            xh[i, p] = x[p]
        yh[i] = yhat
        if i == T - 1:
            break
        h = t[i + 1] - t[i]
        innov = y[i] - yhat
        for p in range(m):
            f[p] = b[p] * du + l[p] * innov
        for p in range(m):
            s = f[p]
            for r in range(m):
                s += a[p, r] * (x[r] - x_ref[r])
            k1[p] = s
        for p in range(m):
            xs[p] = x[p] + 0.5 * h * k1[p]
        for p in range(m):
            s = f[p]
            for r in range(m):
                s += a[p, r] * (xs[r] - x_ref[r])
            k2[p] = s
        for p in range(m):
            xs[p] = x[p] + 0.5 * h * k2[p]
        for p in range(m):
            s = f[p]
            for r in range(m):
                s += a[p, r] * (xs[r] - x_ref[r])
            k3[p] = s
        for p in range(m):
            xs[p] = x[p] + h * k3[p]
        for p in range(m):
            s = f[p]
            for r in range(m):
                s += a[p, r] * (xs[r] - x_ref[r])
            k4[p] = s
        for p in range(m):
            x[p] += h / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p])
    return xh, yh
