"""Dormand-Prince 5(4) integration kernels for the unfolding vector field.

Everything here operates on bare float64 arrays so the same code runs
JIT-compiled (default) or as the pure-numpy fallback selected by
``TRIPLEZERO_NUMBA=0`` (see :mod:`triplezero._accel`).

State layouts: ``n = 3`` is the phase point (x, y, z); ``n = 6`` appends one
tangent vector propagated by the variational equations; ``n = 12`` appends a
full 3x3 fundamental-matrix (columns stored consecutively).  Parameters are
packed as ``p = (eps1, eps2, eps3, B, D)``.  ``fdir = -1.0`` integrates the
time-reversed field (used for stable-manifold shooting).

Events are affine functions of the phase point, ``g(s) = a . s + b``, located
on the dense output by bisection.  Only the final step of a run can be
truncated (by a terminal event), which keeps the per-step interpolation data
uniform.
"""

import numpy as np

from ._accel import njit

# status codes shared with the wrapper layer
OK = 0          # reached requested time
TERMINAL = 1    # stopped at a terminal event
ESCAPE = 2      # phase point left the escape radius
UNDERFLOW = 3   # step size collapsed (stiffness or blow-up)
BUF_FULL = 4    # output buffer exhausted; resume from last recorded point
NONFINITE = 5   # non-finite state encountered
MAXSTEPS = 6    # step budget exhausted

# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# embedded 4th-order error weights (b5 - b4)
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0,
                                71.0 / 1920.0, -17253.0 / 339200.0,
                                22.0 / 525.0, -1.0 / 40.0)
# dense-output weights
_D1 = -12715105075.0 / 11282082432.0
_D3 = 87487479700.0 / 32700410799.0
_D4 = -10690763975.0 / 1880347072.0
_D5 = 701980252875.0 / 199316789632.0
_D6 = -1453857185.0 / 822651844.0
_D7 = 69997945.0 / 29380423.0

_SAFE = 0.9
_BETA = 0.04                  # PI stabilization
_EXPO1 = 0.2 - _BETA * 0.75
_FACMIN = 0.2                 # max shrink per step
_FACMAX = 6.0                 # max growth per step


@njit
def rhs(y, p, fdir, out):
    """Vector field (first 3 slots) plus variational columns (rest)."""
    e1, e2, e3 = p[0], p[1], p[2]
    bb, dd = p[3], p[4]
    x, yv, z = y[0], y[1], y[2]
    out[0] = fdir * yv
    out[1] = fdir * (e1 * x + e2 * yv - x * z + bb * yv * z)
    out[2] = fdir * (e3 * z + x * x + dd * z * z)
    n = y.shape[0]
    if n > 3:
        j21 = e1 - z
        j22 = e2 + bb * z
        j23 = -x + bb * yv
        j31 = 2.0 * x
        j33 = e3 + 2.0 * dd * z
        for m in range(3, n, 3):
            v1, v2, v3 = y[m], y[m + 1], y[m + 2]
            out[m] = fdir * v2
            out[m + 1] = fdir * (j21 * v1 + j22 * v2 + j23 * v3)
            out[m + 2] = fdir * (j31 * v1 + j33 * v3)


@njit
def jac3(y, p, out):
    """3x3 Jacobian of the phase-space field at y (rows = components)."""
    x, yv, z = y[0], y[1], y[2]
    out[0, 0] = 0.0
    out[0, 1] = 1.0
    out[0, 2] = 0.0
    out[1, 0] = p[0] - z
    out[1, 1] = p[1] + p[3] * z
    out[1, 2] = -x + p[3] * yv
    out[2, 0] = 2.0 * x
    out[2, 1] = 0.0
    out[2, 2] = p[2] + 2.0 * p[4] * z


@njit
def _initial_step(y, f0, p, fdir, tf, rtol, atol, max_step):
    n = y.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, tf)
    y1 = np.empty(n)
    f1 = np.empty(n)
    for i in range(n):
        y1[i] = y[i] + h0 * f0[i]
    rhs(y1, p, fdir, f1)
    d2 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = np.sqrt(d2 / n) / h0
    dm = max(d1, d2)
    if dm <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dm) ** 0.2
    return min(100.0 * h0, h1, max_step, tf)


@njit
def _dense_eval3(theta, y0, y1, h, k, out3):
    """Evaluate the order-4 interpolant for the first 3 components."""
    for i in range(3):
        ydiff = y1[i] - y0[i]
        bspl = h * k[0, i] - ydiff
        c4 = ydiff - h * k[6, i] - bspl
        c5 = h * (_D1 * k[0, i] + _D3 * k[2, i] + _D4 * k[3, i]
                  + _D5 * k[4, i] + _D6 * k[5, i] + _D7 * k[6, i])
        out3[i] = y0[i] + theta * (ydiff + (1.0 - theta)
                                   * (bspl + theta * (c4 + (1.0 - theta) * c5)))


@njit
def _event_value(j, ev_a, ev_b, s3):
    return ev_a[j, 0] * s3[0] + ev_a[j, 1] * s3[1] + ev_a[j, 2] * s3[2] + ev_b[j]


@njit
def _locate_event(j, ev_a, ev_b, y0, y1, h, k, g_lo, scratch3):
    """Bisect the dense output for the zero of event j inside the step."""
    lo = 0.0
    hi = 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        _dense_eval3(mid, y0, y1, h, k, scratch3)
        gm = _event_value(j, ev_a, ev_b, scratch3)
        if (g_lo < 0.0) == (gm < 0.0):
            lo = mid
        else:
            hi = mid
        if (hi - lo) * abs(h) < 1e-14:
            break
    theta = 0.5 * (lo + hi)
    _dense_eval3(theta, y0, y1, h, k, scratch3)
    return theta


@njit
def integrate_core(y, p, fdir, tf, rtol, atol, max_step, h_start,
                   escape_sq, max_steps,
                   ev_a, ev_b, ev_dir, ev_term,
                   record, record_first, ts, ys, hs, conts,
                   want_dense, ev_t, ev_id, ev_y):
    """Adaptive DP5(4) loop.  Advances y in place over elapsed time [0, tf].

    Returns (status, t_reached, h_next, n_recorded, n_events).  When
    ``record`` is false the trajectory buffers are untouched and only the
    final state survives (in y).  Buffers are never grown here: a full buffer
    yields BUF_FULL and the caller resumes from the last recorded point.
    """
    n = y.shape[0]
    nev = ev_b.shape[0]
    cap = ts.shape[0] if record else 0
    evcap = ev_t.shape[0]

    k = np.empty((7, n))
    ytmp = np.empty(n)
    ynew = np.empty(n)
    scratch3 = np.empty(3)
    g_prev = np.empty(nev)
    g_new = np.empty(nev)

    nrec = 0
    nevw = 0
    t = 0.0

    if record and record_first:
        if cap < 1:
            return BUF_FULL, t, h_start, 0, 0
        ts[0] = 0.0
        hs[0] = 0.0
        for i in range(n):
            ys[0, i] = y[i]
        nrec = 1

    rhs(y, p, fdir, k[0])
    for j in range(nev):
        g_prev[j] = _event_value(j, ev_a, ev_b, y)

    if h_start > 0.0:
        h = min(h_start, max_step, tf)
    else:
        h = _initial_step(y, k[0], p, fdir, tf, rtol, atol, max_step)
    facold = 1e-4
    nstep = 0

    while t < tf:
        if nstep >= max_steps:
            return MAXSTEPS, t, h, nrec, nevw
        nstep += 1
        if h < 1e-14 * max(1.0, t):
            return UNDERFLOW, t, h, nrec, nevw
        last = False
        if t + h >= tf:
            h = tf - t
            last = True

        # stages (k[0] is FSAL from the previous step)
        for i in range(n):
            ytmp[i] = y[i] + h * _A21 * k[0, i]
        rhs(ytmp, p, fdir, k[1])
        for i in range(n):
            ytmp[i] = y[i] + h * (_A31 * k[0, i] + _A32 * k[1, i])
        rhs(ytmp, p, fdir, k[2])
        for i in range(n):
            ytmp[i] = y[i] + h * (_A41 * k[0, i] + _A42 * k[1, i]
                                  + _A43 * k[2, i])
        rhs(ytmp, p, fdir, k[3])
        for i in range(n):
            ytmp[i] = y[i] + h * (_A51 * k[0, i] + _A52 * k[1, i]
                                  + _A53 * k[2, i] + _A54 * k[3, i])
        rhs(ytmp, p, fdir, k[4])
        for i in range(n):
            ytmp[i] = y[i] + h * (_A61 * k[0, i] + _A62 * k[1, i]
                                  + _A63 * k[2, i] + _A64 * k[3, i]
                                  + _A65 * k[4, i])
        rhs(ytmp, p, fdir, k[5])
        for i in range(n):
            ynew[i] = y[i] + h * (_B1 * k[0, i] + _B3 * k[2, i]
                                  + _B4 * k[3, i] + _B5 * k[4, i]
                                  + _B6 * k[5, i])
        rhs(ynew, p, fdir, k[6])

        # embedded error estimate
        err = 0.0
        ok = True
        for i in range(n):
            e = h * (_E1 * k[0, i] + _E3 * k[2, i] + _E4 * k[3, i]
                     + _E5 * k[4, i] + _E6 * k[5, i] + _E7 * k[6, i])
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (e / sc) ** 2
            if not np.isfinite(ynew[i]):
                ok = False
        err = np.sqrt(err / n)
        if not ok:
            h *= 0.5
            if h < 1e-14 * max(1.0, t):
                return NONFINITE, t, h, nrec, nevw
            continue

        if err > 1.0:
            fac11 = err ** _EXPO1
            h = h / min(1.0 / _FACMIN, fac11 / _SAFE)
            continue

        # accepted
        fac11 = err ** _EXPO1
        fac = fac11 / facold ** _BETA
        fac = max(1.0 / _FACMAX, min(1.0 / _FACMIN, fac / _SAFE))
        hnew = min(h / fac, max_step)
        facold = max(err, 1e-4)

        t_step = t
        h_step = h
        t = t + h

        # event detection on the accepted step
        term_theta = 2.0
        term_j = -1
        for j in range(nev):
            g_new[j] = _event_value(j, ev_a, ev_b, ynew)
        for j in range(nev):
            if (g_prev[j] < 0.0) != (g_new[j] < 0.0):
                rising = g_new[j] > g_prev[j]
                if ev_dir[j] > 0 and not rising:
                    continue
                if ev_dir[j] < 0 and rising:
                    continue
                theta = _locate_event(j, ev_a, ev_b, y, ynew, h_step, k,
                                      g_prev[j], scratch3)
                if ev_term[j] != 0:
                    if theta < term_theta:
                        term_theta = theta
                        term_j = j
                else:
                    if nevw >= evcap:
                        return BUF_FULL, t_step, h_step, nrec, nevw
                    _dense_eval3(theta, y, ynew, h_step, k, scratch3)
                    ev_t[nevw] = t_step + theta * h_step
                    ev_id[nevw] = j
                    for i in range(3):
                        ev_y[nevw, i] = scratch3[i]
                    nevw += 1

        if term_j >= 0:
            theta = _locate_event(term_j, ev_a, ev_b, y, ynew, h_step, k,
                                  g_prev[term_j], scratch3)
            t_ev = t_step + theta * h_step
            if nevw < evcap:
                ev_t[nevw] = t_ev
                ev_id[nevw] = term_j
                for i in range(3):
                    ev_y[nevw, i] = scratch3[i]
                nevw += 1
            if record:
                if nrec >= cap:
                    return BUF_FULL, t_step, h_step, nrec, nevw
                ts[nrec] = t_ev
                hs[nrec] = h_step
                if want_dense:
                    for i in range(n):
                        ydiff = ynew[i] - y[i]
                        bspl = h_step * k[0, i] - ydiff
                        conts[nrec, 0, i] = y[i]
                        conts[nrec, 1, i] = ydiff
                        conts[nrec, 2, i] = bspl
                        conts[nrec, 3, i] = ydiff - h_step * k[6, i] - bspl
                        conts[nrec, 4, i] = h_step * (
                            _D1 * k[0, i] + _D3 * k[2, i] + _D4 * k[3, i]
                            + _D5 * k[4, i] + _D6 * k[5, i] + _D7 * k[6, i])
            # terminal state: interpolate the full vector (variational part
            # included) with the same dense formula
            for i in range(n):
                ydiff = ynew[i] - y[i]
                bspl = h_step * k[0, i] - ydiff
                c4 = ydiff - h_step * k[6, i] - bspl
                c5 = h_step * (_D1 * k[0, i] + _D3 * k[2, i] + _D4 * k[3, i]
                               + _D5 * k[4, i] + _D6 * k[5, i]
                               + _D7 * k[6, i])
                y[i] = y[i] + theta * (ydiff + (1.0 - theta)
                                       * (bspl + theta
                                          * (c4 + (1.0 - theta) * c5)))
            if record:
                for i in range(n):
                    ys[nrec, i] = y[i]
                nrec += 1
            return TERMINAL, t_ev, hnew, nrec, nevw

        # commit the step (dense data needs the step-start state, so record
        # the interpolant before overwriting y)
        if record:
            if nrec >= cap:
                return BUF_FULL, t_step, h_step, nrec, nevw
            ts[nrec] = t
            hs[nrec] = h_step
            for i in range(n):
                ys[nrec, i] = ynew[i]
            if want_dense:
                for i in range(n):
                    ydiff = ynew[i] - y[i]
                    bspl = h_step * k[0, i] - ydiff
                    conts[nrec, 0, i] = y[i]
                    conts[nrec, 1, i] = ydiff
                    conts[nrec, 2, i] = bspl
                    conts[nrec, 3, i] = ydiff - h_step * k[6, i] - bspl
                    conts[nrec, 4, i] = h_step * (
                        _D1 * k[0, i] + _D3 * k[2, i] + _D4 * k[3, i]
                        + _D5 * k[4, i] + _D6 * k[5, i] + _D7 * k[6, i])
            nrec += 1
        for j in range(nev):
            g_prev[j] = g_new[j]
        for i in range(n):
            y[i] = ynew[i]

        r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2]
        if r2 > escape_sq:
            return ESCAPE, t, hnew, nrec, nevw
        if last:
            return OK, t, hnew, nrec, nevw
        # FSAL
        for i in range(n):
            k[0, i] = k[6, i]
        h = hnew

    return OK, t, h, nrec, nevw


_NO_EV_A = np.zeros((0, 3))
_NO_EV_B = np.zeros(0)
_NO_EV_DIR = np.zeros(0, dtype=np.int64)
_NO_EV_TERM = np.zeros(0, dtype=np.int64)
_NO_TS = np.zeros(0)
_NO_YS = np.zeros((0, 1))
_NO_HS = np.zeros(0)
_NO_CONTS = np.zeros((0, 5, 1))
_NO_ET = np.zeros(1)
_NO_EID = np.zeros(1, dtype=np.int64)
_NO_EY = np.zeros((1, 3))


@njit
def advance(y, p, fdir, tf, rtol, atol, max_step, h_start, escape_sq,
            max_steps, ev_a, ev_b, ev_dir, ev_term, ts, ys, hs, conts,
            ev_t, ev_id, ev_y):
    return integrate_core(y, p, fdir, tf, rtol, atol, max_step, h_start,
                          escape_sq, max_steps, ev_a, ev_b, ev_dir, ev_term,
                          False, False, ts, ys, hs, conts, False,
                          ev_t, ev_id, ev_y)


@njit
def benettin(y6, p, renorm_dt, n_intervals, rtol, atol, max_step,
             escape_sq, max_steps, logs):
    """Tangent-vector growth rates over successive renormalization windows.

    y6 holds (state, tangent); the tangent is renormalized to unit length
    after each window and log of its growth stored in logs.  Returns
    (status, intervals_completed).
    """
    ev_a = np.zeros((0, 3))
    ev_b = np.zeros(0)
    ev_dir = np.zeros(0, dtype=np.int64)
    ev_term = np.zeros(0, dtype=np.int64)
    ts = np.zeros(0)
    ys = np.zeros((0, 1))
    hs = np.zeros(0)
    conts = np.zeros((0, 5, 1))
    ev_t = np.zeros(1)
    ev_id = np.zeros(1, dtype=np.int64)
    ev_y = np.zeros((1, 3))
    h = -1.0
    for kk in range(n_intervals):
        st, _, hn, _, _ = integrate_core(
            y6, p, 1.0, renorm_dt, rtol, atol, max_step, h, escape_sq,
            max_steps, ev_a, ev_b, ev_dir, ev_term,
            False, False, ts, ys, hs, conts, False,
            ev_t, ev_id, ev_y)
        if st != OK:
            return st, kk
        nrm = np.sqrt(y6[3] ** 2 + y6[4] ** 2 + y6[5] ** 2)
        if nrm <= 0.0 or not np.isfinite(nrm):
            return NONFINITE, kk
        logs[kk] = np.log(nrm)
        y6[3] /= nrm
        y6[4] /= nrm
        y6[5] /= nrm
        h = hn
    return OK, n_intervals
