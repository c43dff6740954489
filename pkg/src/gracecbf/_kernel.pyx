# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel for the bundled wall closed-loop forms.

Every floating-point expression here mirrors the pure-Python stepper in
``gracecbf.sim`` (and the constraint builders in ``gracecbf.barriers``)
operation for operation, including arithmetically inert terms, so the two
paths produce bit-identical trajectories. Keep them in lockstep when editing.
"""

from libc.math cimport fabs, isfinite, pow, sqrt

# Dormand-Prince 5(4) tableau (FSAL)
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0
cdef double B3 = 500.0 / 1113.0
cdef double B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0
cdef double B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0

cdef double SAFETY = 0.9
cdef double FACMIN = 0.2
cdef double FACMAX = 10.0
cdef double BETA = 0.04
cdef double EXPO1 = 0.17


cdef struct CtrlOut:
    double u_star
    double u_d
    double u_sf
    bint active


cdef inline int ctrl(int bl, double bl0, double bl1, double blxd,
                     int fam, double p0, double p1, double p2, double p3, double p4,
                     double x, double v, CtrlOut* out) noexcept nogil:
    """Baseline + constraint + scalar filter. Returns 1 on a pole crossing."""
    cdef double ud, hv, gradv, acoef, rhs, off, usf, hg, hdot, curv
    if bl == 1:
        ud = -bl0 * (x - blxd)
    else:
        ud = -bl0 * (x - blxd) - bl1 * v

    if fam == 1:  # zeroing: p0 = gamma, p1 = threshold
        hv = x - p1
        gradv = 1.0
        acoef = gradv * 1.0
        rhs = -p0 * hv - gradv * 0.0
        off = rhs / acoef
    elif fam == 2:  # exponential: p0 = gamma1, p1 = gamma2, p2 = threshold
        hv = x - p2
        gradv = 1.0
        acoef = gradv * 1.0
        hdot = gradv * v
        curv = 0.0
        rhs = -(p0 * p1) * hv - (p0 + p1) * hdot - curv * v * v - gradv * 0.0
        off = rhs / acoef
    elif fam == 3:  # graceful1: p0 = gamma, p1 = raw threshold, p2 = a, p3 = b
        hg = ((x - p1) - p3) / (p3 - p2)
        if hg <= -1.0:
            return 1
        gradv = 1.0 / (p3 - p2)
        acoef = gradv * 1.0
        rhs = -p0 * hg / (hg + 1.0) - gradv * 0.0
        off = rhs / acoef
    else:  # graceful2: p0 = zeta, p1 = omega_n, p2 = raw threshold, p3 = a, p4 = b
        hg = ((x - p2) - p4) / (p4 - p3)
        if hg <= -1.0:
            return 1
        gradv = 1.0 / (p4 - p3)
        acoef = gradv * 1.0
        hdot = gradv * v
        curv = 0.0 / (p4 - p3)
        rhs = -(2.0 * p0 * p1) * hdot - (p1 * p1) * hg / (hg + 1.0) - curv * v * v - gradv * 0.0
        off = rhs / acoef

    usf = off / 1.0
    out.u_d = ud
    out.u_sf = usf
    out.active = usf > ud
    out.u_star = usf if out.active else ud
    return 0


cdef inline int eval_rhs(int plant, int bl, double bl0, double bl1, double blxd,
                         int fam, double p0, double p1, double p2, double p3, double p4,
                         double* y, double* dy, CtrlOut* out) noexcept nogil:
    cdef double u
    if ctrl(bl, bl0, bl1, blxd, fam, p0, p1, p2, p3, p4,
            y[0], y[1] if plant == 2 else 0.0, out):
        return 1
    u = out.u_star
    if plant == 1:
        dy[0] = 0.0 + 1.0 * u
    else:
        dy[0] = y[1] + 0.0 * u
        dy[1] = 0.0 + 1.0 * u
    return 0


cdef inline void hermite(double t0, double h, double* y0, double* y1,
                         double* f0, double* f1, int n, double tq, double* out) noexcept nogil:
    cdef double th = (tq - t0) / h
    cdef double d
    cdef int i
    for i in range(n):
        d = y1[i] - y0[i]
        out[i] = (y0[i]
                  + th * d
                  + th * (th - 1.0) * ((1.0 - 2.0 * th) * d + (th - 1.0) * h * f0[i] + th * h * f1[i]))


def simulate(int plant, int bl, double bl0, double bl1, double blxd,
             int fam, double p0, double p1, double p2, double p3, double p4,
             double x0, double v0,
             double horizon, double dt, double rtol, double atol,
             double hmin, double hmax, double wall, bint has_wall,
             long m, double[::1] out_t, double[:, ::1] out_y):
    """Run the closed loop; fill the output grid rows; return
    (status, nrows, event_time, peak_abs_u, naccept, nreject).

    status: 0 finished, 1 collision, 2 catastrophe boundary, 3 step underflow.
    """
    cdef int n = 1 if plant == 1 else 2
    cdef double T = horizon
    cdef double y[2]
    cdef double y1[2]
    cdef double ys[2]
    cdef double yq[2]
    cdef double k1[2]
    cdef double k2[2]
    cdef double k3[2]
    cdef double k4[2]
    cdef double k5[2]
    cdef double k6[2]
    cdef double k7[2]
    cdef CtrlOut r0, r1, rtmp
    cdef double t, h, t1, facold, err, s, e, a0, a1, big, sk, q, fac, factor, peak
    cdef double lo, hi, mid, tq, bracket_lo, ev_t, cut
    cdef bint clamped, just_rejected, split_done, failed, failed_pole, terminated
    cdef long g_idx, nrow, naccept, nreject, it
    cdef int i, rc

    y[0] = x0
    y[1] = v0
    out_t[0] = 0.0
    for i in range(n):
        out_y[0, i] = y[i]
    nrow = 1

    if has_wall and y[0] <= wall:
        return (1, nrow, 0.0, 0.0, 0, 0)

    rc = eval_rhs(plant, bl, bl0, bl1, blxd, fam, p0, p1, p2, p3, p4, y, k1, &r0)
    if rc:
        # caller pre-validates the start state; treat as immediate catastrophe
        return (2, nrow, 0.0, 0.0, 0, 0)
    peak = fabs(r0.u_star)

    t = 0.0
    g_idx = 1
    h = hmax
    if dt < h:
        h = dt
    if T < h:
        h = T
    facold = 1e-4
    just_rejected = False
    split_done = False
    naccept = 0
    nreject = 0
    terminated = False

    while T - t > 1e-12 * T:
        clamped = False
        if h > hmax:
            h = hmax
        if h >= T - t:
            h = T - t
            clamped = True
        if h < hmin and not clamped:
            return (3, nrow, t, peak, naccept, nreject)

        # one Dormand-Prince trial step (FSAL: k1 is the stored derivative)
        failed = False
        failed_pole = False
        err = 0.0
        for i in range(n):
            ys[i] = y[i] + h * (A21 * k1[i])
        if eval_rhs(plant, bl, bl0, bl1, blxd, fam, p0, p1, p2, p3, p4, ys, k2, &rtmp):
            failed = True
            failed_pole = True
        if not failed:
            for i in range(n):
                ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            if eval_rhs(plant, bl, bl0, bl1, blxd, fam, p0, p1, p2, p3, p4, ys, k3, &rtmp):
                failed = True
                failed_pole = True
        if not failed:
            for i in range(n):
                ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            if eval_rhs(plant, bl, bl0, bl1, blxd, fam, p0, p1, p2, p3, p4, ys, k4, &rtmp):
                failed = True
                failed_pole = True
        if not failed:
            for i in range(n):
                ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            if eval_rhs(plant, bl, bl0, bl1, blxd, fam, p0, p1, p2, p3, p4, ys, k5, &rtmp):
                failed = True
                failed_pole = True
        if not failed:
            for i in range(n):
                ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            if eval_rhs(plant, bl, bl0, bl1, blxd, fam, p0, p1, p2, p3, p4, ys, k6, &rtmp):
                failed = True
                failed_pole = True
        if not failed:
            for i in range(n):
                y1[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
            if eval_rhs(plant, bl, bl0, bl1, blxd, fam, p0, p1, p2, p3, p4, y1, k7, &r1):
                failed = True
                failed_pole = True
        if not failed:
            s = 0.0
            for i in range(n):
                e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                a0 = fabs(y[i])
                a1 = fabs(y1[i])
                big = a1 if a1 > a0 else a0
                sk = atol + rtol * big
                q = e / sk
                s += q * q
            err = sqrt(s / n)
            if not isfinite(err):
                failed = True

        if failed:
            nreject += 1
            just_rejected = True
            h = 0.5 * h
            if h < hmin:
                if failed_pole:
                    if out_t[nrow - 1] < t - 1e-15:
                        out_t[nrow] = t
                        for i in range(n):
                            out_y[nrow, i] = y[i]
                        nrow += 1
                    return (2, nrow, t, peak, naccept, nreject)
                return (3, nrow, t, peak, naccept, nreject)
            continue

        if err > 1.0:
            nreject += 1
            just_rejected = True
            fac = SAFETY * pow(err, -0.2)
            if fac < FACMIN:
                fac = FACMIN
            h = h * fac
            if h < hmin:
                return (3, nrow, t, peak, naccept, nreject)
            continue

        if (not split_done) and r1.active != r0.active:
            # bisect the activation switch; cut the step just past it
            lo = t
            hi = t + h
            for it in range(80):
                if hi - lo <= 1e-12:
                    break
                mid = 0.5 * (lo + hi)
                hermite(t, h, y, y1, k1, k7, n, mid, yq)
                if ctrl(bl, bl0, bl1, blxd, fam, p0, p1, p2, p3, p4,
                        yq[0], yq[1] if plant == 2 else 0.0, &rtmp):
                    hi = mid
                elif rtmp.active == r0.active:
                    lo = mid
                else:
                    hi = mid
            cut = hi - t
            if cut >= hmin and cut < h * (1.0 - 1e-12):
                h = cut
                split_done = True
                continue

        # accept
        naccept += 1
        t1 = T if clamped else t + h

        bracket_lo = t
        while g_idx <= m:
            tq = g_idx * dt
            if tq > t1:
                break
            hermite(t, h, y, y1, k1, k7, n, tq, yq)
            if has_wall and yq[0] <= wall:
                lo = bracket_lo
                hi = tq
                for it in range(60):
                    if hi - lo <= 1e-9:
                        break
                    mid = 0.5 * (lo + hi)
                    hermite(t, h, y, y1, k1, k7, n, mid, ys)
                    if ys[0] > wall:
                        lo = mid
                    else:
                        hi = mid
                ev_t = 0.5 * (lo + hi)
                hermite(t, h, y, y1, k1, k7, n, ev_t, ys)
                out_t[nrow] = ev_t
                for i in range(n):
                    out_y[nrow, i] = ys[i]
                nrow += 1
                return (1, nrow, ev_t, peak, naccept, nreject)
            out_t[nrow] = tq
            for i in range(n):
                out_y[nrow, i] = yq[i]
            nrow += 1
            bracket_lo = tq
            g_idx += 1
        if has_wall and y1[0] <= wall:
            lo = bracket_lo
            hi = t1
            for it in range(60):
                if hi - lo <= 1e-9:
                    break
                mid = 0.5 * (lo + hi)
                hermite(t, h, y, y1, k1, k7, n, mid, ys)
                if ys[0] > wall:
                    lo = mid
                else:
                    hi = mid
            ev_t = 0.5 * (lo + hi)
            hermite(t, h, y, y1, k1, k7, n, ev_t, ys)
            out_t[nrow] = ev_t
            for i in range(n):
                out_y[nrow, i] = ys[i]
            nrow += 1
            return (1, nrow, ev_t, peak, naccept, nreject)

        if err == 0.0:
            factor = FACMAX
        else:
            factor = SAFETY * pow(err, -EXPO1) * pow(facold, BETA)
        if factor > FACMAX:
            factor = FACMAX
        if factor < FACMIN:
            factor = FACMIN
        if just_rejected and factor > 1.0:
            factor = 1.0
        facold = err if err > 1e-4 else 1e-4

        t = t1
        for i in range(n):
            y[i] = y1[i]
            k1[i] = k7[i]
        r0 = r1
        if fabs(r1.u_star) > peak:
            peak = fabs(r1.u_star)
        h = h * factor
        just_rejected = False
        split_done = False

    if out_t[nrow - 1] < t - 1e-15:
        out_t[nrow] = t
        for i in range(n):
            out_y[nrow, i] = y[i]
        nrow += 1
    return (0, nrow, t, peak, naccept, nreject)
