# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled rollout kernels.

Arithmetic must stay expression-for-expression identical to
safepg.dynamics.engine_py (the pure fallback); the extension is compiled with
-ffp-contract=off so both paths produce bitwise-equal trajectories.
"""

from libc.math cimport sin, cos, isfinite

DEF GRAVITY = 9.81


def rollout_simple_mass(double spring_k, double damping_d, double mass_m,
                        double gx, double gv,
                        double[::1] x0, double[::1] alpha, double sigma,
                        double[:, ::1] noise, double u_max, double dt,
                        double[:, ::1] states, double[:, ::1] actions,
                        double[::1] costs):
    cdef Py_ssize_t M = noise.shape[0]
    cdef Py_ssize_t m
    cdef double x = x0[0]
    cdef double v = x0[1]
    cdef double a0 = alpha[0], a1 = alpha[1], a2 = alpha[2]
    cdef double mean, u, acc, xn, vn, dx, dv
    states[0, 0] = x
    states[0, 1] = v
    for m in range(M):
        mean = 0.0
        mean += a0 * x
        mean += a1 * v
        mean += a2
        u = mean + sigma * noise[m, 0]
        if u > u_max:
            u = u_max
        elif u < -u_max:
            u = -u_max
        acc = (u - spring_k * x - damping_d * v) / mass_m
        xn = x + dt * v
        vn = v + dt * acc
        if not (isfinite(xn) and isfinite(vn)):
            return m
        dx = xn - gx
        dv = vn - gv
        costs[m] = dx * dx + dv * dv + 0.01 * (u * u)
        actions[m, 0] = u
        states[m + 1, 0] = xn
        states[m + 1, 1] = vn
        x = xn
        v = vn
    return -1


def rollout_cart_pole(double mc, double mp, double length, double damp,
                      double[::1] x0, double[::1] alpha, double sigma,
                      double[:, ::1] noise, double u_max, double dt,
                      double[:, ::1] states, double[:, ::1] actions,
                      double[::1] costs):
    cdef Py_ssize_t M = noise.shape[0]
    cdef Py_ssize_t m
    cdef double x = x0[0], xd = x0[1], th = x0[2], thd = x0[3]
    cdef double a0 = alpha[0], a1 = alpha[1], a2 = alpha[2], a3 = alpha[3], a4 = alpha[4]
    cdef double mean, u, s, c, m11, m12, m22, r1, r2, det, xacc, thacc
    cdef double xn, xdn, thn, thdn
    states[0, 0] = x
    states[0, 1] = xd
    states[0, 2] = th
    states[0, 3] = thd
    for m in range(M):
        mean = 0.0
        mean += a0 * x
        mean += a1 * xd
        mean += a2 * th
        mean += a3 * thd
        mean += a4
        u = mean + sigma * noise[m, 0]
        if u > u_max:
            u = u_max
        elif u < -u_max:
            u = -u_max
        s = sin(th)
        c = cos(th)
        m11 = mc + mp
        m12 = mp * length * c
        m22 = mp * length * length
        r1 = u + mp * length * thd * thd * s - damp * xd
        r2 = mp * GRAVITY * length * s
        det = m11 * m22 - m12 * m12
        xacc = (m22 * r1 - m12 * r2) / det
        thacc = (m11 * r2 - m12 * r1) / det
        xn = x + dt * xd
        xdn = xd + dt * xacc
        thn = th + dt * thd
        thdn = thd + dt * thacc
        if not (isfinite(xn) and isfinite(xdn) and isfinite(thn) and isfinite(thdn)):
            return m
        costs[m] = xn * xn + xdn * xdn + thn * thn + thdn * thdn + 0.01 * (u * u)
        actions[m, 0] = u
        states[m + 1, 0] = xn
        states[m + 1, 1] = xdn
        states[m + 1, 2] = thn
        states[m + 1, 3] = thdn
        x = xn
        xd = xdn
        th = thn
        thd = thdn
    return -1


def rollout_quadrotor(double ixx, double iyy, double izz, double b,
                      double drag, double rod, double w0,
                      double[::1] x0, double[:, ::1] alpha, double sigma,
                      double[:, ::1] noise, double u_max, double dt,
                      double[:, ::1] states, double[:, ::1] actions,
                      double[::1] costs):
    cdef Py_ssize_t M = noise.shape[0]
    cdef Py_ssize_t m, a, i, j
    cdef double st[6]
    cdef double nxt[6]
    cdef double u[4]
    cdef double mean, ui, cost
    cdef double w1, w2, w3, w4, sq1, sq2, sq3, sq4
    cdef double tau_roll, tau_pitch, tau_yaw, pdot, qdot, rdot
    cdef bint ok
    for i in range(6):
        st[i] = x0[i]
        states[0, i] = st[i]
    for m in range(M):
        for a in range(4):
            mean = 0.0
            for i in range(6):
                mean += alpha[a, i] * st[i]
            mean += alpha[a, 6]
            ui = mean + sigma * noise[m, a]
            if ui > u_max:
                ui = u_max
            elif ui < -u_max:
                ui = -u_max
            u[a] = ui
        w1 = w0 + u[0]
        w2 = w0 + u[1]
        w3 = w0 + u[2]
        w4 = w0 + u[3]
        sq1 = w1 * w1
        sq2 = w2 * w2
        sq3 = w3 * w3
        sq4 = w4 * w4
        tau_roll = b * (sq4 - sq2)
        tau_pitch = b * (sq1 - sq3)
        tau_yaw = drag * (sq2 + sq4 - sq1 - sq3)
        pdot = ((iyy - izz) / ixx) * st[4] * st[5] + (rod / ixx) * tau_roll
        qdot = ((izz - ixx) / iyy) * st[3] * st[5] + (rod / iyy) * tau_pitch
        rdot = ((ixx - iyy) / izz) * st[3] * st[4] + (1.0 / izz) * tau_yaw
        nxt[0] = st[0] + dt * st[3]
        nxt[1] = st[1] + dt * st[4]
        nxt[2] = st[2] + dt * st[5]
        nxt[3] = st[3] + dt * pdot
        nxt[4] = st[4] + dt * qdot
        nxt[5] = st[5] + dt * rdot
        ok = True
        for i in range(6):
            if not isfinite(nxt[i]):
                ok = False
        if not ok:
            return m
        cost = 0.0
        for i in range(6):
            cost += nxt[i] * nxt[i]
        for a in range(4):
            cost += 0.01 * (u[a] * u[a])
        costs[m] = cost
        for a in range(4):
            actions[m, a] = u[a]
        for i in range(6):
            states[m + 1, i] = nxt[i]
            st[i] = nxt[i]
    return -1
