"""Pure-Python rollout kernels (fallback for the compiled extension).

Expression order matches safepg._speedups exactly; see that module's note on
bitwise equivalence.
"""

from __future__ import annotations

import math

GRAVITY = 9.81


def rollout_simple_mass(spring_k, damping_d, mass_m, gx, gv, x0, alpha, sigma,
                        noise, u_max, dt, states, actions, costs):
    M = noise.shape[0]
    x = float(x0[0])
    v = float(x0[1])
    a0, a1, a2 = float(alpha[0]), float(alpha[1]), float(alpha[2])
    states[0, 0] = x
    states[0, 1] = v
    for m in range(M):
        mean = 0.0
        mean += a0 * x
        mean += a1 * v
        mean += a2
        u = mean + sigma * float(noise[m, 0])
        if u > u_max:
            u = u_max
        elif u < -u_max:
            u = -u_max
        acc = (u - spring_k * x - damping_d * v) / mass_m
        xn = x + dt * v
        vn = v + dt * acc
        if not (math.isfinite(xn) and math.isfinite(vn)):
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


def rollout_cart_pole(mc, mp, length, damp, x0, alpha, sigma, noise, u_max, dt,
                      states, actions, costs):
    M = noise.shape[0]
    x, xd, th, thd = (float(x0[0]), float(x0[1]), float(x0[2]), float(x0[3]))
    a0, a1, a2, a3, a4 = (float(alpha[0]), float(alpha[1]), float(alpha[2]),
                          float(alpha[3]), float(alpha[4]))
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
        u = mean + sigma * float(noise[m, 0])
        if u > u_max:
            u = u_max
        elif u < -u_max:
            u = -u_max
        s = math.sin(th)
        c = math.cos(th)
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
        if not (math.isfinite(xn) and math.isfinite(xdn)
                and math.isfinite(thn) and math.isfinite(thdn)):
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


def rollout_quadrotor(ixx, iyy, izz, b, drag, rod, w0, x0, alpha, sigma, noise,
                      u_max, dt, states, actions, costs):
    M = noise.shape[0]
    st = [float(x0[i]) for i in range(6)]
    al = [[float(alpha[a, i]) for i in range(7)] for a in range(4)]
    for i in range(6):
        states[0, i] = st[i]
    u = [0.0, 0.0, 0.0, 0.0]
    for m in range(M):
        for a in range(4):
            mean = 0.0
            for i in range(6):
                mean += al[a][i] * st[i]
            mean += al[a][6]
            ui = mean + sigma * float(noise[m, a])
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
        nxt = [st[0] + dt * st[3],
               st[1] + dt * st[4],
               st[2] + dt * st[5],
               st[3] + dt * pdot,
               st[4] + dt * qdot,
               st[5] + dt * rdot]
        ok = True
        for i in range(6):
            if not math.isfinite(nxt[i]):
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
