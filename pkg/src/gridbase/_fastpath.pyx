# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels for the Monte-Carlo sampling hot loop.

Mirrors `_fastpath_py` exactly; see that module for the row layouts.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def objective_batch(X, W, int n_zones, double c_p):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Xa = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Wa = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t s = Xa.shape[0]
    cdef int n = n_zones
    cdef int P = 1 + 3 * n
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(s, dtype=np.float64)
    cdef Py_ssize_t k
    cdef int i
    cdef double T, a, b, m, st, qz, u, f_pl, p_fan, q_b, r, eta_eff
    cdef double p_boiler, p_chiller
    cdef double dP, eta_tot, rho, m_des, qbr, eta_th, qer, p_pump, ael, ang
    for k in range(s):
        T = Xa[k, 0]
        a = Xa[k, 2 + n]
        b = Xa[k, 3 + n]
        m = 0.0
        st = 0.0
        qz = 0.0
        for i in range(n):
            m += Xa[k, 2 + i]
            st += Xa[k, 2 + i] * Wa[k, 1 + n + i]
            qz += Wa[k, 1 + i]
        dP = Wa[k, P]
        eta_tot = Wa[k, P + 1]
        rho = Wa[k, P + 2]
        m_des = Wa[k, P + 3]
        qbr = Wa[k, P + 8]
        eta_th = Wa[k, P + 9]
        qer = Wa[k, P + 13]
        p_pump = Wa[k, P + 14]
        ael = Wa[k, P + 18]
        ang = Wa[k, P + 19]

        u = m / m_des
        f_pl = Wa[k, P + 4] + u * (Wa[k, P + 5] + u * (Wa[k, P + 6] + u * Wa[k, P + 7]))
        p_fan = dP / (eta_tot * rho) * m_des * f_pl

        q_b = qz + c_p * st - c_p * m * T + a
        r = q_b / qbr
        eta_eff = Wa[k, P + 10] + r * (Wa[k, P + 11] + r * Wa[k, P + 12])
        p_boiler = q_b / (eta_th * eta_eff)

        if b == 0.0:
            p_chiller = 0.0
        else:
            p_chiller = Wa[k, P + 15] * qer + Wa[k, P + 16] * b \
                + Wa[k, P + 17] * b * b / qer + p_pump
        out[k] = ael * (p_fan + p_chiller) + ang * p_boiler
    return out


def constraints_batch(X, W, int n_zones, double c_p, double flow_floor):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Xa = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Wa = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t s = Xa.shape[0]
    cdef int n = n_zones
    cdef int P = 1 + 3 * n
    cdef int ncon = 14 + 4 * n
    cdef cnp.ndarray[cnp.float64_t, ndim=2] H = np.empty((s, ncon), dtype=np.float64)
    cdef Py_ssize_t k
    cdef int i, kk
    cdef double T, o, a, b, m, st, qz, vsum, q_b, q_ahu, bal
    cdef double m_des, qbr, qer, t_oa
    for k in range(s):
        T = Xa[k, 0]
        o = Xa[k, 1]
        a = Xa[k, 2 + n]
        b = Xa[k, 3 + n]
        t_oa = Wa[k, 0]
        m = 0.0
        st = 0.0
        qz = 0.0
        vsum = 0.0
        for i in range(n):
            m += Xa[k, 2 + i]
            st += Xa[k, 2 + i] * Wa[k, 1 + n + i]
            qz += Wa[k, 1 + i]
            vsum += Wa[k, 1 + 2 * n + i]
        m_des = Wa[k, P + 3]
        qbr = Wa[k, P + 8]
        qer = Wa[k, P + 13]

        q_b = qz + c_p * st - c_p * m * T + a
        q_ahu = c_p * (m * T - st + o * st / m - o * t_oa)

        H[k, 0] = 12.0 - T
        H[k, 1] = T - 37.0
        H[k, 2] = vsum - o
        H[k, 3] = o - m_des
        H[k, 4] = o - m
        H[k, 5] = m - m_des
        for i in range(n):
            H[k, 6 + i] = flow_floor - Xa[k, 2 + i]
            H[k, 6 + n + i] = m * Wa[k, 1 + 2 * n + i] - Xa[k, 2 + i] * o
            H[k, 6 + 2 * n + i] = c_p * Xa[k, 2 + i] * (T - Wa[k, 1 + n + i]) - Wa[k, 1 + i]
            H[k, 6 + 3 * n + i] = Wa[k, 1 + i] - c_p * Xa[k, 2 + i] * (37.0 - Wa[k, 1 + n + i])
        kk = 6 + 4 * n
        H[k, kk] = -a
        H[k, kk + 1] = a - qbr
        H[k, kk + 2] = -b
        H[k, kk + 3] = b - qer
        H[k, kk + 4] = -q_b
        H[k, kk + 5] = q_b - qbr
        bal = a - b - q_ahu
        H[k, kk + 6] = bal
        H[k, kk + 7] = -bal
    return H
