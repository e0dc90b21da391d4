"""Pure-numpy batch kernels (fallback for the compiled fast path).

Same contract as the Cython module `_fastpath`: evaluate the reported
source-power objective and the constraint matrix for a batch of
(decision, exogenous) rows. Row layouts match `hvac_model`:

    X[s] = [T_sa, m_oa, m_sa_1..N, q_h, q_c]
    W[s] = full exogenous registry vector (1 + 3N + 20 entries)
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def objective_batch(X, W, n_zones, c_p):
    """Reported objective for each row; chiller power is exactly zero for
    rows with q_c == 0 (off switch)."""
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    n = n_zones
    T = X[:, 0]
    mvec = X[:, 2:2 + n]
    a = X[:, 2 + n]
    b = X[:, 3 + n]
    q_zone = W[:, 1:1 + n]
    t_sp = W[:, 1 + n:1 + 2 * n]
    P = 1 + 3 * n
    dP, eta_tot, rho, m_des = (W[:, P], W[:, P + 1], W[:, P + 2], W[:, P + 3])
    cf = W[:, P + 4:P + 8]
    qbr, eta_th = W[:, P + 8], W[:, P + 9]
    cb = W[:, P + 10:P + 13]
    qer, p_pump = W[:, P + 13], W[:, P + 14]
    cg = W[:, P + 15:P + 18]
    ael, ang = W[:, P + 18], W[:, P + 19]

    m = mvec.sum(axis=1)
    u = m / m_des
    f_pl = cf[:, 0] + u * (cf[:, 1] + u * (cf[:, 2] + u * cf[:, 3]))
    p_fan = dP / (eta_tot * rho) * m_des * f_pl

    q_b = q_zone.sum(axis=1) + c_p * (mvec * t_sp).sum(axis=1) - c_p * m * T + a
    r = q_b / qbr
    eta_eff = cb[:, 0] + r * (cb[:, 1] + r * cb[:, 2])
    p_boiler = q_b / (eta_th * eta_eff)

    p_chiller = cg[:, 0] * qer + cg[:, 1] * b + cg[:, 2] * b * b / qer + p_pump
    p_chiller = np.where(b == 0.0, 0.0, p_chiller)
    return ael * (p_fan + p_chiller) + ang * p_boiler


def constraints_batch(X, W, n_zones, c_p, flow_floor):
    """Constraint matrix, one ordered h-row per batch row (h <= 0 feasible)."""
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    n = n_zones
    s = X.shape[0]
    T = X[:, 0]
    o = X[:, 1]
    mvec = X[:, 2:2 + n]
    a = X[:, 2 + n]
    b = X[:, 3 + n]
    t_oa = W[:, 0]
    q_zone = W[:, 1:1 + n]
    t_sp = W[:, 1 + n:1 + 2 * n]
    v_min = W[:, 1 + 2 * n:1 + 3 * n]
    P = 1 + 3 * n
    m_des = W[:, P + 3]
    qbr = W[:, P + 8]
    qer = W[:, P + 13]

    m = mvec.sum(axis=1)
    s_t = (mvec * t_sp).sum(axis=1)
    q_b = q_zone.sum(axis=1) + c_p * s_t - c_p * m * T + a
    q_ahu = c_p * (m * T - s_t + o * s_t / m - o * t_oa)

    H = np.empty((s, 14 + 4 * n))
    H[:, 0] = 12.0 - T
    H[:, 1] = T - 37.0
    H[:, 2] = v_min.sum(axis=1) - o
    H[:, 3] = o - m_des
    H[:, 4] = o - m
    H[:, 5] = m - m_des
    H[:, 6:6 + n] = flow_floor - mvec
    H[:, 6 + n:6 + 2 * n] = m[:, None] * v_min - mvec * o[:, None]
    H[:, 6 + 2 * n:6 + 3 * n] = c_p * mvec * (T[:, None] - t_sp) - q_zone
    H[:, 6 + 3 * n:6 + 4 * n] = q_zone - c_p * mvec * (37.0 - t_sp)
    k = 6 + 4 * n
    H[:, k] = -a
    H[:, k + 1] = a - qbr
    H[:, k + 2] = -b
    H[:, k + 3] = b - qer
    H[:, k + 4] = -q_b
    H[:, k + 5] = q_b - qbr
    bal = a - b - q_ahu
    H[:, k + 6] = bal
    H[:, k + 7] = -bal
    return H
