"""Single-duct AHU + VAV-with-reheat system model.

Encodes the equipment performance curves, the air-loop balances, the
inequality-constraint vector h(x, w) and the source-energy objective
J(x, w), together with analytic first and second derivatives in both the
decision variables x and the exogenous vector w.

Decision vector (m = N + 4 entries)::

    x = [T_sa, m_oa, m_sa_1 .. m_sa_N, q_h, q_c]

where q_h >= 0 and q_c >= 0 split the AHU coil duty: q_h - q_c equals the
AHU thermal power, and simultaneous heating+cooling is suboptimal so an
optimizer recovers the max(0, +/-Q_ahu) semantics of the physical coils.

Exogenous vector (p = 1 + 3N + 20 entries)::

    w = [T_oa,
         Q_zone_1..N, T_sp_1..N, m_oa_min_1..N,
         delta_P, eta_tot, rho_air, m_design, c_f_1..4,
         Q_b_rated, eta_thermal, c_b_1..3,
         Q_e_rated, P_pump, c_g_1..3,
         alpha_el, alpha_ng]

c_p (a physical constant of air), the flow floor and the zone count are
deliberately not exposed as uncertain coordinates.

All quantities are SI: watts, kg/s, degrees Celsius.  Rated values quoted
in J/hr convert at exactly 1 J/hr = 1/3600 W.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateFlowError, InvalidCurveError

J_PER_HR = 1.0 / 3600.0  # watts per (joule/hour)


# ---------------------------------------------------------------------------
# parameters and input containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HvacParameters:
    """Equipment constants. Defaults are the nominal small-office values."""

    zone_count: int = 5
    c_p: float = 1005.0                      # J/(kg K)
    # fan
    delta_P: float = 1000.0                  # Pa
    eta_tot: float = 0.7
    rho_air: float = 1.225                   # kg/m^3
    m_design: float = 2.98                   # kg/s
    c_f: tuple = (0.3507, 0.3085, -0.5413, 0.8719)
    # boiler
    Q_b_rated: float = 1.09e8 * J_PER_HR     # W
    eta_thermal: float = 0.8
    c_b: tuple = (0.97, 0.0633, -0.0333)
    # chiller
    Q_e_rated: float = 1.47e8 * J_PER_HR     # W
    P_pump: float = 1.8e6 * J_PER_HR         # W
    c_g: tuple = (0.03303, 0.6852, 0.2818)
    # source conversion factors
    alpha_el: float = 3.167
    alpha_ng: float = 1.084
    # numerical guard on the 1/m_sa terms
    flow_floor: float = 1e-3                 # kg/s

    def __post_init__(self):
        if self.zone_count < 1:
            raise ValueError("zone_count must be >= 1")
        for name in ("c_p", "delta_P", "rho_air", "m_design",
                     "Q_b_rated", "Q_e_rated", "P_pump", "flow_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 < self.eta_tot <= 1.0):
            raise ValueError("eta_tot must be in (0, 1]")
        if not (0.0 < self.eta_thermal <= 1.0):
            raise ValueError("eta_thermal must be in (0, 1]")
        if len(self.c_f) != 4 or len(self.c_b) != 3 or len(self.c_g) != 3:
            raise ValueError("curve coefficient lengths must be 4/3/3")
        object.__setattr__(self, "c_f", tuple(float(c) for c in self.c_f))
        object.__setattr__(self, "c_b", tuple(float(c) for c in self.c_b))
        object.__setattr__(self, "c_g", tuple(float(c) for c in self.c_g))


_PARAM_FILE_KEYS = (
    "zone_count", "c_p", "delta_P", "eta_tot", "rho_air", "m_design", "c_f",
    "Q_b_rated", "eta_thermal", "c_b", "Q_e_rated", "P_pump", "c_g",
    "alpha_el", "alpha_ng", "flow_floor",
)


def load_parameters(path) -> HvacParameters:
    """Read a flat JSON parameter file; absent keys keep nominal defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    unknown = set(raw) - set(_PARAM_FILE_KEYS)
    if unknown:
        raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        if key in ("c_f", "c_b", "c_g"):
            kwargs[key] = tuple(float(v) for v in value)
        elif key == "zone_count":
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    return HvacParameters(**kwargs)


def dump_parameters(params: HvacParameters) -> dict:
    d = {k: getattr(params, k) for k in _PARAM_FILE_KEYS}
    for k in ("c_f", "c_b", "c_g"):
        d[k] = list(d[k])
    return d


@dataclass(frozen=True)
class ZoneInputs:
    """Per-zone hourly inputs. Q_zone > 0 means the zone needs heat."""

    q_zone: np.ndarray    # W
    t_sp: np.ndarray      # degC
    m_oa_min: np.ndarray  # kg/s

    def __post_init__(self):
        object.__setattr__(self, "q_zone", np.asarray(self.q_zone, dtype=float))
        object.__setattr__(self, "t_sp", np.asarray(self.t_sp, dtype=float))
        object.__setattr__(self, "m_oa_min", np.asarray(self.m_oa_min, dtype=float))
        n = self.q_zone.size
        if self.t_sp.size != n or self.m_oa_min.size != n:
            raise ValueError("zone input arrays must share one length")
        if np.any(self.m_oa_min < 0):
            raise ValueError("m_oa_min must be non-negative")

    @property
    def count(self) -> int:
        return self.q_zone.size


# registry parameter attribute layout: (attribute, component index or None)
_PARAM_REGISTRY = (
    ("delta_P", None), ("eta_tot", None), ("rho_air", None), ("m_design", None),
    ("c_f", 0), ("c_f", 1), ("c_f", 2), ("c_f", 3),
    ("Q_b_rated", None), ("eta_thermal", None),
    ("c_b", 0), ("c_b", 1), ("c_b", 2),
    ("Q_e_rated", None), ("P_pump", None),
    ("c_g", 0), ("c_g", 1), ("c_g", 2),
    ("alpha_el", None), ("alpha_ng", None),
)


@dataclass(frozen=True)
class ExogenousVector:
    """Labeled flat view of the exogenous inputs and model parameters."""

    t_oa: float
    zones: ZoneInputs
    params: HvacParameters

    def __post_init__(self):
        if self.zones.count != self.params.zone_count:
            raise ValueError("zone input length does not match zone_count")
        if self.zones.m_oa_min.sum() > self.params.m_design:
            # not an error at construction: the hour is merely infeasible,
            # which the solver reports; constraints still evaluate.
            pass

    @property
    def dim(self) -> int:
        return 1 + 3 * self.zones.count + len(_PARAM_REGISTRY)

    def labels(self) -> list:
        n = self.zones.count
        lab = ["T_oa"]
        lab += [f"Q_zone_{i + 1}" for i in range(n)]
        lab += [f"T_sp_{i + 1}" for i in range(n)]
        lab += [f"m_oa_min_{i + 1}" for i in range(n)]
        for attr, comp in _PARAM_REGISTRY:
            lab.append(attr if comp is None else f"{attr}_{comp + 1}")
        return lab

    def to_vector(self) -> np.ndarray:
        p = self.params
        tail = []
        for attr, comp in _PARAM_REGISTRY:
            v = getattr(p, attr)
            tail.append(v if comp is None else v[comp])
        return np.concatenate([
            [self.t_oa], self.zones.q_zone, self.zones.t_sp,
            self.zones.m_oa_min, tail,
        ])

    def with_vector(self, vec) -> "ExogenousVector":
        """Rebuild a structured vector from a flat one (bit-exact)."""
        vec = np.asarray(vec, dtype=float)
        n = self.zones.count
        if vec.size != self.dim:
            raise ValueError(f"expected {self.dim} entries, got {vec.size}")
        zones = ZoneInputs(q_zone=vec[1:1 + n].copy(),
                           t_sp=vec[1 + n:1 + 2 * n].copy(),
                           m_oa_min=vec[1 + 2 * n:1 + 3 * n].copy())
        kwargs = {}
        tail = vec[1 + 3 * n:]
        seq_parts = {}
        for (attr, comp), value in zip(_PARAM_REGISTRY, tail):
            if comp is None:
                kwargs[attr] = float(value)
            else:
                seq_parts.setdefault(attr, {})[comp] = float(value)
        for attr, parts in seq_parts.items():
            kwargs[attr] = tuple(parts[i] for i in range(len(parts)))
        return ExogenousVector(t_oa=float(vec[0]), zones=zones,
                               params=replace(self.params, **kwargs))

    def index(self, label: str) -> int:
        labels = self.labels()
        try:
            return labels.index(label)
        except ValueError:
            raise KeyError(f"unknown exogenous label {label!r}") from None


def make_exogenous(t_oa, q_zone, t_sp, m_oa_min,
                   params: HvacParameters | None = None) -> ExogenousVector:
    params = params or HvacParameters()
    return ExogenousVector(
        t_oa=float(t_oa),
        zones=ZoneInputs(q_zone=q_zone, t_sp=t_sp, m_oa_min=m_oa_min),
        params=params,
    )


# ---------------------------------------------------------------------------
# decision vector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecisionVector:
    """Reduced decision variables: the recirculation flow and per-zone
    discharge temperatures are eliminated by the duct balances."""

    t_sa: float            # degC
    m_oa: float            # kg/s
    m_sa: np.ndarray       # kg/s, one per zone
    q_h: float             # W, AHU heating-coil duty
    q_c: float             # W, AHU cooling-coil duty

    def __post_init__(self):
        object.__setattr__(self, "m_sa", np.asarray(self.m_sa, dtype=float))

    @property
    def dim(self) -> int:
        return self.m_sa.size + 4

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.t_sa, self.m_oa], self.m_sa,
                               [self.q_h, self.q_c]])

    @staticmethod
    def from_vector(vec) -> "DecisionVector":
        vec = np.asarray(vec, dtype=float)
        return DecisionVector(t_sa=float(vec[0]), m_oa=float(vec[1]),
                              m_sa=vec[2:-2].copy(),
                              q_h=float(vec[-2]), q_c=float(vec[-1]))


def decision_dim(n_zones: int) -> int:
    return n_zones + 4


def constraint_count(n_zones: int) -> int:
    return 14 + 4 * n_zones


def constraint_labels(n_zones: int) -> list:
    lab = ["T_sa_min", "T_sa_max", "m_oa_min_total", "m_oa_max",
           "m_ra_nonneg", "m_sa_total_max"]
    lab += [f"m_sa_floor_{i + 1}" for i in range(n_zones)]
    lab += [f"ventilation_{i + 1}" for i in range(n_zones)]
    lab += [f"T_da_low_{i + 1}" for i in range(n_zones)]
    lab += [f"T_da_high_{i + 1}" for i in range(n_zones)]
    lab += ["q_h_nonneg", "q_h_max", "q_c_nonneg", "q_c_max",
            "Q_b_nonneg", "Q_b_max", "ahu_balance_pos", "ahu_balance_neg"]
    return lab


# ---------------------------------------------------------------------------
# equipment curves
# ---------------------------------------------------------------------------

def fan_power(m_sa_total: float, params: HvacParameters) -> float:
    """Supply-fan electrical power at the given total flow (watts)."""
    u = m_sa_total / params.m_design
    c = params.c_f
    f_pl = c[0] + u * (c[1] + u * (c[2] + u * c[3]))
    gain = params.delta_P / (params.eta_tot * params.rho_air)
    return gain * params.m_design * f_pl


def boiler_power(q_b: float, params: HvacParameters) -> float:
    """Gas power drawn by the boiler delivering q_b watts of heat."""
    if q_b == 0.0:
        return 0.0
    r = q_b / params.Q_b_rated
    c = params.c_b
    eta_eff = c[0] + r * (c[1] + r * c[2])
    if eta_eff <= 0.0:
        raise InvalidCurveError(
            f"boiler efficiency curve non-positive at PLR={r:.4g}")
    return q_b / (params.eta_thermal * eta_eff)


def chiller_power(q_e: float, params: HvacParameters) -> float:
    """Chiller electrical power; exactly zero when the unit is off.

    Uses the expanded form f_gen * Q_e = c_g1 * Q_e_rated + c_g2 * Q_e
    + c_g3 * Q_e^2 / Q_e_rated, which removes the 1/PLR singularity; the
    standby term c_g1 * Q_e_rated + P_pump is only paid while running.
    """
    if q_e == 0.0:
        return 0.0
    c = params.c_g
    rated = params.Q_e_rated
    return c[0] * rated + c[1] * q_e + c[2] * q_e * q_e / rated + params.P_pump


def chiller_power_smooth(q_e: float, params: HvacParameters) -> float:
    """Expanded chiller curve without the off switch (the solver's view)."""
    c = params.c_g
    rated = params.Q_e_rated
    return c[0] * rated + c[1] * q_e + c[2] * q_e * q_e / rated + params.P_pump


# ---------------------------------------------------------------------------
# operating point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatingPoint:
    m_sa_total: float
    m_ra: float
    t_ra: float
    t_ma: float
    t_da: np.ndarray
    q_ahu: float
    q_reheat: np.ndarray
    q_b: float
    q_e: float
    f_flow: float
    f_pl: float
    plr_b: float
    plr_e: float
    eta_eff: float
    f_gen: float
    p_fan: float
    p_boiler: float
    p_chiller: float
    j_source: float


def evaluate(x: DecisionVector, w: ExogenousVector) -> OperatingPoint:
    """Propagate a decision vector through the air loop and equipment."""
    par = w.params
    cp = par.c_p
    m_sa = x.m_sa
    if np.any(m_sa < par.flow_floor):
        bad = int(np.argmin(m_sa - par.flow_floor))
        raise DegenerateFlowError(
            f"zone {bad + 1} supply flow {m_sa[bad]:.4g} kg/s below floor "
            f"{par.flow_floor:.4g}")
    m = float(m_sa.sum())
    t_sp = w.zones.t_sp
    q_zone = w.zones.q_zone
    t_ra = float((m_sa * t_sp).sum() / m)
    m_ra = m - x.m_oa
    t_ma = (m_ra * t_ra + x.m_oa * w.t_oa) / m
    t_da = t_sp + q_zone / (cp * m_sa)
    q_ahu = cp * m * (x.t_sa - t_ma)
    q_reheat = cp * m_sa * (t_da - x.t_sa)
    q_b = float(q_reheat.sum() + x.q_h)
    q_e = x.q_c

    u = m / par.m_design
    cf = par.c_f
    f_pl = cf[0] + u * (cf[1] + u * (cf[2] + u * cf[3]))
    p_fan = fan_power(m, par)

    plr_b = q_b / par.Q_b_rated
    cb = par.c_b
    eta_eff = cb[0] + plr_b * (cb[1] + plr_b * cb[2])
    p_boiler = boiler_power(q_b, par) if q_b != 0.0 else 0.0

    plr_e = q_e / par.Q_e_rated
    p_chiller = chiller_power(q_e, par)
    f_gen = (p_chiller - par.P_pump) / q_e if q_e != 0.0 else 0.0

    j = par.alpha_el * (p_fan + p_chiller) + par.alpha_ng * p_boiler
    return OperatingPoint(
        m_sa_total=m, m_ra=m_ra, t_ra=t_ra, t_ma=t_ma, t_da=t_da,
        q_ahu=q_ahu, q_reheat=q_reheat, q_b=q_b, q_e=q_e,
        f_flow=u, f_pl=f_pl, plr_b=plr_b, plr_e=plr_e, eta_eff=eta_eff,
        f_gen=f_gen, p_fan=p_fan, p_boiler=p_boiler, p_chiller=p_chiller,
        j_source=j,
    )


def objective(x: DecisionVector, w: ExogenousVector) -> float:
    """Source power J = alpha_el (P_fan + P_chiller) + alpha_ng P_boiler."""
    return evaluate(x, w).j_source


# ---------------------------------------------------------------------------
# flat-array core (shared with the solver and the sampling fast path)
# ---------------------------------------------------------------------------

def _unpack_x(xv: np.ndarray, n: int):
    return xv[0], xv[1], xv[2:2 + n], xv[2 + n], xv[3 + n]


def _w_param_slices(n: int):
    """Start index of the parameter tail inside the registry vector."""
    return 1 + 3 * n


def objective_flat(xv: np.ndarray, wv: np.ndarray, n: int, c_p: float,
                   smooth_chiller: bool = False) -> float:
    """Objective from flat arrays; `smooth_chiller` keeps the standby term
    at q_c = 0 (the solver's smooth surrogate)."""
    T, o, mvec, a, b = _unpack_x(xv, n)
    q_zone = wv[1:1 + n]
    t_sp = wv[1 + n:1 + 2 * n]
    P = _w_param_slices(n)
    (dP, eta_tot, rho, m_des, cf1, cf2, cf3, cf4, qbr, eta_th,
     cb1, cb2, cb3, qer, p_pump, cg1, cg2, cg3, ael, ang) = wv[P:P + 20]

    m = mvec.sum()
    u = m / m_des
    f_pl = cf1 + u * (cf2 + u * (cf3 + u * cf4))
    p_fan = dP / (eta_tot * rho) * m_des * f_pl

    q_b = q_zone.sum() + c_p * (mvec * t_sp).sum() - c_p * m * T + a
    r = q_b / qbr
    eta_eff = cb1 + r * (cb2 + r * cb3)
    p_boiler = q_b / (eta_th * eta_eff)

    if b == 0.0 and not smooth_chiller:
        p_chiller = 0.0
    else:
        p_chiller = cg1 * qer + cg2 * b + cg3 * b * b / qer + p_pump
    return ael * (p_fan + p_chiller) + ang * p_boiler


def constraints_flat(xv: np.ndarray, wv: np.ndarray, n: int,
                     c_p: float, flow_floor: float) -> np.ndarray:
    """Ordered inequality vector h(x, w), h <= 0 feasible. Always returns
    values, even at infeasible points (the solver needs them)."""
    T, o, mvec, a, b = _unpack_x(xv, n)
    t_oa = wv[0]
    q_zone = wv[1:1 + n]
    t_sp = wv[1 + n:1 + 2 * n]
    v_min = wv[1 + 2 * n:1 + 3 * n]
    P = _w_param_slices(n)
    m_des = wv[P + 3]
    qbr = wv[P + 8]
    qer = wv[P + 13]

    m = mvec.sum()
    s_t = (mvec * t_sp).sum()
    q_b = q_zone.sum() + c_p * s_t - c_p * m * T + a
    # Q_ahu = c_p (m T - S + o S / m - o T_oa)
    q_ahu = c_p * (m * T - s_t + o * s_t / m - o * t_oa)

    h = np.empty(constraint_count(n))
    h[0] = 12.0 - T
    h[1] = T - 37.0
    h[2] = v_min.sum() - o
    h[3] = o - m_des
    h[4] = o - m
    h[5] = m - m_des
    h[6:6 + n] = flow_floor - mvec
    h[6 + n:6 + 2 * n] = m * v_min - mvec * o
    h[6 + 2 * n:6 + 3 * n] = c_p * mvec * (T - t_sp) - q_zone
    h[6 + 3 * n:6 + 4 * n] = q_zone - c_p * mvec * (37.0 - t_sp)
    k = 6 + 4 * n
    h[k] = -a
    h[k + 1] = a - qbr
    h[k + 2] = -b
    h[k + 3] = b - qer
    h[k + 4] = -q_b
    h[k + 5] = q_b - qbr
    h[k + 6] = a - b - q_ahu
    h[k + 7] = -(a - b - q_ahu)
    return h


def constraints(x: DecisionVector, w: ExogenousVector) -> np.ndarray:
    return constraints_flat(x.to_vector(), w.to_vector(),
                            w.zones.count, w.params.c_p, w.params.flow_floor)


# ---------------------------------------------------------------------------
# analytic derivatives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelDerivatives:
    """Analytic derivative blocks of J and every constraint row.

    Shapes (m = N + 4 decisions, p = 3N + 21 exogenous, n = 4N + 14 rows):
    grad_x_j (m,), hess_xx_j (m, m), grad_w_j (p,), hess_xw_j (m, p),
    jac_x_h (n, m), hess_xx_h (n, m, m), jac_w_h (n, p), hess_xw_h (n, m, p).
    """

    grad_x_j: np.ndarray
    hess_xx_j: np.ndarray
    grad_w_j: np.ndarray
    hess_xw_j: np.ndarray
    jac_x_h: np.ndarray
    hess_xx_h: np.ndarray
    jac_w_h: np.ndarray
    hess_xw_h: np.ndarray


def derivatives_flat(xv: np.ndarray, wv: np.ndarray, n: int,
                     c_p: float) -> ModelDerivatives:
    """All derivative blocks at (x, w); the chiller term is the smooth
    expanded form (identical to the reported objective wherever q_c > 0)."""
    T, o, mvec, a, b = _unpack_x(xv, n)
    t_oa = wv[0]
    t_sp = wv[1 + n:1 + 2 * n]
    q_zone = wv[1:1 + n]
    v_min = wv[1 + 2 * n:1 + 3 * n]
    P = _w_param_slices(n)
    (dP, eta_tot, rho, m_des, cf1, cf2, cf3, cf4, qbr, eta_th,
     cb1, cb2, cb3, qer, p_pump, cg1, cg2, cg3, ael, ang) = wv[P:P + 20]

    mdim = n + 4
    pdim = P + 20
    iT, iO = 0, 1
    iM = slice(2, 2 + n)
    iA, iB = 2 + n, 3 + n
    jTOA = 0
    jQZ = slice(1, 1 + n)
    jTSP = slice(1 + n, 1 + 2 * n)
    jVMIN = slice(1 + 2 * n, 1 + 3 * n)
    (jDP, jETATOT, jRHO, jMDES, jCF1, jCF2, jCF3, jCF4, jQBR, jETATH,
     jCB1, jCB2, jCB3, jQER, jPPUMP, jCG1, jCG2, jCG3, jAEL,
     jANG) = range(P, P + 20)

    m = mvec.sum()
    s_t = (mvec * t_sp).sum()
    q_b = q_zone.sum() + c_p * s_t - c_p * m * T + a

    # --- boiler curve and its sensitivities ---
    r = q_b / qbr
    eta = cb1 + r * (cb2 + r * cb3)
    etap = cb2 + 2.0 * cb3 * r
    etapp = 2.0 * cb3
    p_boiler = q_b / (eta_th * eta)
    d1 = (eta - r * etap) / (eta_th * eta ** 2)          # dP_b/dQ_b
    dd1_dr = (-r * etapp * eta - 2.0 * etap * (eta - r * etap)) / (eta_th * eta ** 3)
    d2 = dd1_dr / qbr                                    # d2P_b/dQ_b^2
    dd1_dqbr = -r * d2
    dd1_detath = -d1 / eta_th
    rk = np.array([1.0, r, r * r])
    dd1_dcb = (2.0 - np.array([1.0, 2.0, 3.0])) * rk / (eta_th * eta ** 2) \
        - 2.0 * d1 * rk / eta

    # --- fan curve ---
    u = m / m_des
    f_pl = cf1 + u * (cf2 + u * (cf3 + u * cf4))
    f_plp = cf2 + u * (2.0 * cf3 + u * 3.0 * cf4)
    f_plpp = 2.0 * cf3 + 6.0 * cf4 * u
    gain = dP / (eta_tot * rho)
    p_fan = gain * m_des * f_pl
    fan1 = gain * f_plp               # dP_fan/dm_i, equal for all zones
    fan2 = gain * f_plpp / m_des      # d2P_fan/dm_i dm_j

    # --- chiller (smooth expanded form) ---
    p_chiller = cg1 * qer + cg2 * b + cg3 * b * b / qer + p_pump
    pc1 = cg2 + 2.0 * cg3 * b / qer
    pc2 = 2.0 * cg3 / qer

    # --- gradients/Hessians of Q_b ---
    gq = np.zeros(mdim)
    gq[iT] = -c_p * m
    gq[iM] = c_p * (t_sp - T)
    gq[iA] = 1.0
    Hq = np.zeros((mdim, mdim))
    Hq[iT, iM] = -c_p
    Hq[iM, iT] = -c_p

    # --- Q_ahu derivatives ---
    ga = np.zeros(mdim)
    ga[iT] = c_p * m
    ga[iO] = c_p * (s_t / m - t_oa)
    ga[iM] = c_p * (T - t_sp + o * (t_sp * m - s_t) / m ** 2)
    Ha = np.zeros((mdim, mdim))
    Ha[iT, iM] = c_p
    Ha[iM, iT] = c_p
    cross_om = c_p * (t_sp * m - s_t) / m ** 2
    Ha[iO, iM] = cross_om
    Ha[iM, iO] = cross_om
    Ha[iM, iM] = c_p * o * (2.0 * s_t / m ** 3
                            - (t_sp[:, None] + t_sp[None, :]) / m ** 2)
    gwa = np.zeros(pdim)
    gwa[jTOA] = -c_p * o
    gwa[jTSP] = -c_p * mvec * (m - o) / m
    xwa = np.zeros((mdim, pdim))
    xwa[iO, jTOA] = -c_p
    xwa[iO, jTSP] = c_p * mvec / m
    block = -c_p * (o / m ** 2) * np.outer(np.ones(n), mvec)
    block[np.arange(n), np.arange(n)] += c_p * (o / m - 1.0)
    xwa[iM, jTSP] = block

    # --- objective blocks ---
    grad_x_j = ang * d1 * gq
    grad_x_j[iM] += ael * fan1
    grad_x_j[iB] += ael * pc1

    hess_xx_j = ang * (d2 * np.outer(gq, gq) + d1 * Hq)
    hess_xx_j[iM, iM] += ael * fan2
    hess_xx_j[iB, iB] += ael * pc2

    grad_w_j = np.zeros(pdim)
    grad_w_j[jQZ] = ang * d1
    grad_w_j[jTSP] = ang * d1 * c_p * mvec
    grad_w_j[jDP] = ael * p_fan / dP
    grad_w_j[jETATOT] = -ael * p_fan / eta_tot
    grad_w_j[jRHO] = -ael * p_fan / rho
    grad_w_j[jMDES] = ael * gain * (f_pl - u * f_plp)
    grad_w_j[jCF1:jCF4 + 1] = ael * gain * m_des * np.array([1.0, u, u ** 2, u ** 3])
    grad_w_j[jQBR] = ang * r ** 2 * etap / (eta_th * eta ** 2)
    grad_w_j[jETATH] = -ang * p_boiler / eta_th
    grad_w_j[jCB1:jCB3 + 1] = -ang * (p_boiler / eta) * rk
    grad_w_j[jQER] = ael * (cg1 - cg3 * b ** 2 / qer ** 2)
    grad_w_j[jPPUMP] = ael
    grad_w_j[jCG1] = ael * qer
    grad_w_j[jCG2] = ael * b
    grad_w_j[jCG3] = ael * b ** 2 / qer
    grad_w_j[jAEL] = p_fan + p_chiller
    grad_w_j[jANG] = p_boiler

    hess_xw_j = np.zeros((mdim, pdim))
    hess_xw_j[:, jQZ] = (ang * d2) * gq[:, None]
    hess_xw_j[:, jTSP] = (ang * d2 * c_p) * np.outer(gq, mvec)
    hess_xw_j[iM, jTSP] += ang * d1 * c_p * np.eye(n)
    hess_xw_j[iM, jDP] = ael * fan1 / dP
    hess_xw_j[iM, jETATOT] = -ael * fan1 / eta_tot
    hess_xw_j[iM, jRHO] = -ael * fan1 / rho
    hess_xw_j[iM, jMDES] = -ael * gain * f_plpp * u / m_des
    hess_xw_j[iM, jCF2] = ael * gain
    hess_xw_j[iM, jCF3] = ael * gain * 2.0 * u
    hess_xw_j[iM, jCF4] = ael * gain * 3.0 * u ** 2
    hess_xw_j[:, jQBR] = ang * dd1_dqbr * gq
    hess_xw_j[:, jETATH] = ang * dd1_detath * gq
    for k in range(3):
        hess_xw_j[:, jCB1 + k] = ang * dd1_dcb[k] * gq
    hess_xw_j[iB, jQER] = -ael * 2.0 * cg3 * b / qer ** 2
    hess_xw_j[iB, jCG2] = ael
    hess_xw_j[iB, jCG3] = ael * 2.0 * b / qer
    hess_xw_j[iM, jAEL] = fan1
    hess_xw_j[iB, jAEL] = pc1
    hess_xw_j[:, jANG] = d1 * gq

    # --- constraint blocks ---
    ncon = constraint_count(n)
    jac_x_h = np.zeros((ncon, mdim))
    hess_xx_h = np.zeros((ncon, mdim, mdim))
    jac_w_h = np.zeros((ncon, pdim))
    hess_xw_h = np.zeros((ncon, mdim, pdim))
    zi = np.arange(n)

    jac_x_h[0, iT] = -1.0
    jac_x_h[1, iT] = 1.0
    jac_x_h[2, iO] = -1.0
    jac_w_h[2, jVMIN] = 1.0
    jac_x_h[3, iO] = 1.0
    jac_w_h[3, jMDES] = -1.0
    jac_x_h[4, iO] = 1.0
    jac_x_h[4, iM] = -1.0
    jac_x_h[5, iM] = 1.0
    jac_w_h[5, jMDES] = -1.0
    # flow floors
    jac_x_h[6 + zi, 2 + zi] = -1.0
    # ventilation (bilinear): h = m v_i - m_i o
    base = 6 + n
    for i in range(n):
        row = base + i
        jac_x_h[row, iM] = v_min[i]
        jac_x_h[row, 2 + i] -= o
        jac_x_h[row, iO] = -mvec[i]
        hess_xx_h[row, iO, 2 + i] = -1.0
        hess_xx_h[row, 2 + i, iO] = -1.0
        jac_w_h[row, 1 + 2 * n + i] = m
        hess_xw_h[row, iM, 1 + 2 * n + i] = 1.0
    # T_da lower bound: c_p m_i (T - T_sp_i) - Q_zone_i
    base = 6 + 2 * n
    for i in range(n):
        row = base + i
        jac_x_h[row, iT] = c_p * mvec[i]
        jac_x_h[row, 2 + i] = c_p * (T - t_sp[i])
        hess_xx_h[row, iT, 2 + i] = c_p
        hess_xx_h[row, 2 + i, iT] = c_p
        jac_w_h[row, 1 + i] = -1.0
        jac_w_h[row, 1 + n + i] = -c_p * mvec[i]
        hess_xw_h[row, 2 + i, 1 + n + i] = -c_p
    # T_da upper bound: Q_zone_i - c_p m_i (37 - T_sp_i)
    base = 6 + 3 * n
    for i in range(n):
        row = base + i
        jac_x_h[row, 2 + i] = -c_p * (37.0 - t_sp[i])
        jac_w_h[row, 1 + i] = 1.0
        jac_w_h[row, 1 + n + i] = c_p * mvec[i]
        hess_xw_h[row, 2 + i, 1 + n + i] = c_p
    k0 = 6 + 4 * n
    jac_x_h[k0, iA] = -1.0
    jac_x_h[k0 + 1, iA] = 1.0
    jac_w_h[k0 + 1, jQBR] = -1.0
    jac_x_h[k0 + 2, iB] = -1.0
    jac_x_h[k0 + 3, iB] = 1.0
    jac_w_h[k0 + 3, jQER] = -1.0
    # Q_b rows
    gwq = np.zeros(pdim)
    gwq[jQZ] = 1.0
    gwq[jTSP] = c_p * mvec
    xwq = np.zeros((mdim, pdim))
    xwq[iM, jTSP] = c_p * np.eye(n)
    jac_x_h[k0 + 4] = -gq
    hess_xx_h[k0 + 4] = -Hq
    jac_w_h[k0 + 4] = -gwq
    hess_xw_h[k0 + 4] = -xwq
    jac_x_h[k0 + 5] = gq
    hess_xx_h[k0 + 5] = Hq
    jac_w_h[k0 + 5] = gwq
    jac_w_h[k0 + 5, jQBR] -= 1.0
    hess_xw_h[k0 + 5] = xwq
    # AHU balance rows: +/- (q_h - q_c - Q_ahu)
    gbal = np.zeros(mdim)
    gbal[iA] = 1.0
    gbal[iB] = -1.0
    jac_x_h[k0 + 6] = gbal - ga
    hess_xx_h[k0 + 6] = -Ha
    jac_w_h[k0 + 6] = -gwa
    hess_xw_h[k0 + 6] = -xwa
    jac_x_h[k0 + 7] = -(gbal - ga)
    hess_xx_h[k0 + 7] = Ha
    jac_w_h[k0 + 7] = gwa
    hess_xw_h[k0 + 7] = xwa

    return ModelDerivatives(
        grad_x_j=grad_x_j, hess_xx_j=hess_xx_j, grad_w_j=grad_w_j,
        hess_xw_j=hess_xw_j, jac_x_h=jac_x_h, hess_xx_h=hess_xx_h,
        jac_w_h=jac_w_h, hess_xw_h=hess_xw_h,
    )


def derivatives(x: DecisionVector, w: ExogenousVector) -> ModelDerivatives:
    return derivatives_flat(x.to_vector(), w.to_vector(),
                            w.zones.count, w.params.c_p)


def first_order_flat(xv: np.ndarray, wv: np.ndarray, n: int, c_p: float,
                     flow_floor: float):
    """Cheap solver path: (J_smooth, grad_x J, h, jac_x h) only.

    Values agree with `objective_flat(smooth_chiller=True)`,
    `constraints_flat` and the matching `derivatives_flat` blocks.
    """
    T, o, mvec, a, b = _unpack_x(xv, n)
    t_oa = wv[0]
    q_zone = wv[1:1 + n]
    t_sp = wv[1 + n:1 + 2 * n]
    v_min = wv[1 + 2 * n:1 + 3 * n]
    P = _w_param_slices(n)
    (dP, eta_tot, rho, m_des, cf1, cf2, cf3, cf4, qbr, eta_th,
     cb1, cb2, cb3, qer, p_pump, cg1, cg2, cg3, ael, ang) = wv[P:P + 20]
    mdim = n + 4
    iM = slice(2, 2 + n)
    iA, iB = 2 + n, 3 + n

    m = mvec.sum()
    s_t = (mvec * t_sp).sum()
    q_b = q_zone.sum() + c_p * s_t - c_p * m * T + a

    u = m / m_des
    f_pl = cf1 + u * (cf2 + u * (cf3 + u * cf4))
    f_plp = cf2 + u * (2.0 * cf3 + u * 3.0 * cf4)
    gain = dP / (eta_tot * rho)
    p_fan = gain * m_des * f_pl
    fan1 = gain * f_plp

    r = q_b / qbr
    eta = cb1 + r * (cb2 + r * cb3)
    etap = cb2 + 2.0 * cb3 * r
    p_boiler = q_b / (eta_th * eta)
    d1 = (eta - r * etap) / (eta_th * eta ** 2)

    p_chiller = cg1 * qer + cg2 * b + cg3 * b * b / qer + p_pump
    pc1 = cg2 + 2.0 * cg3 * b / qer

    j = ael * (p_fan + p_chiller) + ang * p_boiler

    gq = np.zeros(mdim)
    gq[0] = -c_p * m
    gq[iM] = c_p * (t_sp - T)
    gq[iA] = 1.0
    grad = ang * d1 * gq
    grad[iM] += ael * fan1
    grad[iB] += ael * pc1

    q_ahu = c_p * (m * T - s_t + o * s_t / m - o * t_oa)
    ncon = constraint_count(n)
    h = np.empty(ncon)
    h[0] = 12.0 - T
    h[1] = T - 37.0
    h[2] = v_min.sum() - o
    h[3] = o - m_des
    h[4] = o - m
    h[5] = m - m_des
    h[6:6 + n] = flow_floor - mvec
    h[6 + n:6 + 2 * n] = m * v_min - mvec * o
    h[6 + 2 * n:6 + 3 * n] = c_p * mvec * (T - t_sp) - q_zone
    h[6 + 3 * n:6 + 4 * n] = q_zone - c_p * mvec * (37.0 - t_sp)
    k0 = 6 + 4 * n
    h[k0] = -a
    h[k0 + 1] = a - qbr
    h[k0 + 2] = -b
    h[k0 + 3] = b - qer
    h[k0 + 4] = -q_b
    h[k0 + 5] = q_b - qbr
    bal = a - b - q_ahu
    h[k0 + 6] = bal
    h[k0 + 7] = -bal

    jac = np.zeros((ncon, mdim))
    jac[0, 0] = -1.0
    jac[1, 0] = 1.0
    jac[2, 1] = -1.0
    jac[3, 1] = 1.0
    jac[4, 1] = 1.0
    jac[4, iM] = -1.0
    jac[5, iM] = 1.0
    zi = np.arange(n)
    jac[6 + zi, 2 + zi] = -1.0
    rows = 6 + n + zi
    jac[rows[:, None], 2 + zi[None, :]] = v_min[:, None]
    jac[rows, 2 + zi] -= o
    jac[rows, 1] = -mvec
    jac[6 + 2 * n + zi, 0] = c_p * mvec
    jac[6 + 2 * n + zi, 2 + zi] = c_p * (T - t_sp)
    jac[6 + 3 * n + zi, 2 + zi] = -c_p * (37.0 - t_sp)
    jac[k0, iA] = -1.0
    jac[k0 + 1, iA] = 1.0
    jac[k0 + 2, iB] = -1.0
    jac[k0 + 3, iB] = 1.0
    jac[k0 + 4] = -gq
    jac[k0 + 5] = gq
    ga = np.zeros(mdim)
    ga[0] = c_p * m
    ga[1] = c_p * (s_t / m - t_oa)
    ga[iM] = c_p * (T - t_sp + o * (t_sp * m - s_t) / m ** 2)
    gbal = -ga
    gbal[iA] += 1.0
    gbal[iB] -= 1.0
    jac[k0 + 6] = gbal
    jac[k0 + 7] = -gbal
    return j, grad, h, jac
