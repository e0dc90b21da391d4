import numpy as np
import pytest

from gridbase import hvac_model as hm
from gridbase.baseline_opt import (SolverConfig, kkt_report, solve_baseline,
                                   verify_kkt)
from gridbase.errors import InfeasibleHourError


def _assert_certified(kkt, cfg=SolverConfig()):
    assert kkt.stationarity_residual <= cfg.kkt_tol
    assert kkt.complementarity_residual <= cfg.kkt_tol
    assert kkt.feasibility_violation <= cfg.feas_tol
    assert np.all(kkt.lam >= 0.0)


def test_zero_load_oracle(zero_load_hour, solve_cached, params):
    kkt = solve_cached(zero_load_hour)
    _assert_certified(kkt)
    # with no loads and T_oa at setpoint, the optimum is pure ventilation:
    # all outdoor air at the summed minima, both coils off
    j_expected = params.alpha_el * hm.fan_power(
        float(zero_load_hour.zones.m_oa_min.sum()), params)
    assert kkt.j0 == pytest.approx(j_expected, rel=1e-6)
    pt = hm.evaluate(kkt.x0, zero_load_hour)
    assert abs(pt.q_b) <= 1e-6 * params.Q_b_rated
    assert abs(pt.q_e) <= 1e-6 * params.Q_e_rated


@pytest.mark.parametrize("hour_fixture",
                         ["hot_hour", "moderate_hour", "cold_hour"])
def test_representative_hours_certify(hour_fixture, request, solve_cached):
    w = request.getfixturevalue(hour_fixture)
    kkt = solve_cached(w)
    _assert_certified(kkt)
    assert kkt.j0 > 0
    par = w.params
    assert min(kkt.x0.q_h, kkt.x0.q_c) <= 1e-6 * max(par.Q_b_rated,
                                                     par.Q_e_rated)


def test_hot_hour_regimes(hot_hour, solve_cached):
    kkt = solve_cached(hot_hour)
    # cooling hour: chiller on, boiler off, supply air at its minimum
    assert kkt.x0.q_c > 1000.0
    assert kkt.x0.q_h == 0.0
    assert kkt.x0.t_sa == pytest.approx(12.0, abs=1e-9)


def test_cold_hour_regimes(cold_hour, solve_cached):
    kkt = solve_cached(cold_hour)
    pt = hm.evaluate(kkt.x0, cold_hour)
    assert pt.q_b > 1000.0       # boiler on
    assert pt.q_e == 0.0         # chiller off


def test_moderate_hour_economizer_interior(moderate_hour, solve_cached):
    kkt = solve_cached(moderate_hour)
    v_sum = float(moderate_hour.zones.m_oa_min.sum())
    m_design = moderate_hour.params.m_design
    assert v_sum + 1e-6 < kkt.x0.m_oa < m_design - 1e-6


def test_local_optimality_against_feasible_probes(hot_hour, solve_cached):
    """No feasible nearby point beats the certified optimum."""
    kkt = solve_cached(hot_hour)
    par = hot_hour.params
    n = 5
    wv = hot_hour.to_vector()
    xv0 = kkt.x0.to_vector()
    rng = np.random.default_rng(0)
    t_sp = hot_hour.zones.t_sp
    q_z = hot_hour.zones.q_zone
    v_min = hot_hour.zones.m_oa_min
    tried = 0
    for _ in range(500):
        xv = xv0.copy()
        # perturb the air states, then project back onto the feasible set
        t = float(np.clip(xv[0] + rng.uniform(-1.0, 1.0), 12.0, 30.0))
        m_need = -q_z / (par.c_p * (t_sp - t))  # zone cooling floors
        mvec = np.maximum(m_need, par.flow_floor) + rng.uniform(0.0, 0.05, n)
        m = mvec.sum()
        if m > par.m_design:
            continue
        o_lo = max(v_min.sum(), m * float(np.max(v_min / mvec)))
        o = float(np.clip(xv[1] + rng.uniform(-0.2, 0.2), o_lo, m))
        xv[0], xv[1], xv[2:2 + n] = t, o, mvec
        # rebalance the coil duties for the perturbed air states
        st = float(mvec @ t_sp)
        q_ahu = par.c_p * (m * t - st + o * st / m - o * hot_hour.t_oa)
        xv[2 + n] = max(q_ahu, 0.0)
        xv[3 + n] = max(-q_ahu, 0.0)
        h = hm.constraints_flat(xv, wv, n, par.c_p, par.flow_floor)
        if h.max() > 1e-9:
            continue
        tried += 1
        j = hm.objective_flat(xv, wv, n, par.c_p)
        assert j >= kkt.j0 - 1e-6 * kkt.j0
    assert tried > 50  # the probe generator actually exercised the test


def test_multistart_deterministic(hot_hour):
    cfg = SolverConfig(rng_seed=123)
    a = solve_baseline(hot_hour, cfg)
    b = solve_baseline(hot_hour, cfg)
    assert a.j0 == b.j0
    assert np.array_equal(a.x0.to_vector(), b.x0.to_vector())
    assert np.array_equal(a.lam, b.lam)


def test_multistart_seed_insensitive_objective(hot_hour):
    j = [solve_baseline(hot_hour, SolverConfig(rng_seed=s)).j0
         for s in (0, 7, 99)]
    assert max(j) - min(j) <= 1e-8 * max(j)


def test_warm_start_accepted(hot_hour, solve_cached):
    kkt = solve_cached(hot_hour)
    again = solve_baseline(hot_hour, SolverConfig(), x_init=kkt.x0)
    assert again.j0 == pytest.approx(kkt.j0, rel=1e-10)


def test_gas_price_monotonicity(cold_hour, solve_cached):
    """A costlier-gas hour can never have a cheaper optimal baseline."""
    from dataclasses import replace
    j_prev = solve_cached(cold_hour).j0
    for a_ng in (1.3, 1.6, 2.0):
        par = replace(cold_hour.params, alpha_ng=a_ng)
        w = hm.make_exogenous(cold_hour.t_oa, cold_hour.zones.q_zone,
                              cold_hour.zones.t_sp,
                              cold_hour.zones.m_oa_min, par)
        j = solve_baseline(w).j0
        assert j >= j_prev - 1e-9 * j_prev
        j_prev = j


def test_infeasible_ventilation_raises(params):
    w = hm.make_exogenous(20.0, np.zeros(5), np.full(5, 22.0),
                          np.full(5, 0.7), params)  # 3.5 > m_design
    with pytest.raises(InfeasibleHourError):
        solve_baseline(w)


def test_infeasible_zone_load_raises(params):
    q = np.array([9.0e7, 0.0, 0.0, 0.0, 0.0])  # beyond any coil at 37 C
    w = hm.make_exogenous(20.0, q, np.full(5, 22.0), np.full(5, 0.05),
                          params)
    with pytest.raises(InfeasibleHourError):
        solve_baseline(w)


def test_verify_kkt_detects_primal_perturbation(hot_hour, solve_cached):
    kkt = solve_cached(hot_hour)
    xv = kkt.x0.to_vector().copy()
    xv[3 + 5] += 500.0  # push q_c off the optimum
    res = verify_kkt(hm.DecisionVector.from_vector(xv), kkt.lam, hot_hour)
    assert res.stationarity_residual > SolverConfig().kkt_tol


def test_verify_kkt_detects_dual_perturbation(hot_hour, solve_cached):
    kkt = solve_cached(hot_hour)
    lam = kkt.lam.copy()
    lam[0] += 100.0
    res = verify_kkt(kkt.x0, lam, hot_hour)
    assert max(res.stationarity_residual,
               res.complementarity_residual) > SolverConfig().kkt_tol


def test_verify_kkt_rejects_wrong_multiplier_count(hot_hour, solve_cached):
    kkt = solve_cached(hot_hour)
    with pytest.raises(ValueError):
        verify_kkt(kkt.x0, kkt.lam[:-1], hot_hour)


def test_report_structure(hot_hour, solve_cached):
    kkt = solve_cached(hot_hour)
    doc = kkt_report(kkt, hot_hour)
    assert doc["J0_W"] == kkt.j0
    assert len(doc["lambda"]) == 34
    assert set(doc["residuals"]) == {"stationarity", "complementarity",
                                     "feasibility"}
    assert doc["prng"] == "PCG64"
    assert "parameters" in doc and "version" in doc


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(kkt_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(multistart_count=0)
