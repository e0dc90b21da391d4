"""Acceptance suite: end-to-end checks on the shipped synthetic day
fixtures. Each test prints one PASS/FAIL line to the terminal."""

import math
import time

import numpy as np
import pytest

from gridbase import hvac_model as hm
from gridbase import scenario as sc
from gridbase import sensitivity as sn
from gridbase.baseline_opt import SolverConfig, solve_baseline
from gridbase.cli import main as cli_main

FIXTURE_SEED = 42
FAN_MASK = ("c_f_1", "c_f_2", "c_f_3", "c_f_4")
WIDE_MASK = ("T_oa",) + FAN_MASK


@pytest.fixture(scope="module")
def days():
    return {d: sc.synth_profile(d, seed=FIXTURE_SEED) for d in sc.DAY_TYPES}


@pytest.fixture(scope="module")
def anchors(days):
    """(day, hour) -> (exogenous vector, certified KKT point, solve s)."""
    params = hm.HvacParameters()
    out = {}
    for day, prof in days.items():
        for hour in prof.hours:
            w = hm.ExogenousVector(t_oa=hour.t_oa, zones=hour.zones,
                                   params=params)
            t0 = time.perf_counter()
            kkt = solve_baseline(w)
            out[(day, hour.hour_index)] = (w, kkt, time.perf_counter() - t0)
    return out


@pytest.fixture
def announce(capsys):
    def _announce(label, ok, detail=""):
        with capsys.disabled():
            tail = f"  ({detail})" if detail else ""
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}{tail}")
    return _announce


def _operator(w, kkt, mask, alpha):
    spec = sn.uncertainty_spec(w, mask, alpha)
    return sn.build_operator(kkt, w, spec, verify=False), spec


def test_acceptance_1_coefficient_identities(announce):
    par = hm.HvacParameters()
    errs = [abs(sum(par.c_f) - 0.9898),
            abs(sum(par.c_b) - 1.0000),
            abs(sum(par.c_g) - 1.00003)]
    ok = max(errs) < 1e-12
    announce("1 equipment-curve identities at rated load", ok,
             f"max abs error {max(errs):.2e}")
    assert ok


def test_acceptance_2_baseline_solves(anchors, announce):
    cfg = SolverConfig()
    worst_res, worst_gauge, worst_time = 0.0, 0.0, 0.0
    for (day, h), (w, kkt, dt) in anchors.items():
        worst_res = max(worst_res, kkt.stationarity_residual,
                        kkt.complementarity_residual)
        assert kkt.feasibility_violation <= cfg.feas_tol
        par = w.params
        worst_gauge = max(worst_gauge, min(kkt.x0.q_h, kkt.x0.q_c)
                          / max(par.Q_b_rated, par.Q_e_rated))
        worst_time = max(worst_time, dt)
    ok = worst_res <= 1e-6 and worst_gauge <= 1e-6 and worst_time <= 5.0
    announce("2 certified baselines on all 21 fixture hours", ok,
             f"worst residual {worst_res:.2e}, worst hour {worst_time:.2f}s")
    assert ok


def test_acceptance_3_zero_load_oracle(announce):
    par = hm.HvacParameters()
    w = hm.make_exogenous(22.0, np.zeros(5), np.full(5, 22.0),
                          np.full(5, 0.12), par)
    kkt = solve_baseline(w)
    j_ref = par.alpha_el * hm.fan_power(0.60, par)
    pt = hm.evaluate(kkt.x0, w)
    ok = (abs(kkt.j0 - j_ref) <= 1e-6 * j_ref
          and abs(pt.q_b) <= 1e-6 * par.Q_b_rated
          and abs(pt.q_e) <= 1e-6 * par.Q_e_rated)
    announce("3 zero-load hour reduces to ventilation-only fan cost", ok,
             f"J0 {kkt.j0:.4f} vs {j_ref:.4f}")
    assert ok


def test_acceptance_4_derivative_fidelity(anchors, announce):
    worst = 0.0
    for (day, h), (w, kkt, _) in anchors.items():
        spec = sn.uncertainty_spec(w, WIDE_MASK, 0.01)
        worst = max(worst, sn.verify_operator_fd(kkt, w, spec,
                                                 n_probes=50, seed=h))
    ok = worst <= 1e-6
    announce("4 analytic Jacobians match finite differences", ok,
             f"max relative error {worst:.2e} over 50 probes/hour")
    assert ok


def test_acceptance_5_first_order_validity(anchors, announce):
    """K tracks the re-solved optimum at alpha = 0.001 and its error
    decays with order >= 1.5 as the box shrinks."""
    worst_rel = 0.0
    orders = []
    for mask in (("T_oa",), FAN_MASK):
        errs_by_alpha = {a: [] for a in (0.004, 0.002, 0.001)}
        noise = 0.0
        for (day, h), (w, kkt, _) in anchors.items():
            op, spec = _operator(w, kkt, mask, 0.001)
            idx = list(spec.indices)
            wv = w.to_vector()
            rng = np.random.default_rng([FIXTURE_SEED, h, len(mask)])
            for _ in range(20):
                dw = spec.masked_delta * rng.uniform(-1.0, 1.0, len(idx))
                k = sn.delta_cost(op, w, dw)
                wv1 = wv.copy()
                wv1[idx] += dw
                dj = solve_baseline(w.with_vector(wv1)).j0 - kkt.j0
                err = abs(k - dj)
                assert err <= 0.10 * abs(dj) + 1e-9 * kkt.j0
                worst_rel = max(worst_rel,
                                err / max(abs(dj), 1e-9 * kkt.j0))
            # one fixed vertex direction per hour for the order estimate
            sign = np.where(np.sign(wv[idx]) < 0, -1.0, 1.0)
            for a, errs in errs_by_alpha.items():
                dw = a * np.abs(wv[idx]) * sign
                k = sn.delta_cost(op, w, dw)
                wv1 = wv.copy()
                wv1[idx] += dw
                dj = solve_baseline(w.with_vector(wv1)).j0 - kkt.j0
                errs.append(abs(k - dj))
            noise = max(noise, 1e-9 * kkt.j0)
        # aggregate across hours so quadratic hours dominate; hours whose
        # error sits at the solver noise floor carry no rate information
        agg = {a: float(np.sum(e)) for a, e in errs_by_alpha.items()}
        if agg[0.004] > 21 * noise:
            orders.append(math.log(agg[0.004] / agg[0.001]) / math.log(4.0))
    ok = worst_rel <= 1.0 and all(o >= 1.5 for o in orders)
    announce("5 first-order validity of the predicted cost change", ok,
             f"worst |K-dJ|/|dJ| {worst_rel:.3f}, "
             f"order {min(orders) if orders else float('nan'):.2f}")
    assert ok


def test_acceptance_6_bound_dominance(anchors, announce):
    worst_q, worst_t = -np.inf, -np.inf
    rng = np.random.default_rng(FIXTURE_SEED)
    for (day, h), (w, kkt, _) in anchors.items():
        op, spec = _operator(w, kkt, WIDE_MASK, 0.05)
        qm = sn.quadratic_model(op, w, spec)
        half = sn.holder_bound(qm, spec, "holder_half").beta
        lit = sn.holder_bound(qm, spec, "holder_paper_literal").beta
        d = spec.masked_delta
        S = rng.uniform(-1.0, 1.0, (100_000, d.size)) * d
        kq = np.abs(S @ qm.g + 0.5 * np.einsum("ij,jk,ik->i", S, qm.H_K, S))
        worst_q = max(worst_q, float(kq.max()) / half - 1.0)
        assert kq.max() <= half * (1 + 1e-9)
        mc = sn.sample_bound(op, w, spec, 4096, seed=h).beta
        worst_t = max(worst_t, mc / lit - 1.0)
        assert mc <= lit * (1 + 1e-9)
    ok = worst_q <= 1e-9 and worst_t <= 1e-9
    announce("6 analytic bounds dominate sampled worst cases", ok,
             f"quadratic margin {worst_q:.2e}, true-K margin {worst_t:.2e}")
    assert ok


def test_acceptance_7_day_type_trends(anchors, days, announce):
    def max_rel(day, mask):
        vals = []
        for hour in days[day].hours:
            w, kkt, _ = anchors[(day, hour.hour_index)]
            op, spec = _operator(w, kkt, mask, 0.05)
            pair = sn.signed_shift_pair(op, w, spec)
            vals.append(max(abs(pair["K_plus"]), abs(pair["K_minus"]))
                        / kkt.j0)
        return vals

    mod = max(max_rel("moderate", ("T_oa",)))
    hot = max(max_rel("hot", ("T_oa",)))
    fan = max_rel("hot", FAN_MASK)
    ok = mod > hot and all(v < 0.01 for v in fan)
    announce("7 day-type sensitivity trends", ok,
             f"T_oa rel-K moderate {mod:.3f} > hot {hot:.3f}; "
             f"hot-day fan-mask max {max(fan):.4f} < 0.01")
    assert ok


def test_acceptance_8_run_day_determinism(tmp_path, capsys, announce):
    prof = tmp_path / "day.csv"
    sc.write_profile(sc.synth_profile("moderate", seed=FIXTURE_SEED), prof)
    blobs = []
    for tag, extra in (("a", ()), ("b", ()), ("c", ("--threads", "5")),
                       ("d", ("--threads", "1"))):
        out = tmp_path / f"{tag}.csv"
        argv = ["run-day", "--profile", str(prof), "--mask", "T_oa",
                "--alpha", "0.05", "--samples", "512",
                "--out", str(out)] + list(extra)
        code = cli_main(argv)
        capsys.readouterr()
        assert code == 0
        blobs.append(out.read_bytes())
    ok = all(b == blobs[0] for b in blobs)
    announce("8 day runs are byte-identical across reruns and threads", ok,
             f"{len(blobs)} invocations compared")
    assert ok
