"""Post-optimal sensitivity of the hourly baseline.

Around a verified KKT anchor (x0, lambda) the stationarity-and-
complementarity map

    H(x, w; lambda) = [ grad_x J + lambda^T grad_x h ;  lambda_i h_i ]

vanishes. Holding lambda fixed, first-order invariance of H under a
parameter move dw gives the primal shift dx = G+ d with G = grad_x H and
d = -grad_w H dw (G+ is the Moore-Penrose pseudoinverse, applied through
an SVD least-squares solve). The induced cost change

    K(dw) = J(x0 + G+ d, w0 + dw) - J0

is evaluated on the full nonlinear model. Analytic worst-case bounds over
the uncertainty box |dw| <= Delta come from the Hoelder inequality applied
to a finite-difference quadratic model of K; a deterministic Monte-Carlo
sweep (box samples plus sign-pattern vertices) serves as the sampled
counterpart.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import hvac_model as hm
from . import kernels, numkit
from .baseline_opt import KktPoint, SolverConfig, _x_scale
from .errors import EvaluationDomainError, RankDeficientError

# relative threshold (vs. chiller rating) below which a chiller that is
# off at the anchor is kept off at the shifted point, avoiding the
# standby-power discontinuity corrupting K for infinitesimal shifts
_CHILLER_SNAP_REL = 1e-6


@dataclass(frozen=True)
class UncertaintySpec:
    """Box uncertainty |dw| <= delta on a masked subset of coordinates."""

    mask: tuple
    alpha: float
    delta: np.ndarray      # full length p; zero outside the mask
    indices: tuple         # positions of the masked coordinates in w

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        d = np.asarray(self.delta, dtype=float)
        if np.any(d < 0):
            raise ValueError("delta must be nonnegative")
        off = np.setdiff1d(np.arange(d.size), np.asarray(self.indices, int))
        if off.size and np.any(d[off] != 0.0):
            raise ValueError("masked-out coordinates must have delta = 0")

    @property
    def masked_delta(self) -> np.ndarray:
        return self.delta[list(self.indices)]


def uncertainty_spec(w0: hm.ExogenousVector, mask, alpha: float,
                     overrides: dict | None = None) -> UncertaintySpec:
    """Build a spec with delta = alpha * |w0| on the masked coordinates.

    `mask` is a sequence of ExogenousVector labels; `overrides` maps a
    label to an explicit per-coordinate delta.
    """
    labels = w0.labels()
    idx = tuple(w0.index(lab) for lab in mask)
    wv = w0.to_vector()
    delta = np.zeros(wv.size)
    for i in idx:
        delta[i] = alpha * abs(wv[i])
    for lab, val in (overrides or {}).items():
        j = w0.index(lab)
        if j not in idx:
            raise ValueError(f"override for unmasked coordinate {lab!r}")
        delta[j] = float(val)
    return UncertaintySpec(mask=tuple(mask), alpha=float(alpha),
                           delta=delta, indices=idx)


@dataclass(frozen=True)
class SensitivityOperator:
    anchor: KktPoint
    w0: hm.ExogenousVector
    spec: UncertaintySpec
    G: np.ndarray          # (m + n) x m
    W_jac: np.ndarray      # (m + n) x p_masked
    rank_ok: bool
    shift_matrix: np.ndarray   # m x p_masked, dx = shift_matrix @ dw
    _x_scale_vec: np.ndarray


@dataclass(frozen=True)
class QuadraticModel:
    g: np.ndarray
    H_K: np.ndarray
    fd_step_used: float


@dataclass(frozen=True)
class BoundResult:
    beta: float
    method: str            # holder_half | holder_paper_literal | monte_carlo
    samples: int = 0
    argmax_dw: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


# ---------------------------------------------------------------------------
# the map H and its Jacobians
# ---------------------------------------------------------------------------

def kkt_map(xv, wv, lam, n, c_p, flow_floor) -> np.ndarray:
    """H(x, w; lambda): stationarity rows then complementarity rows."""
    d = hm.derivatives_flat(xv, wv, n, c_p)
    h = hm.constraints_flat(xv, wv, n, c_p, flow_floor)
    return np.concatenate([d.grad_x_j + lam @ d.jac_x_h, lam * h])


def _assemble_jacobians(xv, wv, lam, n, c_p, mask_idx):
    d = hm.derivatives_flat(xv, wv, n, c_p)
    hess_l = d.hess_xx_j + np.tensordot(lam, d.hess_xx_h, axes=1)
    G = np.vstack([hess_l, lam[:, None] * d.jac_x_h])
    hess_lw = d.hess_xw_j + np.tensordot(lam, d.hess_xw_h, axes=1)
    W_full = np.vstack([hess_lw, lam[:, None] * d.jac_w_h])
    return G, W_full[:, list(mask_idx)]


def build_operator(anchor: KktPoint, w0: hm.ExogenousVector,
                   spec: UncertaintySpec,
                   cfg: SolverConfig | None = None,
                   verify: bool = True) -> SensitivityOperator:
    """Assemble and check G = grad_x H and grad_w H at the anchor.

    Raises RankDeficientError when G^T G is numerically singular (the
    shift map would not be unique and the analysis is out of scope).
    """
    cfg = cfg or SolverConfig()
    n = w0.zones.count
    par = w0.params
    xv = anchor.x0.to_vector()
    wv = w0.to_vector()
    lam = np.asarray(anchor.lam, dtype=float)

    # anchor consistency: the scaled KKT residuals must already be small
    if max(anchor.stationarity_residual,
           anchor.complementarity_residual) > cfg.kkt_tol:
        raise ValueError("anchor KKT residuals exceed tolerance; "
                         "re-solve the baseline before building an operator")

    G, W_jac = _assemble_jacobians(xv, wv, lam, n, par.c_p, spec.indices)

    if verify:
        err = verify_operator_fd(anchor, w0, spec, n_probes=4, seed=0,
                                 G=G, W_jac=W_jac)
        if err > 1e-6:
            raise ValueError(
                f"analytic KKT-map Jacobians disagree with finite "
                f"differences (max relative error {err:.3e})")

    # column scaling makes the rank decision unit-free without changing
    # the least-squares minimizer (it only reparametrizes x)
    sx = _x_scale(par, n)
    rank_ok = _shift_rank_ok(xv, wv, lam, n, par, sx, cfg.act_tol)
    if not rank_ok:
        raise RankDeficientError(
            "the linearized KKT map is rank deficient at the anchor "
            "beyond its built-in cost-flat direction; the primal shift "
            "is not unique and sensitivity analysis does not apply")

    shift_matrix = _shift_map(xv, wv, lam, n, par, spec.indices, sx,
                              cfg.act_tol)
    return SensitivityOperator(
        anchor=anchor, w0=w0, spec=spec, G=G, W_jac=W_jac,
        rank_ok=rank_ok, shift_matrix=shift_matrix, _x_scale_vec=sx)


def _shift_rank_ok(xv, wv, lam, n, par, sx, act_tol) -> bool:
    """The shift is unique iff the stacked active-constraint and
    stationarity blocks have full column rank — except along the one
    cost-flat direction built into the heat split: moving AHU-coil heat
    to the zone reheat coils raises T_sa and q_h together without
    changing the boiler load or any other equipment input, so on
    heating hours the optimizer sits on a line of optima. K is
    invariant along that gauge and the shift solve picks its
    minimum-norm representative, so the gauge alone is harmless."""
    from .baseline_opt import _h_scale, _j_scale
    d = hm.derivatives_flat(xv, wv, n, par.c_p)
    h = hm.constraints_flat(xv, wv, n, par.c_p, par.flow_floor)
    sh = _h_scale(wv, n, par)
    act = np.where(np.abs(h / sh) <= act_tol)[0]
    hess_l = d.hess_xx_j + np.tensordot(lam, d.hess_xx_h, axes=1)
    M = np.vstack([
        (d.jac_x_h[act] / sh[act, None]) * sx[None, :],
        (sx[:, None] * hess_l * sx[None, :]) / _j_scale(par),
    ])
    _, sv, Vt = np.linalg.svd(M)
    null = Vt[sv <= numkit.RANK_RTOL * sv[0]] if sv.size else Vt
    if null.shape[0] == 0:
        return True
    if null.shape[0] > 1:
        return False
    gauge = np.zeros(n + 4)
    gauge[0] = 1.0
    gauge[2 + n] = par.c_p * float(np.sum(xv[2:2 + n]))
    gauge_z = gauge / sx
    gauge_z /= np.linalg.norm(gauge_z)
    return abs(null[0] @ gauge_z) > 1.0 - 1e-8


def _j_scale_of(par) -> float:
    from .baseline_opt import _j_scale
    return _j_scale(par)


def _shift_map(xv, wv, lam, n, par, mask_idx, sx, act_tol):
    """Solve the linearized KKT-map system G dx = d for every masked
    coordinate, in the weighted limit that enforces the constraint rows
    exactly.

    The complementarity rows of G say the active constraints stay
    active. Enforcing every active row exactly (the infinite-weight
    limit of the row-scaled least squares) keeps the shifted point on
    the active manifold, which is what makes K(dw) track the re-solved
    optimum to first order: the first-order cost change along any such
    shift is the envelope value sum(lambda_i dh_i/dw) dw regardless of
    the tangent component. Weakly active rows (lambda_i = 0) are
    enforced too — they only influence second order, and including them
    keeps the system determined at degenerate corners where the
    multipliers are not unique. The stationarity block then fixes any
    remaining tangent freedom in the least-squares sense.
    """
    from .baseline_opt import _h_scale, _j_scale
    d = hm.derivatives_flat(xv, wv, n, par.c_p)
    h = hm.constraints_flat(xv, wv, n, par.c_p, par.flow_floor)
    sh = _h_scale(wv, n, par)
    sj = _j_scale(par)
    idx = list(mask_idx)
    m = n + 4

    act = np.where(np.abs(h / sh) <= act_tol)[0]
    if act.size:
        A = (d.jac_x_h[act] / sh[act, None]) * sx[None, :]
        B = -(d.jac_w_h[np.ix_(act, idx)]) / sh[act, None]
        U, s, Vt = np.linalg.svd(A, full_matrices=True)
        cutoff = numkit.RANK_RTOL * (s[0] if s.size else 0.0)
        rank = int((s > cutoff).sum())
        inv_s = np.zeros(s.size)
        inv_s[:rank] = 1.0 / s[:rank]
        Zc = Vt[:rank].T @ (inv_s[:rank, None] * (U.T @ B)[:rank])
        Z = Vt[rank:].T                      # tangent basis of the manifold
    else:
        Zc = np.zeros((m, len(idx)))
        Z = np.eye(m)

    hess_l = d.hess_xx_j + np.tensordot(lam, d.hess_xx_h, axes=1)
    S = (sx[:, None] * hess_l * sx[None, :]) / sj
    hess_lw = d.hess_xw_j + np.tensordot(lam, d.hess_xw_h, axes=1)
    Ds = -(sx[:, None] * hess_lw[:, idx]) / sj
    if Z.shape[1]:
        SZ = S @ Z
        sv = np.linalg.svd(SZ, compute_uv=False)
        rcond = numkit.RANK_RTOL if sv.size and sv[0] > 0 else None
        Y, *_ = np.linalg.lstsq(SZ, Ds - S @ Zc, rcond=rcond)
        Zc = Zc + Z @ Y
    return sx[:, None] * Zc


def verify_operator_fd(anchor: KktPoint, w0: hm.ExogenousVector,
                       spec: UncertaintySpec, n_probes: int = 50,
                       seed: int = 0, G=None, W_jac=None) -> float:
    """Compare G and grad_w H against central differences of H along
    random directions; returns the worst relative error."""
    n = w0.zones.count
    par = w0.params
    xv = anchor.x0.to_vector()
    wv = w0.to_vector()
    lam = np.asarray(anchor.lam, dtype=float)
    if G is None or W_jac is None:
        G, W_jac = _assemble_jacobians(xv, wv, lam, n, par.c_p, spec.indices)

    sx = _x_scale(par, n)
    rng = np.random.default_rng(seed)
    worst = 0.0

    def H_at(x, w):
        return kkt_map(x, w, lam, n, par.c_p, par.flow_floor)

    for _ in range(n_probes):
        v = rng.standard_normal(xv.size)
        v /= np.abs(v).max()
        t = 1e-6
        dx = t * sx * v
        fd = (H_at(xv + dx, wv) - H_at(xv - dx, wv)) / (2 * t)
        ana = G @ (sx * v)
        scale = max(1.0, np.abs(ana).max())
        worst = max(worst, np.abs(fd - ana).max() / scale)

        if not spec.indices:
            continue
        u = rng.standard_normal(len(spec.indices))
        u /= np.abs(u).max()
        sw = np.maximum(1.0, np.abs(wv[list(spec.indices)]))
        dwf = np.zeros(wv.size)
        dwf[list(spec.indices)] = 1e-6 * sw * u
        fd = (H_at(xv, wv + dwf) - H_at(xv, wv - dwf)) / 2e-6
        ana = W_jac @ (sw * u)
        scale = max(1.0, np.abs(ana).max())
        worst = max(worst, np.abs(fd - ana).max() / scale)
    return float(worst)


# ---------------------------------------------------------------------------
# shift map and cost change
# ---------------------------------------------------------------------------

def predict_shift(op: SensitivityOperator, dw) -> hm.DecisionVector:
    """Primal shift dx = G+ (-grad_w H dw); linear in dw, zero at dw = 0."""
    dx = _shift_vector(op, dw)
    return hm.DecisionVector.from_vector(dx)


def _shift_vector(op: SensitivityOperator, dw) -> np.ndarray:
    dw = np.asarray(dw, dtype=float)
    if dw.size != len(op.spec.indices):
        raise ValueError(
            f"dw must have {len(op.spec.indices)} masked entries")
    if not op.rank_ok:
        raise RankDeficientError("operator was built rank deficient")
    return op.shift_matrix @ dw


def _shifted_decision(op: SensitivityOperator, dx: np.ndarray) -> np.ndarray:
    """Apply the shift with domain checks and the chiller off-snap."""
    n = op.w0.zones.count
    par = op.w0.params
    xv0 = op.anchor.x0.to_vector()
    xv = xv0 + dx
    iA, iB = 2 + n, 3 + n
    xv[iA] = max(xv[iA], 0.0)
    if xv0[iB] == 0.0 and abs(xv[iB]) <= _CHILLER_SNAP_REL * par.Q_e_rated:
        xv[iB] = 0.0
    else:
        xv[iB] = max(xv[iB], 0.0)
    if np.any(xv[2:2 + n] < par.flow_floor):
        raise EvaluationDomainError(
            "shifted zone flow fell below the flow floor; reduce alpha")
    return xv


def delta_cost(op: SensitivityOperator, w0: hm.ExogenousVector, dw) -> float:
    """K(dw) = J(x0 + G+ d, w0 + dw) - J0, on the full nonlinear model."""
    dw = np.asarray(dw, dtype=float)
    xv = _shifted_decision(op, _shift_vector(op, dw))
    wv = w0.to_vector()
    wv[list(op.spec.indices)] += dw
    n = w0.zones.count
    j1 = hm.objective_flat(xv, wv, n, w0.params.c_p)
    if not np.isfinite(j1):
        raise EvaluationDomainError(
            "objective is not finite at the shifted point; reduce alpha")
    return float(j1 - op.anchor.j0)


def signed_shift_pair(op: SensitivityOperator, w0: hm.ExogenousVector,
                      spec: UncertaintySpec | None = None) -> dict:
    """K at the deterministic +/- alpha*|w0| scenario pair."""
    spec = spec or op.spec
    wv = w0.to_vector()
    idx = list(spec.indices)
    dw = spec.delta[idx] * np.where(np.sign(wv[idx]) < 0, -1.0, 1.0)
    return {"K_plus": delta_cost(op, w0, dw),
            "K_minus": delta_cost(op, w0, -dw)}


# ---------------------------------------------------------------------------
# quadratic model and bounds
# ---------------------------------------------------------------------------

def quadratic_model(op: SensitivityOperator, w0: hm.ExogenousVector,
                    spec: UncertaintySpec | None = None,
                    fd_scale: float = 1e-4,
                    k_func=None) -> QuadraticModel:
    """Central-difference gradient and Hessian of K at dw = 0.

    Steps are fd_scale * max(1, |w0_i|) per masked coordinate. `k_func`
    replaces K (test seam for functions with known derivatives).
    """
    spec = spec or op.spec
    idx = list(spec.indices)
    w_masked = w0.to_vector()[idx]
    steps = numkit.default_fd_steps(w_masked, scale=fd_scale)
    K = k_func if k_func is not None else (lambda d: delta_cost(op, w0, d))
    origin = np.zeros(len(idx))
    g = numkit.fd_gradient(K, origin, steps)
    H = numkit.fd_hessian(K, origin, steps)
    return QuadraticModel(g=g, H_K=H, fd_step_used=float(fd_scale))


def quadratic_value(qm: QuadraticModel, dw) -> float:
    dw = np.asarray(dw, dtype=float)
    return float(qm.g @ dw + 0.5 * dw @ qm.H_K @ dw)


def holder_bound(qm: QuadraticModel, spec: UncertaintySpec,
                 method: str = "holder_half") -> BoundResult:
    """Analytic worst-case bound on the quadratic model over the box.

    holder_half:  beta = ||g||_1 ||Delta||_inf + 1/2 p sigma(H_K) ||Delta||_inf^2
    holder_paper_literal drops the 1/2 on the curvature term.
    """
    if method not in ("holder_half", "holder_paper_literal"):
        raise ValueError(f"unknown bound method {method!r}")
    d = spec.masked_delta
    p = d.size
    dinf = float(np.abs(d).max()) if p else 0.0
    sigma = numkit.spectral_norm(qm.H_K) if p else 0.0
    factor = 0.5 if method == "holder_half" else 1.0
    beta = float(np.abs(qm.g).sum() * dinf + factor * p * sigma * dinf ** 2)
    return BoundResult(beta=beta, method=method)


def sample_bound(op: SensitivityOperator, w0: hm.ExogenousVector,
                 spec: UncertaintySpec, n_samples: int, seed: int,
                 k_func=None) -> BoundResult:
    """Sampled worst case of |K| over the box: every sign-pattern vertex
    (capped at 2^12) plus uniform interior draws; deterministic in seed."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    idx = list(spec.indices)
    p = len(idx)
    d = spec.masked_delta

    n_sign = min(p, 12)
    vertices = np.empty((2 ** n_sign, p))
    vertices[:, :] = d[None, :]
    for row, signs in enumerate(itertools.product((1.0, -1.0), repeat=n_sign)):
        vertices[row, :n_sign] = np.asarray(signs) * d[:n_sign]

    rng = np.random.default_rng(seed)
    n_draws = max(0, n_samples - vertices.shape[0])
    draws = rng.uniform(-1.0, 1.0, size=(n_draws, p)) * d[None, :]
    dW = np.vstack([vertices, draws])

    if k_func is not None:
        kvals = np.array([k_func(dw) for dw in dW])
        skipped = 0
    else:
        kvals, skipped = _k_batch(op, w0, dW)
    total = dW.shape[0]
    if skipped > 0.1 * total:
        raise EvaluationDomainError(
            f"{skipped}/{total} samples left the model domain; reduce alpha")

    best = int(np.nanargmax(np.abs(kvals)))
    argmax_dw = dW[best].copy()
    beta = (abs(float(kvals[best])) if k_func is not None
            else abs(delta_cost(op, w0, argmax_dw)))
    return BoundResult(beta=beta, method="monte_carlo", samples=total,
                       argmax_dw=argmax_dw, seed=seed)


def _k_batch(op: SensitivityOperator, w0: hm.ExogenousVector,
             dW: np.ndarray):
    """Evaluate K over many dw rows through the batch kernels."""
    n = w0.zones.count
    par = w0.params
    xv0 = op.anchor.x0.to_vector()
    wv0 = w0.to_vector()
    idx = list(op.spec.indices)

    X = xv0[None, :] + dW @ op.shift_matrix.T
    W = np.tile(wv0, (dW.shape[0], 1))
    W[:, idx] += dW

    iA, iB = 2 + n, 3 + n
    X[:, iA] = np.maximum(X[:, iA], 0.0)
    if xv0[iB] == 0.0:
        snap = np.abs(X[:, iB]) <= _CHILLER_SNAP_REL * par.Q_e_rated
        X[:, iB] = np.where(snap, 0.0, np.maximum(X[:, iB], 0.0))
    else:
        X[:, iB] = np.maximum(X[:, iB], 0.0)

    ok = (X[:, 2:2 + n] >= par.flow_floor).all(axis=1)
    kvals = np.full(dW.shape[0], np.nan)
    if ok.any():
        j = kernels.objective_batch(X[ok], W[ok], n, par.c_p)
        kvals[ok] = j - op.anchor.j0
    return kvals, int((~ok).sum())


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def sensitivity_report(op: SensitivityOperator, w0: hm.ExogenousVector,
                       spec: UncertaintySpec,
                       n_samples: int = 10000, seed: int = 0) -> dict:
    """JSON-ready sensitivity summary at one anchor."""
    from . import __version__
    qm = quadratic_model(op, w0, spec)
    b_half = holder_bound(qm, spec, "holder_half")
    b_lit = holder_bound(qm, spec, "holder_paper_literal")
    b_mc = sample_bound(op, w0, spec, n_samples, seed)
    pair = signed_shift_pair(op, w0, spec)
    report = {
        "version": __version__,
        "anchor": {
            "J0_W": op.anchor.j0,
            "stationarity_residual": op.anchor.stationarity_residual,
            "complementarity_residual": op.anchor.complementarity_residual,
            "feasibility_violation": op.anchor.feasibility_violation,
            "strict_complementarity_ok": op.anchor.strict_complementarity_ok,
        },
        "mask": list(spec.mask),
        "alpha": spec.alpha,
        "Delta": list(spec.masked_delta),
        "gradient_K": list(qm.g),
        "spectral_norm_H_K": numkit.spectral_norm(qm.H_K),
        "beta": {
            "holder_half": b_half.beta,
            "holder_paper_literal": b_lit.beta,
            "monte_carlo": b_mc.beta,
        },
        "monte_carlo": {
            "samples": b_mc.samples,
            "seed": b_mc.seed,
            "argmax_dw": list(b_mc.argmax_dw),
        },
        "K_plus": pair["K_plus"],
        "K_minus": pair["K_minus"],
        "rank_ok": op.rank_ok,
    }
    if not op.anchor.strict_complementarity_ok:
        report["warning"] = ("anchor is degenerate (a constraint is active "
                             "with zero multiplier); the active set may not "
                             "be stable under perturbation")
    return report
