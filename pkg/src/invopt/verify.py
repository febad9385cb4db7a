"""Grid and trajectory verification of a synthesized controller."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .expr import Domain, diff, evaluate, evaluate_many, lambdify
from .sim import SimConfig, lyapunov_decrease, simulate_result
from .synth import (
    HYPOTHESIS,
    INFO,
    LYAPUNOV,
    Status,
    SynthesisResult,
    sample_condition,
    value_eval,
    value_gradient,
)

PASS, FAIL, UNKNOWN = "pass", "fail", "unknown"
MANDATORY = "mandatory"

HJB_TOL = 1e-8
NONNEG_TOL = 1e-10
ORIGIN_TOL = 1e-12
STATIONARITY_TOL = 1e-8
FD_TOL = 1e-6
FD_STEP = 1e-5
LYAP_TOL = 1e-6
TERMINAL_L_TOL = 1e-8
COST_GAP_TOL = 1e-3
STRICT_MARGIN = 1e-12


@dataclass(frozen=True)
class Check:
    id: str
    description: str
    anchor: str
    status: str
    severity: str = MANDATORY
    worst_violation: float = 0.0
    witness: tuple | None = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "description": self.description,
            "anchor": self.anchor,
            "status": self.status,
            "severity": self.severity,
            "worst_violation": _jsonable(self.worst_violation),
            "witness": None if self.witness is None else [_jsonable(v) for v in self.witness],
        }
        if self.detail:
            out["detail"] = {k: _jsonable(v) for k, v in self.detail.items()}
        return out


def _jsonable(v):
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _check(id, description, anchor, ok, severity=MANDATORY, worst=0.0, witness=None, **detail) -> Check:
    if ok is None:
        status = UNKNOWN
    else:
        status = PASS if ok else FAIL
    if status != FAIL:
        witness = None
    return Check(id, description, anchor, status, severity, float(worst) + 0.0, witness, detail)


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple
    domain: Domain
    resolution: int
    seed: int
    initial_conditions: tuple = ()

    @property
    def overall(self) -> str:
        if any(c.status == FAIL and c.severity == MANDATORY for c in self.checks):
            return "fail"
        if any(c.status == FAIL and c.severity == LYAPUNOV for c in self.checks):
            return "partial"
        return "pass"

    @property
    def exit_code(self) -> int:
        return {"pass": 0, "partial": 2, "fail": 1}[self.overall]

    def get(self, check_id: str) -> Check:
        for c in self.checks:
            if c.id == check_id:
                return c
        raise KeyError(check_id)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "grid": {"domain": [list(b) for b in self.domain.bounds], "resolution": self.resolution},
            "seed": self.seed,
            "initial_conditions": [list(map(float, x)) for x in self.initial_conditions],
            "checks": [c.to_dict() for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        rows = [("check", "severity", "status", "worst", "witness")]
        for c in self.checks:
            wit = "" if c.witness is None else "(" + ", ".join(f"{v:.4g}" for v in c.witness) + ")"
            rows.append((c.id, c.severity, c.status, f"{c.worst_violation:.3g}", wit))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        lines.append(f"overall: {self.overall}")
        return "\n".join(lines)


# --------------------------------------------------------------------------
# helpers


def _odd(resolution: int) -> int:
    return resolution if resolution % 2 else resolution + 1


def _worst(scores, pts):
    i = int(np.nanargmax(scores))
    return float(scores[i]), tuple(float(v) for v in pts[:, i])


def trajectory_initial_conditions(domain: Domain, seed: int, n_random: int = 8) -> np.ndarray:
    """Corner-type points plus ``n_random`` seeded uniform points, shape ``(n, 16)``.

    In 2-D the four corners are joined by the four edge midpoints.
    """
    corners = domain.corners()
    if domain.dim == 2:
        (l1, h1), (l2, h2) = domain.bounds
        mids = np.array([[l1, 0.0], [h1, 0.0], [0.0, l2], [0.0, h2]]).T
        corners = np.concatenate([corners, mids], axis=1)
    rng = np.random.default_rng(seed)
    return np.concatenate([corners, domain.sample(n_random, rng)], axis=1)


# --------------------------------------------------------------------------
# Hessian region


@dataclass(frozen=True)
class HessianRegion:
    """Largest origin-centred box on which all leading principal minors are positive."""

    box: Domain | None
    half_widths: tuple
    fraction_positive: float

    @property
    def empty(self) -> bool:
        return self.box is None


def _hessian_exprs(V, n: int):
    grad = value_gradient(V, n)
    return [[diff(grad[i], j + 1, strict=False) for j in range(n)] for i in range(n)]


def _hessian_fd(V, pts, h=1e-4):
    n = pts.shape[0]
    H = np.zeros((n, n) + pts.shape[1:])
    for i in range(n):
        for j in range(n):
            ei = np.zeros((n, 1)); ei[i] = h
            ej = np.zeros((n, 1)); ej[j] = h
            H[i, j] = (value_eval(V, pts + ei + ej) - value_eval(V, pts + ei - ej)
                       - value_eval(V, pts - ei + ej) + value_eval(V, pts - ei - ej)) / (4 * h * h)
    return H


def _leading_minors(H) -> np.ndarray:
    n = H.shape[0]
    M = np.moveaxis(H, (0, 1), (-2, -1))
    return np.stack([np.linalg.det(M[..., :k, :k]) for k in range(1, n + 1)])


def hessian_pd_region(V, domain: Domain, resolution: int = 41) -> HessianRegion:
    """Sample the Hessian minors of ``V`` and find the best symmetric box.

    The box is the maximum-volume ``prod [-w_i, w_i]`` (``w_i`` on grid
    levels) containing no grid point where some leading minor is
    ``<= 1e-12``.  Uses a finite-difference Hessian when ``V`` cannot be
    differentiated twice symbolically.
    """
    n = domain.dim
    res = _odd(resolution)
    axes = domain.axes(res)
    # force an exact 0 at the centre level of each axis that straddles it
    for a, (lo, hi) in zip(axes, domain.bounds):
        if lo < 0 < hi:
            a[np.argmin(np.abs(a))] = 0.0
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh])
    try:
        H = np.array([[evaluate_many(e, pts) for e in row] for row in _hessian_exprs(V, n)])
    except Exception:
        H = _hessian_fd(V, pts)
    minors = _leading_minors(H)
    good = np.all(minors > STRICT_MARGIN, axis=0)
    centre = [int(np.argmin(np.abs(a))) for a in axes]
    if not good[np.ravel_multi_index(centre, [res] * n)]:
        return HessianRegion(None, tuple(0.0 for _ in range(n)), float(good.mean()))
    # offsets of bad points in index units, per side (positive and negative directions)
    idx = np.array(np.unravel_index(np.nonzero(~good)[0], [res] * n))
    off = np.abs(idx - np.array(centre)[:, None])
    limits = [min(c, res - 1 - c) for c in centre]
    best, best_k = -1.0, None
    ranges = [range(limits[i] + 1) for i in range(n - 1)]
    for ks in np.ndindex(*[len(r) for r in ranges]) if n > 1 else [()]:
        mask = np.all(off[: n - 1] <= np.array(ks)[:, None], axis=0) if n > 1 else np.ones(off.shape[1], bool)
        k_last = limits[-1] if not mask.any() else min(limits[-1], int(off[-1, mask].min()) - 1)
        if k_last < 0:
            continue
        k = list(ks) + [k_last]
        widths = [min(abs(axes[i][centre[i] + k[i]]), abs(axes[i][centre[i] - k[i]])) for i in range(n)]
        vol = float(np.prod(widths))
        if vol > best:
            best, best_k = vol, widths
    if best_k is None or best <= 0.0:
        return HessianRegion(None, tuple(0.0 for _ in range(n)), float(good.mean()))
    box = Domain(tuple((-w, w) for w in best_k))
    return HessianRegion(box, tuple(best_k), float(good.mean()))


# --------------------------------------------------------------------------
# radial unboundedness


def _fibonacci_directions(n: int, count: int) -> np.ndarray:
    if n == 2:
        t = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
        return np.stack([np.cos(t), np.sin(t)])
    i = np.arange(count) + 0.5
    phi = np.arccos(1 - 2 * i / count)
    theta = np.pi * (1 + 5 ** 0.5) * i
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])


def radial_unboundedness(V, n: int, scale: float, zero_tol: float = 1e-8):
    """Search for evidence that ``V`` does not grow without bound.

    Looks for a zero of ``V`` away from the origin (grid search on a box of
    half-width ``max(8 scale, 16)`` refined by BFGS) and for shell minima
    that fail to increase with the radius.  Returns
    ``(ok, witness, detail)``.
    """
    half = max(8.0 * scale, 16.0)
    res = 161 if n == 2 else 61
    box = Domain.cube(n, half)
    pts = box.grid(res)
    vals = value_eval(V, pts)
    norms = np.linalg.norm(pts, axis=0)
    step = 2 * half / (res - 1)
    away = norms > 2.0 * step
    grad = [lambdify(g) for g in value_gradient(V, n)]

    def fun(z):
        return float(value_eval(V, z.reshape(-1, 1))[0])

    def jac(z):
        return np.array([float(np.broadcast_to(g(*z, *([0.0] * (3 - n))), ())) for g in grad])

    order = np.argsort(np.where(away, vals, np.inf), kind="stable")[:12]
    zeros = []
    for i in order:
        if not np.isfinite(vals[i]):
            continue
        sol = minimize(fun, pts[:, i], jac=jac, method="BFGS", options={"gtol": 1e-12, "maxiter": 500})
        z = sol.x
        if abs(fun(z)) <= zero_tol and np.linalg.norm(z) > 0.5:
            zeros.append(tuple(float(v) for v in z))
    shells = scale * 2.0 ** np.arange(0, 5)
    dirs = _fibonacci_directions(n, 720 if n == 2 else 2000)
    shell_min = [float(np.min(value_eval(V, rho * dirs))) for rho in shells]
    monotone = all(b > a * (1 + 1e-9) for a, b in zip(shell_min, shell_min[1:]))
    detail = {"shell_radii": [float(s) for s in shells], "shell_min": shell_min, "zeros_found": len(zeros)}
    if zeros:
        zeros.sort(key=lambda z: (round(float(np.linalg.norm(z)), 6), z))
        return False, zeros[0], detail
    if not monotone:
        k = int(np.argmin(np.diff(shell_min)))
        rho = shells[k + 1]
        j = int(np.argmin(value_eval(V, rho * dirs)))
        return False, tuple(float(v) for v in rho * dirs[:, j]), detail
    return True, None, detail


# --------------------------------------------------------------------------
# main entry


def verify_all(sys, result: SynthesisResult, domain: Domain, resolution: int | None = None, seed: int = 0,
               cfg: SimConfig | None = None, n_random: int = 8) -> VerificationReport:
    """Run every numerical check on ``domain`` and collect a report."""
    n = result.order
    if domain.dim != n:
        raise ValueError(f"domain has {domain.dim} axes, system has {n} states")
    if not np.all(domain.contains(np.zeros((n, 1)))):
        raise ValueError("domain must contain the origin")
    resolution = resolution or (41 if n == 2 else 21)
    cfg = cfg or SimConfig(dt=1e-2, t_max=30.0)
    rng = np.random.default_rng(seed)
    pts = domain.grid(resolution)
    checks = []
    r = sys.r

    Lvals = evaluate_many(result.L, pts)
    uvals = evaluate_many(result.u, pts)
    Vvals = value_eval(result.V, pts)
    scale_L = 1.0 + np.abs(Lvals)

    # (1) HJB residual
    H = evaluate_many(result.hjb_residual_expr(), pts)
    score = np.abs(H) / scale_L
    worst, wit = _worst(score, pts)
    checks.append(_check("hjb_residual", "|H(x, u(x), grad V(x))| <= 1e-8 (1 + |L|)", "HJB equation",
                         worst <= HJB_TOL, worst=worst, witness=wit))

    # (2) running cost
    worst, wit = _worst(-Lvals, pts)
    checks.append(_check("running_cost_nonneg", "L(x, u(x)) >= -1e-10", "running cost",
                          worst <= NONNEG_TOL, worst=max(worst, 0.0), witness=wit))

    # (3) value function
    worst, wit = _worst(-Vvals, pts)
    checks.append(_check("value_nonneg", "V(x) >= -1e-10", "value function",
                         worst <= NONNEG_TOL, worst=max(worst, 0.0), witness=wit))
    origin = np.zeros((n, 1))
    at0 = max(abs(value_eval(result.V, origin)[0]), abs(evaluate(result.u, [0.0] * n)),
              abs(evaluate(result.L_state, [0.0] * n)))
    checks.append(_check("boundary", "|V(0)|, |u(0)|, |L_state(0)| <= 1e-12", "boundary condition V(0) = 0",
                         at0 <= ORIGIN_TOL, worst=at0, witness=tuple([0.0] * n)))
    away = np.linalg.norm(pts, axis=0) > 1e-12
    score = np.where(away, STRICT_MARGIN - Vvals, -np.inf)
    worst, wit = _worst(score, pts)
    checks.append(_check("value_positive", "V(x) > 0 for x != 0 on the domain", "positive definite value function",
                         worst < 0, LYAPUNOV, max(worst, 0.0), wit))
    region = next((c.region for c in result.conditions if c.region is not None), None)
    local = region if region is not None else domain.scaled(0.1)
    lpts = local.grid(resolution)
    lv = value_eval(result.V, lpts)
    score = np.where(np.linalg.norm(lpts, axis=0) > 1e-12, STRICT_MARGIN - lv, -np.inf)
    worst, wit = _worst(score, lpts)
    checks.append(_check("value_positive_local", f"V(x) > 0 for x != 0 on {local}", "local Lyapunov function",
                         worst < 0, LYAPUNOV, max(worst, 0.0), wit))

    # (4) stationarity
    st = evaluate_many(result.stationarity_expr(), pts)
    worst, wit = _worst(np.abs(st) / (1.0 + np.abs(uvals)), pts)
    checks.append(_check("stationarity", "V_{x_n} + 2 r u / b = 0", "minimizing input",
                         worst <= STATIONARITY_TOL, worst=worst, witness=wit))

    # minimizer property: H is strictly convex in u
    sel = rng.choice(pts.shape[1], size=min(50, pts.shape[1]), replace=False)
    sub = pts[:, sel]
    grad_vals = np.array([evaluate_many(g, sub) for g in result.grad_V()])
    bvec = np.array(sys.input_vector())[:, None]
    drift = np.array([evaluate_many(f, sub) for f in sys.drift()])
    Ls = evaluate_many(result.L_state, sub)
    u0 = evaluate_many(result.u, sub)

    def ham(u):
        return Ls + r * u * u + np.sum(grad_vals * (drift + bvec * u), axis=0)

    h0 = ham(u0)
    deltas = rng.standard_normal((20, sub.shape[1]))
    gaps = np.array([ham(u0 + d) - h0 for d in deltas])
    worst_gap = float(np.min(gaps))
    checks.append(_check("hamiltonian_minimizer", "H(x, u + delta) >= H(x, u) for 50 points x 20 perturbations",
                         "minimizing input", worst_gap >= -1e-9 * (1 + np.max(np.abs(h0))), worst=max(-worst_gap, 0.0)))

    # (5) gradient vs finite differences
    fd_sel = rng.choice(pts.shape[1], size=min(200, pts.shape[1]), replace=False)
    fpts = pts[:, fd_sel]
    worst_fd, wit_fd = 0.0, None
    for i, g in enumerate(result.grad_V()):
        e = np.zeros((n, 1))
        e[i] = FD_STEP
        fd = (value_eval(result.V, fpts + e) - value_eval(result.V, fpts - e)) / (2 * FD_STEP)
        sym = evaluate_many(g, fpts)
        err = np.abs(fd - sym) / (1.0 + np.abs(sym))
        w, wt = _worst(err, fpts)
        if w > worst_fd:
            worst_fd, wit_fd = w, wt
    checks.append(_check("gradient_fd", "symbolic grad V matches central differences (1e-6)", "value function gradient",
                         worst_fd <= FD_TOL, worst=worst_fd, witness=wit_fd))

    # (6) trajectories
    X0 = trajectory_initial_conditions(domain, seed, n_random)
    trajs = simulate_result(result, X0, cfg)
    diverged = [tuple(X0[:, j]) for j, tr in enumerate(trajs) if tr.diverged]
    checks.append(_check("trajectories_bounded", "no closed-loop run diverges", "closed-loop stability",
                         not diverged, worst=float(len(diverged)), witness=diverged[0] if diverged else None))
    lyap_worst, incr_worst, lyap_wit, incr_wit = 0.0, -np.inf, None, None
    term_worst, term_wit, gap_worst, gap_wit = 0.0, None, 0.0, None
    n_conv = 0
    for j, tr in enumerate(trajs):
        if tr.diverged:
            continue
        lw, iw = lyapunov_decrease(result, tr)
        Vscale = 1.0 + float(np.max(np.abs(value_eval(result.V, tr.states[:1].T))))
        if lw > lyap_worst:
            lyap_worst, lyap_wit = lw, tuple(X0[:, j])
        if iw / Vscale > incr_worst:
            incr_worst, incr_wit = iw / Vscale, tuple(X0[:, j])
        if tr.converged_to is not None:
            n_conv += 1
            tl = abs(evaluate(result.L, tr.converged_to))
            if tl > term_worst:
                term_worst, term_wit = tl, tuple(X0[:, j])
        v0, vT = value_eval(result.V, np.stack([tr.states[0], tr.states[-1]], axis=1))
        gap = abs(tr.cost_integral - (v0 - vT))
        if gap > gap_worst:
            gap_worst, gap_wit = gap, tuple(X0[:, j])
    checks.append(_check("lyapunov_decrease", "|dV/dt + L| <= 1e-6 (1 + |L|) every 10th step", "dV/dt = -L",
                         lyap_worst <= LYAP_TOL, worst=lyap_worst, witness=lyap_wit))
    checks.append(_check("value_nonincreasing", "V(x(t)) non-increasing along runs", "dV/dt = -L",
                         incr_worst <= 1e-10, worst=max(incr_worst, 0.0), witness=incr_wit))
    checks.append(_check("terminal_running_cost", "L(x_T) <= 1e-8 where a rest point is reached",
                         "convergence to minimizers of L", term_worst <= TERMINAL_L_TOL, worst=term_worst,
                         witness=term_wit, converged=n_conv, runs=len(trajs)))
    checks.append(_check("cost_consistency", "|int L dt - (V(x0) - V(x_T))| <= 1e-3", "cost equals value",
                         gap_worst <= COST_GAP_TOL, worst=gap_worst, witness=gap_wit))

    # (7) case conditions re-evaluated on this domain
    for c in result.conditions:
        severity = {HYPOTHESIS: MANDATORY, LYAPUNOV: LYAPUNOV, INFO: INFO}[c.role]
        if c.predicate is None or c.status is Status.VERIFIED_SYMBOLIC:
            ok = None if c.status is Status.UNKNOWN else c.status is not Status.FAILED
            checks.append(_check(f"condition:{c.name}", c.description, "case hypothesis", ok, severity,
                                 witness=c.witness))
            continue
        where = c.region if c.region is not None else (domain.scaled(0.1) if c.local else domain)
        try:
            ok, worst, wit = sample_condition(c.predicate, c.kind, where, c.var)
        except Exception:
            ok, worst, wit = None, 0.0, None
        checks.append(_check(f"condition:{c.name}", c.description, "case hypothesis", ok, severity,
                             max(worst, 0.0) if ok is not None else 0.0, wit))

    # Lyapunov extras
    hess = hessian_pd_region(result.V, domain, resolution)
    checks.append(_check("hessian_pd_region", "Hessian of V positive definite near the origin",
                         "local positive definiteness", not hess.empty, INFO,
                         half_widths=list(hess.half_widths), fraction=hess.fraction_positive))
    scale = max(max(abs(lo), abs(hi)) for lo, hi in domain.bounds)
    ok, wit, detail = radial_unboundedness(result.V, n, scale)
    checks.append(_check("radially_unbounded", "V(x) grows without bound as |x| grows", "global Lyapunov function",
                         ok, LYAPUNOV, 0.0 if ok else float(value_eval(result.V, np.reshape(wit, (-1, 1)))[0]),
                         wit, **detail))

    # convexity of L (informational)
    a = domain.sample(1000, rng)
    c2 = domain.sample(1000, rng)
    la, lc, lm = (evaluate_many(result.L, p) for p in (a, c2, 0.5 * (a + c2)))
    viol = lm - 0.5 * (la + lc)
    worst = float(np.max(viol))
    checks.append(_check("running_cost_convex", "L((a+b)/2) <= (L(a)+L(b))/2 on 1000 random pairs",
                         "convex running cost", worst <= 1e-9, INFO, max(worst, 0.0)))

    return VerificationReport(tuple(checks), domain, resolution, seed,
                              tuple(tuple(float(v) for v in X0[:, j]) for j in range(X0.shape[1])))
