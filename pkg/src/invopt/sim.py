"""Fixed-step RK4 simulation of the closed loop with running-cost accumulation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .expr import ZERO, Expr, Var, canonical, evaluate, lambdify, to_source
from .expr.numeric import _sqrt
from .synth import SynthesisResult, value_eval


class DivergenceError(RuntimeError):
    """The closed-loop state left the divergence radius or became non-finite."""


class NonConvergenceError(RuntimeError):
    """The trajectory did not reach a rest point within ``t_max``."""


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_max: float = 50.0
    convergence_radius: float = 1e-6
    tail_tolerance: float = 1e-6
    divergence_radius: float = 1e6

    def __post_init__(self):
        for name in ("dt", "t_max", "convergence_radius", "tail_tolerance", "divergence_radius"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if self.dt > self.t_max:
            raise ValueError("dt must not exceed t_max")

    @property
    def steps(self) -> int:
        return int(math.ceil(self.t_max / self.dt - 1e-9))


@dataclass
class Trajectory:
    """One closed-loop run.

    ``states`` has shape ``(len(times), n)``; ``cost`` is the running
    integral of ``L`` at each recorded time, so ``cost_integral == cost[-1]``.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    running_cost: np.ndarray
    cost: np.ndarray
    converged_to: tuple | None
    diverged: bool = False

    @property
    def cost_integral(self) -> float:
        return float(self.cost[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _compile_closed_loop(drift, bvec, u: Expr, L_state: Expr, r: float):
    """One numpy function returning ``(dx_1..dx_n, u, L)`` for batched states."""
    # adding _z (zeros of the batch shape) makes every component a full array
    lines = ["def _rhs(x1, x2, x3, _extra, _z):", f"    u = {to_source(canonical(u))} + _extra + _z"]
    comps = []
    for i, (fi, bi) in enumerate(zip(drift, bvec), start=1):
        lines.append(f"    d{i} = {to_source(canonical(fi))} + {bi!r} * u + _z")
        comps.append(f"d{i}")
    lines.append(f"    L = {to_source(canonical(L_state))} + {r!r} * u * u + _z")
    lines.append(f"    return ({', '.join(comps)},), u, L")
    ns = {"np": np, "_sqrt": _sqrt}
    exec(compile("\n".join(lines) + "\n", "<closed-loop>", "exec"), ns)
    return ns["_rhs"]


def _monomial_basis(n: int) -> list[Expr]:
    xs = [Var(i) for i in range(1, n + 1)]
    basis = list(xs)
    for i in range(n):
        for j in range(i, n):
            basis.append(canonical(xs[i] * xs[j]))
    return basis


def _make_rhs(sys, u: Expr, L_state: Expr | None, perturbation=None):
    """Batched right-hand side ``rhs(S, columns) -> (dS, u, L)``."""
    n = sys.order
    rhs_fn = _compile_closed_loop(sys.drift(), sys.input_vector(), u, L_state if L_state is not None else ZERO,
                                  sys.r)
    if perturbation is not None:
        basis, coeffs = perturbation
        basis_fns = [lambdify(e) for e in basis]
        coeffs = np.asarray(coeffs, dtype=float)
    pad = [0.0] * (3 - n)

    def rhs(S, columns):
        args = list(S) + pad
        z = np.zeros(S.shape[1:])
        extra = 0.0
        if perturbation is not None:
            vals = np.array([f(*args) + z for f in basis_fns])
            extra = np.einsum("bm,mb->b", coeffs[columns], vals)
        with np.errstate(all="ignore"):
            d, uu, L = rhs_fn(*args, extra, z)
        return np.array(d), uu, L

    return rhs


def flow(sys, u: Expr, L_state: Expr, X, duration: float, substeps: int = 16):
    """Advance states ``X`` (shape ``(n, B)``) by ``duration`` with ``substeps`` RK4 steps.

    Returns ``(X_end, cost)`` where ``cost`` is the integral of ``L`` over the interval.
    """
    rhs = _make_rhs(sys, u, L_state)
    X = np.array(X, dtype=float)
    cols = np.arange(X.shape[1])
    J = np.zeros(X.shape[1])
    h = duration / substeps
    for _ in range(substeps):
        d1, _, L1 = rhs(X, cols)
        d2, _, L2 = rhs(X + 0.5 * h * d1, cols)
        d3, _, L3 = rhs(X + 0.5 * h * d2, cols)
        d4, _, L4 = rhs(X + h * d3, cols)
        X = X + h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        J = J + h / 6.0 * (L1 + 2.0 * L2 + 2.0 * L3 + L4)
    return X, J


def integrate_batch(sys, u: Expr, x0s, cfg: SimConfig | None = None, L_state: Expr | None = None,
                    perturbation=None):
    """Integrate several initial conditions at once.

    ``x0s`` has shape ``(n, B)``.  ``perturbation`` is an optional pair
    ``(basis, coeffs)`` adding ``coeffs[b] . basis(x)`` to ``u`` in column b.
    Each column stops independently on convergence or divergence.
    Returns a list of :class:`Trajectory`.
    """
    cfg = cfg or SimConfig()
    X = np.array(x0s, dtype=float)
    n, B = X.shape
    if n != sys.order:
        raise ValueError(f"initial state must have {sys.order} components, got {n}")
    rhs = _make_rhs(sys, u, L_state, perturbation)

    steps = cfg.steps
    dt = cfg.dt
    states = np.full((steps + 1, n, B), np.nan)
    inputs = np.full((steps + 1, B), np.nan)
    running = np.full((steps + 1, B), np.nan)
    cost = np.full((steps + 1, B), np.nan)
    last = np.zeros(B, dtype=int)
    J = np.zeros(B)
    active = np.ones(B, dtype=bool)
    converged = np.zeros(B, dtype=bool)
    diverged = np.zeros(B, dtype=bool)

    states[0] = X
    cost[0] = 0.0
    for k in range(steps + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        S = X[:, idx]
        d1, u1, L1 = rhs(S, idx)
        inputs[k, idx] = u1
        running[k, idx] = L1
        norm = np.sqrt(np.sum(S * S, axis=0))
        bad = ~np.isfinite(norm) | (norm > cfg.divergence_radius) | ~np.all(np.isfinite(d1), axis=0)
        rest = (norm <= cfg.convergence_radius) | (np.sqrt(np.sum(d1 * d1, axis=0)) <= cfg.tail_tolerance)
        stop = bad | rest | (k == steps)
        diverged[idx[bad]] = True
        converged[idx[rest & ~bad]] = True
        last[idx[stop]] = k
        active[idx[stop]] = False
        go = ~stop
        if not go.any():
            continue
        idx, S = idx[go], S[:, go]
        d1, L1 = d1[:, go], L1[go]
        d2, _, L2 = rhs(S + 0.5 * dt * d1, idx)
        d3, _, L3 = rhs(S + 0.5 * dt * d2, idx)
        d4, _, L4 = rhs(S + dt * d3, idx)
        X[:, idx] = S + dt / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        J[idx] = J[idx] + dt / 6.0 * (L1 + 2.0 * L2 + 2.0 * L3 + L4)
        states[k + 1, :, idx] = X[:, idx].T
        cost[k + 1, idx] = J[idx]

    times = np.arange(steps + 1) * dt
    out = []
    for j in range(B):
        m = last[j] + 1
        traj_states = states[:m, :, j]
        conv = tuple(float(v) for v in traj_states[-1]) if converged[j] else None
        out.append(Trajectory(times[:m].copy(), traj_states.copy(), inputs[:m, j].copy(),
                              running[:m, j].copy(), cost[:m, j].copy(), conv, bool(diverged[j])))
    return out


def integrate(sys, u: Expr, x0, cfg: SimConfig | None = None, L_state: Expr | None = None) -> Trajectory:
    """Integrate the closed loop ``x' = drift(x) + B u(x)`` from ``x0``.

    Raises :class:`DivergenceError` if the state norm exceeds the
    divergence radius.
    """
    traj = integrate_batch(sys, u, np.asarray(x0, dtype=float).reshape(-1, 1), cfg, L_state)[0]
    if traj.diverged:
        raise DivergenceError(f"closed loop diverged at t = {traj.times[-1]:.6g}")
    return traj


def simulate_result(result: SynthesisResult, x0s, cfg: SimConfig | None = None) -> list[Trajectory]:
    """Batched closed-loop runs of a synthesized controller (columns of ``x0s``)."""
    return integrate_batch(result.system, result.u, x0s, cfg, result.L_state)


def cost_consistency(sys, result: SynthesisResult, x0, cfg: SimConfig | None = None, strict: bool = False):
    """``(J, V0, gap)`` with ``J = int_0^T L dt`` and ``V0 = V(x0) - V(x_T)``.

    ``x_T`` is the rest point when one is reached, otherwise the state at
    ``t_max``; the identity ``J = V(x0) - V(x_T)`` holds for any horizon.
    With ``strict=True`` a run that does not come to rest raises
    :class:`NonConvergenceError`.
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.any(x0):
        return 0.0, 0.0, 0.0
    traj = integrate(sys, result.u, x0, cfg, result.L_state)
    if strict and traj.converged_to is None:
        raise NonConvergenceError(f"no rest point reached within t_max = {traj.times[-1]:.6g}")
    xT = np.asarray(traj.converged_to) if traj.converged_to is not None else traj.final_state
    pts = np.stack([x0, xT], axis=1)
    v0, vT = value_eval(result.V, pts)
    J = traj.cost_integral
    V0 = float(v0 - vT)
    return J, V0, abs(J - V0)


EPSILONS = (0.01, -0.01, 0.1, -0.1)


def perturbation_optimality(sys, result: SynthesisResult, x0, n_trials: int = 20, cfg: SimConfig | None = None,
                            seed: int = 0, tail_correction: bool = True, epsilons=EPSILONS):
    """Smallest ``J_eps - J`` over random policies ``u + eps p(x)``.

    ``p`` is a random polynomial of degree 1 or 2 with ``p(0) = 0`` and
    ``eps`` cycles through ``epsilons``.  With ``tail_correction`` each
    finite-horizon cost is completed by ``V(x_T)``, the optimal cost from
    where the run stopped, so truncation does not favour slow runs.
    A diverged trial counts as ``J_eps = inf``.  Returns ``(worst_gap, gaps)``.
    """
    rng = np.random.default_rng(seed)
    n = sys.order
    basis = _monomial_basis(n)
    coeffs = np.zeros((n_trials + 1, len(basis)))
    for t in range(n_trials):
        degree = 1 + t % 2
        m = n if degree == 1 else len(basis)
        c = rng.standard_normal(m)
        c /= max(np.linalg.norm(c), 1e-12)
        coeffs[t + 1, :m] = epsilons[t % len(epsilons)] * c
    x0 = np.asarray(x0, dtype=float)
    X0 = np.repeat(x0.reshape(-1, 1), n_trials + 1, axis=1)
    trajs = integrate_batch(sys, result.u, X0, cfg, result.L_state, (basis, coeffs))
    totals = []
    for tr in trajs:
        if tr.diverged:
            totals.append(math.inf)
            continue
        J = tr.cost_integral
        if tail_correction:
            J += float(value_eval(result.V, tr.final_state.reshape(-1, 1))[0])
        totals.append(J)
    gaps = np.array(totals[1:]) - totals[0]
    return float(np.min(gaps)) if gaps.size else 0.0, gaps


def lyapunov_decrease(result: SynthesisResult, traj: Trajectory, every: int = 10, substeps: int = 16):
    """Worst scaled violation of ``dV/dt = -L`` along ``traj``.

    At every ``every``-th recorded state ``x_k`` the closed loop is advanced
    by one step ``dt`` (with ``substeps`` finer RK4 steps) and the forward
    difference ``(V(x_k + dx) - V(x_k)) / dt`` is compared with the mean of
    ``-L`` over that step, scaled by ``1 + |L(x_k)|``.  Also returns the
    largest increase of ``V`` between consecutive recorded states.
    """
    m = len(traj.times)
    if m < 2:
        return 0.0, 0.0
    ks = np.arange(0, m - 1, every)
    dt = traj.times[1] - traj.times[0]
    X = traj.states[ks].T
    Xend, dJ = flow(result.system, result.u, result.L_state, X, dt, substeps)
    v = value_eval(result.V, np.concatenate([X, Xend], axis=1))
    v0, v1 = v[: ks.size], v[ks.size:]
    scaled = np.abs(v1 - v0 + dJ) / dt / (1.0 + np.abs(traj.running_cost[ks]))
    Vall = value_eval(result.V, traj.states.T)
    increase = float(np.max(np.diff(Vall)))
    return float(np.max(scaled)), increase


def write_csv(path, traj: Trajectory, stride: int = 1) -> None:
    """Columns ``t, x1..xn, u, L, cumcost``; one row per ``stride`` steps plus the last."""
    n = traj.states.shape[1]
    rows = list(range(0, len(traj.times), max(1, int(stride))))
    if rows[-1] != len(traj.times) - 1:
        rows.append(len(traj.times) - 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i}" for i in range(1, n + 1)] + ["u", "L", "cumcost"])
        for k in rows:
            vals = [traj.times[k], *traj.states[k], traj.inputs[k], traj.running_cost[k], traj.cost[k]]
            w.writerow([f"{v:.12g}" for v in vals])


def terminal_cost_rate(result: SynthesisResult, traj: Trajectory) -> float:
    """``L(x_T, u(x_T))`` at the end of ``traj``."""
    return evaluate(result.L, traj.final_state)
