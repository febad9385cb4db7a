"""Closed-form controller, running cost and value function for each case.

Every result satisfies ``min_u H(x, u, grad V) = 0`` with
``H = L_state(x) + r u^2 + grad V . (drift(x) + B u)`` and ``V(0) = 0``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .expr import (
    ZERO,
    Const,
    Domain,
    DomainError,
    Expr,
    Var,
    antideriv,
    canonical,
    const_value,
    diff,
    evaluate,
    evaluate_many,
    integral_from_zero,
    is_smooth,
    is_sum_of_nonneg,
    sign,
    sqrt,
    substitute,
    to_string,
    var_power_factor,
    variables,
)
from .model import (
    Case,
    CaseICost,
    CaseIbCost,
    CaseIICost,
    CaseIIICost,
    SecondOrderSystem,
    ThirdOrderSystem,
    case2_parts,
    case_reasons,
    extract_case3,
    split_terms,
)


class SynthesisError(ValueError):
    """A precondition of the synthesis formulas does not hold."""


class UnsupportedCase(SynthesisError):
    """The system does not have the structure the requested case needs."""


class Status(str, enum.Enum):
    VERIFIED_SYMBOLIC = "verified-symbolic"
    VERIFIED_SAMPLED = "verified-sampled"
    FAILED = "failed"
    UNKNOWN = "unknown"

    def __str__(self):
        return self.value


# Condition roles: a failed "hypothesis" invalidates optimality; a failed
# "lyapunov" condition only removes the stability certificate.
HYPOTHESIS, LYAPUNOV, INFO = "hypothesis", "lyapunov", "info"

NONNEG_TOL = 1e-10
STRICT_MARGIN = 1e-12


@dataclass(frozen=True)
class Condition:
    """Side condition of a synthesis formula.

    ``kind`` is ``"nonneg"`` (``predicate >= 0``), ``"positive"``
    (``predicate > 0`` wherever ``x_var != 0``, or ``x != 0`` when ``var``
    is ``None``), ``"nonzero"`` or ``"static"`` (no predicate; the status
    was decided at synthesis).
    """

    name: str
    description: str
    status: Status
    role: str = HYPOTHESIS
    predicate: Expr | None = None
    kind: str = "static"
    var: int | None = None
    local: bool = False
    region: Domain | None = None
    worst: float | None = None
    witness: tuple | None = None

    def to_dict(self) -> dict:
        out = {"name": self.name, "description": self.description, "status": str(self.status), "role": self.role}
        if self.local:
            out["local"] = True
        if self.region is not None:
            out["region"] = [list(b) for b in self.region.bounds]
        if self.witness is not None:
            out["witness"] = list(self.witness)
        return out


@dataclass(frozen=True)
class IntegralTerm:
    """``coefficient * int_0^{x_var} integrand d x_var``; integrand depends on ``x_var`` only."""

    integrand: Expr
    var: int
    coefficient: float = 1.0


@dataclass(frozen=True)
class QuadratureForm:
    """Value function with parts that have no closed-form antiderivative."""

    symbolic: Expr
    integrals: tuple

    def __str__(self):
        out = "" if self.symbolic.is_zero() else to_string(self.symbolic)
        for t in self.integrals:
            c = t.coefficient
            term = f"{abs(c)!r}*int(0..x{t.var}, {to_string(t.integrand)})"
            if not out:
                out = term if c >= 0 else "-" + term
            else:
                out += (" + " if c >= 0 else " - ") + term
        return out or "0"

    def to_dict(self) -> dict:
        return {
            "symbolic": to_string(self.symbolic),
            "integrals": [
                {"integrand": to_string(t.integrand), "var": t.var, "coefficient": t.coefficient}
                for t in self.integrals
            ],
        }


def value_eval(V, points) -> np.ndarray:
    """Evaluate ``V`` (Expr or QuadratureForm) at points of shape ``(n, ...)``."""
    points = np.asarray(points, dtype=float)
    if isinstance(V, Expr):
        return evaluate_many(V, points)
    out = evaluate_many(V.symbolic, points)
    for t in V.integrals:
        out = out + t.coefficient * integral_from_zero(t.integrand, t.var, points[t.var - 1])
    return out


def value_at(V, x) -> float:
    return float(value_eval(V, np.asarray(x, dtype=float).reshape(-1, 1))[0])


def value_gradient(V, n: int) -> list[Expr]:
    """Exact symbolic gradient of ``V`` (integral terms differentiate to their integrands)."""
    if isinstance(V, Expr):
        return [diff(V, i, strict=False) for i in range(1, n + 1)]
    grad = [diff(V.symbolic, i, strict=False) for i in range(1, n + 1)]
    for t in V.integrals:
        grad[t.var - 1] = grad[t.var - 1] + t.coefficient * t.integrand
    return grad


def value_symbolic(V) -> Expr | None:
    return V if isinstance(V, Expr) else None


def value_string(V) -> str:
    return to_string(V) if isinstance(V, Expr) else str(V)


@dataclass(frozen=True)
class SynthesisResult:
    case: Case
    system: object
    u: Expr
    L_state: Expr
    V: object
    gains: dict = field(default_factory=dict)
    conditions: tuple = ()
    notes: tuple = ()

    @property
    def order(self) -> int:
        return self.system.order

    @property
    def L(self) -> Expr:
        """Running cost along the closed loop, ``L_state + r u^2``."""
        return self.L_state + self.system.r * self.u * self.u

    def grad_V(self) -> list[Expr]:
        return value_gradient(self.V, self.order)

    def hamiltonian(self, u: Expr | None = None) -> Expr:
        """``H(x, u, grad V)`` as an expression (the synthesized ``u`` by default)."""
        u = self.u if u is None else u
        drift = self.system.drift()
        bvec = self.system.input_vector()
        H = self.L_state + self.system.r * u * u
        for gi, fi, bi in zip(self.grad_V(), drift, bvec):
            H = H + gi * (fi + bi * u)
        return H

    def hjb_residual_expr(self) -> Expr:
        return self.hamiltonian()

    def stationarity_expr(self) -> Expr:
        """``V_{x_last} + 2 r u / b``; zero for the minimizing input."""
        return self.grad_V()[-1] + (2.0 * self.system.r / self.system.b) * self.u

    def to_dict(self) -> dict:
        return {
            "case": str(self.case),
            "system": self.system.describe(),
            "u": to_string(self.u),
            "L_state": to_string(self.L_state),
            "L": to_string(self.L),
            "V": to_string(self.V) if isinstance(self.V, Expr) else self.V.to_dict(),
            "gains": {k: float(v) for k, v in self.gains.items()},
            "conditions": [c.to_dict() for c in self.conditions],
            "notes": list(self.notes),
        }


def hjb_residual(result: SynthesisResult, x) -> float:
    """Hamiltonian at the synthesized input; zero up to rounding."""
    return evaluate(result.hjb_residual_expr(), x)


def hjb_residual_grid(result: SynthesisResult, points) -> np.ndarray:
    return evaluate_many(result.hjb_residual_expr(), points)


# --------------------------------------------------------------------------
# condition checking


def default_domain(order: int) -> Domain:
    return Domain.cube(2, 2.0) if order == 2 else Domain.cube(3, 1.0)


def _sample_grid(domain: Domain) -> np.ndarray:
    # about 1e4 points
    res = {1: 10001, 2: 101, 3: 22}[domain.dim]
    return domain.grid(res)


def sample_condition(pred: Expr, kind: str, domain: Domain, var: int | None = None):
    """Evaluate a predicate on ``domain``; returns ``(ok, worst, witness)``."""
    pts = _sample_grid(domain)
    vals = evaluate_many(pred, pts)
    if kind == "nonneg":
        mask = np.ones(vals.shape, dtype=bool)
        bad = ~(vals >= -NONNEG_TOL)
        score = -vals
    elif kind == "positive":
        if var is None:
            mask = np.linalg.norm(pts, axis=0) > 1e-9
        else:
            mask = np.abs(pts[var - 1]) > 1e-9
        bad = ~(vals > STRICT_MARGIN) & mask
        score = np.where(mask, -vals, -np.inf)
    elif kind == "nonzero":
        mask = np.ones(vals.shape, dtype=bool)
        bad = ~(np.abs(vals) > STRICT_MARGIN)
        score = -np.abs(vals)
    else:
        raise ValueError(f"unknown condition kind {kind!r}")
    score = np.where(np.isnan(score), np.inf, score)
    if bad.any():
        i = int(np.argmax(np.where(bad, score, -np.inf)))
        return False, float(score[i]), tuple(float(v) for v in pts[:, i])
    i = int(np.argmax(np.where(mask, score, -np.inf)))
    return True, float(score[i]), None


def _symbolic_status(pred: Expr, kind: str) -> Status | None:
    c = const_value(pred)
    if c is not None:
        if kind == "nonneg":
            return Status.VERIFIED_SYMBOLIC if c >= -NONNEG_TOL else Status.FAILED
        return Status.VERIFIED_SYMBOLIC if (c > STRICT_MARGIN if kind == "positive" else abs(c) > STRICT_MARGIN) else Status.FAILED
    if kind == "nonneg" and is_sum_of_nonneg(pred):
        return Status.VERIFIED_SYMBOLIC
    return None


def check_condition(name: str, description: str, pred: Expr, kind: str, domain: Domain,
                    role: str = HYPOTHESIS, var: int | None = None, local: bool = False,
                    region: Domain | None = None) -> Condition:
    """Decide a predicate symbolically if possible, otherwise by dense sampling."""
    pred = canonical(pred)
    status = _symbolic_status(pred, kind)
    worst = witness = None
    if status is None:
        where = region if region is not None else (domain.scaled(0.1) if local else domain)
        try:
            ok, worst, witness = sample_condition(pred, kind, where, var)
            status = Status.VERIFIED_SAMPLED if ok else Status.FAILED
        except (DomainError, FloatingPointError, ValueError):
            status = Status.UNKNOWN
    return Condition(name, description, status, role, pred, kind, var, local, region, worst, witness)


def static_condition(name: str, description: str, status: Status, role: str = INFO) -> Condition:
    return Condition(name, description, status, role)


def _smoothness(name: str, u: Expr) -> Condition:
    if is_smooth(u):
        return static_condition(name, "continuously differentiable", Status.VERIFIED_SYMBOLIC)
    return static_condition(name, "continuously differentiable (not decided symbolically)", Status.UNKNOWN)


# --------------------------------------------------------------------------
# building blocks


def stabilizing_root(fdrift: Expr, Qpos: Expr, b: float, r: float, var: int,
                     domain: Domain | None = None) -> Expr:
    """Root ``u`` of ``Qpos - r u^2 - 2 r u fdrift / b = 0`` that drives ``x_var`` to 0.

    ``u = -fdrift/b - sign(b) sign(x_var) sqrt(fdrift^2/b^2 + Qpos/r)``.
    When every term under the root carries ``x_var^(2m)``, the factor
    ``sign(x_var) |x_var|^m`` is rewritten without ``sign``.
    """
    fdrift, Qpos = canonical(fdrift), canonical(Qpos)
    if abs(evaluate(Qpos, [0.0, 0.0, 0.0])) > 1e-12:
        raise SynthesisError("the state weight must vanish at the origin")
    lo, hi = (domain.bounds[var - 1] if domain is not None and domain.dim >= var else (-2.0, 2.0))
    axis = np.zeros((3, 2001))
    axis[var - 1] = np.linspace(lo, hi, 2001)
    if set(variables(Qpos)) <= {var}:
        vals = evaluate_many(Qpos, axis)
        if np.any(vals < -NONNEG_TOL):
            i = int(np.argmin(vals))
            raise SynthesisError(f"state weight is negative ({vals[i]:.3g}) at x{var} = {axis[var - 1, i]:.6g}")
    R = canonical(fdrift * fdrift / (b * b) + Qpos / r)
    if R.is_zero():
        return canonical(-fdrift / b)
    m = var_power_factor(R, var) // 2
    v = Var(var)
    S = canonical(R / v ** (2 * m))
    lead = v ** m if m % 2 == 1 else sign(v) * v ** m
    return canonical(-fdrift / b - math.copysign(1.0, b) * lead * sqrt(S))


def _integral(e: Expr, var: int, coefficient: float):
    """``coefficient * int_0^{x_var} e``: closed form if possible, else an integral term."""
    e = canonical(e)
    if e.is_zero():
        return ZERO, []
    F = antideriv(e, var)
    if F is not None:
        return canonical(coefficient * (F - substitute(F, var, ZERO))), []
    return ZERO, [IntegralTerm(e, var, float(coefficient))]


def _assemble_value(symbolic: Expr, integrals: list):
    symbolic = canonical(symbolic)
    origin = evaluate(symbolic, [0.0, 0.0, 0.0])
    if origin != 0.0:
        symbolic = canonical(symbolic - origin)
    if not integrals:
        return symbolic
    return QuadratureForm(symbolic, tuple(integrals))


def _require(sys, case: Case):
    if case is Case.THIRD:
        if not isinstance(sys, ThirdOrderSystem):
            raise UnsupportedCase("third-order synthesis needs a third-order system")
        return
    if not isinstance(sys, SecondOrderSystem):
        raise UnsupportedCase(f"case {case} needs a second-order system")
    why = case_reasons(sys)[case]
    if why is not None:
        raise UnsupportedCase(why)


# --------------------------------------------------------------------------
# the five cases


def synthesize_case1(sys: SecondOrderSystem, g, Q2, domain: Domain | None = None) -> SynthesisResult:
    """``x1' = f1(x1, x2)``, ``x2' = f2(x2) + b u``; state cost ``-g(x1) f1 + Q2(x2)``."""
    _require(sys, Case.I)
    cost = CaseICost(g, Q2)
    g, Q2 = cost.g, cost.Q2
    if Q2.is_zero():
        raise SynthesisError("Q2 must not be identically zero")
    domain = domain or default_domain(2)
    b, r = sys.b, sys.r
    u2 = stabilizing_root(sys.f2, Q2, b, r, 2, domain)
    L_state = canonical(-g * sys.f1 + Q2)
    s1, i1 = _integral(u2, 2, -2.0 * r / b)
    s2, i2 = _integral(g, 1, 1.0)
    V = _assemble_value(s1 + s2, i1 + i2)
    conditions = (
        check_condition("Q2_nonneg", "Q2(x2) >= 0", Q2, "nonneg", domain),
        check_condition("Q_nonneg", "-g(x1) f1(x1, x2) + Q2(x2) >= 0", L_state, "nonneg", domain),
        check_condition("g_increasing", "g'(x1) > 0 for x1 != 0", diff(g, 1), "positive", domain, LYAPUNOV, var=1),
        check_condition("u2_decreasing", "u2'(x2) < 0 for x2 != 0", -diff(u2, 2, strict=False), "positive",
                        domain, LYAPUNOV, var=2),
        _smoothness("u2_smooth", u2),
    )
    return SynthesisResult(Case.I, sys, u2, L_state, V, {"b": b, "r": r}, conditions)


def synthesize_case1b(sys: SecondOrderSystem, k: float, domain: Domain | None = None) -> SynthesisResult:
    """``x1' = f1(x2)``, ``x2' = f21(x1) + f22(x1, x2) + b u`` with ``u = k f1``."""
    _require(sys, Case.Ib)
    k = CaseIbCost(k).k
    domain = domain or default_domain(2)
    b, r = sys.b, sys.r
    f1 = sys.f1
    f21, f22 = split_terms(sys.f2, lambda t: 2 not in variables(t))
    u = canonical(k * f1)
    L_state = canonical(r * k * k * f1 * f1 + (2.0 * r * k / b) * f1 * f22)
    s1, i1 = _integral(f1, 2, -2.0 * r * k / b)
    s2, i2 = _integral(f21, 1, 2.0 * r * k / b)
    V = _assemble_value(s1 + s2, i1 + i2)
    conditions = (
        check_condition("cross_term_nonneg", "k f1 f22 / b >= 0", (k / b) * f1 * f22, "nonneg", domain),
        check_condition("f1_term_decreasing", "k f1'(x2) / b < 0 for x2 != 0", -(k / b) * diff(f1, 2),
                        "positive", domain, LYAPUNOV, var=2),
        check_condition("f21_term_increasing", "k f21'(x1) / b > 0 for x1 != 0", (k / b) * diff(f21, 1),
                        "positive", domain, LYAPUNOV, var=1),
    )
    return SynthesisResult(Case.Ib, sys, u, L_state, V, {"k": k, "b": b, "r": r}, conditions)


def _case2_inverse(g2: Expr, domain: Domain):
    """``1 / g2`` and the extra condition its use requires, if any."""
    if const_value(g2) is not None or abs(evaluate(g2, [0.0, 0.0])) <= 1e-12:
        # a g2 vanishing at 0 is only usable when the division is exact
        return canonical(1.0 / g2), None
    return canonical(1.0 / g2), check_condition("g2_nonzero", "g2(x1) != 0", g2, "nonzero", domain)


def synthesize_case2(sys: SecondOrderSystem, Q1, q2: float, domain: Domain | None = None) -> SynthesisResult:
    """``f1 = g1(x1) + g2(x1) x2``, ``f2 = g3(x1) + g4(x1) x2``; ``u = u1(x1) - k2 x2``."""
    _require(sys, Case.II)
    cost = CaseIICost(Q1, q2)
    Q1, q2 = cost.Q1, cost.q2
    domain = domain or default_domain(2)
    b, r = sys.b, sys.r
    g1, g2, g3, g4 = case2_parts(sys)
    x2 = Var(2)
    u1 = stabilizing_root(g3, Q1, b, r, 1, domain)
    du1 = diff(u1, 1, strict=False)
    k2 = math.copysign(math.sqrt(q2 / r), b)
    numerator = canonical(-2.0 * r * k2 * (u1 + g3 / b) + (2.0 * r / b) * (u1 * g4 + du1 * g1))
    inv, extra = _case2_inverse(g2, domain)
    hprime = canonical(numerator * inv)
    at0 = evaluate(hprime, [0.0, 0.0])
    if not math.isfinite(at0) or not set(variables(hprime)) <= {1}:
        raise UnsupportedCase("h'(x1) = (...)/g2(x1) is not a regular function of x1 at the origin")
    u = canonical(u1 - k2 * x2)
    L_state = canonical(Q1 + q2 * x2 * x2 + (2.0 * r / b) * (du1 * g2 - k2 * g4) * x2 * x2 - hprime * g1)
    s_h, i_h = _integral(hprime, 1, 1.0)
    V = _assemble_value(-(2.0 * r / b) * x2 * u1 + (r / b) * k2 * x2 * x2 + s_h, i_h)
    conds = [
        check_condition("Q1_nonneg", "Q1(x1) >= 0", Q1, "nonneg", domain),
        check_condition("x2_weight_nonneg", "k2^2 + 2 (u1' g2 - k2 g4) / b >= 0",
                        k2 * k2 + (2.0 / b) * (du1 * g2 - k2 * g4), "nonneg", domain),
        check_condition("h_cross_nonpos", "h'(x1) g1(x1) <= 0", -hprime * g1, "nonneg", domain),
    ]
    if extra is not None:
        conds.append(extra)
    conds.append(_smoothness("u1_smooth", u1))
    if isinstance(V, Expr):
        conds.append(check_condition("V_positive", "V(x) > 0 for x != 0", V, "positive", domain, LYAPUNOV))
    gains = {"k2": k2, "b": b, "r": r}
    return SynthesisResult(Case.II, sys, u, L_state, V, gains, tuple(conds))


def synthesize_case3(sys: SecondOrderSystem, q1: float, q2: float, domain: Domain | None = None) -> SynthesisResult:
    """``f1 = a x1 + f(x2)``, ``f2 = c x1 + d f(x2)``; linear-plus-``f`` feedback."""
    _require(sys, Case.III)
    cost = CaseIIICost(q1, q2)
    q1, q2 = cost.q1, cost.q2
    data = extract_case3(sys)
    a, c, d, f = data.a, data.c, data.d, data.f
    domain = domain or default_domain(2)
    b, r = sys.b, sys.r
    x1, x2 = Var(1), Var(2)
    notes = []
    if a != 0.0:
        implied = q2 * c * c / (a * a) + 2.0 * r * c * (a * d - c) / (b * b)
        if abs(implied - q1) > 1e-12 * max(1.0, abs(implied)):
            msg = f"q1 = {q1!r} replaced by {implied!r}, the value the structure requires"
            warnings.warn(msg, stacklevel=2)
            notes.append(msg)
        q1 = implied
        if q1 < 0.0:
            raise SynthesisError(f"the required q1 = {q1:.6g} is negative")
    elif q1 < q2 * d * d:
        raise SynthesisError(f"q1 must be at least q2 d^2 = {q2 * d * d:.6g} when a = 0")
    k2 = math.sqrt(q2 / r)
    k1 = -c * k2 / a if a != 0.0 else math.sqrt(q1 / r)
    k = (d + k1 / k2) / b
    u = canonical(-k1 * x1 - k2 * x2 - k * f)
    L_state = canonical(q1 * x1 * x1 + q2 * x2 * x2 + 2.0 * r * k1 * k2 * x1 * x2
                        + (r / (b * b)) * (k1 * k1 / (k2 * k2) - d * d) * f * f)
    sF, iF = _integral(f, 2, 2.0 * (r / b) * k)
    quad_part = (k1 / math.sqrt(k2)) * x1 + math.sqrt(k2) * x2
    V = _assemble_value(-(r / b) * k * c * x1 * x1 + (r / b) * quad_part * quad_part + sF, iF)
    F_part = sF if not iF else None
    conds = [
        check_condition("c_ad_minus_c", "c (a d - c) >= 0", Const(c * (a * d - c)), "nonneg", domain),
        check_condition("c2_ge_a2d2", "c^2 >= a^2 d^2", Const(c * c - a * a * d * d), "nonneg", domain),
        check_condition("Q_nonneg", "q1 x1^2 + q2 x2^2 + 2 r k1 k2 x1 x2 + r (k1^2/k2^2 - d^2) f^2 / b^2 >= 0",
                        L_state, "nonneg", domain),
    ]
    lyap = "b > 0, k c <= 0 and k (F(x2) - F(0)) locally positive definite"
    if b < 0.0:
        conds.append(static_condition("lyapunov_local", lyap, Status.UNKNOWN, LYAPUNOV))
    elif k * c > 0.0:
        conds.append(static_condition("lyapunov_local", lyap, Status.FAILED, LYAPUNOV))
    elif F_part is None:
        conds.append(static_condition("lyapunov_local", lyap, Status.UNKNOWN, LYAPUNOV))
    else:
        conds.append(check_condition("lyapunov_local", lyap, canonical(F_part / (2.0 * r / b)),
                                     "positive", domain, LYAPUNOV, var=2, local=True))
    if a == 0.0:
        conds.append(static_condition("beta_exists", "a scalar beta with beta a^2 >= c^2 exists (a = c = 0)",
                                      Status.VERIFIED_SYMBOLIC))
    gains = {"a": a, "c": c, "d": d, "q1": q1, "k1": k1, "k2": k2, "k": k, "b": b, "r": r}
    return SynthesisResult(Case.III, sys, u, L_state, V, gains, tuple(conds), tuple(notes))


def synthesize_third_order(sys: ThirdOrderSystem, domain: Domain | None = None,
                           pd_region: Domain | None = None) -> SynthesisResult:
    """``x1' = f(x2)``, ``x2' = d f(x2) + g(x3)``, ``x3' = b u``.

    ``pd_region`` is a box on which positive definiteness of ``V`` is
    claimed; by default the domain shrunk tenfold.
    """
    _require(sys, Case.THIRD)
    domain = domain or default_domain(3)
    f, g, d, b, r = sys.f, sys.g, sys.d, sys.b, sys.r
    x1, x2, x3 = Var(1), Var(2), Var(3)
    k1, k2, k3 = (math.sqrt(q / r) for q in (sys.q1, sys.q2, sys.q3))
    k4 = (k1 + d * k2) / (b * k3)
    k5 = k2 / (b * k3)
    u = canonical(-k1 * x1 - k2 * x2 - k3 * x3 - k4 * f - k5 * g)
    fp = diff(f, 2, strict=False)
    Q = (2.0 * r * k1 * k2 * x1 * x2 + 2.0 * r * k1 * k3 * x1 * x3 + 2.0 * r * k2 * k3 * x2 * x3
         + r * (k4 * k4 - 2.0 * d * k4 * k5) * f * f + r * k5 * k5 * g * g
         - (2.0 * r / b) * k4 * fp * x3 * (d * f + g))
    L_state = canonical(sys.q1 * x1 * x1 + sys.q2 * x2 * x2 + sys.q3 * x3 * x3 + Q)
    lin = (k1 / math.sqrt(k3)) * x1 + (k2 / math.sqrt(k3)) * x2 + math.sqrt(k3) * x3
    sF, iF = _integral(f, 2, 2.0 * r * k4 * k5)
    sG, iG = _integral(g, 3, 2.0 * (r / b) * k5)
    V = _assemble_value((r / b) * lin * lin + (2.0 * r / b) * k4 * x3 * f + sF + sG, iF + iG)
    G_sym, G_int = _integral(g, 3, 1.0)
    conds = [
        check_condition("L_nonneg", "q1 x1^2 + q2 x2^2 + q3 x3^2 + Q(x) >= 0", L_state, "nonneg", domain),
    ]
    if not G_int:
        conds.append(check_condition("G_local_pd", "G(x3) - G(0) locally positive definite", G_sym,
                                     "positive", domain, LYAPUNOV, var=3, local=True))
    else:
        conds.append(static_condition("G_local_pd", "G(x3) - G(0) locally positive definite",
                                      Status.UNKNOWN, LYAPUNOV))
    if isinstance(V, Expr):
        conds.append(check_condition("V_local_pd", "V(x) > 0 for x != 0 near the origin", V, "positive",
                                     domain, LYAPUNOV, local=pd_region is None, region=pd_region))
    gains = {"k1": k1, "k2": k2, "k3": k3, "k4": k4, "k5": k5, "b": b, "r": r}
    return SynthesisResult(Case.THIRD, sys, u, L_state, V, gains, tuple(conds))


def synthesize(sys, cost, domain: Domain | None = None, pd_region: Domain | None = None) -> SynthesisResult:
    """Dispatch on the cost variant."""
    case = cost.case
    if case is Case.I:
        return synthesize_case1(sys, cost.g, cost.Q2, domain)
    if case is Case.Ib:
        return synthesize_case1b(sys, cost.k, domain)
    if case is Case.II:
        return synthesize_case2(sys, cost.Q1, cost.q2, domain)
    if case is Case.III:
        return synthesize_case3(sys, cost.q1, cost.q2, domain)
    return synthesize_third_order(sys, domain, pd_region)
