"""Differentiation, closed-form antiderivatives and structural queries."""

from __future__ import annotations

from functools import lru_cache

from .core import (
    ONE,
    ZERO,
    Add,
    Const,
    Expr,
    Func,
    Mul,
    Pow,
    Var,
    canonical,
    cos,
    from_poly,
    poly,
    sign,
    sin,
    sorted_terms,
    sqrt,
    variables,
)


class NonDifferentiableError(ValueError):
    """A sign/abs node depends on the differentiation variable."""


def diff(e: Expr, var: int, strict: bool = True) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to ``x_var``.

    With ``strict=False`` the derivative is taken away from the kinks of
    ``sign``/``abs`` (``sign' = 0``, ``abs(u)' = sign(u) u'``).
    """
    return _diff(canonical(e), var, strict)


@lru_cache(maxsize=None)
def _diff(e: Expr, var: int, strict: bool) -> Expr:
    if var not in variables(e):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        out = ZERO
        for t in e.terms:
            out = out + _diff(t, var, strict)
        return out
    if isinstance(e, Mul):
        out = ZERO
        fs = e.factors
        for i, f in enumerate(fs):
            df = _diff(f, var, strict)
            if df.is_zero():
                continue
            rest = canonical(Mul(fs[:i] + fs[i + 1:])) if len(fs) > 1 else ONE
            out = out + df * rest
        return out
    if isinstance(e, Pow):
        return e.exp * canonical(Pow(e.base, e.exp - 1)) * _diff(e.base, var, strict)
    a = e.arg
    da = _diff(a, var, strict)
    if e.name == "sin":
        return cos(a) * da
    if e.name == "cos":
        return -sin(a) * da
    if e.name == "sqrt":
        return 0.5 * da / sqrt(a)
    if strict:
        raise NonDifferentiableError(f"{e.name}(...) depends on x{var}")
    if e.name == "abs":
        return sign(a) * da
    return ZERO


def gradient(e: Expr, n: int, strict: bool = True) -> list[Expr]:
    return [diff(e, i, strict) for i in range(1, n + 1)]


def match_affine(e: Expr, var: int):
    """Return ``(coeff, offset)`` with ``e == offset + coeff * x_var``, or ``None``."""
    coeff: dict = {}
    offset: dict = {}
    target = Var(var)
    for mono, c in poly(canonical(e)).items():
        power = 0
        rest = []
        for atom, k in mono:
            if atom == target:
                power = k
            elif var in variables(atom):
                return None
            else:
                rest.append((atom, k))
        if power == 0:
            offset[tuple(rest)] = c
        elif power == 1:
            coeff[tuple(rest)] = c
        else:
            return None
    return from_poly(coeff), from_poly(offset)


def split_terms(e: Expr, keep) -> tuple[Expr, Expr]:
    """Split the canonical sum into (terms where ``keep(term)``, the rest)."""
    yes: dict = {}
    no: dict = {}
    for mono, c in poly(canonical(e)).items():
        term = from_poly({mono: c})
        (yes if keep(term) else no)[mono] = c
    return from_poly(yes), from_poly(no)


def proportional(a: Expr, b: Expr, rtol: float = 1e-12):
    """Constant ``d`` with ``a == d * b`` symbolically, else ``None``."""
    pa, pb = poly(canonical(a)), poly(canonical(b))
    if not pa:
        return 0.0
    if not pb or set(pa) != set(pb):
        return None
    ratios = [pa[m] / pb[m] for m in pb]
    d = ratios[0]
    if all(abs(r - d) <= rtol * max(1.0, abs(d)) for r in ratios):
        return d
    return None


def var_power_factor(e: Expr, var: int) -> int:
    """Largest ``m`` such that ``x_var**m`` divides every term of ``e``."""
    target = Var(var)
    powers = []
    for mono, _ in poly(canonical(e)).items():
        powers.append(next((k for a, k in mono if a == target), 0))
    return max(0, min(powers)) if powers else 0


def is_smooth(e: Expr) -> bool:
    """No sign/abs nodes; sqrt arguments bounded away from zero symbolically."""
    e = canonical(e)
    if isinstance(e, Func):
        if e.name in ("sign", "abs"):
            return False
        if e.name == "sqrt" and not _positive_definite_const(e.arg):
            return False
        return is_smooth(e.arg)
    if isinstance(e, Add):
        return all(is_smooth(t) for t in e.terms)
    if isinstance(e, Mul):
        return all(is_smooth(f) for f in e.factors)
    if isinstance(e, Pow):
        return is_smooth(e.base) and (e.exp >= 0 or _positive_definite_const(e.base))
    return True


def nonneg_monomial(mono, c: float) -> bool:
    """Every factor of ``c * mono`` is non-negative wherever defined."""
    if c < 0:
        return False
    for atom, k in mono:
        if k % 2 == 0:
            continue
        if isinstance(atom, Func) and atom.name in ("sqrt", "abs"):
            continue
        return False
    return True


def _positive_definite_const(e: Expr) -> bool:
    """Sum of non-negative monomials with a strictly positive constant term."""
    p = poly(canonical(e))
    return p.get((), 0.0) > 0 and all(nonneg_monomial(m, c) for m, c in p.items())


def is_sum_of_nonneg(e: Expr) -> bool:
    """Sufficient symbolic test for ``e >= 0`` everywhere."""
    return all(nonneg_monomial(m, c) for m, c in poly(canonical(e)).items())


# --------------------------------------------------------------------------
# antiderivatives


def antideriv(e: Expr, var: int):
    """Closed-form ``F`` with ``diff(F, var) == e``, or ``None``.

    Supported terms: ``x_var**n`` (n >= 0) times an optional single
    ``sin``/``cos`` of an argument affine in ``x_var`` with constant slope,
    times factors free of ``x_var``.
    """
    target = Var(var)
    total = ZERO
    for mono, c in sorted_terms(poly(canonical(e))):
        free = []
        n = 0
        trig = None
        for atom, k in mono:
            if var not in variables(atom):
                free.append((atom, k))
            elif atom == target:
                if k < 0:
                    return None
                n = k
            elif isinstance(atom, Func) and atom.name in ("sin", "cos") and k == 1 and trig is None:
                lin = match_affine(atom.arg, var)
                if lin is None or not isinstance(lin[0], Const):
                    return None
                trig = (atom.name, lin[0].value, atom.arg)
            else:
                return None
        piece = _power_trig(n, trig, target)
        total = total + from_poly({tuple(free): c}) * piece
    return total


def _power_trig(n: int, trig, v: Expr) -> Expr:
    if trig is None:
        return v ** (n + 1) / (n + 1)
    name, alpha, arg = trig
    if name == "sin":
        head = -(v ** n) * cos(arg) / alpha
        if n == 0:
            return head
        return head + (n / alpha) * _power_trig(n - 1, ("cos", alpha, arg), v)
    head = v ** n * sin(arg) / alpha
    if n == 0:
        return head
    return head - (n / alpha) * _power_trig(n - 1, ("sin", alpha, arg), v)


def substitute(e: Expr, var: int, value: Expr) -> Expr:
    """Replace ``x_var`` by ``value`` and canonicalize."""
    return canonical(_subs(canonical(e), var, value))


def _subs(e: Expr, var: int, value: Expr) -> Expr:
    if var not in variables(e):
        return e
    if isinstance(e, Var):
        return value
    if isinstance(e, Add):
        return Add(tuple(_subs(t, var, value) for t in e.terms))
    if isinstance(e, Mul):
        return Mul(tuple(_subs(f, var, value) for f in e.factors))
    if isinstance(e, Pow):
        return Pow(_subs(e.base, var, value), e.exp)
    return Func(e.name, _subs(e.arg, var, value))
