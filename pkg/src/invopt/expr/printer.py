"""Render canonical expressions as grammar strings and as numpy source."""

from __future__ import annotations

from .core import Add, Const, Expr, Func, Mul, Pow, Var, canonical


def format_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    """Print ``e`` in the input grammar; ``parse(to_string(e)) == canonical(e)``."""
    e = canonical(e)
    if isinstance(e, Add):
        parts = []
        for i, t in enumerate(e.terms):
            s = _term(t)
            if i == 0:
                parts.append(s)
            elif s.startswith("-"):
                parts.append(" - " + s[1:])
            else:
                parts.append(" + " + s)
        return "".join(parts)
    return _term(e)


def _term(t: Expr) -> str:
    if isinstance(t, Const):
        return format_number(t.value)
    factors = list(t.factors) if isinstance(t, Mul) else [t]
    coef = 1.0
    if isinstance(factors[0], Const):
        coef = factors.pop(0).value
    num = [f for f in factors if not (isinstance(f, Pow) and f.exp < 0)]
    den = [Pow(f.base, -f.exp) for f in factors if isinstance(f, Pow) and f.exp < 0]

    sign = "-" if coef < 0 else ""
    mag = abs(coef)
    pieces = [_factor(f) for f in num]
    if mag != 1.0 or not pieces:
        pieces.insert(0, format_number(mag))
    s = sign + "*".join(pieces)
    for d in den:
        s += "/" + _factor(d)
    return s


def _factor(f: Expr) -> str:
    if isinstance(f, Pow):
        base = _atom(f.base)
        return base if f.exp == 1 else f"{base}^{f.exp}"
    return _atom(f)


def _atom(a: Expr) -> str:
    if isinstance(a, Var):
        return f"x{a.index}"
    if isinstance(a, Func):
        return f"{a.name}({to_string(a.arg)})"
    if isinstance(a, Const):
        s = format_number(a.value)
        return f"({s})" if a.value < 0 else s
    return f"({to_string(a)})"


_NP = {"sin": "np.sin", "cos": "np.cos", "sqrt": "_sqrt", "sign": "np.sign", "abs": "np.abs"}


def to_source(e: Expr) -> str:
    """Python/numpy source for ``e`` over names ``x1, x2, x3``."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Add):
        return "(" + " + ".join(to_source(t) for t in e.terms) + ")"
    if isinstance(e, Mul):
        return "(" + " * ".join(to_source(f) for f in e.factors) + ")"
    if isinstance(e, Pow):
        if e.exp == 2:
            b = to_source(e.base)
            return f"({b} * {b})"
        return f"({to_source(e.base)} ** {e.exp})"
    return f"{_NP[e.name]}({to_source(e.arg)})"
