"""Expression nodes and the canonical (expanded polynomial) normal form.

Every expression is reduced to a sum of monomials ``coef * prod(atom**exp)``
where an atom is a state variable, a function application with a canonical
argument, or a canonical sum raised to a negative power.  Positive integer
powers of sums are always expanded, so structural equality of canonical
trees decides polynomial identities over these atoms.
"""

from __future__ import annotations

import math
from functools import lru_cache

FUNCTIONS = ("sin", "cos", "sqrt", "sign", "abs")
MAX_VARS = 3

# Coefficients that cancel to within this relative amount are treated as 0.
_CANCEL_RTOL = 1e-12


class DomainError(ValueError):
    """Raised when an expression is evaluated outside its domain."""


class Expr:
    """Immutable expression node.

    Arithmetic operators return canonical expressions, so ``a - b`` is the
    zero constant exactly when ``a`` and ``b`` agree as polynomials over
    their atoms.
    """

    __slots__ = ("_hash",)
    _fields: tuple[str, ...] = ()

    def _astuple(self):
        return tuple(getattr(self, f) for f in self._fields)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def __eq__(self, other):
        if self is other:
            return True
        return type(self) is type(other) and self._astuple() == other._astuple()

    def __hash__(self):
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__,) + self._astuple())
            object.__setattr__(self, "_hash", h)
            return h

    def __repr__(self):
        args = ", ".join(repr(v) for v in self._astuple())
        return f"{type(self).__name__}({args})"

    def __str__(self):
        from .printer import to_string

        return to_string(self)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return canonical(Add((self, as_expr(other))))

    __radd__ = __add__

    def __sub__(self, other):
        return canonical(Add((self, Mul((Const(-1.0), as_expr(other))))))

    def __rsub__(self, other):
        return as_expr(other) - self

    def __mul__(self, other):
        return canonical(Mul((self, as_expr(other))))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return canonical(Mul((self, Pow(as_expr(other), -1))))

    def __rtruediv__(self, other):
        return as_expr(other) / self

    def __neg__(self):
        return canonical(Mul((Const(-1.0), self)))

    def __pos__(self):
        return canonical(self)

    def __pow__(self, exponent):
        if exponent == 0.5:
            return sqrt(self)
        if isinstance(exponent, float) and exponent.is_integer():
            exponent = int(exponent)
        if not isinstance(exponent, int):
            raise ValueError(f"unsupported exponent {exponent!r}")
        return canonical(Pow(self, exponent))

    # queries --------------------------------------------------------------
    @property
    def variables(self) -> frozenset:
        return variables(self)

    def is_const(self) -> bool:
        return isinstance(canonical(self), Const)

    def is_zero(self) -> bool:
        c = canonical(self)
        return isinstance(c, Const) and c.value == 0.0


class Const(Expr):
    __slots__ = ("value",)
    _fields = ("value",)

    def __init__(self, value):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"non-finite constant {value!r}")
        object.__setattr__(self, "value", value)


class Var(Expr):
    __slots__ = ("index",)
    _fields = ("index",)

    def __init__(self, index: int):
        if index not in range(1, MAX_VARS + 1):
            raise ValueError(f"state index must be 1..{MAX_VARS}, got {index}")
        object.__setattr__(self, "index", int(index))


class Add(Expr):
    __slots__ = ("terms",)
    _fields = ("terms",)

    def __init__(self, terms):
        object.__setattr__(self, "terms", tuple(terms))


class Mul(Expr):
    __slots__ = ("factors",)
    _fields = ("factors",)

    def __init__(self, factors):
        object.__setattr__(self, "factors", tuple(factors))


class Pow(Expr):
    """Integer power.  Square roots are ``Func('sqrt', ...)``."""

    __slots__ = ("base", "exp")
    _fields = ("base", "exp")

    def __init__(self, base: Expr, exp: int):
        if int(exp) != exp:
            raise ValueError(f"Pow exponent must be an integer, got {exp!r}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exp", int(exp))


class Func(Expr):
    __slots__ = ("name", "arg")
    _fields = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Const(value)
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


def x(i: int) -> Expr:
    """State variable ``x_i``."""
    return Var(i)


def sin(e) -> Expr:
    return canonical(Func("sin", as_expr(e)))


def cos(e) -> Expr:
    return canonical(Func("cos", as_expr(e)))


def sqrt(e) -> Expr:
    return canonical(Func("sqrt", as_expr(e)))


def sign(e) -> Expr:
    return canonical(Func("sign", as_expr(e)))


def abs_(e) -> Expr:
    return canonical(Func("abs", as_expr(e)))


@lru_cache(maxsize=None)
def variables(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset((e.index,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Add):
        return frozenset().union(*(variables(t) for t in e.terms))
    if isinstance(e, Mul):
        return frozenset().union(*(variables(f) for f in e.factors))
    if isinstance(e, Pow):
        return variables(e.base)
    return variables(e.arg)


def free_of(e: Expr, var: int) -> bool:
    return var not in variables(e)


def contains_func(e: Expr, names) -> bool:
    if isinstance(e, Func):
        return e.name in names or contains_func(e.arg, names)
    if isinstance(e, Add):
        return any(contains_func(t, names) for t in e.terms)
    if isinstance(e, Mul):
        return any(contains_func(f, names) for f in e.factors)
    if isinstance(e, Pow):
        return contains_func(e.base, names)
    return False


@lru_cache(maxsize=None)
def sort_key(e: Expr) -> tuple:
    """Deterministic total order on canonical trees (independent of hash seed)."""
    if isinstance(e, Const):
        return (0, e.value)
    if isinstance(e, Var):
        return (1, e.index)
    if isinstance(e, Func):
        return (2, e.name, sort_key(e.arg))
    if isinstance(e, Pow):
        return (3, sort_key(e.base), e.exp)
    if isinstance(e, Mul):
        return (4, tuple(sort_key(f) for f in e.factors))
    return (5, tuple(sort_key(t) for t in e.terms))


# --------------------------------------------------------------------------
# polynomial normal form
#
# Poly: dict mapping a monomial (sorted tuple of (atom, exponent)) to a float
# coefficient.  Dicts returned from cached functions must not be mutated.


def _mono_key(mono) -> tuple:
    return tuple((sort_key(a), e) for a, e in mono)


def _accumulate(acc: dict, mono, coef: float) -> None:
    if coef == 0.0:
        return
    old = acc.get(mono)
    if old is None:
        acc[mono] = coef
        return
    new = old + coef
    if new == 0.0 or abs(new) <= _CANCEL_RTOL * max(abs(old), abs(coef)):
        del acc[mono]
    else:
        acc[mono] = new


def sorted_terms(p: dict) -> list:
    return sorted(p.items(), key=lambda item: _mono_key(item[0]))


def const_poly(c: float) -> dict:
    return {(): float(c)} if c != 0.0 else {}


def padd(p: dict, q: dict) -> dict:
    acc = dict(p)
    for m, c in q.items():
        _accumulate(acc, m, c)
    return acc


def pscale(p: dict, s: float) -> dict:
    if s == 0.0:
        return {}
    return {m: c * s for m, c in p.items()}


def pmul(p: dict, q: dict) -> dict:
    acc: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            merged = dict(m1)
            for a, e in m2:
                merged[a] = merged.get(a, 0) + e
            for m, c in _normalize_mono(merged, c1 * c2).items():
                _accumulate(acc, m, c)
    return acc


def ppow(p: dict, n: int) -> dict:
    if n < 0:
        return ppow(pinv(p), -n)
    result = {(): 1.0}
    base = p
    while n:
        if n & 1:
            result = pmul(result, base)
        n >>= 1
        if n:
            base = pmul(base, base)
    return result


def pinv(p: dict) -> dict:
    if not p:
        raise ZeroDivisionError("division by an expression that is identically zero")
    if len(p) == 1:
        (mono, c), = p.items()
        return _normalize_mono({a: -e for a, e in mono}, 1.0 / c)
    lead = sorted_terms(p)[0][1]
    base = from_poly(pscale(p, 1.0 / lead))
    return {((base, -1),): 1.0 / lead}


def _is_nonneg_atom(atom: Expr) -> bool:
    return isinstance(atom, Func) and atom.name in ("sqrt", "abs")


def _normalize_mono(exps: dict, coef: float) -> dict:
    """Apply the atom reduction rules to one monomial, returning a Poly."""
    keep: dict = {}
    extra: list = []
    for atom, e in exps.items():
        if e == 0:
            continue
        if isinstance(atom, Func) and atom.name in ("sqrt", "abs") and abs(e) >= 2:
            k = int(e / 2)
            rem = e - 2 * k
            inner = _poly(atom.arg)
            extra.append(ppow(inner, k if atom.name == "sqrt" else 2 * k))
            if rem:
                keep[atom] = rem
        elif isinstance(atom, Func) and atom.name == "sign":
            keep[atom] = 1 if abs(e) % 2 else 2
        elif isinstance(atom, Add) and e > 0:
            extra.append(ppow(_poly(atom), e))
        else:
            keep[atom] = e
    # sign(A) * abs(A) == A
    for atom in [a for a in keep if isinstance(a, Func) and a.name == "abs"]:
        partner = Func("sign", atom.arg)
        if keep.get(atom) == 1 and keep.get(partner, 0) > 0:
            del keep[atom]
            keep[partner] -= 1
            if keep[partner] == 0:
                del keep[partner]
            extra.append(_poly(atom.arg))
    mono = tuple(sorted(keep.items(), key=lambda it: sort_key(it[0])))
    result = {mono: coef} if coef != 0.0 else {}
    for q in extra:
        result = pmul(result, q)
    return result


def _atom_poly(atom: Expr, coef: float = 1.0) -> dict:
    return {((atom, 1),): coef}


_FOLD = {
    "sin": math.sin,
    "cos": math.cos,
    "sign": lambda v: float((v > 0) - (v < 0)),
    "abs": abs,
}


def _make_func(name: str, p: dict) -> dict:
    if not p or (len(p) == 1 and () in p):
        value = p.get((), 0.0)
        if name == "sqrt":
            if value < 0:
                raise DomainError(f"sqrt of negative constant {value}")
            return const_poly(math.sqrt(value))
        return const_poly(_FOLD[name](value))

    terms = sorted_terms(p)
    lead = terms[0][1]
    if name == "sin":
        if lead < 0:
            return pscale(_atom_poly(Func("sin", from_poly(pscale(p, -1.0)))), -1.0)
        return _atom_poly(Func("sin", from_poly(p)))
    if name == "cos":
        q = pscale(p, -1.0) if lead < 0 else p
        return _atom_poly(Func("cos", from_poly(q)))

    if len(p) == 1:
        (mono, c), = p.items()
        if name == "sqrt":
            return _sqrt_monomial(mono, c)
        exps: dict = {}
        for atom, e in mono:
            if name == "abs" and _is_nonneg_atom(atom):
                exps[atom] = exps.get(atom, 0) + e
            elif name == "abs" and isinstance(atom, Func) and atom.name == "sign":
                exps[atom] = 2
            else:
                key = Func(name, atom)
                exps[key] = exps.get(key, 0) + e
        scale = abs(c) if name == "abs" else _FOLD["sign"](c)
        return _normalize_mono(exps, scale)

    # sums: pull the leading coefficient out of the argument
    if name == "sqrt":
        scale = abs(lead)
        return _atom_poly(Func("sqrt", from_poly(pscale(p, 1.0 / scale))), math.sqrt(scale))
    inner = from_poly(pscale(p, 1.0 / lead))
    scale = abs(lead) if name == "abs" else _FOLD["sign"](lead)
    return _atom_poly(Func(name, inner), scale)


def _sqrt_monomial(mono, c: float) -> dict:
    outer: dict = {}
    inner: dict = {}
    for atom, e in mono:
        k = int(e / 2)
        rem = e - 2 * k
        if k:
            target = atom if _is_nonneg_atom(atom) else Func("abs", atom)
            outer[target] = outer.get(target, 0) + k
        if rem:
            inner[atom] = rem
    scale = math.sqrt(abs(c))
    if inner or c < 0:
        sgn = 1.0 if c > 0 else -1.0
        arg = from_poly(_normalize_mono(inner, sgn))
        outer[Func("sqrt", arg)] = outer.get(Func("sqrt", arg), 0) + 1
    return _normalize_mono(outer, scale)


@lru_cache(maxsize=None)
def _poly(e: Expr) -> dict:
    if isinstance(e, Const):
        return const_poly(e.value)
    if isinstance(e, Var):
        return _atom_poly(e)
    if isinstance(e, Add):
        acc: dict = {}
        for t in e.terms:
            for m, c in _poly(t).items():
                _accumulate(acc, m, c)
        return acc
    if isinstance(e, Mul):
        result = {(): 1.0}
        for f in e.factors:
            result = pmul(result, _poly(f))
            if not result:
                break
        return result
    if isinstance(e, Pow):
        return ppow(_poly(e.base), e.exp)
    if isinstance(e, Func):
        return _make_func(e.name, _poly(e.arg))
    raise TypeError(f"not an expression: {e!r}")


def poly(e: Expr) -> dict:
    """Canonical polynomial form of ``e`` (read-only dict)."""
    return _poly(e)


def _term(mono, c: float) -> Expr:
    factors = [a if e == 1 else Pow(a, e) for a, e in mono]
    if not factors:
        return Const(c)
    if c == 1.0:
        return factors[0] if len(factors) == 1 else Mul(tuple(factors))
    return Mul((Const(c),) + tuple(factors))


def from_poly(p: dict) -> Expr:
    if not p:
        return ZERO
    terms = [_term(m, c) for m, c in sorted_terms(p)]
    return terms[0] if len(terms) == 1 else Add(tuple(terms))


@lru_cache(maxsize=None)
def canonical(e: Expr) -> Expr:
    """Canonical form: expanded, flattened, sorted, constants folded."""
    return from_poly(_poly(e))


def equivalent(a, b) -> bool:
    """True when ``a`` and ``b`` have the same canonical form."""
    return (as_expr(a) - as_expr(b)).is_zero()


def const_value(e: Expr) -> float | None:
    c = canonical(e)
    return c.value if isinstance(c, Const) else None
