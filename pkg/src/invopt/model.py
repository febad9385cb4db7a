"""Problem data and the structural classifier.

Second-order systems have the form ``x1' = f1(x1, x2)``,
``x2' = f2(x1, x2) + b u``; third-order systems have
``x1' = f(x2)``, ``x2' = d f(x2) + g(x3)``, ``x3' = b u``.  Both minimize
``int Q(x) + r u^2 dt``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .expr import (
    ZERO,
    Domain,
    Expr,
    Var,
    canonical,
    evaluate,
    match_affine,
    parse,
    proportional,
    split_terms,
    to_string,
    variables,
)


class ModelError(ValueError):
    """Invalid problem data."""


class Case(enum.Enum):
    I = "I"
    Ib = "Ib"
    II = "II"
    III = "III"
    THIRD = "third"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Unsupported:
    """No structural case applies; ``reason`` says why."""

    reason: str

    def __str__(self):
        return f"Unsupported({self.reason})"


# Order used when the case is chosen automatically: most specific gains first.
CASE_PRIORITY = (Case.III, Case.II, Case.I, Case.Ib)


def _expr(value, name: str) -> Expr:
    if isinstance(value, Expr):
        return canonical(value)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return parse(repr(float(value)))
    if isinstance(value, str):
        return parse(value)
    raise ModelError(f"{name}: expected an expression string, got {type(value).__name__}")


def _real(value, name: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ModelError(f"{name}: expected a real number, got {value!r}") from None
    if not math.isfinite(v):
        raise ModelError(f"{name}: must be finite")
    return v


def _vanishes_at_origin(e: Expr, n: int) -> bool:
    return abs(evaluate(e, [0.0] * n)) <= 1e-12


@dataclass(frozen=True)
class SecondOrderSystem:
    f1: Expr
    f2: Expr
    b: float = 1.0
    r: float = 1.0

    order = 2

    def __post_init__(self):
        object.__setattr__(self, "f1", _expr(self.f1, "f1"))
        object.__setattr__(self, "f2", _expr(self.f2, "f2"))
        object.__setattr__(self, "b", _real(self.b, "b"))
        object.__setattr__(self, "r", _real(self.r, "r"))
        for name in ("f1", "f2"):
            e = getattr(self, name)
            if not variables(e) <= {1, 2}:
                raise ModelError(f"{name} may depend only on x1, x2")
            if not _vanishes_at_origin(e, 2):
                raise ModelError(f"{name}(0, 0) must be 0")
        # f2 may vanish identically (kinematic chains such as the unicycle)
        if self.f1.is_zero():
            raise ModelError("f1 must not be identically zero")
        if self.b == 0.0:
            raise ModelError("b must be nonzero")
        if self.r <= 0.0:
            raise ModelError("r must be positive")

    def drift(self) -> list[Expr]:
        return [self.f1, self.f2]

    def input_vector(self) -> list[float]:
        return [0.0, self.b]

    def describe(self) -> dict:
        return {"order": 2, "f1": to_string(self.f1), "f2": to_string(self.f2), "b": self.b, "r": self.r}


@dataclass(frozen=True)
class ThirdOrderSystem:
    f: Expr
    g: Expr
    d: float = 0.0
    b: float = 1.0
    q1: float = 1.0
    q2: float = 1.0
    q3: float = 1.0
    r: float = 1.0

    order = 3

    def __post_init__(self):
        object.__setattr__(self, "f", _expr(self.f, "f"))
        object.__setattr__(self, "g", _expr(self.g, "g"))
        for name in ("d", "b", "q1", "q2", "q3", "r"):
            object.__setattr__(self, name, _real(getattr(self, name), name))
        if not variables(self.f) <= {2}:
            raise ModelError("f may depend only on x2")
        if not variables(self.g) <= {3}:
            raise ModelError("g may depend only on x3")
        for name in ("f", "g"):
            e = getattr(self, name)
            if e.is_zero():
                raise ModelError(f"{name} must not be identically zero")
            if not _vanishes_at_origin(e, 3):
                raise ModelError(f"{name}(0) must be 0")
        if self.b == 0.0:
            raise ModelError("b must be nonzero")
        if self.q1 < 0 or self.q2 < 0:
            raise ModelError("q1 and q2 must be non-negative")
        if self.q3 <= 0 or self.r <= 0:
            raise ModelError("q3 and r must be positive")

    def drift(self) -> list[Expr]:
        return [self.f, self.d * self.f + self.g, ZERO]

    def input_vector(self) -> list[float]:
        return [0.0, 0.0, self.b]

    def describe(self) -> dict:
        return {
            "order": 3, "f": to_string(self.f), "g": to_string(self.g), "d": self.d, "b": self.b,
            "q1": self.q1, "q2": self.q2, "q3": self.q3, "r": self.r,
        }


# --------------------------------------------------------------------------
# cost specifications


@dataclass(frozen=True)
class CaseICost:
    g: Expr
    Q2: Expr
    case = Case.I

    def __post_init__(self):
        object.__setattr__(self, "g", _expr(self.g, "g"))
        object.__setattr__(self, "Q2", _expr(self.Q2, "Q2"))
        if not variables(self.g) <= {1}:
            raise ModelError("g may depend only on x1")
        if not variables(self.Q2) <= {2}:
            raise ModelError("Q2 may depend only on x2")


@dataclass(frozen=True)
class CaseIbCost:
    k: float
    case = Case.Ib

    def __post_init__(self):
        object.__setattr__(self, "k", _real(self.k, "k"))
        if self.k == 0.0:
            raise ModelError("k must be nonzero")


@dataclass(frozen=True)
class CaseIICost:
    Q1: Expr
    q2: float
    case = Case.II

    def __post_init__(self):
        object.__setattr__(self, "Q1", _expr(self.Q1, "Q1"))
        object.__setattr__(self, "q2", _real(self.q2, "q2"))
        if not variables(self.Q1) <= {1}:
            raise ModelError("Q1 may depend only on x1")
        if self.q2 <= 0.0:
            raise ModelError("q2 must be positive")


@dataclass(frozen=True)
class CaseIIICost:
    q1: float
    q2: float
    case = Case.III

    def __post_init__(self):
        object.__setattr__(self, "q1", _real(self.q1, "q1"))
        object.__setattr__(self, "q2", _real(self.q2, "q2"))
        if self.q1 < 0.0:
            raise ModelError("q1 must be non-negative")
        if self.q2 <= 0.0:
            raise ModelError("q2 must be positive")


@dataclass(frozen=True)
class ThirdOrderCost:
    """Weights live on :class:`ThirdOrderSystem`."""

    case = Case.THIRD


_COST_KEYS = {
    Case.I: ("g", "Q2"),
    Case.Ib: ("k",),
    Case.II: ("Q1", "q2"),
    Case.III: ("q1", "q2"),
}


def cost_for(case: Case, table: dict):
    """Build the cost variant for ``case`` from a key/value table."""
    if case is Case.THIRD:
        return ThirdOrderCost()
    missing = [k for k in _COST_KEYS[case] if k not in table]
    if missing:
        raise ModelError(f"case {case} needs cost keys {', '.join(missing)}")
    kwargs = {k: table[k] for k in _COST_KEYS[case]}
    return {Case.I: CaseICost, Case.Ib: CaseIbCost, Case.II: CaseIICost, Case.III: CaseIIICost}[case](**kwargs)


def cost_cases(table: dict) -> list[Case]:
    """Cases whose cost keys are all present in ``table``."""
    return [c for c, keys in _COST_KEYS.items() if all(k in table for k in keys)]


# --------------------------------------------------------------------------
# structure detection


def _free_of(e: Expr, var: int) -> bool:
    return var not in variables(e)


def split_f2(sys: SecondOrderSystem) -> tuple[Expr, Expr]:
    """Split ``f2 = f21(x1) + f22(x1, x2)`` with ``f21`` the x2-free terms."""
    f21, f22 = split_terms(sys.f2, lambda t: _free_of(t, 2))
    if abs(evaluate(f22, [0.0, 0.0])) > 1e-12:
        raise ModelError("f22(0, 0) must be 0")
    return f21, f22


def case2_parts(sys: SecondOrderSystem):
    """``(g1, g2, g3, g4)`` with ``f1 = g1 + g2 x2`` and ``f2 = g3 + g4 x2``, or ``None``."""
    m1 = match_affine(sys.f1, 2)
    m2 = match_affine(sys.f2, 2)
    if m1 is None or m2 is None:
        return None
    g2, g1 = m1
    g4, g3 = m2
    return g1, g2, g3, g4


@dataclass(frozen=True)
class Case3Data:
    a: float
    c: float
    d: float
    f: Expr


def _linear_coefficient(e: Expr, var: int) -> tuple[float, Expr]:
    """Constant coefficient of the bare ``x_var`` term and the remainder."""
    lin, rest = split_terms(e, lambda t: proportional(t, Var(var)) is not None)
    return (proportional(lin, Var(var)) or 0.0), rest


def extract_case3(sys: SecondOrderSystem):
    """``Case3Data(a, c, d, f)`` or ``None`` when the structure does not match."""
    a, f = _linear_coefficient(sys.f1, 1)
    if not _free_of(f, 1) or f.is_zero():
        return None
    if abs(evaluate(f, [0.0, 0.0])) > 1e-12:
        return None
    c, rest = _linear_coefficient(sys.f2, 1)
    d = proportional(rest, f)
    if d is None:
        return None
    return Case3Data(float(a), float(c), float(d), f)


def case_reasons(sys) -> dict:
    """Map each case to ``None`` if its hypotheses hold, else a reason string."""
    if isinstance(sys, ThirdOrderSystem):
        return {Case.THIRD: None}
    out = {}

    if not _free_of(sys.f2, 1):
        out[Case.I] = "f2 not free of x1"
    elif sys.f2.is_zero():
        out[Case.I] = "f2 is identically zero"
    else:
        out[Case.I] = None

    if not _free_of(sys.f1, 1):
        out[Case.Ib] = "f1 not free of x1"
    else:
        f21, f22 = split_terms(sys.f2, lambda t: _free_of(t, 2))
        if f21.is_zero():
            out[Case.Ib] = "f2 has no x2-free part f21"
        elif abs(evaluate(f22, [0.0, 0.0])) > 1e-12:
            out[Case.Ib] = "f22(0, 0) is nonzero"
        else:
            out[Case.Ib] = None

    parts = case2_parts(sys)
    if parts is None:
        out[Case.II] = "f1 or f2 not affine in x2"
    else:
        g1, g2, g3, g4 = parts
        if g2.is_zero():
            out[Case.II] = "g2 is identically zero"
        elif abs(evaluate(g1, [0.0, 0.0])) > 1e-12 or abs(evaluate(g3, [0.0, 0.0])) > 1e-12:
            out[Case.II] = "g1(0) and g3(0) must vanish"
        else:
            out[Case.II] = None

    data = extract_case3(sys)
    if data is None:
        out[Case.III] = "f1 is not a*x1 + f(x2) with f2 = c*x1 + d*f(x2)"
    elif data.a == 0.0 and data.c != 0.0:
        out[Case.III] = "a = 0 requires c = 0"
    else:
        out[Case.III] = None
    return out


def classify(sys) -> frozenset:
    """All cases whose structural hypotheses hold.

    Returns ``{Unsupported(reason)}`` when none applies.
    """
    reasons = case_reasons(sys)
    tags = frozenset(c for c, why in reasons.items() if why is None)
    if tags:
        return tags
    return frozenset({Unsupported("; ".join(f"case {c}: {why}" for c, why in reasons.items()))})


def choose_case(sys, available=None) -> Case:
    """Highest-priority applicable case (restricted to ``available`` if given)."""
    if isinstance(sys, ThirdOrderSystem):
        return Case.THIRD
    tags = classify(sys)
    for c in CASE_PRIORITY:
        if c in tags and (available is None or c in available):
            return c
    raise ModelError(f"no applicable case: {', '.join(str(t) for t in sorted(tags, key=str))}")


# --------------------------------------------------------------------------
# problem files


@dataclass(frozen=True)
class Problem:
    system: object
    cost_table: dict = field(default_factory=dict)
    case: Case | None = None
    domain: Domain | None = None

    def cost(self, case: Case | None = None):
        """Cost variant for ``case`` (defaults to the file's case or the classifier's choice)."""
        case = case or self.case or self.auto_case()
        return cost_for(case, self.cost_table)

    def auto_case(self) -> Case:
        if isinstance(self.system, ThirdOrderSystem):
            return Case.THIRD
        return choose_case(self.system, set(cost_cases(self.cost_table)))


def _read_table(path: Path) -> dict:
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: invalid JSON: {exc}") from None
    try:
        import tomllib
    except ImportError:
        import tomli as tomllib

    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ModelError(f"{path}: invalid TOML: {exc}") from None


def parse_case(text) -> Case | None:
    if text is None or str(text).lower() == "auto":
        return None
    for c in Case:
        if str(text).lower() in (c.value.lower(), f"case{c.value}".lower()):
            return c
    raise ModelError(f"unknown case {text!r}")


def problem_from_table(table: dict) -> Problem:
    """Build a :class:`Problem` from a decoded TOML/JSON table."""
    order = int(table.get("order", 2))
    cost = dict(table.get("cost", {}))
    if order == 2:
        for key in ("f1", "f2"):
            if key not in table:
                raise ModelError(f"missing key {key!r}")
        system = SecondOrderSystem(table["f1"], table["f2"], table.get("b", 1.0), table.get("r", 1.0))
    elif order == 3:
        for key in ("f", "g"):
            if key not in table:
                raise ModelError(f"missing key {key!r}")
        weights = {k: cost.get(k, table.get(k, 1.0)) for k in ("q1", "q2", "q3")}
        system = ThirdOrderSystem(table["f"], table["g"], table.get("d", 0.0), table.get("b", 1.0),
                                  r=table.get("r", 1.0), **weights)
    else:
        raise ModelError(f"order must be 2 or 3, got {order}")
    case = parse_case(cost.pop("case", None))
    domain = None
    if "domain" in table:
        spec = table["domain"]
        try:
            domain = Domain(tuple(tuple(spec[f"x{i}"]) for i in range(1, order + 1)))
        except KeyError as exc:
            raise ModelError(f"domain is missing {exc.args[0]}") from None
    return Problem(system, cost, case, domain)


def load_system(path) -> Problem:
    """Read a TOML or JSON system description (format chosen by content)."""
    path = Path(path)
    if not path.exists():
        raise ModelError(f"{path}: no such file")
    return problem_from_table(_read_table(path))
