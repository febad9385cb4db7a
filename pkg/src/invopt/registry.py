"""Built-in worked examples with their expected closed forms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Domain, Expr, canonical, parse, poly, to_string
from .expr.core import from_poly, sorted_terms
from .model import (
    CaseICost,
    CaseIbCost,
    CaseIICost,
    CaseIIICost,
    SecondOrderSystem,
    ThirdOrderCost,
    ThirdOrderSystem,
)
from .synth import SynthesisResult, synthesize, value_eval, value_string, value_symbolic


@dataclass(frozen=True)
class ExampleEntry:
    name: str
    system: object
    cost: object
    expected: dict
    source: str
    domain: Domain | None = None
    pd_region: Domain | None = None
    expected_overall: str = "pass"
    notes: tuple = field(default_factory=tuple)

    def resolved_domain(self) -> Domain:
        if self.domain is not None:
            return self.domain
        return Domain.cube(2, 2.0) if self.system.order == 2 else Domain.cube(3, 1.0)


_S = SecondOrderSystem

REGISTRY = (
    ExampleEntry(
        "case1_sqrt",
        _S("-x1^3 - 2*x1*x2", "x2*sqrt(3*(1 + x2^2))"),
        CaseICost("x1", "x2^2 + x2^4"),
        {
            "u": "-(2 + sqrt(3))*x2*sqrt(1 + x2^2)",
            "V": "2*(2 + sqrt(3))*((1 + x2^2)*sqrt(1 + x2^2) - 1)/3 + x1^2/2",
            "L": "(x1^2 + x2)^2 + x2^4 + (2 + sqrt(3))^2*x2^2*(1 + x2^2)",
        },
        "x2 drift with a square-root factor, state cost split as g(x1) and Q2(x2)",
    ),
    ExampleEntry(
        "case1b_cubic",
        _S("x2^3", "-x1^3 - x1^2*x2"),
        CaseIbCost(-1.0),
        {"u": "-x2^3", "V": "(x1^4 + x2^4)/2", "L": "2*x2^6 + 2*x1^2*x2^4"},
        "cubic chain with input proportional to f1(x2)",
    ),
    ExampleEntry(
        "mass_spring",
        _S("x2", "-x1^3"),
        CaseIICost("0", 1.0),
        {"u": "-x2", "V": "x2^2 + 0.5*x1^4", "L": "2*x2^2"},
        "undamped mass with a hardening spring",
    ),
    ExampleEntry(
        "van_der_pol",
        _S("x2", "-x1 + 0.5*(1 - x1^2)*x2"),
        CaseIICost("0", 1.0),
        {"u": "-x2", "V": "x1^2 + x2^2", "L": "x1^2*x2^2 + x2^2"},
        "Van der Pol oscillator",
    ),
    ExampleEntry(
        "strict_feedback",
        _S("-x1^3 + x2", "0"),
        CaseIICost("x1^2", 2.0),
        {
            "u": "-x1 - sqrt(2)*x2",
            "V": "2*x1*x2 + sqrt(2)*(x2^2 + x1^2) + x1^4/2",
            "L": "x1^2 + 2*sqrt(2)*x1^4 + 2*x1^6 + (x1 + sqrt(2)*x2)^2",
        },
        "strict-feedback chain with cubic damping, q1 = 1 and q2 = 2",
    ),
    ExampleEntry(
        "double_integrator",
        _S("x2", "0"),
        CaseIIICost(1.0, 1.0),
        {"u": "-x1 - 2*x2", "V": "(x1 + x2)^2 + x2^2", "L": "(x1 + x2)^2 + x2^2 + (x1 + 2*x2)^2"},
        "double integrator",
    ),
    ExampleEntry(
        "linear_combination",
        _S("-x1 + sin(x2)", "x1 - sin(x2)"),
        CaseIIICost(1.0, 1.0),
        {"u": "-x1 - x2", "V": "(x1 + x2)^2", "L": "2*(x1 + x2)^2"},
        "f2 a multiple of f1 (d = c/a), giving a linear controller",
        expected_overall="partial",
    ),
    ExampleEntry(
        "cubic_spring",
        _S("x2^3", "0"),
        CaseIIICost(1.0, 1.0),
        {
            "u": "-x1 - x2 - x2^3",
            "V": "(x1 + x2)^2 + 0.5*x2^4",
            "L": "(x1 + x2)^2 + x2^6 + (x1 + x2 + x2^3)^2",
        },
        "integrator chain through a cubic",
    ),
    ExampleEntry(
        "unicycle",
        _S("sin(x2)", "0"),
        CaseIIICost(1.0, 1.0),
        {
            "u": "-x1 - x2 - sin(x2)",
            "V": "(x1 + x2)^2 + 2 - 2*cos(x2)",
            "L": "(x1 + x2)^2 + sin(x2)^2 + (x1 + x2 + sin(x2))^2",
        },
        "unicycle path following (lateral offset and heading)",
        domain=Domain.cube(2, 4.0),
        expected_overall="partial",
    ),
    ExampleEntry(
        "unicycle_3rd",
        ThirdOrderSystem("sin(x2)", "x3", d=0.0, b=1.0, q1=1.0, q2=4.0, q3=1.0, r=1.0),
        ThirdOrderCost(),
        {
            "u": "-x1 - 2*x2 - 3*x3 - sin(x2)",
            "V": "(x1 + 2*x2 + x3)^2 + 2*x3^2 + 2*x3*sin(x2) - 4*cos(x2) + 4",
            "L": "(x1 + 2*x2 + x3)^2 + (4 - 2*cos(x2))*x3^2 + sin(x2)^2 + (x1 + 2*x2 + 3*x3 + sin(x2))^2",
        },
        "unicycle with steering-rate input",
        pd_region=Domain(((-1.0, 1.0), (-math.pi / 10, math.pi / 10), (-15 / math.pi, 15 / math.pi))),
        expected_overall="partial",
    ),
)

NAMES = tuple(e.name for e in REGISTRY)


def _key(name: str) -> str:
    return name.replace("_", "").replace("-", "").lower()


def get(name: str) -> ExampleEntry:
    """Look up an entry; case, ``_`` and ``-`` are ignored, so ``vanderpol`` finds ``van_der_pol``."""
    for e in REGISTRY:
        if _key(e.name) == _key(name):
            return e
    raise KeyError(f"unknown example {name!r}; choose from {', '.join(e.name for e in REGISTRY)}")


GRID_TOL = 1e-10
FIELDS = ("u", "V", "L")


@dataclass(frozen=True)
class FieldComparison:
    """Outcome of comparing one synthesized field with its expected string."""

    field: str
    expected: str
    actual: str
    method: str | None
    max_error: float
    diff: tuple = ()

    @property
    def match(self) -> bool:
        return self.method is not None


def _actual(result: SynthesisResult, name: str):
    return {"u": result.u, "V": result.V, "L": result.L}[name]


def structural_diff(expected: Expr, actual: Expr) -> list[str]:
    """Canonical terms present on only one side (or with different coefficients)."""
    pe, pa = poly(canonical(expected)), poly(canonical(actual))
    lines = []
    for mono, c in sorted_terms(pe):
        if mono not in pa:
            lines.append(f"- {to_string(from_poly({mono: c}))}")
        elif abs(pa[mono] - c) > GRID_TOL * max(1.0, abs(c)):
            lines.append(f"~ {to_string(from_poly({mono: 1.0}))}: expected coefficient {c:.12g}, got {pa[mono]:.12g}")
    for mono, c in sorted_terms(pa):
        if mono not in pe:
            lines.append(f"+ {to_string(from_poly({mono: c}))}")
    return lines


def compare_field(name: str, expected: str, actual, domain: Domain, resolution: int = 21) -> FieldComparison:
    """Canonical equality, else pointwise equality on a grid to ``1e-10``.

    The grid tolerance is relative to ``1 + |expected|``.
    """
    target = parse(expected)
    sym = value_symbolic(actual) if name == "V" else actual
    shown = value_string(actual) if name == "V" else to_string(actual)
    if sym is not None and (canonical(sym) - target).is_zero():
        return FieldComparison(name, to_string(target), shown, "symbolic", 0.0)
    pts = domain.grid(resolution)
    want = value_eval(target, pts)
    got = value_eval(actual, pts)
    err = float(np.max(np.abs(got - want) / (1.0 + np.abs(want))))
    if np.isfinite(err) and err <= GRID_TOL:
        return FieldComparison(name, to_string(target), shown, "grid", err)
    diff = tuple(structural_diff(target, sym)) if sym is not None else (f"expected {to_string(target)}", f"got {shown}")
    return FieldComparison(name, to_string(target), shown, None, err, diff)


def compare_entry(entry: ExampleEntry, result: SynthesisResult | None = None) -> list[FieldComparison]:
    """Synthesize ``entry`` (unless ``result`` is given) and compare u, V and L."""
    result = result or synthesize(entry.system, entry.cost, None, entry.pd_region)
    domain = entry.resolved_domain()
    return [compare_field(f, entry.expected[f], _actual(result, f), domain) for f in FIELDS]
