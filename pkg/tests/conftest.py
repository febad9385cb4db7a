"""Shared fixtures and random-expression generators."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from invopt import registry
from invopt.expr import Const, Var, canonical, cos, poly, sin, sqrt
from invopt.synth import synthesize

SMALL_INTS = st.integers(min_value=-3, max_value=3)


def small_const():
    return st.sampled_from([-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0]).map(Const)


def leaves(nvars: int = 2):
    return st.one_of(st.integers(1, nvars).map(Var), small_const())


def smooth_exprs(nvars: int = 2, max_leaves: int = 6):
    """Smooth expressions: sums, products, small powers, sin, cos and sqrt(1 + e^2)."""

    def extend(children):
        return st.one_of(
            st.tuples(children, children).map(lambda p: p[0] + p[1]),
            st.tuples(children, children).map(lambda p: p[0] * p[1]),
            st.tuples(children, st.integers(2, 3)).map(lambda p: p[0] ** p[1]),
            children.map(sin),
            children.map(cos),
            children.map(lambda c: sqrt(1 + c * c)),
        )

    return st.recursive(leaves(nvars), extend, max_leaves=max_leaves)


def antideriv_class(var: int = 2):
    """Polynomial in ``x_var`` (times free factors) times an optional sin/cos of an affine argument."""
    other = 1 if var == 2 else 2
    power = st.integers(0, 3)
    slope = st.sampled_from([-2.0, -1.0, 0.5, 1.0, 3.0])
    shift = st.sampled_from([0.0, 0.25, -1.0])
    coef = st.sampled_from([-2.0, 1.0, 0.5, 3.0])
    trig = st.sampled_from([None, sin, cos])
    free = st.sampled_from([Const(1.0), Var(other), Var(other) ** 2, sin(Var(other))])

    @st.composite
    def term(draw):
        t = draw(coef) * draw(free) * Var(var) ** draw(power)
        f = draw(trig)
        if f is not None:
            t = t * f(draw(slope) * Var(var) + draw(shift))
        return t

    return st.lists(term(), min_size=1, max_size=3).map(lambda ts: canonical(sum(ts[1:], ts[0])))


def random_smooth_expr(rng: np.random.Generator, depth: int = 3, nvars: int = 2):
    """Seeded counterpart of :func:`smooth_exprs` for fixed-size acceptance sweeps."""
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.65:
            return Var(int(rng.integers(1, nvars + 1)))
        return Const(float(rng.choice([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0])))
    kind = int(rng.integers(0, 6))
    a = random_smooth_expr(rng, depth - 1, nvars)
    if kind == 0:
        return a + random_smooth_expr(rng, depth - 1, nvars)
    if kind == 1:
        return a * random_smooth_expr(rng, depth - 1, nvars)
    if kind == 2:
        return a ** int(rng.integers(2, 4))
    if kind == 3:
        return sin(a)
    if kind == 4:
        return cos(a)
    return sqrt(1 + a * a)


def random_antideriv_expr(rng: np.random.Generator, var: int = 2):
    other = 1 if var == 2 else 2
    total = Const(0.0)
    for _ in range(int(rng.integers(1, 4))):
        t = float(rng.choice([-2.0, 1.0, 0.5, 3.0])) * Var(var) ** int(rng.integers(0, 4))
        if rng.random() < 0.5:
            t = t * Var(other)
        kind = int(rng.integers(0, 3))
        if kind:
            arg = float(rng.choice([-2.0, -1.0, 0.5, 1.0, 3.0])) * Var(var) + float(rng.choice([0.0, 0.25]))
            t = t * (sin(arg) if kind == 1 else cos(arg))
        total = total + t
    return canonical(total)


def same_canonical(a, b, tol: float = 1e-10) -> bool:
    """Canonical forms agree up to floating-point rounding in the coefficients."""
    return all(abs(c) <= tol for c in poly(canonical(a - b)).values())


def central_difference(fn, x, i, h=1e-5):
    e = np.zeros_like(x)
    e[i] = h
    return (fn(*(x + e)) - fn(*(x - e))) / (2 * h)


@pytest.fixture(scope="session")
def results():
    """Synthesized result for every registry entry, keyed by name."""
    return {e.name: synthesize(e.system, e.cost, None, e.pd_region) for e in registry.REGISTRY}
