"""Numerical evaluation of expressions and adaptive Simpson quadrature."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .core import DomainError, Expr, canonical, variables
from .printer import to_source


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach its tolerance."""


def _sqrt(a):
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise DomainError(f"sqrt of negative value (min {float(np.min(a)):.3g})")
    return np.sqrt(a)


@lru_cache(maxsize=None)
def lambdify(e: Expr):
    """Compile ``e`` into ``f(x1, x2, x3)`` that broadcasts over numpy arrays."""
    src = f"def _f(x1=0.0, x2=0.0, x3=0.0):\n    return {to_source(canonical(e))}\n"
    namespace = {"np": np, "_sqrt": _sqrt}
    exec(compile(src, "<expr>", "exec"), namespace)
    return namespace["_f"]


def evaluate(e: Expr, x) -> float:
    """Evaluate ``e`` at a single state vector ``x``."""
    # numpy scalars so that division by zero yields inf/nan instead of raising
    values = [np.float64(v) for v in x]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return float(lambdify(e)(*values))


def evaluate_many(e: Expr, points) -> np.ndarray:
    """Evaluate ``e`` on ``points`` of shape ``(n, ...)``; returns shape ``(...)``."""
    points = np.asarray(points, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = lambdify(e)(*points)
    return np.broadcast_to(np.asarray(out, dtype=float), points.shape[1:]).copy()


def quad_many(fn, lo, hi, tol: float = 1e-10, max_subdivisions: int = 10**6, min_depth: int = 4):
    """Integrate the vectorized ``fn`` over each ``[lo[i], hi[i]]``.

    Each integral is computed by adaptive Simpson to absolute tolerance
    ``tol``; all intervals are refined together level by level.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    lo, hi = np.broadcast_arrays(lo, hi)
    total = np.zeros(lo.shape)
    a = lo.ravel().copy()
    b = hi.ravel().copy()
    owner = np.arange(a.size)
    m = 0.5 * (a + b)
    fa, fm, fb = fn(a), fn(m), fn(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    eps = np.full(a.size, float(tol))
    flat_total = total.ravel()
    depth = 0
    used = 0
    while a.size:
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = fn(lm), fn(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if not np.all(np.isfinite(delta)):
            raise QuadratureError("integrand is not finite on the interval")
        done = np.abs(delta) <= 15.0 * eps
        if depth < min_depth:
            done &= a == b
        np.add.at(flat_total, owner[done], (left + right + delta / 15.0)[done])
        keep = ~done
        used += int(np.count_nonzero(keep))
        if used > max_subdivisions:
            raise QuadratureError(f"tolerance {tol:g} not reached within {max_subdivisions} subdivisions")
        a, m, b = a[keep], m[keep], b[keep]
        fa, fm, fb = fa[keep], fm[keep], fb[keep]
        lm, rm, flm, frm = lm[keep], rm[keep], flm[keep], frm[keep]
        left, right = left[keep], right[keep]
        owner, eps = owner[keep], eps[keep]
        # split: left halves then right halves
        a, m, b = np.concatenate([a, m]), np.concatenate([lm, rm]), np.concatenate([m, b])
        fa, fm, fb = np.concatenate([fa, fm]), np.concatenate([flm, frm]), np.concatenate([fm, fb])
        whole = np.concatenate([left, right])
        owner = np.concatenate([owner, owner])
        eps = np.concatenate([eps, eps]) / 2.0
        depth += 1
    return total


def _univariate(e: Expr, var: int):
    extra = variables(e) - {var}
    if extra:
        names = ", ".join(f"x{i}" for i in sorted(extra))
        raise ValueError(f"integrand depends on {names} besides x{var}")
    f = lambdify(e)

    def fn(s):
        args = {f"x{var}": s}
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.broadcast_to(np.asarray(f(**args), dtype=float), np.shape(s))

    return fn


def quad(e: Expr, var: int, lo: float, hi: float, tol: float = 1e-10,
         max_subdivisions: int = 10**6) -> float:
    """Integral of ``e`` over ``x_var`` in ``[lo, hi]`` (adaptive Simpson)."""
    return float(quad_many(_univariate(e, var), [lo], [hi], tol, max_subdivisions)[0])


def integral_from_zero(e: Expr, var: int, upper, tol: float = 1e-12) -> np.ndarray:
    """``int_0^{upper} e d x_var`` for an array of upper limits."""
    upper = np.asarray(upper, dtype=float)
    uniq, inverse = np.unique(upper.ravel(), return_inverse=True)
    vals = quad_many(_univariate(e, var), np.zeros_like(uniq), uniq, tol)
    return vals[inverse].reshape(upper.shape)
