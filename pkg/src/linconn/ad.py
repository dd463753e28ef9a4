"""Forward-mode automatic differentiation scalars.

Dual1 carries a value plus an m-vector of directional derivatives and gives
exact first derivatives in up to m directions per evaluation.  Dual2 carries
a value, two first directional derivatives and the mixed second derivative,
which is what the curvature formulas need: an outer derivative of quantities
that already contain one derivative of the connection coefficients.

The env helpers at the bottom make geometric formulas generic over "plain
point" and "point moving in one outer direction": an env whose values are
floats yields floats, an env lifted with :func:`lift_env` yields Dual1
scalars whose eps slot is the outer derivative.  Derivatives requested
through :func:`partial_in` on a lifted env are computed with Dual2, never by
differencing derivative output.
"""

from __future__ import annotations

import math

from . import expr
from .expr import DomainError


class Dual1:
    """re + sum_j eps[j]*e_j with e_i*e_j = 0; exact Leibniz arithmetic."""

    __slots__ = ("re", "eps")

    def __init__(self, re: float, eps=()):
        self.re = float(re)
        self.eps = tuple(float(e) for e in eps)

    def __repr__(self):
        return f"Dual1({self.re!r}, {self.eps!r})"

    def real_part(self) -> float:
        return self.re

    def is_constant(self) -> bool:
        return all(e == 0.0 for e in self.eps)

    def _zip(self, other: "Dual1"):
        if len(self.eps) != len(other.eps):
            raise ValueError("seed vectors of different lengths")
        return zip(self.eps, other.eps)

    def __add__(self, other):
        if isinstance(other, Dual1):
            return Dual1(self.re + other.re, (a + b for a, b in self._zip(other)))
        if isinstance(other, (int, float)):
            return Dual1(self.re + other, self.eps)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual1):
            return Dual1(self.re - other.re, (a - b for a, b in self._zip(other)))
        if isinstance(other, (int, float)):
            return Dual1(self.re - other, self.eps)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, (int, float)):
            return Dual1(other - self.re, (-a for a in self.eps))
        return NotImplemented

    def __neg__(self):
        return Dual1(-self.re, (-a for a in self.eps))

    def __mul__(self, other):
        if isinstance(other, Dual1):
            return Dual1(
                self.re * other.re,
                (self.re * b + a * other.re for a, b in self._zip(other)),
            )
        if isinstance(other, (int, float)):
            return Dual1(self.re * other, (a * other for a in self.eps))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual1):
            if other.re == 0.0:
                raise DomainError("division by zero")
            q = self.re / other.re
            return Dual1(q, ((a - q * b) / other.re for a, b in self._zip(other)))
        if isinstance(other, (int, float)):
            if other == 0.0:
                raise DomainError("division by zero")
            return Dual1(self.re / other, (a / other for a in self.eps))
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, float)):
            if self.re == 0.0:
                raise DomainError("division by zero")
            q = other / self.re
            return Dual1(q, (-q * a / self.re for a in self.eps))
        return NotImplemented

    def _chain(self, f0: float, f1: float) -> "Dual1":
        return Dual1(f0, (f1 * a for a in self.eps))

    def sin(self):
        return self._chain(math.sin(self.re), math.cos(self.re))

    def cos(self):
        return self._chain(math.cos(self.re), -math.sin(self.re))

    def exp(self):
        v = math.exp(self.re)
        return self._chain(v, v)

    def log(self):
        if self.re <= 0.0:
            raise DomainError("log of non-positive value")
        return self._chain(math.log(self.re), 1.0 / self.re)

    def sqrt(self):
        if self.re <= 0.0:
            raise DomainError("sqrt needs a positive value when differentiating")
        v = math.sqrt(self.re)
        return self._chain(v, 0.5 / v)

    def abs(self):
        if self.re == 0.0:
            raise DomainError("abs is not differentiable at zero")
        return self if self.re > 0.0 else -self


class Dual2:
    """Value, two first directional derivatives, one mixed second derivative.

    Algebra of f + fu*e1 + fv*e2 + fuv*e1*e2 with e1^2 = e2^2 = 0; on
    polynomials fuv equals the analytic mixed partial exactly up to rounding.
    """

    __slots__ = ("f", "fu", "fv", "fuv")

    def __init__(self, f, fu=0.0, fv=0.0, fuv=0.0):
        self.f = float(f)
        self.fu = float(fu)
        self.fv = float(fv)
        self.fuv = float(fuv)

    def __repr__(self):
        return f"Dual2({self.f!r}, {self.fu!r}, {self.fv!r}, {self.fuv!r})"

    def real_part(self) -> float:
        return self.f

    def is_constant(self) -> bool:
        return self.fu == 0.0 and self.fv == 0.0 and self.fuv == 0.0

    def __add__(self, other):
        if isinstance(other, Dual2):
            return Dual2(
                self.f + other.f,
                self.fu + other.fu,
                self.fv + other.fv,
                self.fuv + other.fuv,
            )
        if isinstance(other, (int, float)):
            return Dual2(self.f + other, self.fu, self.fv, self.fuv)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual2):
            return Dual2(
                self.f - other.f,
                self.fu - other.fu,
                self.fv - other.fv,
                self.fuv - other.fuv,
            )
        if isinstance(other, (int, float)):
            return Dual2(self.f - other, self.fu, self.fv, self.fuv)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, (int, float)):
            return Dual2(other - self.f, -self.fu, -self.fv, -self.fuv)
        return NotImplemented

    def __neg__(self):
        return Dual2(-self.f, -self.fu, -self.fv, -self.fuv)

    def __mul__(self, other):
        if isinstance(other, Dual2):
            # grouped so that swapping the u and v slots is bitwise symmetric
            return Dual2(
                self.f * other.f,
                self.f * other.fu + self.fu * other.f,
                self.f * other.fv + self.fv * other.f,
                (self.f * other.fuv + self.fuv * other.f)
                + (self.fu * other.fv + self.fv * other.fu),
            )
        if isinstance(other, (int, float)):
            return Dual2(
                self.f * other, self.fu * other, self.fv * other, self.fuv * other
            )
        return NotImplemented

    __rmul__ = __mul__

    def _inverse(self) -> "Dual2":
        if self.f == 0.0:
            raise DomainError("division by zero")
        return self._chain(1.0 / self.f, -1.0 / self.f**2, 2.0 / self.f**3)

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            return self * other._inverse()
        if isinstance(other, (int, float)):
            if other == 0.0:
                raise DomainError("division by zero")
            return self * (1.0 / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, float)):
            return self._inverse() * other
        return NotImplemented

    def _chain(self, f0: float, f1: float, f2: float) -> "Dual2":
        """Lift a smooth univariate map with derivatives f1, f2 at the value.

        The second-order term multiplies fu*fv first so that exchanging the
        two seed slots is bitwise symmetric.
        """
        return Dual2(
            f0, f1 * self.fu, f1 * self.fv, f1 * self.fuv + f2 * (self.fu * self.fv)
        )

    def sin(self):
        s, c = math.sin(self.f), math.cos(self.f)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = math.sin(self.f), math.cos(self.f)
        return self._chain(c, -s, -c)

    def exp(self):
        v = math.exp(self.f)
        return self._chain(v, v, v)

    def log(self):
        if self.f <= 0.0:
            raise DomainError("log of non-positive value")
        return self._chain(math.log(self.f), 1.0 / self.f, -1.0 / self.f**2)

    def sqrt(self):
        if self.f <= 0.0:
            raise DomainError("sqrt needs a positive value when differentiating")
        v = math.sqrt(self.f)
        return self._chain(v, 0.5 / v, -0.25 / (v * self.f))

    def abs(self):
        if self.f == 0.0:
            raise DomainError("abs is not differentiable at zero")
        return self if self.f > 0.0 else -self


# ---------------------------------------------------------------------------
# Derivatives of expressions at a point


def directional(e, point, seeds):
    """Value and derivative of e at point in the direction given by seeds."""
    env = {name: Dual1(v, (seeds.get(name, 0.0),)) for name, v in point.items()}
    r = expr.evaluate(e, env)
    if isinstance(r, Dual1):
        return r.re, r.eps[0]
    return float(r), 0.0


def mixed_second(e, point, seed_u, seed_v) -> float:
    """d^2/ds dt of e at point + s*seed_u + t*seed_v, at s = t = 0."""
    env = {
        name: Dual2(v, seed_u.get(name, 0.0), seed_v.get(name, 0.0))
        for name, v in point.items()
    }
    r = expr.evaluate(e, env)
    return r.fuv if isinstance(r, Dual2) else 0.0


def gradient(e, point, names):
    """Value of e and its partials with respect to names, in one pass."""
    m = len(names)
    index = {name: j for j, name in enumerate(names)}
    env = {}
    for name, v in point.items():
        eps = [0.0] * m
        j = index.get(name)
        if j is not None:
            eps[j] = 1.0
        env[name] = Dual1(v, eps)
    r = expr.evaluate(e, env)
    if isinstance(r, Dual1):
        return r.re, list(r.eps)
    return float(r), [0.0] * m


# ---------------------------------------------------------------------------
# Generic point-or-lifted-point calculus


def real_part(s) -> float:
    if isinstance(s, (int, float)):
        return float(s)
    return s.real_part()


def dual_part(s) -> float:
    """Outer-direction derivative slot of a lifted scalar (0 for constants)."""
    if isinstance(s, Dual1):
        return s.eps[0]
    if isinstance(s, (int, float)):
        return 0.0
    raise TypeError(f"not a lifted scalar: {s!r}")


def lift_env(point, direction):
    """Env whose scalars move with unit speed in the given direction."""
    return {
        name: Dual1(v, (direction.get(name, 0.0),)) for name, v in point.items()
    }


def is_lifted(env) -> bool:
    return any(isinstance(v, Dual1) for v in env.values())


def value_in(e, env):
    return expr.evaluate(e, env)


def partial_in(e, env, seed):
    """Directional derivative of e at env for a float direction ``seed``.

    On a plain env the result is a float.  On a lifted env the result is a
    Dual1 carrying the derivative and its outer-direction derivative, via a
    single Dual2 evaluation (inner seed u, outer direction v).
    """
    if not is_lifted(env):
        env1 = {
            name: Dual1(real_part(v), (seed.get(name, 0.0),))
            for name, v in env.items()
        }
        r = expr.evaluate(e, env1)
        return r.eps[0] if isinstance(r, Dual1) else 0.0
    env2 = {}
    for name, v in env.items():
        outer = v.eps[0] if isinstance(v, Dual1) else 0.0
        env2[name] = Dual2(real_part(v), seed.get(name, 0.0), outer)
    r = expr.evaluate(e, env2)
    if isinstance(r, Dual2):
        return Dual1(r.fu, (r.fuv,))
    return 0.0


def partials_in(e, env, names):
    """Partial derivatives of e with respect to each coordinate in names."""
    if not is_lifted(env):
        point = {name: real_part(v) for name, v in env.items()}
        _, grad = gradient(e, point, names)
        return grad
    return [partial_in(e, env, {name: 1.0}) for name in names]
