"""Nonlinear connections: coefficient evaluation, lifts, projectors, curvature.

Sign convention used throughout the package: the horizontal lift of a base
vector v at a point with coordinates (x, y) has fiber components
-gamma^A_i(x, y) v^i, hence the connector is kappa(w)^A = dy^A +
gamma^A_i dx^i and vanishes exactly on horizontal vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ad
from . import expr as ex
from .geom import BundleSpace, FiberPoint, TangentE

PROJECTABLE_SAMPLES = 32
PROJECTABLE_TOL = 1e-9


class NotProjectableError(ValueError):
    """Operation needs a projectable field and the certificate failed."""


def _check_arity(exprs, allowed: set[str], what: str):
    for e in exprs:
        bad = ex.variables(e) - allowed
        if bad:
            raise ValueError(f"{what} may reference {sorted(allowed)} only, found {sorted(bad)}")


@dataclass(frozen=True)
class NonlinearConnection:
    """Connection coefficients gamma^A_i(x, y) as a k x n matrix of expressions."""

    space: BundleSpace
    gamma: tuple

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.gamma)
        object.__setattr__(self, "gamma", rows)
        if len(rows) != self.space.k or any(len(r) != self.space.n for r in rows):
            raise ValueError(
                f"gamma must be {self.space.k} x {self.space.n}"
            )
        allowed = set(self.space.x_names) | set(self.space.y_names)
        for row in rows:
            _check_arity(row, allowed, "gamma entries")

    # -- evaluation -----------------------------------------------------

    def gamma_at(self, a: FiberPoint) -> np.ndarray:
        """Entrywise value of the coefficient matrix at an in-domain point."""
        self.space.require_in_domain(a.x, a.y)
        env = self.space.point_env(a.x, a.y)
        return np.array(
            [[ad.real_part(ex.evaluate(g, env)) for g in row] for row in self.gamma]
        )

    def gamma_env(self, env) -> list:
        """Coefficient matrix over a generic (possibly lifted) environment."""
        return [[ad.value_in(g, env) for g in row] for row in self.gamma]

    def horizontal_lift(self, a: FiberPoint, v) -> TangentE:
        """Tangent with base velocity v and fiber velocity -gamma(a) v."""
        v = np.asarray(v, dtype=float)
        G = self.gamma_at(a)
        return TangentE(a, v, -G @ v)

    def connector(self, w: TangentE) -> np.ndarray:
        """Fiber vector kappa(w) = dy + gamma(at) dx; zero iff w is horizontal."""
        G = self.gamma_at(w.at)
        return w.dy + G @ w.dx

    def project_h(self, w: TangentE) -> TangentE:
        return self.horizontal_lift(w.at, w.dx)

    def project_v(self, w: TangentE) -> TangentE:
        h = self.project_h(w)
        return TangentE(w.at, w.dx - h.dx, w.dy - h.dy)

    # -- derived fields ---------------------------------------------------

    def horizontal_field(self, v) -> "FieldOnE":
        """Horizontal lift of a constant base vector, as an expression field."""
        v = np.asarray(v, dtype=float)
        comp_x = tuple(ex.lit(vi) for vi in v)
        comp_y = tuple(
            ex.neg(ex.scaled_sum(zip(v, row))) for row in self.gamma
        )
        return FieldOnE(comp_x, comp_y)

    def curvature(self, a: FiberPoint, v1, v2) -> np.ndarray:
        """Connector of the bracket of the two constant horizontal lifts.

        Antisymmetric and bilinear in (v1, v2); identically zero when the
        horizontal distribution is involutive.
        """
        self.space.require_in_domain(a.x, a.y)
        env = self.space.point_env(a.x, a.y)
        return np.array(self.curvature_env(env, v1, v2), dtype=float)

    def curvature_env(self, env, v1, v2) -> list:
        h1 = self.horizontal_field(v1)
        h2 = self.horizontal_field(v2)
        comps = bracket_env(self.space, h1, h2, env)
        return connector_env(self, env, comps[: self.space.n], comps[self.space.n :])

    def holonomy_curvature(self, a: FiberPoint, v1, v2, h: float = 1e-2,
                           substeps: int = 32) -> np.ndarray:
        """Independent curvature estimate from small horizontal loops.

        Lifts the base rectangle spanned by h*v1, h*v2 horizontally (each leg
        integrated with a private fixed-step RK4), measures the fiber defect
        of the closed loop, and removes the odd and next even error terms by
        symmetrization and Richardson extrapolation.  Not used on any
        production path; it exists as a cross-check for ``curvature``.
        """
        v1 = np.asarray(v1, dtype=float)
        v2 = np.asarray(v2, dtype=float)

        def leg(x, y, dirv):
            # horizontal lift of t -> x + t*dirv over [0, 1]
            dt = 1.0 / substeps

            def f(xc, yc):
                env = self.space.point_env(xc, yc)
                G = np.array(
                    [[ad.real_part(ex.evaluate(g, env)) for g in row] for row in self.gamma]
                )
                return -G @ dirv

            for _ in range(substeps):
                k1 = f(x, y)
                k2 = f(x + 0.5 * dt * dirv, y + 0.5 * dt * k1)
                k3 = f(x + 0.5 * dt * dirv, y + 0.5 * dt * k2)
                k4 = f(x + dt * dirv, y + dt * k3)
                y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                x = x + dt * dirv
            return x, y

        def loop_defect(step):
            x, y = a.x.copy(), a.y.copy()
            for v in (step * v1, step * v2, -step * v1, -step * v2):
                x, y = leg(x, y, v)
            return (y - a.y) / step**2

        def symmetric(step):
            return 0.5 * (loop_defect(step) + loop_defect(-step))

        g1 = symmetric(h)
        g2 = symmetric(h / 2.0)
        return (4.0 * g2 - g1) / 3.0


@dataclass(frozen=True)
class FieldOnE:
    """Vector field on the total space with expression components (W^i, W^A)."""

    comp_x: tuple
    comp_y: tuple
    _cert: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "comp_x", tuple(self.comp_x))
        object.__setattr__(self, "comp_y", tuple(self.comp_y))

    def component(self, alpha: int):
        n = len(self.comp_x)
        return self.comp_x[alpha] if alpha < n else self.comp_y[alpha - n]

    def at(self, space: BundleSpace, p: FiberPoint) -> TangentE:
        env = space.point_env(p.x, p.y)
        dx = [ad.real_part(ex.evaluate(e, env)) for e in self.comp_x]
        dy = [ad.real_part(ex.evaluate(e, env)) for e in self.comp_y]
        return TangentE(p, np.array(dx), np.array(dy))

    def is_projectable(self, space: BundleSpace, seed: int = 0) -> bool:
        """Certificate: base components do not respond to fiber directions.

        Expressions are opaque, so the flag comes from probing directional
        derivatives in y at PROJECTABLE_SAMPLES seeded random in-domain
        points; the result is cached per space dimensions and seed.
        """
        syntactic = all(
            not (ex.variables(e) & set(space.y_names)) for e in self.comp_x
        )
        if syntactic:
            return True
        key = (space.n, space.k, seed)
        cached = self._cert.get(key)
        if cached is not None:
            return cached
        from .sampling import sample_in_domain

        rng = np.random.default_rng(seed)
        ok = True
        for _ in range(PROJECTABLE_SAMPLES):
            a = sample_in_domain(space, rng)
            point = space.point_env(a.x, a.y)
            for e in self.comp_x:
                for yname in space.y_names:
                    _, d = ad.directional(e, point, {yname: 1.0})
                    if abs(d) > PROJECTABLE_TOL:
                        ok = False
        self._cert[key] = ok
        return ok


@dataclass(frozen=True)
class SectionAlongPi:
    """Section along the projection: k expression components sigma^A(x, y)."""

    comp: tuple

    def __post_init__(self):
        object.__setattr__(self, "comp", tuple(self.comp))

    def at(self, space: BundleSpace, p: FiberPoint) -> np.ndarray:
        env = space.point_env(p.x, p.y)
        return np.array([ad.real_part(ex.evaluate(e, env)) for e in self.comp])

    def values_env(self, env) -> list:
        return [ad.value_in(e, env) for e in self.comp]

    def vertical_field(self, n: int) -> FieldOnE:
        """The vertical lift of the section as an expression field."""
        return FieldOnE(tuple(ex.lit(0.0) for _ in range(n)), self.comp)

    def is_basic_syntactically(self, space: BundleSpace) -> bool:
        return all(not (ex.variables(e) & set(space.y_names)) for e in self.comp)


@dataclass(frozen=True)
class HorBasicField:
    """Y = X^h + eta^v for a base vector field X(x) and a basic section eta(x).

    Both component lists may reference x variables only; this is checked at
    construction, so hor-basic fields never need a sampling certificate.
    """

    X: tuple
    eta: tuple

    def __post_init__(self):
        object.__setattr__(self, "X", tuple(self.X))
        object.__setattr__(self, "eta", tuple(self.eta))
        allowed = {f"x{i+1}" for i in range(len(self.X))}
        _check_arity(self.X + self.eta, allowed, "hor-basic components")

    def as_field(self, conn: NonlinearConnection) -> FieldOnE:
        """Expression field with components (X^i, -gamma^A_i X^i + eta^A)."""
        comp_y = []
        for A in range(conn.space.k):
            drift = ex.neg(
                ex.scaled_sum(
                    (1.0, ex.mul(conn.gamma[A][i], self.X[i]))
                    for i in range(conn.space.n)
                )
            )
            comp_y.append(ex.add(drift, self.eta[A]))
        return FieldOnE(self.X, tuple(comp_y))

    def at(self, conn: NonlinearConnection, a: FiberPoint) -> TangentE:
        env = conn.space.point_env(a.x, a.y)
        dx = np.array([ad.real_part(ex.evaluate(e, env)) for e in self.X])
        eta = np.array([ad.real_part(ex.evaluate(e, env)) for e in self.eta])
        G = conn.gamma_at(a)
        return TangentE(a, dx, -G @ dx + eta)

    def direction_env(self, conn: NonlinearConnection, env):
        """Components of the field over a generic environment."""
        dir_x = [ad.value_in(e, env) for e in self.X]
        G = conn.gamma_env(env)
        dir_y = []
        for A in range(conn.space.k):
            s = ad.value_in(self.eta[A], env)
            for i in range(conn.space.n):
                s = s - G[A][i] * dir_x[i]
            dir_y.append(s)
        return dir_x, dir_y


# ---------------------------------------------------------------------------
# Brackets and the connector over generic environments


def bracket_env(space: BundleSpace, w1: FieldOnE, w2: FieldOnE, env) -> list:
    """Components of the Lie bracket [w1, w2] over a generic environment."""
    names = space.x_names + space.y_names
    m = space.n + space.k
    c1 = [ad.value_in(w1.component(i), env) for i in range(m)]
    c2 = [ad.value_in(w2.component(i), env) for i in range(m)]
    out = []
    for alpha in range(m):
        g2 = ad.partials_in(w2.component(alpha), env, names)
        g1 = ad.partials_in(w1.component(alpha), env, names)
        s = 0.0
        for beta in range(m):
            s = s + c1[beta] * g2[beta] - c2[beta] * g1[beta]
        out.append(s)
    return out


def bracket(space: BundleSpace, w1: FieldOnE, w2: FieldOnE, p: FiberPoint) -> TangentE:
    """Lie bracket of two expression fields, evaluated at a point.

    All partial derivatives come from dual-number evaluation over the n + k
    chart coordinates.
    """
    env = space.point_env(p.x, p.y)
    comps = bracket_env(space, w1, w2, env)
    return TangentE(p, np.array(comps[: space.n]), np.array(comps[space.n :]))


def connector_env(conn: NonlinearConnection, env, wx, wy) -> list:
    """kappa of a tangent with components (wx, wy) over a generic environment."""
    G = conn.gamma_env(env)
    out = []
    for A in range(conn.space.k):
        s = wy[A]
        for i in range(conn.space.n):
            s = s + G[A][i] * wx[i]
        out.append(s)
    return out


def kappa_section(conn: NonlinearConnection, w: FieldOnE) -> SectionAlongPi:
    """kappa(W) as an expression section: components W^A + gamma^A_i W^i.

    Built by expression composition so its fiber derivatives stay available
    to dual-number evaluation.
    """
    comps = []
    for A in range(conn.space.k):
        s = w.comp_y[A]
        for i in range(conn.space.n):
            s = ex.add(s, ex.mul(conn.gamma[A][i], w.comp_x[i]))
        comps.append(s)
    return SectionAlongPi(tuple(comps))
