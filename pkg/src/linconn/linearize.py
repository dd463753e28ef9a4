"""Linearization of a nonlinear connection on the pullback bundle.

The linearized horizontal action sends a tangent vector w at the first leg
(x, y) to a tangent vector at the second leg (x, z) with the same base
velocity and fiber velocity -d_gamma^A_iB(x, y) z^B w^i, where d_gamma is
the fiber Jacobian of the connection coefficients.  Two independent
computations of this map are provided: the coordinate formula (``apply``)
and the limit definition as the fiber-direction derivative of the
horizontal lift (``apply_by_limit``); they must agree to rounding and the
test suite holds them to that.

Covariant derivatives, the one-parameter affine family of prolongations,
and the curvature of the linearization (with its mixed and base-base
components) are computed here as well.  Every derivative on a production
path comes from dual-number evaluation; the second-order pieces (an outer
derivative of quantities already containing a first derivative of gamma)
run through Dual2 scalars, never through differencing of derivative output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ad
from . import expr as ex
from .connection import (
    FieldOnE,
    HorBasicField,
    NonlinearConnection,
    NotProjectableError,
    SectionAlongPi,
    bracket,
    bracket_env,
    connector_env,
)
from .geom import (
    BASE_TOL,
    FiberPoint,
    OutOfDomainError,
    PullbackPoint,
    TangentE,
    TangentPullback,
)

BASIC_VERDICT_TOL = 1e-8  # threshold on sampled magnitudes for basic/flat verdicts


def _check_leg(p: PullbackPoint, w: TangentE):
    if (
        np.max(np.abs(w.at.x - p.x), initial=0.0) > BASE_TOL
        or np.max(np.abs(w.at.y - p.y), initial=0.0) > BASE_TOL
    ):
        raise ValueError("tangent vector is not attached at the first leg")


@dataclass(frozen=True)
class LinearizedConnection:
    """The linear connection on the pullback bundle induced by ``conn``."""

    conn: NonlinearConnection

    @property
    def space(self):
        return self.conn.space

    # -- coefficients ------------------------------------------------------

    def fiber_jacobian(self, a: FiberPoint) -> np.ndarray:
        """Array [A, i, B] of fiber derivatives of the coefficients at a."""
        self.space.require_in_domain(a.x, a.y)
        env = self.space.point_env(a.x, a.y)
        return np.array(self.fiber_jacobian_env(env), dtype=float)

    def fiber_jacobian_env(self, env) -> list:
        y_names = self.space.y_names
        return [
            [ad.partials_in(g, env, y_names) for g in row] for row in self.conn.gamma
        ]

    # -- the linearized horizontal action ---------------------------------

    def apply(self, p: PullbackPoint, w: TangentE) -> TangentE:
        """Coordinate formula: dy^A = -d_gamma^A_iB(x, y) z^B w^i at leg b."""
        self.space.require_in_domain(p.x, p.y)
        _check_leg(p, w)
        J = self.fiber_jacobian(p.a)
        dy = -np.einsum("aib,b,i->a", J, p.z, w.dx)
        return TangentE(p.b, w.dx.copy(), dy)

    def apply_by_limit(self, p: PullbackPoint, w: TangentE) -> TangentE:
        """Limit definition: derivative of the horizontal lift along the fiber.

        Evaluates the fiber velocity of s -> lift(a + s*b, base velocity of w)
        with a dual seed in s and projects out the vertical part.  Domain
        membership is checked at s = 0 only; fiberwise openness guarantees a
        neighborhood.
        """
        self.space.require_in_domain(p.x, p.y)
        _check_leg(p, w)
        env = self.space.point_env(p.x, p.y)
        seeded = {
            name: ad.Dual1(env[name], (dz,))
            for name, dz in zip(self.space.y_names, p.z)
        }
        env_s = {**env, **seeded}
        dy = np.empty(self.space.k)
        for A, row in enumerate(self.conn.gamma):
            s = 0.0
            for i, g in enumerate(row):
                if w.dx[i] != 0.0:
                    s = s + ex.evaluate(g, env_s) * w.dx[i]
            dy[A] = -ad.dual_part(s)
        return TangentE(p.b, w.dx.copy(), dy)

    def lift(self, p: PullbackPoint, w: TangentE) -> TangentPullback:
        """Horizontal lift on the pullback bundle: the pair (w, apply(p, w))."""
        return TangentPullback(p, w, self.apply(p, w))

    def connector(self, t: TangentPullback) -> np.ndarray:
        """Fiber vector measuring how far t is from its own horizontal lift."""
        b = self.apply(t.at, t.w)
        return t.w2.dy - b.dy

    # -- covariant derivative ----------------------------------------------

    def covariant_derivative(self, sigma: SectionAlongPi, w: TangentE) -> np.ndarray:
        """Derivative of the section in the direction w.

        Components: sum_i d_x^i(sigma^A) w^i + sum_B d_y^B(sigma^A) w^B
        + sum_{i,B} d_gamma^A_iB sigma^B w^i, all partials by dual numbers.
        """
        self.space.require_in_domain(w.at.x, w.at.y)
        env = self.space.point_env(w.at.x, w.at.y)
        out = self._cov_env(sigma.comp, list(w.dx), list(w.dy), env)
        return np.array([ad.real_part(v) for v in out])

    def _cov_env(self, comps, dir_x, dir_y, env) -> list:
        """Covariant derivative components over a generic environment."""
        sp = self.space
        names = sp.x_names + sp.y_names
        J = self.fiber_jacobian_env(env)
        vals = [ad.value_in(c, env) for c in comps]
        out = []
        for A in range(sp.k):
            grads = ad.partials_in(comps[A], env, names)
            s = 0.0
            for i in range(sp.n):
                s = s + grads[i] * dir_x[i]
            for B in range(sp.k):
                s = s + grads[sp.n + B] * dir_y[B]
            for i in range(sp.n):
                for B in range(sp.k):
                    s = s + J[A][i][B] * vals[B] * dir_x[i]
            out.append(s)
        return out

    def _horizontal_direction_env(self, x_comps, env):
        """Components of the horizontal lift of a base field over env."""
        dir_x = [ad.value_in(e, env) for e in x_comps]
        G = self.conn.gamma_env(env)
        dir_y = []
        for A in range(self.space.k):
            s = 0.0
            for i in range(self.space.n):
                s = s - G[A][i] * dir_x[i]
            dir_y.append(s)
        return dir_x, dir_y

    def covariant_derivative_bracket(
        self, sigma: SectionAlongPi, w_field: FieldOnE, a: FiberPoint
    ) -> np.ndarray:
        """Bracket form of the covariant derivative in the direction w_field(a).

        Computes kappa([P_h(W), sigma^v](a)) plus the vertical-projection
        image of the tangent of sigma on P_v(W)(a).  Exists as the
        independent cross-check of ``covariant_derivative``; the two agree
        to rounding for every field and section.
        """
        sp = self.space
        sp.require_in_domain(a.x, a.y)
        conn = self.conn
        # P_h(W) as an expression field, composed through gamma
        comp_y = tuple(
            ex.neg(
                ex.scaled_sum(
                    (1.0, ex.mul(conn.gamma[A][i], w_field.comp_x[i]))
                    for i in range(sp.n)
                )
            )
            for A in range(sp.k)
        )
        ph_w = FieldOnE(w_field.comp_x, comp_y)
        sig_v = sigma.vertical_field(sp.n)
        br = bracket(sp, ph_w, sig_v, a)
        first = conn.connector(br)
        # tangent of sigma on the vertical part of W(a)
        pv = conn.project_v(w_field.at(sp, a))
        env = sp.point_env(a.x, a.y)
        second = np.empty(sp.k)
        for A in range(sp.k):
            grads = ad.partials_in(sigma.comp[A], env, sp.y_names)
            second[A] = float(np.dot(grads, pv.dy))
        return first + second

    # -- Lie derivations -----------------------------------------------------

    def lie_derivation(
        self, y_field: FieldOnE, sigma: SectionAlongPi, a: FiberPoint
    ) -> np.ndarray:
        """Derivation induced by the flow of a projectable field.

        The vertical projection of [Y, sigma^v](a); defined only for
        projectable Y, certified by sampling.
        """
        sp = self.space
        if not y_field.is_projectable(sp):
            raise NotProjectableError("field failed the projectability certificate")
        sp.require_in_domain(a.x, a.y)
        env = sp.point_env(a.x, a.y)
        comps = bracket_env(sp, y_field, sigma.vertical_field(sp.n), env)
        defect = max((abs(ad.real_part(c)) for c in comps[: sp.n]), default=0.0)
        if defect > 1e-9:
            raise NotProjectableError(
                f"bracket with the vertical lift has base defect {defect:.3e}"
            )
        return np.array([ad.real_part(c) for c in comps[sp.n :]])

    # -- curvature of the linearization --------------------------------------

    def _pair_section_env(self, y1: HorBasicField, y2: HorBasicField, env) -> list:
        """rho = R(X1, X2) + D_{X1 lift} eta2 - D_{X2 lift} eta1 over env.

        Valid only over plain envs or envs lifted in a vertical direction
        (the base coordinates must not move, because the base fields are
        frozen to their values at the base point).
        """
        point = {name: ad.real_part(v) for name, v in env.items()}
        v1 = [ad.real_part(ex.evaluate(e, point)) for e in y1.X]
        v2 = [ad.real_part(ex.evaluate(e, point)) for e in y2.X]
        rho = self.conn.curvature_env(env, np.array(v1), np.array(v2))
        d1x, d1y = self._horizontal_direction_env(y1.X, env)
        d2x, d2y = self._horizontal_direction_env(y2.X, env)
        t12 = self._cov_env(y2.eta, d1x, d1y, env)
        t21 = self._cov_env(y1.eta, d2x, d2y, env)
        return [rho[A] + t12[A] - t21[A] for A in range(self.space.k)]

    def curvature(
        self,
        y1: HorBasicField,
        y2: HorBasicField,
        sigma: SectionAlongPi,
        a: FiberPoint,
    ) -> np.ndarray:
        """Closed-form curvature on a pair of hor-basic fields.

        Returns minus the vertical derivative, in the direction sigma(a), of
        the section R(X1, X2) + D_{X1 lift} eta2 - D_{X2 lift} eta1.  The
        vertical derivative is where second fiber derivatives of gamma enter;
        they are taken with Dual2 scalars.
        """
        sp = self.space
        sp.require_in_domain(a.x, a.y)
        env = sp.point_env(a.x, a.y)
        sig_a = [ad.real_part(ex.evaluate(c, env)) for c in sigma.comp]
        direction = dict(zip(sp.y_names, sig_a))
        lifted = ad.lift_env(env, direction)
        rho = self._pair_section_env(y1, y2, lifted)
        return -np.array([ad.dual_part(r) for r in rho])

    def curvature_commutator(
        self,
        y1: HorBasicField,
        y2: HorBasicField,
        sigma: SectionAlongPi,
        a: FiberPoint,
    ) -> np.ndarray:
        """Commutator-of-derivatives curvature, the oracle for ``curvature``.

        D_{Y1} D_{Y2} sigma - D_{Y2} D_{Y1} sigma - D_{[Y1, Y2]} sigma, with
        the outer derivatives taken through Dual2 and the bracket taken on
        the induced expression fields.
        """
        sp = self.space
        sp.require_in_domain(a.x, a.y)
        conn = self.conn
        term1 = self._cov_of_cov(sigma, y1, y2, a)
        term2 = self._cov_of_cov(sigma, y2, y1, a)
        w12 = bracket(sp, y1.as_field(conn), y2.as_field(conn), a)
        term3 = self.covariant_derivative(sigma, w12)
        return term1 - term2 - term3

    def _cov_of_cov(
        self, sigma: SectionAlongPi, outer: HorBasicField, inner: HorBasicField,
        a: FiberPoint,
    ) -> np.ndarray:
        """D_{outer(a)} of the section p -> (D_{inner} sigma)(p)."""
        sp = self.space
        env = sp.point_env(a.x, a.y)
        w_out = outer.at(self.conn, a)
        direction = dict(zip(sp.x_names + sp.y_names, np.concatenate([w_out.dx, w_out.dy])))
        lifted = ad.lift_env(env, direction)
        din_x, din_y = inner.direction_env(self.conn, lifted)
        tau = self._cov_env(sigma.comp, din_x, din_y, lifted)
        J0 = self.fiber_jacobian(a)
        out = np.empty(sp.k)
        for A in range(sp.k):
            s = ad.dual_part(tau[A])
            for i in range(sp.n):
                for B in range(sp.k):
                    s += J0[A, i, B] * ad.real_part(tau[B]) * w_out.dx[i]
            out[A] = s
        return out

    def berwald(
        self, eta, y: HorBasicField, sigma: SectionAlongPi, a: FiberPoint
    ) -> np.ndarray:
        """Mixed vertical-horizontal curvature component.

        The vertical derivative, in the direction sigma(a), of the section
        p -> (D_{X lift} eta)(p), for a basic section eta (x-only component
        expressions) and the horizontal part X of y.  Vanishing of this
        component at all sampled points is what flags a linearization as
        basic.
        """
        sp = self.space
        sp.require_in_domain(a.x, a.y)
        eta = tuple(eta)
        env = sp.point_env(a.x, a.y)
        sig_a = [ad.real_part(ex.evaluate(c, env)) for c in sigma.comp]
        lifted = ad.lift_env(env, dict(zip(sp.y_names, sig_a)))
        dirx, diry = self._horizontal_direction_env(y.X, lifted)
        tau = self._cov_env(eta, dirx, diry, lifted)
        return np.array([ad.dual_part(t) for t in tau])

    def riemann(self, v1, v2, sigma: SectionAlongPi, a: FiberPoint) -> np.ndarray:
        """Base-base curvature component: minus the vertical derivative of R."""
        sp = self.space
        sp.require_in_domain(a.x, a.y)
        env = sp.point_env(a.x, a.y)
        sig_a = [ad.real_part(ex.evaluate(c, env)) for c in sigma.comp]
        lifted = ad.lift_env(env, dict(zip(sp.y_names, sig_a)))
        rho = self.conn.curvature_env(lifted, np.asarray(v1, float), np.asarray(v2, float))
        return -np.array([ad.dual_part(r) for r in rho])

    # -- flatness -------------------------------------------------------------

    def flatness_report(self, samples: int = 32, seed: int = 0) -> "FlatnessReport":
        """Sampled verdicts on flatness and basicness of the linearization.

        Draws in-domain points, random hor-basic pairs and sections, and
        records the largest curvature component.  Alongside it checks the
        equivalent formulation (the connector of the bracket of two
        hor-basic fields must be a basic section exactly when the curvature
        vanishes; the bracket here is the literal expression-field bracket,
        a different code path from ``curvature``) and tracks the largest
        mixed vertical-horizontal component, whose vanishing flags the
        linearization as basic.  Sampling cannot prove a universal: the
        verdicts carry their sample count, seed and threshold.
        """
        from .sampling import random_hor_basic, random_polynomial, random_section, sample_in_domain

        sp = self.space
        rng = np.random.default_rng(seed)
        max_curv = 0.0
        max_nonbasic = 0.0
        max_mixed = 0.0
        used = 0
        for _ in range(samples):
            try:
                a = sample_in_domain(sp, rng)
            except OutOfDomainError:
                continue
            y1 = random_hor_basic(rng, sp)
            y2 = random_hor_basic(rng, sp)
            sigma = random_section(rng, sp)
            c = self.curvature(y1, y2, sigma, a)
            max_curv = max(max_curv, float(np.max(np.abs(c), initial=0.0)))
            eta = tuple(random_polynomial(rng, sp.x_names) for _ in range(sp.k))
            theta = self.berwald(eta, y2, sigma, a)
            max_mixed = max(max_mixed, float(np.max(np.abs(theta), initial=0.0)))
            f1 = y1.as_field(self.conn)
            f2 = y2.as_field(self.conn)
            env = sp.point_env(a.x, a.y)
            for yname in sp.y_names:
                lifted = ad.lift_env(env, {yname: 1.0})
                comps = bracket_env(sp, f1, f2, lifted)
                kap = connector_env(self.conn, lifted, comps[: sp.n], comps[sp.n :])
                defect = max(abs(ad.dual_part(kv)) for kv in kap)
                max_nonbasic = max(max_nonbasic, defect)
            used += 1
        if used == 0:
            raise OutOfDomainError("no in-domain sample points found")
        flat = max_curv <= BASIC_VERDICT_TOL
        basic_bracket = max_nonbasic <= BASIC_VERDICT_TOL
        return FlatnessReport(
            max_curvature=max_curv,
            max_nonbasic_defect=max_nonbasic,
            max_mixed_component=max_mixed,
            flat=flat,
            basic=max_mixed <= BASIC_VERDICT_TOL,
            equivalence_consistent=(flat == basic_bracket),
            samples=used,
            seed=seed,
            threshold=BASIC_VERDICT_TOL,
        )


@dataclass(frozen=True)
class FlatnessReport:
    max_curvature: float
    max_nonbasic_defect: float
    max_mixed_component: float
    flat: bool
    basic: bool
    equivalence_consistent: bool
    samples: int
    seed: int
    threshold: float

    @property
    def verdict(self) -> str:
        return "flat" if self.flat else "non-flat"

    @property
    def basic_verdict(self) -> str:
        return "basic" if self.basic else "non-basic"


@dataclass(frozen=True)
class LambdaFamilyMember:
    """Member of the one-parameter affine family of natural prolongations.

    Adds lam times the vertical lift of the connector to the linearized
    action; lam = 0 recovers the linearization exactly and is the only
    linear (equivalently, the only semibasic) member.
    """

    conn: NonlinearConnection
    lam: float

    @property
    def linearization(self) -> LinearizedConnection:
        return LinearizedConnection(self.conn)

    def apply(self, p: PullbackPoint, w: TangentE) -> TangentE:
        base = self.linearization.apply(p, w)
        kw = self.conn.connector(w)
        return TangentE(base.at, base.dx, base.dy + self.lam * kw)

    def lift(self, p: PullbackPoint, w: TangentE) -> TangentPullback:
        return TangentPullback(p, w, self.apply(p, w))


def fiber_derivative_of_field(
    conn: NonlinearConnection, y: HorBasicField, p: PullbackPoint
) -> TangentE:
    """Fiber derivative of a hor-basic field at (a, b).

    The derivative of s -> Y(a + s*b) is vertical over the tangent of the
    base because the base components of Y do not depend on the fiber; its
    vertical projection is returned.  For hor-basic fields this equals the
    second component of the linearized horizontal lift of Y(a).
    """
    sp = conn.space
    sp.require_in_domain(p.x, p.y)
    env = sp.point_env(p.x, p.y)
    seeded = {
        name: ad.Dual1(env[name], (dz,)) for name, dz in zip(sp.y_names, p.z)
    }
    env_s = {**env, **seeded}
    field = y.as_field(conn)
    dx = np.array([ad.real_part(ex.evaluate(e, env_s)) for e in field.comp_x])
    dy = np.array([ad.dual_part(ex.evaluate(e, env_s)) for e in field.comp_y])
    return TangentE(p.b, dx, dy)
