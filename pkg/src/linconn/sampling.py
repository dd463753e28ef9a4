"""Seeded random draws of points, tangents, fields and sections for checks."""

from __future__ import annotations

import numpy as np

from . import expr as ex
from .connection import HorBasicField, SectionAlongPi
from .geom import BundleSpace, FiberPoint, OutOfDomainError, PullbackPoint, TangentE

BOX = 1.5  # coordinates are drawn from [-BOX, BOX]
MAX_TRIES = 1000


def sample_in_domain(space: BundleSpace, rng: np.random.Generator) -> FiberPoint:
    for _ in range(MAX_TRIES):
        x = rng.uniform(-BOX, BOX, space.n)
        y = rng.uniform(-BOX, BOX, space.k)
        if space.in_domain(x, y):
            return FiberPoint(x, y)
    raise OutOfDomainError("no in-domain sample found")


def sample_pullback(space: BundleSpace, rng: np.random.Generator) -> PullbackPoint:
    a = sample_in_domain(space, rng)
    z = rng.uniform(-BOX, BOX, space.k)
    return PullbackPoint(a.x, a.y, z)


def sample_tangent(rng: np.random.Generator, at: FiberPoint) -> TangentE:
    return TangentE(
        at, rng.uniform(-BOX, BOX, len(at.x)), rng.uniform(-BOX, BOX, len(at.y))
    )


def random_polynomial(rng: np.random.Generator, names) -> ex.Expr:
    """Random polynomial of degree <= 2 with small rounded coefficients."""
    terms = [ex.lit(round(float(rng.uniform(-1, 1)), 3))]
    for name in names:
        c = round(float(rng.uniform(-1, 1)), 3)
        if c != 0.0:
            terms.append(ex.mul(ex.lit(c), ex.var(name)))
    for _ in range(2):
        n1 = names[rng.integers(len(names))]
        n2 = names[rng.integers(len(names))]
        c = round(float(rng.uniform(-1, 1)), 3)
        if c != 0.0:
            terms.append(ex.mul(ex.lit(c), ex.mul(ex.var(n1), ex.var(n2))))
    out = terms[0]
    for t in terms[1:]:
        out = ex.add(out, t)
    return out


def random_hor_basic(rng: np.random.Generator, space: BundleSpace) -> HorBasicField:
    xn = space.x_names
    return HorBasicField(
        tuple(random_polynomial(rng, xn) for _ in range(space.n)),
        tuple(random_polynomial(rng, xn) for _ in range(space.k)),
    )


def random_section(
    rng: np.random.Generator, space: BundleSpace, basic: bool = False
) -> SectionAlongPi:
    names = space.x_names if basic else space.x_names + space.y_names
    return SectionAlongPi(tuple(random_polynomial(rng, names) for _ in range(space.k)))


def random_field(rng: np.random.Generator, space: BundleSpace, projectable=False):
    """Random polynomial vector field on the total space."""
    from .connection import FieldOnE

    base_names = space.x_names if projectable else space.x_names + space.y_names
    all_names = space.x_names + space.y_names
    return FieldOnE(
        tuple(random_polynomial(rng, base_names) for _ in range(space.n)),
        tuple(random_polynomial(rng, all_names) for _ in range(space.k)),
    )
