"""Catalog of maximally monotone operators with closed-form resolvents.

Every operator exposes the same oracle: ``op.resolvent(gamma, x)`` returns
J_{gamma A} x = (I + gamma A)^{-1} x, single-valued and defined for every x.
Reflectents are derived as R = 2 J - Id. All resolvents are exact (no inner
iterative solves); the affine kind reduces to a dense linear solve.
"""

import numpy as np

from .errors import ConstructionError, DimensionError, ParameterError
from .linalg import as_matrix, as_vector, solve_linear

#: Smallest admissible eigenvalue of M + M^T for the affine kind. Slightly
#: negative so that exactly-skew matrices survive floating-point checks.
PSD_TOL = -1e-10


class MonotoneOperator:
    """Base class: a resolvent oracle on R^dim."""

    dim = None
    kind = "abstract"

    def resolvent(self, gamma, x):
        """Evaluate J_{gamma A} x for gamma > 0."""
        if not np.isfinite(gamma) or gamma <= 0:
            raise ParameterError(f"gamma must be positive, got {gamma}")
        x = as_vector(x)
        if x.size != self.dim:
            raise DimensionError(
                f"operator acts on R^{self.dim}, point has dimension {x.size}"
            )
        return self._resolvent(float(gamma), x)

    def reflectent(self, gamma, x):
        """Evaluate R_{gamma A} x = 2 J_{gamma A} x - x."""
        x = as_vector(x)
        return 2.0 * self.resolvent(gamma, x) - x

    def domain_projection(self, x):
        """Projection of x onto the closure of dom A (identity when full)."""
        return as_vector(x).copy()

    def _resolvent(self, gamma, x):
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} dim={self.dim}>"


class Zero(MonotoneOperator):
    """A = 0, so J = Id."""

    kind = "zero"

    def __init__(self, dim):
        dim = int(dim)
        if dim < 1:
            raise ConstructionError("dim must be >= 1")
        self.dim = dim

    def _resolvent(self, gamma, x):
        return x.copy()


class ScaledIdentity(MonotoneOperator):
    """A = lam * Id with lam >= 0; J x = x / (1 + gamma * lam)."""

    kind = "scaled_identity"

    def __init__(self, lam, dim):
        lam = float(lam)
        if not np.isfinite(lam) or lam < 0:
            raise ConstructionError(f"lam must be >= 0, got {lam}")
        dim = int(dim)
        if dim < 1:
            raise ConstructionError("dim must be >= 1")
        self.lam = lam
        self.dim = dim

    def _resolvent(self, gamma, x):
        return x / (1.0 + gamma * self.lam)


class AffineMonotone(MonotoneOperator):
    """A x = M x + b with M + M^T positive semidefinite.

    The resolvent solves (I + gamma M) y = x - gamma b.
    """

    kind = "affine"

    def __init__(self, matrix, offset):
        m = as_matrix(matrix)
        b = as_vector(offset)
        if m.shape[0] != m.shape[1]:
            raise ConstructionError(f"M must be square, got shape {m.shape}")
        if m.shape[0] != b.size:
            raise ConstructionError("M and b dimensions disagree")
        sym_eigs = np.linalg.eigvalsh(m + m.T)
        if sym_eigs[0] < PSD_TOL:
            raise ConstructionError(
                f"M + M^T has eigenvalue {sym_eigs[0]:.3e} < {PSD_TOL}; "
                "operator would not be monotone"
            )
        self.matrix = m
        self.offset = b
        self.dim = b.size

    def _resolvent(self, gamma, x):
        return solve_linear(np.eye(self.dim) + gamma * self.matrix, x - gamma * self.offset)

    def value(self, x):
        """The (single-valued) operator itself, M x + b."""
        return self.matrix @ as_vector(x) + self.offset


class NormalConePoint(MonotoneOperator):
    """Normal cone of the singleton {c}; J is the constant map c."""

    kind = "normal_cone_point"

    def __init__(self, point):
        self.point = as_vector(point)
        self.dim = self.point.size

    def _resolvent(self, gamma, x):
        return self.point.copy()

    def domain_projection(self, x):
        return self.point.copy()


class NormalConeBox(MonotoneOperator):
    """Normal cone of the box [lo, hi]; J clips componentwise."""

    kind = "normal_cone_box"

    def __init__(self, lo, hi):
        lo = as_vector(lo)
        hi = as_vector(hi)
        if lo.size != hi.size:
            raise ConstructionError("lo and hi dimensions disagree")
        if np.any(lo > hi):
            raise ConstructionError("box requires lo <= hi componentwise")
        self.lo = lo
        self.hi = hi
        self.dim = lo.size

    def _resolvent(self, gamma, x):
        return np.clip(x, self.lo, self.hi)

    def domain_projection(self, x):
        return np.clip(as_vector(x), self.lo, self.hi)


class NormalConeBall(MonotoneOperator):
    """Normal cone of the closed ball B(center, radius); J projects onto it."""

    kind = "normal_cone_ball"

    def __init__(self, center, radius):
        radius = float(radius)
        if not np.isfinite(radius) or radius <= 0:
            raise ConstructionError(f"radius must be > 0, got {radius}")
        self.center = as_vector(center)
        self.radius = radius
        self.dim = self.center.size

    def _resolvent(self, gamma, x):
        return self.domain_projection(x)

    def domain_projection(self, x):
        d = as_vector(x) - self.center
        dist = np.linalg.norm(d)
        if dist <= self.radius:
            return self.center + d
        return self.center + d * (self.radius / dist)


class NegLog(MonotoneOperator):
    """Componentwise subdifferential of -ln, A y = -1/y on y > 0.

    J x = (x + sqrt(x^2 + 4 gamma)) / 2 componentwise; defined for every
    real x even though dom A is the positive orthant.
    """

    kind = "neg_log"

    def __init__(self, dim):
        dim = int(dim)
        if dim < 1:
            raise ConstructionError("dim must be >= 1")
        self.dim = dim

    def _resolvent(self, gamma, x):
        root = np.sqrt(x * x + 4.0 * gamma)
        # rationalized branch for x < 0 avoids cancellation in x + root
        return np.where(x >= 0, (x + root) / 2.0, (2.0 * gamma) / (root - x))

    def domain_projection(self, x):
        return np.maximum(as_vector(x), 0.0)


class Translated(MonotoneOperator):
    """A_s x = A(x - s); the resolvent is s + J_{gamma A}(x - s)."""

    kind = "translated"

    def __init__(self, inner, shift):
        if not isinstance(inner, MonotoneOperator):
            raise ConstructionError("inner must be a MonotoneOperator")
        shift = as_vector(shift)
        if shift.size != inner.dim:
            raise ConstructionError("shift dimension disagrees with inner operator")
        self.inner = inner
        self.shift = shift
        self.dim = inner.dim

    def _resolvent(self, gamma, x):
        return self.shift + self.inner.resolvent(gamma, x - self.shift)

    def domain_projection(self, x):
        return self.shift + self.inner.domain_projection(as_vector(x) - self.shift)


class Scaled(MonotoneOperator):
    """sigma * A with sigma > 0; J_{gamma(sigma A)} = J_{(gamma sigma) A}."""

    kind = "scaled"

    def __init__(self, inner, sigma):
        if not isinstance(inner, MonotoneOperator):
            raise ConstructionError("inner must be a MonotoneOperator")
        sigma = float(sigma)
        if not np.isfinite(sigma) or sigma <= 0:
            raise ConstructionError(f"sigma must be > 0, got {sigma}")
        self.inner = inner
        self.sigma = sigma
        self.dim = inner.dim

    def _resolvent(self, gamma, x):
        return self.inner.resolvent(gamma * self.sigma, x)

    def domain_projection(self, x):
        return self.inner.domain_projection(x)


class CountingOperator(MonotoneOperator):
    """Delegating wrapper that counts resolvent evaluations.

    Used to audit the one-resolvent-per-operator-per-iteration accounting of
    the efficient algorithm implementations.
    """

    kind = "counting"

    def __init__(self, inner):
        self.inner = inner
        self.dim = inner.dim
        self.calls = 0

    def _resolvent(self, gamma, x):
        self.calls += 1
        return self.inner.resolvent(gamma, x)

    def domain_projection(self, x):
        return self.inner.domain_projection(x)


def resolvent(op, gamma, x):
    """Uniform oracle entry point, J_{gamma A} x."""
    return op.resolvent(gamma, x)


def reflectent(op, gamma, x):
    """Reflected resolvent, 2 J_{gamma A} x - x."""
    return op.reflectent(gamma, x)


def single_value(op, x):
    """Evaluate A(x) for kinds where the operator is single valued at x.

    Returns None for set-valued kinds (the normal cones) and for points
    outside the domain.
    """
    x = as_vector(x)
    if isinstance(op, Zero):
        return np.zeros(op.dim)
    if isinstance(op, ScaledIdentity):
        return op.lam * x
    if isinstance(op, AffineMonotone):
        return op.value(x)
    if isinstance(op, NegLog):
        return -1.0 / x if np.all(x > 0) else None
    if isinstance(op, Scaled):
        inner = single_value(op.inner, x)
        return None if inner is None else op.sigma * inner
    if isinstance(op, Translated):
        return single_value(op.inner, x - op.shift)
    if isinstance(op, CountingOperator):
        return single_value(op.inner, x)
    return None


def inclusion_residual(op, point, value):
    """Residual of the membership claim ``value in op(point)``.

    Returns a float (0 means the claim holds) for kinds where membership is
    decidable in closed form, and None when it is not; callers then fall back
    to indirect validation.
    """
    z = as_vector(point)
    w = as_vector(value)
    if z.size != op.dim or w.size != op.dim:
        raise DimensionError("point/value dimension disagrees with operator")
    if isinstance(op, Zero):
        return float(np.linalg.norm(w))
    if isinstance(op, ScaledIdentity):
        return float(np.linalg.norm(w - op.lam * z))
    if isinstance(op, AffineMonotone):
        return float(np.linalg.norm(w - op.value(z)))
    if isinstance(op, NormalConePoint):
        return float(np.linalg.norm(z - op.point))
    if isinstance(op, NegLog):
        if np.any(z <= 0):
            return float("inf")
        return float(np.linalg.norm(w + 1.0 / z))
    if isinstance(op, Translated):
        return inclusion_residual(op.inner, z - op.shift, w)
    if isinstance(op, Scaled):
        return inclusion_residual(op.inner, z, w / op.sigma)
    if isinstance(op, CountingOperator):
        return inclusion_residual(op.inner, z, w)
    return None


_SIMPLE_KINDS = {
    "zero": lambda p: Zero(dim=p["dim"]),
    "scaled_identity": lambda p: ScaledIdentity(lam=p["lam"], dim=p["dim"]),
    "affine": lambda p: AffineMonotone(matrix=p["M"], offset=p["b"]),
    "normal_cone_point": lambda p: NormalConePoint(point=p["c"]),
    "normal_cone_box": lambda p: NormalConeBox(lo=p["lo"], hi=p["hi"]),
    "normal_cone_ball": lambda p: NormalConeBall(center=p["center"], radius=p["radius"]),
    "neg_log": lambda p: NegLog(dim=p["dim"]),
}


def make_operator(spec):
    """Build an operator from a structured description.

    ``spec`` is a mapping with a "kind" key plus kind-specific parameters,
    e.g. {"kind": "normal_cone_point", "c": [1.0]}. The nested kinds
    "translated" and "scaled" take an "inner" sub-description.
    """
    if not isinstance(spec, dict):
        raise ConstructionError("operator spec must be a mapping")
    try:
        kind = spec["kind"]
    except KeyError:
        raise ConstructionError("operator spec is missing 'kind'") from None
    params = {k: v for k, v in spec.items() if k != "kind"}
    try:
        if kind == "translated":
            return Translated(make_operator(params["inner"]), params["shift"])
        if kind == "scaled":
            return Scaled(make_operator(params["inner"]), params["sigma"])
        builder = _SIMPLE_KINDS[kind]
    except KeyError as exc:
        raise ConstructionError(f"unknown or incomplete operator kind {kind!r}") from exc
    try:
        return builder(params)
    except KeyError as exc:
        raise ConstructionError(f"operator kind {kind!r} is missing parameter {exc}") from exc
