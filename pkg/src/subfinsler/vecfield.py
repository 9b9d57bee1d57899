"""Exact calculus for polynomial vector fields on R^n.

Polynomials are stored as sparse monomial maps with Fraction coefficients.
A field may carry extra formal parameters beyond its geometric dimension
(exponent slots past ``dim``); Lie brackets differentiate only the first
``dim`` slots, so parameters ride along as exact symbolic constants.  This
is what lets the second-order machinery keep arc durations symbolic.

The only numeric code here is `rk_integrate`, a classical 4th-order
integrator used exclusively as a cross-check oracle for the closed-form
flows.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .exact import fraction_gcd, to_fraction


class DimensionError(ValueError):
    """Operands live on spaces of different dimension."""


class NilpotencyError(ArithmeticError):
    """An ad-exponential series failed to terminate."""


class NumericError(ArithmeticError):
    """A numeric cross-check produced non-finite values."""


class Poly:
    """Multivariate polynomial over Q, immutable, canonically normalized.

    Terms map exponent tuples (length ``nvars``) to nonzero Fractions.
    """

    __slots__ = ("nvars", "terms", "_compiled")

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        clean = {}
        for exps, coeff in (terms or {}).items():
            c = to_fraction(coeff)
            if c != 0:
                if len(exps) != nvars:
                    raise DimensionError("exponent tuple length != nvars")
                clean[tuple(exps)] = c
        self.terms = clean
        self._compiled = None

    @classmethod
    def const(cls, value, nvars: int) -> "Poly":
        c = to_fraction(value)
        if c == 0:
            return cls(nvars)
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, index: int, nvars: int) -> "Poly":
        if not 0 <= index < nvars:
            raise DimensionError("variable index out of range")
        exps = tuple(1 if i == index else 0 for i in range(nvars))
        return cls(nvars, {exps: Fraction(1)})

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def degree_in(self, index: int) -> int:
        if not self.terms:
            return 0
        return max(e[index] for e in self.terms)

    def content(self) -> Fraction:
        return fraction_gcd(self.terms.values())

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise DimensionError("polynomials over different rings")
            return other
        return Poly.const(other, self.nvars)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for exps, c in other.terms.items():
            s = terms.get(exps, Fraction(0)) + c
            if s:
                terms[exps] = s
            else:
                terms.pop(exps, None)
        return Poly(self.nvars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            c = to_fraction(other)
            if c == 0:
                return Poly(self.nvars)
            return Poly(self.nvars, {e: k * c for e, k in self.terms.items()})
        other = self._coerce(other)
        terms: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                exps = tuple(a + b for a, b in zip(e1, e2))
                s = terms.get(exps, Fraction(0)) + c1 * c2
                if s:
                    terms[exps] = s
                else:
                    terms.pop(exps, None)
        return Poly(self.nvars, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = Poly.const(1, self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.nvars == other.nvars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == Poly.const(other, self.nvars)
        return NotImplemented

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def diff(self, index: int) -> "Poly":
        terms: dict = {}
        for exps, c in self.terms.items():
            k = exps[index]
            if k == 0:
                continue
            new = list(exps)
            new[index] = k - 1
            e = tuple(new)
            s = terms.get(e, Fraction(0)) + c * k
            if s:
                terms[e] = s
            else:
                terms.pop(e, None)
        return Poly(self.nvars, terms)

    def evaluate(self, point: Sequence):
        """Evaluate at a point of exact scalars (or Polys: substitution)."""
        if len(point) != self.nvars:
            raise DimensionError("point dimension != nvars")
        total = None
        for exps, c in self.terms.items():
            term = c
            for value, k in zip(point, exps):
                for _ in range(k):
                    term = term * value
            total = term if total is None else total + term
        if total is None:
            if point and isinstance(point[0], Poly):
                return Poly(point[0].nvars)
            return Fraction(0)
        return total

    def shift_vars(self, new_nvars: int) -> "Poly":
        """Reinterpret over a larger ring (extra trailing variables)."""
        if new_nvars < self.nvars:
            raise DimensionError("cannot drop variables")
        pad = (0,) * (new_nvars - self.nvars)
        return Poly(new_nvars, {e + pad: c for e, c in self.terms.items()})

    def _compile(self):
        if self._compiled is None:
            if self.terms:
                exps = np.array(sorted(self.terms), dtype=np.int64)
                coeffs = np.array(
                    [float(self.terms[tuple(e)]) for e in exps], dtype=np.float64
                )
            else:
                exps = np.zeros((0, self.nvars), dtype=np.int64)
                coeffs = np.zeros(0, dtype=np.float64)
            self._compiled = (exps, coeffs)
        return self._compiled

    def eval_float(self, point) -> float:
        exps, coeffs = self._compile()
        if len(coeffs) == 0:
            return 0.0
        p = np.asarray(point, dtype=np.float64)
        return float(np.dot(coeffs, np.prod(p[None, :] ** exps, axis=1)))

    def eval_array(self, points: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; `points` has shape (N, nvars)."""
        exps, coeffs = self._compile()
        pts = np.asarray(points, dtype=np.float64)
        if len(coeffs) == 0:
            return np.zeros(pts.shape[0], dtype=np.float64)
        acc = np.zeros(pts.shape[0], dtype=np.float64)
        for e, c in zip(exps, coeffs):
            term = np.full(pts.shape[0], c)
            for j, k in enumerate(e):
                if k == 1:
                    term = term * pts[:, j]
                elif k > 1:
                    term = term * pts[:, j] ** k
            acc += term
        return acc

    def __str__(self):
        if not self.terms:
            return "0"
        names = [f"x{i + 1}" for i in range(self.nvars)]
        parts = []
        for exps in sorted(self.terms, key=lambda e: (sum(e), e)):
            c = self.terms[exps]
            factors = []
            for name, k in zip(names, exps):
                if k == 1:
                    factors.append(name)
                elif k > 1:
                    factors.append(f"{name}^{k}")
            body = "*".join(factors)
            if not body:
                parts.append(str(c))
            elif c == 1:
                parts.append(body)
            elif c == -1:
                parts.append(f"-{body}")
            else:
                parts.append(f"{c}*{body}")
        return " + ".join(parts).replace("+ -", "- ")

    __repr__ = __str__


class PolyVectorField:
    """Vector field on R^dim with polynomial components over Q.

    Components may share a ring with extra trailing parameter variables
    (``nvars >= dim``); geometric operations differentiate only the first
    ``dim`` variables.
    """

    __slots__ = ("dim", "nvars", "components")

    def __init__(self, dim: int, components: Sequence[Poly]):
        if dim <= 0:
            raise DimensionError("dim must be positive")
        if len(components) != dim:
            raise DimensionError("component count != dim")
        nvars = components[0].nvars
        if nvars < dim or any(c.nvars != nvars for c in components):
            raise DimensionError("inconsistent component rings")
        self.dim = dim
        self.nvars = nvars
        self.components = tuple(components)

    @classmethod
    def from_coeff_map(cls, dim: int, entries: dict, nvars: int | None = None):
        """Build from {component_index: {exponents: coeff}}; zero elsewhere."""
        nv = nvars if nvars is not None else dim
        comps = []
        for i in range(dim):
            comps.append(Poly(nv, entries.get(i, {})))
        return cls(dim, comps)

    @classmethod
    def zero(cls, dim: int, nvars: int | None = None):
        nv = nvars if nvars is not None else dim
        return cls(dim, [Poly(nv) for _ in range(dim)])

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def _check(self, other: "PolyVectorField"):
        if self.dim != other.dim or self.nvars != other.nvars:
            raise DimensionError("fields on different spaces")

    def __add__(self, other):
        self._check(other)
        return PolyVectorField(
            self.dim, [a + b for a, b in zip(self.components, other.components)]
        )

    def __sub__(self, other):
        self._check(other)
        return PolyVectorField(
            self.dim, [a - b for a, b in zip(self.components, other.components)]
        )

    def __neg__(self):
        return PolyVectorField(self.dim, [-c for c in self.components])

    def scale(self, factor) -> "PolyVectorField":
        return PolyVectorField(self.dim, [c * factor for c in self.components])

    def with_params(self, nvars: int) -> "PolyVectorField":
        return PolyVectorField(self.dim, [c.shift_vars(nvars) for c in self.components])

    def __eq__(self, other):
        return (
            isinstance(other, PolyVectorField)
            and self.dim == other.dim
            and self.components == other.components
        )

    def __hash__(self):
        return hash((self.dim, self.components))

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.components) + ")"

    __repr__ = __str__


def bracket(X: PolyVectorField, Y: PolyVectorField) -> PolyVectorField:
    """Lie bracket [X, Y] = (JY)X - (JX)Y, exact in Q."""
    X._check(Y)
    comps = []
    for i in range(X.dim):
        acc = Poly(X.nvars)
        for j in range(X.dim):
            acc = acc + X.components[j] * Y.components[i].diff(j)
            acc = acc - Y.components[j] * X.components[i].diff(j)
        comps.append(acc)
    return PolyVectorField(X.dim, comps)


def evaluate(X: PolyVectorField, p: Sequence):
    """Componentwise evaluation; exact for exact inputs.

    The point must supply one value per ring variable (state coordinates
    first, then any formal parameters).
    """
    if len(p) != X.nvars:
        raise DimensionError("point dimension mismatch")
    return tuple(c.evaluate(p) for c in X.components)


def ad_exp(Y: PolyVectorField, s, Z: PolyVectorField, max_terms: int = 20):
    """e^{s ad(Y)} Z as a terminating series: sum_k s^k/k! ad(Y)^k Z.

    `s` may be a Fraction or a Poly over the fields' parameter ring.
    Raises NilpotencyError if ad(Y)^k Z does not vanish within max_terms.
    """
    Y._check(Z)
    if isinstance(s, Poly):
        if s.nvars != Y.nvars:
            raise DimensionError("series parameter over a different ring")
        if any(s.degree_in(i) for i in range(Y.dim)):
            raise DimensionError("series parameter may not depend on the state")
    total = Z
    term = Z
    for k in range(1, max_terms + 1):
        term = bracket(Y, term)
        if term.is_zero():
            return total
        factor = s * Fraction(1, k) if isinstance(s, Poly) else to_fraction(s) / k
        term = term.scale(factor)
        total = total + term
    raise NilpotencyError(
        f"ad-exponential did not terminate within {max_terms} terms"
    )


def flow_coefficients(field: PolyVectorField, max_terms: int = 20) -> list[tuple]:
    """Taylor coefficients of the flow of a nilpotent polynomial field.

    Returns [c_0, c_1, ...] with c_k a tuple of Polys such that the time-t
    flow of a point x is sum_k t^k c_k(x); c_0 is the identity.  Raises
    NilpotencyError when the expansion does not terminate, which happens
    exactly when some iterated directional derivative fails to vanish.
    """
    coords = [Poly.var(i, field.nvars) for i in range(field.dim)]
    coeffs = [tuple(coords)]
    current = coords
    for k in range(1, max_terms + 1):
        nxt = []
        for comp in current:
            acc = Poly(field.nvars)
            for j in range(field.dim):
                acc = acc + field.components[j] * comp.diff(j)
            nxt.append(acc * Fraction(1, k))
        if all(c.is_zero() for c in nxt):
            return coeffs
        coeffs.append(tuple(nxt))
        current = nxt
    raise NilpotencyError("flow expansion did not terminate")


def _compile_field(field: PolyVectorField):
    """Generate a fast float evaluator tuple -> tuple for the field."""
    names = [f"x{i}" for i in range(field.dim)]
    exprs = []
    for comp in field.components:
        if not comp.terms:
            exprs.append("0.0")
            continue
        parts = []
        for exps in sorted(comp.terms):
            factors = [repr(float(comp.terms[exps]))]
            for name, k in zip(names, exps):
                factors.extend([name] * k)
            parts.append("*".join(factors))
        exprs.append(" + ".join(parts))
    src = f"lambda {', '.join(names)}: ({', '.join(exprs)},)"
    return eval(src, {"__builtins__": {}})  # generated from exact data only


def rk_integrate(field: PolyVectorField, p0: Sequence, t, steps: int):
    """Classical RK4 composed `steps` times; numeric cross-check only."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    t = float(t)
    if t < 0:
        raise ValueError("duration must be nonnegative")
    if field.nvars != field.dim:
        raise DimensionError("cannot integrate a field with free parameters")
    if len(p0) != field.dim:
        raise DimensionError("point dimension mismatch")
    h = t / steps
    f = _compile_field(field)
    x = tuple(float(v) for v in p0)
    n = field.dim
    for _ in range(steps):
        k1 = f(*x)
        k2 = f(*(x[i] + 0.5 * h * k1[i] for i in range(n)))
        k3 = f(*(x[i] + 0.5 * h * k2[i] for i in range(n)))
        k4 = f(*(x[i] + h * k3[i] for i in range(n)))
        x = tuple(
            x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            for i in range(n)
        )
    for v in x:
        if not math.isfinite(v):
            raise NumericError("non-finite state during integration")
    return x


def field_from_strings(dim: int, rows: Iterable[dict]) -> PolyVectorField:
    comps = [Poly(dim, row) for row in rows]
    return PolyVectorField(dim, comps)
