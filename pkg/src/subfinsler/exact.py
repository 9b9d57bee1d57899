"""Exact scalar arithmetic shared by the certificate-producing layers.

Scalars are `fractions.Fraction` wherever a value is rational.  Quadratic
switching polynomials can have irrational roots; those are represented as
exact sympy expressions (nested square roots of rationals).  Everything in
this module decides signs and zero-ness exactly -- no tolerances.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Sequence, Union

import sympy

Scalar = Union[Fraction, sympy.Expr]

_FRACTION_RE = re.compile(r"^-?\d+(/\d+)?$")


def to_fraction(x) -> Fraction:
    """Coerce ints, Fractions, and rational sympy numbers to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, sympy.Rational):
        return Fraction(int(x.p), int(x.q))
    raise TypeError(f"not an exact rational: {x!r}")


def to_sympy(x) -> sympy.Expr:
    if isinstance(x, Fraction):
        return sympy.Rational(x.numerator, x.denominator)
    if isinstance(x, int):
        return sympy.Integer(x)
    return sympy.sympify(x)


def is_rational(x) -> bool:
    return isinstance(x, (int, Fraction)) or (
        isinstance(x, sympy.Expr) and x.is_Rational
    )


def as_common(values: Sequence) -> list:
    """Promote a mixed Fraction/sympy sequence to a single representation.

    If every value is rational the result is all-Fraction; otherwise all
    entries are exact sympy expressions.
    """
    if all(is_rational(v) for v in values):
        return [to_fraction(v) for v in values]
    return [to_sympy(v) if not isinstance(v, sympy.Expr) else v for v in values]


def sign(x) -> int:
    """Exact sign in {-1, 0, 1}."""
    if isinstance(x, (int, Fraction)):
        return (x > 0) - (x < 0)
    expr = x if isinstance(x, sympy.Expr) else to_sympy(x)
    if expr.is_zero:
        return 0
    simplified = sympy.radsimp(expr)
    if simplified.is_zero or sympy.simplify(simplified) == 0:
        return 0
    pos = simplified.is_positive
    if pos is None:
        pos = sympy.simplify(simplified).is_positive
    if pos is None:
        raise ArithmeticError(f"cannot decide sign of {x!r}")
    return 1 if pos else -1


def is_zero(x) -> bool:
    return sign(x) == 0


def exact_eq(a, b) -> bool:
    if isinstance(a, (int, Fraction)) and isinstance(b, (int, Fraction)):
        return a == b
    return is_zero(to_sympy(a) - to_sympy(b))


def exact_sqrt(x):
    """Exact nonnegative square root: Fraction when perfect, else sympy."""
    if isinstance(x, (int, Fraction)):
        f = to_fraction(x)
        if f < 0:
            raise ValueError("square root of negative value")
        if f == 0:
            return Fraction(0)
        num, den = f.numerator, f.denominator
        rn, rd = math.isqrt(num), math.isqrt(den)
        if rn * rn == num and rd * rd == den:
            return Fraction(rn, rd)
        return sympy.sqrt(sympy.Rational(num, den))
    return sympy.sqrt(to_sympy(x))


def quadratic_roots(c0, c1, c2) -> list:
    """Real roots of c0 + c1 t + c2 t^2, ascending, exact.

    A double root is listed once.  Coefficients may be Fractions or exact
    sympy expressions.
    """
    if is_zero(c2):
        if is_zero(c1):
            return []
        r = _div(-c0, c1)
        return [r]
    disc = _sub(_mul(c1, c1), _mul(_mul(4, c2), c0))
    sd = sign(disc)
    if sd < 0:
        return []
    if sd == 0:
        return [_div(_neg(c1), _mul(2, c2))]
    root = exact_sqrt(disc)
    two_a = _mul(2, c2)
    r1 = _div(_sub(_neg(c1), root), two_a)
    r2 = _div(_add(_neg(c1), root), two_a)
    return [r1, r2] if sign(_sub(r2, r1)) > 0 else [r2, r1]


def smallest_root_in(c0, c1, c2, upper, open_lower=True):
    """Smallest root of the quadratic in (0, upper], with tangency flag.

    Returns (root, is_double) or (None, False).  `upper` may be None for
    an unbounded search window.
    """
    roots = quadratic_roots(c0, c1, c2)
    double = not is_zero(c2) and len(roots) == 1
    for r in roots:
        if sign(r) <= 0 and open_lower:
            continue
        if sign(r) < 0:
            continue
        if upper is not None and sign(_sub(r, upper)) > 0:
            continue
        return r, double
    return None, False


def _binop(a, b, op):
    if isinstance(a, (int, Fraction)) and isinstance(b, (int, Fraction)):
        return op(Fraction(a), Fraction(b))
    return op(to_sympy(a), to_sympy(b))


def _add(a, b):
    return _binop(a, b, lambda x, y: x + y)


def _sub(a, b):
    return _binop(a, b, lambda x, y: x - y)


def _mul(a, b):
    return _binop(a, b, lambda x, y: x * y)


def _div(a, b):
    if isinstance(a, (int, Fraction)) and isinstance(b, (int, Fraction)):
        return Fraction(a) / Fraction(b)
    return to_sympy(a) / to_sympy(b)


def _neg(a):
    return -a


def scalar_to_float(x) -> float:
    if isinstance(x, Fraction):
        return x.numerator / x.denominator
    if isinstance(x, sympy.Expr):
        return float(x.evalf(25))
    return float(x)


def fraction_str(x: Fraction) -> str:
    """Serialize a rational as "p" or "p/q"."""
    f = to_fraction(x)
    if f.denominator == 1:
        return str(f.numerator)
    return f"{f.numerator}/{f.denominator}"


def scalar_str(x) -> str:
    """Serialize an exact scalar; rationals as p/q, surds via sympy srepr."""
    if is_rational(x):
        return fraction_str(to_fraction(x))
    return "expr:" + sympy.srepr(to_sympy(x))


def parse_scalar(s: str):
    if _FRACTION_RE.match(s):
        return Fraction(s)
    if s.startswith("expr:"):
        return sympy.sympify(s[5:])
    raise ValueError(f"not an exact scalar literal: {s!r}")


def float17(x) -> str:
    """17-significant-digit decimal used in sampled point clouds."""
    return format(float(x), ".17g")


def fraction_gcd(values: Iterable[Fraction]) -> Fraction:
    """Positive gcd of a set of rationals (content of a polynomial)."""
    num = 0
    den = 1
    for v in values:
        f = to_fraction(v)
        num = math.gcd(num, abs(f.numerator))
        den = den * f.denominator // math.gcd(den, f.denominator)
    if num == 0:
        return Fraction(0)
    return Fraction(num, den)
