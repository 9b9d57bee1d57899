"""Exact linear algebra over Q, plus nullspaces over Q(params).

The nullspace routine prefers pivots in the *rightmost* columns so that a
constraint system on (a_0, ..., a_K) gets solved for the trailing
coordinates, leaving the leading ones as free parameters; this matches the
conventional presentation of the constrained index spaces used by the
second-order test.

Matrix entries are Fractions or Polys (from `vecfield`); rows whose
entries share a polynomial content are rescaled by it, which is what keeps
the certificate-path pivots rational in practice.
"""

from __future__ import annotations

from fractions import Fraction

from .exact import fraction_gcd
from .vecfield import Poly


def _is_poly(x) -> bool:
    return isinstance(x, Poly)


def _entry_is_zero(x) -> bool:
    return x.is_zero() if _is_poly(x) else x == 0


def _collapse(x):
    """Constant polynomials become plain Fractions."""
    if _is_poly(x):
        if x.is_zero():
            return Fraction(0)
        if x.degree() == 0:
            return x.terms[(0,) * x.nvars]
    return x


def _row_normalize(row: list) -> list:
    """Divide a row by its rational content (and a shared monomial factor)."""
    row = [_collapse(x) for x in row]
    nonzero = [x for x in row if not _entry_is_zero(x)]
    if not nonzero:
        return row
    if all(not _is_poly(x) for x in nonzero):
        g = fraction_gcd(nonzero)
        lead = next(x for x in nonzero)
        if lead < 0:
            g = -g
        return [x / g for x in row]
    # polynomial entries: strip shared monomial * content when one exists
    polys = [x if _is_poly(x) else None for x in row]
    nvars = next(p.nvars for p in polys if p is not None)
    shared = None
    coeffs = []
    for x in row:
        if _entry_is_zero(x):
            continue
        p = x if _is_poly(x) else Poly.const(x, nvars)
        if len(p.terms) != 1:
            return row
        (exps, coeff), = p.terms.items()
        shared = exps if shared is None else tuple(map(min, shared, exps))
        coeffs.append(coeff)
    g = fraction_gcd(coeffs)
    out = []
    for x in row:
        if _entry_is_zero(x):
            out.append(Fraction(0))
            continue
        p = x if _is_poly(x) else Poly.const(x, nvars)
        (exps, coeff), = p.terms.items()
        new_exps = tuple(e - s for e, s in zip(exps, shared))
        if any(new_exps):
            out.append(Poly(nvars, {new_exps: coeff / g}))
        else:
            out.append(coeff / g)
    return out


def _e_mul(a, b):
    if _entry_is_zero(a) or _entry_is_zero(b):
        return Fraction(0)
    return a * b


def _e_sub(a, b):
    if _entry_is_zero(b):
        return _collapse(a)
    if _entry_is_zero(a):
        return _collapse(-b)
    return _collapse(a - b)


def nullspace_right_pivots(rows: list[list]) -> list[list]:
    """Basis of the nullspace, free variables = leading coordinates.

    Entries may be Fractions or Polys in formal parameters; elimination is
    fraction-free (cross-multiplication) so everything stays polynomial.
    Basis vectors are indexed by the free coordinates in increasing order
    with basis[i][free_i] == 1; entries are Fractions whenever every pivot
    normalizes to a rational, which is the case on the certificate paths.
    """
    if not rows:
        return []
    ncols = len(rows[0])
    pivots: dict[int, list] = {}
    for raw in rows:
        row = _row_normalize(list(raw))
        for col in sorted(pivots, reverse=True):
            if not _entry_is_zero(row[col]):
                prow = pivots[col]
                p = prow[col]
                f = row[col]
                row = [
                    _e_sub(_e_mul(p, row[k]), _e_mul(f, prow[k]))
                    for k in range(ncols)
                ]
                row = _row_normalize(row)
        pivot_col = None
        for col in range(ncols - 1, -1, -1):
            if not _entry_is_zero(row[col]):
                pivot_col = col
                break
        if pivot_col is None:
            continue
        if not _is_poly(row[pivot_col]) and row[pivot_col] < 0:
            row = _row_normalize([-x for x in row])
        # back-eliminate the new pivot column from the existing pivot rows
        for col, prow in list(pivots.items()):
            if not _entry_is_zero(prow[pivot_col]):
                p = row[pivot_col]
                f = prow[pivot_col]
                new = [
                    _e_sub(_e_mul(p, prow[k]), _e_mul(f, row[k]))
                    for k in range(ncols)
                ]
                pivots[col] = _row_normalize(new)
        pivots[pivot_col] = row
    free_cols = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free_cols:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for pc, prow in pivots.items():
            pval = prow[pc]
            entry = prow[fc]
            if _entry_is_zero(entry):
                continue
            if _is_poly(pval) or _is_poly(entry):
                ratio = _poly_ratio(entry, pval)
                vec[pc] = -ratio
            else:
                vec[pc] = -entry / pval
        basis.append(vec)
    return basis


def _poly_ratio(num, den):
    """num/den when den divides num as single monomials; else error."""
    nvars = num.nvars if _is_poly(num) else den.nvars
    np_ = num if _is_poly(num) else Poly.const(num, nvars)
    dp = den if _is_poly(den) else Poly.const(den, nvars)
    if len(np_.terms) == 1 and len(dp.terms) == 1:
        (en, cn), = np_.terms.items()
        (ed, cd), = dp.terms.items()
        exps = tuple(a - b for a, b in zip(en, ed))
        if all(e >= 0 for e in exps):
            if any(exps):
                return Poly(nvars, {exps: cn / cd})
            return cn / cd
    raise ArithmeticError(
        "nullspace basis requires a non-polynomial pivot ratio"
    )


def solve_linear(rows: list[list], rhs: list) -> list | None:
    """One solution of rows * x = rhs over Q, or None if inconsistent."""
    n = len(rows)
    if n == 0:
        return []
    ncols = len(rows[0])
    aug = [[Fraction(x) for x in r] + [Fraction(b)] for r, b in zip(rows, rhs)]
    pivots = []
    prow = 0
    for col in range(ncols):
        sel = None
        for r in range(prow, n):
            if aug[r][col] != 0:
                sel = r
                break
        if sel is None:
            continue
        aug[prow], aug[sel] = aug[sel], aug[prow]
        lead = aug[prow][col]
        aug[prow] = [x / lead for x in aug[prow]]
        for r in range(n):
            if r != prow and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[prow])]
        pivots.append(col)
        prow += 1
        if prow == n:
            break
    for r in range(prow, n):
        if aug[r][ncols] != 0:
            return None
    x = [Fraction(0)] * ncols
    for r, col in enumerate(pivots):
        x[col] = aug[r][ncols]
    return x


def positive_witness(matrix: list[list[Fraction]]):
    """Exact search for x with x^T M x > 0 for symmetric rational M.

    Returns (coords, value) or None when M is negative semidefinite.
    Simple candidates (basis vectors, then e_a +- e_b) are tried first so
    that the reported witnesses match the hand-worked ones; the general
    case falls back to symmetric pivoting, which is complete.
    """
    n = len(matrix)
    if n == 0:
        return None

    def qform(v):
        return sum(
            matrix[i][j] * v[i] * v[j] for i in range(n) for j in range(n)
        )

    for a in range(n):
        if matrix[a][a] > 0:
            v = [Fraction(0)] * n
            v[a] = Fraction(1)
            return v, matrix[a][a]
    for a in range(n):
        for b in range(a + 1, n):
            for sb in (1, -1):
                v = [Fraction(0)] * n
                v[a] = Fraction(1)
                v[b] = Fraction(sb)
                val = qform(v)
                if val > 0:
                    return v, val
    # general symmetric pivoting with witness lifting
    idx = list(range(n))
    m = [row[:] for row in matrix]

    def recurse(mat, active):
        k = len(active)
        if k == 0:
            return None
        for a in range(k):
            if mat[a][a] > 0:
                v = {active[a]: Fraction(1)}
                return v
        pivot = None
        for a in range(k):
            if mat[a][a] < 0:
                pivot = a
                break
        if pivot is None:
            for a in range(k):
                for b in range(a + 1, k):
                    if mat[a][b] != 0:
                        s = 1 if mat[a][b] > 0 else -1
                        return {active[a]: Fraction(1), active[b]: Fraction(s)}
            return None
        rest = [a for a in range(k) if a != pivot]
        schur = [
            [
                mat[a][b] - mat[a][pivot] * mat[pivot][b] / mat[pivot][pivot]
                for b in rest
            ]
            for a in rest
        ]
        sub = recurse(schur, [active[a] for a in rest])
        if sub is None:
            return None
        # lift: choose the pivot coordinate to cancel the cross term
        local = {active[a]: sub.get(active[a], Fraction(0)) for a in rest}
        cross = sum(
            mat[pivot][a] * local[active[a]] for a in rest
        )
        local[active[pivot]] = -cross / mat[pivot][pivot]
        return local

    found = recurse(m, idx)
    if found is None:
        return None
    v = [found.get(i, Fraction(0)) for i in range(n)]
    val = qform(v)
    if val <= 0:
        raise AssertionError("witness lifting produced a nonpositive value")
    return v, val
