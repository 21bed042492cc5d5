"""Arbitrary-precision dense linear algebra on small square matrices.

Everything runs under an explicit :class:`PrecisionContext`, so results are
deterministic for a fixed precision and independent of any global mpmath
state.  The matrices in the experiments are tiny (n <= 4), so the
implementations favor transparent error behavior over asymptotic speed:
LU with partial pivoting for solves, one-sided Jacobi rotations for
singular values.
"""
from __future__ import annotations

from mpmath import mp


class LinalgError(Exception):
    """Base class for numerical failures in this module."""


class SingularMatrix(LinalgError):
    """A pivot fell below the relative breakdown threshold."""


class NoConvergence(LinalgError):
    """Jacobi sweeps exceeded the rotation budget."""


class PrecisionContext:
    """Working precision plus the pivot-breakdown guard.

    ``decimal_digits`` is the number of decimal digits carried by every
    scalar created through this context.  ``singular_pivot_guard`` is the
    number of digits of headroom before an LU pivot is declared zero:
    a pivot smaller than ``10**-(decimal_digits - guard)`` times the largest
    matrix entry triggers :class:`SingularMatrix`.
    """

    __slots__ = ("decimal_digits", "singular_pivot_guard", "mp")

    def __init__(self, decimal_digits: int, singular_pivot_guard: int = 20):
        decimal_digits = int(decimal_digits)
        singular_pivot_guard = int(singular_pivot_guard)
        if decimal_digits < 50:
            raise ValueError("decimal_digits must be at least 50")
        if not 0 < singular_pivot_guard < decimal_digits:
            raise ValueError("singular_pivot_guard must lie in (0, decimal_digits)")
        self.decimal_digits = decimal_digits
        self.singular_pivot_guard = singular_pivot_guard
        self.mp = mp.clone()
        self.mp.dps = decimal_digits

    def __repr__(self):
        return (f"PrecisionContext(decimal_digits={self.decimal_digits}, "
                f"singular_pivot_guard={self.singular_pivot_guard})")

    def __eq__(self, other):
        return (isinstance(other, PrecisionContext)
                and self.decimal_digits == other.decimal_digits
                and self.singular_pivot_guard == other.singular_pivot_guard)

    def __hash__(self):
        return hash((self.decimal_digits, self.singular_pivot_guard))

    def __reduce__(self):
        return (PrecisionContext, (self.decimal_digits, self.singular_pivot_guard))

    # -- scalar constructors ------------------------------------------------

    def real(self, x):
        """Convert int/float/str/mpf to a scalar at this precision."""
        if isinstance(x, str):
            return self.mp.mpf(x)
        return self.mp.mpf(x)

    @property
    def zero(self):
        return self.mp.mpf(0)

    @property
    def one(self):
        return self.mp.mpf(1)

    def pow10(self, exponent):
        """10**exponent at working precision (exponent may be fractional)."""
        return self.mp.mpf(10) ** exponent

    @property
    def unit_roundoff(self):
        return self.pow10(-self.decimal_digits)

    def from_bits(self, value):
        """Exact conversion of a (possibly large) Python int."""
        return self.mp.mpf(value)

    def make(self, mpf_tuple):
        """Rebuild a scalar from its exact ``_mpf_`` tuple (worker transport)."""
        return self.mp.make_mpf(mpf_tuple)

    # -- elementary functions ------------------------------------------------

    def sqrt(self, x):
        return self.mp.sqrt(x)

    def log(self, x):
        return self.mp.log(x)

    def exp(self, x):
        return self.mp.exp(x)

    def power(self, x, y):
        return self.mp.power(x, y)

    def is_finite(self, x):
        return self.mp.isfinite(x)

    # -- container constructors ----------------------------------------------

    def vec(self, entries) -> "Vec":
        return Vec(tuple(self.real(x) for x in entries), self)

    def mat(self, rows) -> "Mat":
        return Mat(tuple(tuple(self.real(x) for x in row) for row in rows), self)

    def zero_vec(self, n: int) -> "Vec":
        z = self.zero
        return Vec((z,) * n, self)

    def identity(self, n: int) -> "Mat":
        one, z = self.one, self.zero
        return Mat(tuple(tuple(one if i == j else z for j in range(n))
                         for i in range(n)), self)

    def zero_mat(self, n: int) -> "Mat":
        z = self.zero
        return Mat(((z,) * n,) * n, self)


class Vec:
    """Immutable fixed-length vector of context-bound scalars."""

    __slots__ = ("entries", "ctx")

    def __init__(self, entries, ctx: PrecisionContext):
        self.entries = tuple(entries)
        self.ctx = ctx

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __eq__(self, other):
        return isinstance(other, Vec) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        return "Vec(" + ", ".join(str(x) for x in self.entries) + ")"

    def __add__(self, other):
        return Vec(tuple(a + b for a, b in zip(self.entries, other.entries)), self.ctx)

    def __sub__(self, other):
        return Vec(tuple(a - b for a, b in zip(self.entries, other.entries)), self.ctx)

    def __neg__(self):
        return Vec(tuple(-a for a in self.entries), self.ctx)

    def scaled(self, a) -> "Vec":
        return Vec(tuple(a * x for x in self.entries), self.ctx)

    def dot(self, other):
        acc = self.ctx.zero
        for a, b in zip(self.entries, other.entries):
            acc += a * b
        return acc

    def norm(self):
        """Euclidean norm."""
        return self.ctx.sqrt(self.dot(self))

    def normalized(self) -> "Vec":
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("cannot normalize a zero vector")
        return self.scaled(1 / n)


class Mat:
    """Immutable square matrix of context-bound scalars, row-major."""

    __slots__ = ("rows", "ctx")

    def __init__(self, rows, ctx: PrecisionContext):
        rows = tuple(tuple(r) for r in rows)
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ValueError("matrix must be square")
        self.rows = rows
        self.ctx = ctx

    @property
    def n(self):
        return len(self.rows)

    def __eq__(self, other):
        return isinstance(other, Mat) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return "Mat(" + "; ".join(", ".join(str(x) for x in r) for r in self.rows) + ")"

    def __add__(self, other):
        return Mat(tuple(tuple(a + b for a, b in zip(ra, rb))
                         for ra, rb in zip(self.rows, other.rows)), self.ctx)

    def __sub__(self, other):
        return Mat(tuple(tuple(a - b for a, b in zip(ra, rb))
                         for ra, rb in zip(self.rows, other.rows)), self.ctx)

    def matvec(self, v: Vec) -> Vec:
        out = []
        for row in self.rows:
            acc = self.ctx.zero
            for a, x in zip(row, v.entries):
                acc += a * x
            out.append(acc)
        return Vec(tuple(out), self.ctx)

    def transpose(self) -> "Mat":
        return Mat(tuple(zip(*self.rows)), self.ctx)

    def column(self, j: int) -> Vec:
        return Vec(tuple(row[j] for row in self.rows), self.ctx)

    def max_abs(self):
        m = self.ctx.zero
        for row in self.rows:
            for x in row:
                ax = abs(x)
                if ax > m:
                    m = ax
        return m

    def frobenius_norm(self):
        acc = self.ctx.zero
        for row in self.rows:
            for x in row:
                acc += x * x
        return self.ctx.sqrt(acc)


def outer(v: Vec, w: Vec) -> Mat:
    """Rank-one matrix v w^T."""
    return Mat(tuple(tuple(a * b for b in w.entries) for a in v.entries), v.ctx)


def rank_one_update(B: Mat, v: Vec, w: Vec) -> Mat:
    """Return B + v w^T; B is left unmodified."""
    if B.n != len(v) or B.n != len(w):
        raise ValueError("dimension mismatch in rank-one update")
    return Mat(tuple(tuple(b + a * c for b, c in zip(row, w.entries))
                     for row, a in zip(B.rows, v.entries)), B.ctx)


def lu_solve(A: Mat, b: Vec, ctx: PrecisionContext | None = None) -> Vec:
    """Solve A x = b by LU with partial pivoting.

    Raises :class:`SingularMatrix` when a pivot falls below
    ``10**-(decimal_digits - singular_pivot_guard)`` relative to the largest
    entry of A, which is how quasi-Newton breakdown surfaces to the solvers.
    """
    if ctx is None:
        ctx = A.ctx
    n = A.n
    if len(b) != n:
        raise ValueError("dimension mismatch in lu_solve")
    rows = [list(r) for r in A.rows]
    x = list(b.entries)
    threshold = ctx.pow10(-(ctx.decimal_digits - ctx.singular_pivot_guard)) * A.max_abs()
    for k in range(n):
        piv, piv_mag = k, abs(rows[k][k])
        for i in range(k + 1, n):
            mag = abs(rows[i][k])
            if mag > piv_mag:
                piv, piv_mag = i, mag
        if piv_mag == 0 or piv_mag < threshold:
            raise SingularMatrix(f"pivot {piv_mag} below threshold {threshold}")
        if piv != k:
            rows[k], rows[piv] = rows[piv], rows[k]
            x[k], x[piv] = x[piv], x[k]
        pivot_val = rows[k][k]
        for i in range(k + 1, n):
            m = rows[i][k] / pivot_val
            if m != 0:
                for j in range(k + 1, n):
                    rows[i][j] -= m * rows[k][j]
                x[i] -= m * x[k]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for j in range(i + 1, n):
            acc -= rows[i][j] * x[j]
        x[i] = acc / rows[i][i]
    return Vec(tuple(x), ctx)


def singular_values(A: Mat, ctx: PrecisionContext | None = None):
    """All singular values of A in ascending order, by one-sided Jacobi.

    Columns are rotated until every off-diagonal Gram entry is below
    ``10**(-decimal_digits + 10)`` relative to its diagonal pair.  Raises
    :class:`NoConvergence` after ``60 n**2`` rotations, which only happens
    when the precision context is misconfigured.
    """
    if ctx is None:
        ctx = A.ctx
    n = A.n
    cols = [[A.rows[i][j] for i in range(n)] for j in range(n)]
    tol = ctx.pow10(-ctx.decimal_digits + 10)
    one = ctx.one
    max_rotations = 60 * n * n
    rotations = 0

    def gram(p, q):
        acc = ctx.zero
        cp, cq = cols[p], cols[q]
        for i in range(n):
            acc += cp[i] * cq[i]
        return acc

    # columns below roundoff relative to the largest are deflated to zero;
    # without this, exactly rank-deficient matrices keep parallel columns
    # whose pair criterion never clears (|c| = sqrt(a b) up to rounding)
    floor2 = max(gram(j, j) for j in range(n)) * tol * tol

    while True:
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                a = gram(p, p)
                b = gram(q, q)
                if a <= floor2 or b <= floor2:
                    continue
                c = gram(p, q)
                if c == 0:
                    continue
                if abs(c) <= tol * ctx.sqrt(a * b):
                    continue
                rotations += 1
                if rotations > max_rotations:
                    raise NoConvergence(
                        f"jacobi sweep budget exceeded ({max_rotations} rotations)")
                tau = (b - a) / (2 * c)
                t = one / (abs(tau) + ctx.sqrt(one + tau * tau))
                if tau < 0:
                    t = -t
                cs = one / ctx.sqrt(one + t * t)
                sn = t * cs
                cp, cq = cols[p], cols[q]
                for i in range(n):
                    up, uq = cp[i], cq[i]
                    cp[i] = cs * up - sn * uq
                    cq[i] = sn * up + cs * uq
                rotated = True
        if not rotated:
            break

    svals = []
    for j in range(n):
        acc = ctx.zero
        for x in cols[j]:
            acc += x * x
        svals.append(ctx.sqrt(acc))
    svals.sort()
    return tuple(svals)


def spectral_norm(A: Mat, ctx: PrecisionContext | None = None):
    """Largest singular value."""
    return singular_values(A, ctx)[-1]
