"""Registry of nonlinear test systems with known roots and singularity data.

Four built-in systems (``example1`` .. ``example4``) plus a one-dimensional
monomial family ``monomial:p`` (u -> u**p with root 0).  Each problem carries
its analytic Jacobian and, for the singular ones, a unit null vector ``phi``
of F'(0) together with a vector ``psi`` spanning the orthogonal complement of
range(F'(0)); these determine the oblique projector onto the nullspace.

Residual and Jacobian callables are module-level functions so Problem objects
can cross process boundaries.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Optional

from .linalg import Mat, PrecisionContext, Vec


class MissingNullData(Exception):
    """The problem does not carry phi/psi (regular root)."""


# -- residuals and Jacobians -------------------------------------------------
#
# example1 (n=2):  F(u) = (u1 + u2^2,  3/2 u1 u2 + u2^2 + u2^3)
# example2 (n=3):  F(u) = (u1^2 + u2 + u3,  u2 - 2 u3^3,  5 u3 + u3^2)
# example3 (n=3):  example2 with u1^2 replaced by u1^3 (same F'(0))
# example4 (n=3):  regular root, see _f_example4
# monomial (n=1):  F(u) = (u1^p,)

def _f_example1(u: Vec) -> Vec:
    u1, u2 = u.entries
    return Vec((u1 + u2 * u2, u1 * u2 * 3 / 2 + u2 * u2 + u2 * u2 * u2), u.ctx)


def _j_example1(u: Vec) -> Mat:
    ctx = u.ctx
    u1, u2 = u.entries
    one = ctx.one
    return Mat(((one, 2 * u2),
                (u2 * 3 / 2, u1 * 3 / 2 + 2 * u2 + 3 * u2 * u2)), ctx)


def _f_example2(u: Vec) -> Vec:
    u1, u2, u3 = u.entries
    return Vec((u1 * u1 + u2 + u3, u2 - 2 * u3 * u3 * u3, 5 * u3 + u3 * u3), u.ctx)


def _j_example2(u: Vec) -> Mat:
    ctx = u.ctx
    u1, _, u3 = u.entries
    one, zero = ctx.one, ctx.zero
    return Mat(((2 * u1, one, one),
                (zero, one, -6 * u3 * u3),
                (zero, zero, 5 + 2 * u3)), ctx)


def _f_example3(u: Vec) -> Vec:
    u1, u2, u3 = u.entries
    return Vec((u1 * u1 * u1 + u2 + u3, u2 - 2 * u3 * u3 * u3, 5 * u3 + u3 * u3), u.ctx)


def _j_example3(u: Vec) -> Mat:
    ctx = u.ctx
    u1, _, u3 = u.entries
    one, zero = ctx.one, ctx.zero
    return Mat(((3 * u1 * u1, one, one),
                (zero, one, -6 * u3 * u3),
                (zero, zero, 5 + 2 * u3)), ctx)


def _f_example4(u: Vec) -> Vec:
    ctx = u.ctx
    u1, u2, u3 = u.entries
    one = ctx.one
    a = one + u1
    b = one + u2
    return Vec((a * a * b + b * b + u3 - 2,
                ctx.exp(u1) + b * b * b + u3 * u3 - 2,
                ctx.exp(u3 * u3) + b * b - 2), ctx)


def _j_example4(u: Vec) -> Mat:
    ctx = u.ctx
    u1, u2, u3 = u.entries
    one, zero = ctx.one, ctx.zero
    a = one + u1
    b = one + u2
    return Mat(((2 * a * b, a * a + 2 * b, one),
                (ctx.exp(u1), 3 * b * b, 2 * u3),
                (zero, 2 * b, 2 * u3 * ctx.exp(u3 * u3))), ctx)


def _f_monomial(p: int, u: Vec) -> Vec:
    return Vec((u.entries[0] ** p,), u.ctx)


def _j_monomial(p: int, u: Vec) -> Mat:
    u1 = u.entries[0]
    if p == 1:
        return Mat(((u.ctx.one,),), u.ctx)
    return Mat(((p * u1 ** (p - 1),),), u.ctx)


@dataclass(frozen=True)
class Problem:
    """A residual map with known root and singularity metadata.

    ``phi`` is a unit vector spanning ker(F'(root)) and ``psi`` spans
    range(F'(root))^perp; both are None for regular roots.
    ``singularity_order`` is 0 for a regular root, 1 when the second
    derivative along phi has a nullspace component (Assumption-style
    first-order singularity), 2 when that component vanishes as well.
    """

    name: str
    n: int
    f: Callable[[Vec], Vec]
    jac: Callable[[Vec], Mat]
    root_entries: tuple
    has_a2: bool
    phi_entries: Optional[tuple]
    psi_entries: Optional[tuple]
    singularity_order: int

    def root(self, ctx: PrecisionContext) -> Vec:
        return ctx.vec(self.root_entries)

    def phi(self, ctx: PrecisionContext) -> Vec:
        if self.phi_entries is None:
            raise MissingNullData(f"{self.name} has no null vector data")
        return ctx.vec(self.phi_entries)

    def psi(self, ctx: PrecisionContext) -> Vec:
        if self.psi_entries is None:
            raise MissingNullData(f"{self.name} has no range-complement data")
        return ctx.vec(self.psi_entries)

    @property
    def has_null_data(self) -> bool:
        return self.phi_entries is not None and self.psi_entries is not None


@dataclass(frozen=True)
class Projectors:
    """Oblique projector onto span{phi} parallel to range(F'(root)), and its complement."""

    p_n: Mat
    p_x: Mat

    def null_coefficient(self, v: Vec, p: "Problem"):
        """Signed coefficient a with P_N v = a * phi."""
        ctx = v.ctx
        phi = p.phi(ctx)
        psi = p.psi(ctx)
        return psi.dot(v) / psi.dot(phi)


_REGISTRY = {
    "example1": Problem(
        name="example1", n=2, f=_f_example1, jac=_j_example1,
        root_entries=(0, 0), has_a2=True,
        phi_entries=(0, 1), psi_entries=(0, 1), singularity_order=1),
    "example2": Problem(
        name="example2", n=3, f=_f_example2, jac=_j_example2,
        root_entries=(0, 0, 0), has_a2=True,
        # psi = (1,1,0) x (1,0,5), a cross product of the range basis
        phi_entries=(1, 0, 0), psi_entries=(5, -5, -1), singularity_order=1),
    "example3": Problem(
        name="example3", n=3, f=_f_example3, jac=_j_example3,
        root_entries=(0, 0, 0), has_a2=False,
        phi_entries=(1, 0, 0), psi_entries=(5, -5, -1), singularity_order=2),
    "example4": Problem(
        name="example4", n=3, f=_f_example4, jac=_j_example4,
        root_entries=(0, 0, 0), has_a2=False,
        phi_entries=None, psi_entries=None, singularity_order=0),
}


def list_problems() -> list[str]:
    """Names of the built-in registry entries (the monomial family is extra)."""
    return sorted(_REGISTRY)


def get_problem(name: str) -> Problem:
    """Look up a problem by name; ``monomial:p`` builds the 1-D family member."""
    if name in _REGISTRY:
        return _REGISTRY[name]
    if name.startswith("monomial:"):
        try:
            p = int(name.split(":", 1)[1])
        except ValueError:
            raise KeyError(f"bad monomial exponent in {name!r}") from None
        if p < 1:
            raise KeyError("monomial exponent must be >= 1")
        singular = p >= 2
        return Problem(
            name=name, n=1,
            f=functools.partial(_f_monomial, p),
            jac=functools.partial(_j_monomial, p),
            root_entries=(0,), has_a2=(p == 2),
            phi_entries=(1,) if singular else None,
            psi_entries=(1,) if singular else None,
            singularity_order=p - 1)
    raise KeyError(f"unknown problem {name!r}")


def eval_f(p: Problem, u: Vec) -> Vec:
    """Residual F(u), evaluated exactly from the stored formula."""
    if len(u) != p.n:
        raise ValueError(f"{p.name} expects dimension {p.n}, got {len(u)}")
    return p.f(u)


def eval_jacobian(p: Problem, u: Vec) -> Mat:
    """Analytic Jacobian F'(u)."""
    if len(u) != p.n:
        raise ValueError(f"{p.name} expects dimension {p.n}, got {len(u)}")
    return p.jac(u)


def projectors(p: Problem, ctx: PrecisionContext) -> Projectors:
    """P_N = phi psi^T / (psi^T phi) and P_X = I - P_N."""
    if not p.has_null_data:
        raise MissingNullData(f"{p.name} has no phi/psi data")
    phi = p.phi(ctx)
    psi = p.psi(ctx)
    d = psi.dot(phi)
    p_n = Mat(tuple(tuple(a * b / d for b in psi.entries) for a in phi.entries), ctx)
    p_x = ctx.identity(p.n) - p_n
    return Projectors(p_n=p_n, p_x=p_x)


def verify_a2(p: Problem, h, ctx: PrecisionContext) -> Vec:
    """Nullspace component of the second derivative along phi.

    Returns P_N applied to the central second difference
    (F(root + h phi) - 2 F(root) + F(root - h phi)) / h**2, an O(h**2)
    approximation of P_N(F''(root)(phi, phi)).  A nonzero result certifies
    the first-order singularity condition.
    """
    h = ctx.real(h)
    lo = ctx.pow10(-ctx.real(ctx.decimal_digits) / 2)
    if not (lo < h < ctx.pow10(-2)):
        raise ValueError("step h must lie in (10**(-digits/2), 10**-2)")
    proj = projectors(p, ctx)
    phi = p.phi(ctx)
    root = p.root(ctx)
    step = phi.scaled(h)
    f_plus = p.f(root + step)
    f_zero = p.f(root)
    f_minus = p.f(root - step)
    second = Vec(tuple((a - 2 * b + c) / (h * h)
                       for a, b, c in zip(f_plus.entries, f_zero.entries,
                                          f_minus.entries)), ctx)
    return proj.p_n.matvec(second)


def fd_jacobian(p: Problem, u: Vec, ctx: PrecisionContext, h=None) -> Mat:
    """Central-difference Jacobian, default step 10**(-digits/3).

    Independent of :func:`eval_jacobian`; used to cross-check the analytic
    formulas.
    """
    if h is None:
        h = ctx.pow10(-ctx.real(ctx.decimal_digits) / 3)
    else:
        h = ctx.real(h)
    n = p.n
    cols = []
    for j in range(n):
        bump = Vec(tuple(h if i == j else ctx.zero for i in range(n)), ctx)
        f_plus = p.f(u + bump)
        f_minus = p.f(u - bump)
        cols.append(tuple((a - b) / (2 * h)
                          for a, b in zip(f_plus.entries, f_minus.entries)))
    return Mat(tuple(tuple(cols[j][i] for j in range(n)) for i in range(n)), ctx)


def fd_jacobian_deviation(p: Problem, u: Vec, ctx: PrecisionContext):
    """Max entrywise deviation between analytic and finite-difference Jacobian,
    relative to the analytic Jacobian's scale."""
    analytic = p.jac(u)
    approx = fd_jacobian(p, u, ctx)
    scale = analytic.max_abs()
    if scale < ctx.one:
        scale = ctx.one
    dev = ctx.zero
    for ra, rb in zip(analytic.rows, approx.rows):
        for a, b in zip(ra, rb):
            d = abs(a - b)
            if d > dev:
                dev = d
    return dev / scale
