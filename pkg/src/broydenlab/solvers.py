"""Quasi-Newton iterations with full per-iteration traces.

Four drivers share one bookkeeping convention:

* ``broyden_run``    rank-one secant updates from a given (u0, B0);
* ``bmp_run``        a Newton-like step u0 = u_hat - B_hat^{-1} F(u_hat)
                     followed by ``broyden_run``, with the trace re-indexed
                     so the initial guess is entry 0 of the record;
* ``smp_run``        the Shamanskii-like acceleration (Newton iterate,
                     simplified Newton step z, correction y - (4 - C|z|^a) z)
                     behind the same preceding Newton-like step;
* ``newton_run``     plain Newton, for reference.

No failure mode raises out of a run: breakdowns, divergence and iteration
caps all land in ``RunRecord.status``.  Traces are bit-reproducible for a
fixed precision context.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .linalg import (Mat, PrecisionContext, SingularMatrix, Vec, lu_solve,
                     rank_one_update, singular_values, spectral_norm)
from .problems import Problem


class Status(enum.Enum):
    CONVERGED = "converged"
    EXACT_ROOT = "exact-root"
    MAX_ITER = "max-iter"
    SINGULAR_MATRIX = "singular-matrix"
    DIVERGED = "diverged"


#: statuses that mean the run reached the residual tolerance
SUCCESS = (Status.CONVERGED, Status.EXACT_ROOT)


@dataclass(frozen=True)
class SolverOptions:
    """Stopping rules and recording switches for one run.

    ``tol_exponent`` t stops the iteration at ||F(u)|| <= 10**-t; it must
    leave at least 20 digits of headroom below the working precision so the
    test cannot stagnate at roundoff level.  ``divergence_guard`` aborts a
    run whose iterate norm explodes, as a bounded-time alternative to
    ``max_iter``.
    """

    precision: PrecisionContext
    tol_exponent: int
    max_iter: int = 3000
    divergence_guard: float = 1e10
    record_full_matrices: bool = False
    record_spectra: bool = True

    def __post_init__(self):
        if self.tol_exponent < 1:
            raise ValueError("tol_exponent must be positive")
        if self.tol_exponent > self.precision.decimal_digits - 20:
            raise ValueError("tol_exponent must be <= decimal_digits - 20")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class TraceEntry:
    """State at one displayed iteration index k.

    ``s`` is the step u^{k+1} - u^k and ``eps`` the update norm
    ||F(u^{k+1})|| / ||s^k||; both are None at the final index.  ``e_svals``
    are the ascending singular values of E_k = B_k - F'(root) when spectra
    are recorded (never for the Shamanskii-like method, which carries no B).
    """

    u: Vec
    f_norm: object
    s: Optional[Vec] = None
    eps: Optional[object] = None
    e_svals: Optional[tuple] = None
    e_norm: Optional[object] = None
    b: Optional[Mat] = None


@dataclass
class RunRecord:
    """Outcome of one run plus its full trace (display-indexed)."""

    status: Status
    kbar: int
    trace: list
    b_final: Optional[Mat]
    tol_exponent: int
    precision_digits: int
    method: str
    seed_info: dict = field(default_factory=dict)
    #: first index k such that every transition B_k -> B_{k+1} in the trace
    #: is a genuine rank-one secant update; None when there are none.
    broyden_updates_from: Optional[int] = None

    @property
    def success(self) -> bool:
        return self.status in SUCCESS

    def final_u(self) -> Vec:
        return self.trace[-1].u

    def final_f_norm(self):
        return self.trace[-1].f_norm


@dataclass(frozen=True)
class B0Mode:
    """Choice of the Broyden seed matrix B_0 inside ``bmp_run``.

    * ``jacobian_at_u0(beta, noise)``: B_0 = F'(u0) + beta ||F'(u0)||_2 noise
    * ``broyden_update()``:            B_0 = rank-one update of B_hat from
                                       the Newton-like step (u_hat -> u0)
    * ``given(M)``:                    B_0 = M
    """

    kind: str
    beta: object = 0
    noise: Optional[Mat] = None
    matrix: Optional[Mat] = None

    JACOBIAN = "jacobian"
    BROYDEN_UPDATE = "broyden-update"
    GIVEN = "given"

    @classmethod
    def jacobian_at_u0(cls, beta=0, noise: Optional[Mat] = None) -> "B0Mode":
        return cls(kind=cls.JACOBIAN, beta=beta, noise=noise)

    @classmethod
    def broyden_update(cls) -> "B0Mode":
        return cls(kind=cls.BROYDEN_UPDATE)

    @classmethod
    def given(cls, matrix: Mat) -> "B0Mode":
        return cls(kind=cls.GIVEN, matrix=matrix)


# -- shared bookkeeping --------------------------------------------------------

def _record_entry(trace, u, f_norm, B, opts, j_root):
    entry = TraceEntry(u=u, f_norm=f_norm)
    if B is not None and opts.record_spectra and j_root is not None:
        svals = singular_values(B - j_root, opts.precision)
        entry.e_svals = svals
        entry.e_norm = svals[-1]
    if B is not None and opts.record_full_matrices:
        entry.b = B
    trace.append(entry)
    return entry


def _check_terminal(f_norm, u, k, opts, tol, guard) -> Optional[Status]:
    if f_norm == 0:
        return Status.EXACT_ROOT
    if f_norm <= tol:
        return Status.CONVERGED
    if u.norm() > guard:
        return Status.DIVERGED
    if k >= opts.max_iter:
        return Status.MAX_ITER
    return None


def _secant_update(B, s, f_next) -> Mat:
    # B_k s = -F(u^k) from the solve, so y - B_k s collapses to F(u^{k+1});
    # using that form keeps ||B_{k+1} - B_k|| equal to eps_k to working
    # precision instead of polluting it with the LU residual.
    return rank_one_update(B, f_next.scaled(1 / s.dot(s)), s)


def _engine(p, u, B, opts, trace, j_root, fu=None, newton=False):
    """Iterate from (u, B), appending to ``trace``; returns (status, B_last)."""
    ctx = opts.precision
    tol = ctx.pow10(-opts.tol_exponent)
    guard = ctx.real(opts.divergence_guard)
    if fu is None:
        fu = p.f(u)
    while True:
        nf = fu.norm()
        entry = _record_entry(trace, u, nf, B, opts, j_root)
        status = _check_terminal(nf, u, len(trace) - 1, opts, tol, guard)
        if status is not None:
            return status, B
        try:
            s = lu_solve(B, -fu, ctx)
        except SingularMatrix:
            return Status.SINGULAR_MATRIX, B
        ns = s.norm()
        if ns == 0:
            # zero step with a nonzero residual: the update is undefined
            return Status.SINGULAR_MATRIX, B
        u_next = u + s
        f_next = p.f(u_next)
        entry.s = s
        entry.eps = f_next.norm() / ns
        if newton:
            B_next = p.jac(u_next)
        else:
            B_next = _secant_update(B, s, f_next)
        u, fu, B = u_next, f_next, B_next


def _spectra_root(p, opts):
    if not opts.record_spectra:
        return None
    ctx = opts.precision
    return p.jac(p.root(ctx))


def broyden_run(p: Problem, u0: Vec, b0: Mat, opts: SolverOptions,
                seed_info: Optional[dict] = None) -> RunRecord:
    """Plain Broyden iteration from (u0, B0)."""
    if b0.n != p.n or len(u0) != p.n:
        raise ValueError("dimension mismatch")
    j_root = _spectra_root(p, opts)
    trace = []
    status, b_last = _engine(p, u0, b0, opts, trace, j_root)
    return RunRecord(status=status, kbar=len(trace) - 1, trace=trace,
                     b_final=b_last, tol_exponent=opts.tol_exponent,
                     precision_digits=opts.precision.decimal_digits,
                     method="bm", seed_info=dict(seed_info or {}),
                     broyden_updates_from=0)


def bmp_run(p: Problem, u_hat: Vec, b_hat: Mat, mode: B0Mode,
            opts: SolverOptions, seed_info: Optional[dict] = None) -> RunRecord:
    """Broyden's method with a preceding Newton-like step.

    The record is re-indexed for display: entry 0 holds (u_hat, B_hat), entry
    1 the Newton-like iterate u0 with the selected B_0, and so on, matching
    how single-run tables label the sequence.
    """
    if b_hat.n != p.n or len(u_hat) != p.n:
        raise ValueError("dimension mismatch")
    ctx = opts.precision
    tol = ctx.pow10(-opts.tol_exponent)
    guard = ctx.real(opts.divergence_guard)
    j_root = _spectra_root(p, opts)
    info = dict(seed_info or {})
    info.setdefault("b0_mode", mode.kind)

    def record(status, trace, b_last, updates_from):
        return RunRecord(status=status, kbar=len(trace) - 1, trace=trace,
                         b_final=b_last, tol_exponent=opts.tol_exponent,
                         precision_digits=ctx.decimal_digits, method="bmp",
                         seed_info=info, broyden_updates_from=updates_from)

    trace = []
    f_hat = p.f(u_hat)
    nf_hat = f_hat.norm()
    entry0 = _record_entry(trace, u_hat, nf_hat, b_hat, opts, j_root)
    status = _check_terminal(nf_hat, u_hat, 0, opts, tol, guard)
    if status is not None:
        return record(status, trace, b_hat, None)
    try:
        s0 = lu_solve(b_hat, -f_hat, ctx)
    except SingularMatrix:
        return record(Status.SINGULAR_MATRIX, trace, b_hat, None)
    ns0 = s0.norm()
    if ns0 == 0:
        return record(Status.SINGULAR_MATRIX, trace, b_hat, None)
    u0 = u_hat + s0
    f0 = p.f(u0)
    entry0.s = s0
    entry0.eps = f0.norm() / ns0

    if mode.kind == B0Mode.JACOBIAN:
        j0 = p.jac(u0)
        beta = ctx.real(mode.beta)
        if beta != 0 and mode.noise is not None:
            scale = beta * spectral_norm(j0, ctx)
            b0 = j0 + Mat(tuple(tuple(scale * x for x in row)
                                for row in mode.noise.rows), ctx)
        else:
            b0 = j0
        updates_from = 1
    elif mode.kind == B0Mode.BROYDEN_UPDATE:
        b0 = _secant_update(b_hat, s0, f0)
        updates_from = 0
    elif mode.kind == B0Mode.GIVEN:
        b0 = mode.matrix
        updates_from = 1
    else:
        raise ValueError(f"unknown B0 mode {mode.kind!r}")

    status, b_last = _engine(p, u0, b0, opts, trace, j_root, fu=f0)
    return record(status, trace, b_last, updates_from)


def newton_run(p: Problem, u0: Vec, opts: SolverOptions,
               seed_info: Optional[dict] = None) -> RunRecord:
    """Newton's method with the Jacobian refreshed every step."""
    if len(u0) != p.n:
        raise ValueError("dimension mismatch")
    j_root = _spectra_root(p, opts)
    trace = []
    status, b_last = _engine(p, u0, p.jac(u0), opts, trace, j_root, newton=True)
    return RunRecord(status=status, kbar=len(trace) - 1, trace=trace,
                     b_final=b_last, tol_exponent=opts.tol_exponent,
                     precision_digits=opts.precision.decimal_digits,
                     method="newton", seed_info=dict(seed_info or {}),
                     broyden_updates_from=None)


def smp_run(p: Problem, u_hat: Vec, b_hat: Mat, c, alpha,
            opts: SolverOptions, seed_info: Optional[dict] = None) -> RunRecord:
    """Shamanskii-like acceleration behind a preceding Newton-like step.

    After u^{-1} = u_hat - B_hat^{-1} F(u_hat) and a Newton step to u^0, each
    iteration computes the Newton iterate y, the simplified Newton step
    z = F'(u)^{-1} F(y), and corrects to y - (4 - C ||z||^alpha) z.  The trace
    lists (u_hat, u^{-1}, u^0, u^1, ...); there is no Broyden matrix, so eps
    and spectra stay empty.
    """
    if b_hat.n != p.n or len(u_hat) != p.n:
        raise ValueError("dimension mismatch")
    ctx = opts.precision
    c = ctx.real(c)
    alpha = ctx.real(alpha)
    if c == 0:
        raise ValueError("C must be nonzero")
    golden = (ctx.sqrt(ctx.real(5)) - 1) / 2
    if not (0 < alpha < golden):
        raise ValueError("alpha must lie in (0, (sqrt(5)-1)/2)")
    tol = ctx.pow10(-opts.tol_exponent)
    guard = ctx.real(opts.divergence_guard)
    info = dict(seed_info or {})

    trace = []
    u = u_hat
    fu = p.f(u)
    status = None
    while True:
        nf = fu.norm()
        entry = _record_entry(trace, u, nf, None, opts, None)
        status = _check_terminal(nf, u, len(trace) - 1, opts, tol, guard)
        if status is not None:
            break
        k = len(trace) - 1
        try:
            if k == 0:
                u_next = u + lu_solve(b_hat, -fu, ctx)
            elif k == 1:
                u_next = u + lu_solve(p.jac(u), -fu, ctx)
            else:
                j = p.jac(u)
                y = u + lu_solve(j, -fu, ctx)
                z = lu_solve(j, p.f(y), ctx)
                nz = z.norm()
                if nz == 0:
                    u_next = y
                else:
                    factor = 4 - c * ctx.power(nz, alpha)
                    u_next = y - z.scaled(factor)
        except SingularMatrix:
            status = Status.SINGULAR_MATRIX
            break
        entry.s = u_next - u
        u = u_next
        fu = p.f(u)

    return RunRecord(status=status, kbar=len(trace) - 1, trace=trace,
                     b_final=None, tol_exponent=opts.tol_exponent,
                     precision_digits=ctx.decimal_digits, method="smp",
                     seed_info=info, broyden_updates_from=None)
