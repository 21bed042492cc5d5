"""Per-iteration convergence diagnostics derived from a solver trace.

For a trace (u^0, u^1, ..., u^kbar) with steps s^k = u^{k+1} - u^k and update
norms eps_k = ||F(u^{k+1})|| / ||s^k||, each row collects

    err_k   = ||u^k - root||
    r_k     = err_k ** (1/k)                    (k-th root of the error)
    q_k     = err_k / err_{k-1}
    r_eps_k = eps_{k-1} ** (1/k)                (update-norm analogue of r)
    q_eps_k = eps_{k-1} / eps_{k-2}             (update-norm analogue of q)
    delta_k = log ||F_k|| / log ||s^{k-1}||
    zeta_k  = min(||shat^k - phi||, ||shat^k + phi||)
    lam_k   = signed ratio of successive nullspace components
    omega_k = ||P_X (u^k - root)|| / ||P_N (u^k - root)||**2

plus the ascending singular values of E_k = B_k - F'(root).  Undefined
entries carry the sentinel -1; delta additionally requires ||s^{k-1}|| < 1
so the logarithm ratio keeps its sign.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .linalg import Mat, Vec, singular_values, spectral_norm
from .problems import Problem, projectors
from .solvers import RunRecord


class BadSelection(Exception):
    """Step-selection indices are out of range or not increasing."""


@dataclass
class MetricsRow:
    k: int
    f_norm: object
    err: object
    r: object
    q: object
    eps: object
    r_eps: object
    q_eps: object
    delta: object
    zeta: object
    lam: object
    omega: object
    e_svals: Optional[tuple]
    e_norm: object


def metrics_from_trace(rec: RunRecord, p: Problem) -> list[MetricsRow]:
    """One MetricsRow per displayed iteration index of ``rec``.

    Nullspace-based quantities (zeta, lam, omega) need phi/psi and are
    sentinels for problems without them; lam and omega also fall back to the
    sentinel once the nullspace component drops below the stopping tolerance.
    """
    trace = rec.trace
    ctx = trace[0].u.ctx
    sentinel = ctx.real(-1)
    root = p.root(ctx)
    floor = ctx.pow10(-rec.tol_exponent)

    phi = None
    p_x = None
    coeffs = None
    if p.has_null_data:
        proj = projectors(p, ctx)
        phi = p.phi(ctx)
        p_x = proj.p_x
        psi = p.psi(ctx)
        d = psi.dot(phi)
        coeffs = [psi.dot(e.u - root) / d for e in trace]

    errs = [(e.u - root).norm() for e in trace]
    step_norms = [e.s.norm() if e.s is not None else None for e in trace]

    rows = []
    for k, entry in enumerate(trace):
        err = errs[k]
        r = sentinel
        q = sentinel
        if k >= 1:
            inv_k = ctx.one / k
            r = ctx.power(err, inv_k) if err > 0 else ctx.zero
            if errs[k - 1] > 0:
                q = err / errs[k - 1]

        eps_prev = sentinel
        r_eps = sentinel
        q_eps = sentinel
        if k >= 1 and trace[k - 1].eps is not None:
            eps_prev = trace[k - 1].eps
            if eps_prev > 0:
                r_eps = ctx.power(eps_prev, ctx.one / k)
            elif eps_prev == 0:
                r_eps = ctx.zero
            if k >= 2 and trace[k - 2].eps is not None and trace[k - 2].eps > 0:
                q_eps = eps_prev / trace[k - 2].eps

        delta = sentinel
        if k >= 1 and step_norms[k - 1] is not None:
            ns_prev = step_norms[k - 1]
            if 0 < ns_prev < 1 and entry.f_norm > 0:
                delta = ctx.log(entry.f_norm) / ctx.log(ns_prev)

        zeta = sentinel
        if phi is not None and entry.s is not None and step_norms[k] > 0:
            shat = entry.s.scaled(1 / step_norms[k])
            zeta = min((shat - phi).norm(), (shat + phi).norm())

        lam = sentinel
        omega = sentinel
        if coeffs is not None:
            a_k = coeffs[k]
            if abs(a_k) > floor:
                omega = p_x.matvec(entry.u - root).norm() / (a_k * a_k)
                if k + 1 < len(trace):
                    lam = coeffs[k + 1] / a_k

        rows.append(MetricsRow(
            k=k, f_norm=entry.f_norm, err=err, r=r, q=q, eps=eps_prev,
            r_eps=r_eps, q_eps=q_eps, delta=delta, zeta=zeta, lam=lam,
            omega=omega, e_svals=entry.e_svals,
            e_norm=entry.e_norm if entry.e_norm is not None else sentinel))
    return rows


def normalized_steps(rec: RunRecord) -> list[Vec]:
    """Unit steps shat^k for every index that has a step."""
    out = []
    for entry in rec.trace:
        if entry.s is not None:
            out.append(entry.s.normalized())
    return out


def uli_min_sv(steps, k: int, selection, ctx=None):
    """Smallest singular value of the matrix of selected normalized steps.

    ``selection`` must pick n strictly increasing indices >= k out of
    ``steps``; uniform linear independence would require this value to stay
    above a fixed bound along the iteration, which singular problems violate.
    """
    if not steps:
        raise BadSelection("no steps supplied")
    if ctx is None:
        ctx = steps[0].ctx
    n = len(steps[0])
    selection = list(selection)
    if len(selection) != n:
        raise BadSelection(f"need exactly {n} indices, got {len(selection)}")
    if any(i < k for i in selection):
        raise BadSelection("selection indices must be >= k")
    if any(b <= a for a, b in zip(selection, selection[1:])):
        raise BadSelection("selection indices must be strictly increasing")
    if any(i >= len(steps) for i in selection):
        raise BadSelection("selection index out of range")
    unit_tol = ctx.pow10(-ctx.decimal_digits + 15)
    for i in selection:
        if abs(steps[i].norm() - 1) > unit_tol:
            raise ValueError(f"step {i} is not unit-norm")
    cols = [steps[i] for i in selection]
    m = Mat(tuple(tuple(cols[j][i] for j in range(n)) for i in range(n)), ctx)
    return singular_values(m, ctx)[0]


def consecutive_uli_min_sv(steps, k: int, ctx=None):
    """ULI probe with the default selection: the n consecutive steps from k."""
    if not steps:
        raise BadSelection("no steps supplied")
    n = len(steps[0])
    return uli_min_sv(steps, k, range(k, k + n), ctx)


def nullspace_residual(B: Mat, phi: Vec):
    """||B phi||, the residual of phi against ker(B); phi should be unit."""
    return B.matvec(phi).norm()


def update_norm_identity_errors(rec: RunRecord):
    """Relative gaps |eps_k - ||B_{k+1} - B_k||| / eps_k over the recorded
    Broyden updates.

    Requires the run to have been recorded with ``record_full_matrices``.
    The spectral norm of the update is recomputed by SVD, so this checks the
    update-norm identity through an independent path.
    """
    if rec.broyden_updates_from is None:
        return []
    out = []
    for k in range(rec.broyden_updates_from, rec.kbar):
        entry, nxt = rec.trace[k], rec.trace[k + 1]
        if entry.b is None or nxt.b is None or entry.eps is None:
            raise ValueError("run was not recorded with record_full_matrices")
        if entry.eps == 0:
            continue
        gap = abs(entry.eps - spectral_norm(nxt.b - entry.b))
        out.append((k, gap / entry.eps))
    return out


def fitted_q_order(errs, points: int = 6) -> float:
    """Least-squares slope of log err_{k+1} against log err_k.

    Uses the last ``points`` consecutive pairs with positive errors; the
    slope estimates the q-order of convergence.  Plain float arithmetic is
    enough because only the logarithms enter.
    """
    logs = [math_log(e) if e > 0 else None for e in errs]
    pairs = [(logs[i], logs[i + 1]) for i in range(len(logs) - 1)
             if logs[i] is not None and logs[i + 1] is not None]
    pairs = pairs[-points:]
    if len(pairs) < 2:
        raise ValueError("need at least 2 positive error pairs")
    xs = [a for a, _ in pairs]
    ys = [b for _, b in pairs]
    n = len(pairs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    var = sum((x - mean_x) ** 2 for x in xs)
    if var == 0:
        raise ValueError("degenerate regression: constant errors")
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    return cov / var


def math_log(x) -> float:
    """log of an mpf or float as a plain float (safe for tiny magnitudes)."""
    if hasattr(x, "_mpf_"):
        import mpmath
        return float(mpmath.log(x))
    return math.log(x)
