import pytest

from helpers import problem_linear, problem_sq_minus_1, secant_iterates
from broydenlab.diagnostics import update_norm_identity_errors
from broydenlab.linalg import Mat, PrecisionContext, Vec
from broydenlab.problems import Problem, get_problem
from broydenlab.solvers import (B0Mode, SolverOptions, Status, bmp_run,
                                broyden_run, newton_run, smp_run)


def opts_for(ctx, tol=60, max_iter=200, **kw):
    return SolverOptions(precision=ctx, tol_exponent=tol, max_iter=max_iter, **kw)


def test_options_validation(ctx100):
    with pytest.raises(ValueError):
        SolverOptions(precision=ctx100, tol_exponent=90)   # < 20 digits headroom
    with pytest.raises(ValueError):
        SolverOptions(precision=ctx100, tol_exponent=0)
    with pytest.raises(ValueError):
        SolverOptions(precision=ctx100, tol_exponent=50, max_iter=0)


def test_linear_system_converges_in_one_step(ctx100):
    p = problem_linear([[2, 1], [0, 1]], [3, 1], [1, 1])
    b0 = ctx100.mat([[2, 1], [0, 1]])
    rec = broyden_run(p, ctx100.vec([5, -2]), b0, opts_for(ctx100))
    assert rec.status is Status.EXACT_ROOT
    assert rec.kbar == 1
    assert rec.trace[-1].u == ctx100.vec([1, 1])
    # the first step solves the model exactly, so the update norm vanishes
    assert rec.trace[0].eps == 0


def test_1d_hand_iteration(ctx100):
    # F(u) = u^2 - 1 from u0 = 2 with B0 = 3: s0 = -F(2)/3 = -1, u1 = 1
    p = problem_sq_minus_1()
    rec = broyden_run(p, ctx100.vec([2]), ctx100.mat([[3]]), opts_for(ctx100))
    assert rec.status is Status.EXACT_ROOT
    assert rec.kbar == 1
    assert rec.trace[0].s == ctx100.vec([-1])
    assert rec.trace[1].u == ctx100.vec([1])


def test_1d_broyden_coincides_with_secant_oracle(ctx100):
    # from iteration 1 on, the 1-D update is the secant difference quotient
    p = problem_sq_minus_1()
    u0 = ctx100.real(2)
    b0 = ctx100.mat([[4]])                       # F'(2)
    rec = broyden_run(p, Vec((u0,), ctx100), b0, opts_for(ctx100, tol=70))
    broyden_us = [e.u[0] for e in rec.trace]
    u1 = broyden_us[1]
    assert u1 == ctx100.real(2) - ctx100.real(3) / 4

    def f(x):
        return x * x - 1

    oracle = secant_iterates(f, u0, u1, ctx100, len(broyden_us))
    tol = ctx100.pow10(-80)
    for a, b in zip(broyden_us[1:], oracle[1:]):
        assert abs(a - b) <= tol * max(ctx100.one, abs(b))


def test_bmp_newton_halving_on_singular_root(ctx100):
    # 1-D F(u) = u^2, u_hat = 1, B_hat = F'(1) = 2: u0 = 1 - 1/2
    p = get_problem("monomial:2")
    rec = bmp_run(p, ctx100.vec([1]), ctx100.mat([[2]]),
                  B0Mode.broyden_update(), opts_for(ctx100))
    assert rec.trace[1].u == ctx100.vec(["0.5"])


def test_bmp_first_two_steps_are_newton_steps(ctx120):
    # beta = 0 with zero noise: the Newton-like step and B_0 = F'(u0) both
    # reproduce exact Newton steps
    p = get_problem("example1")
    u_hat = ctx120.vec(["0.003", "-0.002"])
    rec_bmp = bmp_run(p, u_hat, p.jac(u_hat), B0Mode.jacobian_at_u0(),
                      opts_for(ctx120, tol=80, max_iter=400))
    rec_newton = newton_run(p, u_hat, opts_for(ctx120, tol=80, max_iter=3))
    for k in (1, 2):
        assert rec_bmp.trace[k].u == rec_newton.trace[k].u


def test_bmp_exact_root_start_short_circuits(ctx100):
    p = get_problem("example1")
    rec = bmp_run(p, ctx100.zero_vec(2), ctx100.identity(2),
                  B0Mode.jacobian_at_u0(), opts_for(ctx100))
    assert rec.status is Status.EXACT_ROOT
    assert rec.kbar == 0
    assert rec.trace[0].s is None


def test_bmp_singular_bhat_reports_status(ctx100):
    p = get_problem("example1")
    rec = bmp_run(p, ctx100.vec(["0.01", "0.01"]), ctx100.mat([[1, 1], [1, 1]]),
                  B0Mode.jacobian_at_u0(), opts_for(ctx100))
    assert rec.status is Status.SINGULAR_MATRIX
    assert rec.kbar == 0


def test_bmp_tail_equals_plain_broyden(ctx120):
    p = get_problem("example1")
    u_hat = ctx120.vec(["0.004", "0.006"])
    opts = opts_for(ctx120, tol=80, max_iter=500)
    rec_bmp = bmp_run(p, u_hat, p.jac(u_hat), B0Mode.jacobian_at_u0(), opts)
    u0 = rec_bmp.trace[1].u
    rec_bm = broyden_run(p, u0, p.jac(u0), opts)
    assert rec_bm.status == rec_bmp.status
    assert rec_bm.kbar == rec_bmp.kbar - 1
    for k in range(rec_bm.kbar + 1):
        assert rec_bm.trace[k].u == rec_bmp.trace[k + 1].u
        assert rec_bm.trace[k].eps == rec_bmp.trace[k + 1].eps


def test_bmp_broyden_update_mode_satisfies_identity_from_start(ctx120):
    p = get_problem("example3")
    u_hat = ctx120.vec(["0.05", "-0.03", "0.02"])
    opts = opts_for(ctx120, tol=60, max_iter=400, record_full_matrices=True)
    rec = bmp_run(p, u_hat, p.jac(u_hat), B0Mode.broyden_update(), opts)
    assert rec.status is Status.CONVERGED
    assert rec.broyden_updates_from == 0
    errors = update_norm_identity_errors(rec)
    assert errors[0][0] == 0
    bound = ctx120.pow10(-ctx120.decimal_digits + 25)
    assert all(rel <= bound for _, rel in errors)


def test_update_norm_identity_invariant(ctx120):
    # |eps_k - ||B_{k+1} - B_k||| <= 10**(-digits+25) * eps_k on a real run
    p = get_problem("example1")
    u_hat = ctx120.vec(["0.008", "0.005"])
    opts = opts_for(ctx120, tol=80, max_iter=500, record_full_matrices=True)
    rec = bmp_run(p, u_hat, p.jac(u_hat), B0Mode.jacobian_at_u0(), opts)
    assert rec.status is Status.CONVERGED
    errors = update_norm_identity_errors(rec)
    assert errors, "no updates recorded"
    bound = ctx120.pow10(-ctx120.decimal_digits + 25)
    assert all(rel <= bound for _, rel in errors)


def test_secant_condition_after_every_update(ctx120):
    p = get_problem("example1")
    u_hat = ctx120.vec(["0.007", "-0.004"])
    opts = opts_for(ctx120, tol=60, max_iter=400, record_full_matrices=True)
    rec = bmp_run(p, u_hat, p.jac(u_hat), B0Mode.jacobian_at_u0(), opts)
    tol_fac = ctx120.pow10(-ctx120.decimal_digits + 20)
    from broydenlab.linalg import spectral_norm
    for k in range(1, rec.kbar):
        entry, nxt = rec.trace[k], rec.trace[k + 1]
        s = entry.s
        y = p.f(nxt.u) - p.f(entry.u)
        lhs = (nxt.b.matvec(s) - y).norm()
        bound = tol_fac * (y.norm() + spectral_norm(nxt.b) * s.norm())
        assert lhs <= bound


def test_trace_satisfies_record_contract(ctx120):
    # eps_k = ||F(u^{k+1})|| / ||s^k|| for 0 <= k < kbar; s and eps absent
    # at kbar; trace length kbar + 1; converged means tolerance met
    p = get_problem("example1")
    u_hat = ctx120.vec(["0.006", "0.003"])
    opts = opts_for(ctx120, tol=70, max_iter=500)
    rec = bmp_run(p, u_hat, p.jac(u_hat), B0Mode.jacobian_at_u0(), opts)
    assert rec.status is Status.CONVERGED
    assert len(rec.trace) == rec.kbar + 1
    slack = ctx120.pow10(-ctx120.decimal_digits + 10)
    for k in range(rec.kbar):
        entry, nxt = rec.trace[k], rec.trace[k + 1]
        # u^{k+1} = u^k + s^k up to one rounding of the sum
        drift = (nxt.u - entry.u - entry.s).norm()
        assert drift <= slack * max(ctx120.one, entry.u.norm())
        assert entry.eps == nxt.f_norm / entry.s.norm()
    assert rec.trace[rec.kbar].s is None and rec.trace[rec.kbar].eps is None
    assert rec.final_f_norm() <= ctx120.pow10(-opts.tol_exponent)


def test_determinism_bit_identical_traces(ctx120):
    p = get_problem("example2")
    u_hat = ctx120.vec(["0.01", "-0.02", "0.03"])
    opts = opts_for(ctx120, tol=60, max_iter=400)
    rec1 = bmp_run(p, u_hat, p.jac(u_hat), B0Mode.jacobian_at_u0(), opts)
    rec2 = bmp_run(p, u_hat, p.jac(u_hat), B0Mode.jacobian_at_u0(), opts)
    assert rec1.status == rec2.status and rec1.kbar == rec2.kbar
    for e1, e2 in zip(rec1.trace, rec2.trace):
        assert e1.u == e2.u and e1.f_norm == e2.f_norm and e1.eps == e2.eps
    assert rec1.b_final == rec2.b_final


def test_divergence_guard(ctx100):
    # iterate norm beyond the guard aborts before any solve is attempted
    p = get_problem("example1")
    rec = broyden_run(p, ctx100.vec(["1e11", 0]), ctx100.identity(2),
                      opts_for(ctx100, max_iter=1000))
    assert rec.status is Status.DIVERGED
    assert rec.kbar == 0

    # custom guard value trips once the halving iteration wanders above it
    p2 = get_problem("monomial:2")
    rec2 = broyden_run(p2, ctx100.vec([3]), ctx100.mat([["0.125"]]),
                       opts_for(ctx100, max_iter=50,
                                divergence_guard=20))
    assert rec2.status is Status.DIVERGED


def test_max_iter_status(ctx100):
    p = get_problem("example1")
    u_hat = ctx100.vec(["0.01", "0.02"])
    rec = bmp_run(p, u_hat, p.jac(u_hat), B0Mode.jacobian_at_u0(),
                  opts_for(ctx100, tol=60, max_iter=5))
    assert rec.status is Status.MAX_ITER
    assert rec.kbar == 5
    assert len(rec.trace) == 6


def test_b0_mode_given(ctx100):
    p = problem_sq_minus_1()
    given = ctx100.mat([[3]])
    rec = bmp_run(p, ctx100.vec([3]), ctx100.mat([[6]]), B0Mode.given(given),
                  opts_for(ctx100))
    # Newton-like step: 3 - 8/6 = 5/3; then B_0 = 3 applies
    assert rec.trace[1].u[0] == ctx100.real(3) - ctx100.real(8) / 6
    s1 = rec.trace[1].s
    expected = -p.f(rec.trace[1].u)[0] / 3
    assert s1[0] == expected


def test_newton_linear_single_step(ctx100):
    p = problem_linear([[3, 0], [1, 2]], [6, 5], [2, "1.5"])
    rec = newton_run(p, ctx100.vec([9, 9]), opts_for(ctx100))
    assert rec.status is Status.EXACT_ROOT
    assert rec.kbar == 1


def test_newton_halving_on_double_root(ctx100):
    # F(u) = u^2 from u0 = 1: iterates 2^-k exactly
    p = get_problem("monomial:2")
    rec = newton_run(p, ctx100.vec([1]), opts_for(ctx100, tol=60, max_iter=150))
    for k in (1, 5, 10):
        assert rec.trace[k].u[0] == ctx100.real(1) / (2 ** k)


def test_newton_quadratic_residual_decay_on_regular_problem():
    # quadratic convergence overshoots the tolerance by roughly squaring the
    # residual, so the precision needs ample headroom below 10**-tol
    ctx = PrecisionContext(250)
    p = get_problem("example4")
    rec = newton_run(p, ctx.vec(["0.05", "-0.04", "0.03"]),
                     opts_for(ctx, tol=60, max_iter=60))
    assert rec.status is Status.CONVERGED
    norms = [e.f_norm for e in rec.trace]
    for k in range(rec.kbar - 4, rec.kbar):
        assert norms[k] <= 100 * norms[k - 1] * norms[k - 1]


def test_smp_exact_root_start(ctx100):
    p = get_problem("example1")
    rec = smp_run(p, ctx100.zero_vec(2), ctx100.identity(2), 1, "0.5",
                  opts_for(ctx100))
    assert rec.status is Status.EXACT_ROOT
    assert rec.kbar == 0


def test_smp_parameter_validation(ctx100):
    p = get_problem("example1")
    u = ctx100.vec(["0.001", "0.001"])
    with pytest.raises(ValueError):
        smp_run(p, u, p.jac(u), 0, "0.5", opts_for(ctx100))
    with pytest.raises(ValueError):
        smp_run(p, u, p.jac(u), 1, "0.7", opts_for(ctx100))   # >= (sqrt5-1)/2
    with pytest.raises(ValueError):
        smp_run(p, u, p.jac(u), 1, 0, opts_for(ctx100))


def test_smp_zero_simplified_step_keeps_newton_iterate(ctx100):
    # when F(y) = 0 exactly the correction vanishes regardless of C and alpha:
    # use a map that is cubic except for an exact zero planted at the Newton
    # iterate the third SMP cycle produces
    base = get_problem("monomial:3")
    ctx = ctx100
    u_hat = ctx.vec([1])
    # replay: k=0 solves B_hat, k=1 newton, k=2 computes y from u
    b_hat = base.jac(u_hat)
    rec_plain = smp_run(base, u_hat, b_hat, 1, "0.5",
                        opts_for(ctx, tol=60, max_iter=4))
    u2 = rec_plain.trace[2].u
    y_target = u2[0] - base.f(u2)[0] / base.jac(u2).rows[0][0]

    def f(u):
        if u.entries[0] == y_target:
            return Vec((u.ctx.zero,), u.ctx)
        return base.f(u)

    doctored = Problem(name="doctored", n=1, f=f, jac=base.jac,
                       root_entries=(0,), has_a2=False, phi_entries=None,
                       psi_entries=None, singularity_order=2)
    rec = smp_run(doctored, u_hat, b_hat, 5, "0.25", opts_for(ctx, tol=60))
    assert rec.trace[3].u[0] == y_target
    assert rec.status is Status.EXACT_ROOT


def test_smp_singular_jacobian_reports_status(ctx100):
    # 1.5 u1 + 2 u2 = 0 makes F' of example1 exactly singular
    p = get_problem("example1")
    u_hat = ctx100.vec(["0.25", "-0.1875"])
    rec = smp_run(p, u_hat, p.jac(u_hat), 1, "0.5", opts_for(ctx100))
    assert rec.status is Status.SINGULAR_MATRIX


def test_smp_trace_has_no_matrix_data(ctx100):
    p = get_problem("example1")
    u_hat = ctx100.vec(["0", "0.001"])
    rec = smp_run(p, u_hat, p.jac(u_hat), 1, "0.5",
                  opts_for(ctx100, tol=60, max_iter=100))
    assert rec.status is Status.CONVERGED
    assert all(e.eps is None and e.e_svals is None for e in rec.trace)
    assert rec.b_final is None and rec.broyden_updates_from is None
