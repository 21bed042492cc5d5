"""Seeded single-run and cumulative-run experiment driver.

A cumulative run launches ``m`` independent single runs of the
Newton-step-then-Broyden solver with random starting data

    u_hat uniform in [-alpha, alpha]^n,
    B_hat = F'(u_hat) + beta ||F'(u_hat)||_2 R_hat,

filters out runs that fail to converge to the known root or whose final
q-factors leave the expected band, and aggregates window extrema of the
diagnostics over the accepted set.  The per-run window is

    K = {k0, ..., kbar},   k0 = max(1, min(kbar - 25, floor(0.75 kbar))).

Randomness comes from a counter-based SHA-256 stream keyed by
(seed, run index), so any run can be reproduced in isolation and the whole
experiment gives bit-identical results for any worker count.
"""
from __future__ import annotations

import concurrent.futures
import hashlib
import struct
from dataclasses import dataclass
from typing import Optional

from .diagnostics import metrics_from_trace
from .linalg import Mat, PrecisionContext, Vec, spectral_norm
from .problems import Problem, get_problem
from .solvers import (B0Mode, RunRecord, SolverOptions, Status, SUCCESS,
                      bmp_run)


class EmptyAcceptedSet(Exception):
    """Every single run of a cumulative run was removed."""

    def __init__(self, removed: int, reasons: dict):
        super().__init__(f"all {removed} runs removed: {reasons}")
        self.removed = removed
        self.reasons = reasons


_MASK64 = (1 << 64) - 1
_TWO128 = 1 << 128


class CounterRng:
    """Counter-based random bit stream, splittable by (seed, stream).

    Each draw hashes (seed, stream, counter) with SHA-256 and keeps 128 bits,
    so streams for different run indices are independent and a run can be
    regenerated without replaying its predecessors.
    """

    def __init__(self, seed: int, stream: int = 0):
        self._key = struct.pack("<QQ", seed & _MASK64, stream & _MASK64)
        self._counter = 0

    def bits(self) -> int:
        """Next 128 random bits as an integer."""
        digest = hashlib.sha256(self._key + struct.pack("<Q", self._counter)).digest()
        self._counter += 1
        return int.from_bytes(digest[:16], "big")

    def uniform_unit(self, ctx: PrecisionContext):
        """Uniform scalar in [0, 1) with 128 random bits."""
        return ctx.from_bits(self.bits()) / _TWO128

    def uniform_symmetric(self, ctx: PrecisionContext, scale):
        """Uniform scalar in [-scale, scale)."""
        return ctx.real(scale) * (2 * self.uniform_unit(ctx) - 1)


@dataclass(frozen=True)
class SeriesConfig:
    """Configuration of one cumulative run (all m single runs)."""

    problem: str
    alpha: str
    beta: str
    b0_mode: str = "jacobian"           # "jacobian" or "broyden-update"
    m: int = 200
    tol_exponent: int = 100
    precision: int = 320
    max_iter: int = 500
    rng_seed: int = 0
    window_rule: str = "min"            # "min" as printed, "max" alternative

    def __post_init__(self):
        object.__setattr__(self, "alpha", str(self.alpha))
        object.__setattr__(self, "beta", str(self.beta))
        if float(self.alpha) <= 0:
            raise ValueError("alpha must be positive")
        if float(self.beta) < 0:
            raise ValueError("beta must be nonnegative")
        if self.b0_mode not in ("jacobian", "broyden-update"):
            raise ValueError(f"unknown b0_mode {self.b0_mode!r}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.window_rule not in ("min", "max"):
            raise ValueError(f"unknown window_rule {self.window_rule!r}")

    @classmethod
    def from_mapping(cls, data: dict) -> "SeriesConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class AcceptanceCriteria:
    """Filter applied to each single run before aggregation.

    A run is accepted when it converged, its final iterate is within
    ``u_cap`` of the root, and the final q-factors lie inside the closed
    bands (when bands are given).
    """

    u_cap: str = "1e-10"
    q_band: Optional[tuple] = None
    big_q_band: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "u_cap", str(self.u_cap))
        for name in ("q_band", "big_q_band"):
            band = getattr(self, name)
            if band is not None:
                lo, hi = band
                if float(str(lo)) > float(str(hi)):
                    raise ValueError(f"{name} is empty: {band}")
                object.__setattr__(self, name, (str(lo), str(hi)))


def default_criteria(problem_name: str) -> AcceptanceCriteria:
    """Per-problem acceptance bands for the final q-factors."""
    if problem_name in ("example1", "example2"):
        return AcceptanceCriteria(q_band=("0.616", "0.620"),
                                  big_q_band=("0.616", "0.620"))
    if problem_name == "example3":
        return AcceptanceCriteria(q_band=("0.753", "0.757"),
                                  big_q_band=("0.568", "0.572"))
    return AcceptanceCriteria()


@dataclass(frozen=True)
class Window:
    """Final-window indices K = {k0, ..., kbar} of one single run."""

    k0: int
    kbar: int

    @classmethod
    def from_kbar(cls, kbar: int, rule: str = "min") -> "Window":
        quarter = (3 * kbar) // 4
        k0 = min(kbar - 25, quarter) if rule == "min" else max(kbar - 25, quarter)
        return cls(k0=max(1, k0), kbar=kbar)

    @property
    def indices(self) -> range:
        return range(self.k0, self.kbar + 1)


def init_random(p: Problem, alpha, beta, rng: CounterRng,
                ctx: PrecisionContext):
    """Random starting data (u_hat, B_hat, noise matrix for B_0).

    Draw order is fixed (u_hat entries, B_hat noise, B_0 noise, row-major)
    so a (seed, run index) pair always reproduces the same data.
    """
    alpha = ctx.real(alpha)
    beta = ctx.real(beta)
    n = p.n
    u_hat = Vec(tuple(rng.uniform_symmetric(ctx, alpha) for _ in range(n)), ctx)
    r_hat = ctx.mat([[rng.uniform_symmetric(ctx, 1) for _ in range(n)]
                     for _ in range(n)])
    noise = ctx.mat([[rng.uniform_symmetric(ctx, 1) for _ in range(n)]
                     for _ in range(n)])
    jac = p.jac(u_hat)
    if beta == 0:
        b_hat = jac
    else:
        scale = beta * spectral_norm(jac, ctx)
        b_hat = jac + Mat(tuple(tuple(scale * x for x in row)
                                for row in r_hat.rows), ctx)
    return u_hat, b_hat, noise


def run_single(cfg: SeriesConfig, run_index: int):
    """One seeded single run of the configured series.

    Returns the solver record together with its metrics rows.
    """
    ctx = PrecisionContext(cfg.precision)
    p = get_problem(cfg.problem)
    rng = CounterRng(cfg.rng_seed, run_index)
    u_hat, b_hat, noise = init_random(p, cfg.alpha, cfg.beta, rng, ctx)
    if cfg.b0_mode == "jacobian":
        mode = B0Mode.jacobian_at_u0(beta=cfg.beta, noise=noise)
    else:
        mode = B0Mode.broyden_update()
    opts = SolverOptions(precision=ctx, tol_exponent=cfg.tol_exponent,
                         max_iter=cfg.max_iter)
    rec = bmp_run(p, u_hat, b_hat, mode, opts,
                  seed_info={"problem": cfg.problem, "alpha": cfg.alpha,
                             "beta": cfg.beta, "seed": cfg.rng_seed,
                             "run_index": run_index})
    rows = metrics_from_trace(rec, p)
    return rec, rows


def removal_reason(rec: RunRecord, rows: list, crit: AcceptanceCriteria) -> Optional[str]:
    """None when the run is accepted, otherwise the removal category."""
    ctx = rec.trace[0].u.ctx
    if rec.status is Status.MAX_ITER:
        return "timeout"
    if rec.status not in SUCCESS:
        return "no-convergence"
    if rec.kbar < 2:
        return "degenerate"
    final = rows[rec.kbar]
    if final.err > ctx.real(crit.u_cap):
        return "u-cap"
    for band, value in ((crit.q_band, final.q), (crit.big_q_band, final.q_eps)):
        if band is None:
            continue
        lo, hi = ctx.real(band[0]), ctx.real(band[1])
        if value == -1 or not (lo <= value <= hi):
            return "band"
    return None


@dataclass
class RunStats:
    """Window extrema of one accepted run (None where nothing was defined)."""

    kbar: int
    f_final: object
    u_final: object
    r_min: object = None
    r_max: object = None
    q_min: object = None
    q_max: object = None
    r_eps_min: object = None
    r_eps_max: object = None
    q_eps_min: object = None
    q_eps_max: object = None
    delta_min: object = None
    delta_max: object = None
    zeta_max: object = None
    lambda1_final: object = None
    lambda2_final: object = None
    e_norm_min: object = None

    _FIELDS = ("f_final", "u_final", "r_min", "r_max", "q_min", "q_max",
               "r_eps_min", "r_eps_max", "q_eps_min", "q_eps_max",
               "delta_min", "delta_max", "zeta_max", "lambda1_final",
               "lambda2_final", "e_norm_min")

    def to_wire(self):
        """Exact transport form (mpf -> mantissa/exponent tuples)."""
        def enc(x):
            return None if x is None else x._mpf_
        return (self.kbar,) + tuple(enc(getattr(self, f)) for f in self._FIELDS)

    @classmethod
    def from_wire(cls, wire, ctx: PrecisionContext) -> "RunStats":
        def dec(t):
            return None if t is None else ctx.make(t)
        values = dict(zip(cls._FIELDS, (dec(t) for t in wire[1:])))
        return cls(kbar=wire[0], **values)


def run_stats(rec: RunRecord, rows: list, window_rule: str = "min") -> RunStats:
    """Window extrema of the diagnostics of one run, sentinels skipped."""
    window = Window.from_kbar(rec.kbar, window_rule)
    final = rows[rec.kbar]
    stats = RunStats(kbar=rec.kbar, f_final=final.f_norm, u_final=final.err)

    def scan(attr):
        lo = hi = None
        for k in window.indices:
            v = getattr(rows[k], attr)
            if v == -1:
                continue
            if lo is None or v < lo:
                lo = v
            if hi is None or v > hi:
                hi = v
        return lo, hi

    stats.r_min, stats.r_max = scan("r")
    stats.q_min, stats.q_max = scan("q")
    stats.r_eps_min, stats.r_eps_max = scan("r_eps")
    stats.q_eps_min, stats.q_eps_max = scan("q_eps")
    stats.delta_min, stats.delta_max = scan("delta")
    _, stats.zeta_max = scan("zeta")
    stats.e_norm_min, _ = scan("e_norm")
    if final.e_svals is not None:
        stats.lambda1_final = final.e_svals[0]
        if len(final.e_svals) > 1:
            stats.lambda2_final = final.e_svals[1]
    return stats


@dataclass
class CumulativeSummary:
    """Aggregates over the accepted runs of one cumulative run.

    Minus/plus pairs are min/max over the accepted runs of the per-run window
    extrema (zeta uses the window maximum inside both).  ``lambda1`` is the
    largest final smallest singular value of E, ``e_norm_min`` the smallest
    windowed ||E_k||.  Fields with no defined contribution are -1.
    """

    accepted: int
    removed: int
    removal_reasons: dict
    f_min: object
    f_max: object
    u_min: object
    u_max: object
    r_min: object
    r_max: object
    q_min: object
    q_max: object
    r_eps_min: object
    r_eps_max: object
    q_eps_min: object
    q_eps_max: object
    delta_min: object
    delta_max: object
    zeta_min: object
    zeta_max: object
    lambda1: object
    lambda2_min: object
    lambda2_max: object
    e_norm_min: object
    it_min: int
    it_max: int


def _reduce_stats(all_stats: list, ctx: PrecisionContext, removed: int,
                  reasons: dict) -> CumulativeSummary:
    if not all_stats:
        raise EmptyAcceptedSet(removed, reasons)
    sentinel = ctx.real(-1)

    def fold(attr, which):
        values = [getattr(s, attr) for s in all_stats if getattr(s, attr) is not None]
        if not values:
            return sentinel
        return min(values) if which == "min" else max(values)

    return CumulativeSummary(
        accepted=len(all_stats), removed=removed, removal_reasons=dict(reasons),
        f_min=fold("f_final", "min"), f_max=fold("f_final", "max"),
        u_min=fold("u_final", "min"), u_max=fold("u_final", "max"),
        r_min=fold("r_min", "min"), r_max=fold("r_max", "max"),
        q_min=fold("q_min", "min"), q_max=fold("q_max", "max"),
        r_eps_min=fold("r_eps_min", "min"), r_eps_max=fold("r_eps_max", "max"),
        q_eps_min=fold("q_eps_min", "min"), q_eps_max=fold("q_eps_max", "max"),
        delta_min=fold("delta_min", "min"), delta_max=fold("delta_max", "max"),
        zeta_min=fold("zeta_max", "min"), zeta_max=fold("zeta_max", "max"),
        lambda1=fold("lambda1_final", "max"),
        lambda2_min=fold("lambda2_final", "min"),
        lambda2_max=fold("lambda2_final", "max"),
        e_norm_min=fold("e_norm_min", "min"),
        it_min=min(s.kbar for s in all_stats),
        it_max=max(s.kbar for s in all_stats))


def aggregate(accepted: list, removed: int = 0,
              removal_reasons: Optional[dict] = None,
              window_rule: str = "min") -> CumulativeSummary:
    """Aggregate a list of accepted (RunRecord, metrics rows) pairs."""
    if not accepted:
        raise EmptyAcceptedSet(removed, dict(removal_reasons or {}))
    ctx = accepted[0][0].trace[0].u.ctx
    stats = [run_stats(rec, rows, window_rule) for rec, rows in accepted]
    return _reduce_stats(stats, ctx, removed, dict(removal_reasons or {}))


def _worker_stats(cfg: SeriesConfig, crit: AcceptanceCriteria, run_index: int):
    rec, rows = run_single(cfg, run_index)
    reason = removal_reason(rec, rows, crit)
    if reason is not None:
        return run_index, reason, None
    return run_index, None, run_stats(rec, rows, cfg.window_rule).to_wire()


def cumulative_run(cfg: SeriesConfig, crit: Optional[AcceptanceCriteria] = None,
                   workers: int = 1) -> CumulativeSummary:
    """Run the m single runs of ``cfg``, filter, and aggregate.

    The reduction consumes per-run statistics in run-index order, so the
    summary is bit-identical for any ``workers`` count.  Raises
    :class:`EmptyAcceptedSet` when every run is removed.
    """
    if crit is None:
        crit = default_criteria(cfg.problem)
    ctx = PrecisionContext(cfg.precision)
    reasons: dict = {}
    stats: list = []

    def consume(result):
        _, reason, wire = result
        if reason is not None:
            reasons[reason] = reasons.get(reason, 0) + 1
        else:
            stats.append(RunStats.from_wire(wire, ctx))

    if workers <= 1:
        for j in range(cfg.m):
            consume(_worker_stats(cfg, crit, j))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_worker_stats, cfg, crit, j)
                       for j in range(cfg.m)]
            results = [f.result() for f in futures]
        for result in sorted(results, key=lambda r: r[0]):
            consume(result)

    removed = sum(reasons.values())
    return _reduce_stats(stats, ctx, removed, reasons)
