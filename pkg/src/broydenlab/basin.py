"""Raster rendering of the empirical domain of q-linear convergence.

Each pixel of a square grid around the root is used as the starting point
u_hat of a Newton-step-then-Broyden run with B_hat = F'(u_hat) and
B_0 = F'(u_0) (the beta = 0 series), then classified:

    blue    (0,0,255)    converged to the root with final q-factors in band
    purple  (128,0,128)  converged to the root but outside a band
    yellow  (255,255,0)  no convergence within the iteration cap, including
                         breakdown on a singular Jacobian

The image is emitted as binary PPM (P6), one pixel per grid point, rows from
the top (largest second coordinate) down.  Classification is a pure function
of the grid point, so renders are byte-identical for any worker count.
"""
from __future__ import annotations

import concurrent.futures
import enum
from dataclasses import dataclass

from .formatting import format_metric
from .harness import AcceptanceCriteria
from .linalg import PrecisionContext, Vec
from .problems import Problem, get_problem
from .solvers import B0Mode, SolverOptions, SUCCESS, bmp_run


class DimensionMismatch(Exception):
    """Basin rendering needs a two-dimensional problem."""


class Classification(enum.Enum):
    IN_BAND = "in-band"
    OUT_OF_BAND = "out-of-band"
    NO_CONVERGENCE = "no-convergence"


COLORS = {
    Classification.IN_BAND: (0, 0, 255),
    Classification.OUT_OF_BAND: (128, 0, 128),
    Classification.NO_CONVERGENCE: (255, 255, 0),
}


@dataclass(frozen=True)
class GridSpec:
    """Square pixel grid: point (i, j) sits at
    center + half_width * (2i/(res-1) - 1, 2j/(res-1) - 1)."""

    half_width: str
    resolution: int
    center: tuple = ("0", "0")

    def __post_init__(self):
        object.__setattr__(self, "half_width", str(self.half_width))
        object.__setattr__(self, "center",
                           tuple(str(c) for c in self.center))
        if len(self.center) != 2:
            raise ValueError("center must be two-dimensional")
        if self.resolution < 3 or self.resolution % 2 == 0:
            raise ValueError("resolution must be an odd integer >= 3")

    def point(self, i: int, j: int, ctx: PrecisionContext) -> Vec:
        hw = ctx.real(self.half_width)
        denom = self.resolution - 1
        x = ctx.real(self.center[0]) + hw * (ctx.real(2 * i) / denom - 1)
        y = ctx.real(self.center[1]) + hw * (ctx.real(2 * j) / denom - 1)
        return Vec((x, y), ctx)


@dataclass
class PixelResult:
    x: object
    y: object
    classification: Classification
    kbar: int
    q_final: object


def _in_band(value, band, ctx) -> bool:
    if band is None:
        return True
    if value == -1:
        return False
    return ctx.real(band[0]) <= value <= ctx.real(band[1])


def classify_point(p: Problem, u_hat: Vec, crit: AcceptanceCriteria,
                   opts: SolverOptions) -> Classification:
    """Classify one starting point (see module docstring for the classes)."""
    cls, _, _ = classify_point_detail(p, u_hat, crit, opts)
    return cls


def classify_point_detail(p: Problem, u_hat: Vec, crit: AcceptanceCriteria,
                          opts: SolverOptions):
    """Classification plus (kbar, final q-factor) for the CSV table."""
    if p.n != 2:
        raise DimensionMismatch(f"{p.name} has dimension {p.n}, need 2")
    ctx = opts.precision
    sentinel = ctx.real(-1)
    root = p.root(ctx)
    if u_hat == root:
        # the root itself trivially converges
        return Classification.IN_BAND, 0, sentinel
    rec = bmp_run(p, u_hat, p.jac(u_hat), B0Mode.jacobian_at_u0(), opts)
    if rec.status not in SUCCESS:
        return Classification.NO_CONVERGENCE, rec.kbar, sentinel
    trace = rec.trace
    errs = [(trace[k].u - root).norm() for k in range(max(0, rec.kbar - 2),
                                                     rec.kbar + 1)]
    if errs[-1] > ctx.real(crit.u_cap):
        # converged, but not to the root under study
        return Classification.NO_CONVERGENCE, rec.kbar, sentinel
    q_final = sentinel
    if len(errs) >= 2 and errs[-2] > 0:
        q_final = errs[-1] / errs[-2]
    big_q_final = sentinel
    if rec.kbar >= 2:
        eps_prev = trace[rec.kbar - 1].eps
        eps_prev2 = trace[rec.kbar - 2].eps
        if eps_prev is not None and eps_prev2 is not None and eps_prev2 > 0:
            big_q_final = eps_prev / eps_prev2
    if _in_band(q_final, crit.q_band, ctx) and _in_band(big_q_final,
                                                        crit.big_q_band, ctx):
        return Classification.IN_BAND, rec.kbar, q_final
    return Classification.OUT_OF_BAND, rec.kbar, q_final


def _pixel_options(digits: int, tol_exponent: int, max_iter: int) -> SolverOptions:
    return SolverOptions(precision=PrecisionContext(digits),
                         tol_exponent=tol_exponent, max_iter=max_iter,
                         record_spectra=False)


def _classify_chunk(problem_name: str, grid: GridSpec, crit: AcceptanceCriteria,
                    digits: int, tol_exponent: int, max_iter: int, pixels):
    p = get_problem(problem_name)
    opts = _pixel_options(digits, tol_exponent, max_iter)
    ctx = opts.precision
    out = []
    for i, j in pixels:
        u_hat = grid.point(i, j, ctx)
        cls, kbar, q_final = classify_point_detail(p, u_hat, crit, opts)
        out.append((i, j, cls.value, kbar,
                    format_metric(q_final),
                    format_metric(u_hat[0]), format_metric(u_hat[1])))
    return out


def render_basin(p: Problem, grid: GridSpec, crit: AcceptanceCriteria,
                 opts: SolverOptions, workers: int = 1):
    """Render the grid; returns (PPM bytes, list of PixelResult).

    Pixels are evaluated independently and assembled in raster order (top
    row first), so the byte output does not depend on ``workers``.
    """
    res = grid.resolution
    pixels = [(i, j) for j in range(res - 1, -1, -1) for i in range(res)]
    digits = opts.precision.decimal_digits
    if workers <= 1:
        raw = _classify_chunk(p.name, grid, crit, digits, opts.tol_exponent,
                              opts.max_iter, pixels)
    else:
        chunks = [pixels[c::workers] for c in range(workers)]
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_classify_chunk, p.name, grid, crit, digits,
                                   opts.tol_exponent, opts.max_iter, chunk)
                       for chunk in chunks]
            parts = [f.result() for f in futures]
        by_pixel = {}
        for part in parts:
            for item in part:
                by_pixel[(item[0], item[1])] = item
        raw = [by_pixel[pix] for pix in pixels]

    header = f"P6\n{res} {res}\n255\n".encode("ascii")
    body = bytearray()
    results = []
    for i, j, cls_value, kbar, q_str, x_str, y_str in raw:
        cls = Classification(cls_value)
        body.extend(COLORS[cls])
        results.append(PixelResult(x=x_str, y=y_str, classification=cls,
                                   kbar=kbar, q_final=q_str))
    return header + bytes(body), results


def csv_lines(results) -> list[str]:
    """CSV rows (with header) for a pixel table, in raster order."""
    lines = ["x,y,class,kbar,q_final"]
    for r in results:
        lines.append(f"{r.x},{r.y},{r.classification.value},{r.kbar},{r.q_final}")
    return lines


def blue_fraction(results) -> float:
    """Fraction of in-band pixels, the empirical density proxy."""
    blue = sum(1 for r in results if r.classification is Classification.IN_BAND)
    return blue / len(results)
