"""Invariance certificates, full-grid scans, and loss-point classification.

The certificate route bounds the growth of rho = (psi1^2 + psi2^2)/2 from
x = 0 data: with C_a bounding |trace A|, C_d bounding |d'/d|, delta bounding
|d(omega2)/dx / d| and C = 2 C_d + max(2 C_a, 1) + 1, positivity of

    margin = rho(0) - delta^2 / (2C) * (exp(C) - 1)

guarantees rho > 0 on the whole rectangle.  The scan route simply evaluates
rho on the full grid; wherever it vanishes, the local spectral-curve branch
structure determines the contribution 2 (i_plus - i_minus) to the boundary
index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import _kernels
from .errors import InvalidInputError, NeedsFinerGridError
from .maslovbox import SpectralProblem, psi_point
from .propagation import integrate_frame

RHO_ZERO_TOL = 1e-9


@dataclass
class InvarianceReport:
    n: int
    m: int
    C_a: float
    C_A: float
    c_g: float
    c_h: float
    C_g: float
    C_h: float
    C_d: float
    delta: float
    C: float
    rho0: float
    margin: float
    certified: bool
    cg_mode: str  # "exact" (m = 1) or "measured" (grid minimum)
    delta_mode: str  # "hadamard" or "grid-fd"
    C_g_measured: Optional[float] = None

    def to_dict(self) -> dict:
        out = {
            "n": self.n, "m": self.m,
            "C_a": self.C_a, "C_A": self.C_A,
            "c_g": self.c_g, "c_h": self.c_h,
            "C_g": self.C_g, "C_h": self.C_h, "C_d": self.C_d,
            "delta": self.delta, "C": self.C,
            "rho0": self.rho0,
            "margin": self.margin if math.isfinite(self.margin) else None,
            "certified": self.certified,
            "cg_mode": self.cg_mode, "delta_mode": self.delta_mode,
        }
        if self.C_g_measured is not None:
            out["C_g_measured"] = self.C_g_measured
        return out


@dataclass
class LossPoint:
    x_star: float
    lambda_star: float
    rho: float
    i_minus: Optional[int] = None
    i_plus: Optional[int] = None
    local_m: Optional[int] = None
    flagged: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star, "lambda_star": self.lambda_star,
            "rho": self.rho, "i_minus": self.i_minus, "i_plus": self.i_plus,
            "local_m": self.local_m, "flagged": self.flagged, "note": self.note,
        }


@dataclass
class ScanResult:
    min_rho: float
    argmin_x: float
    argmin_lambda: float
    loss_points: List[LossPoint]
    lam_axis: np.ndarray
    x_axis: np.ndarray
    rho: np.ndarray  # (len(lam_axis), len(x_axis))
    psi1: np.ndarray

    def to_dict(self) -> dict:
        return {
            "min_rho": self.min_rho,
            "argmin_x": self.argmin_x,
            "argmin_lambda": self.argmin_lambda,
            "loss_points": [p.to_dict() for p in self.loss_points],
        }


# ---------------------------------------------------------------------------
# helpers shared by the certificate and the scan
# ---------------------------------------------------------------------------


def _batched_A(field, xs, lam):
    if field.is_affine:
        if field.base_table is not None:
            base = field.base_table(np.asarray(xs, dtype=float))
        else:
            base = np.array([field.base_eval(float(x)) for x in xs])
        return base + lam * field.lambda_mat
    return np.array([field.evaluate(float(x), lam) for x in xs])


def gram_log_derivatives(field, frames, xs, lam):
    """Per-node d/dx log of the Gram volume: 0.5 tr(Gram^-1 Gram')."""
    A = _batched_A(field, xs, lam)
    Fdot = A @ frames
    gram = np.swapaxes(frames, 1, 2) @ frames
    gram_dot = np.swapaxes(Fdot, 1, 2) @ frames + np.swapaxes(frames, 1, 2) @ Fdot
    sol = np.linalg.solve(gram, gram_dot)
    return 0.5 * np.trace(sol, axis1=1, axis2=2)


def _column_volume_ratio(frames):
    """Gram volume over the product of column norms, per node."""
    gram = np.swapaxes(frames, 1, 2) @ frames
    vol = np.sqrt(np.linalg.det(gram))
    norms = np.sqrt(np.sum(frames * frames, axis=1))
    return vol / np.prod(norms, axis=1)


def _spectral_norm_max(field, xs, lams):
    best = 0.0
    for lam in lams:
        A = _batched_A(field, xs, lam)
        s = np.linalg.svd(A, compute_uv=False)
        best = max(best, float(np.max(s[:, 0])))
    return best


def _psi_grids(problem: SpectralProblem):
    """psi1, psi2, rho over the full (lambda, x) grid (cached per problem)."""
    if "psi_grids" in problem._cache:
        return problem._cache["psi_grids"]
    frames = problem.lambda_grid_frames()
    hp = problem.h_path()
    AT = problem.a_tilde()
    L, S1 = frames.shape[0], frames.shape[1]
    psi1 = np.empty((L, S1))
    psi2 = np.empty((L, S1))
    H = np.ascontiguousarray(hp.frames)
    for li in range(L):
        w1, w2, d = _kernels.omega_tables(
            np.ascontiguousarray(frames[li]), H, AT.block_g, AT.block_h
        )
        psi1[li] = w1 / d
        psi2[li] = w2 / d
    rho = 0.5 * (psi1 ** 2 + psi2 ** 2)
    problem._cache["psi_grids"] = (psi1, psi2, rho)
    return psi1, psi2, rho


def delta_bound_higher_order(problem: SpectralProblem, c_g: float, c_h: float) -> float:
    """Hadamard bound on |d(omega2)/dx / d| for companion-form scalar operators.

    (lambda2 - lambda1) / (c_g c_h) * max_x (kappa_{n-1}/alpha_n(x) + 1/kappa_2).
    """
    meta = problem.field.meta
    if "kappas" not in meta or "alpha_n" not in meta:
        raise InvalidInputError("problem does not carry higher-order structure")
    kappas = meta["kappas"]
    alpha_n = meta["alpha_n"]
    n = problem.field.n
    kappa2 = float(kappas[0])
    kappa_last = float(kappas[n - 3]) if n >= 3 else 1.0
    xs = problem.x_grid()
    peak = max(kappa_last / alpha_n(float(x)) + 1.0 / kappa2 for x in xs)
    return (problem.lambda2 - problem.lambda1) / (c_g * c_h) * peak


def _delta_grid_fd(problem: SpectralProblem) -> float:
    """Grid maximum of |d(omega2)/dx / d| = |d(psi2)/dx + psi2 d'/d|.

    psi2 is scale-invariant, so its centered difference is legitimate even on
    rescaled frames; the d'/d correction is evaluated analytically per node.
    """
    _, psi2, _ = _psi_grids(problem)
    frames = problem.lambda_grid_frames()
    hp = problem.h_path()
    xs = problem.x_grid()
    lams = problem.lambda_grid()
    dh_log = gram_log_derivatives(problem.field, hp.frames, xs, problem.lambda2)
    h = xs[1] - xs[0]
    best = 0.0
    for li, lam in enumerate(lams):
        dg_log = gram_log_derivatives(problem.field, frames[li], xs, lam)
        dlog = dg_log + dh_log
        fd = (psi2[li, 2:] - psi2[li, :-2]) / (2 * h)
        val = np.abs(fd + psi2[li, 1:-1] * dlog[1:-1])
        best = max(best, float(np.max(val)))
    return best


def constants_report(problem: SpectralProblem) -> InvarianceReport:
    """All certificate constants, the criterion margin, and the verdict.

    c_g is exactly 1 when the forward family is one-dimensional; otherwise it
    is measured as a grid minimum over the propagated lambda-grid paths, and
    C_g enters C_d through the bound m! C_A / c_g^2 (the measured Gram
    log-derivative maximum is kept alongside as a cross-check).
    """
    field = problem.field
    n, m = problem.n, problem.m
    xs = problem.x_grid()
    lams = problem.lambda_grid()

    trace = np.abs(np.trace(_batched_A(field, xs, problem.lambda2),
                            axis1=1, axis2=2))
    C_a = float(np.max(trace))

    if field.is_affine:
        # the operator norm of an affine-in-lambda pencil is convex in
        # lambda, so the grid maximum is attained at the interval endpoints
        C_A = _spectral_norm_max(field, xs, (problem.lambda1, problem.lambda2))
    else:
        C_A = _spectral_norm_max(field, xs, lams)

    hp = problem.h_path()
    c_h = float(np.min(_column_volume_ratio(hp.frames)))
    C_h = float(np.max(np.abs(
        gram_log_derivatives(field, hp.frames, xs, problem.lambda2)
    )))

    C_g_measured = None
    if m == 1:
        c_g = 1.0
        cg_mode = "exact"
    else:
        frames = problem.lambda_grid_frames()
        c_g = float(min(
            np.min(_column_volume_ratio(frames[li])) for li in range(len(lams))
        ))
        C_g_measured = float(max(
            np.max(np.abs(gram_log_derivatives(field, frames[li], xs, lam)))
            for li, lam in enumerate(lams)
        ))
        cg_mode = "measured"
    C_g = math.factorial(m) * C_A / c_g ** 2
    C_d = C_g + C_h

    if field.kind == "higher-order":
        delta = delta_bound_higher_order(problem, c_g, c_h)
        delta_mode = "hadamard"
    else:
        delta = _delta_grid_fd(problem)
        delta_mode = "grid-fd"

    from .multilinear import psi_rho  # local import to avoid cycle at module load

    rho0 = psi_rho(problem.P.entries, hp.frames[0], problem.a_tilde()).rho
    C = 2 * C_d + max(2 * C_a, 1.0) + 1.0
    if delta == 0.0:
        growth = 0.0
    elif C > 700.0:  # exp overflows; the certificate is hopeless anyway
        growth = math.inf
    else:
        growth = delta ** 2 / (2 * C) * (math.exp(C) - 1.0)
    margin = rho0 - growth

    return InvarianceReport(
        n=n, m=m, C_a=C_a, C_A=C_A, c_g=c_g, c_h=c_h, C_g=C_g, C_h=C_h,
        C_d=C_d, delta=delta, C=C, rho0=rho0, margin=margin,
        certified=margin > 0, cg_mode=cg_mode, delta_mode=delta_mode,
        C_g_measured=C_g_measured,
    )


def asymptotic_bc_determinants(problem: SpectralProblem) -> Tuple[float, float]:
    """The two boundary determinants whose non-vanishing underwrites the
    large-leading-coefficient invariance advisory for higher-order operators.
    """
    meta = problem.field.meta
    if "alphas" not in meta:
        raise InvalidInputError("problem does not carry higher-order structure")
    alpha0 = meta["alphas"][0]
    xs = np.linspace(0.0, 1.0, 1001)
    vals = np.array([problem.lambda2 - alpha0(float(x)) for x in xs])
    integral = float(np.trapezoid(vals, xs))
    P, Q = problem.P.entries, problem.Q.entries
    n = problem.n
    M1 = np.hstack([P, Q]).astype(float)
    M1[n - 1, problem.m:] -= integral * Q[0, :]
    M2 = np.hstack([P, Q]).astype(float)
    M2[n - 1, : problem.m] = 0.0
    M2[n - 1, problem.m:] = Q[0, :]
    return float(np.linalg.det(M1)), float(np.linalg.det(M2))


# ---------------------------------------------------------------------------
# full-grid scan and local classification
# ---------------------------------------------------------------------------


def _psi_window(problem: SpectralProblem, lam: float, x_lo: float, x_hi: float,
                nx: int):
    """psi1/psi2 on a fine x window at one lambda, chained from coarse legs."""
    field = problem.field
    AT = problem.a_tilde()
    G0 = problem.P.entries
    if x_lo > 0.0:
        steps = max(4, int(np.ceil(x_lo * problem.x_steps)))
        G0 = integrate_frame(field, G0, 0.0, x_lo, steps, lam, True).frames[-1]
    gfine = integrate_frame(field, G0, x_lo, x_hi, nx, lam, True).frames
    H1 = problem.Q.entries
    if x_hi < 1.0:
        steps = max(4, int(np.ceil((1.0 - x_hi) * problem.x_steps)))
        H1 = integrate_frame(field, H1, 1.0, x_hi, steps, problem.lambda2,
                             True).frames[0]
    hfine = integrate_frame(field, H1, x_hi, x_lo, nx, problem.lambda2,
                            True).frames
    w1, w2, d = _kernels.omega_tables(
        np.ascontiguousarray(gfine), np.ascontiguousarray(hfine),
        AT.block_g, AT.block_h,
    )
    xs = np.linspace(x_lo, x_hi, nx + 1)
    return xs, w1 / d, w2 / d


def _newton_polish(problem: SpectralProblem, x0: float, lam0: float,
                   hx: float, hl: float, iters: int = 25):
    """Drive (psi1, psi2) to zero with a finite-difference Newton iteration."""
    x, lam = x0, lam0
    for _ in range(iters):
        p1, p2, rho = psi_point(problem, x, lam)
        if rho < 1e-24:
            break
        f = np.array([p1, p2])
        j00 = (psi_point(problem, x + hx, lam)[0] - psi_point(problem, x - hx, lam)[0]) / (2 * hx)
        j10 = (psi_point(problem, x + hx, lam)[1] - psi_point(problem, x - hx, lam)[1]) / (2 * hx)
        j01 = (psi_point(problem, x, lam + hl)[0] - psi_point(problem, x, lam - hl)[0]) / (2 * hl)
        j11 = (psi_point(problem, x, lam + hl)[1] - psi_point(problem, x, lam - hl)[1]) / (2 * hl)
        J = np.array([[j00, j01], [j10, j11]])
        try:
            step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            break
        nx_, nl = x - step[0], lam - step[1]
        # keep the iterate inside the open rectangle
        nx_ = min(max(nx_, 1e-6), 1.0 - 1e-6)
        x, lam = nx_, nl
        if abs(step[0]) < 1e-13 and abs(step[1]) < 1e-12:
            break
    p1, p2, rho = psi_point(problem, x, lam)
    return x, lam, rho


def rho_grid_scan(problem: SpectralProblem, refine_rounds: int = 2,
                  candidate_tol: float = 1e-3,
                  zero_tol: float = RHO_ZERO_TOL) -> ScanResult:
    """Evaluate rho over the whole grid and hunt down interior zeros.

    Grid-local minima below candidate_tol are refined by `refine_rounds`
    rounds of 10x local grid refinement and then polished by a Newton
    iteration on (psi1, psi2); a candidate is kept as a loss point only if
    the polished rho falls below zero_tol.
    """
    psi1, psi2, rho = _psi_grids(problem)
    lams = problem.lambda_grid()
    xs = problem.x_grid()
    L, S1 = rho.shape

    flat = int(np.argmin(rho))
    li0, xi0 = divmod(flat, S1)
    min_rho = float(rho[li0, xi0])

    pad = np.pad(rho, 1, constant_values=np.inf)
    is_min = np.ones_like(rho, dtype=bool)
    for dl in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dl == 0 and dx == 0:
                continue
            is_min &= rho <= pad[1 + dl: 1 + dl + L, 1 + dx: 1 + dx + S1]
    candidates = np.argwhere(is_min & (rho < candidate_tol))

    d_lam = lams[1] - lams[0]
    d_x = xs[1] - xs[0]
    found: List[LossPoint] = []
    for li, xi in candidates:
        x_c, lam_c = float(xs[xi]), float(lams[li])
        span_x, span_l = 2 * d_x, 2 * d_lam
        for _ in range(refine_rounds):
            lo = max(x_c - span_x, 0.0)
            hi = min(x_c + span_x, 1.0)
            cols = np.linspace(lam_c - span_l, lam_c + span_l, 21)
            best = (np.inf, x_c, lam_c)
            for lam in cols:
                wxs, p1w, p2w = _psi_window(problem, float(lam), lo, hi, 40)
                rw = 0.5 * (p1w ** 2 + p2w ** 2)
                k = int(np.argmin(rw))
                if rw[k] < best[0]:
                    best = (float(rw[k]), float(wxs[k]), float(lam))
            _, x_c, lam_c = best
            span_x /= 10.0
            span_l /= 10.0
        x_c, lam_c, rho_c = _newton_polish(problem, x_c, lam_c,
                                           hx=max(span_x, 1e-7),
                                           hl=max(span_l, 1e-6))
        inside = 0.0 < x_c < 1.0 and problem.lambda1 < lam_c < problem.lambda2
        if rho_c < zero_tol and inside:
            found.append(LossPoint(x_star=x_c, lambda_star=lam_c, rho=rho_c))

    # merge duplicates that converged to the same zero
    found.sort(key=lambda p: (p.lambda_star, p.x_star))
    deduped: List[LossPoint] = []
    for p in found:
        if deduped and abs(p.lambda_star - deduped[-1].lambda_star) < 2 * d_lam \
                and abs(p.x_star - deduped[-1].x_star) < 2 * d_x:
            continue
        deduped.append(p)

    return ScanResult(
        min_rho=min_rho, argmin_x=float(xs[xi0]), argmin_lambda=float(lams[li0]),
        loss_points=deduped, lam_axis=lams, x_axis=xs, rho=rho, psi1=psi1,
    )


def _column_zeros(xs, col, tol=1e-12):
    """x locations where the sampled column changes sign."""
    out = []
    for k in range(len(col) - 1):
        a, b = col[k], col[k + 1]
        if a == 0.0:
            out.append(xs[k])
        elif (a < 0) != (b < 0):
            out.append(xs[k] - a * (xs[k + 1] - xs[k]) / (b - a))
    if col[-1] == 0.0:
        out.append(xs[-1])
    return out


def classify_loss_point(problem: SpectralProblem, point: LossPoint,
                        others: Tuple[LossPoint, ...] = (),
                        n_cols: int = 33, n_rows: int = 160,
                        max_doublings: int = 5) -> LossPoint:
    """Fill in the local branch counts and the 2 (i_plus - i_minus) index.

    Builds a box around the point, 4 coarse lambda-cells wide, doubling its
    x-height until every spectral-curve branch enters and leaves through the
    vertical sides; then i_minus counts zeros on the left side below x_star
    and i_plus zeros on the right side above x_star.
    """
    d_lam = (problem.lambda2 - problem.lambda1) / problem.lambda_steps
    d_x = 1.0 / problem.x_steps
    w = 2 * d_lam
    h = 2 * d_x
    x_s, lam_s = point.x_star, point.lambda_star
    edge_tol = 1e-9

    psi_cols = None
    window_xs = None
    clean = False
    for _ in range(max_doublings + 1):
        for q in others:
            if q is point:
                continue
            if abs(q.lambda_star - lam_s) <= w and abs(q.x_star - x_s) <= h:
                raise NeedsFinerGridError(
                    "another loss point inside the classification box; "
                    "refine the scan first"
                )
        lo = max(x_s - h, 0.0)
        hi = min(x_s + h, 1.0)
        cols = np.linspace(lam_s - w, lam_s + w, n_cols)
        grid = []
        for lam in cols:
            _, p1w, _ = _psi_window(problem, float(lam), lo, hi, n_rows)
            grid.append(p1w)
        psi_cols = np.array(grid)  # (n_cols, n_rows+1)
        window_xs = np.linspace(lo, hi, n_rows + 1)
        top = psi_cols[:, -1]
        bottom = psi_cols[:, 0]
        touches = any(
            np.any(np.abs(edge) <= edge_tol)
            or np.any((edge[:-1] < 0) != (edge[1:] < 0))
            for edge in (top, bottom)
        )
        if not touches:
            clean = True
            break
        h *= 2.0

    left_zeros = _column_zeros(window_xs, psi_cols[0])
    right_zeros = _column_zeros(window_xs, psi_cols[-1])
    i_minus = sum(1 for z in left_zeros if z < x_s)
    i_plus = sum(1 for z in right_zeros if z > x_s)

    flagged = not clean
    note = "" if clean else "branches could not be confined to vertical sides"

    # weak monotonicity validation: chains of zeros across columns must move
    # one way in x on each side of the loss point
    per_col = [_column_zeros(window_xs, psi_cols[j]) for j in range(n_cols)]
    counts = [len(z) for z in per_col]
    if max(counts, default=0) > 2:
        flagged = True
        note = (note + "; " if note else "") + "more than two branches in the box"

    return LossPoint(
        x_star=point.x_star, lambda_star=point.lambda_star, rho=point.rho,
        i_minus=i_minus, i_plus=i_plus, local_m=2 * (i_plus - i_minus),
        flagged=flagged, note=note,
    )
