"""Coefficient fields and RK4 propagation of solution frames.

The evolving subspaces are represented by matrix solutions of F' = A(x; lam) F.
The G-family starts from the boundary frame at x = 0, the H-family from the
frame at x = 1 (integrated backward).  Column rescaling after each step keeps
stiff problems in range; it multiplies both determinant forms by a common
positive factor and therefore changes nothing at the psi level.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import BlowUpError, DegenerateCoefficientError, InvalidInputError


@dataclass(frozen=True)
class CoefficientField:
    """Evaluator for the n x n coefficient matrix A(x; lambda).

    base_eval/lambda_mat, when present, expose the affine split
    A(x; lam) = base(x) + lam * lambda_mat used by the fast kernels.
    Companion-form builders always provide it.

    Flags record structural assumptions: `continuous` is plain continuity on
    the box; `structure_b` means the diagonal is lambda-independent and
    off-diagonal lambda-differences are x-independent (what makes the
    renormalized crossing flow monotone).
    """

    n: int
    evaluate: Callable[[float, float], np.ndarray]
    base_eval: Optional[Callable[[float], np.ndarray]] = None
    lambda_mat: Optional[np.ndarray] = None
    base_table: Optional[Callable[[np.ndarray], np.ndarray]] = None
    continuous: bool = True
    structure_b: bool = False
    kind: str = "general"
    meta: dict = dc_field(default_factory=dict)

    @property
    def is_affine(self) -> bool:
        return self.base_eval is not None and self.lambda_mat is not None


@dataclass(frozen=True)
class FramePath:
    """Frames of one propagated family on an increasing x grid.

    scale_log[k] is the accumulated log of column rescaling factors at node k;
    raw determinant-form values at that node are the stored-frame values times
    exp(scale_log[k]).  `direction` records which end the run started from.
    """

    lam: float
    xs: np.ndarray
    frames: np.ndarray  # (len(xs), n, m)
    scale_log: np.ndarray
    direction: str  # "forward" (from x=0 side) or "backward" (from x=1 side)

    def frame_at(self, k: int) -> np.ndarray:
        return self.frames[k]


def eval_companion_higher_order(alphas, kappas, x: float, lam: float) -> np.ndarray:
    """Companion matrix of a single n-th order operator.

    alphas: callables (or constants) alpha_0 .. alpha_n of x; kappas: the
    scaling constants kappa_2 .. kappa_n attached to alpha_2 .. alpha_n.
    Phase-space coordinates are y_1 = phi, y_j = kappa_j phi^(j-1) for
    2 <= j <= n-1 and y_n = alpha_n(x) phi^(n-1).
    """
    n = len(alphas) - 1
    if n < 2:
        raise InvalidInputError("need alpha_0 .. alpha_n with n >= 2")
    if len(kappas) != n - 1:
        raise InvalidInputError(f"expected {n - 1} kappa values, got {len(kappas)}")
    if any(k == 0 for k in kappas):
        raise InvalidInputError("kappa values must be non-zero")
    a = [al(x) if callable(al) else float(al) for al in alphas]
    lead = a[n]
    if lead <= 0:
        raise DegenerateCoefficientError(
            f"leading coefficient alpha_n({x}) = {lead} is not positive"
        )
    # scale[j-1] is the factor relating y_j to phi^(j-1)
    scale = [1.0] + [float(k) for k in kappas[:-1]] + [lead]
    A = np.zeros((n, n))
    for i in range(n - 1):
        A[i, i + 1] = scale[i] / scale[i + 1]
    A[n - 1, 0] = lam - a[0]
    for j in range(1, n):
        A[n - 1, j] = -a[j] / scale[j]
    return A


def eval_companion_second_order(B, W, V, x: float, lam: float) -> np.ndarray:
    """First-order form of -B phi'' + W phi' + V phi = lam phi.

    B is a positive diagonal l x l matrix (given as a matrix or a diagonal
    vector); W and V are matrix-valued callables (or constant matrices).
    Coordinates are y = (phi, B phi').
    """
    Bm = np.asarray(B, dtype=float)
    if Bm.ndim == 1:
        Bm = np.diag(Bm)
    l = Bm.shape[0]
    det = float(np.linalg.det(Bm))
    if det == 0.0 or not np.isfinite(det):
        raise InvalidInputError("B must be invertible")
    Binv = np.linalg.inv(Bm)
    Wx = np.asarray(W(x) if callable(W) else W, dtype=float)
    Vx = np.asarray(V(x) if callable(V) else V, dtype=float)
    A = np.zeros((2 * l, 2 * l))
    A[:l, l:] = Binv
    A[l:, :l] = Vx - lam * np.eye(l)
    A[l:, l:] = Wx @ Binv
    return A


def check_structure_b(field: CoefficientField, samples: int = 7, tol: float = 1e-12,
                      lam_bounds=(-1.0, 1.0)) -> bool:
    """Numeric test of the structural assumption behind monotone crossings.

    Samples x, x' and lambda values and checks that the diagonal of A is
    lambda-independent and that off-diagonal lambda-differences are
    x-independent.
    """
    lam1, lam2 = lam_bounds
    xs = np.linspace(0.0, 1.0, samples)
    lams = np.linspace(lam1, lam2, samples)
    a_ref = {x: np.asarray(field.evaluate(x, lam2), dtype=float) for x in xs}
    off = ~np.eye(field.n, dtype=bool)
    scale = max(max(np.max(np.abs(a)) for a in a_ref.values()), 1.0)
    diff0 = None
    for lam in lams:
        diffs = []
        for x in xs:
            a = np.asarray(field.evaluate(x, lam), dtype=float)
            if np.max(np.abs(np.diag(a) - np.diag(a_ref[x]))) > tol * scale:
                return False
            diffs.append((a - a_ref[x])[off])
        diffs = np.array(diffs)
        if np.max(np.abs(diffs - diffs[0])) > tol * scale:
            return False
        if diff0 is None:
            diff0 = diffs[0]
    return True


def _half_step_table(field: CoefficientField, from_x: float, h: float, steps: int):
    cache = field.meta.setdefault("_table_cache", {})
    key = (from_x, h, steps)
    hit = cache.get(key)
    if hit is not None:
        return hit
    xs = from_x + 0.5 * h * np.arange(2 * steps + 1)
    if field.base_table is not None:
        table = np.ascontiguousarray(field.base_table(xs))
    else:
        table = np.array([field.base_eval(float(x)) for x in xs])
    if len(cache) > 128:
        cache.clear()
    cache[key] = table
    return table


def integrate_frame(
    field: CoefficientField,
    init: np.ndarray,
    from_x: float,
    to_x: float,
    steps: int,
    lam: float,
    rescale: bool = True,
) -> FramePath:
    """Classical fixed-step RK4 on F' = A(x; lam) F over a uniform grid.

    Works in either direction; the result is always stored on an increasing
    x grid.  Raises BlowUpError (with the offending x) if the state leaves
    double-precision range.
    """
    init = np.ascontiguousarray(init, dtype=float)
    if init.ndim != 2 or init.shape[0] != field.n:
        raise InvalidInputError(f"init frame must be {field.n} x m")
    if steps < 1:
        raise InvalidInputError("steps must be positive")
    if from_x == to_x:
        raise InvalidInputError("from_x and to_x must differ")
    h = (to_x - from_x) / steps

    if field.is_affine:
        a_half = _half_step_table(field, from_x, h, steps)
        frames, slog = _kernels.rk4_grid(
            a_half, field.lambda_mat, np.array([lam]), init, h, rescale
        )
        frames, slog = frames[0], slog[0]
    else:
        frames = np.empty((steps + 1, field.n, init.shape[1]))
        slog = np.zeros(steps + 1)
        F = init.copy()
        frames[0] = F
        acc = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(steps):
                x = from_x + k * h
                A0 = np.asarray(field.evaluate(x, lam), dtype=float)
                Ah = np.asarray(field.evaluate(x + h / 2, lam), dtype=float)
                A1 = np.asarray(field.evaluate(x + h, lam), dtype=float)
                k1 = A0 @ F
                k2 = Ah @ (F + h / 2 * k1)
                k3 = Ah @ (F + h / 2 * k2)
                k4 = A1 @ (F + h * k3)
                F = F + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                if rescale:
                    nrm = np.linalg.norm(F, axis=0)
                    F = F / nrm
                    acc += float(np.sum(np.log(nrm)))
                frames[k + 1] = F
                slog[k + 1] = acc

    if not np.all(np.isfinite(frames)):
        bad = np.where(~np.isfinite(frames).all(axis=(1, 2)))[0][0]
        raise BlowUpError(
            f"propagation blew up near x = {from_x + bad * h:.6g}",
            x=from_x + bad * h,
        )

    xs = from_x + h * np.arange(steps + 1)
    direction = "forward" if h > 0 else "backward"
    if h < 0:
        xs = xs[::-1].copy()
        frames = frames[::-1].copy()
        slog = slog[::-1].copy()
    return FramePath(lam=lam, xs=xs, frames=frames, scale_log=slog, direction=direction)


def propagate_lambda_grid(
    field: CoefficientField,
    init: np.ndarray,
    lams: np.ndarray,
    from_x: float,
    to_x: float,
    steps: int,
    rescale: bool = True,
):
    """Propagate one initial frame at every lambda of a grid.

    Returns (xs, frames, scale_log) with frames shaped (L, steps+1, n, m) on
    an increasing x grid.  Requires an affine-in-lambda field (all companion
    forms are); general fields fall back to repeated single runs.
    """
    init = np.ascontiguousarray(init, dtype=float)
    lams = np.asarray(lams, dtype=float)
    h = (to_x - from_x) / steps
    if field.is_affine:
        a_half = _half_step_table(field, from_x, h, steps)
        frames, slog = _kernels.rk4_grid(a_half, field.lambda_mat, lams, init, h, rescale)
    else:
        paths = [
            integrate_frame(field, init, from_x, to_x, steps, lam, rescale)
            for lam in lams
        ]
        xs = paths[0].xs
        frames = np.stack([p.frames for p in paths])
        slog = np.stack([p.scale_log for p in paths])
        return xs, frames, slog
    if not np.all(np.isfinite(frames)):
        raise BlowUpError("lambda-grid propagation blew up", x=None)
    xs = from_x + h * np.arange(steps + 1)
    if h < 0:
        xs = xs[::-1].copy()
        frames = frames[:, ::-1].copy()
        slog = slog[:, ::-1].copy()
    return xs, frames, slog
